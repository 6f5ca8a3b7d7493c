#pragma once

// Umbrella header: the whole library.

#include "glnet/attention.hpp"
#include "glnet/backbone.hpp"
#include "glnet/checkpoint.hpp"
#include "glnet/conv.hpp"
#include "glnet/dataset.hpp"
#include "glnet/gcm.hpp"
#include "glnet/gemm.hpp"
#include "glnet/gla.hpp"
#include "glnet/gradcheck.hpp"
#include "glnet/image_io.hpp"
#include "glnet/lcm.hpp"
#include "glnet/metrics.hpp"
#include "glnet/model.hpp"
#include "glnet/nn.hpp"
#include "glnet/ops.hpp"
#include "glnet/optim.hpp"
#include "glnet/parallel.hpp"
#include "glnet/rng.hpp"
#include "glnet/synth.hpp"
#include "glnet/tensor.hpp"
#include "glnet/train.hpp"
