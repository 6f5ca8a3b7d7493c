// Evaluation metrics against independent oracles: a per-pixel counting oracle
// for the PR sweep, a straight-from-definition reimplementation of the
// structure measure, and the enhanced-alignment formula evaluated literally.

#include <gtest/gtest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <vector>

#include "glnet/glnet.hpp"
#include "json.hpp"

namespace {

using glnet::MapPair;
using glnet::MetricConfig;
using glnet::MetricReport;
using glnet::PrPoint;
using glnet::Rng;
using glnet::Tensor;

Tensor plane_from(const std::vector<float>& v, int h, int w) {
  return Tensor::from({h, w}, v);
}

// Random prediction map quantized to the 8-bit grid so threshold edge cases
// (values exactly on a bin boundary) are exercised.
Tensor random_pred(Rng& rng, int h, int w) {
  Tensor t = Tensor::zeros({h, w});
  for (std::int64_t i = 0; i < t.size(); ++i) {
    t.data()[i] = static_cast<float>(rng.uniform_int(256)) / 255.f;
  }
  return t;
}

Tensor random_blob_gt(Rng& rng, int h, int w) {
  Tensor t = Tensor::zeros({h, w});
  const int y0 = static_cast<int>(rng.uniform_int(h / 2 + 1));
  const int x0 = static_cast<int>(rng.uniform_int(w / 2 + 1));
  const int y1 = y0 + 2 + static_cast<int>(rng.uniform_int(h / 2));
  const int x1 = x0 + 2 + static_cast<int>(rng.uniform_int(w / 2));
  for (int y = y0; y < std::min(y1, h); ++y) {
    for (int x = x0; x < std::min(x1, w); ++x) t.data()[y * w + x] = 1.f;
  }
  return t;
}

struct OracleCurve {
  std::vector<double> precision, recall;
};

// Counting oracle straight from the stated convention: binarize as
// 255*v >= t, per-image precision/recall with the library eps, then a
// dataset mean (summed in sorted order, as documented).
OracleCurve oracle_pr(const std::vector<MapPair>& pairs, double eps) {
  OracleCurve out;
  out.precision.resize(256);
  out.recall.resize(256);
  for (int t = 0; t < 256; ++t) {
    std::vector<double> ps, rs;
    for (const MapPair& mp : pairs) {
      std::int64_t tp = 0, fp = 0, fn = 0;
      for (std::int64_t i = 0; i < mp.prediction.size(); ++i) {
        const bool on = 255.0 * static_cast<double>(mp.prediction.data()[i]) >=
                        static_cast<double>(t);
        const bool pos = mp.gt.data()[i] != 0.f;
        if (on && pos) ++tp;
        if (on && !pos) ++fp;
        if (!on && pos) ++fn;
      }
      ps.push_back(static_cast<double>(tp) / (static_cast<double>(tp + fp) + eps));
      rs.push_back(static_cast<double>(tp) / (static_cast<double>(tp + fn) + eps));
    }
    std::sort(ps.begin(), ps.end());
    std::sort(rs.begin(), rs.end());
    out.precision[t] = std::accumulate(ps.begin(), ps.end(), 0.0) / static_cast<double>(ps.size());
    out.recall[t] = std::accumulate(rs.begin(), rs.end(), 0.0) / static_cast<double>(rs.size());
  }
  return out;
}

// Enhanced-alignment score evaluated literally: bias-removed binarized map
// and GT, per-pixel alignment, quadratic enhancement, mean.
double oracle_e_at(const MapPair& mp, int t, double eps) {
  const std::int64_t n = mp.prediction.size();
  std::vector<double> b(static_cast<std::size_t>(n));
  double mu_b = 0.0, mu_t = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    b[static_cast<std::size_t>(i)] =
        255.0 * static_cast<double>(mp.prediction.data()[i]) >= static_cast<double>(t) ? 1.0 : 0.0;
    mu_b += b[static_cast<std::size_t>(i)];
    mu_t += mp.gt.data()[i] != 0.f ? 1.0 : 0.0;
  }
  mu_b /= static_cast<double>(n);
  mu_t /= static_cast<double>(n);
  double acc = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    const double phi_fm = b[static_cast<std::size_t>(i)] - mu_b;
    const double phi_gt = (mp.gt.data()[i] != 0.f ? 1.0 : 0.0) - mu_t;
    const double align = 2.0 * phi_gt * phi_fm / (phi_gt * phi_gt + phi_fm * phi_fm + eps);
    const double theta = 0.25 * (1.0 + align) * (1.0 + align);
    acc += theta;
  }
  return acc / static_cast<double>(n);
}

// Structure measure re-derived from its published definition, organised as
// region pixel lists instead of the library's streaming passes.
double oracle_object_term(const std::vector<double>& xs) {
  if (xs.empty()) return 0.0;
  const double m = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  double var = 0.0;
  for (double x : xs) var += (x - m) * (x - m);
  const double sd = xs.size() > 1 ? std::sqrt(var / static_cast<double>(xs.size() - 1)) : 0.0;
  return 2.0 * m / (m * m + 1.0 + sd + std::numeric_limits<double>::epsilon());
}

double oracle_ssim(const std::vector<double>& xs, const std::vector<double>& ys) {
  const double eps = std::numeric_limits<double>::epsilon();
  const std::size_t n = xs.size();
  if (n == 0) return 0.0;
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(n);
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / static_cast<double>(n);
  double vx = 0.0, vy = 0.0, vxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    vx += (xs[i] - mx) * (xs[i] - mx);
    vy += (ys[i] - my) * (ys[i] - my);
    vxy += (xs[i] - mx) * (ys[i] - my);
  }
  const double d = static_cast<double>(n - 1) + eps;
  vx /= d;
  vy /= d;
  vxy /= d;
  const double num = 4.0 * mx * my * vxy;
  const double den = (mx * mx + my * my) * (vx + vy);
  if (num != 0.0) return num / (den + eps);
  return den == 0.0 ? 1.0 : 0.0;
}

double oracle_s(const Tensor& pred, const Tensor& gt, double alpha) {
  const int h = pred.extent(0), w = pred.extent(1);
  const std::int64_t n = pred.size();
  std::int64_t npos = 0;
  for (std::int64_t i = 0; i < n; ++i) npos += gt.data()[i] != 0.f ? 1 : 0;
  if (npos == 0 || npos == n) {
    double pm = 0.0;
    for (std::int64_t i = 0; i < n; ++i) pm += pred.data()[i];
    pm /= static_cast<double>(n);
    return npos == 0 ? 1.0 - pm : pm;
  }
  // object-aware term
  std::vector<double> fg, bg;
  for (std::int64_t i = 0; i < n; ++i) {
    if (gt.data()[i] != 0.f) {
      fg.push_back(pred.data()[i]);
    } else {
      bg.push_back(1.0 - pred.data()[i]);
    }
  }
  const double mu = static_cast<double>(npos) / static_cast<double>(n);
  const double so = mu * oracle_object_term(fg) + (1.0 - mu) * oracle_object_term(bg);
  // region-aware term: split at the GT centroid (1-based, rounded)
  double rx = 0.0, ry = 0.0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (gt.data()[y * w + x] != 0.f) {
        rx += x + 1.0;
        ry += y + 1.0;
      }
    }
  }
  const int cx = static_cast<int>(std::llround(rx / static_cast<double>(npos)));
  const int cy = static_cast<int>(std::llround(ry / static_cast<double>(npos)));
  double sr = 0.0;
  const std::array<std::array<int, 4>, 4> quads = {{{0, cy, 0, cx},
                                                    {0, cy, cx, w},
                                                    {cy, h, 0, cx},
                                                    {cy, h, cx, w}}};
  for (const auto& q : quads) {
    std::vector<double> xs, ys;
    for (int y = q[0]; y < q[1]; ++y) {
      for (int x = q[2]; x < q[3]; ++x) {
        xs.push_back(pred.data()[y * w + x]);
        ys.push_back(gt.data()[y * w + x]);
      }
    }
    const double weight = static_cast<double>(xs.size()) / static_cast<double>(n);
    sr += weight * oracle_ssim(xs, ys);
  }
  const double s = alpha * so + (1.0 - alpha) * sr;
  return s < 0.0 ? 0.0 : s;
}

std::vector<MapPair> random_dataset(Rng& rng, int count, int h, int w) {
  std::vector<MapPair> pairs;
  for (int i = 0; i < count; ++i) {
    pairs.push_back({random_pred(rng, h, w), random_blob_gt(rng, h, w)});
  }
  return pairs;
}

// --- PR curve ----------------------------------------------------------------

TEST(PrCurve, MatchesCountingOracleAtEveryThreshold) {
  Rng rng(1);
  const std::vector<MapPair> pairs = random_dataset(rng, 3, 8, 8);
  const MetricConfig cfg;
  const MetricReport rep = glnet::compute_metrics(pairs, cfg);
  const OracleCurve oc = oracle_pr(pairs, cfg.eps);
  ASSERT_EQ(rep.pr.size(), 256u);
  for (int t = 0; t < 256; ++t) {
    EXPECT_EQ(rep.pr[static_cast<std::size_t>(t)].threshold, t);
    ASSERT_NEAR(rep.pr[static_cast<std::size_t>(t)].precision, oc.precision[static_cast<std::size_t>(t)], 1e-9);
    ASSERT_NEAR(rep.pr[static_cast<std::size_t>(t)].recall, oc.recall[static_cast<std::size_t>(t)], 1e-9);
  }
  // max F recomputed from the oracle curve with the same formula
  double best = 0.0;
  for (int t = 0; t < 256; ++t) {
    const double p = oc.precision[static_cast<std::size_t>(t)];
    const double r = oc.recall[static_cast<std::size_t>(t)];
    const double denom = cfg.beta2 * p + r;
    if (denom > 0.0) best = std::max(best, (1.0 + cfg.beta2) * p * r / denom);
  }
  EXPECT_NEAR(rep.max_f, best, 1e-9);
}

TEST(PrCurve, PerfectPredictionSaturatesBothAxes) {
  Rng rng(2);
  Tensor gt = random_blob_gt(rng, 8, 8);
  const std::vector<MapPair> pairs{{gt, gt}};
  const MetricReport rep = glnet::compute_metrics(pairs, {});
  for (int t = 1; t < 256; ++t) {
    EXPECT_NEAR(rep.pr[static_cast<std::size_t>(t)].precision, 1.0, 1e-6);
    EXPECT_NEAR(rep.pr[static_cast<std::size_t>(t)].recall, 1.0, 1e-6);
  }
  EXPECT_NEAR(rep.max_f, 1.0, 1e-6);
}

TEST(PrCurve, AllOnesPredictionHasFullRecall) {
  Rng rng(3);
  Tensor gt = random_blob_gt(rng, 8, 8);
  std::int64_t npos = 0;
  for (std::int64_t i = 0; i < gt.size(); ++i) npos += gt.data()[i] != 0.f ? 1 : 0;
  const std::vector<MapPair> pairs{{Tensor::full({8, 8}, 1.f), gt}};
  const std::vector<PrPoint> pr = glnet::pr_curve(pairs, {});
  const double expected_p = static_cast<double>(npos) / 64.0;
  for (const PrPoint& pt : pr) {
    EXPECT_NEAR(pt.recall, 1.0, 1e-6);
    EXPECT_NEAR(pt.precision, expected_p, 1e-6);
  }
}

TEST(PrCurve, RecallNeverIncreasesWithThreshold) {
  Rng rng(4);
  const std::vector<MapPair> pairs = random_dataset(rng, 4, 12, 9);
  const std::vector<PrPoint> pr = glnet::pr_curve(pairs, {});
  for (int t = 1; t < 256; ++t) {
    ASSERT_LE(pr[static_cast<std::size_t>(t)].recall, pr[static_cast<std::size_t>(t - 1)].recall);
  }
}

TEST(PrCurve, RequiresAPositivePixelButScalarMetricsDoNot) {
  const std::vector<MapPair> pairs{{Tensor::zeros({4, 4}), Tensor::zeros({4, 4})}};
  EXPECT_THROW(glnet::pr_curve(pairs, {}), glnet::ShapeError);
  EXPECT_THROW(glnet::compute_metrics(pairs, {}), glnet::ShapeError);
  EXPECT_NO_THROW(glnet::mae(pairs));
  EXPECT_NO_THROW(glnet::s_measure(pairs));
  EXPECT_NO_THROW(glnet::e_measure(pairs));
}

TEST(FMeasure, IdentityWhenPrecisionEqualsRecall) {
  // Algebra first: the weighted harmonic form collapses to p when P == R.
  for (double p : {0.1, 0.25, 0.5, 0.75, 0.9}) {
    const double f = 1.3 * p * p / (0.3 * p + p);
    EXPECT_NEAR(f, p, 1e-15);
  }
  // And on a real curve: a perfect prediction has P == R bitwise at every
  // positive threshold, so max F must equal that common value.
  Rng rng(5);
  Tensor gt = random_blob_gt(rng, 8, 8);
  const std::vector<MapPair> pairs{{gt, gt}};
  const MetricReport rep = glnet::compute_metrics(pairs, {});
  ASSERT_EQ(rep.pr[128].precision, rep.pr[128].recall);
  EXPECT_NEAR(rep.max_f, rep.pr[128].precision, 1e-14);
}

// --- MAE ------------------------------------------------------------------------

TEST(Mae, HandComputedQuad) {
  const std::vector<MapPair> pairs{
      {plane_from({1.f, 0.f, 0.5f, 0.5f}, 2, 2), plane_from({1.f, 0.f, 0.f, 1.f}, 2, 2)}};
  EXPECT_DOUBLE_EQ(glnet::mae(pairs), 0.25);
}

TEST(Mae, IdentityAndFullInversion) {
  Rng rng(6);
  Tensor gt = random_blob_gt(rng, 8, 8);
  Tensor inv = Tensor::zeros({8, 8});
  for (std::int64_t i = 0; i < gt.size(); ++i) inv.data()[i] = 1.f - gt.data()[i];
  EXPECT_DOUBLE_EQ(glnet::mae({{gt.detach_copy(), gt}}), 0.0);
  EXPECT_DOUBLE_EQ(glnet::mae({{inv, gt}}), 1.0);
}

TEST(Mae, ComplementPredictionsSumToOne) {
  Rng rng(7);
  Tensor gt = random_blob_gt(rng, 8, 8);
  {
    // dyadic prediction values: 1 - v is exact, so the identity is exact
    Tensor p = Tensor::zeros({8, 8});
    Tensor q = Tensor::zeros({8, 8});
    for (std::int64_t i = 0; i < p.size(); ++i) {
      p.data()[i] = static_cast<float>(rng.uniform_int(65)) / 64.f;
      q.data()[i] = 1.f - p.data()[i];
    }
    EXPECT_NEAR(glnet::mae({{p, gt}}) + glnet::mae({{q, gt.detach_copy()}}), 1.0, 1e-12);
  }
  {
    Tensor p = Tensor::zeros({8, 8});
    Tensor q = Tensor::zeros({8, 8});
    for (std::int64_t i = 0; i < p.size(); ++i) {
      p.data()[i] = static_cast<float>(rng.uniform());
      q.data()[i] = 1.f - p.data()[i];
    }
    EXPECT_NEAR(glnet::mae({{p, gt}}) + glnet::mae({{q, gt.detach_copy()}}), 1.0, 1e-6);
  }
}

TEST(Mae, MidGrayAgainstBinaryMask) {
  Rng rng(8);
  Tensor gt = random_blob_gt(rng, 8, 8);
  double expect = 0.0;
  const float mid = 128.f / 255.f;
  for (std::int64_t i = 0; i < gt.size(); ++i) {
    expect += std::abs(static_cast<double>(mid) - static_cast<double>(gt.data()[i]));
  }
  expect /= 64.0;
  EXPECT_NEAR(glnet::mae({{Tensor::full({8, 8}, mid), gt}}), expect, 1e-12);
}

// --- S-measure -------------------------------------------------------------------

TEST(SMeasure, PerfectBinaryPredictionScoresNearOne) {
  Rng rng(9);
  for (int trial = 0; trial < 5; ++trial) {
    Tensor gt = random_blob_gt(rng, 16, 16);
    const double s = glnet::s_measure({{gt.detach_copy(), gt}});
    EXPECT_GE(s, 0.98);
    EXPECT_LE(s, 1.0);
  }
}

TEST(SMeasure, DegenerateFallbackEndpoints) {
  const Tensor empty_gt = Tensor::zeros({6, 6});
  EXPECT_DOUBLE_EQ(glnet::s_measure({{Tensor::zeros({6, 6}), empty_gt}}), 1.0);
  EXPECT_DOUBLE_EQ(glnet::s_measure({{Tensor::full({6, 6}, 1.f), empty_gt}}), 0.0);
  const Tensor full_gt = Tensor::full({6, 6}, 1.f);
  EXPECT_DOUBLE_EQ(glnet::s_measure({{Tensor::full({6, 6}, 1.f), full_gt}}), 1.0);
  EXPECT_DOUBLE_EQ(glnet::s_measure({{Tensor::zeros({6, 6}), full_gt}}), 0.0);
}

TEST(SMeasure, MatchesFromDefinitionReimplementation) {
  Rng rng(10);
  const MetricConfig cfg;
  for (int trial = 0; trial < 10; ++trial) {
    Tensor gt = random_blob_gt(rng, 16, 16);
    // smooth prediction correlated with the mask plus noise
    Tensor pred = Tensor::zeros({16, 16});
    for (std::int64_t i = 0; i < pred.size(); ++i) {
      const double v = 0.7 * gt.data()[i] + 0.3 * rng.uniform();
      pred.data()[i] = static_cast<float>(v);
    }
    const double got = glnet::s_measure({{pred, gt}}, cfg);
    const double want = oracle_s(pred, gt, cfg.s_alpha);
    ASSERT_NEAR(got, want, 1e-6) << "trial " << trial;
  }
}

// --- E-measure -------------------------------------------------------------------

TEST(EMeasure, PerfectPredictionReachesOne) {
  Rng rng(11);
  Tensor gt = random_blob_gt(rng, 8, 8);
  EXPECT_NEAR(glnet::e_measure({{gt.detach_copy(), gt}}), 1.0, 1e-6);
}

TEST(EMeasure, InvertedPredictionAntiAligns) {
  Rng rng(12);
  Tensor gt = random_blob_gt(rng, 8, 8);
  Tensor inv = Tensor::zeros({8, 8});
  for (std::int64_t i = 0; i < gt.size(); ++i) inv.data()[i] = 1.f - gt.data()[i];
  const MapPair mp{inv, gt};
  const MetricConfig cfg;
  const auto stats = glnet::detail::analyze_pairs({mp}, cfg);
  // at every inverting threshold the alignment is -1 everywhere: theta = 0
  for (int t = 1; t < 256; ++t) {
    ASSERT_NEAR(glnet::detail::e_pair_at(stats[0], t, cfg.eps), 0.0, 1e-6) << "t=" << t;
  }
  // the reported maximum comes from the all-ones binarization at t = 0,
  // where the bias-removed prediction map vanishes and theta is 1/4
  EXPECT_NEAR(glnet::e_measure({mp}), 0.25, 1e-9);
}

TEST(EMeasure, MatchesDefinitionOracleAtAllThresholds) {
  Rng rng(13);
  const MetricConfig cfg;
  for (int trial = 0; trial < 3; ++trial) {
    MapPair mp{random_pred(rng, 8, 8), random_blob_gt(rng, 8, 8)};
    const auto stats = glnet::detail::analyze_pairs({mp}, cfg);
    for (int t = 0; t < 256; ++t) {
      const double got = glnet::detail::e_pair_at(stats[0], t, cfg.eps);
      const double want = oracle_e_at(mp, t, cfg.eps);
      ASSERT_NEAR(got, want, 1e-9) << "trial " << trial << " t=" << t;
    }
  }
}

// --- report-level properties -------------------------------------------------------

TEST(Report, AllScoresWithinUnitInterval) {
  Rng rng(14);
  for (int trial = 0; trial < 5; ++trial) {
    const std::vector<MapPair> pairs = random_dataset(rng, 3, 10, 7);
    const MetricReport rep = glnet::compute_metrics(pairs, {});
    for (double v : {rep.max_f, rep.mae, rep.s, rep.s_object, rep.s_region, rep.max_e}) {
      ASSERT_GE(v, 0.0);
      ASSERT_LE(v, 1.0);
    }
    for (const PrPoint& p : rep.pr) {
      ASSERT_GE(p.precision, 0.0);
      ASSERT_LE(p.precision, 1.0);
      ASSERT_GE(p.recall, 0.0);
      ASSERT_LE(p.recall, 1.0);
    }
  }
}

TEST(Report, PermutationOfPairsIsBitwiseInvariant) {
  Rng rng(15);
  std::vector<MapPair> pairs = random_dataset(rng, 5, 9, 9);
  const MetricReport a = glnet::compute_metrics(pairs, {});
  std::vector<MapPair> shuffled{pairs[3], pairs[0], pairs[4], pairs[2], pairs[1]};
  const MetricReport b = glnet::compute_metrics(shuffled, {});
  EXPECT_EQ(a.max_f, b.max_f);
  EXPECT_EQ(a.mae, b.mae);
  EXPECT_EQ(a.s, b.s);
  EXPECT_EQ(a.s_object, b.s_object);
  EXPECT_EQ(a.s_region, b.s_region);
  EXPECT_EQ(a.max_e, b.max_e);
  for (int t = 0; t < 256; ++t) {
    ASSERT_EQ(a.pr[static_cast<std::size_t>(t)].precision, b.pr[static_cast<std::size_t>(t)].precision);
    ASSERT_EQ(a.pr[static_cast<std::size_t>(t)].recall, b.pr[static_cast<std::size_t>(t)].recall);
  }
}

TEST(Report, InputValidation) {
  const std::vector<MapPair> empty;
  EXPECT_THROW(glnet::compute_metrics(empty, {}), glnet::ShapeError);

  Rng rng(16);
  Tensor gt = random_blob_gt(rng, 4, 4);
  Tensor wrong_rank = Tensor::zeros({4});
  EXPECT_THROW(glnet::compute_metrics({{wrong_rank, gt}}, {}), glnet::ShapeError);
  Tensor two_channel = Tensor::zeros({2, 4, 4});
  EXPECT_THROW(glnet::compute_metrics({{two_channel, gt}}, {}), glnet::ShapeError);
  Tensor mismatched = Tensor::zeros({5, 4});
  EXPECT_THROW(glnet::compute_metrics({{mismatched, gt}}, {}), glnet::ShapeError);
  Tensor gray_gt = Tensor::full({4, 4}, 0.5f);
  EXPECT_THROW(glnet::compute_metrics({{Tensor::zeros({4, 4}), gray_gt}}, {}), glnet::ShapeError);
  Tensor out_of_range = Tensor::full({4, 4}, 1.5f);
  EXPECT_THROW(glnet::compute_metrics({{out_of_range, gt}}, {}), glnet::ShapeError);

  // a [1,H,W] prediction plane is accepted
  Tensor chw = Tensor::zeros({1, 4, 4});
  EXPECT_NO_THROW(glnet::compute_metrics({{chw, gt}}, {}));
}

TEST(Report, ConfigValidation) {
  MetricConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.beta2 = 0.0;
  EXPECT_THROW(cfg.validate(), glnet::ConfigError);
  cfg = MetricConfig{};
  cfg.s_alpha = 1.5;
  EXPECT_THROW(cfg.validate(), glnet::ConfigError);
  cfg = MetricConfig{};
  cfg.thresholds = 128;
  EXPECT_THROW(cfg.validate(), glnet::ConfigError);
  cfg = MetricConfig{};
  cfg.gt_binarize_level = 0;
  EXPECT_THROW(cfg.validate(), glnet::ConfigError);
  cfg = MetricConfig{};
  cfg.eps = 0.0;
  EXPECT_THROW(cfg.validate(), glnet::ConfigError);
}

// --- writers ------------------------------------------------------------------------

TEST(Writers, PrCsvHasHeaderAnd256Rows) {
  Rng rng(17);
  const std::vector<MapPair> pairs = random_dataset(rng, 2, 8, 8);
  const std::vector<PrPoint> pr = glnet::pr_curve(pairs, {});
  const std::string path = testing::TempDir() + "glnet_pr_test.csv";
  glnet::write_pr_csv(path, pr);

  std::ifstream in(path);
  ASSERT_TRUE(in.good());
  std::string line;
  ASSERT_TRUE(std::getline(in, line));
  EXPECT_EQ(line, "threshold,precision,recall");
  int rows = 0;
  while (std::getline(in, line)) {
    int t = -1;
    double p = -1.0, r = -1.0;
    ASSERT_EQ(std::sscanf(line.c_str(), "%d,%lf,%lf", &t, &p, &r), 3);
    ASSERT_EQ(t, rows);
    ASSERT_NEAR(p, pr[static_cast<std::size_t>(rows)].precision, 5e-7);
    ASSERT_NEAR(r, pr[static_cast<std::size_t>(rows)].recall, 5e-7);
    ++rows;
  }
  EXPECT_EQ(rows, 256);
  std::remove(path.c_str());
}

TEST(Writers, ReportJsonRoundTripsThroughAParser) {
  Rng rng(18);
  const std::vector<MapPair> pairs = random_dataset(rng, 2, 8, 8);
  const MetricReport rep = glnet::compute_metrics(pairs, {});
  const std::string path = testing::TempDir() + "glnet_report_test.json";
  std::map<std::string, MetricReport> groups{{"groupA", rep}, {"groupB", rep}};
  glnet::write_report_json(path, rep, &groups);

  std::ifstream in(path);
  ASSERT_TRUE(in.good());
  nlohmann::json j = nlohmann::json::parse(in);
  EXPECT_NEAR(j.at("max_f").get<double>(), rep.max_f, 5e-7);
  EXPECT_NEAR(j.at("mae").get<double>(), rep.mae, 5e-7);
  EXPECT_NEAR(j.at("s").get<double>(), rep.s, 5e-7);
  EXPECT_NEAR(j.at("s_object").get<double>(), rep.s_object, 5e-7);
  EXPECT_NEAR(j.at("s_region").get<double>(), rep.s_region, 5e-7);
  EXPECT_NEAR(j.at("max_e").get<double>(), rep.max_e, 5e-7);
  ASSERT_TRUE(j.contains("per_group"));
  EXPECT_EQ(j.at("per_group").size(), 2u);
  EXPECT_NEAR(j.at("per_group").at("groupA").at("max_f").get<double>(), rep.max_f, 5e-7);
  std::remove(path.c_str());

  EXPECT_THROW(glnet::write_pr_csv("/nonexistent-dir/x.csv", rep.pr), glnet::IoError);
  EXPECT_THROW(glnet::write_report_json("/nonexistent-dir/x.json", rep), glnet::IoError);
}

}  // namespace
