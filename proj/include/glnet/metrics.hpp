#pragma once

// Saliency evaluation suite: PR curve over 256 thresholds, max F-measure,
// MAE, S-measure (object + region structural similarity), and max E-measure
// (enhanced alignment).
//
// Threshold semantics: a prediction pixel v is binarized "on" at level
// t in 0..255 iff 255*v >= t, evaluated in double (exact for f32 inputs, so
// it is literally equivalent to v >= t/255). All 256 levels of each image
// are derived from one histogram of floor(255*v) split by GT polarity.
//
// Aggregation: per-image scores first, then a dataset mean. Dataset means
// sum the per-image values in ascending sorted order so that permuting the
// input pairs cannot change any reported score even at the bits level.
// F and E use the mean-then-max convention: dataset-mean curve over
// thresholds, then the maximum of that curve.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "glnet/tensor.hpp"

namespace glnet {

struct MetricConfig {
  double beta2 = 0.3;    // F-measure beta^2
  double s_alpha = 0.5;  // S-measure object/region balance
  int thresholds = 256;  // full 8-bit sweep
  int gt_binarize_level = 128;
  double eps = 1e-8;

  void validate() const {
    check(beta2 > 0.0, "metrics: beta2 must be > 0", ConfigError{""});
    check(s_alpha >= 0.0 && s_alpha <= 1.0, "metrics: s_alpha must be in [0,1]", ConfigError{""});
    check(thresholds == 256, "metrics: thresholds must be 256 (8-bit sweep)", ConfigError{""});
    check(gt_binarize_level >= 1 && gt_binarize_level <= 255,
          "metrics: gt_binarize_level must be in [1,255]", ConfigError{""});
    check(eps > 0.0, "metrics: eps must be > 0", ConfigError{""});
  }
};

struct MapPair {
  Tensor prediction;  // [H,W] or [1,H,W], values in [0,1]
  Tensor gt;          // same extents, binary {0,1}
};

struct PrPoint {
  int threshold = 0;
  double precision = 0.0;
  double recall = 0.0;
};

struct MetricReport {
  double max_f = 0.0;
  double mae = 0.0;
  double s = 0.0;
  double s_object = 0.0;
  double s_region = 0.0;
  double max_e = 0.0;
  std::vector<PrPoint> pr;
};

namespace detail {

struct PlaneView {
  const float* p = nullptr;
  int h = 0, w = 0;
  std::int64_t n() const { return static_cast<std::int64_t>(h) * w; }
};

inline PlaneView plane_view(const Tensor& t, const char* what) {
  if (t.rank() == 2) return {t.data(), t.extent(0), t.extent(1)};
  if (t.rank() == 3 && t.extent(0) == 1) return {t.data(), t.extent(1), t.extent(2)};
  throw ShapeError(std::string("metrics: ") + what + " must be [H,W] or [1,H,W], got " +
                   shape_str(t.shape()));
}

// Mean of values summed in ascending order; permutation invariant bitwise.
inline double sorted_mean(std::vector<double> v) {
  check(!v.empty(), "metrics: empty score list");
  std::sort(v.begin(), v.end());
  double acc = 0.0;
  for (double x : v) acc += x;
  return acc / static_cast<double>(v.size());
}

inline int bin_of(float v) {
  const int b = static_cast<int>(std::floor(255.0 * static_cast<double>(v)));
  return b < 0 ? 0 : (b > 255 ? 255 : b);
}

struct PairStats {
  // cum[t] = number of pixels with bin >= t, split by GT polarity.
  std::array<std::int64_t, 256> pos_cum{};
  std::array<std::int64_t, 256> neg_cum{};
  std::int64_t npos = 0, nneg = 0, n = 0;
  double mae = 0.0;
  double s = 0.0, s_o = 0.0, s_r = 0.0;
};

// --- S-measure internals (structure-measure conventions) -------------------

inline double s_object_term(const float* pred, const float* gt, std::int64_t n,
                            bool foreground) {
  // mean and sample std of the (possibly inverted) prediction on one region
  const double eps = std::numeric_limits<double>::epsilon();
  double sum = 0.0;
  std::int64_t cnt = 0;
  for (std::int64_t i = 0; i < n; ++i) {
    if ((gt[i] != 0.0f) == foreground) {
      sum += foreground ? pred[i] : 1.0 - pred[i];
      ++cnt;
    }
  }
  if (cnt == 0) return 0.0;
  const double x = sum / static_cast<double>(cnt);
  double var = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    if ((gt[i] != 0.0f) == foreground) {
      const double d = (foreground ? pred[i] : 1.0 - pred[i]) - x;
      var += d * d;
    }
  }
  const double sigma = cnt > 1 ? std::sqrt(var / static_cast<double>(cnt - 1)) : 0.0;
  return 2.0 * x / (x * x + 1.0 + sigma + eps);
}

inline double s_region_ssim(const float* pred, const float* gt, int w, int y0, int y1,
                            int x0, int x1) {
  const double eps = std::numeric_limits<double>::epsilon();
  const std::int64_t cnt = static_cast<std::int64_t>(y1 - y0) * (x1 - x0);
  if (cnt <= 0) return 0.0;  // empty quadrant carries zero area weight
  double sx = 0.0, sy = 0.0;
  for (int y = y0; y < y1; ++y) {
    for (int x = x0; x < x1; ++x) {
      const std::int64_t i = static_cast<std::int64_t>(y) * w + x;
      sx += pred[i];
      sy += gt[i];
    }
  }
  const double mx = sx / static_cast<double>(cnt);
  const double my = sy / static_cast<double>(cnt);
  double vxx = 0.0, vyy = 0.0, vxy = 0.0;
  for (int y = y0; y < y1; ++y) {
    for (int x = x0; x < x1; ++x) {
      const std::int64_t i = static_cast<std::int64_t>(y) * w + x;
      const double dx = pred[i] - mx;
      const double dy = gt[i] - my;
      vxx += dx * dx;
      vyy += dy * dy;
      vxy += dx * dy;
    }
  }
  const double denom = static_cast<double>(cnt - 1) + eps;
  vxx /= denom;
  vyy /= denom;
  vxy /= denom;
  const double alpha = 4.0 * mx * my * vxy;
  const double beta = (mx * mx + my * my) * (vxx + vyy);
  if (alpha != 0.0) return alpha / (beta + eps);
  return beta == 0.0 ? 1.0 : 0.0;
}

inline double structure_measure_single(const float* pred, const float* gt, int h, int w,
                                       double s_alpha, double* so_out, double* sr_out) {
  const std::int64_t n = static_cast<std::int64_t>(h) * w;
  std::int64_t npos = 0;
  for (std::int64_t i = 0; i < n; ++i) npos += gt[i] != 0.0f ? 1 : 0;
  if (npos == 0 || npos == n) {
    // degenerate GT: fall back to a mean-based score
    double pm = 0.0;
    for (std::int64_t i = 0; i < n; ++i) pm += pred[i];
    pm /= static_cast<double>(n);
    const double q = npos == 0 ? 1.0 - pm : pm;
    if (so_out) *so_out = q;
    if (sr_out) *sr_out = q;
    return q;
  }
  // object term: foreground/background mean-and-deviation similarity
  const double mu = static_cast<double>(npos) / static_cast<double>(n);
  const double o_fg = s_object_term(pred, gt, n, true);
  const double o_bg = s_object_term(pred, gt, n, false);
  const double so = mu * o_fg + (1.0 - mu) * o_bg;
  // region term: split both maps into 4 blocks at the GT centroid
  // (1-based, rounded half away from zero), area-weighted ssim per block
  double col_mass = 0.0, row_mass = 0.0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (gt[static_cast<std::int64_t>(y) * w + x] != 0.0f) {
        col_mass += x + 1.0;
        row_mass += y + 1.0;
      }
    }
  }
  const int cx = static_cast<int>(std::llround(col_mass / static_cast<double>(npos)));
  const int cy = static_cast<int>(std::llround(row_mass / static_cast<double>(npos)));
  const double total = static_cast<double>(n);
  const double w1 = static_cast<double>(cx) * cy / total;
  const double w2 = static_cast<double>(w - cx) * cy / total;
  const double w3 = static_cast<double>(cx) * (h - cy) / total;
  const double w4 = 1.0 - w1 - w2 - w3;
  const double q1 = s_region_ssim(pred, gt, w, 0, cy, 0, cx);
  const double q2 = s_region_ssim(pred, gt, w, 0, cy, cx, w);
  const double q3 = s_region_ssim(pred, gt, w, cy, h, 0, cx);
  const double q4 = s_region_ssim(pred, gt, w, cy, h, cx, w);
  const double sr = w1 * q1 + w2 * q2 + w3 * q3 + w4 * q4;
  if (so_out) *so_out = so;
  // region ssim is correlation-like and can be negative; the combined score
  // below uses the raw value (as the reference does) but every reported
  // component is clamped to [0,1]
  if (sr_out) *sr_out = sr < 0.0 ? 0.0 : sr;
  double q = s_alpha * so + (1.0 - s_alpha) * sr;
  return q < 0.0 ? 0.0 : q;
}

inline PairStats analyze_pair(const MapPair& pair, const MetricConfig& cfg) {
  const PlaneView pred = plane_view(pair.prediction, "prediction");
  const PlaneView gt = plane_view(pair.gt, "gt");
  check(pred.h == gt.h && pred.w == gt.w,
        "metrics: prediction/gt extents differ: " + shape_str(pair.prediction.shape()) + " vs " +
            shape_str(pair.gt.shape()));
  PairStats st;
  st.n = pred.n();
  std::array<std::int64_t, 256> pos_hist{}, neg_hist{};
  double abs_err = 0.0;
  for (std::int64_t i = 0; i < st.n; ++i) {
    const float v = pred.p[i];
    const float t = gt.p[i];
    check(t == 0.0f || t == 1.0f, "metrics: gt must be binary {0,1}");
    check(v >= 0.0f && v <= 1.0f, "metrics: prediction values must lie in [0,1]");
    const int b = bin_of(v);
    if (t != 0.0f) {
      ++pos_hist[b];
      ++st.npos;
    } else {
      ++neg_hist[b];
      ++st.nneg;
    }
    abs_err += std::abs(static_cast<double>(v) - static_cast<double>(t));
  }
  std::int64_t pc = 0, nc = 0;
  for (int t = 255; t >= 0; --t) {
    pc += pos_hist[t];
    nc += neg_hist[t];
    st.pos_cum[t] = pc;
    st.neg_cum[t] = nc;
  }
  st.mae = abs_err / static_cast<double>(st.n);
  st.s = structure_measure_single(pred.p, gt.p, pred.h, pred.w, cfg.s_alpha, &st.s_o, &st.s_r);
  return st;
}

// Per-image E-measure at one threshold from the four binary count combos.
inline double e_pair_at(const PairStats& st, int t, double eps) {
  const double n = static_cast<double>(st.n);
  const std::int64_t tp = st.pos_cum[t];
  const std::int64_t fp = st.neg_cum[t];
  const std::int64_t fn = st.npos - tp;
  const std::int64_t tn = st.nneg - fp;
  const double mu_b = static_cast<double>(tp + fp) / n;
  const double mu_t = static_cast<double>(st.npos) / n;
  auto theta = [&](double a, double b) {
    const double phi = 2.0 * a * b / (a * a + b * b + eps);
    const double z = 1.0 + phi;
    return 0.25 * z * z;
  };
  double acc = 0.0;
  acc += static_cast<double>(tp) * theta(1.0 - mu_t, 1.0 - mu_b);
  acc += static_cast<double>(fn) * theta(1.0 - mu_t, -mu_b);
  acc += static_cast<double>(fp) * theta(-mu_t, 1.0 - mu_b);
  acc += static_cast<double>(tn) * theta(-mu_t, -mu_b);
  return acc / n;
}

inline std::vector<PairStats> analyze_pairs(const std::vector<MapPair>& pairs,
                                            const MetricConfig& cfg) {
  cfg.validate();
  check(!pairs.empty(), "metrics: empty pair list");
  std::vector<PairStats> stats;
  stats.reserve(pairs.size());
  for (const MapPair& p : pairs) stats.push_back(analyze_pair(p, cfg));
  return stats;
}

// MAE, S, and E are defined for any binary GT (degenerate masks use the
// documented fallbacks), but a PR sweep needs at least one positive pixel.
inline void require_positive_gt(const std::vector<PairStats>& stats) {
  for (const PairStats& st : stats) {
    if (st.npos > 0) return;
  }
  throw ShapeError("metrics: PR curve requires at least one positive ground-truth pixel");
}

}  // namespace detail

inline MetricReport compute_metrics(const std::vector<MapPair>& pairs,
                                    const MetricConfig& cfg = {}) {
  const std::vector<detail::PairStats> stats = detail::analyze_pairs(pairs, cfg);
  detail::require_positive_gt(stats);
  MetricReport rep;
  rep.pr.resize(256);
  std::vector<double> col(stats.size());
  double best_f = 0.0, best_e = 0.0;
  for (int t = 0; t < 256; ++t) {
    for (std::size_t i = 0; i < stats.size(); ++i) {
      const auto& st = stats[i];
      const double tp = static_cast<double>(st.pos_cum[t]);
      const double fp = static_cast<double>(st.neg_cum[t]);
      col[i] = tp / (tp + fp + cfg.eps);
    }
    const double precision = detail::sorted_mean(col);
    for (std::size_t i = 0; i < stats.size(); ++i) {
      const auto& st = stats[i];
      const double tp = static_cast<double>(st.pos_cum[t]);
      col[i] = tp / (static_cast<double>(st.npos) + cfg.eps);
    }
    const double recall = detail::sorted_mean(col);
    rep.pr[t] = {t, precision, recall};
    const double denom = cfg.beta2 * precision + recall;
    const double f = denom > 0.0 ? (1.0 + cfg.beta2) * precision * recall / denom : 0.0;
    if (f > best_f) best_f = f;
    for (std::size_t i = 0; i < stats.size(); ++i) {
      col[i] = detail::e_pair_at(stats[i], t, cfg.eps);
    }
    const double e = detail::sorted_mean(col);
    if (e > best_e) best_e = e;
  }
  rep.max_f = best_f;
  rep.max_e = best_e;
  for (std::size_t i = 0; i < stats.size(); ++i) col[i] = stats[i].mae;
  rep.mae = detail::sorted_mean(col);
  for (std::size_t i = 0; i < stats.size(); ++i) col[i] = stats[i].s;
  rep.s = detail::sorted_mean(col);
  for (std::size_t i = 0; i < stats.size(); ++i) col[i] = stats[i].s_o;
  rep.s_object = detail::sorted_mean(col);
  for (std::size_t i = 0; i < stats.size(); ++i) col[i] = stats[i].s_r;
  rep.s_region = detail::sorted_mean(col);
  return rep;
}

inline std::vector<PrPoint> pr_curve(const std::vector<MapPair>& pairs,
                                     const MetricConfig& cfg = {}) {
  return compute_metrics(pairs, cfg).pr;
}

inline double max_f_measure(const std::vector<MapPair>& pairs, const MetricConfig& cfg = {}) {
  return compute_metrics(pairs, cfg).max_f;
}

inline double mae(const std::vector<MapPair>& pairs) {
  const std::vector<detail::PairStats> stats = detail::analyze_pairs(pairs, MetricConfig{});
  std::vector<double> v(stats.size());
  for (std::size_t i = 0; i < stats.size(); ++i) v[i] = stats[i].mae;
  return detail::sorted_mean(v);
}

inline double s_measure(const std::vector<MapPair>& pairs, const MetricConfig& cfg = {},
                        double* s_object = nullptr, double* s_region = nullptr) {
  const std::vector<detail::PairStats> stats = detail::analyze_pairs(pairs, cfg);
  std::vector<double> col(stats.size());
  for (std::size_t i = 0; i < stats.size(); ++i) col[i] = stats[i].s_o;
  if (s_object) *s_object = detail::sorted_mean(col);
  for (std::size_t i = 0; i < stats.size(); ++i) col[i] = stats[i].s_r;
  if (s_region) *s_region = detail::sorted_mean(col);
  for (std::size_t i = 0; i < stats.size(); ++i) col[i] = stats[i].s;
  return detail::sorted_mean(col);
}

inline double e_measure(const std::vector<MapPair>& pairs, const MetricConfig& cfg = {}) {
  const std::vector<detail::PairStats> stats = detail::analyze_pairs(pairs, cfg);
  std::vector<double> col(stats.size());
  double best = 0.0;
  for (int t = 0; t < 256; ++t) {
    for (std::size_t i = 0; i < stats.size(); ++i) col[i] = detail::e_pair_at(stats[i], t, cfg.eps);
    best = std::max(best, detail::sorted_mean(col));
  }
  return best;
}

// ---------------------------------------------------------------------------
// Report writers.
// ---------------------------------------------------------------------------
inline void write_pr_csv(const std::string& path, const std::vector<PrPoint>& pr) {
  std::ofstream out(path, std::ios::binary);
  check(out.good(), "metrics: cannot open PR csv for writing: " + path, IoError{""});
  out << "threshold,precision,recall\n";
  char buf[96];
  for (const PrPoint& p : pr) {
    std::snprintf(buf, sizeof(buf), "%d,%.6f,%.6f\n", p.threshold, p.precision, p.recall);
    out << buf;
  }
  check(out.good(), "metrics: failed writing PR csv: " + path, IoError{""});
}

inline void write_report_json(const std::string& path, const MetricReport& rep,
                              const std::map<std::string, MetricReport>* per_group = nullptr) {
  std::ofstream out(path, std::ios::binary);
  check(out.good(), "metrics: cannot open report for writing: " + path, IoError{""});
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return std::string(buf);
  };
  auto body = [&](const MetricReport& r, const std::string& indent) {
    std::string s;
    s += indent + "\"max_f\": " + num(r.max_f) + ",\n";
    s += indent + "\"s\": " + num(r.s) + ",\n";
    s += indent + "\"s_object\": " + num(r.s_object) + ",\n";
    s += indent + "\"s_region\": " + num(r.s_region) + ",\n";
    s += indent + "\"max_e\": " + num(r.max_e) + ",\n";
    s += indent + "\"mae\": " + num(r.mae);
    return s;
  };
  out << "{\n" << body(rep, "  ");
  if (per_group && !per_group->empty()) {
    out << ",\n  \"per_group\": {\n";
    std::size_t i = 0;
    for (const auto& [name, r] : *per_group) {
      out << "    \"" << name << "\": {\n" << body(r, "      ") << "\n    }";
      if (++i < per_group->size()) out << ",";
      out << "\n";
    }
    out << "  }";
  }
  out << "\n}\n";
  check(out.good(), "metrics: failed writing report: " + path, IoError{""});
}

}  // namespace glnet
