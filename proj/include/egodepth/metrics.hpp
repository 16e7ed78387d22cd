#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "egodepth/image.hpp"
#include "egodepth/se3.hpp"

namespace egodepth {

inline constexpr double kDefaultMinDepth = 1e-3;
inline constexpr double kDefaultMaxDepth = 80.0;

struct DepthMetrics {
  double abs_rel = 0.0;
  double sq_rel = 0.0;
  double rmse = 0.0;
  double rmse_log = 0.0;
  double d1 = 0.0;
  double d2 = 0.0;
  double d3 = 0.0;
};

namespace detail {

inline bool in_caps(double gt, double min_d, double max_d) { return gt >= min_d && gt <= max_d; }

inline void check_depth_pair(const DepthMap& pred, const DepthMap& gt) {
  if (!pred.same_shape(gt.width(), gt.height()))
    throw InvalidArgument("depth metrics: prediction and ground truth dimensions differ");
}

}  // namespace detail

/// Standard depth-evaluation metrics over pixels whose ground truth lies in
/// [min_d, max_d].
inline DepthMetrics depth_metrics(const DepthMap& pred, const DepthMap& gt,
                                  double min_d = kDefaultMinDepth, double max_d = kDefaultMaxDepth) {
  detail::check_depth_pair(pred, gt);
  DepthMetrics m;
  std::size_t n = 0;
  double sq = 0.0, sq_log = 0.0;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    const double d = gt[i];
    if (!detail::in_caps(d, min_d, max_d)) continue;
    const double p = pred[i];
    if (!(p > 0.0)) throw InvalidArgument("depth metrics: predictions must be positive");
    const double diff = p - d;
    m.abs_rel += std::abs(diff) / d;
    m.sq_rel += diff * diff / d;
    sq += diff * diff;
    const double dl = std::log(p) - std::log(d);
    sq_log += dl * dl;
    const double ratio = std::max(p / d, d / p);
    m.d1 += ratio < 1.25;
    m.d2 += ratio < 1.25 * 1.25;
    m.d3 += ratio < 1.25 * 1.25 * 1.25;
    ++n;
  }
  if (n == 0) throw DegenerateInput("depth metrics: no ground-truth pixels inside the depth caps");
  const double inv = 1.0 / static_cast<double>(n);
  m.abs_rel *= inv;
  m.sq_rel *= inv;
  m.rmse = std::sqrt(sq * inv);
  m.rmse_log = std::sqrt(sq_log * inv);
  m.d1 *= inv;
  m.d2 *= inv;
  m.d3 *= inv;
  return m;
}

namespace detail {

inline double median(std::vector<double> v) {
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  const double hi = v[mid];
  if (v.size() % 2 == 1) return hi;
  const double lo = *std::max_element(v.begin(), v.begin() + mid);
  return 0.5 * (lo + hi);
}

}  // namespace detail

/// Scales the prediction by median(gt) / median(pred), both medians taken
/// over pixels with ground truth inside the caps.
inline DepthMap median_scale_align(const DepthMap& pred, const DepthMap& gt,
                                   double min_d = kDefaultMinDepth,
                                   double max_d = kDefaultMaxDepth) {
  detail::check_depth_pair(pred, gt);
  std::vector<double> p, g;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (!detail::in_caps(gt[i], min_d, max_d)) continue;
    p.push_back(pred[i]);
    g.push_back(gt[i]);
  }
  if (p.empty()) throw DegenerateInput("median_scale_align: no valid pixels");
  const double mp = detail::median(std::move(p));
  if (mp == 0.0) throw DegenerateInput("median_scale_align: prediction median is zero");
  const double scale = detail::median(std::move(g)) / mp;
  DepthMap out = pred;
  for (double& v : out.data()) v *= scale;
  return out;
}

struct TimedPose {
  double timestamp = 0.0;  // seconds
  SE3Transform pose;       // camera-to-world
};

struct Trajectory {
  std::vector<TimedPose> frames;

  void validate() const {
    for (std::size_t i = 1; i < frames.size(); ++i)
      if (!(frames[i].timestamp > frames[i - 1].timestamp))
        throw InvalidArgument("trajectory timestamps must be strictly increasing");
  }
  std::size_t size() const { return frames.size(); }
};

struct AteResult {
  double mean = 0.0;
  double std = 0.0;
};

struct Association {
  std::size_t pred;
  std::size_t gt;
};

/// Pairs every predicted frame with the nearest ground-truth timestamp.
/// Matches must be closer than half the smallest frame interval of either
/// trajectory.
inline std::vector<Association> associate(const Trajectory& pred, const Trajectory& gt) {
  pred.validate();
  gt.validate();
  if (gt.frames.empty()) throw AssociationError("ground-truth trajectory is empty");
  double min_dt = std::numeric_limits<double>::infinity();
  for (const auto* t : {&pred, &gt})
    for (std::size_t i = 1; i < t->size(); ++i)
      min_dt = std::min(min_dt, t->frames[i].timestamp - t->frames[i - 1].timestamp);
  const double tol = 0.5 * min_dt;

  std::vector<Association> out;
  out.reserve(pred.size());
  std::size_t j = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double ts = pred.frames[i].timestamp;
    while (j + 1 < gt.size() &&
           std::abs(gt.frames[j + 1].timestamp - ts) <= std::abs(gt.frames[j].timestamp - ts))
      ++j;
    if (!(std::abs(gt.frames[j].timestamp - ts) < tol))
      throw AssociationError("no ground-truth pose within tolerance of predicted frame " +
                             std::to_string(i));
    out.push_back({i, j});
  }
  return out;
}

/// Scale-aligned absolute trajectory error over sliding snippets. Each
/// snippet is re-expressed relative to its first frame, the prediction is
/// scaled by the least-squares factor, and the mean/std is taken over the
/// per-frame translation errors of all snippets.
inline AteResult ate_snippet(const Trajectory& pred, const Trajectory& gt,
                             std::size_t snippet_len = 5) {
  if (snippet_len < 1) throw InvalidArgument("ate_snippet: snippet length must be >= 1");
  const auto assoc = associate(pred, gt);
  if (assoc.size() < snippet_len)
    throw InvalidArgument("ate_snippet: fewer associated frames than the snippet length");

  std::vector<double> errors;
  std::vector<Vec3> p_hat(snippet_len), p_gt(snippet_len);
  for (std::size_t s = 0; s + snippet_len <= assoc.size(); ++s) {
    const SE3Transform base_pred = inverse(pred.frames[assoc[s].pred].pose);
    const SE3Transform base_gt = inverse(gt.frames[assoc[s].gt].pose);
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < snippet_len; ++k) {
      p_hat[k] = compose(base_pred, pred.frames[assoc[s + k].pred].pose).translation();
      p_gt[k] = compose(base_gt, gt.frames[assoc[s + k].gt].pose).translation();
      num += p_hat[k].dot(p_gt[k]);
      den += p_hat[k].dot(p_hat[k]);
    }
    if (den == 0.0)
      throw DegenerateSnippet("ate_snippet: predicted snippet starting at frame " +
                              std::to_string(s) + " has no translation");
    const double scale = num / den;
    for (std::size_t k = 0; k < snippet_len; ++k) errors.push_back((scale * p_hat[k] - p_gt[k]).norm());
  }

  AteResult r;
  for (double e : errors) r.mean += e;
  r.mean /= static_cast<double>(errors.size());
  for (double e : errors) r.std += (e - r.mean) * (e - r.mean);
  r.std = std::sqrt(r.std / static_cast<double>(errors.size()));
  return r;
}

}  // namespace egodepth
