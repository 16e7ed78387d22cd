#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "egodepth/attention.hpp"
#include "egodepth/losses.hpp"

namespace egodepth {

enum class GradComponent { reproject, warp, losses, attention };

inline constexpr std::array kGradComponents = {GradComponent::reproject, GradComponent::warp,
                                               GradComponent::losses, GradComponent::attention};

inline std::string_view to_string(GradComponent c) {
  switch (c) {
    case GradComponent::reproject: return "reproject";
    case GradComponent::warp: return "warp";
    case GradComponent::losses: return "losses";
    case GradComponent::attention: return "attention";
  }
  return "unknown";
}

inline std::optional<GradComponent> parse_grad_component(std::string_view s) {
  for (auto c : kGradComponents)
    if (to_string(c) == s) return c;
  return std::nullopt;
}

inline constexpr double kFdStep = 1e-5;
// Configurations with an L1 residual, ReLU pre-activation, depth difference or
// sample coordinate closer than this to a kink are redrawn.
inline constexpr double kKinkMargin = 1e-3;
inline constexpr double kInjectedFault = 1e-2;

/// ||a - n||_inf / max(||a||_inf, ||n||_inf); 0 when both are exactly zero.
inline double relative_error(const Eigen::VectorXd& analytic, const Eigen::VectorXd& numeric) {
  if (analytic.size() != numeric.size())
    throw InvalidArgument("relative_error: gradient sizes differ");
  if (analytic.size() == 0) return 0.0;
  const double scale = std::max(analytic.lpNorm<Eigen::Infinity>(), numeric.lpNorm<Eigen::Infinity>());
  if (scale == 0.0) return 0.0;
  return (analytic - numeric).lpNorm<Eigen::Infinity>() / scale;
}

struct GradComparison {
  Eigen::VectorXd analytic;
  Eigen::VectorXd numeric;

  double rel_error() const { return relative_error(analytic, numeric); }
};

/// Central differences of f(i, delta), the objective with parameter i shifted by delta.
template <typename F>
Eigen::VectorXd central_difference(Eigen::Index n, F&& f, double h = kFdStep) {
  Eigen::VectorXd g(n);
  for (Eigen::Index i = 0; i < n; ++i) g(i) = (f(i, h) - f(i, -h)) / (2.0 * h);
  return g;
}

namespace detail {

inline SE3Transform nudge_pose(const SE3Transform& t, Eigen::Index i, double delta) {
  Vec6 d = Vec6::Zero();
  d(i) = delta;
  return apply_increment(t, d);
}

inline double distance_to_integer(double v) { return std::abs(v - std::round(v)); }

inline bool near_grid_line(const Pixel& p) {
  return distance_to_integer(p.u) < kKinkMargin || distance_to_integer(p.v) < kKinkMargin;
}

}  // namespace detail

/// Reprojection Jacobian: 2 x 7 entries (depth column, then six pose columns),
/// flattened column-major.
inline GradComparison compare_reproject(const Pixel& p, double depth, const SE3Transform& pose,
                                        const CameraIntrinsics& k) {
  const ReprojectionJacobian j = reproject_jacobian(p, depth, pose, k);
  Eigen::Matrix<double, 2, 7> a;
  a << j.d_depth, j.d_pose;
  Eigen::Matrix<double, 2, 7> n;
  auto at = [&](int col, double delta) {
    const Pixel q = col == 0 ? reproject(p, depth + delta, pose, k)
                             : reproject(p, depth, detail::nudge_pose(pose, col - 1, delta), k);
    return Vec2(q.u, q.v);
  };
  for (int col = 0; col < 7; ++col)
    n.col(col) = (at(col, kFdStep) - at(col, -kFdStep)) / (2.0 * kFdStep);
  return {Eigen::Map<const Eigen::VectorXd>(a.data(), 14),
          Eigen::Map<const Eigen::VectorXd>(n.data(), 14)};
}

/// Bilinear sample derivative with respect to (u, v), per channel.
inline GradComparison compare_bilinear(const ImageBuffer& img, const Pixel& p) {
  const SampleGrad g = bilinear_sample_grad(img, p);
  const int nc = img.channels();
  GradComparison r{Eigen::Map<const Eigen::VectorXd>(g.data(), 2 * nc), Eigen::VectorXd(2 * nc)};
  for (int axis = 0; axis < 2; ++axis) {
    Pixel hi = p, lo = p;
    (axis == 0 ? hi.u : hi.v) += kFdStep;
    (axis == 0 ? lo.u : lo.v) -= kFdStep;
    const ChannelVec d = (bilinear_sample(img, hi).value - bilinear_sample(img, lo).value) /
                         (2.0 * kFdStep);
    for (int c = 0; c < nc; ++c) r.numeric(c * 2 + axis) = d(c);
  }
  return r;
}

/// Gradient of sum_{pixel, channel} weight * recon with respect to the six
/// pose parameters followed by every depth value. `weights` holds one entry
/// per pixel and channel.
inline GradComparison compare_warp(const ImageBuffer& source, const DepthMap& depth,
                                   const SE3Transform& pose, const CameraIntrinsics& k,
                                   const std::vector<double>& weights) {
  const std::size_t n = depth.size();
  if (weights.size() != n * source.channels())
    throw InvalidArgument("compare_warp: one weight per pixel and channel is required");
  const WarpJacobians jac = warp_jacobians(source, depth, pose, k);
  const int nc = source.channels();
  GradComparison r{Eigen::VectorXd::Zero(6 + n), Eigen::VectorXd()};
  for (std::size_t i = 0; i < n; ++i)
    for (int c = 0; c < nc; ++c) {
      const std::size_t o = i * nc + c;
      r.analytic.head<6>() += weights[o] * Eigen::Map<const Vec6>(jac.d_pose.data() + 6 * o);
      r.analytic(6 + i) += weights[o] * jac.d_depth[o];
    }

  auto objective = [&](const DepthMap& d, const SE3Transform& t) {
    const WarpResult wr = inverse_warp(source, d, t, k);
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (int c = 0; c < nc; ++c)
        s += weights[i * nc + c] * wr.recon(static_cast<int>(i) % source.width(),
                                            static_cast<int>(i) / source.width(), c);
    return s;
  };
  r.numeric = central_difference(static_cast<Eigen::Index>(6 + n), [&](Eigen::Index i, double delta) {
    if (i < 6) return objective(depth, detail::nudge_pose(pose, i, delta));
    DepthMap d = depth;
    d[static_cast<std::size_t>(i - 6)] += delta;
    return objective(d, pose);
  });
  return r;
}

/// Gradient of the single-source total loss with respect to the pose, every
/// depth value and every mask value, in that order.
inline GradComparison compare_loss(const ImageBuffer& target, const ImageBuffer& source,
                                   const DepthMap& depth, const SE3Transform& pose,
                                   const CameraIntrinsics& k, const WeightMask& mask,
                                   const LossWeights& w) {
  const std::size_t n = depth.size();
  const LossGradients g = loss_gradients(target, source, depth, pose, k, mask, w);
  GradComparison r{Eigen::VectorXd(6 + 2 * n), Eigen::VectorXd()};
  r.analytic.head<6>() = g.d_pose;
  for (std::size_t i = 0; i < n; ++i) {
    r.analytic(6 + i) = g.d_depth[i];
    r.analytic(6 + n + i) = g.d_mask[i];
  }
  r.numeric = central_difference(static_cast<Eigen::Index>(6 + 2 * n), [&](Eigen::Index i, double delta) {
    if (i < 6)
      return evaluate_loss(target, source, depth, detail::nudge_pose(pose, i, delta), k, mask, w).total;
    const auto j = static_cast<std::size_t>(i - 6);
    if (j < n) {
      DepthMap d = depth;
      d[j] += delta;
      return evaluate_loss(target, source, d, pose, k, mask, w).total;
    }
    WeightMask m = mask;
    m[j - n] += delta;
    return evaluate_loss(target, source, depth, pose, k, m, w).total;
  });
  return r;
}

/// Consistency-term gradient: forward increment then backward increment.
inline GradComparison compare_bf(const PosePair& pair) {
  const PosePairGradient g = bf_consistency_gradient(pair);
  GradComparison r{Eigen::VectorXd(12), Eigen::VectorXd()};
  r.analytic << g.d_forward, g.d_backward;
  r.numeric = central_difference(12, [&](Eigen::Index i, double delta) {
    PosePair p = pair;
    if (i < 6)
      p.forward = detail::nudge_pose(p.forward, i, delta);
    else
      p.backward = detail::nudge_pose(p.backward, i - 6, delta);
    return bf_consistency_loss(std::span(&p, 1));
  });
  return r;
}

namespace detail {

// Flattened view of every attention-gate input: parameters, then x, then g.
struct AttentionState {
  AttentionGateParams p;
  FeatureMap x;
  FeatureMap g;

  std::vector<double*> slots() {
    std::vector<double*> s;
    for (auto* m : {&p.w_x, &p.w_g})
      for (Eigen::Index i = 0; i < m->size(); ++i) s.push_back(m->data() + i);
    for (auto* v : {&p.psi, &p.b_xg})
      for (Eigen::Index i = 0; i < v->size(); ++i) s.push_back(v->data() + i);
    s.push_back(&p.b_psi);
    for (auto* f : {&x, &g})
      for (double& v : f->data()) s.push_back(&v);
    return s;
  }
};

}  // namespace detail

/// Gradient of sum_i <upstream_i, gated_i> with respect to all gate
/// parameters (w_x, w_g, psi, b_xg, b_psi), then x, then g.
inline GradComparison compare_attention(const FeatureMap& x, const FeatureMap& g,
                                        const AttentionGateParams& p, const FeatureMap& upstream) {
  const AttentionGradients ag = ag_backward(x, g, p, upstream);
  detail::AttentionState grads{ag.d_params, ag.d_x, ag.d_g};
  const auto gslots = grads.slots();
  GradComparison r{Eigen::VectorXd(static_cast<Eigen::Index>(gslots.size())), Eigen::VectorXd()};
  for (std::size_t i = 0; i < gslots.size(); ++i) r.analytic(i) = *gslots[i];

  detail::AttentionState state{p, x, g};
  const auto slots = state.slots();
  auto objective = [&] {
    const AttentionOutput out = ag_forward(state.x, state.g, state.p);
    double s = 0.0;
    for (std::size_t i = 0; i < upstream.data().size(); ++i)
      s += upstream.data()[i] * out.gated.data()[i];
    return s;
  };
  r.numeric = central_difference(r.analytic.size(), [&](Eigen::Index i, double delta) {
    double& v = *slots[i];
    const double saved = v;
    v += delta;
    const double f = objective();
    v = saved;
    return f;
  });
  return r;
}

struct GradCheckReport {
  GradComponent component = GradComponent::reproject;
  int trials = 0;
  int redrawn = 0;  // configurations rejected for sitting near a kink
  double max_rel_error = 0.0;
};

namespace detail {

inline constexpr int kMaxRedraws = 10000;
inline constexpr int kCheckSize = 8;

class TrialSampler {
 public:
  explicit TrialSampler(std::uint64_t seed) : rng_(seed) {}

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }

  Vec3 vec3(double scale) { return {uniform(-scale, scale), uniform(-scale, scale), uniform(-scale, scale)}; }

  SE3Transform pose(double rot_scale, double trans_scale) {
    return {exp_so3(vec3(rot_scale)), vec3(trans_scale)};
  }

  ImageBuffer image(int w, int h, int channels) {
    ImageBuffer img(w, h, channels);
    for (double& v : img.data()) v = uniform(0.0, 1.0);
    return img;
  }

  DepthMap depth(int w, int h, double lo, double hi) {
    DepthMap d(w, h);
    for (double& v : d.data()) v = uniform(lo, hi);
    return d;
  }

  CameraIntrinsics small_camera() {
    return {uniform(6.0, 10.0), uniform(6.0, 10.0), uniform(3.0, 4.0), uniform(3.0, 4.0)};
  }

  int channels() { return uniform(0.0, 1.0) < 0.5 ? 1 : 3; }

  std::mt19937_64& engine() { return rng_; }

 private:
  std::mt19937_64 rng_;
};

// Reprojection of every pixel; nullopt when a pixel lands behind the camera.
inline std::optional<std::vector<Pixel>> reproject_all(const DepthMap& depth, const SE3Transform& pose,
                                                       const CameraIntrinsics& k) {
  std::vector<Pixel> out;
  for (int y = 0; y < depth.height(); ++y)
    for (int x = 0; x < depth.width(); ++x) {
      const Vec3 q = pose * backproject({double(x), double(y)}, depth(x, y), k);
      if (q.z() < 0.1) return std::nullopt;
      out.push_back(project(q, k));
    }
  return out;
}

inline bool smoothness_near_kink(const DepthMap& d) {
  bool kink = false;
  for_each_forward_difference(d.width(), d.height(), [&](int x0, int y0, int x1, int y1, double) {
    if (std::abs(d(x1, y1) - d(x0, y0)) < kKinkMargin) kink = true;
  });
  return kink;
}

inline void corrupt(GradComparison& c) {
  for (double& v : c.analytic) v += kInjectedFault * std::max(1.0, std::abs(v));
}

inline std::optional<GradComparison> reproject_trial(TrialSampler& s) {
  const CameraIntrinsics k{s.uniform(50.0, 150.0), s.uniform(50.0, 150.0), s.uniform(40.0, 80.0),
                           s.uniform(40.0, 80.0)};
  const Pixel p{s.uniform(0.0, 127.0), s.uniform(0.0, 127.0)};
  const double depth = s.uniform(1.0, 10.0);
  const SE3Transform pose = s.pose(0.3, 0.5);
  if ((pose * backproject(p, depth, k)).z() < 0.1) return std::nullopt;
  return compare_reproject(p, depth, pose, k);
}

inline std::optional<std::array<GradComparison, 2>> warp_trial(TrialSampler& s) {
  const int n = kCheckSize;
  const ImageBuffer src = s.image(n, n, s.channels());
  const Pixel p{s.uniform(0.0, n - 1.0), s.uniform(0.0, n - 1.0)};
  if (near_grid_line(p)) return std::nullopt;

  const CameraIntrinsics k = s.small_camera();
  const DepthMap depth = s.depth(n, n, 2.0, 4.0);
  const SE3Transform pose = s.pose(0.05, 0.2);
  const auto pts = reproject_all(depth, pose, k);
  if (!pts) return std::nullopt;
  std::vector<double> weights;
  for (const Pixel& q : *pts) {
    const bool inside = q.u > 0.0 && q.u < n - 1.0 && q.v > 0.0 && q.v < n - 1.0;
    for (int c = 0; c < src.channels(); ++c)
      weights.push_back(inside && !near_grid_line(q) ? s.uniform(-1.0, 1.0) : 0.0);
  }
  return std::array{compare_bilinear(src, p), compare_warp(src, depth, pose, k, weights)};
}

inline std::optional<std::array<GradComparison, 2>> losses_trial(TrialSampler& s) {
  const int n = kCheckSize;
  const int nc = s.channels();
  const ImageBuffer target = s.image(n, n, nc);
  const ImageBuffer source = s.image(n, n, nc);
  const CameraIntrinsics k = s.small_camera();
  const DepthMap depth = s.depth(n, n, 2.0, 4.0);
  const SE3Transform pose = s.pose(0.05, 0.2);
  WeightMask mask(n, n);
  for (double& m : mask.data()) m = s.uniform(0.2, 1.0);
  const LossWeights w{s.uniform(0.05, 0.5), s.uniform(0.05, 0.5), s.uniform(0.05, 0.5)};

  const auto pts = reproject_all(depth, pose, k);
  if (!pts || smoothness_near_kink(depth)) return std::nullopt;
  const WarpResult wr = inverse_warp(source, depth, pose, k);
  if (count_valid(wr.valid) == 0) return std::nullopt;
  for (std::size_t i = 0; i < pts->size(); ++i) {
    if (near_grid_line((*pts)[i])) return std::nullopt;
    const int x = static_cast<int>(i) % n, y = static_cast<int>(i) / n;
    if (!wr.valid(x, y)) continue;
    for (int c = 0; c < nc; ++c)
      if (std::abs(wr.recon(x, y, c) - target(x, y, c)) < kKinkMargin) return std::nullopt;
  }

  const SE3Transform fwd = s.pose(0.5, 1.0);
  const PosePair pair{fwd, compose(s.pose(0.3, 0.3), inverse(fwd))};
  for (const SE3Transform& prod : {compose(pair.backward, pair.forward), compose(pair.forward, pair.backward)}) {
    const Mat4 d = prod.matrix() - Mat4::Identity();
    if (d.topRows<3>().cwiseAbs().minCoeff() < kKinkMargin) return std::nullopt;
  }
  return std::array{compare_loss(target, source, depth, pose, k, mask, w), compare_bf(pair)};
}

inline std::optional<GradComparison> attention_trial(TrialSampler& s) {
  const std::array dims = {1, 2, 4, 8};
  auto pick = [&] { return dims[std::uniform_int_distribution<int>(0, 3)(s.engine())]; };
  const int f_l = pick(), f_g = pick(), f_int = pick();
  const int w = std::uniform_int_distribution<int>(1, 4)(s.engine());
  const int h = std::uniform_int_distribution<int>(1, 4)(s.engine());
  const auto p = AttentionGateParams::random(f_l, f_g, f_int, s.engine()(), 1.0);
  FeatureMap x(w, h, f_l), g(w, h, f_g), up(w, h, f_l);
  for (auto* f : {&x, &g, &up})
    for (double& v : f->data()) v = s.uniform(-1.0, 1.0);
  for (std::size_t i = 0; i < x.positions(); ++i) {
    const Eigen::VectorXd z = p.w_x.transpose() * x.at(i) + p.w_g.transpose() * g.at(i) + p.b_xg;
    if (z.cwiseAbs().minCoeff() < kKinkMargin) return std::nullopt;
  }
  return compare_attention(x, g, p, up);
}

}  // namespace detail

/// Runs `trials` seeded random configurations of one component and reports
/// the worst relative error between analytic and central-difference
/// gradients. With inject_fault, every analytic entry is offset by
/// 1e-2 * max(1, |entry|) before comparison, which the report must expose.
inline GradCheckReport grad_check(GradComponent component, std::uint64_t seed, int trials,
                                  bool inject_fault = false) {
  if (trials < 1) throw InvalidArgument("grad_check: trials must be >= 1");
  detail::TrialSampler sampler(seed);
  GradCheckReport report;
  report.component = component;
  auto record = [&](GradComparison c) {
    if (inject_fault) detail::corrupt(c);
    report.max_rel_error = std::max(report.max_rel_error, c.rel_error());
  };

  while (report.trials < trials) {
    bool accepted = false;
    switch (component) {
      case GradComponent::reproject:
        if (auto c = detail::reproject_trial(sampler)) record(std::move(*c)), accepted = true;
        break;
      case GradComponent::warp:
        if (auto c = detail::warp_trial(sampler)) {
          for (auto& cmp : *c) record(std::move(cmp));
          accepted = true;
        }
        break;
      case GradComponent::losses:
        if (auto c = detail::losses_trial(sampler)) {
          for (auto& cmp : *c) record(std::move(cmp));
          accepted = true;
        }
        break;
      case GradComponent::attention:
        if (auto c = detail::attention_trial(sampler)) record(std::move(*c)), accepted = true;
        break;
    }
    if (accepted) {
      ++report.trials;
    } else if (++report.redrawn > detail::kMaxRedraws) {
      throw DegenerateInput("grad_check: could not draw a configuration away from kinks");
    }
  }
  return report;
}

}  // namespace egodepth
