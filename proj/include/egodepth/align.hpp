#pragma once

#include <cmath>
#include <string_view>
#include <vector>

#include "egodepth/losses.hpp"

namespace egodepth {

enum class AlignMode { pose_only, pose_and_depth };

inline std::optional<AlignMode> parse_align_mode(std::string_view s) {
  if (s == "pose_only") return AlignMode::pose_only;
  if (s == "pose_and_depth") return AlignMode::pose_and_depth;
  return std::nullopt;
}

struct AlignOptions {
  int max_iters = 300;  // per pyramid level
  double step = 1e-3;   // initial step length
  double tol_grad = 1e-9;
  double tol_step = 1e-6;
  int pyramid_levels = 3;
  AlignMode mode = AlignMode::pose_only;
  LossWeights weights{};
  // Scales translation steps by (mean depth)^2 so that rotation and
  // translation updates move pixels by comparable amounts.
  bool precondition = true;

  void validate() const {
    if (max_iters < 1) throw InvalidArgument("AlignOptions: max_iters must be >= 1");
    if (!(step > 0.0) || !(tol_grad > 0.0) || !(tol_step > 0.0))
      throw InvalidArgument("AlignOptions: step and tolerances must be positive");
    if (pyramid_levels < 1) throw InvalidArgument("AlignOptions: pyramid_levels must be >= 1");
    weights.validate();
  }
};

struct AlignReport {
  bool converged = false;
  int iters = 0;  // accepted steps, all levels
  double final_loss = 0.0;
  Pose6DoF pose;
  std::vector<double> loss_history;  // finest level, initial value first
  std::vector<std::vector<double>> level_histories;  // coarsest first
  DepthMap depth;  // refined depth in pose_and_depth mode, else the input
};

inline constexpr double kArmijoC = 1e-4;
inline constexpr double kBacktrack = 0.5;
inline constexpr double kMinRefinedDepth = 1e-3;

/// Outcome of one gradient-descent run.
template <typename State>
struct DescentResult {
  State state;
  bool converged = false;
  int iters = 0;
  std::vector<double> history;
};

/// Gradient descent with Armijo backtracking (c = 1e-4, factor 0.5).
/// `eval(state)` returns {value, gradient}; `retract(state, step)` applies a
/// step; `scale` is a diagonal preconditioner. After an accepted step the
/// trial step length doubles. Trials that throw DegenerateInput are rejected.
/// Stops with converged = true once the gradient
/// norm drops below tol_grad or the trial step length below tol_step.
template <typename State, typename Vector, typename Eval, typename Retract>
DescentResult<State> armijo_descent(State x, Eval&& eval, Retract&& retract, const Vector& scale,
                                    int max_iters, double step, double tol_grad, double tol_step) {
  DescentResult<State> r{std::move(x), false, 0, {}};
  auto [f, g] = eval(r.state);
  if (!std::isfinite(f)) throw InvalidArgument("descent: objective is not finite at the start point");
  r.history.push_back(f);
  double alpha = step;
  while (r.iters < max_iters) {
    if (g.norm() < tol_grad) {
      r.converged = true;
      break;
    }
    const Vector dir = -(scale.cwiseProduct(g));
    const double slope = g.dot(dir);
    bool accepted = false;
    while (alpha * dir.norm() >= tol_step) {
      State trial = retract(r.state, Vector(alpha * dir));
      // A trial that leaves no valid pixels is rejected like a non-finite one.
      try {
        auto [f_new, g_new] = eval(trial);
        if (std::isfinite(f_new) && f_new <= f + kArmijoC * alpha * slope) {
          r.state = std::move(trial);
          f = f_new;
          g = std::move(g_new);
          accepted = true;
          break;
        }
      } catch (const DegenerateInput&) {
      }
      alpha *= kBacktrack;
    }
    if (!accepted) {
      r.converged = true;
      break;
    }
    ++r.iters;
    r.history.push_back(f);
    alpha *= 2.0;
  }
  return r;
}

namespace detail {

inline double mean_depth(const DepthMap& d) {
  double s = 0.0;
  for (double v : d.data()) s += v;
  return s / static_cast<double>(d.size());
}

inline Vec6 pose_scale(const DepthMap& depth, bool precondition) {
  Vec6 s = Vec6::Ones();
  if (precondition) {
    const double z = mean_depth(depth);
    s.tail<3>().setConstant(z * z);
  }
  return s;
}

struct Level {
  ImageBuffer target;
  ImageBuffer source;
  DepthMap depth;
  CameraIntrinsics k;
};

inline std::vector<Level> build_levels(const ImageBuffer& target, const ImageBuffer& source,
                                       const DepthMap& depth, const CameraIntrinsics& k,
                                       int levels) {
  const auto tp = build_pyramid(target, levels);
  const auto sp = build_pyramid(source, levels);
  const auto dp = build_pyramid(depth, levels);
  std::vector<Level> out;
  CameraIntrinsics kl = k;
  for (int l = 0; l < levels; ++l) {
    out.push_back({tp[l], sp[l], dp[l], kl});
    kl = kl.half_resolution();
  }
  return out;
}

// Nearest-neighbour 2x upsampling used to carry a refined depth map to the
// next finer level; odd trailing rows/columns copy their neighbour.
inline DepthMap upsample_depth(const DepthMap& coarse, int w, int h) {
  DepthMap out(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      out(x, y) = coarse(std::min(x / 2, coarse.width() - 1), std::min(y / 2, coarse.height() - 1));
  return out;
}

}  // namespace detail

/// Recovers the target->source pose by minimising the total loss (mask = 1)
/// with gradient descent, coarse to fine. In pose_and_depth mode pose steps
/// alternate with depth steps projected onto depth >= 1e-3.
inline AlignReport align_pose(const ImageBuffer& target, const ImageBuffer& source,
                              const DepthMap& depth, const CameraIntrinsics& k,
                              const Pose6DoF& init, const AlignOptions& opts) {
  opts.validate();
  if (!target.same_shape(source)) throw InvalidArgument("align_pose: image shapes differ");
  const auto levels = detail::build_levels(target, source, depth, k, opts.pyramid_levels);

  AlignReport report;
  SE3Transform pose = init.to_transform();
  DepthMap refined = levels.back().depth;
  for (int l = opts.pyramid_levels - 1; l >= 0; --l) {
    const detail::Level& lv = levels[l];
    if (opts.mode == AlignMode::pose_and_depth && l != opts.pyramid_levels - 1)
      refined = detail::upsample_depth(refined, lv.depth.width(), lv.depth.height());
    const DepthMap& level_depth = opts.mode == AlignMode::pose_and_depth ? refined : lv.depth;
    const WeightMask ones(lv.target.width(), lv.target.height(), 1.0);

    auto pose_eval = [&](const SE3Transform& t) {
      const LossGradients g = loss_gradients(lv.target, lv.source, level_depth, t, lv.k, ones,
                                             opts.weights);
      return std::pair{g.terms.total, g.d_pose};
    };
    auto pose_retract = [](const SE3Transform& t, const Vec6& step) {
      return apply_increment(t, step);
    };
    const Vec6 scale = detail::pose_scale(level_depth, opts.precondition);

    std::vector<double> history;
    bool converged = false;
    if (opts.mode == AlignMode::pose_only) {
      auto r = armijo_descent(pose, pose_eval, pose_retract, scale, opts.max_iters, opts.step,
                              opts.tol_grad, opts.tol_step);
      pose = r.state;
      converged = r.converged;
      report.iters += r.iters;
      history = std::move(r.history);
    } else {
      using DepthVec = Eigen::VectorXd;
      const int w = level_depth.width(), h = level_depth.height();
      auto depth_eval = [&](const DepthVec& d) {
        const DepthMap dm(w, h, std::vector<double>(d.data(), d.data() + d.size()));
        const LossGradients g = loss_gradients(lv.target, lv.source, dm, pose, lv.k, ones,
                                               opts.weights);
        return std::pair{g.terms.total, DepthVec(Eigen::Map<const DepthVec>(g.d_depth.data(),
                                                                            g.d_depth.size()))};
      };
      auto depth_retract = [](const DepthVec& d, const DepthVec& step) {
        return DepthVec((d + step).cwiseMax(kMinRefinedDepth));
      };
      DepthVec d = Eigen::Map<const DepthVec>(refined.data().data(), refined.size());
      const DepthVec dscale = DepthVec::Constant(d.size(), static_cast<double>(d.size()));
      double pose_step = opts.step, depth_step = opts.step;
      history.push_back(pose_eval(pose).first);
      for (int it = 0; it < opts.max_iters; ++it) {
        auto rp = armijo_descent(pose, pose_eval, pose_retract, scale, 1, pose_step,
                                 opts.tol_grad, opts.tol_step);
        pose = rp.state;
        pose_step = rp.iters > 0 ? 2.0 * pose_step : pose_step;
        auto rd = armijo_descent(d, depth_eval, depth_retract, dscale, 1, depth_step,
                                 opts.tol_grad, opts.tol_step);
        d = rd.state;
        depth_step = rd.iters > 0 ? 2.0 * depth_step : depth_step;
        history.push_back(rd.history.back());
        report.iters += rp.iters + rd.iters;
        if (rp.iters == 0 && rd.iters == 0) {
          converged = true;
          break;
        }
      }
      refined = DepthMap(w, h, std::vector<double>(d.data(), d.data() + d.size()));
    }
    report.level_histories.push_back(history);
    if (l == 0) {
      report.converged = converged;
      report.loss_history = history;
      report.final_loss = history.back();
    }
  }
  report.pose = Pose6DoF::from_transform(pose);
  report.depth = opts.mode == AlignMode::pose_and_depth ? refined : depth;
  return report;
}

struct PairAlignReport {
  bool converged = false;
  int iters = 0;
  double final_loss = 0.0;
  double bf_term = 0.0;
  Pose6DoF forward;   // target -> source
  Pose6DoF backward;  // source -> target
  std::vector<double> loss_history;  // finest level
};

/// Jointly refines the forward (target->source) and backward (source->target)
/// poses. Each direction is first aligned on its own photometric objective;
/// the full joint objective (both photometric terms plus lambda_bf times the
/// backward-forward consistency term) is then descended at full resolution.
inline PairAlignReport align_pose_pair(const ImageBuffer& target, const ImageBuffer& source,
                                       const DepthMap& target_depth, const DepthMap& source_depth,
                                       const CameraIntrinsics& k, const Pose6DoF& init_forward,
                                       const Pose6DoF& init_backward, const AlignOptions& opts) {
  opts.validate();
  if (!target.same_shape(source)) throw InvalidArgument("align_pose_pair: image shapes differ");
  if (opts.mode != AlignMode::pose_only)
    throw InvalidArgument("align_pose_pair: only pose_only mode is supported");

  const AlignReport fwd = align_pose(target, source, target_depth, k, init_forward, opts);
  const AlignReport bwd = align_pose(source, target, source_depth, k, init_backward, opts);

  using Vec12 = Eigen::Matrix<double, 12, 1>;
  using PoseState = std::pair<SE3Transform, SE3Transform>;
  const WeightMask ones(target.width(), target.height(), 1.0);
  auto eval = [&](const PoseState& s) {
    const LossGradients gf =
        loss_gradients(target, source, target_depth, s.first, k, ones, opts.weights);
    const LossGradients gb =
        loss_gradients(source, target, source_depth, s.second, k, ones, opts.weights);
    const PosePair pair{s.first, s.second};
    const double bf = bf_consistency_loss(std::span(&pair, 1));
    const PosePairGradient gbf = bf_consistency_gradient(pair);
    Vec12 g;
    g << gf.d_pose + opts.weights.lambda_bf * gbf.d_forward,
        gb.d_pose + opts.weights.lambda_bf * gbf.d_backward;
    return std::pair{gf.terms.total + gb.terms.total + opts.weights.lambda_bf * bf, g};
  };
  auto retract = [](const PoseState& s, const Vec12& step) {
    return PoseState{apply_increment(s.first, step.head<6>()),
                     apply_increment(s.second, step.tail<6>())};
  };
  Vec12 scale;
  scale << detail::pose_scale(target_depth, opts.precondition),
      detail::pose_scale(source_depth, opts.precondition);
  const auto r = armijo_descent(PoseState{fwd.pose.to_transform(), bwd.pose.to_transform()}, eval,
                                retract, scale, opts.max_iters, opts.step, opts.tol_grad,
                                opts.tol_step);

  PairAlignReport report;
  report.converged = r.converged;
  report.iters = fwd.iters + bwd.iters + r.iters;
  report.loss_history = r.history;
  report.final_loss = r.history.back();
  const PosePair final_pair{r.state.first, r.state.second};
  report.bf_term = bf_consistency_loss(std::span(&final_pair, 1));
  report.forward = Pose6DoF::from_transform(r.state.first);
  report.backward = Pose6DoF::from_transform(r.state.second);
  return report;
}

/// Rotation angle (radians) of a^-1 b.
inline double rotation_error(const SE3Transform& a, const SE3Transform& b) {
  return log_so3(a.rotation().inverse() * b.rotation()).norm();
}

/// |t_est - t_gt| / |t_gt|
inline double relative_translation_error(const SE3Transform& est, const SE3Transform& gt) {
  return (est.translation() - gt.translation()).norm() / gt.translation().norm();
}

}  // namespace egodepth
