#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "egodepth/warping.hpp"

namespace egodepth {

inline constexpr double kMaskClamp = 1e-7;

/// Weights of the total objective. Defaults are 0.1 for every term.
struct LossWeights {
  double lambda_smo = 0.1;
  double lambda_reg = 0.1;
  double lambda_bf = 0.1;

  void validate() const {
    for (double l : {lambda_smo, lambda_reg, lambda_bf})
      if (!(l >= 0.0) || !std::isfinite(l))
        throw InvalidArgument("loss weights must be finite and non-negative");
  }
};

namespace detail {

inline void check_same(const ImageBuffer& a, const ImageBuffer& b, const char* what) {
  if (!a.same_shape(b)) throw InvalidArgument(std::string(what) + ": image shapes differ");
}

template <typename G>
void check_grid(const G& g, const ImageBuffer& img, const char* what) {
  if (!g.same_shape(img.width(), img.height()))
    throw InvalidArgument(std::string(what) + ": map and image dimensions differ");
}

}  // namespace detail

/// Masked L1 photometric error, normalised by the number of valid pixels
/// and summed over channels.
inline double photometric_l1(const ImageBuffer& target, const ImageBuffer& recon,
                             const WeightMask& mask, const ValidityMask& valid) {
  detail::check_same(target, recon, "photometric_l1");
  detail::check_grid(mask, target, "photometric_l1");
  detail::check_grid(valid, target, "photometric_l1");
  const int n_valid = count_valid(valid);
  if (n_valid == 0) throw DegenerateInput("photometric_l1: no valid pixels");
  double sum = 0.0;
  for (int y = 0; y < target.height(); ++y)
    for (int x = 0; x < target.width(); ++x) {
      if (!valid(x, y)) continue;
      double px = 0.0;
      for (int c = 0; c < target.channels(); ++c) px += std::abs(target(x, y, c) - recon(x, y, c));
      sum += mask(x, y) * px;
    }
  return sum / n_valid;
}

struct ReconstructedView {
  const ImageBuffer& recon;
  const WeightMask& mask;
  const ValidityMask& valid;
};

/// Sum of the masked photometric term over several source views, each with
/// its own mask.
inline double photometric_l1(const ImageBuffer& target, std::span<const ReconstructedView> views) {
  double total = 0.0;
  for (const auto& v : views) total += photometric_l1(target, v.recon, v.mask, v.valid);
  return total;
}

/// Cross entropy of the mask against the constant 1: mean of -log(mask),
/// with mask values clamped to >= 1e-7.
inline double explainability_reg(const WeightMask& mask) {
  double sum = 0.0;
  for (double m : mask.data()) sum -= std::log(std::max(m, kMaskClamp));
  return sum / static_cast<double>(mask.size());
}

namespace detail {

inline double mean_abs_channel_diff(const ImageBuffer& img, int x0, int y0, int x1, int y1) {
  double s = 0.0;
  for (int c = 0; c < img.channels(); ++c) s += std::abs(img(x1, y1, c) - img(x0, y0, c));
  return s / img.channels();
}

// Visits every defined forward difference: f(x0, y0, x1, y1, axis_weight).
template <typename F>
void for_each_forward_difference(int w, int h, F&& f) {
  const int nx = (w - 1) * h;
  const int ny = w * (h - 1);
  if (nx > 0)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x + 1 < w; ++x) f(x, y, x + 1, y, 1.0 / nx);
  if (ny > 0)
    for (int y = 0; y + 1 < h; ++y)
      for (int x = 0; x < w; ++x) f(x, y, x, y + 1, 1.0 / ny);
}

}  // namespace detail

/// Edge-aware smoothness: per axis, the mean over defined forward differences
/// of |dD| * exp(-|dI|) (|dI| averaged over channels); the two axis means are added.
inline double smoothness(const DepthMap& depth, const ImageBuffer& image) {
  detail::check_grid(depth, image, "smoothness");
  double total = 0.0;
  detail::for_each_forward_difference(
      depth.width(), depth.height(), [&](int x0, int y0, int x1, int y1, double wgt) {
        total += wgt * std::abs(depth(x1, y1) - depth(x0, y0)) *
                 std::exp(-detail::mean_abs_channel_diff(image, x0, y0, x1, y1));
      });
  return total;
}

/// d smoothness / d depth, one entry per pixel.
inline std::vector<double> smoothness_gradient(const DepthMap& depth, const ImageBuffer& image) {
  detail::check_grid(depth, image, "smoothness_gradient");
  std::vector<double> g(depth.size(), 0.0);
  const int w = depth.width();
  detail::for_each_forward_difference(
      w, depth.height(), [&](int x0, int y0, int x1, int y1, double wgt) {
        const double s = detail::sign0(depth(x1, y1) - depth(x0, y0)) * wgt *
                         std::exp(-detail::mean_abs_channel_diff(image, x0, y0, x1, y1));
        g[static_cast<std::size_t>(y1) * w + x1] += s;
        g[static_cast<std::size_t>(y0) * w + x0] -= s;
      });
  return g;
}

/// Unweighted sum of smoothness() over matching pyramid levels.
inline double multiscale_smoothness(std::span<const DepthMap> depths,
                                    std::span<const ImageBuffer> images) {
  if (depths.size() != images.size() || depths.empty())
    throw InvalidArgument("multiscale_smoothness: depth and image lists must match and be non-empty");
  double total = 0.0;
  for (std::size_t i = 0; i < depths.size(); ++i) total += smoothness(depths[i], images[i]);
  return total;
}

inline double total_loss(double photometric, double smo, double reg, double bf,
                         const LossWeights& w) {
  for (double v : {photometric, smo, reg, bf})
    if (!std::isfinite(v)) throw InvalidArgument("total_loss: non-finite component");
  w.validate();
  return photometric + w.lambda_smo * smo + w.lambda_reg * reg + w.lambda_bf * bf;
}

struct LossTerms {
  double photometric = 0.0;
  double smoothness = 0.0;
  double reg = 0.0;
  double total = 0.0;
};

/// Single-source objective: masked photometric error of the warped source,
/// edge-aware smoothness of the depth (guided by the target) and the mask
/// regulariser. Poses enter only through the warp.
inline LossTerms evaluate_loss(const ImageBuffer& target, const ImageBuffer& source,
                               const DepthMap& depth, const SE3Transform& pose,
                               const CameraIntrinsics& k, const WeightMask& mask,
                               const LossWeights& w) {
  detail::check_same(target, source, "evaluate_loss");
  const WarpResult wr = inverse_warp(source, depth, pose, k);
  LossTerms t;
  t.photometric = photometric_l1(target, wr.recon, mask, wr.valid);
  t.smoothness = smoothness(depth, target);
  t.reg = explainability_reg(mask);
  t.total = total_loss(t.photometric, t.smoothness, t.reg, 0.0, w);
  return t;
}

struct LossGradients {
  LossTerms terms;
  std::vector<double> d_depth;  // per pixel
  Vec6 d_pose = Vec6::Zero();
  std::vector<double> d_mask;  // per pixel
};

/// Analytic gradients of evaluate_loss().total. The validity pattern is
/// treated as fixed, and the L1 sub-gradient uses sign(0) = 0.
inline LossGradients loss_gradients(const ImageBuffer& target, const ImageBuffer& source,
                                    const DepthMap& depth, const SE3Transform& pose,
                                    const CameraIntrinsics& k, const WeightMask& mask,
                                    const LossWeights& w) {
  detail::check_same(target, source, "loss_gradients");
  detail::check_grid(mask, target, "loss_gradients");
  const WarpResult wr = warp(source, depth, pose, k, true);
  const WarpJacobians& jac = *wr.jacobians;

  LossGradients g;
  g.terms.photometric = photometric_l1(target, wr.recon, mask, wr.valid);
  g.terms.smoothness = smoothness(depth, target);
  g.terms.reg = explainability_reg(mask);
  g.terms.total = total_loss(g.terms.photometric, g.terms.smoothness, g.terms.reg, 0.0, w);

  const double inv_valid = 1.0 / count_valid(wr.valid);
  const double n = static_cast<double>(mask.size());
  g.d_depth = smoothness_gradient(depth, target);
  for (double& v : g.d_depth) v *= w.lambda_smo;
  g.d_mask.assign(mask.size(), 0.0);

  const int width = target.width();
  for (int y = 0; y < target.height(); ++y) {
    for (int x = 0; x < width; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * width + x;
      const double m = mask(x, y);
      g.d_mask[i] = m > kMaskClamp ? -w.lambda_reg / (n * m) : 0.0;
      if (!wr.valid(x, y)) continue;
      double abs_sum = 0.0;
      for (int c = 0; c < target.channels(); ++c) {
        const double r = wr.recon(x, y, c) - target(x, y, c);
        abs_sum += std::abs(r);
        const double s = detail::sign0(r) * m * inv_valid;
        g.d_depth[i] += s * jac.depth(x, y, c);
        g.d_pose += s * jac.pose(x, y, c);
      }
      g.d_mask[i] += abs_sum * inv_valid;
    }
  }
  return g;
}

}  // namespace egodepth
