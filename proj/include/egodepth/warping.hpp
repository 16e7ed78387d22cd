#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <optional>

#include "egodepth/camera.hpp"
#include "egodepth/image.hpp"

namespace egodepth {

// Sample points up to this far outside the pixel-center hull are snapped onto
// the border instead of being rejected, which absorbs rounding in reprojection.
inline constexpr double kBorderTolerance = 1e-6;
inline constexpr int kMaxChannels = 3;

using ChannelVec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxChannels, 1>;
using SampleGrad = Eigen::Matrix<double, 2, Eigen::Dynamic, 0, 2, kMaxChannels>;

/// The four neighbours of a sample point and their interpolation weights.
/// Points on an integer grid line use the right/lower cell.
struct BilinearCell {
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  double ax = 0.0, ay = 0.0;  // fractional offsets inside the cell
  bool valid = false;

  std::array<double, 4> weights() const {
    return {(1.0 - ax) * (1.0 - ay), ax * (1.0 - ay), (1.0 - ax) * ay, ax * ay};
  }
};

inline BilinearCell locate_cell(int width, int height, const Pixel& p) {
  BilinearCell cell;
  if (!std::isfinite(p.u) || !std::isfinite(p.v)) return cell;
  if (p.u < -kBorderTolerance || p.u > width - 1 + kBorderTolerance ||
      p.v < -kBorderTolerance || p.v > height - 1 + kBorderTolerance)
    return cell;
  const double u = std::clamp(p.u, 0.0, static_cast<double>(width - 1));
  const double v = std::clamp(p.v, 0.0, static_cast<double>(height - 1));
  cell.x0 = std::min(static_cast<int>(std::floor(u)), std::max(width - 2, 0));
  cell.y0 = std::min(static_cast<int>(std::floor(v)), std::max(height - 2, 0));
  cell.x1 = std::min(cell.x0 + 1, width - 1);
  cell.y1 = std::min(cell.y0 + 1, height - 1);
  cell.ax = u - cell.x0;
  cell.ay = v - cell.y0;
  cell.valid = true;
  return cell;
}

struct Sample {
  ChannelVec value;
  bool valid = false;
};

/// Bilinear interpolation at a continuous position. Out-of-bounds samples
/// return zeros with valid = false.
inline Sample bilinear_sample(const ImageBuffer& img, const Pixel& p) {
  Sample s{ChannelVec::Zero(img.channels()), false};
  const BilinearCell c = locate_cell(img.width(), img.height(), p);
  if (!c.valid) return s;
  for (int ch = 0; ch < img.channels(); ++ch) {
    const double i00 = img(c.x0, c.y0, ch), i10 = img(c.x1, c.y0, ch);
    const double i01 = img(c.x0, c.y1, ch), i11 = img(c.x1, c.y1, ch);
    s.value(ch) = std::lerp(std::lerp(i00, i10, c.ax), std::lerp(i01, i11, c.ax), c.ay);
  }
  s.valid = true;
  return s;
}

/// d(sample)/d(u, v): row 0 is the u derivative, row 1 the v derivative.
/// Zero for out-of-bounds points.
inline SampleGrad bilinear_sample_grad(const ImageBuffer& img, const Pixel& p) {
  SampleGrad g = SampleGrad::Zero(2, img.channels());
  const BilinearCell c = locate_cell(img.width(), img.height(), p);
  if (!c.valid) return g;
  for (int ch = 0; ch < img.channels(); ++ch) {
    const double i00 = img(c.x0, c.y0, ch), i10 = img(c.x1, c.y0, ch);
    const double i01 = img(c.x0, c.y1, ch), i11 = img(c.x1, c.y1, ch);
    g(0, ch) = c.x1 == c.x0 ? 0.0 : (1.0 - c.ay) * (i10 - i00) + c.ay * (i11 - i01);
    g(1, ch) = c.y1 == c.y0 ? 0.0 : (1.0 - c.ax) * (i01 - i00) + c.ax * (i11 - i10);
  }
  return g;
}

/// Per-pixel derivatives of the reconstruction. Entries of invalid pixels are zero.
struct WarpJacobians {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::vector<double> d_depth;  // [pixel][channel]
  std::vector<double> d_pose;   // [pixel][channel][6]

  double depth(int x, int y, int c) const { return d_depth[offset(x, y, c)]; }
  Vec6 pose(int x, int y, int c) const {
    return Eigen::Map<const Vec6>(d_pose.data() + 6 * offset(x, y, c));
  }

  std::size_t offset(int x, int y, int c) const {
    return (static_cast<std::size_t>(y) * width + x) * channels + c;
  }
};

struct WarpResult {
  ImageBuffer recon;
  ValidityMask valid;
  std::optional<WarpJacobians> jacobians;
};

namespace detail {

inline void check_warp_inputs(const ImageBuffer& source, const DepthMap& depth,
                              const CameraIntrinsics& k) {
  if (!depth.same_shape(source.width(), source.height()))
    throw InvalidArgument("inverse_warp: source and depth dimensions differ");
  validate_depth(depth);
  k.validate();
}

}  // namespace detail

/// Reconstructs the target view by sampling `source` at the reprojection of
/// every target pixel. Optionally also returns the chain-rule Jacobians.
inline WarpResult warp(const ImageBuffer& source, const DepthMap& depth, const SE3Transform& pose,
                       const CameraIntrinsics& k, bool with_jacobians) {
  detail::check_warp_inputs(source, depth, k);
  const int w = source.width(), h = source.height(), nc = source.channels();
  WarpResult r{ImageBuffer(w, h, nc), ValidityMask(w, h, 0), std::nullopt};
  WarpJacobians jac;
  if (with_jacobians) {
    jac.width = w;
    jac.height = h;
    jac.channels = nc;
    jac.d_depth.assign(source.pixel_count() * nc, 0.0);
    jac.d_pose.assign(source.pixel_count() * nc * 6, 0.0);
  }

  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const Pixel pt{static_cast<double>(x), static_cast<double>(y)};
      const Vec3 q = pose * backproject(pt, depth(x, y), k);
      if (!(q.z() > kMinPointZ)) continue;
      const Pixel ps = project(q, k);
      const Sample s = bilinear_sample(source, ps);
      if (!s.valid) continue;
      r.valid(x, y) = 1;
      for (int c = 0; c < nc; ++c) r.recon(x, y, c) = s.value(c);
      if (!with_jacobians) continue;

      const ReprojectionJacobian rj = reproject_jacobian(pt, depth(x, y), pose, k);
      const SampleGrad g = bilinear_sample_grad(source, ps);
      for (int c = 0; c < nc; ++c) {
        const std::size_t o = jac.offset(x, y, c);
        jac.d_depth[o] = g.col(c).dot(rj.d_depth);
        Eigen::Map<Vec6>(jac.d_pose.data() + 6 * o) = (g.col(c).transpose() * rj.d_pose).transpose();
      }
    }
  }
  if (with_jacobians) r.jacobians = std::move(jac);
  return r;
}

inline WarpResult inverse_warp(const ImageBuffer& source, const DepthMap& depth,
                               const SE3Transform& pose, const CameraIntrinsics& k) {
  return warp(source, depth, pose, k, false);
}

inline WarpJacobians warp_jacobians(const ImageBuffer& source, const DepthMap& depth,
                                    const SE3Transform& pose, const CameraIntrinsics& k) {
  return *warp(source, depth, pose, k, true).jacobians;
}

/// PSNR in dB over valid pixels, peak value 1.
inline double psnr(const ImageBuffer& a, const ImageBuffer& b, const ValidityMask& valid) {
  if (!a.same_shape(b) || !valid.same_shape(a.width(), a.height()))
    throw InvalidArgument("psnr: shape mismatch");
  double sse = 0.0;
  std::size_t n = 0;
  for (int y = 0; y < a.height(); ++y)
    for (int x = 0; x < a.width(); ++x) {
      if (!valid(x, y)) continue;
      for (int c = 0; c < a.channels(); ++c) {
        const double d = a(x, y, c) - b(x, y, c);
        sse += d * d;
        ++n;
      }
    }
  if (n == 0) throw DegenerateInput("psnr: no valid pixels");
  if (sse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(static_cast<double>(n) / sse);
}

}  // namespace egodepth
