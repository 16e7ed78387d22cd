#pragma once

#include <cmath>
#include <random>
#include <vector>

#include <Eigen/Core>

#include "egodepth/image.hpp"

namespace egodepth {

/// Row-major grid of F-dimensional feature vectors.
class FeatureMap {
 public:
  FeatureMap() = default;
  FeatureMap(int width, int height, int features, double fill = 0.0)
      : width_(width), height_(height), features_(features) {
    if (width <= 0 || height <= 0 || features <= 0)
      throw InvalidArgument("feature map dimensions must be positive");
    data_.assign(static_cast<std::size_t>(width) * height * features, fill);
  }

  int width() const { return width_; }
  int height() const { return height_; }
  int features() const { return features_; }
  std::size_t positions() const { return static_cast<std::size_t>(width_) * height_; }

  Eigen::Map<Eigen::VectorXd> at(int x, int y) {
    return {data_.data() + offset(x, y), features_};
  }
  Eigen::Map<const Eigen::VectorXd> at(int x, int y) const {
    return {data_.data() + offset(x, y), features_};
  }
  Eigen::Map<Eigen::VectorXd> at(std::size_t i) { return {data_.data() + i * features_, features_}; }
  Eigen::Map<const Eigen::VectorXd> at(std::size_t i) const {
    return {data_.data() + i * features_, features_};
  }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  friend bool operator==(const FeatureMap&, const FeatureMap&) = default;

 private:
  std::size_t offset(int x, int y) const {
    return (static_cast<std::size_t>(y) * width_ + x) * features_;
  }

  int width_ = 0;
  int height_ = 0;
  int features_ = 0;
  std::vector<double> data_;
};

/// Parameters of one additive attention gate. Also used as the container
/// for their gradients.
struct AttentionGateParams {
  Eigen::MatrixXd w_x;   // F_l x F_int
  Eigen::MatrixXd w_g;   // F_g x F_int
  Eigen::VectorXd psi;   // F_int
  Eigen::VectorXd b_xg;  // F_int
  double b_psi = 0.0;

  int f_l() const { return static_cast<int>(w_x.rows()); }
  int f_g() const { return static_cast<int>(w_g.rows()); }
  int f_int() const { return static_cast<int>(w_x.cols()); }

  static AttentionGateParams zeros(int f_l, int f_g, int f_int) {
    return {Eigen::MatrixXd::Zero(f_l, f_int), Eigen::MatrixXd::Zero(f_g, f_int),
            Eigen::VectorXd::Zero(f_int), Eigen::VectorXd::Zero(f_int), 0.0};
  }

  /// Seeded uniform initialisation in [-scale, scale].
  static AttentionGateParams random(int f_l, int f_g, int f_int, std::uint64_t seed,
                                    double scale = 0.1) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-scale, scale);
    auto p = zeros(f_l, f_g, f_int);
    for (auto* m : {&p.w_x, &p.w_g})
      for (Eigen::Index i = 0; i < m->size(); ++i) m->data()[i] = u(rng);
    for (auto* v : {&p.psi, &p.b_xg})
      for (Eigen::Index i = 0; i < v->size(); ++i) (*v)(i) = u(rng);
    p.b_psi = u(rng);
    return p;
  }

  void validate() const {
    if (f_l() <= 0 || f_g() <= 0 || f_int() <= 0 || w_g.cols() != f_int() ||
        psi.size() != f_int() || b_xg.size() != f_int())
      throw InvalidArgument("attention gate parameter dimensions are inconsistent");
    if (!w_x.allFinite() || !w_g.allFinite() || !psi.allFinite() || !b_xg.allFinite() ||
        !std::isfinite(b_psi))
      throw InvalidArgument("attention gate parameters must be finite");
  }
};

struct AttentionOutput {
  AttentionMap alpha;
  FeatureMap gated;
};

namespace detail {

inline double sigmoid(double q) {
  return q >= 0.0 ? 1.0 / (1.0 + std::exp(-q)) : std::exp(q) / (1.0 + std::exp(q));
}

inline void check_gate_inputs(const FeatureMap& x, const FeatureMap& g,
                              const AttentionGateParams& p) {
  p.validate();
  if (x.features() != p.f_l()) throw InvalidArgument("attention gate: x feature size != F_l");
  if (g.features() != p.f_g()) throw InvalidArgument("attention gate: g feature size != F_g");
  if (x.width() != g.width() || x.height() != g.height())
    throw InvalidArgument("attention gate: gating map must be resampled to x's grid first");
}

}  // namespace detail

/// alpha_i = sigmoid(psi^T relu(W_x^T x_i + W_g^T g_i + b_xg) + b_psi),
/// gated_i = alpha_i * x_i.
inline AttentionOutput ag_forward(const FeatureMap& x, const FeatureMap& g,
                                  const AttentionGateParams& p) {
  detail::check_gate_inputs(x, g, p);
  AttentionOutput out{AttentionMap(x.width(), x.height()),
                      FeatureMap(x.width(), x.height(), x.features())};
  for (std::size_t i = 0; i < x.positions(); ++i) {
    const Eigen::VectorXd z = p.w_x.transpose() * x.at(i) + p.w_g.transpose() * g.at(i) + p.b_xg;
    const double q = p.psi.dot(z.cwiseMax(0.0)) + p.b_psi;
    const double a = detail::sigmoid(q);
    out.alpha[i] = a;
    out.gated.at(i) = a * x.at(i);
  }
  return out;
}

struct AttentionGradients {
  AttentionGateParams d_params;
  FeatureMap d_x;
  FeatureMap d_g;
};

/// Gradients of sum_i <upstream_i, gated_i>. ReLU derivative at 0 is 0.
inline AttentionGradients ag_backward(const FeatureMap& x, const FeatureMap& g,
                                      const AttentionGateParams& p, const FeatureMap& upstream) {
  detail::check_gate_inputs(x, g, p);
  if (upstream.width() != x.width() || upstream.height() != x.height() ||
      upstream.features() != x.features())
    throw InvalidArgument("ag_backward: upstream gradient must match x");

  AttentionGradients r{AttentionGateParams::zeros(p.f_l(), p.f_g(), p.f_int()),
                       FeatureMap(x.width(), x.height(), x.features()),
                       FeatureMap(g.width(), g.height(), g.features())};
  for (std::size_t i = 0; i < x.positions(); ++i) {
    const auto xi = x.at(i);
    const auto gi = g.at(i);
    const Eigen::VectorXd z = p.w_x.transpose() * xi + p.w_g.transpose() * gi + p.b_xg;
    const Eigen::VectorXd h = z.cwiseMax(0.0);
    const double a = detail::sigmoid(p.psi.dot(h) + p.b_psi);

    const double d_alpha = upstream.at(i).dot(xi);
    const double d_q = d_alpha * a * (1.0 - a);
    r.d_params.psi += d_q * h;
    r.d_params.b_psi += d_q;
    const Eigen::VectorXd d_z = (d_q * p.psi).cwiseProduct((z.array() > 0.0).cast<double>().matrix());
    r.d_params.w_x += xi * d_z.transpose();
    r.d_params.w_g += gi * d_z.transpose();
    r.d_params.b_xg += d_z;
    r.d_x.at(i) = a * upstream.at(i) + p.w_x * d_z;
    r.d_g.at(i) = p.w_g * d_z;
  }
  return r;
}

namespace detail {

// Align-corners source coordinate for output index i.
inline double align_corners(int i, int src, int dst) {
  if (src == 1 || dst == 1) return 0.0;
  return static_cast<double>(i) * (src - 1) / (dst - 1);
}

struct Lerp1 {
  int i0, i1;
  double a;
};

inline Lerp1 lerp_index(int i, int src, int dst) {
  const double s = align_corners(i, src, dst);
  int i0 = std::min(static_cast<int>(std::floor(s)), std::max(src - 2, 0));
  const int i1 = std::min(i0 + 1, src - 1);
  return {i0, i1, s - i0};
}

}  // namespace detail

/// Bilinear (align-corners) upsampling of a coarse gating map. A 1x1 map
/// broadcasts its single vector to every position.
inline FeatureMap resample_gating(const FeatureMap& coarse, int target_w, int target_h) {
  if (target_w < coarse.width() || target_h < coarse.height())
    throw InvalidArgument("resample_gating: target must not be smaller than the source");
  FeatureMap out(target_w, target_h, coarse.features());
  for (int y = 0; y < target_h; ++y) {
    const auto ly = detail::lerp_index(y, coarse.height(), target_h);
    for (int x = 0; x < target_w; ++x) {
      const auto lx = detail::lerp_index(x, coarse.width(), target_w);
      for (int f = 0; f < coarse.features(); ++f)
        out.at(x, y)(f) = std::lerp(std::lerp(coarse.at(lx.i0, ly.i0)(f), coarse.at(lx.i1, ly.i0)(f), lx.a),
                                    std::lerp(coarse.at(lx.i0, ly.i1)(f), coarse.at(lx.i1, ly.i1)(f), lx.a), ly.a);
    }
  }
  return out;
}

/// Upsamples attention coefficients to image resolution for use as the
/// photometric weight mask.
inline WeightMask alpha_to_loss_mask(const AttentionMap& alpha, int image_w, int image_h) {
  if (image_w < alpha.width() || image_h < alpha.height())
    throw InvalidArgument("alpha_to_loss_mask: image must not be smaller than the attention map");
  WeightMask out(image_w, image_h);
  for (int y = 0; y < image_h; ++y) {
    const auto ly = detail::lerp_index(y, alpha.height(), image_h);
    for (int x = 0; x < image_w; ++x) {
      const auto lx = detail::lerp_index(x, alpha.width(), image_w);
      const double v = std::lerp(std::lerp(alpha(lx.i0, ly.i0), alpha(lx.i1, ly.i0), lx.a),
                                 std::lerp(alpha(lx.i0, ly.i1), alpha(lx.i1, ly.i1), lx.a), ly.a);
      out(x, y) = std::clamp(v, 0.0, 1.0);
    }
  }
  return out;
}

}  // namespace egodepth
