#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "egodepth/error.hpp"

namespace egodepth {

/// Single-valued row-major raster. The tag keeps depth maps, masks and
/// attention maps from being mixed up at call sites.
template <typename T, typename Tag>
class Grid {
 public:
  using value_type = T;

  Grid() = default;
  Grid(int width, int height, T fill = T{}) : width_(width), height_(height) {
    check_dims(width, height);
    data_.assign(static_cast<std::size_t>(width) * height, fill);
  }
  Grid(int width, int height, std::vector<T> data)
      : width_(width), height_(height), data_(std::move(data)) {
    check_dims(width, height);
    if (data_.size() != static_cast<std::size_t>(width) * height)
      throw InvalidArgument("grid data length does not match width*height");
  }

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return data_.size(); }

  T& operator()(int x, int y) { return data_[index(x, y)]; }
  const T& operator()(int x, int y) const { return data_[index(x, y)]; }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }

  bool same_shape(int w, int h) const { return width_ == w && height_ == h; }
  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  static void check_dims(int w, int h) {
    if (w <= 0 || h <= 0) throw InvalidArgument("grid dimensions must be positive");
  }
  std::size_t index(int x, int y) const { return static_cast<std::size_t>(y) * width_ + x; }

  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

struct DepthTag;
struct DisparityTag;
struct ValidityTag;
struct WeightTag;
struct AttentionTag;

using DepthMap = Grid<double, DepthTag>;
using DisparityMap = Grid<double, DisparityTag>;
using ValidityMask = Grid<std::uint8_t, ValidityTag>;
using WeightMask = Grid<double, WeightTag>;
using AttentionMap = Grid<double, AttentionTag>;

inline void validate_depth(const DepthMap& d) {
  for (double v : d.data())
    if (!(v > 0.0) || !std::isfinite(v))
      throw InvalidArgument("depth map entries must be positive and finite");
}

inline constexpr double kMinDisparity = 1e-6;

/// depth = 1 / max(disparity, 1e-6)
inline DepthMap disparity_to_depth(const DisparityMap& disp) {
  DepthMap out(disp.width(), disp.height());
  for (std::size_t i = 0; i < disp.size(); ++i) out[i] = 1.0 / std::max(disp[i], kMinDisparity);
  return out;
}

inline int count_valid(const ValidityMask& m) {
  int n = 0;
  for (auto v : m.data()) n += v != 0;
  return n;
}

/// Interleaved row-major intensity image with 1 or 3 channels.
class ImageBuffer {
 public:
  ImageBuffer() = default;
  ImageBuffer(int width, int height, int channels, double fill = 0.0)
      : width_(width), height_(height), channels_(channels) {
    check(width, height, channels);
    data_.assign(static_cast<std::size_t>(width) * height * channels, fill);
  }
  ImageBuffer(int width, int height, int channels, std::vector<double> data)
      : width_(width), height_(height), channels_(channels), data_(std::move(data)) {
    check(width, height, channels);
    if (data_.size() != static_cast<std::size_t>(width) * height * channels)
      throw InvalidArgument("image data length does not match width*height*channels");
  }

  int width() const { return width_; }
  int height() const { return height_; }
  int channels() const { return channels_; }
  std::size_t pixel_count() const { return static_cast<std::size_t>(width_) * height_; }

  double& operator()(int x, int y, int c = 0) { return data_[index(x, y, c)]; }
  double operator()(int x, int y, int c = 0) const { return data_[index(x, y, c)]; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  bool same_shape(const ImageBuffer& o) const {
    return width_ == o.width_ && height_ == o.height_ && channels_ == o.channels_;
  }
  friend bool operator==(const ImageBuffer&, const ImageBuffer&) = default;

 private:
  static void check(int w, int h, int c) {
    if (w <= 0 || h <= 0) throw InvalidArgument("image dimensions must be positive");
    if (c != 1 && c != 3) throw InvalidArgument("image must have 1 or 3 channels");
  }
  std::size_t index(int x, int y, int c) const {
    return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
  }

  int width_ = 0;
  int height_ = 0;
  int channels_ = 1;
  std::vector<double> data_;
};

namespace detail {

inline void check_downsample(int w, int h) {
  if (w < 2 || h < 2) throw InvalidArgument("cannot downsample an image smaller than 2x2");
}

}  // namespace detail

/// 2x2 block average; an odd trailing row/column is dropped.
inline ImageBuffer downsample2x(const ImageBuffer& img) {
  detail::check_downsample(img.width(), img.height());
  ImageBuffer out(img.width() / 2, img.height() / 2, img.channels());
  for (int y = 0; y < out.height(); ++y)
    for (int x = 0; x < out.width(); ++x)
      for (int c = 0; c < img.channels(); ++c)
        out(x, y, c) = 0.25 * (img(2 * x, 2 * y, c) + img(2 * x + 1, 2 * y, c) +
                               img(2 * x, 2 * y + 1, c) + img(2 * x + 1, 2 * y + 1, c));
  return out;
}

template <typename T, typename Tag>
Grid<T, Tag> downsample2x(const Grid<T, Tag>& g) {
  detail::check_downsample(g.width(), g.height());
  Grid<T, Tag> out(g.width() / 2, g.height() / 2);
  for (int y = 0; y < out.height(); ++y)
    for (int x = 0; x < out.width(); ++x)
      out(x, y) = 0.25 * (g(2 * x, 2 * y) + g(2 * x + 1, 2 * y) + g(2 * x, 2 * y + 1) +
                          g(2 * x + 1, 2 * y + 1));
  return out;
}

/// Level 0 is the input; each further level halves both dimensions.
template <typename Raster>
std::vector<Raster> build_pyramid(const Raster& base, int levels) {
  if (levels < 1) throw InvalidArgument("pyramid needs at least one level");
  std::vector<Raster> out{base};
  for (int l = 1; l < levels; ++l) out.push_back(downsample2x(out.back()));
  return out;
}

}  // namespace egodepth
