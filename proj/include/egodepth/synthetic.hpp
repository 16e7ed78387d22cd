#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <string_view>
#include <vector>

#include "egodepth/camera.hpp"
#include "egodepth/image.hpp"

namespace egodepth {

enum class SceneKind { fronto_plane, slanted_plane, two_planes };

inline std::optional<SceneKind> parse_scene_kind(std::string_view s) {
  if (s == "fronto_plane") return SceneKind::fronto_plane;
  if (s == "slanted_plane") return SceneKind::slanted_plane;
  if (s == "two_planes") return SceneKind::two_planes;
  return std::nullopt;
}

/// One cosine term of the analytic texture. Frequencies are in cycles per
/// scene unit along the plane's in-plane axes; phase in radians.
struct TextureTerm {
  double fx = 0.0;
  double fy = 0.0;
  double amplitude = 0.0;
  double phase = 0.0;
};

/// Plane n . X = offset (n unit length, world = target camera frame). An
/// optional rectangle in plane coordinates bounds the surface.
struct PlaneSpec {
  Vec3 normal = Vec3::UnitZ();
  double offset = 5.0;
  std::optional<std::array<double, 4>> bounds;  // s_min, s_max, t_min, t_max

  Vec3 origin() const { return offset * normal; }
  // In-plane axes, chosen deterministically from the normal.
  std::pair<Vec3, Vec3> axes() const {
    const Vec3 ref = std::abs(normal.y()) < 0.9 ? Vec3::UnitY() : Vec3::UnitX();
    Vec3 e1 = ref.cross(normal).normalized();
    if (e1.x() < 0.0) e1 = -e1;
    const Vec3 e2 = normal.cross(e1);
    return {e1, e2};
  }
};

struct SceneSpec {
  SceneKind kind = SceneKind::fronto_plane;
  std::vector<TextureTerm> texture;
  std::vector<PlaneSpec> planes;
  std::uint64_t seed = 42;
  double sky_depth = 80.0;
};

/// Texture value at plane coordinates (s, t), clamped to [0, 1]. Plane index
/// shifts the phases so different surfaces do not share a pattern.
inline double texture_value(const std::vector<TextureTerm>& terms, double s, double t,
                            std::size_t plane_index = 0) {
  double v = 0.0;
  for (std::size_t i = 0; i < terms.size(); ++i) {
    const auto& term = terms[i];
    const double shift = 1.3 * static_cast<double>(plane_index) * static_cast<double>(i);
    v += term.amplitude *
         std::cos(2.0 * std::numbers::pi * (term.fx * s + term.fy * t) + term.phase + shift);
  }
  return std::clamp(v, 0.0, 1.0);
}

/// Builds a scene of the requested kind with a seeded multi-frequency texture:
/// a 0.5 base plus four oblique cosines with periods of 1.7 to 3.3 scene units.
inline SceneSpec make_scene(SceneKind kind, std::uint64_t seed = 42) {
  SceneSpec scene;
  scene.kind = kind;
  scene.seed = seed;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  scene.texture.push_back({0.0, 0.0, 0.5, 0.0});
  for (int i = 0; i < 4; ++i) {
    // Directions stay at least 10 degrees away from both axes.
    const double angle = (10.0 + 70.0 * unit(rng) + 90.0 * i) * std::numbers::pi / 180.0;
    const double freq = 0.3 + 0.3 * unit(rng);
    const double amp = 0.06 + 0.05 * unit(rng);
    const double phase = 2.0 * std::numbers::pi * unit(rng);
    scene.texture.push_back({freq * std::cos(angle), freq * std::sin(angle), amp, phase});
  }

  switch (kind) {
    case SceneKind::fronto_plane:
      scene.planes.push_back({Vec3::UnitZ(), 5.0, std::nullopt});
      break;
    case SceneKind::slanted_plane: {
      const Vec3 n = Vec3(0.25, -0.15, 1.0).normalized();
      scene.planes.push_back({n, n.dot(Vec3(0.0, 0.0, 5.0)), std::nullopt});
      break;
    }
    case SceneKind::two_planes:
      scene.planes.push_back({Vec3::UnitZ(), 6.0, std::nullopt});
      scene.planes.push_back({Vec3::UnitZ(), 3.5, std::array<double, 4>{-1.2, 0.2, -0.8, 0.8}});
      break;
  }
  return scene;
}

/// Intrinsics used for synthetic renders: fx = fy = 0.8 * width, principal
/// point at the image center.
inline CameraIntrinsics default_intrinsics(int width, int height) {
  return {0.8 * width, 0.8 * width, 0.5 * (width - 1), 0.5 * (height - 1)};
}

struct RenderedView {
  ImageBuffer image;
  DepthMap depth;
};

/// Ray-casts every pixel center against the scene planes. `pose` maps world
/// (target camera) coordinates into this camera's frame. Pixels that hit no
/// plane in front of the camera get intensity 0 and depth = sky_depth.
inline RenderedView render_view(const SceneSpec& scene, const SE3Transform& pose,
                                const CameraIntrinsics& k, int width, int height) {
  k.validate();
  RenderedView out{ImageBuffer(width, height, 1), DepthMap(width, height)};
  const Mat3 rt = pose.rotation().matrix().transpose();
  const Vec3 center = -(rt * pose.translation());

  std::vector<std::pair<Vec3, Vec3>> axes;
  for (const auto& pl : scene.planes) axes.push_back(pl.axes());

  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      // Camera-frame ray with unit z, so the ray parameter is the depth.
      const Vec3 ray_c((x - k.cx) / k.fx, (y - k.cy) / k.fy, 1.0);
      const Vec3 ray_w = rt * ray_c;
      double best = std::numeric_limits<double>::infinity();
      double value = 0.0;
      for (std::size_t i = 0; i < scene.planes.size(); ++i) {
        const auto& pl = scene.planes[i];
        const double denom = pl.normal.dot(ray_w);
        if (std::abs(denom) < 1e-12) continue;
        const double lambda = (pl.offset - pl.normal.dot(center)) / denom;
        if (!(lambda > kMinPointZ) || lambda >= best) continue;
        const Vec3 rel = center + lambda * ray_w - pl.origin();
        const double s = axes[i].first.dot(rel);
        const double t = axes[i].second.dot(rel);
        if (pl.bounds) {
          const auto& b = *pl.bounds;
          if (s < b[0] || s > b[1] || t < b[2] || t > b[3]) continue;
        }
        best = lambda;
        value = texture_value(scene.texture, s, t, i);
      }
      if (std::isfinite(best)) {
        out.image(x, y) = value;
        out.depth(x, y) = best;
      } else {
        out.image(x, y) = 0.0;
        out.depth(x, y) = scene.sky_depth;
      }
    }
  }
  return out;
}

struct RenderedPair {
  ImageBuffer target;
  ImageBuffer source;
  DepthMap gt_depth;      // target frame
  DepthMap source_depth;  // source frame, for backward warps
  SE3Transform gt_pose;   // target -> source
  CameraIntrinsics k;
};

/// Target rendered at the world origin, source at `baseline_pose`
/// (target -> source).
inline RenderedPair render_pair(const SceneSpec& scene, const SE3Transform& baseline_pose,
                                const CameraIntrinsics& k, int width, int height) {
  RenderedView t = render_view(scene, SE3Transform::identity(), k, width, height);
  RenderedView s = render_view(scene, baseline_pose, k, width, height);
  return {std::move(t.image), std::move(s.image), std::move(t.depth), std::move(s.depth),
          baseline_pose, k};
}

}  // namespace egodepth
