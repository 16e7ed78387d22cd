#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <numbers>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "egodepth/align.hpp"
#include "egodepth/gradcheck.hpp"
#include "egodepth/io.hpp"
#include "egodepth/metrics.hpp"
#include "egodepth/synthetic.hpp"

namespace egodepth::cli {

namespace fs = std::filesystem;

enum ExitCode : int {
  kOk = 0,
  kCheckFailed = 1,
  kBadFlags = 2,
  kWriteFailed = 3,
  kUnreadableInput = 4,
  kInvalidInput = 5,
};

inline constexpr std::uint64_t kDefaultSeed = 42;
inline constexpr double kGradTolerance = 1e-4;

inline std::string format_sci(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4e", v);
  return buf;
}

namespace detail {

inline std::string join_fixed(const Vec3& v) {
  return format_fixed(v.x()) + " " + format_fixed(v.y()) + " " + format_fixed(v.z());
}

inline std::string join_real(const Vec3& v) {
  return format_real(v.x()) + "," + format_real(v.y()) + "," + format_real(v.z());
}

// First missing file, if any.
inline std::optional<fs::path> first_missing(const std::vector<fs::path>& files) {
  for (const auto& f : files)
    if (!fs::is_regular_file(f)) return f;
  return std::nullopt;
}

}  // namespace detail

struct GradcheckOptions {
  std::uint64_t seed = kDefaultSeed;
  int trials = 100;
  std::optional<GradComponent> component;
};

inline int cmd_gradcheck(const GradcheckOptions& o, std::ostream& out, std::ostream& err) {
  if (o.trials < 1) {
    err << "error: --trials must be >= 1\n";
    return kBadFlags;
  }
  std::vector<GradComponent> comps(kGradComponents.begin(), kGradComponents.end());
  if (o.component) comps = {*o.component};

  bool ok = true;
  out << "component   trials  redrawn  max_rel_error\n";
  for (GradComponent c : comps) {
    const GradCheckReport r = grad_check(c, o.seed, o.trials);
    char line[128];
    std::snprintf(line, sizeof line, "%-10s  %6d  %7d  %s\n", std::string(to_string(c)).c_str(), r.trials,
                  r.redrawn, format_sci(r.max_rel_error).c_str());
    out << line;
    ok = ok && r.max_rel_error < kGradTolerance;
  }
  out << (ok ? "all components below " : "some component at or above ") << format_sci(kGradTolerance) << "\n";
  return ok ? kOk : kCheckFailed;
}

struct SynthOptions {
  std::uint64_t seed = kDefaultSeed;
  fs::path out = ".";
  SceneKind scene = SceneKind::fronto_plane;
  int width = 128;
  int height = 128;
  // tx, ty, tz, rx, ry, rz: target -> source, rotation as axis-angle radians.
  std::array<double, 6> baseline{0.1, 0.0, 0.0, 0.0, 0.0, 0.0};
};

inline constexpr const char* kTargetFile = "target.ppm";
inline constexpr const char* kSourceFile = "source.ppm";
inline constexpr const char* kDepthFile = "gt_depth.pfm";
inline constexpr const char* kPoseFile = "gt_pose.txt";
inline constexpr const char* kIntrinsicsFile = "intrinsics.txt";
inline constexpr const char* kReportFile = "report.txt";

inline Pose6DoF baseline_pose(const std::array<double, 6>& b) {
  return {Vec3(b[3], b[4], b[5]), Vec3(b[0], b[1], b[2])};
}

inline int cmd_synth(const SynthOptions& o, std::ostream& out, std::ostream& err) {
  if (o.width < 8 || o.height < 8) {
    err << "error: --size must be at least 8x8\n";
    return kBadFlags;
  }
  SE3Transform pose;
  try {
    pose = baseline_pose(o.baseline).to_transform();
  } catch (const Error& e) {
    err << "error: --baseline: " << e.what() << "\n";
    return kBadFlags;
  }
  const SceneSpec scene = make_scene(o.scene, o.seed);
  const CameraIntrinsics k = default_intrinsics(o.width, o.height);
  const RenderedPair pair = render_pair(scene, pose, k, o.width, o.height);
  try {
    std::error_code ec;
    fs::create_directories(o.out, ec);
    if (!fs::is_directory(o.out)) throw IoError("cannot create output directory " + o.out.string());
    write_image(o.out / kTargetFile, pair.target);
    write_image(o.out / kSourceFile, pair.source);
    write_pfm(o.out / kDepthFile, pair.gt_depth);
    write_poses(o.out / kPoseFile, {pair.gt_pose});
    write_intrinsics(o.out / kIntrinsicsFile, k);
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kWriteFailed;
  }
  out << "wrote " << o.width << "x" << o.height << " pair to " << o.out.string() << "\n";
  return kOk;
}

struct AlignCliOptions {
  std::uint64_t seed = kDefaultSeed;
  fs::path pair_dir = ".";
  std::optional<fs::path> out;  // defaults to pair_dir
  double perturb_rot_deg = 1.0;
  double perturb_trans = 0.02;  // fraction of |t_gt|
  AlignOptions align{};
};

/// Ground truth moved by `rot_deg` about a seeded random axis and by
/// `trans_frac * |t|` along a seeded random direction.
inline Pose6DoF perturb_pose(const SE3Transform& gt, double rot_deg, double trans_frac, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01(0.0, 1.0);
  auto unit = [&] {
    Vec3 v(n01(rng), n01(rng), n01(rng));
    return Vec3(v / v.norm());
  };
  const Vec3 axis = unit();
  const Vec3 dir = unit();
  const SE3Transform rotated{exp_so3(axis * (rot_deg * std::numbers::pi / 180.0)) * gt.rotation(),
                             gt.translation() + dir * (trans_frac * gt.translation().norm())};
  return Pose6DoF::from_transform(rotated);
}

inline int cmd_align(const AlignCliOptions& o, std::ostream& out, std::ostream& err) {
  try {
    o.align.validate();
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kBadFlags;
  }
  const fs::path dir = o.pair_dir;
  if (auto missing = detail::first_missing({dir / kTargetFile, dir / kSourceFile, dir / kDepthFile,
                                            dir / kPoseFile, dir / kIntrinsicsFile})) {
    err << "error: cannot read " << missing->string() << ": no such file\n";
    return kUnreadableInput;
  }
  if (o.out && !fs::is_directory(*o.out)) {
    err << "error: output directory " << o.out->string() << " does not exist\n";
    return kWriteFailed;
  }

  ImageBuffer target, source;
  DepthMap depth;
  SE3Transform gt;
  CameraIntrinsics k;
  try {
    target = read_image(dir / kTargetFile);
    source = read_image(dir / kSourceFile);
    depth = read_pfm(dir / kDepthFile);
    validate_depth(depth);
    const auto poses = read_poses(dir / kPoseFile);
    if (poses.size() != 1) throw IoError((dir / kPoseFile).string() + ": expected exactly one pose");
    gt = poses.front();
    k = read_intrinsics(dir / kIntrinsicsFile);
    if (!target.same_shape(source) || !depth.same_shape(target.width(), target.height()))
      throw IoError("image and depth dimensions differ in " + dir.string());
  } catch (const ParseError& e) {
    err << "error: line " << e.line() << ": " << e.what() << "\n";
    return kUnreadableInput;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kUnreadableInput;
  }

  const Pose6DoF init = perturb_pose(gt, o.perturb_rot_deg, o.perturb_trans, o.seed);
  AlignReport r;
  try {
    r = align_pose(target, source, depth, k, init, o.align);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kInvalidInput;
  }
  const SE3Transform est = r.pose.to_transform();
  const double rot_err_deg = rotation_error(est, gt) * 180.0 / std::numbers::pi;
  const double gt_norm = gt.translation().norm();
  const double trans_err = (est.translation() - gt.translation()).norm();

  out << "converged: " << (r.converged ? "yes" : "no") << " after " << r.iters << " accepted steps\n";
  out << "rotation (axis-angle, rad): " << detail::join_fixed(r.pose.rot) << "\n";
  out << "translation: " << detail::join_fixed(r.pose.trans) << "\n";
  out << "loss: " << format_fixed(r.loss_history.front()) << " -> " << format_fixed(r.final_loss) << " over "
      << r.loss_history.size() - 1 << " finest-level steps\n";
  out << "rotation error: " << format_fixed(rot_err_deg) << " deg\n";
  if (gt_norm > 0.0)
    out << "translation error: " << format_fixed(100.0 * trans_err / gt_norm) << " %\n";
  else
    out << "translation error: " << format_fixed(trans_err) << "\n";

  const KeyValues kv = {
      {"converged", r.converged ? "true" : "false"},
      {"iters", std::to_string(r.iters)},
      {"initial_loss", format_real(r.loss_history.front())},
      {"final_loss", format_real(r.final_loss)},
      {"rot", detail::join_real(r.pose.rot)},
      {"trans", detail::join_real(r.pose.trans)},
      {"rot_error_deg", format_real(rot_err_deg)},
      {"trans_error", format_real(trans_err)},
      {"trans_error_rel", gt_norm > 0.0 ? format_real(trans_err / gt_norm) : "nan"},
      {"history_length", std::to_string(r.loss_history.size())},
  };
  try {
    write_key_values(o.out.value_or(dir) / kReportFile, kv);
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kWriteFailed;
  }
  return kOk;
}

struct EvalDepthOptions {
  fs::path pred_dir;
  fs::path gt_dir;
  double min_depth = kDefaultMinDepth;
  double max_depth = kDefaultMaxDepth;
  bool median_align = false;
};

inline std::vector<std::string> list_pfm(const fs::path& dir) {
  std::vector<std::string> names;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".pfm") names.push_back(e.path().filename().string());
  std::sort(names.begin(), names.end());
  return names;
}

inline int cmd_eval_depth(const EvalDepthOptions& o, std::ostream& out, std::ostream& err) {
  if (!(o.min_depth > 0.0) || !(o.max_depth > o.min_depth)) {
    err << "error: need 0 < --min-depth < --max-depth\n";
    return kBadFlags;
  }
  for (const auto& d : {o.pred_dir, o.gt_dir})
    if (!fs::is_directory(d)) {
      err << "error: cannot read directory " << d.string() << "\n";
      return kUnreadableInput;
    }
  const auto pred_names = list_pfm(o.pred_dir);
  const auto gt_names = list_pfm(o.gt_dir);
  if (pred_names.size() != gt_names.size() || pred_names.empty()) {
    err << "error: " << pred_names.size() << " prediction files but " << gt_names.size()
        << " ground-truth files\n";
    return kInvalidInput;
  }
  if (pred_names != gt_names) {
    err << "error: prediction and ground-truth file names differ\n";
    return kInvalidInput;
  }

  DepthMetrics sum;
  try {
    for (const auto& name : gt_names) {
      const DepthMap gt = read_pfm(o.gt_dir / name);
      DepthMap pred = read_pfm(o.pred_dir / name);
      if (o.median_align) pred = median_scale_align(pred, gt, o.min_depth, o.max_depth);
      const DepthMetrics m = depth_metrics(pred, gt, o.min_depth, o.max_depth);
      sum.abs_rel += m.abs_rel;
      sum.sq_rel += m.sq_rel;
      sum.rmse += m.rmse;
      sum.rmse_log += m.rmse_log;
      sum.d1 += m.d1;
      sum.d2 += m.d2;
      sum.d3 += m.d3;
    }
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kUnreadableInput;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kInvalidInput;
  }
  const double n = static_cast<double>(gt_names.size());
  out << "abs_rel  sq_rel  rmse  rmse_log  d1  d2  d3\n";
  out << format_fixed(sum.abs_rel / n) << " " << format_fixed(sum.sq_rel / n) << " " << format_fixed(sum.rmse / n)
      << " " << format_fixed(sum.rmse_log / n) << " " << format_fixed(sum.d1 / n) << " "
      << format_fixed(sum.d2 / n) << " " << format_fixed(sum.d3 / n) << "\n";
  return kOk;
}

struct EvalAteOptions {
  fs::path pred_poses;
  fs::path gt_poses;
  std::optional<fs::path> timestamps;       // gt timestamps; also used for pred unless overridden
  std::optional<fs::path> pred_timestamps;
  int snippet_len = 5;
};

inline int cmd_eval_ate(const EvalAteOptions& o, std::ostream& out, std::ostream& err) {
  if (o.snippet_len < 1) {
    err << "error: --snippet-len must be >= 1\n";
    return kBadFlags;
  }
  std::vector<fs::path> inputs{o.pred_poses, o.gt_poses};
  if (o.timestamps) inputs.push_back(*o.timestamps);
  if (o.pred_timestamps) inputs.push_back(*o.pred_timestamps);
  if (auto missing = detail::first_missing(inputs)) {
    err << "error: cannot read " << missing->string() << ": no such file\n";
    return kUnreadableInput;
  }

  fs::path current;
  try {
    auto load_poses = [&](const fs::path& p) {
      current = p;
      return read_poses(p);
    };
    auto load_times = [&](const fs::path& p) {
      current = p;
      return read_timestamps(p);
    };
    const auto pred = load_poses(o.pred_poses);
    const auto gt = load_poses(o.gt_poses);
    current.clear();

    auto stamps = [](std::size_t n) {
      std::vector<double> t(n);
      for (std::size_t i = 0; i < n; ++i) t[i] = static_cast<double>(i);
      return t;
    };
    const std::vector<double> gt_t = o.timestamps ? load_times(*o.timestamps) : stamps(gt.size());
    const std::vector<double> pred_t = o.pred_timestamps ? load_times(*o.pred_timestamps)
                                       : o.timestamps    ? gt_t
                                                         : stamps(pred.size());
    current.clear();
    if (gt_t.size() != gt.size() || pred_t.size() != pred.size()) {
      err << "error: timestamp count does not match pose count\n";
      return kInvalidInput;
    }
    Trajectory tp, tg;
    for (std::size_t i = 0; i < pred.size(); ++i) tp.frames.push_back({pred_t[i], pred[i]});
    for (std::size_t i = 0; i < gt.size(); ++i) tg.frames.push_back({gt_t[i], gt[i]});
    const AteResult r = ate_snippet(tp, tg, static_cast<std::size_t>(o.snippet_len));
    out << "ATE: " << format_fixed(r.mean) << " ± " << format_fixed(r.std) << "\n";
  } catch (const ParseError& e) {
    err << "error: " << current.string() << ": line " << e.line() << ": " << e.what() << "\n";
    return kInvalidInput;
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kUnreadableInput;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kInvalidInput;
  }
  return kOk;
}

}  // namespace egodepth::cli
