#include <array>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "egodepth/commands.hpp"

namespace {

using namespace egodepth;
namespace cl = egodepth::cli;

// "WxH" -> width, height.
std::string parse_size(const std::string& s, int& w, int& h) {
  const auto x = s.find('x');
  try {
    std::size_t used = 0;
    if (x == std::string::npos) return "expected WxH";
    w = std::stoi(s.substr(0, x), &used);
    if (used != x) return "expected WxH";
    h = std::stoi(s.substr(x + 1), &used);
    if (used != s.size() - x - 1) return "expected WxH";
  } catch (const std::exception&) {
    return "expected WxH";
  }
  return {};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Geometry, warping, losses and evaluation tools for self-supervised depth and ego-motion"};
  app.require_subcommand(1);

  cl::GradcheckOptions gc;
  std::string gc_component;
  auto* gradcheck = app.add_subcommand("gradcheck", "Compare analytic gradients with central finite differences");
  gradcheck->add_option("--seed", gc.seed, "Random seed")->capture_default_str();
  gradcheck->add_option("--trials", gc.trials, "Random configurations per component")->capture_default_str();
  gradcheck->add_option("--component", gc_component, "reproject, warp, losses or attention")
      ->check(CLI::IsMember({"reproject", "warp", "losses", "attention"}));

  cl::SynthOptions sy;
  std::string sy_scene = "fronto_plane", sy_size = "128x128";
  std::vector<double> sy_baseline;
  auto* synth = app.add_subcommand("synth", "Render a synthetic image pair with ground truth");
  synth->add_option("--seed", sy.seed, "Texture seed")->capture_default_str();
  synth->add_option("--out", sy.out, "Output directory")->capture_default_str();
  synth->add_option("--scene", sy_scene, "fronto_plane, slanted_plane or two_planes")
      ->check(CLI::IsMember({"fronto_plane", "slanted_plane", "two_planes"}))
      ->capture_default_str();
  synth->add_option("--size", sy_size, "Image size WxH")->capture_default_str();
  synth->add_option("--baseline", sy_baseline, "Target-to-source motion tx,ty,tz,rx,ry,rz (rotation in radians)")
      ->delimiter(',')
      ->expected(6);

  cl::AlignCliOptions al;
  std::string al_mode = "pose_only";
  std::string al_out;
  auto* align = app.add_subcommand("align", "Recover the relative pose of a synthetic pair");
  align->add_option("--seed", al.seed, "Seed of the perturbation directions")->capture_default_str();
  align->add_option("--pair", al.pair_dir, "Directory written by synth")->required();
  align->add_option("--out", al_out, "Directory for report.txt (default: the pair directory)");
  align->add_option("--perturb-rot", al.perturb_rot_deg, "Initial rotation perturbation in degrees")
      ->capture_default_str();
  align->add_option("--perturb-trans", al.perturb_trans, "Initial translation perturbation as a fraction of |t|")
      ->capture_default_str();
  align->add_option("--max-iters", al.align.max_iters, "Iterations per pyramid level")->capture_default_str();
  align->add_option("--levels", al.align.pyramid_levels, "Pyramid levels")->capture_default_str();
  align->add_option("--step", al.align.step, "Initial step length")->capture_default_str();
  align->add_option("--tol-grad", al.align.tol_grad, "Gradient-norm stop")->capture_default_str();
  align->add_option("--tol-step", al.align.tol_step, "Step-length stop")->capture_default_str();
  align->add_option("--mode", al_mode, "pose_only or pose_and_depth")
      ->check(CLI::IsMember({"pose_only", "pose_and_depth"}))
      ->capture_default_str();

  cl::EvalDepthOptions ed;
  auto* eval_depth = app.add_subcommand("eval-depth", "Depth metrics of predicted PFM files against ground truth");
  eval_depth->add_option("--pred", ed.pred_dir, "Directory of predicted depth .pfm files")->required();
  eval_depth->add_option("--gt", ed.gt_dir, "Directory of ground-truth depth .pfm files")->required();
  eval_depth->add_option("--min-depth", ed.min_depth, "Lower depth cap")->capture_default_str();
  eval_depth->add_option("--max-depth", ed.max_depth, "Upper depth cap")->capture_default_str();
  eval_depth->add_flag("--median-align", ed.median_align, "Scale predictions by the median ratio first");

  cl::EvalAteOptions ea;
  std::string ea_ts, ea_pred_ts;
  auto* eval_ate = app.add_subcommand("eval-ate", "Snippet absolute trajectory error of KITTI pose files");
  eval_ate->add_option("--pred", ea.pred_poses, "Predicted poses")->required();
  eval_ate->add_option("--gt", ea.gt_poses, "Ground-truth poses")->required();
  eval_ate->add_option("--timestamps", ea_ts, "Timestamps of the ground truth (and of the prediction)");
  eval_ate->add_option("--pred-timestamps", ea_pred_ts, "Timestamps of the prediction, if different");
  eval_ate->add_option("--snippet-len", ea.snippet_len, "Frames per snippet")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return cl::kBadFlags;
  }

  try {
    if (*gradcheck) {
      if (!gc_component.empty()) gc.component = parse_grad_component(gc_component);
      return cl::cmd_gradcheck(gc, std::cout, std::cerr);
    }
    if (*synth) {
      sy.scene = *parse_scene_kind(sy_scene);
      if (auto msg = parse_size(sy_size, sy.width, sy.height); !msg.empty()) {
        std::cerr << "error: --size: " << msg << "\n";
        return cl::kBadFlags;
      }
      if (!sy_baseline.empty()) std::copy(sy_baseline.begin(), sy_baseline.end(), sy.baseline.begin());
      return cl::cmd_synth(sy, std::cout, std::cerr);
    }
    if (*align) {
      al.align.mode = *parse_align_mode(al_mode);
      if (!al_out.empty()) al.out = al_out;
      return cl::cmd_align(al, std::cout, std::cerr);
    }
    if (*eval_depth) return cl::cmd_eval_depth(ed, std::cout, std::cerr);
    if (*eval_ate) {
      if (!ea_ts.empty()) ea.timestamps = ea_ts;
      if (!ea_pred_ts.empty()) ea.pred_timestamps = ea_pred_ts;
      return cl::cmd_eval_ate(ea, std::cout, std::cerr);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return cl::kCheckFailed;
  }
  return cl::kBadFlags;
}
