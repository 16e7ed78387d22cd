#include <gtest/gtest.h>

#include "egodepth/metrics.hpp"
#include "oracles.hpp"

using namespace egodepth;

namespace {

DepthMap random_depth(oracle::Rng& rng, int w, int h, double lo, double hi) {
  DepthMap d(w, h);
  for (double& v : d.data()) v = rng.uniform(lo, hi);
  return d;
}

DepthMap scaled(const DepthMap& d, double c) {
  DepthMap out = d;
  for (double& v : out.data()) v *= c;
  return out;
}

Trajectory make_trajectory(const std::vector<SE3Transform>& poses, double dt = 0.1, double t0 = 0.0) {
  Trajectory t;
  for (std::size_t i = 0; i < poses.size(); ++i) t.frames.push_back({t0 + dt * static_cast<double>(i), poses[i]});
  return t;
}

std::vector<SE3Transform> random_walk(oracle::Rng& rng, std::size_t n) {
  std::vector<SE3Transform> out{SE3Transform::identity()};
  while (out.size() < n) out.push_back(compose(out.back(), rng.pose(0.1, 0.5)));
  return out;
}

std::vector<Mat4> matrices(const std::vector<SE3Transform>& poses) {
  std::vector<Mat4> out;
  for (const auto& p : poses) out.push_back(p.matrix());
  return out;
}

// Brute-force reference for the metrics, written directly from the definitions.
DepthMetrics reference_metrics(const DepthMap& pred, const DepthMap& gt, double lo, double hi) {
  std::vector<double> p, g;
  for (std::size_t i = 0; i < gt.size(); ++i)
    if (gt[i] >= lo && gt[i] <= hi) {
      p.push_back(pred[i]);
      g.push_back(gt[i]);
    }
  const double n = static_cast<double>(g.size());
  DepthMetrics m;
  double sq = 0, sql = 0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    m.abs_rel += std::abs(p[i] - g[i]) / g[i] / n;
    m.sq_rel += std::pow(p[i] - g[i], 2) / g[i] / n;
    sq += std::pow(p[i] - g[i], 2) / n;
    sql += std::pow(std::log(p[i] / g[i]), 2) / n;
    const double r = std::max(p[i] / g[i], g[i] / p[i]);
    m.d1 += (r < 1.25) / n;
    m.d2 += (r < std::pow(1.25, 2)) / n;
    m.d3 += (r < std::pow(1.25, 3)) / n;
  }
  m.rmse = std::sqrt(sq);
  m.rmse_log = std::sqrt(sql);
  return m;
}

void expect_metrics_near(const DepthMetrics& a, const DepthMetrics& b, double tol) {
  EXPECT_NEAR(a.abs_rel, b.abs_rel, tol);
  EXPECT_NEAR(a.sq_rel, b.sq_rel, tol);
  EXPECT_NEAR(a.rmse, b.rmse, tol);
  EXPECT_NEAR(a.rmse_log, b.rmse_log, tol);
  EXPECT_NEAR(a.d1, b.d1, tol);
  EXPECT_NEAR(a.d2, b.d2, tol);
  EXPECT_NEAR(a.d3, b.d3, tol);
}

}  // namespace

TEST(DepthMetrics, PerfectPrediction) {
  oracle::Rng rng(50);
  const DepthMap gt = random_depth(rng, 10, 8, 1, 70);
  const DepthMetrics m = depth_metrics(gt, gt);
  EXPECT_EQ(m.abs_rel, 0.0);
  EXPECT_EQ(m.sq_rel, 0.0);
  EXPECT_EQ(m.rmse, 0.0);
  EXPECT_EQ(m.rmse_log, 0.0);
  EXPECT_EQ(m.d1, 1.0);
  EXPECT_EQ(m.d2, 1.0);
  EXPECT_EQ(m.d3, 1.0);
}

TEST(DepthMetrics, UniformOverestimate) {
  oracle::Rng rng(51);
  const DepthMap gt = random_depth(rng, 10, 8, 1, 70);
  const DepthMetrics m = depth_metrics(scaled(gt, 1.3), gt);
  // 1.3 * d - d rounds differently per pixel, so the mean lands within a few ulps of 0.3.
  EXPECT_NEAR(m.abs_rel, 0.3, 1e-12);
  EXPECT_EQ(m.d1, 0.0);
  EXPECT_EQ(m.d2, 1.0);
  EXPECT_EQ(m.d3, 1.0);
}

TEST(DepthMetrics, HandExample) {
  const DepthMap gt(2, 1, std::vector<double>{1, 2}), pred(2, 1, std::vector<double>{2, 2});
  const DepthMetrics m = depth_metrics(pred, gt);
  EXPECT_NEAR(m.rmse, std::sqrt(0.5), 1e-15);
  EXPECT_EQ(m.abs_rel, 0.5);
  EXPECT_EQ(m.sq_rel, 0.5);
  EXPECT_EQ(m.d1, 0.5);
}

TEST(DepthMetrics, CapsExcludePixels) {
  const DepthMap gt(3, 1, std::vector<double>{0.0005, 10, 90}), pred(3, 1, std::vector<double>{5, 10, 5});
  const DepthMetrics m = depth_metrics(pred, gt);
  EXPECT_EQ(m.abs_rel, 0.0);
  EXPECT_EQ(m.d1, 1.0);
  EXPECT_THROW(depth_metrics(pred, gt, 20, 30), DegenerateInput);
  EXPECT_THROW(depth_metrics(DepthMap(2, 1, 1.0), gt), InvalidArgument);
}

TEST(DepthMetrics, MatchesBruteForce) {
  oracle::Rng rng(52);
  for (int t = 0; t < 50; ++t) {
    const DepthMap gt = random_depth(rng, 9, 7, 0.5, 100);
    const DepthMap pred = random_depth(rng, 9, 7, 0.5, 100);
    expect_metrics_near(depth_metrics(pred, gt), reference_metrics(pred, gt, 1e-3, 80), 1e-10);
  }
}

TEST(DepthMetrics, ScaleBehaviour) {
  oracle::Rng rng(53);
  const DepthMap gt = random_depth(rng, 12, 9, 1, 20);
  const DepthMap pred = random_depth(rng, 12, 9, 1, 20);
  const DepthMetrics base = depth_metrics(pred, gt, 0, 1e9);
  // Power-of-two factors are exact in floating point, so the identities hold bit for bit.
  for (double c : {0.25, 2.0, 4.0}) {
    const DepthMetrics m = depth_metrics(scaled(pred, c), scaled(gt, c), 0, 1e9);
    EXPECT_EQ(m.abs_rel, base.abs_rel);
    EXPECT_EQ(m.d1, base.d1);
    EXPECT_EQ(m.d2, base.d2);
    EXPECT_EQ(m.d3, base.d3);
    EXPECT_EQ(m.rmse, c * base.rmse);
    EXPECT_EQ(m.sq_rel, c * base.sq_rel);
    EXPECT_NEAR(m.rmse_log, base.rmse_log, 1e-12);
  }
  for (double c : {0.37, 3.1, 11.0}) {
    const DepthMetrics m = depth_metrics(scaled(pred, c), scaled(gt, c), 0, 1e9);
    EXPECT_NEAR(m.abs_rel, base.abs_rel, 1e-12);
    EXPECT_NEAR(m.rmse_log, base.rmse_log, 1e-12);
    EXPECT_NEAR(m.rmse, c * base.rmse, 1e-12 * c);
    EXPECT_NEAR(m.sq_rel, c * base.sq_rel, 1e-12 * c);
    EXPECT_EQ(m.d1, base.d1);
  }
}

TEST(DepthMetrics, ThresholdAccuraciesAreOrdered) {
  oracle::Rng rng(54);
  for (int t = 0; t < 100; ++t) {
    const DepthMetrics m = depth_metrics(random_depth(rng, 5, 5, 1, 10), random_depth(rng, 5, 5, 1, 10));
    EXPECT_LE(m.d1, m.d2);
    EXPECT_LE(m.d2, m.d3);
    EXPECT_LE(m.d3, 1.0);
    EXPECT_GE(m.d1, 0.0);
  }
}

TEST(MedianScaleAlign, RemovesScale) {
  oracle::Rng rng(55);
  const DepthMap gt = random_depth(rng, 7, 5, 1, 50);
  EXPECT_EQ(median_scale_align(scaled(gt, 2.0), gt), gt);
  EXPECT_EQ(median_scale_align(gt, gt), gt);
}

TEST(MedianScaleAlign, UsesOnlyValidPixelsAgainstSortOracle) {
  oracle::Rng rng(56);
  for (int t = 0; t < 20; ++t) {
    DepthMap gt = random_depth(rng, 6, 5 + t % 2, 1, 60);
    for (std::size_t i = 0; i < gt.size(); i += 3) gt[i] = 95.0;
    const DepthMap pred = random_depth(rng, 6, 5 + t % 2, 1, 60);
    std::vector<double> p, g;
    for (std::size_t i = 0; i < gt.size(); ++i)
      if (gt[i] <= 80) {
        p.push_back(pred[i]);
        g.push_back(gt[i]);
      }
    const double scale = oracle::median_by_sort(g) / oracle::median_by_sort(p);
    const DepthMap out = median_scale_align(pred, gt);
    for (std::size_t i = 0; i < pred.size(); ++i) EXPECT_EQ(out[i], pred[i] * scale);
  }
}

TEST(MedianScaleAlign, ZeroMedianRejected) {
  EXPECT_THROW(median_scale_align(DepthMap(3, 1, std::vector<double>{0, 0, 1}), DepthMap(3, 1, 5.0)),
               DegenerateInput);
}

TEST(AteSnippet, IdenticalTrajectories) {
  oracle::Rng rng(57);
  const Trajectory t = make_trajectory(random_walk(rng, 20));
  const AteResult r = ate_snippet(t, t);
  EXPECT_EQ(r.mean, 0.0);
  EXPECT_EQ(r.std, 0.0);
}

TEST(AteSnippet, GlobalScaleIsAbsorbed) {
  oracle::Rng rng(58);
  const auto gt = random_walk(rng, 15);
  for (double c : {2.0, 0.5, 8.0}) {
    std::vector<SE3Transform> pred;
    for (const auto& p : gt) pred.push_back({p.rotation(), c * p.translation()});
    const AteResult r = ate_snippet(make_trajectory(pred), make_trajectory(gt));
    EXPECT_EQ(r.mean, 0.0) << c;
    EXPECT_EQ(r.std, 0.0) << c;
  }
  for (double c : {3.0, 0.3}) {
    std::vector<SE3Transform> pred;
    for (const auto& p : gt) pred.push_back({p.rotation(), c * p.translation()});
    const AteResult r = ate_snippet(make_trajectory(pred), make_trajectory(gt));
    EXPECT_LT(r.mean, 1e-12) << c;
    EXPECT_LT(r.std, 1e-12) << c;
  }
}

TEST(AteSnippet, SingleFrameOffsetMatchesBruteForce) {
  std::vector<SE3Transform> gt;
  for (int i = 0; i < 5; ++i) gt.push_back(SE3Transform::translation(Vec3(0.05 * i, 0.01 * i, 1.0 * i)));
  std::vector<SE3Transform> pred = gt;
  pred[3] = SE3Transform::translation(pred[3].translation() + Vec3(0.1, 0, 0));
  const AteResult r = ate_snippet(make_trajectory(pred), make_trajectory(gt));
  const oracle::MeanStd o = oracle::snippet_ate(matrices(pred), matrices(gt), 5);
  EXPECT_NEAR(r.mean, o.mean, 1e-10);
  EXPECT_NEAR(r.std, o.std, 1e-10);
  EXPECT_GT(r.mean, 0.0);
}

TEST(AteSnippet, RandomTrajectoriesMatchBruteForce) {
  oracle::Rng rng(59);
  for (int t = 0; t < 20; ++t) {
    const auto gt = random_walk(rng, 12);
    std::vector<SE3Transform> pred;
    for (const auto& p : gt) pred.push_back(compose(p, rng.pose(0.05, 0.1)));
    for (std::size_t len : {2u, 3u, 5u}) {
      const AteResult r = ate_snippet(make_trajectory(pred), make_trajectory(gt), len);
      const oracle::MeanStd o = oracle::snippet_ate(matrices(pred), matrices(gt), len);
      EXPECT_NEAR(r.mean, o.mean, 1e-10);
      EXPECT_NEAR(r.std, o.std, 1e-10);
    }
  }
}

TEST(AteSnippet, InvariantToWorldFrame) {
  oracle::Rng rng(60);
  for (int t = 0; t < 20; ++t) {
    const auto gt = random_walk(rng, 10);
    std::vector<SE3Transform> pred;
    for (const auto& p : gt) pred.push_back(compose(p, rng.pose(0.05, 0.1)));
    const SE3Transform wp = rng.pose(), wg = rng.pose();
    std::vector<SE3Transform> pred_w, gt_w;
    for (const auto& p : pred) pred_w.push_back(compose(wp, p));
    for (const auto& g : gt) gt_w.push_back(compose(wg, g));
    const AteResult a = ate_snippet(make_trajectory(pred), make_trajectory(gt));
    const AteResult b = ate_snippet(make_trajectory(pred_w), make_trajectory(gt_w));
    EXPECT_NEAR(a.mean, b.mean, 1e-9);
    EXPECT_NEAR(a.std, b.std, 1e-9);
  }
}

TEST(AteSnippet, TimestampAssociation) {
  oracle::Rng rng(61);
  const auto gt = random_walk(rng, 12);
  // Prediction covers frames 2..9 with a small clock jitter.
  std::vector<SE3Transform> sub(gt.begin() + 2, gt.begin() + 10);
  Trajectory pred;
  for (std::size_t i = 0; i < sub.size(); ++i) pred.frames.push_back({0.1 * (i + 2) + 0.01, sub[i]});
  const AteResult r = ate_snippet(pred, make_trajectory(gt));
  EXPECT_LT(r.mean, 1e-12);

  const auto assoc = associate(pred, make_trajectory(gt));
  ASSERT_EQ(assoc.size(), 8u);
  EXPECT_EQ(assoc.front().gt, 2u);
  EXPECT_EQ(assoc.back().gt, 9u);
}

TEST(AteSnippet, Errors) {
  oracle::Rng rng(62);
  const auto gt = random_walk(rng, 6);
  Trajectory far;
  for (std::size_t i = 0; i < gt.size(); ++i) far.frames.push_back({0.1 * i + 0.07, gt[i]});
  EXPECT_THROW(ate_snippet(far, make_trajectory(gt)), AssociationError);

  std::vector<SE3Transform> still(6, SE3Transform::identity());
  EXPECT_THROW(ate_snippet(make_trajectory(still), make_trajectory(gt)), DegenerateSnippet);

  EXPECT_THROW(ate_snippet(make_trajectory(gt), make_trajectory(gt), 7), InvalidArgument);

  Trajectory unordered = make_trajectory(gt);
  std::swap(unordered.frames[1].timestamp, unordered.frames[2].timestamp);
  EXPECT_THROW(ate_snippet(unordered, make_trajectory(gt)), InvalidArgument);
}
