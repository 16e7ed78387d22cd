#include <gtest/gtest.h>

#include "egodepth/synthetic.hpp"
#include "egodepth/warping.hpp"
#include "oracles.hpp"

using namespace egodepth;

namespace {

ImageBuffer random_image(oracle::Rng& rng, int w, int h, int c) {
  ImageBuffer img(w, h, c);
  for (double& v : img.data()) v = rng.uniform(0, 1);
  return img;
}

// Reference bilinear sample using the textbook four-weight form.
double reference_sample(const ImageBuffer& img, double u, double v, int c) {
  const int x0 = static_cast<int>(std::floor(u)), y0 = static_cast<int>(std::floor(v));
  const double ax = u - x0, ay = v - y0;
  auto at = [&](int x, int y) {
    return img(std::min(x, img.width() - 1), std::min(y, img.height() - 1), c);
  };
  return (1 - ax) * (1 - ay) * at(x0, y0) + ax * (1 - ay) * at(x0 + 1, y0) + (1 - ax) * ay * at(x0, y0 + 1) +
         ax * ay * at(x0 + 1, y0 + 1);
}

double dist_to_grid(double s) { return std::abs(s - std::round(s)); }

}  // namespace

TEST(BilinearSample, IntegerCoordinatesAreExact) {
  oracle::Rng rng(20);
  const ImageBuffer img = random_image(rng, 5, 4, 3);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 5; ++x) {
      const Sample s = bilinear_sample(img, {double(x), double(y)});
      ASSERT_TRUE(s.valid);
      for (int c = 0; c < 3; ++c) EXPECT_EQ(s.value(c), img(x, y, c));
    }
}

TEST(BilinearSample, CenterOfTwoByTwo) {
  const ImageBuffer img(2, 2, 1, std::vector<double>{0, 1, 2, 3});
  const Sample s = bilinear_sample(img, {0.5, 0.5});
  EXPECT_TRUE(s.valid);
  EXPECT_EQ(s.value(0), 1.5);
}

TEST(BilinearSample, OutOfBoundsIsZeroAndInvalid) {
  const ImageBuffer img(3, 3, 3, 0.7);
  for (const Pixel p : {Pixel{-0.5, 1}, Pixel{1, -0.01}, Pixel{2.1, 1}, Pixel{1, 3}, Pixel{NAN, 1}}) {
    const Sample s = bilinear_sample(img, p);
    EXPECT_FALSE(s.valid);
    EXPECT_EQ(s.value, ChannelVec::Zero(3));
  }
}

TEST(BilinearSample, BorderRoundingIsAbsorbed) {
  const ImageBuffer img(3, 3, 1, 0.25);
  EXPECT_TRUE(bilinear_sample(img, {-5e-7, 2 + 5e-7}).valid);
  EXPECT_FALSE(bilinear_sample(img, {-2e-6, 1}).valid);
}

TEST(BilinearSample, WeightsAreConvexAndMatchReference) {
  oracle::Rng rng(21);
  const ImageBuffer img = random_image(rng, 7, 6, 3);
  for (int i = 0; i < 1000; ++i) {
    const Pixel p{rng.uniform(0, 6), rng.uniform(0, 5)};
    const BilinearCell cell = locate_cell(7, 6, p);
    ASSERT_TRUE(cell.valid);
    double sum = 0.0;
    for (double w : cell.weights()) {
      EXPECT_GE(w, 0.0);
      sum += w;
    }
    EXPECT_NEAR(sum, 1.0, 1e-12);
    const Sample s = bilinear_sample(img, p);
    for (int c = 0; c < 3; ++c) EXPECT_NEAR(s.value(c), reference_sample(img, p.u, p.v, c), 1e-12);
  }
}

TEST(BilinearSampleGrad, ConstantImageHasZeroGradient) {
  const ImageBuffer img(4, 4, 3, 0.6);
  EXPECT_EQ(bilinear_sample_grad(img, {1.3, 2.7}), SampleGrad::Zero(2, 3));
}

TEST(BilinearSampleGrad, LinearRamp) {
  const ImageBuffer img(2, 1, 1, std::vector<double>{0, 1});
  const SampleGrad g = bilinear_sample_grad(img, {0.5, 0});
  EXPECT_EQ(g(0, 0), 1.0);
  EXPECT_EQ(g(1, 0), 0.0);
}

TEST(BilinearSampleGrad, GridLineUsesRightLowerCell) {
  const ImageBuffer img(3, 1, 1, std::vector<double>{0, 1, 3});
  EXPECT_EQ(bilinear_sample_grad(img, {1.0, 0})(0, 0), 2.0);
  EXPECT_EQ(bilinear_sample_grad(img, {2.0, 0})(0, 0), 2.0);
}

TEST(BilinearSampleGrad, MatchesFiniteDifferences) {
  oracle::Rng rng(22);
  const ImageBuffer img = random_image(rng, 9, 9, 3);
  int checked = 0;
  while (checked < 200) {
    const Pixel p{rng.uniform(0.01, 7.99), rng.uniform(0.01, 7.99)};
    if (dist_to_grid(p.u) < 1e-3 || dist_to_grid(p.v) < 1e-3) continue;
    const SampleGrad a = bilinear_sample_grad(img, p);
    for (int c = 0; c < 3; ++c) {
      Eigen::VectorXd an(2), nu(2);
      an << a(0, c), a(1, c);
      nu << oracle::derivative([&](double u) { return bilinear_sample(img, {u, p.v}).value(c); }, p.u, 1e-6),
          oracle::derivative([&](double v) { return bilinear_sample(img, {p.u, v}).value(c); }, p.v, 1e-6);
      EXPECT_LT(oracle::rel_error(an, nu), 1e-5);
    }
    ++checked;
  }
}

TEST(InverseWarp, IdentityPoseReproducesSource) {
  oracle::Rng rng(23);
  const ImageBuffer src = random_image(rng, 16, 12, 3);
  DepthMap depth(16, 12);
  for (double& d : depth.data()) d = rng.uniform(0.5, 50);
  const WarpResult r = inverse_warp(src, depth, SE3Transform::identity(), {14, 13, 7.5, 5.5});
  EXPECT_EQ(count_valid(r.valid), 16 * 12);
  for (std::size_t i = 0; i < src.data().size(); ++i) EXPECT_NEAR(r.recon.data()[i], src.data()[i], 1e-12);
}

TEST(InverseWarp, DimensionMismatchRejected) {
  EXPECT_THROW(inverse_warp(ImageBuffer(4, 4, 1), DepthMap(4, 3, 1.0), SE3Transform::identity(), {1, 1, 0, 0}),
               InvalidArgument);
  EXPECT_THROW(inverse_warp(ImageBuffer(4, 4, 1), DepthMap(4, 4, 0.0), SE3Transform::identity(), {1, 1, 0, 0}),
               InvalidArgument);
}

TEST(InverseWarp, SyntheticPairReconstructsTarget) {
  for (SceneKind kind : {SceneKind::fronto_plane, SceneKind::slanted_plane, SceneKind::two_planes}) {
    const SceneSpec scene = make_scene(kind);
    const CameraIntrinsics k = default_intrinsics(128, 128);
    const RenderedPair pair = render_pair(scene, SE3Transform::translation(Vec3(0.1, 0, 0)), k, 128, 128);
    const WarpResult r = inverse_warp(pair.source, pair.gt_depth, pair.gt_pose, k);
    EXPECT_GT(psnr(pair.target, r.recon, r.valid), 40.0) << static_cast<int>(kind);
  }
}

TEST(InverseWarp, LargeForwardTranslationInvalidatesBorder) {
  const SceneSpec scene = make_scene(SceneKind::fronto_plane);
  const CameraIntrinsics k = default_intrinsics(32, 32);
  const RenderedPair pair = render_pair(scene, SE3Transform::identity(), k, 32, 32);
  const WarpResult r = inverse_warp(pair.source, pair.gt_depth, SE3Transform::translation(Vec3(0, 0, -2.5)), k);
  for (int i = 0; i < 32; ++i) {
    EXPECT_EQ(r.valid(i, 0), 0);
    EXPECT_EQ(r.valid(0, i), 0);
    EXPECT_EQ(r.valid(i, 31), 0);
    EXPECT_EQ(r.valid(31, i), 0);
  }
  EXPECT_EQ(r.valid(16, 16), 1);
  EXPECT_EQ(r.recon(0, 0), 0.0);
}

TEST(InverseWarp, BehindCameraIsInvalid) {
  const DepthMap depth(4, 4, 1.0);
  const WarpResult r = inverse_warp(ImageBuffer(4, 4, 1, 0.5), depth, SE3Transform::translation(Vec3(0, 0, -3)),
                                    {2, 2, 1.5, 1.5});
  EXPECT_EQ(count_valid(r.valid), 0);
}

TEST(InverseWarp, LipschitzInPose) {
  const SceneSpec scene = make_scene(SceneKind::slanted_plane);
  const CameraIntrinsics k = default_intrinsics(64, 64);
  const RenderedPair pair = render_pair(scene, SE3Transform::translation(Vec3(0.1, 0, 0)), k, 64, 64);
  const WarpResult base = inverse_warp(pair.source, pair.gt_depth, pair.gt_pose, k);
  oracle::Rng rng(24);
  double c_max = 0.0;
  for (double scale : {1e-3, 1e-4, 1e-5}) {
    Vec6 d;
    d << rng.vec3(1.0), rng.vec3(1.0);
    d *= scale / d.norm();
    const WarpResult moved = inverse_warp(pair.source, pair.gt_depth, apply_increment(pair.gt_pose, d), k);
    double diff = 0.0;
    for (int y = 0; y < 64; ++y)
      for (int x = 0; x < 64; ++x)
        if (base.valid(x, y) && moved.valid(x, y)) diff = std::max(diff, std::abs(base.recon(x, y) - moved.recon(x, y)));
    c_max = std::max(c_max, diff / scale);
  }
  // Image gradients are bounded by one intensity unit per pixel and the
  // reprojection Jacobian by roughly f * (1 + depth), so C stays far below this.
  EXPECT_LT(c_max, 1e3);
}

TEST(WarpJacobians, IdentityPoseHasZeroDepthDerivative) {
  oracle::Rng rng(25);
  const ImageBuffer src = random_image(rng, 8, 8, 3);
  const WarpJacobians j = warp_jacobians(src, DepthMap(8, 8, 2.0), SE3Transform::identity(), {8, 8, 3.5, 3.5});
  for (double v : j.d_depth) EXPECT_EQ(v, 0.0);
}

TEST(WarpJacobians, InvalidPixelsHaveZeroRows) {
  oracle::Rng rng(26);
  const ImageBuffer src = random_image(rng, 8, 8, 1);
  const CameraIntrinsics k{8, 8, 3.5, 3.5};
  const SE3Transform pose = SE3Transform::translation(Vec3(1.0, 0, 0));
  const WarpResult r = warp(src, DepthMap(8, 8, 3.0), pose, k, true);
  ASSERT_GT(count_valid(r.valid), 0);
  ASSERT_LT(count_valid(r.valid), 64);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) {
      if (r.valid(x, y)) continue;
      EXPECT_EQ(r.jacobians->depth(x, y, 0), 0.0);
      EXPECT_EQ(r.jacobians->pose(x, y, 0), Vec6::Zero());
    }
}

TEST(WarpJacobians, MatchesFiniteDifferences) {
  oracle::Rng rng(27);
  const CameraIntrinsics k{8, 8, 3.5, 3.5};
  int pixels_checked = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const ImageBuffer src = random_image(rng, 8, 8, 3);
    DepthMap depth(8, 8);
    for (double& d : depth.data()) d = rng.uniform(2, 6);
    Vec6 xi;
    xi << rng.vec3(0.05), rng.vec3(0.2);
    const SE3Transform pose = apply_increment(SE3Transform::identity(), xi);
    const WarpResult r = warp(src, depth, pose, k, true);
    const double h = 1e-5;
    for (int y = 0; y < 8; ++y)
      for (int x = 0; x < 8; ++x) {
        if (!r.valid(x, y)) continue;
        const Pixel ps = reproject({double(x), double(y)}, depth(x, y), pose, k);
        if (dist_to_grid(ps.u) < 1e-3 || dist_to_grid(ps.v) < 1e-3) continue;
        if (ps.u < 1e-3 || ps.v < 1e-3 || ps.u > 7 - 1e-3 || ps.v > 7 - 1e-3) continue;
        for (int c = 0; c < 3; ++c) {
          Eigen::VectorXd a(7), n(7);
          a << r.jacobians->depth(x, y, c), r.jacobians->pose(x, y, c);
          auto pixel_at = [&](const DepthMap& d, const SE3Transform& t) {
            return bilinear_sample(src, reproject({double(x), double(y)}, d(x, y), t, k)).value(c);
          };
          DepthMap dp = depth, dm = depth;
          dp(x, y) += h;
          dm(x, y) -= h;
          n(0) = (pixel_at(dp, pose) - pixel_at(dm, pose)) / (2 * h);
          for (int j = 0; j < 6; ++j) {
            Vec6 e = Vec6::Zero();
            e(j) = h;
            n(1 + j) = (pixel_at(depth, apply_increment(pose, e)) - pixel_at(depth, apply_increment(pose, -e))) / (2 * h);
          }
          EXPECT_LT(oracle::rel_error(a, n), 1e-4);
        }
        ++pixels_checked;
      }
  }
  EXPECT_GT(pixels_checked, 200);
}

TEST(Psnr, Basics) {
  const ImageBuffer a(2, 1, 1, std::vector<double>{0.5, 0.5});
  const ImageBuffer b(2, 1, 1, std::vector<double>{0.6, 0.5});
  ValidityMask all(2, 1, 1);
  EXPECT_NEAR(psnr(a, b, all), 10 * std::log10(2 / 0.01), 1e-9);
  EXPECT_TRUE(std::isinf(psnr(a, a, all)));
  EXPECT_THROW(psnr(a, b, ValidityMask(2, 1, 0)), DegenerateInput);
}

TEST(Disparity, ConvertsToDepth) {
  const DisparityMap disp(3, 1, std::vector<double>{0.5, 0.0, -1.0});
  const DepthMap d = disparity_to_depth(disp);
  EXPECT_EQ(d(0, 0), 2.0);
  EXPECT_EQ(d(1, 0), 1e6);
  EXPECT_EQ(d(2, 0), 1e6);
}

TEST(Pyramid, AreaAverage) {
  const ImageBuffer img(2, 2, 1, std::vector<double>{0, 1, 2, 3});
  const auto levels = build_pyramid(img, 2);
  ASSERT_EQ(levels.size(), 2u);
  EXPECT_EQ(levels[1].width(), 1);
  EXPECT_EQ(levels[1](0, 0), 1.5);
  EXPECT_THROW(build_pyramid(img, 3), InvalidArgument);
}
