#include <doctest.h>

#include <cmath>

#include "sp3d/rendering.hpp"
#include "sp3d/rng.hpp"
#include "sp3d/scene_synth.hpp"

using namespace sp3d;

TEST_CASE("gaussian heatmap centered at an integer pixel") {
  const Tensor hm = render_gaussian_heatmap({{Vec2(10, 12), 1.0}}, 32, 32, 3.0);
  CHECK(hm.at(12, 10) == doctest::Approx(1.0));
  CHECK(hm.argmax() == 12 * 32 + 10);
  // Symmetric about the peak.
  for (int d = 1; d <= 5; ++d) {
    CHECK(hm.at(12, 10 - d) == doctest::Approx(hm.at(12, 10 + d)));
    CHECK(hm.at(12 - d, 10) == doctest::Approx(hm.at(12 + d, 10)));
  }
}

TEST_CASE("gaussian heatmap edge cases") {
  CHECK(render_gaussian_heatmap({}, 16, 16, 2.0).max() == 0.0);
  CHECK_THROWS_AS(render_gaussian_heatmap({{Vec2(1, 1), 1.0}}, 16, 16, 0.0), InvalidSigma);
  CHECK_THROWS_AS(render_gaussian_heatmap({{Vec2(1, 1), 1.0}}, 16, 16, -1.0), InvalidSigma);
  // Off-canvas joint still contributes its in-canvas tail.
  const Tensor tail = render_gaussian_heatmap({{Vec2(-2.0, 8.0), 1.0}}, 16, 16, 3.0);
  CHECK(tail.at(8, 0) > 0.5 * std::exp(-4.0 / 18.0) - 0.2);
  CHECK(tail.at(8, 0) > 0.0);
}

TEST_CASE("gaussian mass approximates 2*pi*sigma^2 within 1%") {
  const Tensor hm = render_gaussian_heatmap({{Vec2(10.5, 12.0), 1.0}}, 64, 64, 3.0);
  const double target = 2.0 * M_PI * 3.0 * 3.0;
  CHECK(std::abs(hm.sum() - target) / target < 0.01);
}

TEST_CASE("pose heatmaps: one person, all joints visible") {
  const int views = 2, persons = 1, joints = 4;
  Pose2DSet p;
  p.joints = Tensor({views, persons, joints, 2});
  p.confidence = Tensor({views, persons, joints}, 1.0);
  p.visibility = Tensor({views, persons, joints}, 1.0);
  Rng rng(3);
  for (int c = 0; c < views; ++c)
    for (int j = 0; j < joints; ++j) {
      p.joints.at(c, 0, j, 0) = 4.0 * static_cast<double>(rng.uniform_int(6, 25));
      p.joints.at(c, 0, j, 1) = 4.0 * static_cast<double>(rng.uniform_int(6, 25));
    }
  const Tensor hm = render_pose_heatmaps(p, 32, 32, 2.5);
  CHECK(hm.shape() == std::vector<int64_t>{views, joints, 32, 32});
  for (int c = 0; c < views; ++c)
    for (int j = 0; j < joints; ++j) {
      // Exactly one peak per channel at joints / 4.
      int64_t best = 0;
      double bv = -1;
      for (int64_t i = 0; i < 32 * 32; ++i) {
        const double v = hm.at(c, j, i / 32, i % 32);
        if (v > bv) {
          bv = v;
          best = i;
        }
      }
      CHECK(best % 32 == static_cast<int64_t>(p.joints.at(c, 0, j, 0) / 4.0));
      CHECK(best / 32 == static_cast<int64_t>(p.joints.at(c, 0, j, 1) / 4.0));
      CHECK(bv == doctest::Approx(1.0));
    }
}

TEST_CASE("pose heatmaps: coinciding persons stay bounded by max combination") {
  Pose2DSet p;
  p.joints = Tensor({1, 2, 1, 2});
  p.confidence = Tensor({1, 2, 1}, 1.0);
  p.visibility = Tensor({1, 2, 1}, 1.0);
  for (int q = 0; q < 2; ++q) {
    p.joints.at(0, q, 0, 0) = 40.0;
    p.joints.at(0, q, 0, 1) = 48.0;
  }
  const Tensor hm = render_pose_heatmaps(p, 32, 32, 3.0);
  CHECK(hm.max() <= 1.0 + 1e-12);
  CHECK(hm.max() == doctest::Approx(1.0));
}

TEST_CASE("pose heatmaps skip invisible joints and weight by confidence") {
  Pose2DSet p;
  p.joints = Tensor({1, 1, 2, 2});
  p.confidence = Tensor({1, 1, 2});
  p.visibility = Tensor({1, 1, 2});
  p.joints.at(0, 0, 0, 0) = 40.0;
  p.joints.at(0, 0, 0, 1) = 40.0;
  p.confidence.at(0, 0, 0) = 0.6;
  p.visibility.at(0, 0, 0) = 1.0;
  p.joints.at(0, 0, 1, 0) = 80.0;
  p.joints.at(0, 0, 1, 1) = 80.0;
  p.confidence.at(0, 0, 1) = 0.9;
  p.visibility.at(0, 0, 1) = 0.0;  // skipped
  const Tensor hm = render_pose_heatmaps(p, 32, 32, 2.0);
  CHECK(hm.at(0, 0, 10, 10) == doctest::Approx(0.6));
  for (int64_t i = 0; i < 32 * 32; ++i) CHECK(hm.at(0, 1, i / 32, i % 32) == 0.0);
}

TEST_CASE("rendered projections unproject back to the skeleton voxels") {
  auto cams = make_camera_rig(4, default_workspace(), 4500.0, {2300.0, 2900.0}, 128, 128,
                              17);
  const SkeletonSpec skel = SkeletonSpec::panoptic15();
  const Pose3DSet gt = sample_poses(skel, 1, default_person_region(), 23);
  const Pose2DSet exact = simulate_pseudo_2d(gt, cams, PseudoNoiseModel::clean(), 1);
  const Tensor hm = render_pose_heatmaps(exact, 32, 32, 2.0);
  VoxelGridSpec fine = default_fine_grid_template();
  fine.center = gt.joint(0, skel.root());
  const FeatureVolume f =
      unproject_heatmaps(hm, cams, fine, AffineAugmentation::identity(Vec2(64, 64)));
  for (int j = 0; j < skel.joint_count(); ++j) {
    Tensor vol({fine.resolution[0], fine.resolution[1], fine.resolution[2]});
    std::copy_n(f.data.data() + j * fine.num_voxels(), fine.num_voxels(), vol.data());
    const auto idx = fine.unflatten(vol.argmax());
    const Vec3 peak = fine.voxel_center(idx[0], idx[1], idx[2]);
    // Peak voxel within one voxel pitch of the true joint.
    const Vec3 err = (peak - gt.joint(0, j)).cwiseAbs();
    CHECK(err.x() <= fine.pitch(0) + 1e-9);
    CHECK(err.y() <= fine.pitch(1) + 1e-9);
    CHECK(err.z() <= fine.pitch(2) + 1e-9);
  }
}

TEST_CASE("soft-argmax examples") {
  VoxelGridSpec g;
  g.center = Vec3(0, 0, 0);
  g.extent = Vec3(700, 700, 300);
  g.resolution = {8, 8, 4};

  Tensor onehot({8, 8, 4});
  onehot.at(2, 5, 1) = 1.0;
  const Vec3 hot = soft_argmax_3d(onehot, g, 200.0);
  const Vec3 center = g.voxel_center(2, 5, 1);
  CHECK((hot - center).norm() < 0.5 * g.pitch(0));

  Tensor uniform({8, 8, 4}, 0.25);
  CHECK((soft_argmax_3d(uniform, g, 7.0) - g.center).norm() < 1e-9);

  Tensor two({8, 8, 4});
  two.at(1, 1, 1) = 1.0;
  two.at(6, 6, 2) = 1.0;
  const Vec3 mid = soft_argmax_3d(two, g, 35.0);
  const Vec3 expect = 0.5 * (g.voxel_center(1, 1, 1) + g.voxel_center(6, 6, 2));
  CHECK((mid - expect).norm() < 1e-6);

  CHECK_THROWS_AS(soft_argmax_3d(uniform, g, 0.0), InvalidBeta);
  CHECK_THROWS_AS(soft_argmax_3d(uniform, g, -3.0), InvalidBeta);
}

TEST_CASE("decode_volume_poses per-joint independence") {
  VoxelGridSpec g;
  g.center = Vec3(0, 0, 0);
  g.extent = Vec3(700, 700, 300);
  g.resolution = {8, 8, 4};
  Tensor vols({3, 8, 8, 4});
  for (int j = 0; j < 3; ++j) vols.at(j, 4, 2, 3) = 1.0;
  const Tensor out = decode_volume_poses(vols, g, 150.0);
  CHECK(out.shape() == std::vector<int64_t>{3, 3});
  for (int j = 1; j < 3; ++j)
    for (int a = 0; a < 3; ++a) CHECK(out.at(j, a) == doctest::Approx(out.at(0, a)));

  // Permuting channels permutes rows identically.
  Tensor perm({3, 8, 8, 4});
  Rng rng(5);
  for (int j = 0; j < 3; ++j)
    for (int64_t i = 0; i < 8 * 8 * 4; ++i)
      perm.at(j, i / 32, (i / 4) % 8, i % 4) = rng.uniform(0.0, 1.0);
  const Tensor a = decode_volume_poses(perm, g, 40.0);
  Tensor swapped({3, 8, 8, 4});
  const int map[3] = {2, 0, 1};
  for (int j = 0; j < 3; ++j)
    std::copy_n(perm.data() + map[j] * 256, 256, swapped.data() + j * 256);
  const Tensor b = decode_volume_poses(swapped, g, 40.0);
  for (int j = 0; j < 3; ++j)
    for (int axis = 0; axis < 3; ++axis)
      CHECK(b.at(j, axis) == doctest::Approx(a.at(map[j], axis)));
}
