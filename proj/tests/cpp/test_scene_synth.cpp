#include <doctest.h>

#include <cmath>

#include "sp3d/rendering.hpp"
#include "sp3d/scene_synth.hpp"

using namespace sp3d;

TEST_CASE("camera rig invariants") {
  const Aabb ws = default_workspace();
  auto cams = make_camera_rig(2, ws, 4500.0, {2300.0, 2900.0}, 128, 128, 1);
  CHECK(cams.size() == 2);
  for (const auto& cam : cams) CHECK_NOTHROW(cam.validate());

  // Workspace center projects within the central 20% of every image.
  auto rig = make_camera_rig(5, ws, 4500.0, {2300.0, 2900.0}, 128, 128, 9);
  for (const auto& cam : rig) {
    const Vec2 uv = project_point(cam, ws.center());
    CHECK(std::abs(uv.x() - 64.0) < 0.2 * 128 / 2);
    CHECK(std::abs(uv.y() - 64.0) < 0.2 * 128 / 2);
  }

  // Determinism: same seed gives bit-identical rigs.
  auto a = make_camera_rig(4, ws, 4500.0, {2300.0, 2900.0}, 128, 128, 33);
  auto b = make_camera_rig(4, ws, 4500.0, {2300.0, 2900.0}, 128, 128, 33);
  for (size_t i = 0; i < a.size(); ++i) {
    CHECK((a[i].K - b[i].K).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a[i].R - b[i].R).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a[i].t - b[i].t).cwiseAbs().maxCoeff() == 0.0);
  }
  CHECK_THROWS_AS(make_camera_rig(1, ws, 4500.0, {2300.0, 2900.0}, 128, 128, 1),
                  InvalidConfig);
}

TEST_CASE("sampled poses respect bone ranges and separation") {
  const SkeletonSpec skel = SkeletonSpec::panoptic15();
  const Aabb region = default_person_region();

  const Pose3DSet one = sample_poses(skel, 1, region, 7);
  for (int j = 0; j < skel.joint_count(); ++j) {
    const int par = skel.parent[static_cast<size_t>(j)];
    if (par < 0) continue;
    const double len = (one.joint(0, j) - one.joint(0, par)).norm();
    const auto& [lo, hi] = skel.bone_length_range[static_cast<size_t>(j)];
    CHECK(len >= lo - 1e-9);
    CHECK(len <= hi + 1e-9);
  }

  const Pose3DSet three = sample_poses(skel, 3, region, 8);
  for (int a = 0; a < 3; ++a)
    for (int b = a + 1; b < 3; ++b)
      CHECK((three.joint(a, skel.root()) - three.joint(b, skel.root())).norm() >=
            kMinPersonSeparationMm - 1e-9);

  // Coverage: 1000 single-person samples hit every octant of the region.
  int octant_counts[8] = {0};
  const Vec3 mid = region.center();
  for (int s = 0; s < 1000; ++s) {
    const Pose3DSet p = sample_poses(skel, 1, region, 1000 + static_cast<uint64_t>(s));
    const Vec3 r = p.joint(0, skel.root());
    const int oct = (r.x() > mid.x() ? 1 : 0) | (r.y() > mid.y() ? 2 : 0) |
                    (r.z() > mid.z() ? 4 : 0);
    ++octant_counts[oct];
  }
  for (int o = 0; o < 8; ++o) CHECK(octant_counts[o] >= 50);

  // Over-crowded workspace fails after bounded rejections.
  Aabb tiny;
  tiny.lo = Vec3(0, 0, 900);
  tiny.hi = Vec3(100, 100, 950);
  CHECK_THROWS_AS(sample_poses(skel, 4, tiny, 3), WorkspaceTooCrowded);
}

TEST_CASE("scene images: background, person pixels, behind-camera culling") {
  const SkeletonSpec skel = SkeletonSpec::panoptic15();
  auto cams = make_camera_rig(2, default_workspace(), 4500.0, {2300.0, 2900.0}, 96, 96, 5);

  Pose3DSet empty;
  empty.joints = Tensor({0, skel.joint_count(), 3});
  const auto bg = render_scene_images(empty, skel, cams, 4);
  for (int64_t i = 0; i < bg[0].numel(); ++i) CHECK(std::abs(bg[0][i] - 0.48) < 0.2);

  const Pose3DSet one = sample_poses(skel, 1, default_person_region(), 6);
  const auto img = render_scene_images(one, skel, cams, 4);
  int64_t changed = 0;
  for (int64_t i = 0; i < img[0].numel(); ++i)
    if (std::abs(img[0][i] - bg[0][i]) > 0.05) ++changed;
  CHECK(changed >= img[0].numel() / 100);  // at least 1% of pixels

  // A person behind one camera renders as background in that view only.
  CameraCalibration away = cams[0];
  // Flip the camera to look away: rotate 180 degrees about its own y (down).
  Mat3 flip;
  flip << -1, 0, 0, 0, 1, 0, 0, 0, -1;
  const Vec3 pos = -away.R.transpose() * away.t;
  away.R = flip * away.R;
  away.t = -away.R * pos;
  away.validate();
  const auto culled = render_scene_images(one, skel, {away}, 4);
  double maxdiff = 0.0;
  const auto bg_away = render_scene_images(empty, skel, {away}, 4);
  for (int64_t i = 0; i < culled[0].numel(); ++i)
    maxdiff = std::max(maxdiff, std::abs(culled[0][i] - bg_away[0][i]));
  CHECK(maxdiff == 0.0);
}

TEST_CASE("pseudo 2d: zero noise reproduces projections with confidence 1") {
  auto cams = make_camera_rig(3, default_workspace(), 4500.0, {2300.0, 2900.0}, 128, 128,
                              12);
  const SkeletonSpec skel = SkeletonSpec::panoptic15();
  const Pose3DSet gt = sample_poses(skel, 2, default_person_region(), 12);
  const Pose2DSet p = simulate_pseudo_2d(gt, cams, PseudoNoiseModel::clean(), 3);
  // Persons may be permuted per view; match by nearest projection.
  for (int64_t c = 0; c < 3; ++c) {
    for (int64_t q = 0; q < 2; ++q) {
      double best = 1e30;
      for (int64_t g = 0; g < 2; ++g) {
        double acc = 0.0;
        for (int j = 0; j < skel.joint_count(); ++j) {
          const Vec2 uv = project_point(cams[static_cast<size_t>(c)], gt.joint(g, j));
          acc += std::abs(p.joints.at(c, q, j, 0) - uv.x()) +
                 std::abs(p.joints.at(c, q, j, 1) - uv.y());
        }
        best = std::min(best, acc);
      }
      CHECK(best < 1e-9);
      for (int j = 0; j < skel.joint_count(); ++j)
        CHECK(p.confidence.at(c, q, j) == doctest::Approx(1.0));
    }
  }
}

TEST_CASE("pseudo 2d: folded-normal jitter magnitude") {
  auto cams = make_camera_rig(2, default_workspace(), 4500.0, {2300.0, 2900.0}, 128, 128,
                              15);
  const SkeletonSpec skel = SkeletonSpec::panoptic15();
  PseudoNoiseModel noise{2.0, 0.0, 0.0};
  double acc = 0.0;
  int64_t terms = 0;
  for (int f = 0; f < 24; ++f) {
    const Pose3DSet gt = sample_poses(skel, 1, default_person_region(),
                                      9000 + static_cast<uint64_t>(f));
    const Pose2DSet p = simulate_pseudo_2d(gt, cams, noise, static_cast<uint64_t>(f));
    for (int64_t c = 0; c < 2; ++c)
      for (int j = 0; j < skel.joint_count(); ++j) {
        const Vec2 uv = project_point(cams[static_cast<size_t>(c)], gt.joint(0, j));
        acc += std::abs(p.joints.at(c, 0, j, 0) - uv.x());
        acc += std::abs(p.joints.at(c, 0, j, 1) - uv.y());
        terms += 2;
      }
  }
  const double mean_abs = acc / static_cast<double>(terms);
  // E|N(0, 2)| = 2 sqrt(2/pi) = 1.596; [1.4, 1.8] over ~1.4k draws.
  CHECK(mean_abs > 1.4);
  CHECK(mean_abs < 1.8);
}

TEST_CASE("pseudo 2d: person drop rate matches the binomial") {
  auto cams = make_camera_rig(5, default_workspace(), 4500.0, {2300.0, 2900.0}, 128, 128,
                              18);
  const SkeletonSpec skel = SkeletonSpec::panoptic15();
  PseudoNoiseModel noise{0.0, 0.0, 0.3};
  int64_t missing = 0, total = 0;
  for (int f = 0; f < 2000; ++f) {
    const Pose3DSet gt = sample_poses(skel, 1, default_person_region(),
                                      5000 + static_cast<uint64_t>(f));
    const Pose2DSet p = simulate_pseudo_2d(gt, cams, noise, static_cast<uint64_t>(f));
    for (int64_t c = 0; c < 5; ++c) {
      ++total;
      bool any = false;
      for (int j = 0; j < skel.joint_count(); ++j)
        if (p.visible(c, 0, j)) any = true;
      if (!any) ++missing;
    }
  }
  const double rate = static_cast<double>(missing) / static_cast<double>(total);
  CHECK(rate > 0.29 - 0.005);
  CHECK(rate < 0.31 + 0.005);
}

TEST_CASE("pseudo 2d confidence calibration around the 0.7 threshold") {
  auto cams = make_camera_rig(3, default_workspace(), 4500.0, {2300.0, 2900.0}, 128, 128,
                              21);
  const SkeletonSpec skel = SkeletonSpec::panoptic15();
  PseudoNoiseModel noise = PseudoNoiseModel::preset_default();
  int far_joints = 0;
  int64_t below = 0, visible = 0;
  for (int f = 0; f < 50; ++f) {
    const Pose3DSet gt = sample_poses(skel, 2, default_person_region(),
                                      7000 + static_cast<uint64_t>(f));
    const Pose2DSet p = simulate_pseudo_2d(gt, cams, noise, static_cast<uint64_t>(f));
    for (int64_t c = 0; c < 3; ++c)
      for (int64_t q = 0; q < 2; ++q)
        for (int j = 0; j < skel.joint_count(); ++j) {
          if (!p.visible(c, q, j)) continue;
          ++visible;
          if (p.confidence.at(c, q, j) < 0.7) ++below;
          const Vec2 uv(p.joints.at(c, q, j, 0), p.joints.at(c, q, j, 1));
          double nearest = 1e30;
          for (int64_t g = 0; g < 2; ++g) {
            const Vec2 proj =
                project_point(cams[static_cast<size_t>(c)], gt.joint(g, j));
            nearest = std::min(nearest, (uv - proj).norm());
          }
          // Anything this far from every projection must be an outlier, and
          // outliers always carry sub-threshold confidence.
          if (nearest > 14.0) {
            CHECK(p.confidence.at(c, q, j) < 0.7);
            ++far_joints;
          }
        }
  }
  CHECK(far_joints > 0);
  // Sub-threshold joints are exactly the outlier draws (~5%); clean joints
  // always sit at or above 0.7.
  const double frac = static_cast<double>(below) / static_cast<double>(visible);
  CHECK(frac > 0.02);
  CHECK(frac < 0.09);
}

TEST_CASE("synthetic root dataset invariants") {
  auto cams = make_camera_rig(5, default_workspace(), 4500.0, {2300.0, 2900.0}, 128, 128,
                              31);
  const VoxelGridSpec grid = default_coarse_grid();
  Aabb region = default_person_region();

  CHECK(generate_root_dataset(0, cams, region, grid, 4, 3.0, 190.0, 1).empty());

  const auto data = generate_root_dataset(100, cams, region, grid, 4, 3.0, 190.0, 77);
  CHECK(data.size() == 100);
  for (const auto& s : data) {
    CHECK(!s.roots.empty());
    CHECK(s.roots.size() <= 4);
    // Min separation between sampled roots.
    for (size_t a = 0; a < s.roots.size(); ++a)
      for (size_t b = a + 1; b < s.roots.size(); ++b)
        CHECK((s.roots[a] - s.roots[b]).norm() >= kMinRootSampleSeparationMm - 1e-9);
    // Heatmap peaks coincide with the projections (within one heatmap px).
    // Max-combination can absorb a peak when two roots project close together
    // in a view, so only isolated projections are asserted.
    for (size_t c = 0; c < cams.size(); ++c) {
      for (const Vec3& r : s.roots) {
        const Vec2 uv = project_point(cams[c], r);
        const double hx = uv.x() / 4.0, hy = uv.y() / 4.0;
        if (hx < 1 || hx > 30 || hy < 1 || hy > 30) continue;
        bool isolated = true;
        for (const Vec3& other : s.roots) {
          if (&other == &r) continue;
          if (cams[c].depth_of(other) <= kMinCameraDepthMm) continue;
          const Vec2 ouv = project_point(cams[c], other);
          if ((ouv - uv).norm() / 4.0 < 3.0 * 3.0) isolated = false;
        }
        if (!isolated) continue;
        double local_best = -1.0;
        int bx = 0, by = 0;
        for (int dy = -2; dy <= 2; ++dy)
          for (int dx = -2; dx <= 2; ++dx) {
            const int px = static_cast<int>(std::round(hx)) + dx;
            const int py = static_cast<int>(std::round(hy)) + dy;
            if (px < 0 || px >= 32 || py < 0 || py >= 32) continue;
            const double v = s.root_heatmaps.at(static_cast<int64_t>(c), py, px);
            if (v > local_best) {
              local_best = v;
              bx = px;
              by = py;
            }
          }
        CHECK(std::abs(bx - hx) <= 1.0 + 1e-9);
        CHECK(std::abs(by - hy) <= 1.0 + 1e-9);
      }
    }
    // Volume argmax within one voxel of each root (checked via local maxima).
    for (const Vec3& r : s.roots) {
      int ix = static_cast<int>(std::round((r.x() - (grid.center.x() - grid.extent.x() / 2)) /
                                           grid.pitch(0)));
      int iy = static_cast<int>(std::round((r.y() - (grid.center.y() - grid.extent.y() / 2)) /
                                           grid.pitch(1)));
      int iz = static_cast<int>(std::round((r.z() - (grid.center.z() - grid.extent.z() / 2)) /
                                           grid.pitch(2)));
      double best = -1.0;
      std::array<int, 3> arg{0, 0, 0};
      for (int dx = -2; dx <= 2; ++dx)
        for (int dy = -2; dy <= 2; ++dy)
          for (int dz = -2; dz <= 2; ++dz) {
            const int ux = ix + dx, uy = iy + dy, uz = iz + dz;
            if (ux < 0 || ux >= 48 || uy < 0 || uy >= 48 || uz < 0 || uz >= 16) continue;
            if (s.gt_root_volume.at(ux, uy, uz) > best) {
              best = s.gt_root_volume.at(ux, uy, uz);
              arg = {ux, uy, uz};
            }
          }
      CHECK(std::abs(arg[0] - ix) <= 1);
      CHECK(std::abs(arg[1] - iy) <= 1);
      CHECK(std::abs(arg[2] - iz) <= 1);
    }
  }
}

TEST_CASE("noise presets") {
  CHECK(PseudoNoiseModel::by_name("clean").sigma_px == 0.0);
  CHECK(PseudoNoiseModel::by_name("default").p_drop == doctest::Approx(0.10));
  CHECK(PseudoNoiseModel::by_name("heavy").p_outlier == doctest::Approx(0.15));
  CHECK_THROWS_AS(PseudoNoiseModel::by_name("nope"), InvalidConfig);
}
