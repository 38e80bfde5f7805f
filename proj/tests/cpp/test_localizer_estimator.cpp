#include <doctest.h>

#include <cmath>

#include "sp3d/inference.hpp"
#include "sp3d/pose_estimator.hpp"
#include "sp3d/rendering.hpp"
#include "sp3d/root_localizer.hpp"

using namespace sp3d;

namespace {

// Exact multi-view heatmaps rendered from a pose set, per branch affine.
Tensor oracle_heatmaps(const Pose3DSet& poses, const std::vector<CameraCalibration>& cams,
                       const AffineAugmentation& t, int hq, int wq, double sigma) {
  PoseLossFlags flags;
  const Pose2DSet exact = simulate_pseudo_2d(poses, cams, PseudoNoiseModel::clean(), 1);
  const Pose2DSet mapped = transform_pseudo_to_branch(exact, cams, t, flags);
  return render_pose_heatmaps(mapped, hq, wq, sigma);
}

}  // namespace

TEST_CASE("extract_root_heatmaps slices the root channel") {
  Tensor h({2, 4, 8, 8});
  for (int64_t i = 0; i < h.numel(); ++i) h[i] = static_cast<double>(i % 97) / 97.0;
  const Tensor r = extract_root_heatmaps(h, 2);
  CHECK(r.shape() == std::vector<int64_t>{2, 8, 8});
  for (int64_t c = 0; c < 2; ++c)
    for (int64_t i = 0; i < 64; ++i) CHECK(r.at(c, i / 8, i % 8) == h.at(c, 2, i / 8, i % 8));
  CHECK_THROWS_AS(extract_root_heatmaps(h, 4), IndexOutOfRange);
  CHECK_THROWS_AS(extract_root_heatmaps(h, -1), IndexOutOfRange);

  const Tensor z = extract_root_heatmaps(Tensor({2, 4, 8, 8}), 1);
  CHECK(z.max() == 0.0);
}

TEST_CASE("nms_3d examples") {
  VoxelGridSpec g;
  g.center = Vec3(0, 0, 0);
  g.extent = Vec3(900, 900, 900);
  g.resolution = {10, 10, 10};

  auto blob = [&](Tensor& vol, int cx, int cy, int cz, double peak) {
    for (int x = 0; x < 10; ++x)
      for (int y = 0; y < 10; ++y)
        for (int z = 0; z < 10; ++z) {
          const double d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy) + (z - cz) * (z - cz);
          vol.at(x, y, z) = std::max(vol.at(x, y, z), peak * std::exp(-d2 / 2.0));
        }
  };

  Tensor single({10, 10, 10});
  blob(single, 4, 5, 6, 0.9);
  auto props = nms_3d(single, g, 3, 0.3, 10);
  REQUIRE(props.size() == 1);
  CHECK(props[0].voxel_index == std::array<int, 3>{4, 5, 6});
  CHECK(props[0].score == doctest::Approx(0.9));

  Tensor twin({10, 10, 10});
  blob(twin, 2, 2, 2, 0.8);
  blob(twin, 7, 7, 7, 0.6);
  props = nms_3d(twin, g, 3, 0.3, 10);
  REQUIRE(props.size() == 2);
  CHECK(props[0].score > props[1].score);  // sorted by descending score

  Tensor faint({10, 10, 10});
  blob(faint, 4, 4, 4, 0.2);
  CHECK(nms_3d(faint, g, 3, 0.3, 10).empty());

  // Sub-voxel refinement stays within one voxel pitch.
  for (const auto& p : nms_3d(twin, g, 3, 0.3, 10)) {
    const Vec3 c = g.voxel_center(p.voxel_index[0], p.voxel_index[1], p.voxel_index[2]);
    CHECK((p.position - c).cwiseAbs().maxCoeff() <= g.pitch(0) + 1e-9);
  }

  // max_proposals cap.
  CHECK(nms_3d(twin, g, 3, 0.3, 1).size() == 1);
  CHECK_THROWS_AS(nms_3d(twin, g, 4, 0.3, 10), InvalidConfig);
}

TEST_CASE("localize_roots on oracle heatmaps (bypass path)") {
  auto cams = make_camera_rig(5, default_workspace(), 4500.0, {2300.0, 2900.0}, 128, 128,
                              41);
  ModelBundle bundle = ModelBundle::create(ModelConfig{}, 2);
  const SkeletonSpec& skel = bundle.skeleton;
  const Pose3DSet gt = sample_poses(skel, 2, default_person_region(), 31);

  const auto ident = AffineAugmentation::identity(Vec2(64, 64));
  const auto t1 = AffineAugmentation::make(20.0, 0.1, Vec2(64, 64));
  const auto t2 = AffineAugmentation::make(-10.0, -0.2, Vec2(64, 64));
  auto root_maps = [&](const AffineAugmentation& t) {
    const Tensor hm = oracle_heatmaps(gt, cams, t, 32, 32, bundle.hyper.sigma_hm);
    return extract_root_heatmaps(hm, skel.root());
  };
  const RootLocalization loc =
      localize_roots(root_maps(ident), root_maps(t1), root_maps(t2), cams, t1, t2, bundle,
                     /*bypass_root_net=*/true);
  REQUIRE(loc.proposals.size() == 2);
  for (size_t i = 1; i < loc.proposals.size(); ++i)
    CHECK(loc.proposals[i - 1].score >= loc.proposals[i].score);
  // Each gt root has a proposal within one coarse voxel pitch (x/y axis).
  for (int p = 0; p < 2; ++p) {
    double best = 1e30;
    for (const auto& prop : loc.proposals)
      best = std::min(best, (prop.position - gt.joint(p, skel.root())).norm());
    CHECK(best <= std::max(bundle.coarse_grid.pitch(0), bundle.coarse_grid.pitch(2)) *
                      std::sqrt(3.0));
  }

  // Empty scene: zero heatmaps give zero proposals.
  const Tensor zeros({5, 32, 32});
  const RootLocalization none =
      localize_roots(zeros, zeros, zeros, cams, t1, t2, bundle, true);
  CHECK(none.proposals.empty());
  CHECK(none.g2.max() == 0.0);
}

TEST_CASE("person_feature_volume oracle argmax and purity") {
  auto cams = make_camera_rig(5, default_workspace(), 4500.0, {2300.0, 2900.0}, 128, 128,
                              43);
  ModelBundle bundle = ModelBundle::create(ModelConfig{}, 3);
  const SkeletonSpec& skel = bundle.skeleton;
  const Pose3DSet gt = sample_poses(skel, 2, default_person_region(), 37);
  const auto t1 = AffineAugmentation::make(15.0, 0.05, Vec2(64, 64));
  const Tensor hm = oracle_heatmaps(gt, cams, t1, 32, 32, 2.0);

  for (int p = 0; p < 2; ++p) {
    RootProposal prop;
    prop.position = gt.joint(p, skel.root());
    const FeatureVolume f = person_feature_volume(prop, hm, cams, t1,
                                                  bundle.fine_grid_template,
                                                  bundle.coarse_grid);
    const auto& fine = f.grid;
    for (int j = 0; j < skel.joint_count(); ++j) {
      if (!fine.contains(gt.joint(p, j))) continue;
      Tensor vol({fine.resolution[0], fine.resolution[1], fine.resolution[2]});
      std::copy_n(f.data.data() + j * fine.num_voxels(), fine.num_voxels(), vol.data());
      const auto idx = fine.unflatten(vol.argmax());
      const Vec3 err =
          (fine.voxel_center(idx[0], idx[1], idx[2]) - gt.joint(p, j)).cwiseAbs();
      CHECK(err.maxCoeff() <= fine.pitch(0) + 1e-9);
    }
  }

  // Zero heatmaps -> zero volume.
  RootProposal prop;
  prop.position = gt.joint(0, skel.root());
  const FeatureVolume fz =
      person_feature_volume(prop, Tensor({5, 15, 32, 32}), cams, t1,
                            bundle.fine_grid_template, bundle.coarse_grid);
  CHECK(fz.data.max() == 0.0);

  RootProposal outside;
  outside.position = Vec3(99000, 0, 0);
  CHECK_THROWS_AS(person_feature_volume(outside, hm, cams, t1, bundle.fine_grid_template,
                                        bundle.coarse_grid),
                  IndexOutOfRange);
}

TEST_CASE("estimate_bottleneck_poses: oracle path and determinism") {
  auto cams = make_camera_rig(5, default_workspace(), 4500.0, {2300.0, 2900.0}, 128, 128,
                              47);
  ModelBundle bundle = ModelBundle::create(ModelConfig{}, 4);
  const SkeletonSpec& skel = bundle.skeleton;
  const Pose3DSet gt = sample_poses(skel, 3, default_person_region(), 41);
  const auto t1 = AffineAugmentation::make(18.0, 0.12, Vec2(64, 64));
  const auto t2 = AffineAugmentation::make(-25.0, -0.1, Vec2(64, 64));
  const Tensor h1 = oracle_heatmaps(gt, cams, t1, 32, 32, 2.0);
  const Tensor h2 = oracle_heatmaps(gt, cams, t2, 32, 32, 2.0);

  std::vector<RootProposal> proposals;
  for (int p = 0; p < 3; ++p) {
    RootProposal prop;
    prop.position = gt.joint(p, skel.root());
    prop.score = 1.0;
    proposals.push_back(prop);
  }
  ad::NoGradGuard ng;
  const BottleneckPoses bp = estimate_bottleneck_poses(
      proposals, ad::constant(h1), ad::constant(h2), cams, t1, t2, bundle,
      /*bypass_pose_net=*/true);
  CHECK(bp.y1->value.shape() == std::vector<int64_t>{3, 15, 3});
  CHECK(bp.y2->value.shape() == std::vector<int64_t>{3, 15, 3});

  // Oracle MPJPE under one fine-grid voxel pitch, both branches.
  const double pitch = bundle.fine_grid_template.pitch(0);
  for (const auto* y : {&bp.y1, &bp.y2}) {
    double acc = 0.0;
    for (int p = 0; p < 3; ++p)
      for (int j = 0; j < 15; ++j) {
        const Vec3 got((*y)->value.at(p, j, 0), (*y)->value.at(p, j, 1),
                       (*y)->value.at(p, j, 2));
        acc += (got - gt.joint(p, j)).norm();
      }
    CHECK(acc / 45.0 < pitch);
  }

  // Determinism in eval mode.
  const BottleneckPoses again = estimate_bottleneck_poses(
      proposals, ad::constant(h1), ad::constant(h2), cams, t1, t2, bundle, true);
  for (int64_t i = 0; i < bp.y1->value.numel(); ++i)
    CHECK(bp.y1->value[i] == again.y1->value[i]);

  // No proposals -> empty bottleneck.
  const BottleneckPoses none = estimate_bottleneck_poses(
      {}, ad::constant(h1), ad::constant(h2), cams, t1, t2, bundle, true);
  CHECK(none.y1->value.dim(0) == 0);
}

TEST_CASE("cross_view_project identity equals plain projection") {
  auto cams = make_camera_rig(3, default_workspace(), 4500.0, {2300.0, 2900.0}, 128, 128,
                              53);
  const SkeletonSpec skel = SkeletonSpec::panoptic15();
  const Pose3DSet gt = sample_poses(skel, 2, default_person_region(), 47);
  const auto ident = AffineAugmentation::identity(Vec2(64, 64));
  const ViewProjection vp = cross_view_project(ad::constant(gt.joints), cams, ident);
  REQUIRE(vp.per_view.size() == 3);
  for (size_t c = 0; c < 3; ++c)
    for (int64_t p = 0; p < 2; ++p)
      for (int j = 0; j < skel.joint_count(); ++j) {
        const Vec2 uv = project_point(cams[c], gt.joint(p, j));
        const int64_t row = p * skel.joint_count() + j;
        CHECK(vp.per_view[c]->value.at(row, 0) == doctest::Approx(uv.x()).epsilon(1e-12));
        CHECK(vp.per_view[c]->value.at(row, 1) == doctest::Approx(uv.y()).epsilon(1e-12));
      }

  // Composition against an explicit matrix-chain oracle.
  const auto t = AffineAugmentation::make(33.0, 0.25, Vec2(64, 64));
  const ViewProjection vt = cross_view_project(ad::constant(gt.joints), cams, t);
  Rng rng(3);
  for (int rep = 0; rep < 100; ++rep) {
    const int64_t c = rng.uniform_int(0, 2);
    const int64_t p = rng.uniform_int(0, 1);
    const int64_t j = rng.uniform_int(0, skel.joint_count() - 1);
    Eigen::Matrix3d A = Eigen::Matrix3d::Identity();
    A.block<2, 3>(0, 0) = t.matrix;
    const Vec2 uv = project_point(cams[static_cast<size_t>(c)], gt.joint(p, j));
    const Eigen::Vector3d chained = A * Eigen::Vector3d(uv.x(), uv.y(), 1.0);
    const int64_t row = p * skel.joint_count() + j;
    CHECK(std::abs(vt.per_view[static_cast<size_t>(c)]->value.at(row, 0) - chained.x()) <
          1e-6);
    CHECK(std::abs(vt.per_view[static_cast<size_t>(c)]->value.at(row, 1) - chained.y()) <
          1e-6);
  }
}

TEST_CASE("behind-camera joints are masked in that view only") {
  // Two opposing cameras: a point in front of one is behind the other.
  auto cams = make_camera_rig(2, default_workspace(), 4000.0, {2300.0, 2400.0}, 128, 128,
                              59);
  const Vec3 cam0_pos = -cams[0].R.transpose() * cams[0].t;
  // A point slightly beyond camera 0 (outside the rig circle).
  const Vec3 behind0 = cam0_pos + (cam0_pos - default_workspace().center()).normalized() *
                                      500.0;
  Tensor pts({1, 1, 3});
  pts.at(0, 0, 0) = behind0.x();
  pts.at(0, 0, 1) = behind0.y();
  pts.at(0, 0, 2) = behind0.z();
  const auto ident = AffineAugmentation::identity(Vec2(64, 64));
  const ViewProjection vp = cross_view_project(ad::constant(pts), cams, ident);
  CHECK(vp.visibility[0][0] == 0.0);
  CHECK(vp.per_view[0]->value.at(0, 0) == kInvisibleSentinel);
}

TEST_CASE("build_pose_loss_inputs: cross-branch symmetry and empty proposals") {
  auto cams = make_camera_rig(4, default_workspace(), 4500.0, {2300.0, 2900.0}, 128, 128,
                              61);
  ModelBundle bundle = ModelBundle::create(ModelConfig{}, 5);
  const SkeletonSpec& skel = bundle.skeleton;
  const Pose3DSet gt = sample_poses(skel, 2, default_person_region(), 53);
  const Pose2DSet pseudo = simulate_pseudo_2d(gt, cams, PseudoNoiseModel::preset_default(),
                                              5);
  const auto t1 = AffineAugmentation::make(12.0, 0.1, Vec2(64, 64));
  const auto t2 = AffineAugmentation::make(-8.0, -0.05, Vec2(64, 64));

  Rng rng(5);
  Tensor y1v({2, 15, 3}), y2v({2, 15, 3});
  for (int64_t i = 0; i < y1v.numel(); ++i) {
    y1v[i] = gt.joints[i] + rng.normal(0, 40.0);
    y2v[i] = gt.joints[i] + rng.normal(0, 40.0);
  }
  HyperParams hyper;
  PoseLossFlags flags;
  flags.soft_attention = false;
  flags.hard_attention = false;

  BottleneckPoses bp;
  bp.y1 = ad::constant(y1v);
  bp.y2 = ad::constant(y2v);
  const PoseLossBundle a =
      build_pose_loss_inputs(bp, pseudo, cams, t1, t2, nullptr, nullptr, hyper, flags, 32, 32);

  BottleneckPoses swapped;
  swapped.y1 = ad::constant(y2v);
  swapped.y2 = ad::constant(y1v);
  const PoseLossBundle b = build_pose_loss_inputs(swapped, pseudo, cams, t2, t1, nullptr,
                                                  nullptr, hyper, flags, 32, 32);
  // Swapping (t1, Y1) with (t2, Y2) swaps the branches; the summed losses match.
  CHECK(a.loss_h == doctest::Approx(b.loss_h).epsilon(1e-12));
  CHECK(a.loss_j == doctest::Approx(b.loss_j).epsilon(1e-12));

  BottleneckPoses empty;
  empty.y1 = ad::constant(Tensor({0, 15, 3}));
  empty.y2 = ad::constant(Tensor({0, 15, 3}));
  const PoseLossBundle e = build_pose_loss_inputs(empty, pseudo, cams, t1, t2, nullptr,
                                                  nullptr, hyper, flags, 32, 32);
  CHECK(e.no_matches);
  CHECK(e.loss_j == 0.0);
  CHECK(e.loss_h > 0.0);  // rendered zeros against pseudo maps
}

TEST_CASE("per-view assignments are independent across views") {
  auto cams = make_camera_rig(3, default_workspace(), 4500.0, {2300.0, 2900.0}, 128, 128,
                              67);
  const SkeletonSpec skel = SkeletonSpec::panoptic15();
  const Pose3DSet gt = sample_poses(skel, 2, default_person_region(), 59);
  Pose2DSet pseudo = simulate_pseudo_2d(gt, cams, PseudoNoiseModel::clean(), 5);
  // Hide person 0 from view 1 entirely.
  for (int j = 0; j < skel.joint_count(); ++j) pseudo.visibility.at(1, 0, j) = 0.0;

  HyperParams hyper;
  PoseLossFlags flags;
  flags.soft_attention = false;
  flags.hard_attention = false;
  flags.cross_affine_view = false;
  BottleneckPoses bp;
  bp.y1 = ad::constant(gt.joints);
  bp.y2 = ad::constant(gt.joints);
  const auto ident = AffineAugmentation::identity(Vec2(64, 64));
  const PoseLossBundle lb = build_pose_loss_inputs(bp, pseudo, cams, ident, ident, nullptr,
                                                   nullptr, hyper, flags, 32, 32);
  // Exact poses against exact pseudo still give zero loss: the missing person
  // in view 1 only removes terms, the other views are unaffected.
  CHECK(lb.loss_j < 1e-9);
  CHECK_FALSE(lb.no_matches);
}
