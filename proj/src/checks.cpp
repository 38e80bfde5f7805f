#include "sp3d/checks.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "sp3d/autodiff.hpp"
#include "sp3d/hungarian.hpp"
#include "sp3d/losses.hpp"
#include "sp3d/metrics.hpp"
#include "sp3d/pose_estimator.hpp"
#include "sp3d/rendering.hpp"
#include "sp3d/rng.hpp"
#include "sp3d/scene_synth.hpp"

namespace sp3d {

namespace {

Tensor random_tensor(std::vector<int64_t> shape, Rng& rng, double lo = -1.0,
                     double hi = 1.0) {
  Tensor t(std::move(shape));
  for (int64_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

CheckResult check(const std::string& name, bool ok, const std::string& detail) {
  return {name, ok, detail};
}

std::string err_str(double v) {
  std::ostringstream os;
  os.precision(3);
  os << std::scientific << v;
  return os.str();
}

}  // namespace

double max_grad_rel_err(const std::function<double(const Tensor&)>& f, Tensor x,
                        const Tensor& analytic, double h, int max_entries) {
  // Check the entries with the largest analytic gradient plus a random tail.
  std::vector<int64_t> idx(static_cast<size_t>(x.numel()));
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](int64_t a, int64_t b) {
    return std::abs(analytic[a]) > std::abs(analytic[b]);
  });
  if (static_cast<int>(idx.size()) > max_entries) idx.resize(static_cast<size_t>(max_entries));
  double max_rel = 0.0;
  for (int64_t i : idx) {
    const double orig = x[i];
    x[i] = orig + h;
    const double fp = f(x);
    x[i] = orig - h;
    const double fm = f(x);
    x[i] = orig;
    const double fd = (fp - fm) / (2.0 * h);
    const double g = analytic[i];
    const double denom = std::max({std::abs(fd), std::abs(g), 1e-4});
    max_rel = std::max(max_rel, std::abs(fd - g) / denom);
  }
  return max_rel;
}

std::vector<CheckResult> run_gradient_suite() {
  std::vector<CheckResult> out;
  Rng rng(20240517);

  {  // render_gaussian_heatmap w.r.t. joint coordinates, 20 random configs
    double worst = 0.0;
    for (int rep = 0; rep < 20; ++rep) {
      const int n = 1 + static_cast<int>(rng.uniform_int(0, 2));
      Tensor joints({n, 2});
      for (int64_t i = 0; i < joints.numel(); ++i) joints[i] = rng.uniform(20.0, 100.0);
      const std::vector<double> w(static_cast<size_t>(n), 1.0);
      const std::vector<uint8_t> act(static_cast<size_t>(n), 1);
      Tensor weight_mask = random_tensor({1, 32, 32}, rng);
      auto loss_of = [&](const Tensor& jt) {
        auto v = ad::constant(jt);
        auto hm = ad::render_pose_channels(v, w, act, n, 1, 3.0, 32, 32);
        return ad::sum_all(ad::mul_const(hm, weight_mask))->value[0];
      };
      auto var = ad::parameter(joints);
      auto hm = ad::render_pose_channels(var, w, act, n, 1, 3.0, 32, 32);
      auto loss = ad::sum_all(ad::mul_const(hm, weight_mask));
      ad::backward(loss);
      worst = std::max(worst, max_grad_rel_err(loss_of, joints, var->grad, 1e-3, 2 * n));
    }
    out.push_back(check("grad.render_gaussian_heatmap", worst < 1e-4, err_str(worst)));
  }

  {  // soft_argmax_3d on 8x8x4 random volumes
    VoxelGridSpec grid;
    grid.center = Vec3(0, 0, 0);
    grid.extent = Vec3(800, 800, 400);
    grid.resolution = {8, 8, 4};
    double worst = 0.0;
    for (int rep = 0; rep < 5; ++rep) {
      Tensor vol = random_tensor({1, 8, 8, 4}, rng);
      Tensor dir({1, 3});
      for (int i = 0; i < 3; ++i) dir[i] = rng.uniform(-1.0, 1.0);
      auto loss_of = [&](const Tensor& v) {
        auto coords = ad::soft_argmax3d(ad::constant(v), grid, 8.0);
        return ad::sum_all(ad::mul_const(coords, dir))->value[0];
      };
      auto var = ad::parameter(vol);
      auto coords = ad::soft_argmax3d(var, grid, 8.0);
      auto loss = ad::sum_all(ad::mul_const(coords, dir));
      ad::backward(loss);
      worst = std::max(worst, max_grad_rel_err(loss_of, vol, var->grad, 1e-4, 30));
    }
    out.push_back(check("grad.soft_argmax_3d", worst < 1e-4, err_str(worst)));
  }

  {  // unproject_heatmaps w.r.t. heatmap pixels, small grid, 2 views
    const Aabb ws = default_workspace();
    auto cams = make_camera_rig(2, ws, 4500.0, {2300.0, 2900.0}, 64, 64, 11);
    VoxelGridSpec grid;
    grid.center = Vec3(0, 0, 1000);
    grid.extent = Vec3(2000, 2000, 1000);
    grid.resolution = {6, 6, 4};
    const auto t = AffineAugmentation::make(12.0, 0.1, Vec2(32, 32));
    const auto plan = make_unprojection_plan(cams, grid, t, 16, 16);
    Tensor h = random_tensor({2, 1, 16, 16}, rng, 0.0, 1.0);
    Tensor mask = random_tensor({1, 6, 6, 4}, rng);
    auto loss_of = [&](const Tensor& hm) {
      auto v = ad::unproject(ad::constant(hm), plan);
      return ad::sum_all(ad::mul_const(v, mask))->value[0];
    };
    auto var = ad::parameter(h);
    auto loss = ad::sum_all(ad::mul_const(ad::unproject(var, plan), mask));
    ad::backward(loss);
    const double worst = max_grad_rel_err(loss_of, h, var->grad, 1e-5, 40);
    out.push_back(check("grad.unproject_heatmaps", worst < 1e-4, err_str(worst)));
  }

  {  // cross-view projection w.r.t. world points, 50 configs
    const Aabb ws = default_workspace();
    auto cams = make_camera_rig(5, ws, 4500.0, {2300.0, 2900.0}, 128, 128, 5);
    double worst = 0.0;
    for (int rep = 0; rep < 50; ++rep) {
      const auto& cam = cams[static_cast<size_t>(rng.uniform_int(0, 4))];
      const auto t = AffineAugmentation::make(rng.uniform(-45.0, 45.0),
                                              rng.uniform(-0.35, 0.35), Vec2(64, 64));
      Tensor pts({2, 3});
      for (int64_t i = 0; i < 2; ++i) {
        pts.at(i, 0) = rng.uniform(-1200.0, 1200.0);
        pts.at(i, 1) = rng.uniform(-1200.0, 1200.0);
        pts.at(i, 2) = rng.uniform(200.0, 1800.0);
      }
      Tensor mask = random_tensor({2, 2}, rng);
      auto loss_of = [&](const Tensor& p) {
        std::vector<uint8_t> vis;
        auto uv = ad::project_to_view(ad::constant(p), cam, t, &vis);
        return ad::sum_all(ad::mul_const(uv, mask))->value[0];
      };
      auto var = ad::parameter(pts);
      std::vector<uint8_t> vis;
      auto loss = ad::sum_all(ad::mul_const(ad::project_to_view(var, cam, t, &vis), mask));
      ad::backward(loss);
      worst = std::max(worst, max_grad_rel_err(loss_of, pts, var->grad, 1e-3, 6));
    }
    out.push_back(check("grad.cross_view_project", worst < 1e-4, err_str(worst)));
  }

  {  // losses: mse pair, attentive, regularizer, masked L1, hard attention
    double worst = 0.0;
    Tensor a = random_tensor({2, 3, 8, 8}, rng, 0.0, 1.0);
    Tensor b = random_tensor({2, 3, 8, 8}, rng, 0.0, 1.0);
    Tensor attn = random_tensor({2, 3, 8, 8}, rng, 0.05, 0.95);
    {
      auto loss_of = [&](const Tensor& x) {
        return pose_heatmap_loss(ad::constant(x), b, ad::constant(x), b)->value[0];
      };
      auto var = ad::parameter(a);
      auto loss = pose_heatmap_loss(var, b, var, b);
      ad::backward(loss);
      worst = std::max(worst, max_grad_rel_err(loss_of, a, var->grad, 1e-5, 30));
    }
    {
      auto loss_of = [&](const Tensor& x) {
        return attentive_heatmap_loss(ad::constant(x), b, ad::constant(attn))->value[0];
      };
      auto var = ad::parameter(a);
      ad::Var loss = attentive_heatmap_loss(var, b, ad::constant(attn));
      ad::backward(loss);
      worst = std::max(worst, max_grad_rel_err(loss_of, a, var->grad, 1e-5, 30));
      auto loss_of_a = [&](const Tensor& x) {
        return attentive_heatmap_loss(ad::constant(a), b, ad::constant(x))->value[0];
      };
      auto var_a = ad::parameter(attn);
      ad::Var loss2 = attentive_heatmap_loss(ad::constant(a), b, var_a);
      ad::backward(loss2);
      worst = std::max(worst, max_grad_rel_err(loss_of_a, attn, var_a->grad, 1e-5, 30));
    }
    {
      auto loss_of = [&](const Tensor& x) {
        return attention_regularizer(ad::constant(x))->value[0];
      };
      auto var = ad::parameter(attn);
      auto loss = attention_regularizer(var);
      ad::backward(loss);
      worst = std::max(worst, max_grad_rel_err(loss_of, attn, var->grad, 1e-5, 30));
    }
    {
      Tensor pred = random_tensor({6, 2}, rng, 0.0, 50.0);
      Tensor target = random_tensor({6, 2}, rng, 60.0, 120.0);  // keep |.| off the kink
      Tensor mask({6});
      for (int i = 0; i < 6; ++i) mask[i] = i % 2 == 0 ? 1.0 : 0.0;
      auto loss_of = [&](const Tensor& x) {
        return ad::masked_abs_sum(ad::constant(x), target, mask)->value[0];
      };
      auto var = ad::parameter(pred);
      auto loss = ad::masked_abs_sum(var, target, mask);
      ad::backward(loss);
      worst = std::max(worst, max_grad_rel_err(loss_of, pred, var->grad, 1e-5, 12));
    }
    {
      Tensor vals({4}, {1.0, 2.0, 5.0, 3.0});
      auto views_of = [](const ad::Var& v) {
        std::vector<ad::Var> views;
        for (int i = 0; i < 4; ++i) {
          Tensor m({4});
          m[i] = 1.0;
          views.push_back(ad::sum_all(ad::mul_const(v, m)));
        }
        return views;
      };
      auto loss_of = [&](const Tensor& x) {
        return hard_view_attention_loss(views_of(ad::constant(x)))->value[0];
      };
      auto var = ad::parameter(vals);
      auto loss = hard_view_attention_loss(views_of(var));
      ad::backward(loss);
      worst = std::max(worst, max_grad_rel_err(loss_of, vals, var->grad, 1e-5, 4));
    }
    out.push_back(check("grad.losses", worst < 1e-4, err_str(worst)));
  }

  {  // composed end-to-end micro-instance: heatmap pixel -> total pose loss
    const Aabb ws = default_workspace();
    auto cams = make_camera_rig(2, ws, 4500.0, {2300.0, 2900.0}, 64, 64, 33);
    const auto t1 = AffineAugmentation::make(10.0, 0.05, Vec2(32, 32));
    const auto t2 = AffineAugmentation::make(-15.0, -0.1, Vec2(32, 32));
    VoxelGridSpec fine;
    fine.center = Vec3(0, 0, 1000);
    fine.extent = Vec3(2000, 2000, 2000);
    fine.resolution = {8, 8, 8};
    const int hq = 16, wq = 16;
    // One synthetic person: heatmaps rendered around its projections.
    const SkeletonSpec skel = SkeletonSpec::panoptic15();
    Pose3DSet gt = sample_poses(skel, 1, default_person_region(), 77);
    Pose2DSet pseudo = simulate_pseudo_2d(gt, cams, PseudoNoiseModel::clean(), 3);
    auto branch_maps = [&](const AffineAugmentation& t) {
      PoseLossFlags f;
      const Pose2DSet mapped = transform_pseudo_to_branch(pseudo, cams, t, f);
      return render_pose_heatmaps(mapped, hq, wq, 2.0);
    };
    Tensor h1 = branch_maps(t1);
    Tensor h2 = branch_maps(t2);
    HyperParams hyper;
    hyper.sigma_hm = 2.0;
    hyper.beta = 30.0;
    auto loss_of_h1 = [&](const Tensor& h1v) {
      std::vector<ad::Var> vols1, vols2;
      auto h1var = ad::constant(h1v);
      auto h2var = ad::constant(h2);
      auto plan1 = make_unprojection_plan(cams, fine, t1, hq, wq);
      auto plan2 = make_unprojection_plan(cams, fine, t2, hq, wq);
      auto y1 = ad::soft_argmax3d(ad::unproject(h1var, plan1), fine, hyper.beta);
      auto y2 = ad::soft_argmax3d(ad::unproject(h2var, plan2), fine, hyper.beta);
      BottleneckPoses bp;
      bp.y1 = ad::reshape(y1, {1, skel.joint_count(), 3});
      bp.y2 = ad::reshape(y2, {1, skel.joint_count(), 3});
      PoseLossFlags flags;
      flags.soft_attention = false;
      flags.hard_attention = false;
      PoseLossBundle lb = build_pose_loss_inputs(bp, pseudo, cams, t1, t2, nullptr,
                                                 nullptr, hyper, flags, hq, wq);
      return lb.total;
    };
    auto root = loss_of_h1(h1);
    // Gradient w.r.t. h1 through unproject -> soft-argmax -> project -> render.
    auto h1var = ad::parameter(h1);
    {
      std::vector<ad::Var> dummy;
      auto plan1 = make_unprojection_plan(cams, fine, t1, hq, wq);
      auto plan2 = make_unprojection_plan(cams, fine, t2, hq, wq);
      auto y1 = ad::soft_argmax3d(ad::unproject(h1var, plan1), fine, hyper.beta);
      auto y2 = ad::soft_argmax3d(ad::unproject(ad::constant(h2), plan2), fine, hyper.beta);
      BottleneckPoses bp;
      bp.y1 = ad::reshape(y1, {1, skel.joint_count(), 3});
      bp.y2 = ad::reshape(y2, {1, skel.joint_count(), 3});
      PoseLossFlags flags;
      flags.soft_attention = false;
      flags.hard_attention = false;
      PoseLossBundle lb = build_pose_loss_inputs(bp, pseudo, cams, t1, t2, nullptr,
                                                 nullptr, hyper, flags, hq, wq);
      ad::backward(lb.total);
    }
    auto scalar_of = [&](const Tensor& h1v) { return loss_of_h1(h1v)->value[0]; };
    const double worst = max_grad_rel_err(scalar_of, h1, h1var->grad, 1e-4, 12);
    out.push_back(check("grad.end_to_end_micro", worst < 1e-3, err_str(worst)));
  }

  return out;
}

std::vector<CheckResult> run_oracle_suite() {
  std::vector<CheckResult> out;
  Rng rng(987);

  {  // Hungarian equals exhaustive permutation minimum, up to 6x6
    bool ok = true;
    double worst_gap = 0.0;
    for (int rep = 0; rep < 200 && ok; ++rep) {
      const int n = 2 + static_cast<int>(rng.uniform_int(0, 4));
      Tensor cost = random_tensor({n, n}, rng, 0.0, 10.0);
      const auto pairs = hungarian_assign(cost);
      double total = 0.0;
      for (const auto& [i, j] : pairs) total += cost.at(i, j);
      std::vector<int> perm(static_cast<size_t>(n));
      std::iota(perm.begin(), perm.end(), 0);
      double best = 1e30;
      do {
        double acc = 0.0;
        for (int i = 0; i < n; ++i) acc += cost.at(i, perm[static_cast<size_t>(i)]);
        best = std::min(best, acc);
      } while (std::next_permutation(perm.begin(), perm.end()));
      worst_gap = std::max(worst_gap, std::abs(total - best));
      if (std::abs(total - best) > 1e-9) ok = false;
    }
    out.push_back(check("oracle.hungarian_bruteforce", ok, err_str(worst_gap)));
  }

  {  // projection vs full homogeneous 3x4 oracle
    const Aabb ws = default_workspace();
    auto cams = make_camera_rig(4, ws, 4200.0, {2300.0, 2900.0}, 128, 128, 21);
    double worst = 0.0;
    for (int rep = 0; rep < 50; ++rep) {
      const auto& cam = cams[static_cast<size_t>(rng.uniform_int(0, 3))];
      const Vec3 x(rng.uniform(-1500, 1500), rng.uniform(-1500, 1500),
                   rng.uniform(100, 1900));
      const Vec2 uv = project_point(cam, x);
      Eigen::Vector4d xh(x.x(), x.y(), x.z(), 1.0);
      const Eigen::Vector3d h = cam.projection_matrix() * xh;
      worst = std::max(worst, (uv - Vec2(h.x() / h.z(), h.y() / h.z())).norm());
    }
    out.push_back(check("oracle.projection_homogeneous", worst < 1e-9, err_str(worst)));
  }

  {  // DLT: exact recovery, noise robustness, parallel degeneracy
    const Aabb ws = default_workspace();
    auto cams = make_camera_rig(5, ws, 4500.0, {2300.0, 2900.0}, 128, 128, 8);
    double worst = 0.0;
    for (int rep = 0; rep < 25; ++rep) {
      const Vec3 x(rng.uniform(-1200, 1200), rng.uniform(-1200, 1200),
                   rng.uniform(200, 1800));
      std::vector<std::pair<CameraCalibration, Vec2>> obs;
      for (int c = 0; c < 2; ++c)
        obs.emplace_back(cams[static_cast<size_t>(c)],
                         project_point(cams[static_cast<size_t>(c)], x));
      worst = std::max(worst, (triangulate_dlt(obs) - x).norm());
    }
    bool exact_ok = worst < 1e-3;

    std::vector<double> errs;
    for (int trial = 0; trial < 100; ++trial) {
      const Vec3 x(rng.uniform(-1200, 1200), rng.uniform(-1200, 1200),
                   rng.uniform(200, 1800));
      std::vector<std::pair<CameraCalibration, Vec2>> obs;
      for (const auto& cam : cams) {
        Vec2 uv = project_point(cam, x);
        uv.x() += rng.normal(0.0, 1.0);
        uv.y() += rng.normal(0.0, 1.0);
        obs.emplace_back(cam, uv);
      }
      errs.push_back((triangulate_dlt(obs) - x).norm());
    }
    std::nth_element(errs.begin(), errs.begin() + 50, errs.end());
    const double median = errs[50];

    bool degenerate_ok = false;
    try {
      std::vector<std::pair<CameraCalibration, Vec2>> obs = {
          {cams[0], Vec2(40, 40)}, {cams[0], Vec2(40, 40)}};
      triangulate_dlt(obs);
    } catch (const DegenerateConfiguration&) {
      degenerate_ok = true;
    }
    out.push_back(check("oracle.dlt_exact", exact_ok, err_str(worst)));
    out.push_back(check("oracle.dlt_noise_median_30mm", median < 30.0, err_str(median)));
    out.push_back(check("oracle.dlt_degenerate", degenerate_ok, ""));
  }

  {  // unprojection equals a scalar-loop reference on a 6x6x4 grid, 2 views
    const Aabb ws = default_workspace();
    auto cams = make_camera_rig(2, ws, 4200.0, {2300.0, 2900.0}, 64, 64, 13);
    VoxelGridSpec grid;
    grid.center = Vec3(200, -150, 1000);
    grid.extent = Vec3(2400, 2400, 1200);
    grid.resolution = {6, 6, 4};
    const auto t = AffineAugmentation::make(-20.0, 0.15, Vec2(32, 32));
    Tensor h = random_tensor({2, 3, 16, 16}, rng, 0.0, 1.0);
    const FeatureVolume fast = unproject_heatmaps(h, cams, grid, t);
    double worst = 0.0;
    for (int j = 0; j < 3; ++j)
      for (int64_t v = 0; v < grid.num_voxels(); ++v) {
        const Vec3 c = grid.voxel_center_flat(v);
        double acc = 0.0;
        int cnt = 0;
        for (size_t ci = 0; ci < cams.size(); ++ci) {
          const auto& cam = cams[ci];
          if (cam.depth_of(c) <= kMinCameraDepthMm) continue;
          const Vec2 aug = apply_affine(t, project_point(cam, c));
          const double x = aug.x() / 4.0, y = aug.y() / 4.0;
          if (x < 0 || x > 15 || y < 0 || y > 15) continue;
          int x0 = std::min(14, static_cast<int>(std::floor(x)));
          int y0 = std::min(14, static_cast<int>(std::floor(y)));
          const double fx = x - x0, fy = y - y0;
          acc += (1 - fx) * (1 - fy) * h.at(static_cast<int64_t>(ci), j, y0, x0) +
                 fx * (1 - fy) * h.at(static_cast<int64_t>(ci), j, y0, x0 + 1) +
                 (1 - fx) * fy * h.at(static_cast<int64_t>(ci), j, y0 + 1, x0) +
                 fx * fy * h.at(static_cast<int64_t>(ci), j, y0 + 1, x0 + 1);
          ++cnt;
        }
        const double expect = cnt ? std::clamp(acc / cnt, 0.0, 1.0) : 0.0;
        const auto [ix, iy, iz] = grid.unflatten(v);
        worst = std::max(worst, std::abs(expect - fast.data.at(j, ix, iy, iz)));
      }
    out.push_back(check("oracle.unproject_scalar_loop", worst < 1e-6, err_str(worst)));
  }

  {  // Gaussian mass: discrete sum within 1% of 2*pi*sigma^2
    const Tensor hm = render_gaussian_heatmap({{Vec2(10.5, 12.0), 1.0}}, 64, 64, 3.0);
    const double target = 2.0 * M_PI * 9.0;
    const double rel = std::abs(hm.sum() - target) / target;
    out.push_back(check("oracle.gaussian_mass_1pct", rel < 0.01, err_str(rel)));
  }

  {  // oracle-zero: gt poses through projection/rendering vs clean pseudo
    const Aabb ws = default_workspace();
    auto cams = make_camera_rig(5, ws, 4500.0, {2300.0, 2900.0}, 128, 128, 4);
    const SkeletonSpec skel = SkeletonSpec::panoptic15();
    const Pose3DSet gt = sample_poses(skel, 3, default_person_region(), 42);
    const Pose2DSet pseudo = simulate_pseudo_2d(gt, cams, PseudoNoiseModel::clean(), 7);
    const auto t1 = AffineAugmentation::make(25.0, 0.2, Vec2(64, 64));
    const auto t2 = AffineAugmentation::make(-30.0, -0.15, Vec2(64, 64));
    BottleneckPoses bp;
    bp.y1 = ad::constant(gt.joints);
    bp.y2 = ad::constant(gt.joints);
    HyperParams hyper;
    PoseLossFlags flags;
    flags.soft_attention = false;
    flags.hard_attention = false;
    const PoseLossBundle lb = build_pose_loss_inputs(bp, pseudo, cams, t1, t2, nullptr,
                                                     nullptr, hyper, flags, 32, 32);
    out.push_back(check("oracle.zero_heatmap_loss", lb.loss_h < 1e-10, err_str(lb.loss_h)));
    out.push_back(check("oracle.zero_joint_loss", lb.loss_j < 1e-9, err_str(lb.loss_j)));
  }

  return out;
}

std::vector<CheckResult> run_invariant_suite() {
  std::vector<CheckResult> out;
  Rng rng(555);

  {  // affine round trip over 1000 random transforms/points
    double worst = 0.0;
    for (int rep = 0; rep < 1000; ++rep) {
      const auto t = AffineAugmentation::make(rng.uniform(-180.0, 180.0),
                                              rng.uniform(-0.6, 1.5),
                                              Vec2(rng.uniform(0, 128), rng.uniform(0, 128)));
      const auto inv = invert_affine(t);
      const Vec2 p(rng.uniform(-200, 300), rng.uniform(-200, 300));
      worst = std::max(worst, (apply_affine(inv, apply_affine(t, p)) - p).norm());
    }
    out.push_back(check("inv.affine_round_trip", worst < 1e-6, err_str(worst)));
  }

  {  // affine matrix recomposition
    double worst = 0.0;
    for (int rep = 0; rep < 100; ++rep) {
      const double r = rng.uniform(-180.0, 180.0);
      const double s = rng.uniform(-0.6, 1.5);
      const Vec2 pivot(rng.uniform(0, 128), rng.uniform(0, 128));
      const auto t = AffineAugmentation::make(r, s, pivot);
      const auto again = AffineAugmentation::make(t.rotation_deg, t.scale, t.pivot);
      worst = std::max(worst, (t.matrix - again.matrix).cwiseAbs().maxCoeff());
    }
    out.push_back(check("inv.affine_recompose", worst < 1e-9, err_str(worst)));
  }

  {  // unprojection linearity on the pre-clamp accumulator
    const Aabb ws = default_workspace();
    auto cams = make_camera_rig(3, ws, 4500.0, {2300.0, 2900.0}, 64, 64, 19);
    VoxelGridSpec grid;
    grid.center = Vec3(0, 0, 1000);
    grid.extent = Vec3(3000, 3000, 1500);
    grid.resolution = {8, 8, 4};
    const auto t = AffineAugmentation::make(8.0, -0.05, Vec2(32, 32));
    const auto plan = make_unprojection_plan(cams, grid, t, 16, 16);
    Tensor h1 = random_tensor({3, 2, 16, 16}, rng, 0.0, 1.0);
    Tensor h2 = random_tensor({3, 2, 16, 16}, rng, 0.0, 1.0);
    const double alpha = 0.4, beta = 0.5;
    Tensor mix({3, 2, 16, 16});
    for (int64_t i = 0; i < mix.numel(); ++i) mix[i] = alpha * h1[i] + beta * h2[i];
    const Tensor f1 = unproject_with_plan(h1, plan, false).data;
    const Tensor f2 = unproject_with_plan(h2, plan, false).data;
    const Tensor fm = unproject_with_plan(mix, plan, false).data;
    double worst = 0.0;
    for (int64_t i = 0; i < fm.numel(); ++i)
      worst = std::max(worst, std::abs(fm[i] - (alpha * f1[i] + beta * f2[i])));
    out.push_back(check("inv.unproject_linearity", worst < 1e-6, err_str(worst)));
  }

  {  // soft-argmax stays in the grid box; uniform volume hits the center
    VoxelGridSpec grid;
    grid.center = Vec3(100, -50, 900);
    grid.extent = Vec3(1000, 800, 600);
    grid.resolution = {6, 5, 4};
    bool ok = true;
    for (int rep = 0; rep < 50; ++rep) {
      Tensor vol = random_tensor({6, 5, 4}, rng, -3.0, 3.0);
      const Vec3 p = soft_argmax_3d(vol, grid, rng.uniform(0.5, 50.0));
      if (!grid.contains(p, 1e-9)) ok = false;
    }
    Tensor uniform({6, 5, 4}, 0.37);
    const Vec3 c = soft_argmax_3d(uniform, grid, 10.0);
    ok = ok && (c - grid.center).norm() < 1e-9;
    out.push_back(check("inv.soft_argmax_convex", ok, ""));
  }

  {  // rendering translation equivariance for integer shifts
    std::vector<std::pair<Vec2, double>> joints = {{Vec2(20.3, 18.7), 0.9}};
    const Tensor a = render_gaussian_heatmap(joints, 48, 48, 2.5);
    std::vector<std::pair<Vec2, double>> shifted = {{Vec2(25.3, 24.7), 0.9}};
    const Tensor b = render_gaussian_heatmap(shifted, 48, 48, 2.5);
    double worst = 0.0;
    for (int y = 12; y < 36; ++y)
      for (int x = 12; x < 36; ++x)
        worst = std::max(worst, std::abs(a.at(y, x) - b.at(y + 6, x + 5)));
    out.push_back(check("inv.render_translation_equivariance", worst < 1e-6, err_str(worst)));
  }

  {  // Hungarian: constant shifts do not change the assignment
    bool ok = true;
    for (int rep = 0; rep < 50 && ok; ++rep) {
      const int n = 2 + static_cast<int>(rng.uniform_int(0, 3));
      Tensor cost = random_tensor({n, n}, rng, 0.0, 5.0);
      Tensor shifted = cost;
      const double c = rng.uniform(-3.0, 7.0);
      for (int64_t i = 0; i < shifted.numel(); ++i) shifted[i] += c;
      if (hungarian_assign(cost) != hungarian_assign(shifted)) ok = false;
    }
    out.push_back(check("inv.hungarian_shift_invariance", ok, ""));
  }

  {  // hard attention never exceeds the plain mean; equality iff all equal
    bool ok = true;
    for (int rep = 0; rep < 50 && ok; ++rep) {
      const int k = 2 + static_cast<int>(rng.uniform_int(0, 4));
      std::vector<ad::Var> views;
      double sum = 0.0;
      for (int i = 0; i < k; ++i) {
        const double v = rng.uniform(0.0, 4.0);
        sum += v;
        views.push_back(ad::constant(Tensor({1}, {v})));
      }
      const double hard = hard_view_attention_loss(views)->value[0];
      if (hard > sum / k + 1e-12) ok = false;
    }
    std::vector<ad::Var> equal;
    for (int i = 0; i < 4; ++i) equal.push_back(ad::constant(Tensor({1}, {1.3})));
    ok = ok && std::abs(hard_view_attention_loss(equal)->value[0] - 1.3) < 1e-12;
    out.push_back(check("inv.hard_attention_monotone", ok, ""));
  }

  {  // AP monotone in threshold on fuzzed predictions
    const SkeletonSpec skel = SkeletonSpec::panoptic15();
    bool ok = true;
    for (int rep = 0; rep < 10 && ok; ++rep) {
      std::vector<FramePredictions> preds;
      std::vector<Pose3DSet> gts;
      for (int f = 0; f < 4; ++f) {
        Pose3DSet gt = sample_poses(skel, 2, default_person_region(),
                                    Rng::mix(1000, static_cast<uint64_t>(10 * rep + f)));
        FramePredictions fp;
        const int np = static_cast<int>(rng.uniform_int(0, 3));
        fp.poses.joints = Tensor({np, skel.joint_count(), 3});
        for (int64_t i = 0; i < fp.poses.joints.numel(); ++i)
          fp.poses.joints[i] = rng.uniform(-1500.0, 2000.0);
        for (int i = 0; i < np; ++i) fp.scores.push_back(rng.uniform(0.0, 1.0));
        preds.push_back(fp);
        gts.push_back(gt);
      }
      double prev = -1.0;
      for (int t : {25, 50, 100, 150, 300, 600}) {
        const double ap = average_precision(preds, gts, t);
        if (ap + 1e-12 < prev) ok = false;
        prev = ap;
      }
    }
    out.push_back(check("inv.ap_monotone_threshold", ok, ""));
  }

  {  // generator determinism: same seed, bit-identical scenes
    SceneConfig cfg;
    cfg.frames = 2;
    cfg.persons = 2;
    cfg.views = 3;
    cfg.image_width = 64;
    cfg.image_height = 64;
    cfg.seed = 99;
    const SyntheticScene a = generate_scene(cfg);
    const SyntheticScene b = generate_scene(cfg);
    bool ok = a.frames.size() == b.frames.size();
    for (size_t f = 0; ok && f < a.frames.size(); ++f) {
      const auto& fa = a.frames[f];
      const auto& fb = b.frames[f];
      if (!fa.gt_poses.joints.same_shape(fb.gt_poses.joints)) ok = false;
      for (int64_t i = 0; ok && i < fa.gt_poses.joints.numel(); ++i)
        if (fa.gt_poses.joints[i] != fb.gt_poses.joints[i]) ok = false;
      for (size_t v = 0; ok && v < fa.images.size(); ++v)
        for (int64_t i = 0; ok && i < fa.images[v].numel(); ++i)
          if (fa.images[v][i] != fb.images[v][i]) ok = false;
    }
    out.push_back(check("inv.generator_determinism", ok, ""));
  }

  return out;
}

}  // namespace sp3d
