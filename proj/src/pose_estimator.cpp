#include "sp3d/pose_estimator.hpp"

#include <cmath>

#include "sp3d/losses.hpp"
#include "sp3d/rendering.hpp"

namespace sp3d {

namespace {

VoxelGridSpec fine_grid_at(const RootProposal& proposal, const VoxelGridSpec& fine_template,
                           const VoxelGridSpec& coarse_grid) {
  if (!coarse_grid.contains(proposal.position))
    throw IndexOutOfRange("proposal outside the coarse grid");
  VoxelGridSpec g = fine_template;
  g.center = proposal.position;
  return g;
}

// Row i of a (B, ...) batched tensor as its own (...) node.
ad::Var slice_row(const ad::Var& batched, int64_t i) {
  const auto& s = batched->value.shape();
  int64_t inner = 1;
  for (size_t d = 1; d < s.size(); ++d) inner *= s[d];
  auto flat = ad::reshape(batched, {1, s[0], inner});
  auto row = ad::slice_channels(flat, i, i + 1);
  return ad::reshape(row, std::vector<int64_t>(s.begin() + 1, s.end()));
}

}  // namespace

FeatureVolume person_feature_volume(const RootProposal& proposal, const Tensor& heatmaps,
                                    const std::vector<CameraCalibration>& cams,
                                    const AffineAugmentation& t,
                                    const VoxelGridSpec& fine_template,
                                    const VoxelGridSpec& coarse_grid) {
  const VoxelGridSpec grid = fine_grid_at(proposal, fine_template, coarse_grid);
  return unproject_heatmaps(heatmaps, cams, grid, t);
}

BottleneckPoses estimate_bottleneck_poses(const std::vector<RootProposal>& proposals,
                                          const ad::Var& heatmaps1, const ad::Var& heatmaps2,
                                          const std::vector<CameraCalibration>& cams,
                                          const AffineAugmentation& t1,
                                          const AffineAugmentation& t2, ModelBundle& bundle,
                                          bool bypass_pose_net) {
  BottleneckPoses out;
  out.proposals = proposals;
  const int64_t joints = bundle.config.joints;
  const int p = static_cast<int>(proposals.size());
  if (p == 0) {
    out.y1 = ad::constant(Tensor({0, joints, 3}));
    out.y2 = ad::constant(Tensor({0, joints, 3}));
    return out;
  }
  const int hq = static_cast<int>(heatmaps1->value.dim(2));
  const int wq = static_cast<int>(heatmaps1->value.dim(3));

  std::vector<ad::Var> volumes;
  volumes.reserve(static_cast<size_t>(2 * p));
  out.fine_grids.reserve(static_cast<size_t>(p));
  for (int i = 0; i < p; ++i) {
    const VoxelGridSpec grid =
        fine_grid_at(proposals[static_cast<size_t>(i)], bundle.fine_grid_template,
                     bundle.coarse_grid);
    out.fine_grids.push_back(grid);
    volumes.push_back(
        ad::unproject(heatmaps1, make_unprojection_plan(cams, grid, t1, hq, wq)));
  }
  for (int i = 0; i < p; ++i)
    volumes.push_back(ad::unproject(
        heatmaps2, make_unprojection_plan(cams, out.fine_grids[static_cast<size_t>(i)],
                                          t2, hq, wq)));

  ad::Var batch = ad::stack_rows(volumes);  // (2P, J, Xf, Yf, Zf)
  if (!bypass_pose_net) batch = bundle.pose_net_3d.forward(batch);

  std::vector<ad::Var> y1_rows, y2_rows;
  for (int i = 0; i < p; ++i) {
    const auto& grid = out.fine_grids[static_cast<size_t>(i)];
    y1_rows.push_back(
        ad::soft_argmax3d(slice_row(batch, i), grid, bundle.hyper.beta));
    y2_rows.push_back(
        ad::soft_argmax3d(slice_row(batch, p + i), grid, bundle.hyper.beta));
  }
  out.y1 = ad::stack_rows(y1_rows);  // (P, J, 3)
  out.y2 = ad::stack_rows(y2_rows);
  return out;
}

ViewProjection cross_view_project(const ad::Var& poses,
                                  const std::vector<CameraCalibration>& cams,
                                  const AffineAugmentation& t_to) {
  const auto& s = poses->value.shape();
  if (s.size() != 3 || s[2] != 3) throw ShapeMismatch("cross_view_project expects (P, J, 3)");
  const int64_t p = s[0], j = s[1];
  ViewProjection out;
  auto flat = ad::reshape(poses, {p * j, 3});
  for (const auto& cam : cams) {
    std::vector<uint8_t> vis;
    out.per_view.push_back(ad::project_to_view(flat, cam, t_to, &vis));
    Tensor v({p, j});
    for (int64_t i = 0; i < p * j; ++i) v[i] = vis[static_cast<size_t>(i)] ? 1.0 : 0.0;
    out.visibility.push_back(std::move(v));
  }
  return out;
}

Pose2DSet transform_pseudo_to_branch(const Pose2DSet& pseudo,
                                     const std::vector<CameraCalibration>& cams,
                                     const AffineAugmentation& t,
                                     const PoseLossFlags& flags) {
  Pose2DSet out;
  out.joints = Tensor(pseudo.joints.shape(), kInvisibleSentinel);
  out.confidence = pseudo.confidence;
  out.visibility = Tensor(pseudo.visibility.shape());
  for (int64_t c = 0; c < pseudo.view_count(); ++c) {
    const auto& cam = cams[static_cast<size_t>(c)];
    for (int64_t p = 0; p < pseudo.person_count(); ++p) {
      for (int64_t j = 0; j < pseudo.joint_count(); ++j) {
        if (!pseudo.visible(c, p, j)) continue;
        if (flags.hard_labels &&
            pseudo.confidence.at(c, p, j) < flags.hard_label_threshold)
          continue;
        const Vec2 uv(pseudo.joints.at(c, p, j, 0), pseudo.joints.at(c, p, j, 1));
        const Vec2 aug = apply_affine(t, uv);
        out.joints.at(c, p, j, 0) = aug.x();
        out.joints.at(c, p, j, 1) = aug.y();
        const bool inside = aug.x() >= 0.0 && aug.x() < cam.width && aug.y() >= 0.0 &&
                            aug.y() < cam.height;
        out.visibility.at(c, p, j) = inside ? 1.0 : 0.0;
      }
    }
  }
  return out;
}

namespace {

struct BranchLoss {
  ad::Var heatmap_term;
  std::optional<ad::Var> joint_term;
  bool any_matches = false;
};

BranchLoss build_branch(const ad::Var& poses, const Pose2DSet& pseudo_branch,
                        const std::vector<CameraCalibration>& cams,
                        const AffineAugmentation& t, const ad::Var* attn,
                        const HyperParams& hyper, const PoseLossFlags& flags, int hq,
                        int wq) {
  const int64_t p = poses->value.dim(0);
  const int64_t j = poses->value.dim(1);
  const int64_t c_views = static_cast<int64_t>(cams.size());

  ViewProjection proj = cross_view_project(poses, cams, t);

  // Rendered prediction heatmaps, all views.
  std::vector<ad::Var> view_maps;
  view_maps.reserve(static_cast<size_t>(c_views));
  const std::vector<double> unit_w(static_cast<size_t>(p * j), 1.0);
  for (int64_t c = 0; c < c_views; ++c) {
    std::vector<uint8_t> active(static_cast<size_t>(p * j), 0);
    for (int64_t i = 0; i < p * j; ++i)
      active[static_cast<size_t>(i)] = proj.visibility[static_cast<size_t>(c)][i] != 0.0;
    view_maps.push_back(ad::render_pose_channels(proj.per_view[static_cast<size_t>(c)],
                                                 unit_w, active, static_cast<int>(p),
                                                 static_cast<int>(j), hyper.sigma_hm, hq,
                                                 wq));
  }
  ad::Var h_rend = ad::stack_rows(view_maps);  // (C, J, Hq, Wq)
  const Tensor h_pseudo = render_pose_heatmaps(pseudo_branch, hq, wq, hyper.sigma_hm);

  BranchLoss out;
  if (flags.soft_attention && attn)
    out.heatmap_term = attentive_heatmap_loss(h_rend, h_pseudo, *attn);
  else
    out.heatmap_term = ad::mse(h_rend, ad::constant(h_pseudo));

  if (!flags.use_joint_loss || p == 0) return out;

  // Per-view Hungarian assignment on coordinate values, then the L1 terms.
  std::vector<ad::Var> view_sums;
  std::vector<int64_t> view_counts;
  for (int64_t c = 0; c < c_views; ++c) {
    Tensor pred_vals({p, j, 2});
    const auto& pv = proj.per_view[static_cast<size_t>(c)]->value;
    std::copy_n(pv.data(), pv.numel(), pred_vals.data());
    Tensor pseudo_vals({pseudo_branch.person_count(), j, 2});
    Tensor pseudo_vis({pseudo_branch.person_count(), j});
    for (int64_t q = 0; q < pseudo_branch.person_count(); ++q)
      for (int64_t jj = 0; jj < j; ++jj) {
        pseudo_vals.at(q, jj, 0) = pseudo_branch.joints.at(c, q, jj, 0);
        pseudo_vals.at(q, jj, 1) = pseudo_branch.joints.at(c, q, jj, 1);
        pseudo_vis.at(q, jj) = pseudo_branch.visibility.at(c, q, jj);
      }
    const ViewAssignment assign = match_poses_per_view(
        pred_vals, proj.visibility[static_cast<size_t>(c)], pseudo_vals, pseudo_vis);
    if (assign.pairs.empty()) continue;
    auto pred_var = ad::reshape(proj.per_view[static_cast<size_t>(c)], {p, j, 2});
    auto [sum, count] = matched_l1_sum(pred_var, proj.visibility[static_cast<size_t>(c)],
                                       pseudo_vals, pseudo_vis, assign.pairs);
    if (count == 0) continue;
    view_sums.push_back(sum);
    view_counts.push_back(count);
  }
  if (view_sums.empty()) return out;
  out.any_matches = true;
  if (flags.hard_attention && view_sums.size() >= 2) {
    std::vector<ad::Var> view_means;
    for (size_t i = 0; i < view_sums.size(); ++i)
      view_means.push_back(
          ad::scale(view_sums[i], 1.0 / static_cast<double>(view_counts[i])));
    out.joint_term = hard_view_attention_loss(view_means);
  } else {
    int64_t total = 0;
    for (int64_t c : view_counts) total += c;
    out.joint_term = ad::linear_combination(
        view_sums, std::vector<double>(view_sums.size(), 1.0 / static_cast<double>(total)));
  }
  return out;
}

}  // namespace

PoseLossBundle build_pose_loss_inputs(const BottleneckPoses& bottleneck,
                                      const Pose2DSet& pseudo_2d,
                                      const std::vector<CameraCalibration>& cams,
                                      const AffineAugmentation& t1,
                                      const AffineAugmentation& t2,
                                      const ad::Var* attn1, const ad::Var* attn2,
                                      const HyperParams& hyper, const PoseLossFlags& flags,
                                      int hq, int wq) {
  // Cross-affine pairing: Y2 renders under t1 against the t1 pseudo labels
  // and vice versa; the same-branch variant exists for the ablation only.
  const ad::Var& into_t1 = flags.cross_affine_view ? bottleneck.y2 : bottleneck.y1;
  const ad::Var& into_t2 = flags.cross_affine_view ? bottleneck.y1 : bottleneck.y2;

  const Pose2DSet pseudo1 = transform_pseudo_to_branch(pseudo_2d, cams, t1, flags);
  const Pose2DSet pseudo2 = transform_pseudo_to_branch(pseudo_2d, cams, t2, flags);

  BranchLoss b1 = build_branch(into_t1, pseudo1, cams, t1, attn1, hyper, flags, hq, wq);
  BranchLoss b2 = build_branch(into_t2, pseudo2, cams, t2, attn2, hyper, flags, hq, wq);

  PoseLossBundle out;
  ad::Var l_h = ad::add(b1.heatmap_term, b2.heatmap_term);
  out.loss_h = l_h->value[0];

  std::optional<ad::Var> l_j;
  if (b1.joint_term && b2.joint_term)
    l_j = ad::add(*b1.joint_term, *b2.joint_term);
  else if (b1.joint_term)
    l_j = b1.joint_term;
  else if (b2.joint_term)
    l_j = b2.joint_term;
  out.no_matches = flags.use_joint_loss && !b1.any_matches && !b2.any_matches;
  if (l_j) out.loss_j = (*l_j)->value[0];

  std::optional<ad::Var> l_attn;
  if (flags.soft_attention && attn1 && attn2)
    l_attn = ad::add(attention_regularizer(*attn1), attention_regularizer(*attn2));
  if (l_attn) out.loss_attn = (*l_attn)->value[0];

  out.total = total_pose_loss(l_h, l_j ? &*l_j : nullptr, l_attn ? &*l_attn : nullptr,
                              hyper);
  return out;
}

}  // namespace sp3d
