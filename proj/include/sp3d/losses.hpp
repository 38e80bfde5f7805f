#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "sp3d/autodiff.hpp"
#include "sp3d/hyper.hpp"
#include "sp3d/tensor.hpp"

namespace sp3d {

// Training objectives. All L2 losses are means over elements so the lambda /
// sigma weights transfer across resolutions.

ad::Var root_syn_loss(const ad::Var& g_pred, const Tensor& g_target);
ad::Var root_consistency_loss(const ad::Var& g0, const ad::Var& g1, const ad::Var& g2);
ad::Var pose_heatmap_loss(const ad::Var& h1_rend, const Tensor& h1_pseudo,
                          const ad::Var& h2_rend, const Tensor& h2_pseudo);
// mean(A (x) (H - H*)^2); A == 1 reduces to the plain branch MSE.
ad::Var attentive_heatmap_loss(const ad::Var& h_rend, const Tensor& h_pseudo,
                               const ad::Var& attention);
ad::Var attention_regularizer(const ad::Var& attention);

// Hungarian matching of predicted persons to pseudo persons in one view.
// cost[i][k] = mean |pred_i - pseudo_k| over joints visible on both sides
// (both coordinates); pairs with no shared visible joint get a large cost.
struct ViewAssignment {
  std::vector<std::pair<int, int>> pairs;  // (pred person, pseudo person)
  Tensor cost;                             // (P, Q)
};
ViewAssignment match_poses_per_view(const Tensor& pred, const Tensor& pred_vis,
                                    const Tensor& pseudo, const Tensor& pseudo_vis);

// Mean |pred - pseudo| over matched joints visible on both sides, one view.
// Returns the sum node and the term count (2 per visible matched joint).
std::pair<ad::Var, int64_t> matched_l1_sum(const ad::Var& pred_joints,
                                           const Tensor& pred_vis, const Tensor& pseudo,
                                           const Tensor& pseudo_vis,
                                           const std::vector<std::pair<int, int>>& pairs);

// Drops the single worst view (first index on ties) and averages the rest.
ad::Var hard_view_attention_loss(const std::vector<ad::Var>& per_view_l1);

// heatmap + lambda * joint + sigma * attention; null terms are omitted
// (Eq. 6 form when the attention term is absent).
ad::Var total_pose_loss(const ad::Var& heatmap_term, const ad::Var* joint_term,
                        const ad::Var* attn_term, const HyperParams& hyper);

// Plain-value convenience wrappers used by tests and reporting.
double mse_value(const Tensor& a, const Tensor& b);

}  // namespace sp3d
