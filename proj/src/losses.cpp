#include "sp3d/losses.hpp"

#include <cmath>

#include "sp3d/hungarian.hpp"

namespace sp3d {

namespace {
constexpr double kUnmatchableCost = 1e8;
}

ad::Var root_syn_loss(const ad::Var& g_pred, const Tensor& g_target) {
  return ad::mse(g_pred, ad::constant(g_target));
}

ad::Var root_consistency_loss(const ad::Var& g0, const ad::Var& g1, const ad::Var& g2) {
  return ad::add(ad::mse(g0, g1), ad::mse(g0, g2));
}

ad::Var pose_heatmap_loss(const ad::Var& h1_rend, const Tensor& h1_pseudo,
                          const ad::Var& h2_rend, const Tensor& h2_pseudo) {
  return ad::add(ad::mse(h1_rend, ad::constant(h1_pseudo)),
                 ad::mse(h2_rend, ad::constant(h2_pseudo)));
}

ad::Var attentive_heatmap_loss(const ad::Var& h_rend, const Tensor& h_pseudo,
                               const ad::Var& attention) {
  check_same_shape(h_rend->value, h_pseudo, "attentive_heatmap_loss");
  check_same_shape(h_rend->value, attention->value, "attentive_heatmap_loss attention");
  return ad::mean_all(
      ad::mul(attention, ad::square(ad::sub(h_rend, ad::constant(h_pseudo)))));
}

ad::Var attention_regularizer(const ad::Var& attention) {
  return ad::mse(attention, ad::constant(Tensor(attention->value.shape(), 1.0)));
}

ViewAssignment match_poses_per_view(const Tensor& pred, const Tensor& pred_vis,
                                    const Tensor& pseudo, const Tensor& pseudo_vis) {
  ViewAssignment out;
  const int64_t p = pred.numel() == 0 ? 0 : pred.dim(0);
  const int64_t q = pseudo.numel() == 0 ? 0 : pseudo.dim(0);
  if (p == 0 || q == 0) {
    out.cost = Tensor({p, q});
    return out;
  }
  const int64_t j = pred.dim(1);
  if (pseudo.dim(1) != j) throw ShapeMismatch("joint count mismatch in matching");
  out.cost = Tensor({p, q});
  for (int64_t i = 0; i < p; ++i) {
    for (int64_t k = 0; k < q; ++k) {
      double acc = 0.0;
      int64_t terms = 0;
      for (int64_t jj = 0; jj < j; ++jj) {
        if (pred_vis.at(i, jj) == 0.0 || pseudo_vis.at(k, jj) == 0.0) continue;
        acc += std::abs(pred.at(i, jj, 0) - pseudo.at(k, jj, 0)) +
               std::abs(pred.at(i, jj, 1) - pseudo.at(k, jj, 1));
        terms += 2;
      }
      out.cost.at(i, k) = terms > 0 ? acc / static_cast<double>(terms) : kUnmatchableCost;
    }
  }
  out.pairs = hungarian_assign(out.cost);
  // Pairs with no shared visible joint carry no information.
  std::erase_if(out.pairs, [&](const std::pair<int, int>& pr) {
    return out.cost.at(pr.first, pr.second) >= kUnmatchableCost;
  });
  return out;
}

std::pair<ad::Var, int64_t> matched_l1_sum(const ad::Var& pred_joints,
                                           const Tensor& pred_vis, const Tensor& pseudo,
                                           const Tensor& pseudo_vis,
                                           const std::vector<std::pair<int, int>>& pairs) {
  const auto& s = pred_joints->value.shape();
  if (s.size() != 3 || s[2] != 2) throw ShapeMismatch("matched_l1_sum expects (P, J, 2)");
  const int64_t p = s[0], j = s[1];
  // Flatten to (P*J, 2) and mask the matched, mutually visible joints; the
  // pseudo targets are re-ordered so row i*J+jj faces its matched person.
  Tensor target({p * j, 2});
  Tensor mask({p * j});
  int64_t terms = 0;
  for (const auto& [i, k] : pairs) {
    for (int64_t jj = 0; jj < j; ++jj) {
      if (pred_vis.at(i, jj) == 0.0 || pseudo_vis.at(k, jj) == 0.0) continue;
      target.at(i * j + jj, 0) = pseudo.at(k, jj, 0);
      target.at(i * j + jj, 1) = pseudo.at(k, jj, 1);
      mask[i * j + jj] = 1.0;
      terms += 2;
    }
  }
  auto flat = ad::reshape(pred_joints, {p * j, 2});
  return {ad::masked_abs_sum(flat, target, mask), terms};
}

ad::Var hard_view_attention_loss(const std::vector<ad::Var>& per_view_l1) {
  const int k = static_cast<int>(per_view_l1.size());
  if (k < 2) throw TooFewViews("hard attention needs at least 2 views");
  int worst = 0;
  for (int i = 1; i < k; ++i)
    if (per_view_l1[static_cast<size_t>(i)]->value[0] >
        per_view_l1[static_cast<size_t>(worst)]->value[0])
      worst = i;
  std::vector<ad::Var> kept;
  kept.reserve(static_cast<size_t>(k) - 1);
  for (int i = 0; i < k; ++i)
    if (i != worst) kept.push_back(per_view_l1[static_cast<size_t>(i)]);
  return ad::linear_combination(kept,
                                std::vector<double>(kept.size(), 1.0 / (k - 1)));
}

ad::Var total_pose_loss(const ad::Var& heatmap_term, const ad::Var* joint_term,
                        const ad::Var* attn_term, const HyperParams& hyper) {
  std::vector<ad::Var> terms{heatmap_term};
  std::vector<double> coeffs{1.0};
  if (joint_term) {
    terms.push_back(*joint_term);
    coeffs.push_back(hyper.lambda);
  }
  if (attn_term) {
    terms.push_back(*attn_term);
    coeffs.push_back(hyper.sigma_attn);
  }
  return ad::linear_combination(terms, coeffs);
}

double mse_value(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "mse_value");
  double acc = 0.0;
  for (int64_t i = 0; i < a.numel(); ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return a.numel() > 0 ? acc / a.numel() : 0.0;
}

}  // namespace sp3d
