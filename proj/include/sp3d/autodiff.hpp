#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "sp3d/geometry.hpp"
#include "sp3d/tensor.hpp"

namespace sp3d::ad {

// Tape-free reverse-mode autodiff over Tensor. Graphs are built eagerly on
// one thread (kernels may parallelize internally); backward() walks reachable
// nodes in reverse creation order, which is a valid topological order.
struct Node;
using Var = std::shared_ptr<Node>;

struct Node {
  Tensor value;
  Tensor grad;
  bool requires_grad = false;
  uint64_t order = 0;
  std::vector<Var> parents;
  std::function<void(Node&)> backward_fn;

  Tensor& ensure_grad() {
    if (!grad.same_shape(value)) grad = Tensor(value.shape());
    return grad;
  }
  bool has_grad() const { return grad.same_shape(value); }
};

Var constant(Tensor value);
Var parameter(Tensor value);
Var make_op(Tensor value, std::vector<Var> parents, std::function<void(Node&)> backward_fn);

// While a guard is alive, new ops record no parents or backward closures, so
// eval-mode forwards free intermediates eagerly and never build a tape.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;

 private:
  bool prev_;
};
bool grad_enabled();

// Seeds d(root)/d(root) = 1 (root must be scalar unless seed given) and
// accumulates into every reachable node with requires_grad.
void backward(const Var& root);
void backward(const Var& root, const Tensor& seed);

// ---- elementwise / reductions ----
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);
Var mul_const(const Var& a, const Tensor& m);  // mask / constant weights
Var square(const Var& a);
Var abs_val(const Var& a);
Var leaky_relu(const Var& a, double slope = 0.1);
Var sigmoid(const Var& a);
Var sum_all(const Var& a);
Var mean_all(const Var& a);
// mean((a - b)^2); b may be a constant node.
Var mse(const Var& a, const Var& b);
// sum_i coeffs[i] * scalars[i]; each input must be a scalar node.
Var linear_combination(const std::vector<Var>& scalars, const std::vector<double>& coeffs);

// ---- shape ----
Var concat_channels(const Var& a, const Var& b);      // (B, C*, sp...) along dim 1
Var slice_channels(const Var& x, int64_t c0, int64_t c1);
Var stack_rows(const std::vector<Var>& xs);           // n x (S...) -> (n, S...)
Var reshape(const Var& x, std::vector<int64_t> shape);

// ---- neural network ----
// x (B, Ci, H, W), w (Co, Ci, kh, kw), b (Co).
Var conv2d(const Var& x, const Var& w, const Var& b, int stride, int pad);
// x (B, Ci, H, W), w (Ci, Co, kh, kw), b (Co); output (B, Co, (H-1)s-2p+k, ...).
Var conv_transpose2d(const Var& x, const Var& w, const Var& b, int stride, int pad);
// x (B, Ci, X, Y, Z), w (Co, Ci, k, k, k), b (Co).
Var conv3d(const Var& x, const Var& w, const Var& b, int stride, int pad);
Var upsample_nearest2x_3d(const Var& x);

// ---- domain ops ----
// Heatmaps (C, J, Hq, Wq) -> volume (J, X, Y, Z) through a precomputed plan.
// Linear in the heatmaps; the [0,1] clamp is a no-op for in-range inputs so
// the gradient passes through unchanged.
Var unproject(const Var& heatmaps, const UnprojectionPlan& plan, bool clamp = true);

// Per-joint soft-argmax over a (J, X, Y, Z) volume -> (J, 3) world mm.
Var soft_argmax3d(const Var& volume, const VoxelGridSpec& grid, double beta);

// World points (N, 3) -> augmented-image pixels (N, 2) via cam then t_aug.
// visibility[i]=1 iff in front of the camera and inside [0,W)x[0,H) of the
// augmented image; invisible points get sentinel coords and zero gradient.
Var project_to_view(const Var& points, const CameraCalibration& cam,
                    const AffineAugmentation& t_aug, std::vector<uint8_t>* visibility);

// Joints (N, 2) in augmented-image px (divided by the heatmap stride inside),
// weights/active flags are data. Renders J channels of per-pixel max Gaussians
// for one view: persons p with active[p*J+j] contribute to channel j.
Var render_pose_channels(const Var& joints_img, const std::vector<double>& weights,
                         const std::vector<uint8_t>& active, int persons, int joints,
                         double sigma, int hq, int wq);

// Sum of |pred - target| over entries where mask is nonzero (pred (N, 2)).
Var masked_abs_sum(const Var& pred, const Tensor& target, const Tensor& mask);

}  // namespace sp3d::ad
