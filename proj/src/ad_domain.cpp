#include <algorithm>
#include <cmath>
#include <memory>

#include "sp3d/autodiff.hpp"
#include "sp3d/parallel.hpp"
#include "sp3d/rendering.hpp"

namespace sp3d::ad {

Var unproject(const Var& heatmaps, const UnprojectionPlan& plan, bool clamp) {
  FeatureVolume fv = unproject_with_plan(heatmaps->value, plan, clamp);
  const int64_t joints = heatmaps->value.dim(1);
  const int64_t nvox = plan.grid.num_voxels();
  const int64_t map_px = static_cast<int64_t>(plan.hq) * plan.wq;
  // Clamp is inactive for in-range heatmaps (sigmoid or rendered), so the
  // gradient passes straight through the view average.
  return make_op(std::move(fv.data), {heatmaps}, [heatmaps, plan, joints, nvox,
                                                  map_px](Node& self) {
    if (!heatmaps->requires_grad) return;
    Tensor& g = heatmaps->ensure_grad();
    const double* dout = self.grad.data();
    parallel_for(static_cast<int64_t>(plan.views) * joints, [&](int64_t b, int64_t e) {
      for (int64_t i = b; i < e; ++i) {
        const int c = static_cast<int>(i / joints);
        const int64_t j = i % joints;
        double* gmap = g.data() + (c * joints + j) * map_px;
        const double* dj = dout + j * nvox;
        for (int64_t v = 0; v < nvox; ++v) {
          const auto& s = plan.sample(c, v);
          if (s.idx[0] < 0) continue;
          const double gv = dj[v] * plan.inv_count[static_cast<size_t>(v)];
          if (gv == 0.0) continue;
          gmap[s.idx[0]] += s.w[0] * gv;
          gmap[s.idx[1]] += s.w[1] * gv;
          gmap[s.idx[2]] += s.w[2] * gv;
          gmap[s.idx[3]] += s.w[3] * gv;
        }
      }
    });
  });
}

Var soft_argmax3d(const Var& volume, const VoxelGridSpec& grid, double beta) {
  if (beta <= 0.0) throw InvalidBeta("beta must be positive");
  const auto& s = volume->value.shape();
  if (s.size() != 4 || s[1] != grid.resolution[0] || s[2] != grid.resolution[1] ||
      s[3] != grid.resolution[2])
    throw ShapeMismatch("soft_argmax3d expects (J, X, Y, Z) matching the grid");
  const int64_t joints = s[0];
  const int64_t nvox = grid.num_voxels();
  Tensor out({joints, 3});
  auto probs = std::make_shared<std::vector<double>>(static_cast<size_t>(joints * nvox));
  for (int64_t j = 0; j < joints; ++j) {
    const double* vol = volume->value.data() + j * nvox;
    double m = vol[0];
    for (int64_t v = 1; v < nvox; ++v) m = std::max(m, vol[v]);
    double z = 0.0;
    double* pj = probs->data() + j * nvox;
    for (int64_t v = 0; v < nvox; ++v) {
      pj[v] = std::exp(beta * (vol[v] - m));
      z += pj[v];
    }
    Vec3 acc = Vec3::Zero();
    for (int64_t v = 0; v < nvox; ++v) {
      pj[v] /= z;
      acc += pj[v] * grid.voxel_center_flat(v);
    }
    out.at(j, 0) = acc.x();
    out.at(j, 1) = acc.y();
    out.at(j, 2) = acc.z();
  }
  Tensor saved_out = out;
  return make_op(std::move(out), {volume},
                 [volume, grid, joints, nvox, beta, probs, saved_out](Node& self) {
                   if (!volume->requires_grad) return;
                   Tensor& g = volume->ensure_grad();
                   for (int64_t j = 0; j < joints; ++j) {
                     const double* pj = probs->data() + j * nvox;
                     double* gj = g.data() + j * nvox;
                     const Vec3 mean(saved_out.at(j, 0), saved_out.at(j, 1),
                                     saved_out.at(j, 2));
                     const Vec3 dout(self.grad.at(j, 0), self.grad.at(j, 1),
                                     self.grad.at(j, 2));
                     for (int64_t v = 0; v < nvox; ++v) {
                       const Vec3 c = grid.voxel_center_flat(v);
                       gj[v] += beta * pj[v] * (c - mean).dot(dout);
                     }
                   }
                 });
}

Var project_to_view(const Var& points, const CameraCalibration& cam,
                    const AffineAugmentation& t_aug, std::vector<uint8_t>* visibility) {
  const auto& s = points->value.shape();
  if (s.size() != 2 || s[1] != 3) throw ShapeMismatch("project_to_view expects (N, 3)");
  const int64_t n = s[0];
  Tensor out({n, 2});
  auto jac = std::make_shared<std::vector<Eigen::Matrix<double, 2, 3>>>(
      static_cast<size_t>(n));
  auto in_front = std::make_shared<std::vector<uint8_t>>(static_cast<size_t>(n), 0);
  if (visibility) visibility->assign(static_cast<size_t>(n), 0);
  const Eigen::Matrix2d lin = t_aug.matrix.block<2, 2>(0, 0);
  const Vec2 off = t_aug.matrix.col(2);
  for (int64_t i = 0; i < n; ++i) {
    const Vec3 x(points->value.at(i, 0), points->value.at(i, 1), points->value.at(i, 2));
    const Vec3 xc = cam.R * x + cam.t;
    if (xc.z() <= kMinCameraDepthMm) {
      out.at(i, 0) = kInvisibleSentinel;
      out.at(i, 1) = kInvisibleSentinel;
      continue;
    }
    (*in_front)[static_cast<size_t>(i)] = 1;
    const Vec3 uvw = cam.K * xc;
    const Vec2 uv(uvw.x() / uvw.z(), uvw.y() / uvw.z());
    const Vec2 aug = lin * uv + off;
    out.at(i, 0) = aug.x();
    out.at(i, 1) = aug.y();
    (*jac)[static_cast<size_t>(i)] = lin * project_point_jacobian(cam, x);
    if (visibility && aug.x() >= 0.0 && aug.x() < cam.width && aug.y() >= 0.0 &&
        aug.y() < cam.height)
      (*visibility)[static_cast<size_t>(i)] = 1;
  }
  return make_op(std::move(out), {points}, [points, jac, in_front, n](Node& self) {
    if (!points->requires_grad) return;
    Tensor& g = points->ensure_grad();
    for (int64_t i = 0; i < n; ++i) {
      if (!(*in_front)[static_cast<size_t>(i)]) continue;
      const Vec2 dout(self.grad.at(i, 0), self.grad.at(i, 1));
      const Vec3 dx = (*jac)[static_cast<size_t>(i)].transpose() * dout;
      g.at(i, 0) += dx.x();
      g.at(i, 1) += dx.y();
      g.at(i, 2) += dx.z();
    }
  });
}

Var render_pose_channels(const Var& joints_img, const std::vector<double>& weights,
                         const std::vector<uint8_t>& active, int persons, int joints,
                         double sigma, int hq, int wq) {
  if (sigma <= 0.0) throw InvalidSigma("sigma must be positive");
  const auto& s = joints_img->value.shape();
  if (s.size() != 2 || s[1] != 2 || s[0] != static_cast<int64_t>(persons) * joints)
    throw ShapeMismatch("render_pose_channels expects (P*J, 2)");
  const int64_t map_px = static_cast<int64_t>(hq) * wq;
  Tensor out({joints, hq, wq});
  auto winners =
      std::make_shared<std::vector<int32_t>>(static_cast<size_t>(joints * map_px));
  auto hm_xy = std::make_shared<std::vector<double>>(
      static_cast<size_t>(persons) * static_cast<size_t>(joints) * 2);
  for (int64_t i = 0; i < static_cast<int64_t>(persons) * joints; ++i) {
    (*hm_xy)[2 * i] = joints_img->value.at(i, 0) / kHeatmapStride;
    (*hm_xy)[2 * i + 1] = joints_img->value.at(i, 1) / kHeatmapStride;
  }
  parallel_for(joints, [&](int64_t jb, int64_t je) {
    std::vector<double> xy(static_cast<size_t>(persons) * 2);
    std::vector<double> w(static_cast<size_t>(persons));
    std::vector<uint8_t> act(static_cast<size_t>(persons));
    std::vector<int32_t> local(static_cast<size_t>(map_px));
    for (int64_t j = jb; j < je; ++j) {
      for (int p = 0; p < persons; ++p) {
        const int64_t idx = static_cast<int64_t>(p) * joints + j;
        xy[2 * p] = (*hm_xy)[2 * idx];
        xy[2 * p + 1] = (*hm_xy)[2 * idx + 1];
        w[p] = weights[static_cast<size_t>(idx)];
        act[p] = active[static_cast<size_t>(idx)];
      }
      detail::render_gaussian_channel(xy.data(), w.data(), act.data(), persons, sigma,
                                      hq, wq, out.data() + j * map_px, local.data());
      // Store winners as rows into the (P*J, 2) joint tensor.
      int32_t* wj = winners->data() + j * map_px;
      for (int64_t k = 0; k < map_px; ++k)
        wj[k] = local[static_cast<size_t>(k)] < 0
                    ? -1
                    : static_cast<int32_t>(local[static_cast<size_t>(k)] * joints + j);
    }
  });
  Tensor saved = out;
  const double inv_s2 = 1.0 / (sigma * sigma);
  return make_op(
      std::move(out), {joints_img},
      [joints_img, winners, hm_xy, saved, joints, map_px, wq, inv_s2](Node& self) {
        if (!joints_img->requires_grad) return;
        Tensor& g = joints_img->ensure_grad();
        // Channel j only references joint rows p*J+j, so channel-parallel
        // accumulation touches disjoint rows.
        parallel_for(joints, [&](int64_t jb, int64_t je) {
          for (int64_t j = jb; j < je; ++j) {
            const int32_t* wj = winners->data() + j * map_px;
            const double* val = saved.data() + j * map_px;
            const double* dval = self.grad.data() + j * map_px;
            for (int64_t k = 0; k < map_px; ++k) {
              const int32_t row = wj[k];
              if (row < 0 || dval[k] == 0.0) continue;
              const double px = static_cast<double>(k % wq);
              const double py = static_cast<double>(k / wq);
              const double x = (*hm_xy)[2 * row], y = (*hm_xy)[2 * row + 1];
              // d/dx of w*exp(-((px-x)^2+(py-y)^2)/(2s^2)) = val*(px-x)/s^2,
              // then the 1/stride factor from image -> heatmap px.
              const double c = dval[k] * val[k] * inv_s2 / kHeatmapStride;
              g.at(row, 0) += c * (px - x);
              g.at(row, 1) += c * (py - y);
            }
          }
        });
      });
}

Var masked_abs_sum(const Var& pred, const Tensor& target, const Tensor& mask) {
  const auto& s = pred->value.shape();
  if (s.size() != 2 || s[1] != 2) throw ShapeMismatch("masked_abs_sum expects (N, 2)");
  check_same_shape(pred->value, target, "masked_abs_sum target");
  if (mask.numel() != s[0]) throw ShapeMismatch("masked_abs_sum mask size");
  const int64_t n = s[0];
  double acc = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    if (mask[i] == 0.0) continue;
    acc += std::abs(pred->value.at(i, 0) - target.at(i, 0)) +
           std::abs(pred->value.at(i, 1) - target.at(i, 1));
  }
  return make_op(Tensor({1}, {acc}), {pred}, [pred, target, mask, n](Node& self) {
    if (!pred->requires_grad) return;
    Tensor& g = pred->ensure_grad();
    const double s = self.grad[0];
    for (int64_t i = 0; i < n; ++i) {
      if (mask[i] == 0.0) continue;
      for (int k = 0; k < 2; ++k) {
        const double d = pred->value.at(i, k) - target.at(i, k);
        g.at(i, k) += s * (d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0));
      }
    }
  });
}

}  // namespace sp3d::ad
