#include "sp3d/rendering.hpp"

#include <algorithm>
#include <cmath>

#include "sp3d/parallel.hpp"

namespace sp3d {

namespace detail {

void render_gaussian_channel(const double* xy, const double* weight,
                             const uint8_t* active, int n, double sigma, int hq,
                             int wq, double* out, int32_t* winners) {
  std::fill(out, out + static_cast<int64_t>(hq) * wq, 0.0);
  if (winners) std::fill(winners, winners + static_cast<int64_t>(hq) * wq, -1);
  const double radius = kGaussianWindowSigmas * sigma;
  const double inv2s2 = 1.0 / (2.0 * sigma * sigma);
  for (int i = 0; i < n; ++i) {
    if (active && !active[i]) continue;
    const double x = xy[2 * i], y = xy[2 * i + 1];
    const double w = weight ? weight[i] : 1.0;
    if (w <= 0.0) continue;
    const int x0 = std::max(0, static_cast<int>(std::ceil(x - radius)));
    const int x1 = std::min(wq - 1, static_cast<int>(std::floor(x + radius)));
    const int y0 = std::max(0, static_cast<int>(std::ceil(y - radius)));
    const int y1 = std::min(hq - 1, static_cast<int>(std::floor(y + radius)));
    for (int py = y0; py <= y1; ++py) {
      const double dy = py - y;
      double* row = out + static_cast<int64_t>(py) * wq;
      int32_t* wrow = winners ? winners + static_cast<int64_t>(py) * wq : nullptr;
      for (int px = x0; px <= x1; ++px) {
        const double dx = px - x;
        const double v = w * std::exp(-(dx * dx + dy * dy) * inv2s2);
        if (v > row[px]) {
          row[px] = v;
          if (wrow) wrow[px] = i;
        }
      }
    }
  }
}

}  // namespace detail

Tensor render_gaussian_heatmap(const std::vector<std::pair<Vec2, double>>& joints,
                               int hq, int wq, double sigma) {
  if (sigma <= 0.0) throw InvalidSigma("sigma must be positive");
  Tensor out({hq, wq});
  std::vector<double> xy(joints.size() * 2);
  std::vector<double> w(joints.size());
  for (size_t i = 0; i < joints.size(); ++i) {
    xy[2 * i] = joints[i].first.x();
    xy[2 * i + 1] = joints[i].first.y();
    w[i] = joints[i].second;
  }
  detail::render_gaussian_channel(xy.data(), w.data(), nullptr,
                                  static_cast<int>(joints.size()), sigma, hq, wq,
                                  out.data(), nullptr);
  return out;
}

Tensor render_pose_heatmaps(const Pose2DSet& poses, int hq, int wq, double sigma) {
  if (sigma <= 0.0) throw InvalidSigma("sigma must be positive");
  const int64_t c_views = poses.view_count();
  const int64_t persons = poses.person_count();
  const int64_t joints = poses.joint_count();
  Tensor out({c_views, joints, hq, wq});
  parallel_for(c_views * joints, [&](int64_t b, int64_t e) {
    std::vector<double> xy(static_cast<size_t>(persons) * 2);
    std::vector<double> w(static_cast<size_t>(persons));
    std::vector<uint8_t> act(static_cast<size_t>(persons));
    for (int64_t i = b; i < e; ++i) {
      const int64_t c = i / joints;
      const int64_t j = i % joints;
      for (int64_t p = 0; p < persons; ++p) {
        xy[2 * p] = poses.joints.at(c, p, j, 0) / kHeatmapStride;
        xy[2 * p + 1] = poses.joints.at(c, p, j, 1) / kHeatmapStride;
        w[p] = poses.confidence.at(c, p, j);
        act[p] = poses.visible(c, p, j) ? 1 : 0;
      }
      detail::render_gaussian_channel(xy.data(), w.data(), act.data(),
                                      static_cast<int>(persons), sigma, hq, wq,
                                      out.data() + i * hq * wq, nullptr);
    }
  });
  return out;
}

Tensor render_root_heatmaps(const Tensor& roots_2d, const Tensor& visibility, int hq,
                            int wq, double sigma) {
  if (sigma <= 0.0) throw InvalidSigma("sigma must be positive");
  if (roots_2d.ndim() != 3 || roots_2d.dim(2) != 2)
    throw ShapeMismatch("roots_2d must be (C, K, 2)");
  const int64_t c_views = roots_2d.dim(0);
  const int64_t k = roots_2d.dim(1);
  Tensor out({c_views, hq, wq});
  std::vector<double> xy(static_cast<size_t>(k) * 2);
  std::vector<uint8_t> act(static_cast<size_t>(k));
  for (int64_t c = 0; c < c_views; ++c) {
    for (int64_t i = 0; i < k; ++i) {
      xy[2 * i] = roots_2d.at(c, i, 0) / kHeatmapStride;
      xy[2 * i + 1] = roots_2d.at(c, i, 1) / kHeatmapStride;
      act[i] = visibility.at(c, i) != 0.0 ? 1 : 0;
    }
    detail::render_gaussian_channel(xy.data(), nullptr, act.data(), static_cast<int>(k),
                                    sigma, hq, wq, out.data() + c * hq * wq, nullptr);
  }
  return out;
}

Vec3 soft_argmax_3d(const Tensor& volume, const VoxelGridSpec& grid, double beta) {
  if (beta <= 0.0) throw InvalidBeta("beta must be positive");
  if (volume.ndim() != 3 || volume.dim(0) != grid.resolution[0] ||
      volume.dim(1) != grid.resolution[1] || volume.dim(2) != grid.resolution[2])
    throw ShapeMismatch("volume does not match grid resolution");
  if (!volume.all_finite()) throw InvalidBeta("volume must be finite");
  const int64_t n = volume.numel();
  const double m = volume.max();
  double z = 0.0;
  Vec3 acc = Vec3::Zero();
  for (int64_t v = 0; v < n; ++v) {
    const double p = std::exp(beta * (volume[v] - m));
    z += p;
    acc += p * grid.voxel_center_flat(v);
  }
  return acc / z;
}

Tensor decode_volume_poses(const Tensor& joint_volumes, const VoxelGridSpec& grid,
                           double beta) {
  if (joint_volumes.ndim() != 4) throw ShapeMismatch("expected (J, X, Y, Z)");
  const int64_t joints = joint_volumes.dim(0);
  const int64_t n = joint_volumes.numel() / std::max<int64_t>(joints, 1);
  Tensor out({joints, 3});
  for (int64_t j = 0; j < joints; ++j) {
    Tensor vol({grid.resolution[0], grid.resolution[1], grid.resolution[2]});
    std::copy_n(joint_volumes.data() + j * n, n, vol.data());
    const Vec3 p = soft_argmax_3d(vol, grid, beta);
    out.at(j, 0) = p.x();
    out.at(j, 1) = p.y();
    out.at(j, 2) = p.z();
  }
  return out;
}

}  // namespace sp3d
