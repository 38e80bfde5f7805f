#include "sp3d/geometry.hpp"

#include <Eigen/SVD>
#include <cmath>

#include "sp3d/parallel.hpp"

namespace sp3d {

void CameraCalibration::validate() const {
  const Mat3 rrt = R * R.transpose();
  if ((rrt - Mat3::Identity()).cwiseAbs().maxCoeff() >= 1e-6)
    throw InvalidCalibration("rotation is not orthonormal");
  if (std::abs(R.determinant() - 1.0) >= 1e-6)
    throw InvalidCalibration("rotation determinant is not +1");
  if (std::abs(K(2, 2) - 1.0) > 1e-12)
    throw InvalidCalibration("K[2][2] must be 1");
  if (K(0, 0) <= 0.0 || K(1, 1) <= 0.0)
    throw InvalidCalibration("focal lengths must be positive");
  if (width <= 0 || height <= 0)
    throw InvalidCalibration("image size must be positive");
}

Eigen::Matrix<double, 3, 4> CameraCalibration::projection_matrix() const {
  Eigen::Matrix<double, 3, 4> rt;
  rt.block<3, 3>(0, 0) = R;
  rt.col(3) = t;
  return K * rt;
}

Vec2 project_point(const CameraCalibration& cam, const Vec3& x_world) {
  const Vec3 xc = cam.R * x_world + cam.t;
  if (xc.z() <= kMinCameraDepthMm)
    throw BehindCamera("point at camera depth " + std::to_string(xc.z()) + " mm");
  const Vec3 uvw = cam.K * xc;
  return Vec2(uvw.x() / uvw.z(), uvw.y() / uvw.z());
}

Eigen::Matrix<double, 2, 3> project_point_jacobian(const CameraCalibration& cam,
                                                   const Vec3& x_world) {
  const Vec3 xc = cam.R * x_world + cam.t;
  if (xc.z() <= kMinCameraDepthMm) throw BehindCamera("jacobian behind camera");
  const Vec3 uvw = cam.K * xc;
  const double w = uvw.z();
  // d(u)/d(uvw) by quotient rule, then chain through K R.
  Eigen::Matrix<double, 2, 3> dudh;
  dudh << 1.0 / w, 0.0, -uvw.x() / (w * w),
          0.0, 1.0 / w, -uvw.y() / (w * w);
  return dudh * cam.K * cam.R;
}

AffineAugmentation AffineAugmentation::make(double rotation_deg, double scale,
                                            const Vec2& pivot) {
  AffineAugmentation t;
  t.rotation_deg = rotation_deg;
  t.scale = scale;
  t.pivot = pivot;
  const double rad = rotation_deg * M_PI / 180.0;
  const double s = 1.0 + scale;
  const double c = std::cos(rad), sn = std::sin(rad);
  // rotate(pivot) o scale(pivot): linear part s*Rot, translation keeps pivot fixed.
  Eigen::Matrix2d lin;
  lin << s * c, -s * sn, s * sn, s * c;
  t.matrix.block<2, 2>(0, 0) = lin;
  t.matrix.col(2) = pivot - lin * pivot;
  return t;
}

bool AffineAugmentation::is_identity() const {
  return (matrix - AffineAugmentation::identity(pivot).matrix).cwiseAbs().maxCoeff() <
         1e-12;
}

Vec2 apply_affine(const AffineAugmentation& t, const Vec2& uv) {
  return t.matrix.block<2, 2>(0, 0) * uv + t.matrix.col(2);
}

AffineAugmentation invert_affine(const AffineAugmentation& t) {
  const double d = t.det();
  if (std::abs(d) <= 1e-9) throw SingularTransform("affine determinant ~ 0");
  AffineAugmentation inv;
  inv.rotation_deg = -t.rotation_deg;
  // (1 + s') = 1 / (1 + s)
  inv.scale = 1.0 / (1.0 + t.scale) - 1.0;
  inv.pivot = t.pivot;
  const Eigen::Matrix2d lin = t.matrix.block<2, 2>(0, 0);
  const Eigen::Matrix2d lin_inv = lin.inverse();
  inv.matrix.block<2, 2>(0, 0) = lin_inv;
  inv.matrix.col(2) = -lin_inv * t.matrix.col(2);
  return inv;
}

void VoxelGridSpec::validate() const {
  for (int a = 0; a < 3; ++a) {
    if (resolution[a] < 2) throw InvalidConfig("voxel grid resolution must be >= 2");
    if (extent[a] <= 0.0) throw InvalidConfig("voxel grid extent must be positive");
  }
}

Vec3 VoxelGridSpec::voxel_center(int ix, int iy, int iz) const {
  Vec3 p;
  const int idx[3] = {ix, iy, iz};
  for (int a = 0; a < 3; ++a)
    p[a] = center[a] - extent[a] / 2.0 + pitch(a) * static_cast<double>(idx[a]);
  return p;
}

std::array<int, 3> VoxelGridSpec::unflatten(int64_t v) const {
  const int iz = static_cast<int>(v % resolution[2]);
  const int64_t rest = v / resolution[2];
  const int iy = static_cast<int>(rest % resolution[1]);
  const int ix = static_cast<int>(rest / resolution[1]);
  return {ix, iy, iz};
}

Vec3 VoxelGridSpec::voxel_center_flat(int64_t v) const {
  const auto idx = unflatten(v);
  return voxel_center(idx[0], idx[1], idx[2]);
}

bool VoxelGridSpec::contains(const Vec3& p, double slack) const {
  for (int a = 0; a < 3; ++a) {
    if (p[a] < center[a] - extent[a] / 2.0 - slack) return false;
    if (p[a] > center[a] + extent[a] / 2.0 + slack) return false;
  }
  return true;
}

Tensor VoxelGridSpec::voxel_centers() const {
  Tensor out({num_voxels(), 3});
  for (int64_t v = 0; v < num_voxels(); ++v) {
    const Vec3 c = voxel_center_flat(v);
    out.at(v, 0) = c.x();
    out.at(v, 1) = c.y();
    out.at(v, 2) = c.z();
  }
  return out;
}

UnprojectionPlan make_unprojection_plan(const std::vector<CameraCalibration>& cams,
                                        const VoxelGridSpec& grid,
                                        const AffineAugmentation& t, int hq, int wq) {
  grid.validate();
  UnprojectionPlan plan;
  plan.views = static_cast<int>(cams.size());
  plan.hq = hq;
  plan.wq = wq;
  plan.grid = grid;
  const int64_t nvox = grid.num_voxels();
  plan.samples.resize(static_cast<size_t>(plan.views) * static_cast<size_t>(nvox));
  plan.inv_count.assign(static_cast<size_t>(nvox), 0.0);

  std::vector<int> counts(static_cast<size_t>(nvox), 0);
  for (int c = 0; c < plan.views; ++c) {
    const CameraCalibration& cam = cams[static_cast<size_t>(c)];
    cam.validate();
    if (hq * 4 != cam.height || wq * 4 != cam.width)
      throw ShapeMismatch("heatmap resolution must be quarter image size");
    UnprojectionPlan::Sample* dst =
        plan.samples.data() + static_cast<size_t>(c) * static_cast<size_t>(nvox);
    parallel_for(nvox, [&](int64_t b, int64_t e) {
      for (int64_t v = b; v < e; ++v) {
        UnprojectionPlan::Sample& s = dst[v];
        s.idx[0] = s.idx[1] = s.idx[2] = s.idx[3] = -1;
        s.w[0] = s.w[1] = s.w[2] = s.w[3] = 0.0;
        const Vec3 xw = grid.voxel_center_flat(v);
        const Vec3 xc = cam.R * xw + cam.t;
        if (xc.z() <= kMinCameraDepthMm) continue;
        const Vec3 uvw = cam.K * xc;
        const Vec2 uv(uvw.x() / uvw.z(), uvw.y() / uvw.z());
        const Vec2 aug = apply_affine(t, uv);
        const double x = aug.x() / kHeatmapStride;
        const double y = aug.y() / kHeatmapStride;
        // In-heatmap test requires full 4-tap support; outside samples are
        // dropped from the view average instead of contributing zeros.
        if (x < 0.0 || x > wq - 1 || y < 0.0 || y > hq - 1) continue;
        int x0 = static_cast<int>(std::floor(x));
        int y0 = static_cast<int>(std::floor(y));
        if (x0 >= wq - 1) x0 = wq - 2;
        if (y0 >= hq - 1) y0 = hq - 2;
        const double fx = x - x0, fy = y - y0;
        s.idx[0] = y0 * wq + x0;
        s.idx[1] = y0 * wq + x0 + 1;
        s.idx[2] = (y0 + 1) * wq + x0;
        s.idx[3] = (y0 + 1) * wq + x0 + 1;
        s.w[0] = (1 - fx) * (1 - fy);
        s.w[1] = fx * (1 - fy);
        s.w[2] = (1 - fx) * fy;
        s.w[3] = fx * fy;
      }
    });
    for (int64_t v = 0; v < nvox; ++v)
      if (dst[v].idx[0] >= 0) ++counts[static_cast<size_t>(v)];
  }
  plan.view_count.assign(counts.begin(), counts.end());
  for (int64_t v = 0; v < nvox; ++v)
    if (counts[static_cast<size_t>(v)] > 0)
      plan.inv_count[static_cast<size_t>(v)] = 1.0 / counts[static_cast<size_t>(v)];
  return plan;
}

FeatureVolume unproject_with_plan(const Tensor& heatmaps, const UnprojectionPlan& plan,
                                  bool clamp) {
  if (heatmaps.ndim() != 4) throw ShapeMismatch("heatmaps must be (C, J, Hq, Wq)");
  const int64_t c_views = heatmaps.dim(0);
  const int64_t joints = heatmaps.dim(1);
  if (c_views != plan.views) throw ShapeMismatch("view count differs from plan");
  if (heatmaps.dim(2) != plan.hq || heatmaps.dim(3) != plan.wq)
    throw ShapeMismatch("heatmap resolution differs from plan");
  const int64_t nvox = plan.grid.num_voxels();
  const int64_t map_px = static_cast<int64_t>(plan.hq) * plan.wq;

  FeatureVolume out;
  out.grid = plan.grid;
  out.data = Tensor({joints, plan.grid.resolution[0], plan.grid.resolution[1],
                     plan.grid.resolution[2]});
  double* o = out.data.data();
  const double* h = heatmaps.data();
  parallel_for(joints * nvox, [&](int64_t b, int64_t e) {
    for (int64_t i = b; i < e; ++i) {
      const int64_t j = i / nvox;
      const int64_t v = i % nvox;
      const double invc = plan.inv_count[static_cast<size_t>(v)];
      if (invc == 0.0) {
        o[i] = 0.0;
        continue;
      }
      double acc = 0.0;
      for (int c = 0; c < plan.views; ++c) {
        const auto& s = plan.sample(c, v);
        if (s.idx[0] < 0) continue;
        const double* map = h + (c * joints + j) * map_px;
        acc += s.w[0] * map[s.idx[0]] + s.w[1] * map[s.idx[1]] +
               s.w[2] * map[s.idx[2]] + s.w[3] * map[s.idx[3]];
      }
      double val = acc * invc;
      if (clamp) {
        if (val < 0.0) val = 0.0;
        if (val > 1.0) val = 1.0;
      }
      o[i] = val;
    }
  });
  return out;
}

FeatureVolume unproject_heatmaps(const Tensor& heatmaps,
                                 const std::vector<CameraCalibration>& cams,
                                 const VoxelGridSpec& grid,
                                 const AffineAugmentation& t) {
  if (heatmaps.ndim() != 4) throw ShapeMismatch("heatmaps must be (C, J, Hq, Wq)");
  if (heatmaps.dim(0) != static_cast<int64_t>(cams.size()))
    throw ShapeMismatch("camera count differs from heatmap views");
  const auto plan = make_unprojection_plan(cams, grid, t, static_cast<int>(heatmaps.dim(2)),
                                           static_cast<int>(heatmaps.dim(3)));
  return unproject_with_plan(heatmaps, plan);
}

Vec3 triangulate_dlt(
    const std::vector<std::pair<CameraCalibration, Vec2>>& observations) {
  if (observations.size() < 2)
    throw DegenerateConfiguration("triangulation needs at least 2 observations");
  Eigen::MatrixXd design(2 * observations.size(), 4);
  for (size_t i = 0; i < observations.size(); ++i) {
    const CameraCalibration& cam = observations[i].first;
    const Vec2& uv = observations[i].second;
    // Normalize pixels by image size for conditioning.
    const double sx = 1.0 / cam.width, sy = 1.0 / cam.height;
    Eigen::Matrix<double, 3, 4> p = cam.projection_matrix();
    p.row(0) *= sx;
    p.row(1) *= sy;
    design.row(2 * static_cast<Eigen::Index>(i)) = uv.x() * sx * p.row(2) - p.row(0);
    design.row(2 * static_cast<Eigen::Index>(i) + 1) = uv.y() * sy * p.row(2) - p.row(1);
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(design, Eigen::ComputeFullV);
  const Eigen::VectorXd& sv = svd.singularValues();
  // Rank < 3 means the rays do not intersect in a point (e.g. parallel rays).
  if (sv(2) <= 1e-9 * sv(0))
    throw DegenerateConfiguration("design matrix rank-deficient");
  Eigen::Vector4d x = svd.matrixV().col(3);
  if (std::abs(x(3)) <= 1e-12 * x.norm())
    throw DegenerateConfiguration("triangulated point at infinity");
  return x.head<3>() / x(3);
}

}  // namespace sp3d
