#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "sp3d/errors.hpp"
#include "sp3d/tensor.hpp"

namespace sp3d {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

constexpr double kMinCameraDepthMm = 1e-6;
// Heatmaps live at exactly quarter image resolution.
constexpr double kHeatmapStride = 4.0;
// Placeholder coordinates for joints that project behind the camera; always
// masked out before any loss sees them.
constexpr double kInvisibleSentinel = -1e4;

// Pinhole camera: u = dehom(K (R x + t)). Units: mm world, px image.
struct CameraCalibration {
  int id = 0;
  Mat3 K = Mat3::Identity();
  Mat3 R = Mat3::Identity();
  Vec3 t = Vec3::Zero();
  int width = 0;
  int height = 0;

  void validate() const;  // throws InvalidCalibration
  double depth_of(const Vec3& x_world) const { return (R * x_world + t).z(); }
  Eigen::Matrix<double, 3, 4> projection_matrix() const;
};

Vec2 project_point(const CameraCalibration& cam, const Vec3& x_world);
// 2x3 Jacobian d(u,v)/d(x_world); same preconditions as project_point.
Eigen::Matrix<double, 2, 3> project_point_jacobian(const CameraCalibration& cam,
                                                   const Vec3& x_world);

// Image-space affine t_{r,s}: rotate by rotation_deg about pivot composed with
// scale by (1 + scale) about the same pivot.
struct AffineAugmentation {
  double rotation_deg = 0.0;
  double scale = 0.0;
  Vec2 pivot = Vec2::Zero();
  Eigen::Matrix<double, 2, 3> matrix = (Eigen::Matrix<double, 2, 3>() <<
                                        1, 0, 0, 0, 1, 0).finished();

  static AffineAugmentation make(double rotation_deg, double scale, const Vec2& pivot);
  static AffineAugmentation identity(const Vec2& pivot = Vec2::Zero()) {
    return make(0.0, 0.0, pivot);
  }
  bool is_identity() const;
  double det() const {
    return matrix(0, 0) * matrix(1, 1) - matrix(0, 1) * matrix(1, 0);
  }
};

Vec2 apply_affine(const AffineAugmentation& t, const Vec2& uv);
AffineAugmentation invert_affine(const AffineAugmentation& t);  // SingularTransform

// Axis-aligned voxel grid. Centers are an inclusive linspace over
// center +/- extent/2, so pitch = extent / (resolution - 1).
struct VoxelGridSpec {
  Vec3 center = Vec3::Zero();
  Vec3 extent = Vec3::Ones();
  std::array<int, 3> resolution = {2, 2, 2};

  void validate() const;
  int64_t num_voxels() const {
    return static_cast<int64_t>(resolution[0]) * resolution[1] * resolution[2];
  }
  double pitch(int axis) const {
    return extent[axis] / static_cast<double>(resolution[axis] - 1);
  }
  Vec3 voxel_center(int ix, int iy, int iz) const;
  Vec3 voxel_center_flat(int64_t v) const;
  std::array<int, 3> unflatten(int64_t v) const;
  int64_t flatten(int ix, int iy, int iz) const {
    return (static_cast<int64_t>(ix) * resolution[1] + iy) * resolution[2] + iz;
  }
  bool contains(const Vec3& p, double slack = 0.0) const;
  // All X*Y*Z centers as an (N, 3) tensor, x-major.
  Tensor voxel_centers() const;
};

// Per-joint unprojected feature volume, shape (J, X, Y, Z), values in [0, 1].
struct FeatureVolume {
  Tensor data;
  VoxelGridSpec grid;
};

// 3D poses in world mm, joints shape (P, J, 3).
struct Pose3DSet {
  Tensor joints;
  std::vector<int> person_ids;

  int64_t person_count() const { return joints.numel() == 0 ? 0 : joints.dim(0); }
  int64_t joint_count() const { return joints.numel() == 0 ? 0 : joints.dim(1); }
  Vec3 joint(int64_t p, int64_t j) const {
    return Vec3(joints.at(p, j, 0), joints.at(p, j, 1), joints.at(p, j, 2));
  }
};

// Per-view 2D poses: joints (C, P, J, 2) px, confidence (C, P, J) in [0,1],
// visibility (C, P, J) true iff the joint lies inside that view's image.
struct Pose2DSet {
  Tensor joints;
  Tensor confidence;
  Tensor visibility;

  int64_t view_count() const { return joints.numel() == 0 ? 0 : joints.dim(0); }
  int64_t person_count() const { return joints.numel() == 0 ? 0 : joints.dim(1); }
  int64_t joint_count() const { return joints.numel() == 0 ? 0 : joints.dim(2); }
  bool visible(int64_t c, int64_t p, int64_t j) const {
    return visibility.at(c, p, j) != 0.0;
  }
};

// Precomputed Eq.-style unprojection sampling: for every (view, voxel), the
// four bilinear taps into that view's (Hq, Wq) heatmap in augmented-image
// space, or tap_index[0] < 0 when the sample falls outside the heatmap or
// behind the camera. Samples outside shrink the per-voxel divisor.
struct UnprojectionPlan {
  int views = 0;
  int hq = 0, wq = 0;
  VoxelGridSpec grid;
  struct Sample {
    int32_t idx[4];
    double w[4];
  };
  std::vector<Sample> samples;    // views * num_voxels, view-major
  std::vector<double> inv_count;  // num_voxels; 0 when no view sees the voxel
  std::vector<int32_t> view_count;  // num_voxels

  const Sample& sample(int view, int64_t voxel) const {
    return samples[static_cast<size_t>(view) * static_cast<size_t>(grid.num_voxels()) +
                   static_cast<size_t>(voxel)];
  }
};

UnprojectionPlan make_unprojection_plan(const std::vector<CameraCalibration>& cams,
                                        const VoxelGridSpec& grid,
                                        const AffineAugmentation& t, int hq, int wq);

// Plain (non-autodiff) unprojection of heatmaps (C, J, Hq, Wq) -> (J, X, Y, Z).
// Mean over in-image views, clamped to [0, 1] after averaging.
FeatureVolume unproject_heatmaps(const Tensor& heatmaps,
                                 const std::vector<CameraCalibration>& cams,
                                 const VoxelGridSpec& grid,
                                 const AffineAugmentation& t);
// clamp=false exposes the raw view-average accumulator (used by the linearity
// property; identical to the clamped result for heatmaps already in [0, 1]).
FeatureVolume unproject_with_plan(const Tensor& heatmaps, const UnprojectionPlan& plan,
                                  bool clamp = true);

// Homogeneous DLT triangulation from >= 2 views; coordinates are normalized
// by image size before forming the design matrix.
Vec3 triangulate_dlt(
    const std::vector<std::pair<CameraCalibration, Vec2>>& observations);

}  // namespace sp3d
