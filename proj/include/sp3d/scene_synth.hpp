#pragma once

#include <cstdint>
#include <vector>

#include "sp3d/geometry.hpp"
#include "sp3d/rng.hpp"
#include "sp3d/skeleton.hpp"
#include "sp3d/tensor.hpp"

namespace sp3d {

// Axis-aligned workspace box (mm).
struct Aabb {
  Vec3 lo = Vec3::Zero();
  Vec3 hi = Vec3::Ones();

  Vec3 center() const { return 0.5 * (lo + hi); }
  Vec3 size() const { return hi - lo; }
  bool contains(const Vec3& p) const {
    return (p.array() >= lo.array()).all() && (p.array() <= hi.array()).all();
  }
};

// Corruption model for the simulated 2D detector standing in for the
// off-the-shelf pose estimator: pixel jitter, uniform outliers, full-person
// dropouts per view, and confidences that separate clean from corrupted
// joints around the 0.7 threshold.
struct PseudoNoiseModel {
  double sigma_px = 2.0;
  double p_outlier = 0.05;
  double p_drop = 0.10;

  static PseudoNoiseModel clean() { return {0.0, 0.0, 0.0}; }
  static PseudoNoiseModel preset_default() { return {2.0, 0.05, 0.10}; }
  static PseudoNoiseModel heavy() { return {4.0, 0.15, 0.25}; }
  static PseudoNoiseModel by_name(const std::string& name);
};

struct SceneFrame {
  int id = 0;
  Pose3DSet gt_poses;
  std::vector<Tensor> images;  // per view, (H, W, 3) in [0, 1]
  Pose2DSet pseudo_2d;
};

struct SyntheticScene {
  SkeletonSpec skeleton;
  std::vector<CameraCalibration> cams;
  std::vector<SceneFrame> frames;
  Aabb workspace;
  uint64_t seed = 0;
};

// One synthetic root-localization sample: rendered multi-view root heatmaps
// plus the target volume of 3D Gaussians around the sampled roots.
struct SyntheticRootSample {
  Tensor root_heatmaps;   // (C, Hq, Wq)
  Tensor gt_root_volume;  // (X, Y, Z)
  std::vector<Vec3> roots;
};

std::vector<CameraCalibration> make_camera_rig(int n_views, const Aabb& workspace,
                                               double radius,
                                               std::pair<double, double> height_range,
                                               int image_width, int image_height,
                                               uint64_t seed);

Pose3DSet sample_poses(const SkeletonSpec& spec, int n_persons, const Aabb& workspace,
                       uint64_t seed);

std::vector<Tensor> render_scene_images(const Pose3DSet& poses, const SkeletonSpec& spec,
                                        const std::vector<CameraCalibration>& cams,
                                        uint64_t seed);

Pose2DSet simulate_pseudo_2d(const Pose3DSet& poses,
                             const std::vector<CameraCalibration>& cams,
                             const PseudoNoiseModel& noise, uint64_t seed);

std::vector<SyntheticRootSample> generate_root_dataset(
    int n_samples, const std::vector<CameraCalibration>& cams, const Aabb& workspace,
    const VoxelGridSpec& grid, int max_roots, double sigma_2d, double sigma_3d,
    uint64_t seed);

struct SceneConfig {
  int frames = 50;
  int persons = 3;
  int views = 5;
  int image_width = 128;
  int image_height = 128;
  PseudoNoiseModel noise = PseudoNoiseModel::preset_default();
  uint64_t seed = 1;
};

// Desk-scale defaults: the coarse grid spans a 6 x 6 x 2 m box; persons are
// sampled in a tighter central region so they stay well inside every view.
Aabb default_workspace();
Aabb default_person_region();
VoxelGridSpec default_coarse_grid();
VoxelGridSpec default_fine_grid_template();

SyntheticScene generate_scene(const SceneConfig& cfg);

constexpr double kMinPersonSeparationMm = 600.0;
constexpr double kMinRootSampleSeparationMm = 500.0;

}  // namespace sp3d
