#pragma once

#include <string>
#include <vector>

#include "sp3d/scene_synth.hpp"

namespace sp3d {

// Scene directory layout:
//   manifest.json       scene manifest (skeleton, cameras, frame blob refs)
//   calibration.json    standalone camera calibration records
//   blobs/              TensorBlob files referenced by the manifest
// Images are float32 blobs (H, W, 3); pseudo poses pack (C, P, J, 4) as
// u, v, confidence, visibility; gt poses are (P, J, 3).

void write_scene_dir(const std::string& dir, const SyntheticScene& scene);

class SceneDirWriter {
 public:
  SceneDirWriter(std::string dir, const SkeletonSpec& skeleton,
                 const std::vector<CameraCalibration>& cams, const Aabb& workspace,
                 uint64_t seed);
  void add_frame(const SceneFrame& frame);
  void finalize();

 private:
  std::string dir_;
  SkeletonSpec skeleton_;
  std::vector<CameraCalibration> cams_;
  Aabb workspace_;
  uint64_t seed_;
  std::vector<int> frame_ids_;
  bool finalized_ = false;
};

class SceneReader {
 public:
  explicit SceneReader(std::string dir);

  const SkeletonSpec& skeleton() const { return skeleton_; }
  const std::vector<CameraCalibration>& cams() const { return cams_; }
  const Aabb& workspace() const { return workspace_; }
  uint64_t seed() const { return seed_; }
  int64_t frame_count() const { return static_cast<int64_t>(frame_ids_.size()); }
  SceneFrame load_frame(int64_t index) const;
  // Pose data only; skips the image blobs.
  SceneFrame load_frame_poses(int64_t index) const;

 private:
  std::string dir_;
  SkeletonSpec skeleton_;
  std::vector<CameraCalibration> cams_;
  Aabb workspace_;
  uint64_t seed_ = 0;
  std::vector<int> frame_ids_;
};

// Calibration records; rejects entries carrying a nonzero distortion field.
std::vector<CameraCalibration> load_calibration(const std::string& path);
void write_calibration(const std::string& path,
                       const std::vector<CameraCalibration>& cams);

// Synthetic root dataset directory (root_dataset.json + blobs/).
void write_root_dataset(const std::string& dir,
                        const std::vector<SyntheticRootSample>& samples,
                        const VoxelGridSpec& grid, double sigma_2d, double sigma_3d,
                        uint64_t seed);
struct RootDataset {
  std::vector<SyntheticRootSample> samples;
  VoxelGridSpec grid;
  double sigma_2d = 0.0;
  double sigma_3d = 0.0;
  uint64_t seed = 0;
};
RootDataset load_root_dataset(const std::string& dir);

}  // namespace sp3d
