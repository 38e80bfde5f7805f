#pragma once

#include <string>
#include <vector>

#include "sp3d/config.hpp"
#include "sp3d/inference.hpp"
#include "sp3d/manifest.hpp"
#include "sp3d/models.hpp"
#include "sp3d/pose_estimator.hpp"

namespace sp3d {

struct LossLogEntry {
  int64_t step = 0;
  std::string stage;
  double loss_total = 0.0;
  double loss_h = 0.0;
  double loss_j = 0.0;
  double loss_attn = 0.0;
};

struct PhotometricOps {
  double brightness = 0.0;  // additive
  double contrast = 1.0;    // multiplicative about 0.5
  bool equalize = false;    // fixed mild S-curve
};

struct Cutout {
  double cx = 0.0, cy = 0.0, size = 0.0;  // px, gray fill
};

// One training draw: the affine pair applies identically across all views of
// a branch; photometric ops and cutouts touch images only, never joints.
struct AugmentationSample {
  AffineAugmentation t1, t2;
  PhotometricOps photo1, photo2;
  std::vector<Cutout> cutouts1, cutouts2;
};
AugmentationSample sample_augmentation_pair(const TrainConfig& cfg, Rng& rng,
                                            int image_width, int image_height);

// soft: identity. hard: joints below the confidence threshold lose visibility.
Pose2DSet filter_pseudo_labels(const Pose2DSet& pseudo, const std::string& mode,
                               double threshold = 0.7);

Tensor augment_image(const Tensor& image, const AffineAugmentation& t,
                     const PhotometricOps& photo, const std::vector<Cutout>& cutouts);

// Staged trainer over a scene directory. Stage order is enforced through the
// checkpoints on disk; every run is a pure function of (config, scene, stage).
class Trainer {
 public:
  Trainer(TrainConfig cfg, std::string scene_dir, std::string out_dir);

  void run_stage(const std::string& stage);
  void run_all();

  std::string checkpoint_path(const std::string& stage) const;
  const std::vector<LossLogEntry>& history() const { return history_; }
  ModelBundle& bundle() { return bundle_; }
  int64_t train_frame_count() const { return train_frames_; }
  int64_t holdout_begin() const { return train_frames_; }

 private:
  void run_pretrain();
  void run_root();
  void run_pose(const std::string& stage);
  void log_entry(const LossLogEntry& e);
  void save_stage(const std::string& stage, int64_t epoch, int64_t step,
                  const AdamOptimizer& opt);
  // Loads the newest prerequisite checkpoint; throws StageOrderViolation.
  void require_stage(const std::string& needed);
  int64_t maybe_resume(const std::string& stage, AdamOptimizer& opt);

  TrainConfig cfg_;
  SceneReader scene_;
  std::string out_dir_;
  ModelBundle bundle_;
  std::vector<LossLogEntry> history_;
  int64_t train_frames_ = 0;
};

}  // namespace sp3d
