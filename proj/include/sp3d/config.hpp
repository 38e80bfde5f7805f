#pragma once

#include <cstdint>
#include <string>

#include "sp3d/hyper.hpp"
#include "sp3d/models.hpp"

namespace sp3d {

struct StageSchedule {
  int epochs = 0;
  double lr = 1e-4;
};

// Training configuration; file keys mirror the field paths with dots,
// e.g. "stage.pretrain.epochs = 3" or "aug.rotation_deg_max = 45".
struct TrainConfig {
  uint64_t seed = 1;

  struct {
    StageSchedule pretrain{3, 1e-4};
    StageSchedule root{1, 1e-4};
    StageSchedule pose_l2{2, 1e-4};
    StageSchedule pose_l1l2{2, 5e-5};
  } stage;

  struct {
    double rotation_deg_min = -45.0;
    double rotation_deg_max = 45.0;
    double scale_min = -0.35;
    double scale_max = 0.35;
  } aug;

  struct {
    int count = 2;
    double size_min = 20.0;
    double size_max = 40.0;
  } cutout;

  double lambda = 0.01;
  double sigma_attn = 0.1;

  struct {
    double threshold = 0.7;
    int hard_last_epochs = 2;  // hard labels for the final epochs of pose_l1l2
  } pseudo;

  struct {
    bool cross_affine_view = true;
    bool soft_attention = true;
    bool hard_attention = true;
  } flags;

  struct {
    int heatmap_width = 32;
    int attn_width = 16;
    int root_width = 12;
    int pose_width = 12;
  } model;

  struct {
    int samples = 1200;     // synthetic root dataset size for the root stage
    int max_roots = 4;
    double sigma_3d_pitches = 1.5;  // 3D target sigma in coarse voxel pitches
  } roots;

  double holdout_fraction = 0.2;  // trailing frames reserved for evaluation

  void validate() const;
  HyperParams hyper() const;
  ModelConfig model_config() const;
};

TrainConfig parse_train_config_text(const std::string& text);
TrainConfig load_train_config(const std::string& path);

}  // namespace sp3d
