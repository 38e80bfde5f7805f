#pragma once

#include <map>
#include <string>
#include <vector>

#include "sp3d/autodiff.hpp"
#include "sp3d/hyper.hpp"
#include "sp3d/scene_synth.hpp"
#include "sp3d/skeleton.hpp"

namespace sp3d {

struct NamedParam {
  std::string name;
  ad::Var var;
};

// 2D encoder-decoder: 4 strided conv stages down to 1/16 scale, 2 transposed
// conv stages back to 1/4, sigmoid head. Serves as heatmap_net_2d and, at
// half width, attn_net_2d.
class HeatmapNet2d {
 public:
  HeatmapNet2d() = default;
  HeatmapNet2d(int in_ch, int out_ch, int width, uint64_t seed);

  // (B, 3, H, W) -> (B, out_ch, H/4, W/4), values in (0, 1).
  ad::Var forward(const ad::Var& images) const;
  void collect_parameters(const std::string& prefix, std::vector<NamedParam>& out);

 private:
  struct Layer {
    ad::Var w, b;
  };
  Layer enc_[4], dec_[2], head_;
  int out_ch_ = 0;
};

// 3-level 3D conv U-shape with nearest upsampling and skip concats. Optional
// input residual (pose net) and sigmoid head (root net).
class UNet3d {
 public:
  UNet3d() = default;
  UNet3d(int in_ch, int out_ch, int width, bool residual, bool sigmoid_head,
         uint64_t seed);

  // (B, in_ch, X, Y, Z) -> (B, out_ch, X, Y, Z); X, Y, Z divisible by 4.
  ad::Var forward(const ad::Var& vol) const;
  void collect_parameters(const std::string& prefix, std::vector<NamedParam>& out);

 private:
  struct Layer {
    ad::Var w, b;
  };
  Layer enc_, down1_, down2_, bott_, up1_, up2_, head_;
  bool residual_ = false;
  bool sigmoid_head_ = false;
};

struct ModelConfig {
  int joints = 15;
  int heatmap_width = 32;
  int attn_width = 16;
  int root_width = 12;
  int pose_width = 12;

  bool operator==(const ModelConfig&) const = default;
};

// The four trainable functions plus the grids and hyper-parameters they are
// wired to. Eval-mode forwards are deterministic and concurrently callable;
// parameter updates have a single writer (the optimizer).
struct ModelBundle {
  ModelConfig config;
  SkeletonSpec skeleton;
  VoxelGridSpec coarse_grid;
  VoxelGridSpec fine_grid_template;
  HyperParams hyper;
  HeatmapNet2d heatmap_net_2d;
  HeatmapNet2d attn_net_2d;
  UNet3d root_net;
  UNet3d pose_net_3d;
  bool train_mode = false;

  static ModelBundle create(const ModelConfig& cfg, uint64_t seed);
  std::vector<NamedParam> parameters();
  int64_t parameter_count();
  std::map<std::string, Tensor> state_dict();
  void load_state_dict(const std::map<std::string, Tensor>& state);
};

// Adam with global gradient-norm clipping at 1.0.
class AdamOptimizer {
 public:
  AdamOptimizer() = default;
  explicit AdamOptimizer(std::vector<NamedParam> params, double lr = 1e-4);

  void set_lr(double lr) { lr_ = lr; }
  double lr() const { return lr_; }
  void zero_grad();
  void step();
  int64_t steps_taken() const { return t_; }

  std::map<std::string, Tensor> state_dict() const;
  void load_state_dict(const std::map<std::string, Tensor>& state);

 private:
  std::vector<NamedParam> params_;
  std::vector<Tensor> m_, v_;
  double lr_ = 1e-4;
  double beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
  double clip_norm_ = 1.0;
  int64_t t_ = 0;
};

}  // namespace sp3d
