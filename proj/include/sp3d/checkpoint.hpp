#pragma once

#include <map>
#include <string>

#include "sp3d/hyper.hpp"
#include "sp3d/models.hpp"
#include "sp3d/tensor.hpp"

namespace sp3d {

// Checkpoint container: "SPC1" magic, u32 LE header length, JSON header
// (stage, epoch, step, seed, architecture, hyper-params, tensor directory),
// then the named float64 TensorBlobs in directory order. Bit-exact round trip.
struct Checkpoint {
  std::string stage;  // pretrain | root | pose_l2 | pose_l1l2
  int64_t epoch = 0;  // completed epochs inside the stage
  int64_t step = 0;   // optimizer steps inside the stage
  uint64_t seed = 0;
  ModelConfig config;
  HyperParams hyper;
  std::map<std::string, Tensor> model_state;
  std::map<std::string, Tensor> optimizer_state;  // empty once a stage is done
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

// Stage DAG: pretrain -> root -> pose_l2 -> pose_l1l2.
int stage_rank(const std::string& stage);

}  // namespace sp3d
