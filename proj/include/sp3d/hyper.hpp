#pragma once

namespace sp3d {

// Loss weights and decode settings shared across the pipeline.
struct HyperParams {
  double lambda = 0.01;      // weight of the joint (L1) loss
  double sigma_attn = 0.1;   // weight of the attention regularizer
  double beta = 100.0;       // soft-argmax inverse temperature
  double sigma_hm = 3.0;     // Gaussian render sigma, heatmap px
  int nms_window = 3;        // odd, voxels
  double nms_threshold = 0.3;
  int max_proposals = 10;

  void validate() const;
};

}  // namespace sp3d
