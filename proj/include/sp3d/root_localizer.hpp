#pragma once

#include <array>
#include <optional>
#include <vector>

#include "sp3d/autodiff.hpp"
#include "sp3d/models.hpp"
#include "sp3d/scene_synth.hpp"

namespace sp3d {

struct RootProposal {
  Vec3 position = Vec3::Zero();
  double score = 0.0;
  std::array<int, 3> voxel_index = {0, 0, 0};
};

// Channel slice (C, J, Hq, Wq) -> (C, Hq, Wq).
Tensor extract_root_heatmaps(const Tensor& heatmaps, int root_channel);

// Proposals are strict window maxima (lexicographic voxel index wins ties) at
// or above the threshold, refined to the center-of-mass of their 3x3x3
// neighborhood, sorted by descending score.
std::vector<RootProposal> nms_3d(const Tensor& volume, const VoxelGridSpec& grid,
                                 int window, double threshold, int max_proposals);

struct RootLocalization {
  Tensor g0, g1, g2;  // (X, Y, Z) root volumes
  std::vector<RootProposal> proposals;  // extracted from g2
};

// NMS + thresholding restricted to voxels with at least two contributing
// views; a root position is only triangulable with multi-view support, and
// single-view border voxels keep full blob magnitude under the mean
// aggregation.
std::vector<RootProposal> detect_roots(const Tensor& g, const UnprojectionPlan& plan,
                                       const HyperParams& hyper,
                                       double relative_floor = 0.0);

// Eval path: per-branch root heatmaps (C, Hq, Wq) -> root volumes via
// unprojection and root_net, proposals from the t2 branch. bypass_root_net
// uses the unprojected feature volume directly (oracle baseline).
RootLocalization localize_roots(const Tensor& root_heatmaps0,
                                const Tensor& root_heatmaps1,
                                const Tensor& root_heatmaps2,
                                const std::vector<CameraCalibration>& cams,
                                const AffineAugmentation& t1, const AffineAugmentation& t2,
                                ModelBundle& bundle, bool bypass_root_net);

// One optimizer step on root_net. Synthetic part: (B, 1, X, Y, Z) unprojected
// synthetic root features against target volumes (Eq. 2 style). Consistency
// part: unprojected real root features of the three branches (Eq. 3 style).
struct RootTrainInputs {
  std::optional<std::pair<Tensor, Tensor>> synthetic;     // features, targets
  std::optional<std::array<Tensor, 3>> consistency;       // F0, F1, F2 (1,1,X,Y,Z)
};
struct RootStepLosses {
  double total = 0.0;
  double synthetic = 0.0;
  double consistency = 0.0;
};
RootStepLosses train_root_step(const RootTrainInputs& inputs, ModelBundle& bundle,
                               AdamOptimizer& opt);

}  // namespace sp3d
