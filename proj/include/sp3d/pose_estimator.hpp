#pragma once

#include <optional>
#include <vector>

#include "sp3d/autodiff.hpp"
#include "sp3d/models.hpp"
#include "sp3d/root_localizer.hpp"

namespace sp3d {

// Fine per-person feature volume: the fine grid template re-centered on the
// proposal, filled by unprojecting all joint channels.
FeatureVolume person_feature_volume(const RootProposal& proposal, const Tensor& heatmaps,
                                    const std::vector<CameraCalibration>& cams,
                                    const AffineAugmentation& t,
                                    const VoxelGridSpec& fine_template,
                                    const VoxelGridSpec& coarse_grid);

// Bottleneck 3D poses of both augmented branches, one pose per proposal.
// Heatmaps enter as graph nodes so gradients can flow back into the backbone;
// bypass_pose_net decodes the unprojected volumes directly (oracle path).
struct BottleneckPoses {
  ad::Var y1, y2;  // (P, J, 3) world mm; empty tensors when no proposals
  std::vector<RootProposal> proposals;
  std::vector<VoxelGridSpec> fine_grids;
};
BottleneckPoses estimate_bottleneck_poses(const std::vector<RootProposal>& proposals,
                                          const ad::Var& heatmaps1, const ad::Var& heatmaps2,
                                          const std::vector<CameraCalibration>& cams,
                                          const AffineAugmentation& t1,
                                          const AffineAugmentation& t2, ModelBundle& bundle,
                                          bool bypass_pose_net);

// Projection of a (P, J, 3) pose set into every view of one augmented branch.
struct ViewProjection {
  std::vector<ad::Var> per_view;  // C entries of (P*J, 2) augmented-image px
  std::vector<Tensor> visibility; // C entries of (P, J), 1 = usable
};
ViewProjection cross_view_project(const ad::Var& poses,
                                  const std::vector<CameraCalibration>& cams,
                                  const AffineAugmentation& t_to);

struct PoseLossFlags {
  bool cross_affine_view = true;  // Y1 renders under t2 and vice versa
  bool soft_attention = true;     // Eq. 7/8 terms (needs attention maps)
  bool hard_attention = true;     // worst-view dropping for the joint loss
  bool use_joint_loss = true;     // lambda term active (L1 stage)
  bool hard_labels = false;       // drop pseudo joints below the threshold
  double hard_label_threshold = 0.7;
};

struct PoseLossBundle {
  ad::Var total;
  double loss_h = 0.0;
  double loss_j = 0.0;
  double loss_attn = 0.0;
  bool no_matches = false;
};

// Assembles Eq. 4-11 for one frame from the bottleneck poses and the pseudo
// poses (original image space). attn1/attn2 are (C, J, Hq, Wq) attention maps
// for the two branches when soft attention is on.
PoseLossBundle build_pose_loss_inputs(const BottleneckPoses& bottleneck,
                                      const Pose2DSet& pseudo_2d,
                                      const std::vector<CameraCalibration>& cams,
                                      const AffineAugmentation& t1,
                                      const AffineAugmentation& t2,
                                      const ad::Var* attn1, const ad::Var* attn2,
                                      const HyperParams& hyper, const PoseLossFlags& flags,
                                      int hq, int wq);

// Pseudo joints mapped into one branch's augmented image space, with
// visibility re-evaluated against the augmented bounds (and, in hard mode,
// the confidence threshold).
Pose2DSet transform_pseudo_to_branch(const Pose2DSet& pseudo,
                                     const std::vector<CameraCalibration>& cams,
                                     const AffineAugmentation& t,
                                     const PoseLossFlags& flags);

}  // namespace sp3d
