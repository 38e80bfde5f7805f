#pragma once

#include <map>
#include <utility>
#include <vector>

#include "sp3d/geometry.hpp"
#include "sp3d/skeleton.hpp"

namespace sp3d {

// Greedy person matching by ascending MPJPE; each pred and gt used once.
struct MatchResult {
  std::vector<std::pair<int, int>> pairs;  // (pred, gt)
  std::vector<double> mpjpe;               // per pair, mm
};
MatchResult match_and_mpjpe(const Pose3DSet& pred, const Pose3DSet& gt);

struct FramePredictions {
  Pose3DSet poses;
  std::vector<double> scores;  // proposal scores, one per person
};

// Score-ranked detection AP: a detection is TP when its nearest unclaimed gt
// (same frame) is within the threshold; all-points interpolated PR area.
double average_precision(const std::vector<FramePredictions>& preds,
                         const std::vector<Pose3DSet>& gts, double threshold_mm);

double recall_at(const std::vector<FramePredictions>& preds,
                 const std::vector<Pose3DSet>& gts, double threshold_mm = 500.0);

// A limb counts as correct when both endpoints land within half the gt limb
// length; zero-length gt limbs are skipped. Fractions per gt person id.
struct PcpResult {
  std::map<int, double> per_actor;
  double average = 0.0;
};
PcpResult pcp(const std::vector<FramePredictions>& preds,
              const std::vector<Pose3DSet>& gts,
              const std::vector<std::pair<int, int>>& limb_pairs);

struct EvalReport {
  std::map<int, double> ap;  // threshold mm -> AP
  double recall_500 = 0.0;
  double mpjpe_mm = 0.0;
  PcpResult pcp;
  int64_t matched = 0;
  int64_t missed = 0;
  int64_t false_positives = 0;
};

EvalReport evaluate_poses(const std::vector<FramePredictions>& preds,
                          const std::vector<Pose3DSet>& gts,
                          const std::vector<std::pair<int, int>>& limb_pairs,
                          const std::vector<int>& ap_thresholds = {25, 50, 100, 150});

}  // namespace sp3d
