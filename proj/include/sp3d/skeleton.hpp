#pragma once

#include <array>
#include <string>
#include <utility>
#include <vector>

#include "sp3d/errors.hpp"

namespace sp3d {

// Articulated skeleton description. Default: 15 joints, Panoptic ordering,
// root = mid-hip. parent[root] = -1 and the parent array must encode a tree.
struct SkeletonSpec {
  std::vector<std::string> joint_names;
  std::vector<int> parent;
  // Per non-root joint: bone from parent, (min, max) length in mm.
  std::vector<std::pair<double, double>> bone_length_range;
  // Canonical bone direction (unit, in a person-local frame) and max cone
  // half-angle (deg) for pose sampling.
  std::vector<std::array<double, 3>> bone_direction;
  std::vector<double> bone_cone_deg;
  std::vector<std::pair<int, int>> limb_pairs;  // for PCP

  int joint_count() const { return static_cast<int>(joint_names.size()); }
  int root() const;
  void validate() const;

  static SkeletonSpec panoptic15();
};

}  // namespace sp3d
