#include "sp3d/skeleton.hpp"

#include <array>

namespace sp3d {

int SkeletonSpec::root() const {
  for (size_t i = 0; i < parent.size(); ++i)
    if (parent[i] < 0) return static_cast<int>(i);
  throw InvalidConfig("skeleton has no root joint");
}

void SkeletonSpec::validate() const {
  const int j = joint_count();
  if (static_cast<int>(parent.size()) != j) throw InvalidConfig("parent array size");
  int roots = 0;
  for (int i = 0; i < j; ++i) {
    if (parent[i] < 0) {
      ++roots;
      continue;
    }
    if (parent[i] >= j) throw InvalidConfig("parent index out of range");
    // Walk to the root; a cycle would exceed j steps.
    int cur = i, steps = 0;
    while (parent[cur] >= 0) {
      cur = parent[cur];
      if (++steps > j) throw InvalidConfig("skeleton parent array has a cycle");
    }
  }
  if (roots != 1) throw InvalidConfig("skeleton must have exactly one root");
  if (static_cast<int>(bone_length_range.size()) != j)
    throw InvalidConfig("bone_length_range size");
  for (const auto& [lo, hi] : bone_length_range)
    if (lo > hi || lo < 0.0) throw InvalidConfig("bone length range ill-ordered");
}

SkeletonSpec SkeletonSpec::panoptic15() {
  SkeletonSpec s;
  s.joint_names = {"neck",      "nose",      "mid-hip",  "l-shoulder", "l-elbow",
                   "l-wrist",   "l-hip",     "l-knee",   "l-ankle",    "r-shoulder",
                   "r-elbow",   "r-wrist",   "r-hip",    "r-knee",     "r-ankle"};
  //               0            1            2           3             4
  //               5            6            7           8             9
  //               10           11           12          13            14
  s.parent = {2, 0, -1, 0, 3, 4, 2, 6, 7, 0, 9, 10, 2, 12, 13};
  // Bone ranges keep the full reach under ~950 mm from the root so sampled
  // joints stay inside the 2 m person cube.
  s.bone_length_range.assign(15, {0.0, 0.0});
  s.bone_direction.assign(15, {0.0, 0.0, 1.0});
  s.bone_cone_deg.assign(15, 0.0);
  auto bone = [&](int j, double lo, double hi, std::array<double, 3> dir, double cone) {
    s.bone_length_range[static_cast<size_t>(j)] = {lo, hi};
    s.bone_direction[static_cast<size_t>(j)] = dir;
    s.bone_cone_deg[static_cast<size_t>(j)] = cone;
  };
  bone(0, 380.0, 430.0, {0, 0, 1}, 15.0);       // mid-hip -> neck
  bone(1, 120.0, 160.0, {0, 0, 1}, 25.0);       // neck -> nose
  bone(3, 130.0, 160.0, {+1, 0, 0}, 15.0);      // neck -> l-shoulder
  bone(4, 220.0, 260.0, {+0.4, 0, -1}, 50.0);   // l-shoulder -> l-elbow
  bone(5, 200.0, 240.0, {+0.3, 0, -1}, 60.0);   // l-elbow -> l-wrist
  bone(9, 130.0, 160.0, {-1, 0, 0}, 15.0);      // neck -> r-shoulder
  bone(10, 220.0, 260.0, {-0.4, 0, -1}, 50.0);  // r-shoulder -> r-elbow
  bone(11, 200.0, 240.0, {-0.3, 0, -1}, 60.0);  // r-elbow -> r-wrist
  bone(6, 100.0, 130.0, {+1, 0, -0.3}, 10.0);   // mid-hip -> l-hip
  bone(7, 330.0, 380.0, {0, 0, -1}, 35.0);      // l-hip -> l-knee
  bone(8, 330.0, 380.0, {0, 0, -1}, 25.0);      // l-knee -> l-ankle
  bone(12, 100.0, 130.0, {-1, 0, -0.3}, 10.0);  // mid-hip -> r-hip
  bone(13, 330.0, 380.0, {0, 0, -1}, 35.0);     // r-hip -> r-knee
  bone(14, 330.0, 380.0, {0, 0, -1}, 25.0);     // r-knee -> r-ankle
  s.limb_pairs = {{0, 2},  {0, 1},  {0, 3},   {3, 4},   {4, 5},   {0, 9},  {9, 10},
                  {10, 11}, {2, 6},  {6, 7},   {7, 8},   {2, 12},  {12, 13}, {13, 14}};
  s.validate();
  return s;
}

}  // namespace sp3d
