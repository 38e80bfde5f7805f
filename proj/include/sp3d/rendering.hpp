#pragma once

#include <cstdint>
#include <vector>

#include "sp3d/geometry.hpp"
#include "sp3d/tensor.hpp"

namespace sp3d {

// Gaussian rendering uses unnormalized peaks (amplitude = weight, 1.0 max) at
// exact floating-point joint positions; multiple joints in a channel combine
// by per-pixel max. The kernel is evaluated inside a 3.5-sigma square window
// and is exactly zero outside; the truncated boundary value is
// exp(-3.5^2/2) ~ 2.2e-3, small enough to keep the discrete Gaussian mass
// within 1% of 2*pi*sigma^2.
constexpr double kGaussianWindowSigmas = 3.5;
constexpr double kDefaultHeatmapSigma = 3.0;

namespace detail {
// Shared kernel for the plain and autodiff renderers: identical arithmetic so
// prediction- and pseudo-rendered maps match bitwise on equal inputs.
// xy: n joints in heatmap px; winners (optional) records the argmax joint per
// pixel, -1 where no window covers the pixel.
void render_gaussian_channel(const double* xy, const double* weight,
                             const uint8_t* active, int n, double sigma, int hq,
                             int wq, double* out, int32_t* winners);
}  // namespace detail

// One channel from a joint list: pairs of (heatmap-px position, weight).
Tensor render_gaussian_heatmap(const std::vector<std::pair<Vec2, double>>& joints,
                               int hq, int wq, double sigma);

// (C, P, J, 2) image-px poses -> (C, J, Hq, Wq) heatmaps. Coordinates are
// divided by the heatmap stride; weight = confidence; invisible joints skip.
Tensor render_pose_heatmaps(const Pose2DSet& poses, int hq, int wq, double sigma);

// Root-only variant: channel (C, Hq, Wq) from 2D root positions per view.
Tensor render_root_heatmaps(const Tensor& roots_2d, const Tensor& visibility, int hq,
                            int wq, double sigma);

// Soft-argmax decode of a (X, Y, Z) score volume to world mm.
Vec3 soft_argmax_3d(const Tensor& volume, const VoxelGridSpec& grid, double beta);

// Per-joint soft-argmax of (J, X, Y, Z) -> (J, 3).
Tensor decode_volume_poses(const Tensor& joint_volumes, const VoxelGridSpec& grid,
                           double beta);

}  // namespace sp3d
