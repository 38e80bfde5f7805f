#include "sp3d/root_localizer.hpp"

#include <algorithm>
#include <cmath>

#include "sp3d/losses.hpp"

namespace sp3d {

Tensor extract_root_heatmaps(const Tensor& heatmaps, int root_channel) {
  if (heatmaps.ndim() != 4) throw ShapeMismatch("expected (C, J, Hq, Wq)");
  if (root_channel < 0 || root_channel >= heatmaps.dim(1))
    throw IndexOutOfRange("root channel out of range");
  const int64_t c_views = heatmaps.dim(0);
  const int64_t joints = heatmaps.dim(1);
  const int64_t px = heatmaps.dim(2) * heatmaps.dim(3);
  Tensor out({c_views, heatmaps.dim(2), heatmaps.dim(3)});
  for (int64_t c = 0; c < c_views; ++c)
    std::copy_n(heatmaps.data() + (c * joints + root_channel) * px, px,
                out.data() + c * px);
  return out;
}

std::vector<RootProposal> nms_3d(const Tensor& volume, const VoxelGridSpec& grid,
                                 int window, double threshold, int max_proposals) {
  if (window < 3 || window % 2 == 0) throw InvalidConfig("nms window must be odd >= 3");
  if (volume.ndim() != 3 || volume.dim(0) != grid.resolution[0] ||
      volume.dim(1) != grid.resolution[1] || volume.dim(2) != grid.resolution[2])
    throw ShapeMismatch("volume/grid mismatch in nms_3d");
  const int half = window / 2;
  const auto [rx, ry, rz] = grid.resolution;

  std::vector<RootProposal> found;
  for (int ix = 0; ix < rx; ++ix) {
    for (int iy = 0; iy < ry; ++iy) {
      for (int iz = 0; iz < rz; ++iz) {
        const double v = volume.at(ix, iy, iz);
        if (v < threshold) continue;
        bool is_peak = true;
        for (int dx = -half; dx <= half && is_peak; ++dx)
          for (int dy = -half; dy <= half && is_peak; ++dy)
            for (int dz = -half; dz <= half && is_peak; ++dz) {
              if (dx == 0 && dy == 0 && dz == 0) continue;
              const int ux = ix + dx, uy = iy + dy, uz = iz + dz;
              if (ux < 0 || ux >= rx || uy < 0 || uy >= ry || uz < 0 || uz >= rz)
                continue;
              const double u = volume.at(ux, uy, uz);
              if (u > v) is_peak = false;
              // On exact ties only the lexicographically smallest index wins.
              else if (u == v &&
                       std::array<int, 3>{ux, uy, uz} < std::array<int, 3>{ix, iy, iz})
                is_peak = false;
            }
        if (!is_peak) continue;
        RootProposal prop;
        prop.voxel_index = {ix, iy, iz};
        prop.score = v;
        // Sub-voxel: center of mass of the 3^3 neighborhood; bounded within
        // one voxel pitch of the peak because the center weight is positive.
        Vec3 acc = Vec3::Zero();
        double wsum = 0.0;
        for (int dx = -1; dx <= 1; ++dx)
          for (int dy = -1; dy <= 1; ++dy)
            for (int dz = -1; dz <= 1; ++dz) {
              const int ux = ix + dx, uy = iy + dy, uz = iz + dz;
              if (ux < 0 || ux >= rx || uy < 0 || uy >= ry || uz < 0 || uz >= rz)
                continue;
              const double w = std::max(0.0, volume.at(ux, uy, uz));
              acc += w * grid.voxel_center(ux, uy, uz);
              wsum += w;
            }
        prop.position = wsum > 0.0 ? Vec3(acc / wsum) : grid.voxel_center(ix, iy, iz);
        found.push_back(prop);
      }
    }
  }
  std::stable_sort(found.begin(), found.end(),
                   [](const RootProposal& a, const RootProposal& b) {
                     return a.score > b.score;
                   });
  if (static_cast<int>(found.size()) > max_proposals)
    found.resize(static_cast<size_t>(max_proposals));
  return found;
}

std::vector<RootProposal> detect_roots(const Tensor& g, const UnprojectionPlan& plan,
                                       const HyperParams& hyper, double relative_floor) {
  Tensor masked = g;
  const int64_t nvox = plan.grid.num_voxels();
  if (masked.numel() != nvox) throw ShapeMismatch("volume/plan mismatch in detect_roots");
  for (int64_t v = 0; v < nvox; ++v)
    if (plan.view_count[static_cast<size_t>(v)] < 2) masked[v] = 0.0;
  auto props = nms_3d(masked, plan.grid, hyper.nms_window, hyper.nms_threshold,
                      hyper.max_proposals);
  // Optional relative floor: the raw unprojected volume concentrates full
  // multi-view agreement near 1.0 while single-ray ghosts stay well below
  // half of it, so the oracle path prunes on score ratio.
  if (relative_floor > 0.0 && !props.empty()) {
    const double floor_score = relative_floor * props.front().score;
    std::erase_if(props,
                  [&](const RootProposal& p) { return p.score < floor_score; });
  }
  return props;
}

namespace {

// (C, Hq, Wq) root heatmaps -> (1, 1, X, Y, Z) network input.
Tensor unproject_root_features(const Tensor& root_heatmaps,
                               const std::vector<CameraCalibration>& cams,
                               const VoxelGridSpec& grid, const AffineAugmentation& t) {
  const Tensor channels = root_heatmaps.reshaped(
      {root_heatmaps.dim(0), 1, root_heatmaps.dim(1), root_heatmaps.dim(2)});
  FeatureVolume f = unproject_heatmaps(channels, cams, grid, t);
  return f.data.reshaped({1, 1, grid.resolution[0], grid.resolution[1],
                          grid.resolution[2]});
}

}  // namespace

RootLocalization localize_roots(const Tensor& root_heatmaps0,
                                const Tensor& root_heatmaps1,
                                const Tensor& root_heatmaps2,
                                const std::vector<CameraCalibration>& cams,
                                const AffineAugmentation& t1, const AffineAugmentation& t2,
                                ModelBundle& bundle, bool bypass_root_net) {
  ad::NoGradGuard ng;
  const AffineAugmentation t0 = AffineAugmentation::identity(t1.pivot);
  const VoxelGridSpec& grid = bundle.coarse_grid;
  const int hq = static_cast<int>(root_heatmaps0.dim(1));
  const int wq = static_cast<int>(root_heatmaps0.dim(2));
  RootLocalization out;
  const Tensor f0 = unproject_root_features(root_heatmaps0, cams, grid, t0);
  const Tensor f1 = unproject_root_features(root_heatmaps1, cams, grid, t1);
  const Tensor f2 = unproject_root_features(root_heatmaps2, cams, grid, t2);
  auto to_volume = [&](const Tensor& f) {
    if (bypass_root_net)
      return f.reshaped({grid.resolution[0], grid.resolution[1], grid.resolution[2]});
    auto g = bundle.root_net.forward(ad::constant(f));
    return g->value.reshaped({grid.resolution[0], grid.resolution[1], grid.resolution[2]});
  };
  out.g0 = to_volume(f0);
  out.g1 = to_volume(f1);
  out.g2 = to_volume(f2);
  const auto plan2 = make_unprojection_plan(cams, grid, t2, hq, wq);
  out.proposals = detect_roots(out.g2, plan2, bundle.hyper, bypass_root_net ? 0.5 : 0.0);
  return out;
}

RootStepLosses train_root_step(const RootTrainInputs& inputs, ModelBundle& bundle,
                               AdamOptimizer& opt) {
  if (!inputs.synthetic && !inputs.consistency)
    throw InvalidConfig("train_root_step needs at least one input kind");
  RootStepLosses losses;
  opt.zero_grad();
  std::vector<ad::Var> terms;
  if (inputs.synthetic) {
    const auto& [features, targets] = *inputs.synthetic;
    auto g_syn = bundle.root_net.forward(ad::constant(features));
    auto l_syn = root_syn_loss(g_syn, targets);
    losses.synthetic = l_syn->value[0];
    terms.push_back(l_syn);
  }
  if (inputs.consistency) {
    const auto& f = *inputs.consistency;
    auto g0 = bundle.root_net.forward(ad::constant(f[0]));
    auto g1 = bundle.root_net.forward(ad::constant(f[1]));
    auto g2 = bundle.root_net.forward(ad::constant(f[2]));
    auto l_c = root_consistency_loss(g0, g1, g2);
    losses.consistency = l_c->value[0];
    terms.push_back(l_c);
  }
  auto total = ad::linear_combination(terms, std::vector<double>(terms.size(), 1.0));
  losses.total = total->value[0];
  if (!std::isfinite(losses.total)) throw DivergenceDetected("root loss is not finite");
  ad::backward(total);
  opt.step();
  return losses;
}

}  // namespace sp3d
