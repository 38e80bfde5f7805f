#include "sp3d/scene_synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sp3d/rendering.hpp"

namespace sp3d {

PseudoNoiseModel PseudoNoiseModel::by_name(const std::string& name) {
  if (name == "clean") return clean();
  if (name == "default") return preset_default();
  if (name == "heavy") return heavy();
  throw InvalidConfig("unknown noise preset: " + name);
}

Aabb default_workspace() {
  return {Vec3(-3000.0, -3000.0, 0.0), Vec3(3000.0, 3000.0, 2000.0)};
}

// Roots are sampled well inside the workspace so full bodies stay inside
// every camera frustum and the person cube never leaves the coarse grid.
Aabb default_person_region() {
  return {Vec3(-1250.0, -1250.0, 820.0), Vec3(1250.0, 1250.0, 1020.0)};
}

VoxelGridSpec default_coarse_grid() {
  VoxelGridSpec g;
  g.center = Vec3(0.0, 0.0, 1000.0);
  g.extent = Vec3(6000.0, 6000.0, 2000.0);
  g.resolution = {48, 48, 16};
  return g;
}

VoxelGridSpec default_fine_grid_template() {
  VoxelGridSpec g;
  g.center = Vec3::Zero();
  g.extent = Vec3(2000.0, 2000.0, 2000.0);
  g.resolution = {24, 24, 24};
  return g;
}

std::vector<CameraCalibration> make_camera_rig(int n_views, const Aabb& workspace,
                                               double radius,
                                               std::pair<double, double> height_range,
                                               int image_width, int image_height,
                                               uint64_t seed) {
  if (n_views < 2) throw InvalidConfig("camera rig needs at least 2 views");
  Rng rng(Rng::mix(seed, 0xCA11B));
  const Vec3 target = workspace.center();
  std::vector<CameraCalibration> cams;
  cams.reserve(static_cast<size_t>(n_views));
  for (int i = 0; i < n_views; ++i) {
    const double jitter = rng.uniform(-0.25, 0.25) * (2.0 * M_PI / n_views);
    const double angle = 2.0 * M_PI * i / n_views + jitter;
    const double z = rng.uniform(height_range.first, height_range.second);
    const Vec3 pos(target.x() + radius * std::cos(angle),
                   target.y() + radius * std::sin(angle), z);
    const Vec3 forward = (target - pos).normalized();
    // Camera axes: x right, y down, z forward; image down approximates world down.
    Vec3 down = Vec3(0, 0, -1.0);
    down = (down - down.dot(forward) * forward).normalized();
    const Vec3 right = down.cross(forward);
    CameraCalibration cam;
    cam.id = i;
    cam.R.row(0) = right.transpose();
    cam.R.row(1) = down.transpose();
    cam.R.row(2) = forward.transpose();
    cam.t = -cam.R * pos;
    const double f = rng.uniform(0.72, 0.82) * image_width * (radius / 4500.0);
    cam.K << f, 0, image_width / 2.0, 0, f, image_height / 2.0, 0, 0, 1;
    cam.width = image_width;
    cam.height = image_height;
    cam.validate();
    cams.push_back(cam);
  }
  return cams;
}

namespace {

// Uniform direction in a cone of half-angle cone_deg about axis.
Vec3 sample_cone(Rng& rng, const Vec3& axis, double cone_deg) {
  const double cos_max = std::cos(cone_deg * M_PI / 180.0);
  const double c = rng.uniform(cos_max, 1.0);
  const double psi = rng.uniform(0.0, 2.0 * M_PI);
  const double s = std::sqrt(std::max(0.0, 1.0 - c * c));
  Vec3 u = std::abs(axis.z()) < 0.9 ? Vec3(0, 0, 1) : Vec3(1, 0, 0);
  const Vec3 e1 = axis.cross(u).normalized();
  const Vec3 e2 = axis.cross(e1);
  return (c * axis + s * (std::cos(psi) * e1 + std::sin(psi) * e2)).normalized();
}

std::vector<int> topo_order(const SkeletonSpec& spec) {
  std::vector<int> order;
  order.reserve(static_cast<size_t>(spec.joint_count()));
  std::vector<bool> placed(static_cast<size_t>(spec.joint_count()), false);
  order.push_back(spec.root());
  placed[static_cast<size_t>(spec.root())] = true;
  while (static_cast<int>(order.size()) < spec.joint_count()) {
    for (int j = 0; j < spec.joint_count(); ++j) {
      if (placed[static_cast<size_t>(j)]) continue;
      if (placed[static_cast<size_t>(spec.parent[static_cast<size_t>(j)])]) {
        order.push_back(j);
        placed[static_cast<size_t>(j)] = true;
      }
    }
  }
  return order;
}

const std::array<std::array<double, 3>, 8> kPersonPalette = {{
    {0.90, 0.25, 0.20}, {0.20, 0.55, 0.90}, {0.25, 0.80, 0.30}, {0.95, 0.75, 0.15},
    {0.75, 0.30, 0.85}, {0.15, 0.80, 0.80}, {0.95, 0.45, 0.65}, {0.60, 0.50, 0.20},
}};

void draw_segment(Tensor& img, const Vec2& a, const Vec2& b,
                  const std::array<double, 3>& color, double thickness) {
  const int h = static_cast<int>(img.dim(0));
  const int w = static_cast<int>(img.dim(1));
  const double r = thickness / 2.0;
  const int x0 = std::max(0, static_cast<int>(std::floor(std::min(a.x(), b.x()) - r - 1)));
  const int x1 = std::min(w - 1, static_cast<int>(std::ceil(std::max(a.x(), b.x()) + r + 1)));
  const int y0 = std::max(0, static_cast<int>(std::floor(std::min(a.y(), b.y()) - r - 1)));
  const int y1 = std::min(h - 1, static_cast<int>(std::ceil(std::max(a.y(), b.y()) + r + 1)));
  const Vec2 ab = b - a;
  const double len2 = ab.squaredNorm();
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      const Vec2 p(x, y);
      double t = len2 > 1e-12 ? (p - a).dot(ab) / len2 : 0.0;
      t = std::clamp(t, 0.0, 1.0);
      const double d = (p - (a + t * ab)).norm();
      const double alpha = std::clamp(r + 0.5 - d, 0.0, 1.0);
      if (alpha <= 0.0) continue;
      for (int ch = 0; ch < 3; ++ch) {
        double& px = img.at(y, x, ch);
        px = px * (1.0 - alpha) + color[static_cast<size_t>(ch)] * alpha;
      }
    }
  }
}

}  // namespace

Pose3DSet sample_poses(const SkeletonSpec& spec, int n_persons, const Aabb& workspace,
                       uint64_t seed) {
  if (n_persons < 1) throw InvalidConfig("need at least one person");
  spec.validate();
  Rng rng(Rng::mix(seed, 0x9053));
  // Roots by rejection until all pairwise distances clear the floor.
  std::vector<Vec3> roots;
  int attempts = 0;
  while (static_cast<int>(roots.size()) < n_persons) {
    if (++attempts > 1000)
      throw WorkspaceTooCrowded("could not place " + std::to_string(n_persons) +
                                " roots after 1000 attempts");
    Vec3 cand;
    for (int a = 0; a < 3; ++a) cand[a] = rng.uniform(workspace.lo[a], workspace.hi[a]);
    bool ok = true;
    for (const Vec3& r : roots)
      if ((cand - r).norm() < kMinPersonSeparationMm) {
        ok = false;
        break;
      }
    if (ok) roots.push_back(cand);
  }

  const int j = spec.joint_count();
  const auto order = topo_order(spec);
  Pose3DSet out;
  out.joints = Tensor({n_persons, j, 3});
  out.person_ids.resize(static_cast<size_t>(n_persons));
  for (int p = 0; p < n_persons; ++p) {
    out.person_ids[static_cast<size_t>(p)] = p;
    const double yaw = rng.uniform(0.0, 2.0 * M_PI);
    const double cy = std::cos(yaw), sy = std::sin(yaw);
    std::vector<Vec3> pos(static_cast<size_t>(j));
    pos[static_cast<size_t>(spec.root())] = roots[static_cast<size_t>(p)];
    for (int oi = 1; oi < j; ++oi) {
      const int joint = order[static_cast<size_t>(oi)];
      const auto& d = spec.bone_direction[static_cast<size_t>(joint)];
      // Rotate the canonical direction by the person yaw about world z.
      const Vec3 axis = Vec3(cy * d[0] - sy * d[1], sy * d[0] + cy * d[1], d[2]).normalized();
      const Vec3 dir = sample_cone(rng, axis, spec.bone_cone_deg[static_cast<size_t>(joint)]);
      const auto& [lo, hi] = spec.bone_length_range[static_cast<size_t>(joint)];
      const double len = rng.uniform(lo, hi);
      pos[static_cast<size_t>(joint)] =
          pos[static_cast<size_t>(spec.parent[static_cast<size_t>(joint)])] + len * dir;
    }
    for (int jj = 0; jj < j; ++jj)
      for (int a = 0; a < 3; ++a) out.joints.at(p, jj, a) = pos[static_cast<size_t>(jj)][a];
  }
  return out;
}

std::vector<Tensor> render_scene_images(const Pose3DSet& poses, const SkeletonSpec& spec,
                                        const std::vector<CameraCalibration>& cams,
                                        uint64_t seed) {
  std::vector<Tensor> images;
  images.reserve(cams.size());
  for (size_t c = 0; c < cams.size(); ++c) {
    const CameraCalibration& cam = cams[c];
    Rng rng(Rng::mix(seed, 0x136, static_cast<uint64_t>(c)));
    Tensor img({cam.height, cam.width, 3});
    for (int64_t i = 0; i < img.numel(); ++i)
      img[i] = std::clamp(0.48 + rng.normal(0.0, 0.02), 0.0, 1.0);
    for (int64_t p = 0; p < poses.person_count(); ++p) {
      const auto& color = kPersonPalette[static_cast<size_t>(p) % kPersonPalette.size()];
      for (int j = 0; j < spec.joint_count(); ++j) {
        const int par = spec.parent[static_cast<size_t>(j)];
        if (par < 0) continue;
        const Vec3 a3 = poses.joint(p, j);
        const Vec3 b3 = poses.joint(p, par);
        if (cam.depth_of(a3) <= kMinCameraDepthMm || cam.depth_of(b3) <= kMinCameraDepthMm)
          continue;
        draw_segment(img, project_point(cam, a3), project_point(cam, b3), color, 3.0);
      }
    }
    images.push_back(std::move(img));
  }
  return images;
}

Pose2DSet simulate_pseudo_2d(const Pose3DSet& poses,
                             const std::vector<CameraCalibration>& cams,
                             const PseudoNoiseModel& noise, uint64_t seed) {
  const int64_t c_views = static_cast<int64_t>(cams.size());
  const int64_t persons = poses.person_count();
  const int64_t joints = poses.joint_count();
  const bool noiseless =
      noise.sigma_px == 0.0 && noise.p_outlier == 0.0 && noise.p_drop == 0.0;

  Pose2DSet out;
  out.joints = Tensor({c_views, persons, joints, 2}, kInvisibleSentinel);
  out.confidence = Tensor({c_views, persons, joints});
  out.visibility = Tensor({c_views, persons, joints});

  for (int64_t c = 0; c < c_views; ++c) {
    const CameraCalibration& cam = cams[static_cast<size_t>(c)];
    Rng rng(Rng::mix(seed, 0x25E, static_cast<uint64_t>(c)));
    for (int64_t p = 0; p < persons; ++p) {
      const bool dropped = rng.uniform() < noise.p_drop;
      for (int64_t j = 0; j < joints; ++j) {
        if (dropped) continue;  // fully occluded in this view
        const Vec3 x = poses.joint(p, j);
        if (cam.depth_of(x) <= kMinCameraDepthMm) continue;
        Vec2 uv = project_point(cam, x);
        bool corrupted = false;
        if (noise.sigma_px > 0.0) {
          uv.x() += rng.normal(0.0, noise.sigma_px);
          uv.y() += rng.normal(0.0, noise.sigma_px);
        }
        if (noise.p_outlier > 0.0 && rng.uniform() < noise.p_outlier) {
          uv = Vec2(rng.uniform(0.0, cam.width), rng.uniform(0.0, cam.height));
          corrupted = true;
        }
        double conf;
        if (noiseless)
          conf = 1.0;
        else
          conf = corrupted ? rng.uniform(0.25, 0.65) : rng.uniform(0.75, 0.98);
        out.joints.at(c, p, j, 0) = uv.x();
        out.joints.at(c, p, j, 1) = uv.y();
        out.confidence.at(c, p, j) = conf;
        const bool inside =
            uv.x() >= 0.0 && uv.x() < cam.width && uv.y() >= 0.0 && uv.y() < cam.height;
        out.visibility.at(c, p, j) = inside ? 1.0 : 0.0;
      }
    }
    // Detections come back in arbitrary per-view order.
    if (persons > 1) {
      std::vector<int64_t> perm(static_cast<size_t>(persons));
      std::iota(perm.begin(), perm.end(), 0);
      for (int64_t i = persons - 1; i > 0; --i)
        std::swap(perm[static_cast<size_t>(i)],
                  perm[static_cast<size_t>(rng.uniform_int(0, i))]);
      Tensor jnt = out.joints, cnf = out.confidence, vis = out.visibility;
      for (int64_t p = 0; p < persons; ++p) {
        const int64_t src = perm[static_cast<size_t>(p)];
        for (int64_t j = 0; j < joints; ++j) {
          for (int k = 0; k < 2; ++k)
            out.joints.at(c, p, j, k) = jnt.at(c, src, j, k);
          out.confidence.at(c, p, j) = cnf.at(c, src, j);
          out.visibility.at(c, p, j) = vis.at(c, src, j);
        }
      }
    }
  }
  return out;
}

std::vector<SyntheticRootSample> generate_root_dataset(
    int n_samples, const std::vector<CameraCalibration>& cams, const Aabb& workspace,
    const VoxelGridSpec& grid, int max_roots, double sigma_2d, double sigma_3d,
    uint64_t seed) {
  if (max_roots < 1) throw InvalidConfig("max_roots must be >= 1");
  grid.validate();
  std::vector<SyntheticRootSample> out;
  out.reserve(static_cast<size_t>(std::max(0, n_samples)));
  const int hq = cams.empty() ? 0 : cams[0].height / 4;
  const int wq = cams.empty() ? 0 : cams[0].width / 4;
  for (int i = 0; i < n_samples; ++i) {
    Rng rng(Rng::mix(seed, 0xD007, static_cast<uint64_t>(i)));
    const int k = static_cast<int>(rng.uniform_int(1, max_roots));
    SyntheticRootSample sample;
    int attempts = 0;
    while (static_cast<int>(sample.roots.size()) < k) {
      if (++attempts > 1000)
        throw WorkspaceTooCrowded("root sampling rejection limit reached");
      Vec3 cand;
      for (int a = 0; a < 3; ++a) cand[a] = rng.uniform(workspace.lo[a], workspace.hi[a]);
      bool ok = true;
      for (const Vec3& r : sample.roots)
        if ((cand - r).norm() < kMinRootSampleSeparationMm) {
          ok = false;
          break;
        }
      if (ok) sample.roots.push_back(cand);
    }

    // Multi-view heatmaps of the projected roots.
    Tensor roots2d({static_cast<int64_t>(cams.size()), k, 2});
    Tensor vis({static_cast<int64_t>(cams.size()), k});
    for (size_t c = 0; c < cams.size(); ++c) {
      for (int r = 0; r < k; ++r) {
        const Vec3& x = sample.roots[static_cast<size_t>(r)];
        if (cams[c].depth_of(x) <= kMinCameraDepthMm) continue;
        const Vec2 uv = project_point(cams[c], x);
        roots2d.at(static_cast<int64_t>(c), r, 0) = uv.x();
        roots2d.at(static_cast<int64_t>(c), r, 1) = uv.y();
        vis.at(static_cast<int64_t>(c), r) = 1.0;
      }
    }
    sample.root_heatmaps = render_root_heatmaps(roots2d, vis, hq, wq, sigma_2d);

    // Target volume: per-voxel max of 3D Gaussians around the roots.
    sample.gt_root_volume =
        Tensor({grid.resolution[0], grid.resolution[1], grid.resolution[2]});
    const double inv2s2 = 1.0 / (2.0 * sigma_3d * sigma_3d);
    for (const Vec3& r : sample.roots) {
      int lo[3], hi[3];
      for (int a = 0; a < 3; ++a) {
        const double margin = kGaussianWindowSigmas * sigma_3d;
        lo[a] = std::max(0, static_cast<int>(std::ceil(
                                (r[a] - margin - (grid.center[a] - grid.extent[a] / 2)) /
                                grid.pitch(a))));
        hi[a] = std::min(grid.resolution[a] - 1,
                         static_cast<int>(std::floor(
                             (r[a] + margin - (grid.center[a] - grid.extent[a] / 2)) /
                             grid.pitch(a))));
      }
      for (int ix = lo[0]; ix <= hi[0]; ++ix)
        for (int iy = lo[1]; iy <= hi[1]; ++iy)
          for (int iz = lo[2]; iz <= hi[2]; ++iz) {
            const Vec3 c = grid.voxel_center(ix, iy, iz);
            const double v = std::exp(-(c - r).squaredNorm() * inv2s2);
            double& dst = sample.gt_root_volume.at(ix, iy, iz);
            if (v > dst) dst = v;
          }
    }
    out.push_back(std::move(sample));
  }
  return out;
}

SyntheticScene generate_scene(const SceneConfig& cfg) {
  SyntheticScene scene;
  scene.skeleton = SkeletonSpec::panoptic15();
  scene.workspace = default_workspace();
  scene.seed = cfg.seed;
  scene.cams = make_camera_rig(cfg.views, default_workspace(), 4500.0, {2300.0, 2900.0},
                               cfg.image_width, cfg.image_height, cfg.seed);
  const Aabb region = default_person_region();
  scene.frames.reserve(static_cast<size_t>(cfg.frames));
  for (int f = 0; f < cfg.frames; ++f) {
    SceneFrame frame;
    frame.id = f;
    const uint64_t fs = Rng::mix(cfg.seed, 0xF4A3E5, static_cast<uint64_t>(f));
    Rng pick(Rng::mix(fs, 0xC0));
    const int n_p = static_cast<int>(pick.uniform_int(1, std::max(1, cfg.persons)));
    frame.gt_poses = sample_poses(scene.skeleton, n_p, region, Rng::mix(fs, 1));
    frame.images = render_scene_images(frame.gt_poses, scene.skeleton, scene.cams,
                                       Rng::mix(fs, 2));
    frame.pseudo_2d = simulate_pseudo_2d(frame.gt_poses, scene.cams, cfg.noise,
                                         Rng::mix(fs, 3));
    scene.frames.push_back(std::move(frame));
  }
  return scene;
}

}  // namespace sp3d
