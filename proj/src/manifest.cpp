#include "sp3d/manifest.hpp"

#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "sp3d/blob.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace sp3d {

namespace {

json skeleton_to_json(const SkeletonSpec& s) {
  json j;
  j["joint_names"] = s.joint_names;
  j["parent"] = s.parent;
  json ranges = json::array();
  for (const auto& [lo, hi] : s.bone_length_range) ranges.push_back({lo, hi});
  j["bone_length_range"] = ranges;
  json dirs = json::array();
  for (const auto& d : s.bone_direction) dirs.push_back({d[0], d[1], d[2]});
  j["bone_direction"] = dirs;
  j["bone_cone_deg"] = s.bone_cone_deg;
  json limbs = json::array();
  for (const auto& [a, b] : s.limb_pairs) limbs.push_back({a, b});
  j["limb_pairs"] = limbs;
  return j;
}

SkeletonSpec skeleton_from_json(const json& j) {
  SkeletonSpec s;
  s.joint_names = j.at("joint_names").get<std::vector<std::string>>();
  s.parent = j.at("parent").get<std::vector<int>>();
  for (const auto& r : j.at("bone_length_range"))
    s.bone_length_range.emplace_back(r.at(0).get<double>(), r.at(1).get<double>());
  for (const auto& d : j.at("bone_direction"))
    s.bone_direction.push_back({d.at(0).get<double>(), d.at(1).get<double>(),
                                d.at(2).get<double>()});
  s.bone_cone_deg = j.at("bone_cone_deg").get<std::vector<double>>();
  for (const auto& l : j.at("limb_pairs"))
    s.limb_pairs.emplace_back(l.at(0).get<int>(), l.at(1).get<int>());
  s.validate();
  return s;
}

json camera_to_json(const CameraCalibration& cam) {
  json j;
  j["id"] = cam.id;
  std::vector<double> k(9), r(9);
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) {
      k[static_cast<size_t>(a * 3 + b)] = cam.K(a, b);
      r[static_cast<size_t>(a * 3 + b)] = cam.R(a, b);
    }
  j["K"] = k;
  j["R"] = r;
  j["t"] = {cam.t.x(), cam.t.y(), cam.t.z()};
  j["image_size"] = {cam.width, cam.height};
  return j;
}

CameraCalibration camera_from_json(const json& j) {
  CameraCalibration cam;
  cam.id = j.at("id").get<int>();
  const auto k = j.at("K").get<std::vector<double>>();
  const auto r = j.at("R").get<std::vector<double>>();
  if (k.size() != 9 || r.size() != 9) throw InvalidCalibration("K/R need 9 entries");
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) {
      cam.K(a, b) = k[static_cast<size_t>(a * 3 + b)];
      cam.R(a, b) = r[static_cast<size_t>(a * 3 + b)];
    }
  const auto t = j.at("t").get<std::vector<double>>();
  cam.t = Vec3(t.at(0), t.at(1), t.at(2));
  cam.width = j.at("image_size").at(0).get<int>();
  cam.height = j.at("image_size").at(1).get<int>();
  if (j.contains("distortion")) {
    for (double d : j.at("distortion").get<std::vector<double>>())
      if (d != 0.0)
        throw InvalidCalibration("distortion is not supported; undistort upstream");
  }
  cam.validate();
  return cam;
}

json aabb_to_json(const Aabb& box) {
  return {{"lo", {box.lo.x(), box.lo.y(), box.lo.z()}},
          {"hi", {box.hi.x(), box.hi.y(), box.hi.z()}}};
}

Aabb aabb_from_json(const json& j) {
  Aabb b;
  for (int a = 0; a < 3; ++a) {
    b.lo[a] = j.at("lo").at(static_cast<size_t>(a)).get<double>();
    b.hi[a] = j.at("hi").at(static_cast<size_t>(a)).get<double>();
  }
  return b;
}

json grid_to_json(const VoxelGridSpec& g) {
  return {{"center", {g.center.x(), g.center.y(), g.center.z()}},
          {"extent", {g.extent.x(), g.extent.y(), g.extent.z()}},
          {"resolution", {g.resolution[0], g.resolution[1], g.resolution[2]}}};
}

VoxelGridSpec grid_from_json(const json& j) {
  VoxelGridSpec g;
  for (int a = 0; a < 3; ++a) {
    g.center[a] = j.at("center").at(static_cast<size_t>(a)).get<double>();
    g.extent[a] = j.at("extent").at(static_cast<size_t>(a)).get<double>();
    g.resolution[static_cast<size_t>(a)] =
        j.at("resolution").at(static_cast<size_t>(a)).get<int>();
  }
  g.validate();
  return g;
}

std::string frame_blob_name(int id, const std::string& kind) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "frame%06d_%s.spt", id, kind.c_str());
  return std::string("blobs/") + buf;
}

Tensor pack_pseudo(const Pose2DSet& p) {
  Tensor out({p.view_count(), p.person_count(), p.joint_count(), 4});
  for (int64_t c = 0; c < p.view_count(); ++c)
    for (int64_t q = 0; q < p.person_count(); ++q)
      for (int64_t j = 0; j < p.joint_count(); ++j) {
        out.at(c, q, j, 0) = p.joints.at(c, q, j, 0);
        out.at(c, q, j, 1) = p.joints.at(c, q, j, 1);
        out.at(c, q, j, 2) = p.confidence.at(c, q, j);
        out.at(c, q, j, 3) = p.visibility.at(c, q, j);
      }
  return out;
}

Pose2DSet unpack_pseudo(const Tensor& t) {
  if (t.ndim() != 4 || t.dim(3) != 4) throw IoError("pseudo blob must be (C, P, J, 4)");
  Pose2DSet p;
  p.joints = Tensor({t.dim(0), t.dim(1), t.dim(2), 2});
  p.confidence = Tensor({t.dim(0), t.dim(1), t.dim(2)});
  p.visibility = Tensor({t.dim(0), t.dim(1), t.dim(2)});
  for (int64_t c = 0; c < t.dim(0); ++c)
    for (int64_t q = 0; q < t.dim(1); ++q)
      for (int64_t j = 0; j < t.dim(2); ++j) {
        p.joints.at(c, q, j, 0) = t.at(c, q, j, 0);
        p.joints.at(c, q, j, 1) = t.at(c, q, j, 1);
        p.confidence.at(c, q, j) = t.at(c, q, j, 2);
        p.visibility.at(c, q, j) = t.at(c, q, j, 3);
      }
  return p;
}

void write_json_file(const std::string& path, const json& j) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out << j.dump(2) << "\n";
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path);
  return json::parse(in);
}

}  // namespace

SceneDirWriter::SceneDirWriter(std::string dir, const SkeletonSpec& skeleton,
                               const std::vector<CameraCalibration>& cams,
                               const Aabb& workspace, uint64_t seed)
    : dir_(std::move(dir)), skeleton_(skeleton), cams_(cams), workspace_(workspace),
      seed_(seed) {
  fs::create_directories(fs::path(dir_) / "blobs");
}

void SceneDirWriter::add_frame(const SceneFrame& frame) {
  if (finalized_) throw IoError("scene writer already finalized");
  write_blob_file(dir_ + "/" + frame_blob_name(frame.id, "gt"), frame.gt_poses.joints);
  write_blob_file(dir_ + "/" + frame_blob_name(frame.id, "pseudo"),
                  pack_pseudo(frame.pseudo_2d));
  for (size_t c = 0; c < frame.images.size(); ++c)
    write_blob_file(
        dir_ + "/" + frame_blob_name(frame.id, "img" + std::to_string(c)),
        frame.images[c]);
  frame_ids_.push_back(frame.id);
}

void SceneDirWriter::finalize() {
  json m;
  m["schema"] = "selfpose3d-scene/1";
  m["skeleton"] = skeleton_to_json(skeleton_);
  json cams = json::array();
  for (const auto& c : cams_) cams.push_back(camera_to_json(c));
  m["cameras"] = cams;
  m["workspace"] = aabb_to_json(workspace_);
  m["seed"] = seed_;
  json frames = json::array();
  for (int id : frame_ids_) {
    json f;
    f["id"] = id;
    f["gt_poses_blob"] = frame_blob_name(id, "gt");
    f["pseudo_2d_blob"] = frame_blob_name(id, "pseudo");
    json imgs = json::array();
    for (size_t c = 0; c < cams_.size(); ++c)
      imgs.push_back(frame_blob_name(id, "img" + std::to_string(c)));
    f["image_blobs"] = imgs;
    frames.push_back(f);
  }
  m["frames"] = frames;
  write_json_file(dir_ + "/manifest.json", m);
  write_calibration(dir_ + "/calibration.json", cams_);
  finalized_ = true;
}

void write_scene_dir(const std::string& dir, const SyntheticScene& scene) {
  SceneDirWriter w(dir, scene.skeleton, scene.cams, scene.workspace, scene.seed);
  for (const auto& f : scene.frames) w.add_frame(f);
  w.finalize();
}

SceneReader::SceneReader(std::string dir) : dir_(std::move(dir)) {
  const json m = read_json_file(dir_ + "/manifest.json");
  skeleton_ = skeleton_from_json(m.at("skeleton"));
  for (const auto& c : m.at("cameras")) cams_.push_back(camera_from_json(c));
  workspace_ = aabb_from_json(m.at("workspace"));
  seed_ = m.at("seed").get<uint64_t>();
  for (const auto& f : m.at("frames")) {
    frame_ids_.push_back(f.at("id").get<int>());
    if (f.at("image_blobs").size() != cams_.size())
      throw IoError("frame image count differs from camera count");
  }
}

SceneFrame SceneReader::load_frame_poses(int64_t index) const {
  if (index < 0 || index >= frame_count()) throw IndexOutOfRange("frame index");
  const int id = frame_ids_[static_cast<size_t>(index)];
  SceneFrame f;
  f.id = id;
  f.gt_poses.joints = read_blob_file(dir_ + "/" + frame_blob_name(id, "gt"));
  const int64_t persons = f.gt_poses.joints.numel() ? f.gt_poses.joints.dim(0) : 0;
  for (int64_t p = 0; p < persons; ++p) f.gt_poses.person_ids.push_back(static_cast<int>(p));
  f.pseudo_2d = unpack_pseudo(read_blob_file(dir_ + "/" + frame_blob_name(id, "pseudo")));
  return f;
}

SceneFrame SceneReader::load_frame(int64_t index) const {
  SceneFrame f = load_frame_poses(index);
  for (size_t c = 0; c < cams_.size(); ++c)
    f.images.push_back(
        read_blob_file(dir_ + "/" + frame_blob_name(f.id, "img" + std::to_string(c))));
  return f;
}

std::vector<CameraCalibration> load_calibration(const std::string& path) {
  const json j = read_json_file(path);
  std::vector<CameraCalibration> cams;
  for (const auto& c : j.at("cameras")) cams.push_back(camera_from_json(c));
  if (cams.empty()) throw InvalidCalibration("no cameras in " + path);
  return cams;
}

void write_calibration(const std::string& path,
                       const std::vector<CameraCalibration>& cams) {
  json j;
  j["schema"] = "selfpose3d-calibration/1";
  json arr = json::array();
  for (const auto& c : cams) arr.push_back(camera_to_json(c));
  j["cameras"] = arr;
  write_json_file(path, j);
}

void write_root_dataset(const std::string& dir,
                        const std::vector<SyntheticRootSample>& samples,
                        const VoxelGridSpec& grid, double sigma_2d, double sigma_3d,
                        uint64_t seed) {
  fs::create_directories(fs::path(dir) / "blobs");
  json m;
  m["schema"] = "selfpose3d-roots/1";
  m["grid"] = grid_to_json(grid);
  m["sigma_2d"] = sigma_2d;
  m["sigma_3d"] = sigma_3d;
  m["seed"] = seed;
  json arr = json::array();
  for (size_t i = 0; i < samples.size(); ++i) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "blobs/sample%06zu", i);
    const std::string base = buf;
    write_blob_file(dir + "/" + base + "_hm.spt", samples[i].root_heatmaps);
    write_blob_file(dir + "/" + base + "_vol.spt", samples[i].gt_root_volume);
    json roots = json::array();
    for (const auto& r : samples[i].roots) roots.push_back({r.x(), r.y(), r.z()});
    arr.push_back({{"heatmaps_blob", base + "_hm.spt"},
                   {"volume_blob", base + "_vol.spt"},
                   {"roots", roots}});
  }
  m["samples"] = arr;
  write_json_file(dir + "/root_dataset.json", m);
}

RootDataset load_root_dataset(const std::string& dir) {
  const json m = read_json_file(dir + "/root_dataset.json");
  RootDataset out;
  out.grid = grid_from_json(m.at("grid"));
  out.sigma_2d = m.at("sigma_2d").get<double>();
  out.sigma_3d = m.at("sigma_3d").get<double>();
  out.seed = m.at("seed").get<uint64_t>();
  for (const auto& s : m.at("samples")) {
    SyntheticRootSample sample;
    sample.root_heatmaps = read_blob_file(dir + "/" + s.at("heatmaps_blob").get<std::string>());
    sample.gt_root_volume = read_blob_file(dir + "/" + s.at("volume_blob").get<std::string>());
    for (const auto& r : s.at("roots"))
      sample.roots.emplace_back(r.at(0).get<double>(), r.at(1).get<double>(),
                                r.at(2).get<double>());
    out.samples.push_back(std::move(sample));
  }
  return out;
}

}  // namespace sp3d
