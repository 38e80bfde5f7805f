#include "sp3d/inference.hpp"

#include <json.hpp>

#include "sp3d/rendering.hpp"

using nlohmann::json;

namespace sp3d {

namespace {

// (V copies of (H, W, 3)) -> (V, 3, H, W) network input.
Tensor images_to_batch(const std::vector<Tensor>& images) {
  const int64_t v = static_cast<int64_t>(images.size());
  const int64_t h = images[0].dim(0), w = images[0].dim(1);
  Tensor out({v, 3, h, w});
  for (int64_t c = 0; c < v; ++c)
    for (int64_t y = 0; y < h; ++y)
      for (int64_t x = 0; x < w; ++x)
        for (int64_t ch = 0; ch < 3; ++ch)
          out.at(c, ch, y, x) = images[static_cast<size_t>(c)].at(y, x, ch);
  return out;
}

}  // namespace

FramePredictions infer_frame(const SceneFrame& frame,
                             const std::vector<CameraCalibration>& cams,
                             ModelBundle& bundle, bool oracle) {
  ad::NoGradGuard ng;
  const int hq = cams[0].height / 4;
  const int wq = cams[0].width / 4;
  const AffineAugmentation ident =
      AffineAugmentation::identity(Vec2(cams[0].width / 2.0, cams[0].height / 2.0));

  Tensor heatmaps;  // (C, J, Hq, Wq)
  if (oracle) {
    heatmaps = render_pose_heatmaps(frame.pseudo_2d, hq, wq, bundle.hyper.sigma_hm);
  } else {
    if (frame.images.empty()) throw InvalidConfig("inference needs images");
    auto h = bundle.heatmap_net_2d.forward(ad::constant(images_to_batch(frame.images)));
    heatmaps = h->value;
  }

  const int root_channel = bundle.skeleton.root();
  const Tensor root_hm = extract_root_heatmaps(heatmaps, root_channel);
  RootLocalization roots = localize_roots(root_hm, root_hm, root_hm, cams, ident, ident,
                                          bundle, /*bypass_root_net=*/oracle);

  FramePredictions out;
  const int64_t joints = bundle.config.joints;
  if (roots.proposals.empty()) {
    out.poses.joints = Tensor({0, joints, 3});
    return out;
  }
  BottleneckPoses poses = estimate_bottleneck_poses(
      roots.proposals, ad::constant(heatmaps), ad::constant(heatmaps), cams, ident, ident,
      bundle, /*bypass_pose_net=*/oracle);
  out.poses.joints = poses.y1->value;
  for (const auto& p : roots.proposals) out.scores.push_back(p.score);
  for (size_t i = 0; i < roots.proposals.size(); ++i)
    out.poses.person_ids.push_back(static_cast<int>(i));
  return out;
}

SceneEvalResult evaluate_scene(const SceneReader& scene, ModelBundle& bundle,
                               int64_t begin, int64_t end, bool oracle) {
  std::vector<FramePredictions> preds;
  std::vector<Pose3DSet> gts;
  for (int64_t f = begin; f < end; ++f) {
    const SceneFrame frame = oracle ? scene.load_frame_poses(f) : scene.load_frame(f);
    preds.push_back(infer_frame(frame, scene.cams(), bundle, oracle));
    gts.push_back(frame.gt_poses);
  }
  SceneEvalResult out;
  out.frames = end - begin;
  out.report = evaluate_poses(preds, gts, scene.skeleton().limb_pairs);
  return out;
}

std::string report_to_json(const EvalReport& report, const std::string& note) {
  json j;
  j["schema"] = "selfpose3d-report/1";
  // All-points interpolated AP (precision envelope over recall).
  j["pr_interpolation"] = "all-points";
  if (!note.empty()) j["note"] = note;
  json ap;
  for (const auto& [t, v] : report.ap) ap[std::to_string(t)] = v;
  j["ap"] = ap;
  j["recall_500"] = report.recall_500;
  j["mpjpe_mm"] = report.mpjpe_mm;
  json actors;
  for (const auto& [a, v] : report.pcp.per_actor) actors[std::to_string(a)] = v;
  j["pcp"] = {{"per_actor", actors}, {"average", report.pcp.average}};
  j["counts"] = {{"matched", report.matched},
                 {"missed", report.missed},
                 {"false_positives", report.false_positives}};
  return j.dump(2) + "\n";
}

EvalReport report_from_json(const std::string& text) {
  const json j = json::parse(text);
  if (j.at("schema").get<std::string>() != "selfpose3d-report/1")
    throw IoError("unknown report schema");
  EvalReport r;
  for (const auto& [k, v] : j.at("ap").items()) r.ap[std::stoi(k)] = v.get<double>();
  r.recall_500 = j.at("recall_500").get<double>();
  r.mpjpe_mm = j.at("mpjpe_mm").get<double>();
  for (const auto& [k, v] : j.at("pcp").at("per_actor").items())
    r.pcp.per_actor[std::stoi(k)] = v.get<double>();
  r.pcp.average = j.at("pcp").at("average").get<double>();
  r.matched = j.at("counts").at("matched").get<int64_t>();
  r.missed = j.at("counts").at("missed").get<int64_t>();
  r.false_positives = j.at("counts").at("false_positives").get<int64_t>();
  return r;
}

}  // namespace sp3d
