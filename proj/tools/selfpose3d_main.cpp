#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "sp3d/checkpoint.hpp"
#include "sp3d/checks.hpp"
#include "sp3d/inference.hpp"
#include "sp3d/manifest.hpp"
#include "sp3d/parallel.hpp"
#include "sp3d/pipeline.hpp"
#include "sp3d/plots.hpp"
#include "sp3d/rendering.hpp"

namespace fs = std::filesystem;
using namespace sp3d;

namespace {

int run_synth(const std::string& out, int frames, int persons, int views, uint64_t seed,
              const std::string& noise, int image_size) {
  SceneConfig cfg;
  cfg.frames = frames;
  cfg.persons = persons;
  cfg.views = views;
  cfg.seed = seed;
  cfg.noise = PseudoNoiseModel::by_name(noise);
  cfg.image_width = image_size;
  cfg.image_height = image_size;

  // Stream frames to disk instead of holding the whole scene in memory.
  const SkeletonSpec skeleton = SkeletonSpec::panoptic15();
  const auto cams = make_camera_rig(cfg.views, default_workspace(), 4500.0,
                                    {2300.0, 2900.0}, cfg.image_width, cfg.image_height,
                                    cfg.seed);
  SceneDirWriter writer(out, skeleton, cams, default_workspace(), cfg.seed);
  const Aabb region = default_person_region();
  for (int f = 0; f < cfg.frames; ++f) {
    SceneFrame frame;
    frame.id = f;
    const uint64_t fs = Rng::mix(cfg.seed, 0xF4A3E5, static_cast<uint64_t>(f));
    Rng pick(Rng::mix(fs, 0xC0));
    const int n_p = static_cast<int>(pick.uniform_int(1, std::max(1, cfg.persons)));
    frame.gt_poses = sample_poses(skeleton, n_p, region, Rng::mix(fs, 1));
    frame.images = render_scene_images(frame.gt_poses, skeleton, cams, Rng::mix(fs, 2));
    frame.pseudo_2d = simulate_pseudo_2d(frame.gt_poses, cams, cfg.noise, Rng::mix(fs, 3));
    writer.add_frame(frame);
  }
  writer.finalize();
  std::cout << "wrote scene: " << out << " (" << cfg.frames << " frames, " << cfg.views
            << " views)\n";
  return 0;
}

int run_gen_roots(const std::string& out, int samples, int max_roots, uint64_t seed,
                  const std::string& calib, double sigma_2d, double sigma_3d_pitches) {
  const auto cams = load_calibration(calib);
  const VoxelGridSpec grid = default_coarse_grid();
  Aabb region = default_person_region();
  region.lo -= Vec3(300.0, 300.0, 100.0);
  region.hi += Vec3(300.0, 300.0, 100.0);
  const double sigma_3d = sigma_3d_pitches * grid.pitch(0);
  const auto data = generate_root_dataset(samples, cams, region, grid, max_roots,
                                          sigma_2d, sigma_3d, seed);
  write_root_dataset(out, data, grid, sigma_2d, sigma_3d, seed);
  std::cout << "wrote root dataset: " << out << " (" << data.size() << " samples)\n";
  return 0;
}

int run_train(const std::string& config_path, const std::string& scene,
              const std::string& stage, const std::string& out) {
  const TrainConfig cfg =
      config_path.empty() ? parse_train_config_text("") : load_train_config(config_path);
  Trainer trainer(cfg, scene, out);
  if (stage == "all")
    trainer.run_all();
  else
    trainer.run_stage(stage);
  std::cout << "training done; checkpoints in " << out << "\n";
  return 0;
}

ModelBundle bundle_from_checkpoint(const std::string& path) {
  const Checkpoint ckpt = load_checkpoint(path);
  ModelBundle bundle = ModelBundle::create(ckpt.config, ckpt.seed);
  bundle.hyper = ckpt.hyper;
  bundle.load_state_dict(ckpt.model_state);
  return bundle;
}

int run_eval(const std::string& checkpoint, const std::string& scene_dir,
             const std::string& out, bool oracle, int64_t first, int64_t count) {
  SceneReader scene(scene_dir);
  ModelBundle bundle = oracle && checkpoint.empty()
                           ? ModelBundle::create(ModelConfig{}, 1)
                           : bundle_from_checkpoint(checkpoint);
  const int64_t end = count < 0 ? scene.frame_count()
                                : std::min<int64_t>(first + count, scene.frame_count());
  const SceneEvalResult res = evaluate_scene(scene, bundle, first, end, oracle);
  std::ofstream f(out, std::ios::trunc);
  if (!f) throw IoError("cannot write " + out);
  f << report_to_json(res.report, oracle ? "oracle pipeline" : "");
  std::cout << "frames=" << res.frames << " mpjpe=" << res.report.mpjpe_mm
            << " recall@500=" << res.report.recall_500 << " -> " << out << "\n";
  return 0;
}

int run_plot(const std::string& report_path, const std::string& out_dir,
             const std::string& loss_log, const std::string& scene_dir,
             const std::string& checkpoint, bool oracle) {
  fs::create_directories(out_dir);
  std::ifstream in(report_path);
  if (!in) throw IoError("cannot read " + report_path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const EvalReport report = report_from_json(text);
  int files = 0;
  plot_metric_bars(report, out_dir + "/metrics.ppm");
  ++files;

  {  // PCP per-actor bars
    Canvas c(520, 340);
    c.text(10, 10, "PCP", {0, 0, 0});
    const int n = std::max<int>(1, static_cast<int>(report.pcp.per_actor.size()) + 1);
    int i = 0;
    for (const auto& [actor, v] : report.pcp.per_actor) {
      const double x0 = 50 + (i + 0.15) * 420.0 / n, x1 = 50 + (i + 0.85) * 420.0 / n;
      c.rect(x0, 300 - 280 * std::clamp(v, 0.0, 1.0), x1, 300, {0.2, 0.45, 0.85});
      c.text(x0, 308, std::to_string(actor), {0, 0, 0});
      ++i;
    }
    const double x0 = 50 + (i + 0.15) * 420.0 / n, x1 = 50 + (i + 0.85) * 420.0 / n;
    c.rect(x0, 300 - 280 * std::clamp(report.pcp.average, 0.0, 1.0), x1, 300,
           {0.2, 0.7, 0.3});
    c.save_ppm(out_dir + "/pcp.ppm");
    ++files;
  }

  if (!loss_log.empty()) {
    plot_loss_curves(loss_log, out_dir + "/loss_curves.ppm");
    ++files;
  }

  if (!scene_dir.empty()) {
    SceneReader scene(scene_dir);
    ModelBundle bundle = oracle && checkpoint.empty()
                             ? ModelBundle::create(ModelConfig{}, 1)
                             : bundle_from_checkpoint(checkpoint);
    std::vector<FramePredictions> preds;
    std::vector<Pose3DSet> gts;
    const int64_t end = std::min<int64_t>(scene.frame_count(), 20);
    for (int64_t f = 0; f < end; ++f) {
      const SceneFrame frame = scene.load_frame(f);
      preds.push_back(infer_frame(frame, scene.cams(), bundle, oracle));
      gts.push_back(frame.gt_poses);
    }
    plot_pr_curves(preds, gts, {25, 50, 100, 150}, out_dir + "/pr_curves.ppm");
    ++files;
    const SceneFrame frame = scene.load_frame(0);
    plot_pose_overlay(frame, scene.cams(), preds[0].poses, scene.skeleton(),
                      out_dir + "/overlay_frame0");
    files += static_cast<int>(scene.cams().size());
  }
  std::cout << "wrote " << files << " plot files to " << out_dir << "\n";
  return 0;
}

int run_check(const std::string& suite) {
  std::vector<CheckResult> results;
  if (suite == "gradients") results = run_gradient_suite();
  else if (suite == "oracles") results = run_oracle_suite();
  else if (suite == "invariants") results = run_invariant_suite();
  else throw InvalidConfig("unknown suite: " + suite);
  bool all_ok = true;
  for (const auto& r : results) {
    std::cout << (r.passed ? "[PASS] " : "[FAIL] ") << r.name
              << (r.detail.empty() ? "" : "  (" + r.detail + ")") << "\n";
    all_ok = all_ok && r.passed;
  }
  return all_ok ? 0 : 1;
}

int run_model_info(const std::string& config_path) {
  const TrainConfig cfg =
      config_path.empty() ? parse_train_config_text("") : load_train_config(config_path);
  ModelBundle bundle = ModelBundle::create(cfg.model_config(), cfg.seed);
  int64_t total = 0;
  std::map<std::string, int64_t> per_net;
  for (const auto& p : bundle.parameters()) {
    const auto dot = p.name.find('.');
    per_net[p.name.substr(0, dot)] += p.var->value.numel();
    total += p.var->value.numel();
  }
  for (const auto& [net, n] : per_net) std::cout << net << ": " << n << " parameters\n";
  std::cout << "total: " << total << " parameters\n";
  return total < 2000000 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SelfPose3d desk-scale pipeline"};
  app.require_subcommand(1);
  int threads = 2;
  app.add_option("--threads", threads, "worker threads (deterministic for any count)");

  auto* synth = app.add_subcommand("synth", "generate a synthetic multi-view scene");
  std::string s_out;
  int s_frames = 50, s_persons = 3, s_views = 5, s_img = 128;
  uint64_t s_seed = 1;
  std::string s_noise = "default";
  synth->add_option("--out", s_out)->required();
  synth->add_option("--frames", s_frames);
  synth->add_option("--persons", s_persons);
  synth->add_option("--views", s_views);
  synth->add_option("--seed", s_seed);
  synth->add_option("--noise-preset", s_noise)
      ->check(CLI::IsMember({"clean", "default", "heavy"}));
  synth->add_option("--image-size", s_img);

  auto* groots = app.add_subcommand("gen-roots", "generate the synthetic root dataset");
  std::string g_out, g_calib;
  int g_samples = 1000, g_max_roots = 4;
  uint64_t g_seed = 1;
  double g_sigma2d = kDefaultHeatmapSigma, g_sigma3d = 1.5;
  groots->add_option("--out", g_out)->required();
  groots->add_option("--samples", g_samples);
  groots->add_option("--max-roots", g_max_roots);
  groots->add_option("--seed", g_seed);
  groots->add_option("--calib", g_calib)->required();
  groots->add_option("--sigma-2d", g_sigma2d, "heatmap px");
  groots->add_option("--sigma-3d-pitches", g_sigma3d, "coarse voxel pitches");

  auto* train = app.add_subcommand("train", "staged self-supervised training");
  std::string t_config, t_scene, t_stage = "all", t_out;
  train->add_option("--config", t_config);
  train->add_option("--scene", t_scene)->required();
  train->add_option("--stage", t_stage)
      ->check(CLI::IsMember({"pretrain", "root", "pose_l2", "pose_l1l2", "all"}));
  train->add_option("--out", t_out)->required();

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a scene");
  std::string e_ckpt, e_scene, e_out = "report.json";
  bool e_oracle = false;
  int64_t e_first = 0, e_count = -1;
  eval->add_option("--checkpoint", e_ckpt);
  eval->add_option("--scene", e_scene)->required();
  eval->add_option("--out", e_out);
  eval->add_flag("--oracle", e_oracle, "bypass the nets (oracle heatmaps and decode)");
  eval->add_option("--first-frame", e_first);
  eval->add_option("--num-frames", e_count);

  auto* plot = app.add_subcommand("plot", "render report plots as PPM images");
  std::string p_report, p_out, p_losslog, p_scene, p_ckpt;
  bool p_oracle = false;
  plot->add_option("--report", p_report)->required();
  plot->add_option("--out", p_out)->required();
  plot->add_option("--loss-log", p_losslog);
  plot->add_option("--scene", p_scene);
  plot->add_option("--checkpoint", p_ckpt);
  plot->add_flag("--oracle", p_oracle);

  auto* chk = app.add_subcommand("check", "run property suites");
  std::string c_suite;
  chk->add_option("--suite", c_suite)
      ->required()
      ->check(CLI::IsMember({"gradients", "oracles", "invariants"}));

  auto* minfo = app.add_subcommand("model-info", "report model parameter counts");
  std::string m_config;
  minfo->add_option("--config", m_config);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return 2;
  }

  set_thread_count(threads);
  try {
    if (*synth) return run_synth(s_out, s_frames, s_persons, s_views, s_seed, s_noise, s_img);
    if (*groots)
      return run_gen_roots(g_out, g_samples, g_max_roots, g_seed, g_calib, g_sigma2d,
                           g_sigma3d);
    if (*train) return run_train(t_config, t_scene, t_stage, t_out);
    if (*eval) {
      if (!e_oracle && e_ckpt.empty())
        throw InvalidConfig("eval needs --checkpoint unless --oracle is set");
      return run_eval(e_ckpt, e_scene, e_out, e_oracle, e_first, e_count);
    }
    if (*plot) return run_plot(p_report, p_out, p_losslog, p_scene, p_ckpt, p_oracle);
    if (*chk) return run_check(c_suite);
    if (*minfo) return run_model_info(m_config);
  } catch (const Error& e) {
    std::cerr << "error: code=" << e.code() << " msg=" << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: code=Internal msg=" << e.what() << "\n";
    return 1;
  }
  return 0;
}
