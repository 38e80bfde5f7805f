#include "sp3d/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "sp3d/checkpoint.hpp"
#include "sp3d/rendering.hpp"
#include "sp3d/root_localizer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace sp3d {

AugmentationSample sample_augmentation_pair(const TrainConfig& cfg, Rng& rng,
                                            int image_width, int image_height) {
  AugmentationSample s;
  const Vec2 pivot(image_width / 2.0, image_height / 2.0);
  auto draw_affine = [&] {
    const double r = rng.uniform(cfg.aug.rotation_deg_min, cfg.aug.rotation_deg_max);
    const double sc = rng.uniform(cfg.aug.scale_min, cfg.aug.scale_max);
    return AffineAugmentation::make(r, sc, pivot);
  };
  auto draw_photo = [&] {
    PhotometricOps p;
    p.brightness = rng.uniform(-0.08, 0.08);
    p.contrast = rng.uniform(0.92, 1.08);
    p.equalize = rng.uniform() < 0.3;
    return p;
  };
  auto draw_cutouts = [&] {
    std::vector<Cutout> cs;
    for (int i = 0; i < cfg.cutout.count; ++i)
      cs.push_back({rng.uniform(0.0, image_width), rng.uniform(0.0, image_height),
                    rng.uniform(cfg.cutout.size_min, cfg.cutout.size_max)});
    return cs;
  };
  s.t1 = draw_affine();
  s.t2 = draw_affine();
  s.photo1 = draw_photo();
  s.photo2 = draw_photo();
  s.cutouts1 = draw_cutouts();
  s.cutouts2 = draw_cutouts();
  return s;
}

Pose2DSet filter_pseudo_labels(const Pose2DSet& pseudo, const std::string& mode,
                               double threshold) {
  if (mode == "soft") return pseudo;
  if (mode != "hard") throw InvalidConfig("pseudo label mode must be soft or hard");
  Pose2DSet out = pseudo;
  for (int64_t c = 0; c < out.view_count(); ++c)
    for (int64_t p = 0; p < out.person_count(); ++p)
      for (int64_t j = 0; j < out.joint_count(); ++j)
        if (out.confidence.at(c, p, j) < threshold) out.visibility.at(c, p, j) = 0.0;
  return out;
}

Tensor augment_image(const Tensor& image, const AffineAugmentation& t,
                     const PhotometricOps& photo, const std::vector<Cutout>& cutouts) {
  if (image.ndim() != 3 || image.dim(2) != 3) throw ShapeMismatch("image must be (H, W, 3)");
  const int64_t h = image.dim(0), w = image.dim(1);
  const AffineAugmentation inv = invert_affine(t);
  Tensor out({h, w, 3});
  constexpr double kFill = 0.5;
  for (int64_t y = 0; y < h; ++y) {
    for (int64_t x = 0; x < w; ++x) {
      const Vec2 src = apply_affine(inv, Vec2(static_cast<double>(x), static_cast<double>(y)));
      if (src.x() < 0.0 || src.x() > w - 1 || src.y() < 0.0 || src.y() > h - 1) {
        for (int ch = 0; ch < 3; ++ch) out.at(y, x, ch) = kFill;
        continue;
      }
      int x0 = static_cast<int>(std::floor(src.x()));
      int y0 = static_cast<int>(std::floor(src.y()));
      if (x0 >= w - 1) x0 = static_cast<int>(w) - 2;
      if (y0 >= h - 1) y0 = static_cast<int>(h) - 2;
      const double fx = src.x() - x0, fy = src.y() - y0;
      for (int ch = 0; ch < 3; ++ch) {
        const double v00 = image.at(y0, x0, ch), v01 = image.at(y0, x0 + 1, ch);
        const double v10 = image.at(y0 + 1, x0, ch), v11 = image.at(y0 + 1, x0 + 1, ch);
        out.at(y, x, ch) = (1 - fy) * ((1 - fx) * v00 + fx * v01) +
                           fy * ((1 - fx) * v10 + fx * v11);
      }
    }
  }
  for (int64_t i = 0; i < out.numel(); ++i) {
    double v = (out[i] - 0.5) * photo.contrast + 0.5 + photo.brightness;
    if (photo.equalize) {
      const double sm = v * v * (3.0 - 2.0 * v);  // mild S-curve
      v = 0.7 * v + 0.3 * sm;
    }
    out[i] = std::clamp(v, 0.0, 1.0);
  }
  for (const Cutout& c : cutouts) {
    const int x0 = std::max<int64_t>(0, static_cast<int64_t>(c.cx - c.size / 2));
    const int x1 = std::min<int64_t>(w - 1, static_cast<int64_t>(c.cx + c.size / 2));
    const int y0 = std::max<int64_t>(0, static_cast<int64_t>(c.cy - c.size / 2));
    const int y1 = std::min<int64_t>(h - 1, static_cast<int64_t>(c.cy + c.size / 2));
    for (int64_t y = y0; y <= static_cast<int64_t>(y1); ++y)
      for (int64_t x = x0; x <= static_cast<int64_t>(x1); ++x)
        for (int ch = 0; ch < 3; ++ch) out.at(y, x, ch) = kFill;
  }
  return out;
}

namespace {

Tensor views_to_batch(const std::vector<Tensor>& images) {
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

// Row range [r0, r1) of a batched tensor as its own node.
ad::Var slice_batch(const ad::Var& x, int64_t r0, int64_t r1) {
  const auto& s = x->value.shape();
  int64_t inner = 1;
  for (size_t d = 1; d < s.size(); ++d) inner *= s[d];
  std::vector<int64_t> out_shape = s;
  out_shape[0] = r1 - r0;
  return ad::reshape(
      ad::slice_channels(ad::reshape(x, {1, s[0], inner}), r0, r1), out_shape);
}

int stage_id(const std::string& stage) { return stage_rank(stage); }

}  // namespace

Trainer::Trainer(TrainConfig cfg, std::string scene_dir, std::string out_dir)
    : cfg_(std::move(cfg)), scene_(std::move(scene_dir)), out_dir_(std::move(out_dir)),
      bundle_(ModelBundle::create(cfg_.model_config(), cfg_.seed)) {
  cfg_.validate();
  bundle_.hyper = cfg_.hyper();
  fs::create_directories(out_dir_);
  const int64_t n = scene_.frame_count();
  train_frames_ = n - static_cast<int64_t>(std::floor(cfg_.holdout_fraction * n));
  if (train_frames_ <= 0) throw InvalidConfig("scene has no training frames");
}

std::string Trainer::checkpoint_path(const std::string& stage) const {
  return out_dir_ + "/checkpoint_" + stage + ".spc";
}

void Trainer::log_entry(const LossLogEntry& e) {
  history_.push_back(e);
  std::ofstream out(out_dir_ + "/loss_log.jsonl", std::ios::app);
  json j;
  j["step"] = e.step;
  j["stage"] = e.stage;
  j["loss_total"] = e.loss_total;
  j["loss_H"] = e.loss_h;
  j["loss_J"] = e.loss_j;
  j["loss_attn"] = e.loss_attn;
  out << j.dump() << "\n";
}

void Trainer::save_stage(const std::string& stage, int64_t epoch, int64_t step,
                         const AdamOptimizer& opt) {
  Checkpoint ckpt;
  ckpt.stage = stage;
  ckpt.epoch = epoch;
  ckpt.step = step;
  ckpt.seed = cfg_.seed;
  ckpt.config = bundle_.config;
  ckpt.hyper = bundle_.hyper;
  ckpt.model_state = bundle_.state_dict();
  ckpt.optimizer_state = opt.state_dict();
  save_checkpoint(checkpoint_path(stage), ckpt);
}

void Trainer::require_stage(const std::string& needed) {
  const std::string path = checkpoint_path(needed);
  if (!fs::exists(path))
    throw StageOrderViolation("stage requires checkpoint of '" + needed +
                              "'; run that stage first");
  const Checkpoint ckpt = load_checkpoint(path);
  if (!(ckpt.config == bundle_.config))
    throw InvalidConfig("checkpoint architecture differs from config");
  bundle_.load_state_dict(ckpt.model_state);
}

int64_t Trainer::maybe_resume(const std::string& stage, AdamOptimizer& opt) {
  const std::string path = checkpoint_path(stage);
  if (!fs::exists(path)) return 0;
  const Checkpoint ckpt = load_checkpoint(path);
  if (!(ckpt.config == bundle_.config))
    throw InvalidConfig("checkpoint architecture differs from config");
  bundle_.load_state_dict(ckpt.model_state);
  opt.load_state_dict(ckpt.optimizer_state);
  return ckpt.epoch;
}

void Trainer::run_pretrain() {
  if (train_frames_ == 0) throw InvalidConfig("empty training dataset");
  std::vector<NamedParam> params;
  bundle_.heatmap_net_2d.collect_parameters("heatmap_net_2d", params);
  AdamOptimizer opt(params, cfg_.stage.pretrain.lr);
  const int total = cfg_.stage.pretrain.epochs;
  int64_t start_epoch = maybe_resume("pretrain", opt);
  const auto& cams = scene_.cams();
  const int hq = cams[0].height / 4, wq = cams[0].width / 4;
  int64_t step = start_epoch * train_frames_;
  for (int64_t epoch = start_epoch; epoch < total; ++epoch) {
    // Staged LR ladder: /10 at half, /100 at three quarters of the schedule.
    double lr = cfg_.stage.pretrain.lr;
    if (epoch * 4 >= total * 3) lr /= 100.0;
    else if (epoch * 2 >= total) lr /= 10.0;
    opt.set_lr(lr);
    std::vector<int64_t> order(static_cast<size_t>(train_frames_));
    std::iota(order.begin(), order.end(), 0);
    Rng shuf(Rng::mix(cfg_.seed, 0x5F, static_cast<uint64_t>(epoch)));
    for (int64_t i = train_frames_ - 1; i > 0; --i)
      std::swap(order[static_cast<size_t>(i)],
                order[static_cast<size_t>(shuf.uniform_int(0, i))]);
    for (int64_t f : order) {
      const SceneFrame frame = scene_.load_frame(f);
      Rng rng(Rng::mix(cfg_.seed, 0x100 + static_cast<uint64_t>(stage_id("pretrain")),
                       static_cast<uint64_t>(epoch), static_cast<uint64_t>(f)));
      const AugmentationSample aug =
          sample_augmentation_pair(cfg_, rng, cams[0].width, cams[0].height);
      std::vector<Tensor> x;
      for (const auto& img : frame.images)
        x.push_back(augment_image(img, aug.t1, aug.photo1, aug.cutouts1));
      PoseLossFlags noflags;
      noflags.hard_labels = false;
      const Pose2DSet pseudo_t =
          transform_pseudo_to_branch(frame.pseudo_2d, cams, aug.t1, noflags);
      const Tensor target = render_pose_heatmaps(pseudo_t, hq, wq, bundle_.hyper.sigma_hm);
      auto h = bundle_.heatmap_net_2d.forward(ad::constant(views_to_batch(x)));
      auto loss = ad::mse(h, ad::constant(target));
      const double lv = loss->value[0];
      if (!std::isfinite(lv)) throw DivergenceDetected("pretrain loss is not finite");
      opt.zero_grad();
      ad::backward(loss);
      opt.step();
      log_entry({step++, "pretrain", lv, lv, 0.0, 0.0});
    }
    save_stage("pretrain", epoch + 1, step, opt);
  }
  if (total == 0) save_stage("pretrain", 0, 0, opt);
}

void Trainer::run_root() {
  require_stage("pretrain");
  std::vector<NamedParam> params;
  bundle_.root_net.collect_parameters("root_net", params);
  AdamOptimizer opt(params, cfg_.stage.root.lr);
  const auto& cams = scene_.cams();
  const int hq = cams[0].height / 4, wq = cams[0].width / 4;
  const VoxelGridSpec& grid = bundle_.coarse_grid;

  // Synthetic root dataset, sampled around the person region so every root
  // has multi-view heatmap support.
  Aabb region = default_person_region();
  region.lo -= Vec3(300.0, 300.0, 100.0);
  region.hi += Vec3(300.0, 300.0, 100.0);
  const double sigma_3d = cfg_.roots.sigma_3d_pitches * grid.pitch(0);
  const auto samples = generate_root_dataset(
      cfg_.roots.samples, cams, region, grid, cfg_.roots.max_roots,
      bundle_.hyper.sigma_hm, sigma_3d, Rng::mix(cfg_.seed, 0xD00));

  const AffineAugmentation ident =
      AffineAugmentation::identity(Vec2(cams[0].width / 2.0, cams[0].height / 2.0));
  const UnprojectionPlan ident_plan = make_unprojection_plan(cams, grid, ident, hq, wq);
  auto syn_features = [&](const SyntheticRootSample& s) {
    const Tensor channels = s.root_heatmaps.reshaped(
        {s.root_heatmaps.dim(0), 1, s.root_heatmaps.dim(1), s.root_heatmaps.dim(2)});
    FeatureVolume f = unproject_with_plan(channels, ident_plan);
    return f.data.reshaped({1, 1, grid.resolution[0], grid.resolution[1],
                            grid.resolution[2]});
  };

  const int total = cfg_.stage.root.epochs;
  int64_t start_epoch = maybe_resume("root", opt);
  int64_t step = opt.steps_taken();
  const int root_channel = bundle_.skeleton.root();
  for (int64_t epoch = start_epoch; epoch < total; ++epoch) {
    opt.set_lr(cfg_.stage.root.lr);
    // Synthetic and real consistency batches interleave 1:1.
    std::vector<int64_t> syn_order(samples.size());
    std::iota(syn_order.begin(), syn_order.end(), 0);
    std::vector<int64_t> frame_order(static_cast<size_t>(train_frames_));
    std::iota(frame_order.begin(), frame_order.end(), 0);
    Rng shuf(Rng::mix(cfg_.seed, 0x5F + 1, static_cast<uint64_t>(epoch)));
    for (int64_t i = static_cast<int64_t>(syn_order.size()) - 1; i > 0; --i)
      std::swap(syn_order[static_cast<size_t>(i)],
                syn_order[static_cast<size_t>(shuf.uniform_int(0, i))]);
    for (int64_t i = train_frames_ - 1; i > 0; --i) {
      const int64_t j = shuf.uniform_int(0, i);
      std::swap(frame_order[static_cast<size_t>(i)], frame_order[static_cast<size_t>(j)]);
    }

    size_t si = 0, fi = 0;
    bool syn_turn = true;
    while (si < syn_order.size() || fi < frame_order.size()) {
      RootTrainInputs inputs;
      if ((syn_turn && si < syn_order.size()) || fi >= frame_order.size()) {
        const auto& s = samples[static_cast<size_t>(syn_order[si++])];
        inputs.synthetic = {syn_features(s),
                            s.gt_root_volume.reshaped({1, 1, grid.resolution[0],
                                                       grid.resolution[1],
                                                       grid.resolution[2]})};
      } else {
        const int64_t f = frame_order[fi++];
        const SceneFrame frame = scene_.load_frame(f);
        Rng rng(Rng::mix(cfg_.seed, 0x100 + static_cast<uint64_t>(stage_id("root")),
                         static_cast<uint64_t>(epoch), static_cast<uint64_t>(f)));
        const AugmentationSample aug =
            sample_augmentation_pair(cfg_, rng, cams[0].width, cams[0].height);
        std::vector<Tensor> views;
        for (const auto& img : frame.images) views.push_back(img);
        for (const auto& img : frame.images)
          views.push_back(augment_image(img, aug.t1, aug.photo1, aug.cutouts1));
        for (const auto& img : frame.images)
          views.push_back(augment_image(img, aug.t2, aug.photo2, aug.cutouts2));
        Tensor heatmaps;
        {
          ad::NoGradGuard ng;  // backbone is frozen in this stage
          heatmaps = bundle_.heatmap_net_2d.forward(ad::constant(views_to_batch(views)))
                         ->value;
        }
        const int64_t c = static_cast<int64_t>(cams.size());
        auto branch_features = [&](int64_t b, const AffineAugmentation& t) {
          Tensor hm({c, 1, hq, wq});
          const int64_t px = static_cast<int64_t>(hq) * wq;
          for (int64_t v = 0; v < c; ++v)
            std::copy_n(heatmaps.data() +
                            (((b * c + v) * bundle_.config.joints) + root_channel) * px,
                        px, hm.data() + v * px);
          FeatureVolume f = unproject_heatmaps(hm, cams, grid, t);
          return f.data.reshaped({1, 1, grid.resolution[0], grid.resolution[1],
                                  grid.resolution[2]});
        };
        inputs.consistency = {branch_features(0, ident), branch_features(1, aug.t1),
                              branch_features(2, aug.t2)};
      }
      syn_turn = !syn_turn;
      const RootStepLosses losses = train_root_step(inputs, bundle_, opt);
      log_entry({step++, "root", losses.total, losses.synthetic, losses.consistency, 0.0});
    }
    save_stage("root", epoch + 1, step, opt);
  }
  if (total == 0) save_stage("root", 0, 0, opt);
}

void Trainer::run_pose(const std::string& stage) {
  const bool with_l1 = stage == "pose_l1l2";
  require_stage(with_l1 ? "pose_l2" : "root");
  AdamOptimizer opt(bundle_.parameters(),
                    with_l1 ? cfg_.stage.pose_l1l2.lr : cfg_.stage.pose_l2.lr);
  const auto& cams = scene_.cams();
  const int hq = cams[0].height / 4, wq = cams[0].width / 4;
  const int total = with_l1 ? cfg_.stage.pose_l1l2.epochs : cfg_.stage.pose_l2.epochs;
  int64_t start_epoch = maybe_resume(stage, opt);
  int64_t step = start_epoch * train_frames_;
  const int root_channel = bundle_.skeleton.root();

  for (int64_t epoch = start_epoch; epoch < total; ++epoch) {
    const bool hard_labels =
        with_l1 && (total - epoch) <= static_cast<int64_t>(cfg_.pseudo.hard_last_epochs);
    std::vector<int64_t> order(static_cast<size_t>(train_frames_));
    std::iota(order.begin(), order.end(), 0);
    Rng shuf(Rng::mix(cfg_.seed, 0x5F + 2 + (with_l1 ? 1 : 0), static_cast<uint64_t>(epoch)));
    for (int64_t i = train_frames_ - 1; i > 0; --i)
      std::swap(order[static_cast<size_t>(i)],
                order[static_cast<size_t>(shuf.uniform_int(0, i))]);

    for (int64_t f : order) {
      const SceneFrame frame = scene_.load_frame(f);
      Rng rng(Rng::mix(cfg_.seed, 0x100 + static_cast<uint64_t>(stage_id(stage)),
                       static_cast<uint64_t>(epoch), static_cast<uint64_t>(f)));
      const AugmentationSample aug =
          sample_augmentation_pair(cfg_, rng, cams[0].width, cams[0].height);
      std::vector<Tensor> views;
      for (const auto& img : frame.images)
        views.push_back(augment_image(img, aug.t1, aug.photo1, aug.cutouts1));
      for (const auto& img : frame.images)
        views.push_back(augment_image(img, aug.t2, aug.photo2, aug.cutouts2));
      const Tensor batch = views_to_batch(views);
      const int64_t c = static_cast<int64_t>(cams.size());

      auto h_all = bundle_.heatmap_net_2d.forward(ad::constant(batch));
      auto h1 = slice_batch(h_all, 0, c);
      auto h2 = slice_batch(h_all, c, 2 * c);

      std::optional<ad::Var> a1, a2;
      if (cfg_.flags.soft_attention) {
        auto a_all = bundle_.attn_net_2d.forward(ad::constant(batch));
        a1 = slice_batch(a_all, 0, c);
        a2 = slice_batch(a_all, c, 2 * c);
      }

      // Person proposals from the t2 branch, no gradient through NMS.
      std::vector<RootProposal> proposals;
      {
        ad::NoGradGuard ng;
        const Tensor root_hm = extract_root_heatmaps(h2->value, root_channel);
        const Tensor channels =
            root_hm.reshaped({root_hm.dim(0), 1, root_hm.dim(1), root_hm.dim(2)});
        const auto plan2 =
            make_unprojection_plan(cams, bundle_.coarse_grid, aug.t2, hq, wq);
        FeatureVolume froot = unproject_with_plan(channels, plan2);
        auto g2 = bundle_.root_net.forward(ad::constant(froot.data.reshaped(
            {1, 1, bundle_.coarse_grid.resolution[0], bundle_.coarse_grid.resolution[1],
             bundle_.coarse_grid.resolution[2]})));
        proposals = detect_roots(
            g2->value.reshaped({bundle_.coarse_grid.resolution[0],
                                bundle_.coarse_grid.resolution[1],
                                bundle_.coarse_grid.resolution[2]}),
            plan2, bundle_.hyper);
      }

      const Pose2DSet pseudo_f =
          hard_labels
              ? filter_pseudo_labels(frame.pseudo_2d, "hard", cfg_.pseudo.threshold)
              : frame.pseudo_2d;

      BottleneckPoses bottleneck = estimate_bottleneck_poses(
          proposals, h1, h2, cams, aug.t1, aug.t2, bundle_, false);

      PoseLossFlags flags;
      flags.cross_affine_view = cfg_.flags.cross_affine_view;
      flags.soft_attention = cfg_.flags.soft_attention;
      flags.hard_attention = cfg_.flags.hard_attention;
      flags.use_joint_loss = with_l1;
      flags.hard_labels = false;  // applied above via filter_pseudo_labels
      PoseLossBundle lossb = build_pose_loss_inputs(
          bottleneck, pseudo_f, cams, aug.t1, aug.t2, a1 ? &*a1 : nullptr,
          a2 ? &*a2 : nullptr, bundle_.hyper, flags, hq, wq);
      const double lv = lossb.total->value[0];
      if (!std::isfinite(lv)) throw DivergenceDetected(stage + " loss is not finite");
      opt.zero_grad();
      ad::backward(lossb.total);
      opt.step();
      log_entry({step++, stage, lv, lossb.loss_h, lossb.loss_j, lossb.loss_attn});
    }
    save_stage(stage, epoch + 1, step, opt);
  }
  if (total == 0) save_stage(stage, 0, 0, opt);
}

void Trainer::run_stage(const std::string& stage) {
  stage_rank(stage);  // validates the name
  if (stage == "pretrain") run_pretrain();
  else if (stage == "root") run_root();
  else run_pose(stage);
}

void Trainer::run_all() {
  std::ofstream(out_dir_ + "/loss_log.jsonl", std::ios::trunc);
  run_pretrain();
  run_root();
  run_pose("pose_l2");
  run_pose("pose_l1l2");
}

}  // namespace sp3d
