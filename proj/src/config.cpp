#include "sp3d/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

namespace sp3d {

void TrainConfig::validate() const {
  for (const auto* s : {&stage.pretrain, &stage.root, &stage.pose_l2, &stage.pose_l1l2}) {
    if (s->epochs < 0) throw InvalidConfig("stage epochs must be >= 0");
    if (s->lr <= 0.0) throw InvalidConfig("learning rates must be positive");
  }
  if (aug.rotation_deg_min > aug.rotation_deg_max || aug.scale_min > aug.scale_max)
    throw InvalidConfig("augmentation ranges ill-ordered");
  if (cutout.size_min > cutout.size_max || cutout.count < 0)
    throw InvalidConfig("cutout settings ill-ordered");
  if (lambda < 0.0 || sigma_attn < 0.0) throw InvalidConfig("loss weights must be >= 0");
  if (pseudo.threshold < 0.0 || pseudo.threshold > 1.0)
    throw InvalidConfig("pseudo threshold must be in [0, 1]");
  if (holdout_fraction < 0.0 || holdout_fraction >= 1.0)
    throw InvalidConfig("holdout fraction must be in [0, 1)");
}

HyperParams TrainConfig::hyper() const {
  HyperParams h;
  h.lambda = lambda;
  h.sigma_attn = sigma_attn;
  return h;
}

ModelConfig TrainConfig::model_config() const {
  ModelConfig m;
  m.heatmap_width = model.heatmap_width;
  m.attn_width = model.attn_width;
  m.root_width = model.root_width;
  m.pose_width = model.pose_width;
  return m;
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool parse_bool(const std::string& v, const std::string& key) {
  if (v == "true" || v == "1" || v == "on") return true;
  if (v == "false" || v == "0" || v == "off") return false;
  throw InvalidConfig("bad boolean for " + key + ": " + v);
}

}  // namespace

TrainConfig parse_train_config_text(const std::string& text) {
  TrainConfig cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw InvalidConfig("config line " + std::to_string(lineno) + " has no '='");
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    auto d = [&] { return std::strtod(val.c_str(), nullptr); };
    auto i = [&] { return static_cast<int>(std::strtol(val.c_str(), nullptr, 10)); };

    if (key == "seed") cfg.seed = std::strtoull(val.c_str(), nullptr, 10);
    else if (key == "stage.pretrain.epochs") cfg.stage.pretrain.epochs = i();
    else if (key == "stage.pretrain.lr") cfg.stage.pretrain.lr = d();
    else if (key == "stage.root.epochs") cfg.stage.root.epochs = i();
    else if (key == "stage.root.lr") cfg.stage.root.lr = d();
    else if (key == "stage.pose_l2.epochs") cfg.stage.pose_l2.epochs = i();
    else if (key == "stage.pose_l2.lr") cfg.stage.pose_l2.lr = d();
    else if (key == "stage.pose_l1l2.epochs") cfg.stage.pose_l1l2.epochs = i();
    else if (key == "stage.pose_l1l2.lr") cfg.stage.pose_l1l2.lr = d();
    else if (key == "aug.rotation_deg_min") cfg.aug.rotation_deg_min = d();
    else if (key == "aug.rotation_deg_max") cfg.aug.rotation_deg_max = d();
    else if (key == "aug.scale_min") cfg.aug.scale_min = d();
    else if (key == "aug.scale_max") cfg.aug.scale_max = d();
    else if (key == "cutout.count") cfg.cutout.count = i();
    else if (key == "cutout.size_min") cfg.cutout.size_min = d();
    else if (key == "cutout.size_max") cfg.cutout.size_max = d();
    else if (key == "lambda") cfg.lambda = d();
    else if (key == "sigma_attn") cfg.sigma_attn = d();
    else if (key == "pseudo.threshold") cfg.pseudo.threshold = d();
    else if (key == "pseudo.hard_last_epochs") cfg.pseudo.hard_last_epochs = i();
    else if (key == "flags.cross_affine_view") cfg.flags.cross_affine_view = parse_bool(val, key);
    else if (key == "flags.soft_attention") cfg.flags.soft_attention = parse_bool(val, key);
    else if (key == "flags.hard_attention") cfg.flags.hard_attention = parse_bool(val, key);
    else if (key == "model.heatmap_width") cfg.model.heatmap_width = i();
    else if (key == "model.attn_width") cfg.model.attn_width = i();
    else if (key == "model.root_width") cfg.model.root_width = i();
    else if (key == "model.pose_width") cfg.model.pose_width = i();
    else if (key == "roots.samples") cfg.roots.samples = i();
    else if (key == "roots.max_roots") cfg.roots.max_roots = i();
    else if (key == "roots.sigma_3d_pitches") cfg.roots.sigma_3d_pitches = d();
    else if (key == "holdout_fraction") cfg.holdout_fraction = d();
    else throw InvalidConfig("unknown config key: " + key);
  }
  // Documented single environment override for determinism experiments.
  if (const char* env = std::getenv("SELFPOSE3D_SEED"))
    cfg.seed = std::strtoull(env, nullptr, 10);
  cfg.validate();
  return cfg;
}

TrainConfig load_train_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_train_config_text(ss.str());
}

}  // namespace sp3d
