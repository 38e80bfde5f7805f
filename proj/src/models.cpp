#include "sp3d/models.hpp"

#include <cmath>

#include "sp3d/rng.hpp"
#include "sp3d/scene_synth.hpp"

namespace sp3d {

void HyperParams::validate() const {
  if (lambda < 0.0 || sigma_attn < 0.0) throw InvalidConfig("loss weights must be >= 0");
  if (beta <= 0.0) throw InvalidBeta("beta must be positive");
  if (sigma_hm <= 0.0) throw InvalidSigma("sigma_hm must be positive");
  if (nms_window < 3 || nms_window % 2 == 0)
    throw InvalidConfig("nms window must be odd and >= 3");
}

namespace {

constexpr double kLeakySlope = 0.1;
constexpr double kSigmoidHeadBias = -2.0;

Tensor init_conv(std::vector<int64_t> shape, int64_t fan_in, Rng& rng) {
  Tensor w(shape);
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  for (int64_t i = 0; i < w.numel(); ++i) w[i] = rng.uniform(-bound, bound);
  return w;
}

}  // namespace

HeatmapNet2d::HeatmapNet2d(int in_ch, int out_ch, int width, uint64_t seed)
    : out_ch_(out_ch) {
  Rng rng(Rng::mix(seed, 0x2DCE));
  const int w0 = width;
  const int chans[5] = {in_ch, w0, 2 * w0, 4 * w0, 4 * w0};
  for (int i = 0; i < 4; ++i) {
    enc_[i].w = ad::parameter(
        init_conv({chans[i + 1], chans[i], 3, 3}, static_cast<int64_t>(chans[i]) * 9, rng));
    enc_[i].b = ad::parameter(Tensor({chans[i + 1]}));
  }
  const int dch[3] = {4 * w0, 2 * w0, 2 * w0};
  for (int i = 0; i < 2; ++i) {
    dec_[i].w = ad::parameter(
        init_conv({dch[i], dch[i + 1], 4, 4}, static_cast<int64_t>(dch[i]) * 16, rng));
    dec_[i].b = ad::parameter(Tensor({dch[i + 1]}));
  }
  head_.w = ad::parameter(
      init_conv({out_ch, 2 * w0, 3, 3}, static_cast<int64_t>(2 * w0) * 9, rng));
  Tensor hb({out_ch}, kSigmoidHeadBias);
  head_.b = ad::parameter(std::move(hb));
}

ad::Var HeatmapNet2d::forward(const ad::Var& images) const {
  const auto& s = images->value.shape();
  if (s.size() != 4) throw ShapeMismatch("heatmap net expects (B, C, H, W)");
  if (s[2] % 4 != 0 || s[3] % 4 != 0)
    throw ShapeMismatch("image height/width must be divisible by 4");
  ad::Var x = images;
  for (const auto& l : enc_) x = ad::leaky_relu(ad::conv2d(x, l.w, l.b, 2, 1), kLeakySlope);
  for (const auto& l : dec_)
    x = ad::leaky_relu(ad::conv_transpose2d(x, l.w, l.b, 2, 1), kLeakySlope);
  return ad::sigmoid(ad::conv2d(x, head_.w, head_.b, 1, 1));
}

void HeatmapNet2d::collect_parameters(const std::string& prefix,
                                      std::vector<NamedParam>& out) {
  for (int i = 0; i < 4; ++i) {
    out.push_back({prefix + ".enc" + std::to_string(i) + ".w", enc_[i].w});
    out.push_back({prefix + ".enc" + std::to_string(i) + ".b", enc_[i].b});
  }
  for (int i = 0; i < 2; ++i) {
    out.push_back({prefix + ".dec" + std::to_string(i) + ".w", dec_[i].w});
    out.push_back({prefix + ".dec" + std::to_string(i) + ".b", dec_[i].b});
  }
  out.push_back({prefix + ".head.w", head_.w});
  out.push_back({prefix + ".head.b", head_.b});
}

UNet3d::UNet3d(int in_ch, int out_ch, int width, bool residual, bool sigmoid_head,
               uint64_t seed)
    : residual_(residual), sigmoid_head_(sigmoid_head) {
  Rng rng(Rng::mix(seed, 0x3DCE));
  const int w = width;
  auto conv = [&](int ci, int co) {
    Layer l;
    l.w = ad::parameter(init_conv({co, ci, 3, 3, 3}, static_cast<int64_t>(ci) * 27, rng));
    l.b = ad::parameter(Tensor({co}));
    return l;
  };
  enc_ = conv(in_ch, w);
  down1_ = conv(w, 2 * w);
  down2_ = conv(2 * w, 4 * w);
  bott_ = conv(4 * w, 4 * w);
  up1_ = conv(6 * w, 2 * w);
  up2_ = conv(3 * w, w);
  head_ = conv(w, out_ch);
  if (sigmoid_head) head_.b->value.fill(kSigmoidHeadBias);
}

ad::Var UNet3d::forward(const ad::Var& vol) const {
  const auto& s = vol->value.shape();
  if (s.size() != 5) throw ShapeMismatch("unet3d expects (B, C, X, Y, Z)");
  for (int a = 2; a < 5; ++a)
    if (s[static_cast<size_t>(a)] % 4 != 0)
      throw ShapeMismatch("unet3d spatial dims must be divisible by 4");
  auto act = [](const ad::Var& x) { return ad::leaky_relu(x, kLeakySlope); };
  const ad::Var e = act(ad::conv3d(vol, enc_.w, enc_.b, 1, 1));
  const ad::Var d1 = act(ad::conv3d(e, down1_.w, down1_.b, 2, 1));
  const ad::Var d2 = act(ad::conv3d(d1, down2_.w, down2_.b, 2, 1));
  const ad::Var b = act(ad::conv3d(d2, bott_.w, bott_.b, 1, 1));
  const ad::Var u1 = act(ad::conv3d(
      ad::concat_channels(ad::upsample_nearest2x_3d(b), d1), up1_.w, up1_.b, 1, 1));
  const ad::Var u2 = act(ad::conv3d(
      ad::concat_channels(ad::upsample_nearest2x_3d(u1), e), up2_.w, up2_.b, 1, 1));
  ad::Var out = ad::conv3d(u2, head_.w, head_.b, 1, 1);
  if (residual_) out = ad::add(out, vol);
  if (sigmoid_head_) out = ad::sigmoid(out);
  return out;
}

void UNet3d::collect_parameters(const std::string& prefix, std::vector<NamedParam>& out) {
  auto put = [&](const char* n, Layer& l) {
    out.push_back({prefix + "." + n + ".w", l.w});
    out.push_back({prefix + "." + n + ".b", l.b});
  };
  put("enc", enc_);
  put("down1", down1_);
  put("down2", down2_);
  put("bott", bott_);
  put("up1", up1_);
  put("up2", up2_);
  put("head", head_);
}

ModelBundle ModelBundle::create(const ModelConfig& cfg, uint64_t seed) {
  ModelBundle b;
  b.config = cfg;
  b.skeleton = SkeletonSpec::panoptic15();
  if (cfg.joints != b.skeleton.joint_count())
    throw InvalidConfig("joint count must match the skeleton");
  b.coarse_grid = default_coarse_grid();
  b.fine_grid_template = default_fine_grid_template();
  b.heatmap_net_2d = HeatmapNet2d(3, cfg.joints, cfg.heatmap_width, Rng::mix(seed, 1));
  b.attn_net_2d = HeatmapNet2d(3, cfg.joints, cfg.attn_width, Rng::mix(seed, 2));
  b.root_net = UNet3d(1, 1, cfg.root_width, false, true, Rng::mix(seed, 3));
  b.pose_net_3d = UNet3d(cfg.joints, cfg.joints, cfg.pose_width, true, false,
                         Rng::mix(seed, 4));
  return b;
}

std::vector<NamedParam> ModelBundle::parameters() {
  std::vector<NamedParam> out;
  heatmap_net_2d.collect_parameters("heatmap_net_2d", out);
  attn_net_2d.collect_parameters("attn_net_2d", out);
  root_net.collect_parameters("root_net", out);
  pose_net_3d.collect_parameters("pose_net_3d", out);
  return out;
}

int64_t ModelBundle::parameter_count() {
  int64_t n = 0;
  for (const auto& p : parameters()) n += p.var->value.numel();
  return n;
}

std::map<std::string, Tensor> ModelBundle::state_dict() {
  std::map<std::string, Tensor> out;
  for (auto& p : parameters()) out.emplace(p.name, p.var->value);
  return out;
}

void ModelBundle::load_state_dict(const std::map<std::string, Tensor>& state) {
  for (auto& p : parameters()) {
    auto it = state.find(p.name);
    if (it == state.end()) throw IoError("checkpoint missing parameter " + p.name);
    check_same_shape(p.var->value, it->second, p.name.c_str());
    p.var->value = it->second;
  }
}

AdamOptimizer::AdamOptimizer(std::vector<NamedParam> params, double lr)
    : params_(std::move(params)), lr_(lr) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const auto& p : params_) {
    m_.emplace_back(p.var->value.shape());
    v_.emplace_back(p.var->value.shape());
  }
}

void AdamOptimizer::zero_grad() {
  for (auto& p : params_) {
    p.var->ensure_grad().fill(0.0);
  }
}

void AdamOptimizer::step() {
  ++t_;
  // Global norm clip keeps desk-scale training stable.
  double norm2 = 0.0;
  for (auto& p : params_) {
    if (!p.var->has_grad()) continue;
    const Tensor& g = p.var->grad;
    for (int64_t i = 0; i < g.numel(); ++i) norm2 += g[i] * g[i];
  }
  const double norm = std::sqrt(norm2);
  const double scale = norm > clip_norm_ ? clip_norm_ / norm : 1.0;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (size_t k = 0; k < params_.size(); ++k) {
    auto& p = params_[k];
    if (!p.var->has_grad()) continue;
    Tensor& g = p.var->grad;
    Tensor& m = m_[k];
    Tensor& v = v_[k];
    Tensor& w = p.var->value;
    for (int64_t i = 0; i < g.numel(); ++i) {
      const double gi = g[i] * scale;
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * gi;
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * gi * gi;
      w[i] -= lr_ * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps_);
    }
  }
}

std::map<std::string, Tensor> AdamOptimizer::state_dict() const {
  std::map<std::string, Tensor> out;
  for (size_t k = 0; k < params_.size(); ++k) {
    out.emplace("adam.m." + params_[k].name, m_[k]);
    out.emplace("adam.v." + params_[k].name, v_[k]);
  }
  out.emplace("adam.t", Tensor({1}, {static_cast<double>(t_)}));
  return out;
}

void AdamOptimizer::load_state_dict(const std::map<std::string, Tensor>& state) {
  for (size_t k = 0; k < params_.size(); ++k) {
    auto im = state.find("adam.m." + params_[k].name);
    auto iv = state.find("adam.v." + params_[k].name);
    if (im == state.end() || iv == state.end())
      throw IoError("optimizer state missing for " + params_[k].name);
    m_[k] = im->second;
    v_[k] = iv->second;
  }
  auto it = state.find("adam.t");
  if (it == state.end()) throw IoError("optimizer state missing step counter");
  t_ = static_cast<int64_t>(it->second[0]);
}

}  // namespace sp3d
