#include "sp3d/checkpoint.hpp"

#include <cstring>

#include <json.hpp>

#include "sp3d/blob.hpp"

using nlohmann::json;

namespace sp3d {

int stage_rank(const std::string& stage) {
  if (stage == "pretrain") return 0;
  if (stage == "root") return 1;
  if (stage == "pose_l2") return 2;
  if (stage == "pose_l1l2") return 3;
  throw InvalidConfig("unknown stage: " + stage);
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  json h;
  h["schema"] = "selfpose3d-checkpoint/1";
  h["stage"] = ckpt.stage;
  h["epoch"] = ckpt.epoch;
  h["step"] = ckpt.step;
  h["seed"] = ckpt.seed;
  h["config"] = {{"joints", ckpt.config.joints},
                 {"heatmap_width", ckpt.config.heatmap_width},
                 {"attn_width", ckpt.config.attn_width},
                 {"root_width", ckpt.config.root_width},
                 {"pose_width", ckpt.config.pose_width}};
  h["hyper"] = {{"lambda", ckpt.hyper.lambda},
                {"sigma_attn", ckpt.hyper.sigma_attn},
                {"beta", ckpt.hyper.beta},
                {"sigma_hm", ckpt.hyper.sigma_hm},
                {"nms_window", ckpt.hyper.nms_window},
                {"nms_threshold", ckpt.hyper.nms_threshold},
                {"max_proposals", ckpt.hyper.max_proposals}};
  json dir = json::array();
  for (const auto& [name, t] : ckpt.model_state) dir.push_back({{"map", "model"}, {"name", name}});
  for (const auto& [name, t] : ckpt.optimizer_state)
    dir.push_back({{"map", "optimizer"}, {"name", name}});
  h["tensors"] = dir;
  const std::string header = h.dump();

  std::vector<uint8_t> bytes;
  bytes.insert(bytes.end(), {'S', 'P', 'C', '1'});
  const uint32_t len = static_cast<uint32_t>(header.size());
  for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<uint8_t>((len >> (8 * i)) & 0xff));
  bytes.insert(bytes.end(), header.begin(), header.end());
  for (const auto& [name, t] : ckpt.model_state) {
    const auto blob = encode_blob(t, BlobDtype::Float64);
    bytes.insert(bytes.end(), blob.begin(), blob.end());
  }
  for (const auto& [name, t] : ckpt.optimizer_state) {
    const auto blob = encode_blob(t, BlobDtype::Float64);
    bytes.insert(bytes.end(), blob.begin(), blob.end());
  }
  write_file_bytes(path, bytes);
}

Checkpoint load_checkpoint(const std::string& path) {
  const auto bytes = read_file_bytes(path);
  if (bytes.size() < 8 || std::memcmp(bytes.data(), "SPC1", 4) != 0)
    throw IoError("not a checkpoint file: " + path);
  uint32_t len = 0;
  for (int i = 0; i < 4; ++i) len |= static_cast<uint32_t>(bytes[4 + static_cast<size_t>(i)]) << (8 * i);
  if (bytes.size() < 8 + static_cast<size_t>(len)) throw IoError("truncated checkpoint header");
  const json h = json::parse(std::string(bytes.begin() + 8, bytes.begin() + 8 + len));

  Checkpoint ckpt;
  ckpt.stage = h.at("stage").get<std::string>();
  ckpt.epoch = h.at("epoch").get<int64_t>();
  ckpt.step = h.at("step").get<int64_t>();
  ckpt.seed = h.at("seed").get<uint64_t>();
  const auto& c = h.at("config");
  ckpt.config.joints = c.at("joints").get<int>();
  ckpt.config.heatmap_width = c.at("heatmap_width").get<int>();
  ckpt.config.attn_width = c.at("attn_width").get<int>();
  ckpt.config.root_width = c.at("root_width").get<int>();
  ckpt.config.pose_width = c.at("pose_width").get<int>();
  const auto& hy = h.at("hyper");
  ckpt.hyper.lambda = hy.at("lambda").get<double>();
  ckpt.hyper.sigma_attn = hy.at("sigma_attn").get<double>();
  ckpt.hyper.beta = hy.at("beta").get<double>();
  ckpt.hyper.sigma_hm = hy.at("sigma_hm").get<double>();
  ckpt.hyper.nms_window = hy.at("nms_window").get<int>();
  ckpt.hyper.nms_threshold = hy.at("nms_threshold").get<double>();
  ckpt.hyper.max_proposals = hy.at("max_proposals").get<int>();

  size_t off = 8 + len;
  for (const auto& entry : h.at("tensors")) {
    size_t consumed = 0;
    Tensor t = decode_blob(bytes.data() + off, bytes.size() - off, &consumed);
    off += consumed;
    const std::string name = entry.at("name").get<std::string>();
    if (entry.at("map").get<std::string>() == "model")
      ckpt.model_state.emplace(name, std::move(t));
    else
      ckpt.optimizer_state.emplace(name, std::move(t));
  }
  return ckpt;
}

}  // namespace sp3d
