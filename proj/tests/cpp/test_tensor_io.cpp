#include <doctest.h>

#include <cstdio>
#include <filesystem>

#include "sp3d/blob.hpp"
#include "sp3d/checkpoint.hpp"
#include "sp3d/config.hpp"
#include "sp3d/manifest.hpp"
#include "sp3d/rng.hpp"
#include "sp3d/scene_synth.hpp"

using namespace sp3d;
namespace fs = std::filesystem;

namespace {
std::string temp_dir(const char* tag) {
  const auto d = fs::temp_directory_path() / (std::string("sp3d_test_") + tag);
  fs::remove_all(d);
  fs::create_directories(d);
  return d.string();
}
}  // namespace

TEST_CASE("tensor basics") {
  Tensor t({2, 3}, {1, 2, 3, 4, 5, 6});
  CHECK(t.numel() == 6);
  CHECK(t.at(1, 2) == 6);
  CHECK(t.sum() == doctest::Approx(21.0));
  CHECK(t.argmax() == 5);
  CHECK_THROWS_AS(t.reshaped({4, 2}), ShapeMismatch);
  CHECK(t.reshaped({3, 2}).at(2, 1) == 6);
}

TEST_CASE("tensor blob round trip is bit exact") {
  Rng rng(3);
  Tensor t({3, 4, 5});
  for (int64_t i = 0; i < t.numel(); ++i) t[i] = rng.normal(0, 10);

  for (BlobDtype dtype : {BlobDtype::Float32, BlobDtype::Float64}) {
    const auto bytes1 = encode_blob(t, dtype);
    const Tensor back = decode_blob(bytes1.data(), bytes1.size());
    const auto bytes2 = encode_blob(back, dtype);
    CHECK(bytes1 == bytes2);
    CHECK(back.shape() == t.shape());
  }
  // float64 also preserves exact values
  const auto b = encode_blob(t, BlobDtype::Float64);
  const Tensor back = decode_blob(b.data(), b.size());
  for (int64_t i = 0; i < t.numel(); ++i) CHECK(back[i] == t[i]);
}

TEST_CASE("blob header validation") {
  std::vector<uint8_t> junk = {'X', 'P', 'T', '1', 1, 1, 4, 0, 0, 0};
  CHECK_THROWS_AS(decode_blob(junk.data(), junk.size()), IoError);
}

TEST_CASE("scene manifest round trip is bit exact") {
  SceneConfig cfg;
  cfg.frames = 2;
  cfg.persons = 2;
  cfg.views = 3;
  cfg.image_width = 64;
  cfg.image_height = 64;
  cfg.seed = 5;
  const SyntheticScene scene = generate_scene(cfg);
  const std::string dir = temp_dir("scene_rt");
  write_scene_dir(dir, scene);

  SceneReader reader(dir);
  CHECK(reader.frame_count() == 2);
  CHECK(reader.cams().size() == 3);
  CHECK(reader.seed() == 5);

  // Re-write what was read and compare every byte of every file.
  const std::string dir2 = temp_dir("scene_rt2");
  SceneDirWriter w(dir2, reader.skeleton(), reader.cams(), reader.workspace(),
                   reader.seed());
  for (int64_t f = 0; f < reader.frame_count(); ++f) w.add_frame(reader.load_frame(f));
  w.finalize();
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const auto rel = fs::relative(entry.path(), dir);
    const auto other = fs::path(dir2) / rel;
    REQUIRE(fs::exists(other));
    CHECK(read_file_bytes(entry.path().string()) == read_file_bytes(other.string()));
  }
}

TEST_CASE("calibration loader rejects distortion") {
  const std::string dir = temp_dir("calib");
  const Aabb ws = default_workspace();
  auto cams = make_camera_rig(2, ws, 4500.0, {2300.0, 2900.0}, 64, 64, 2);
  write_calibration(dir + "/calib.json", cams);
  CHECK(load_calibration(dir + "/calib.json").size() == 2);

  // Inject a distortion field.
  auto bytes = read_file_bytes(dir + "/calib.json");
  std::string text(bytes.begin(), bytes.end());
  const auto pos = text.find("\"id\": 0");
  text.insert(pos, "\"distortion\": [0.1, 0.0], ");
  std::FILE* f = std::fopen((dir + "/bad.json").c_str(), "w");
  std::fwrite(text.data(), 1, text.size(), f);
  std::fclose(f);
  CHECK_THROWS_AS(load_calibration(dir + "/bad.json"), InvalidCalibration);
}

TEST_CASE("checkpoint round trip is bit exact") {
  Checkpoint ckpt;
  ckpt.stage = "root";
  ckpt.epoch = 2;
  ckpt.step = 123;
  ckpt.seed = 9;
  Rng rng(11);
  Tensor a({4, 3});
  for (int64_t i = 0; i < a.numel(); ++i) a[i] = rng.normal(0, 1);
  ckpt.model_state.emplace("net.w", a);
  ckpt.optimizer_state.emplace("adam.t", Tensor({1}, {7.0}));

  const std::string dir = temp_dir("ckpt");
  save_checkpoint(dir + "/c.spc", ckpt);
  const Checkpoint back = load_checkpoint(dir + "/c.spc");
  CHECK(back.stage == "root");
  CHECK(back.epoch == 2);
  CHECK(back.model_state.at("net.w")[5] == a[5]);
  save_checkpoint(dir + "/c2.spc", back);
  CHECK(read_file_bytes(dir + "/c.spc") == read_file_bytes(dir + "/c2.spc"));
}

TEST_CASE("train config parsing") {
  const TrainConfig cfg = parse_train_config_text(
      "# comment\n"
      "seed = 42\n"
      "stage.pretrain.epochs = 7\n"
      "stage.pose_l1l2.lr = 2e-5\n"
      "aug.rotation_deg_max = 30  # inline comment\n"
      "flags.soft_attention = false\n"
      "lambda = 0.02\n");
  CHECK(cfg.seed == 42);
  CHECK(cfg.stage.pretrain.epochs == 7);
  CHECK(cfg.stage.pose_l1l2.lr == doctest::Approx(2e-5));
  CHECK(cfg.aug.rotation_deg_max == doctest::Approx(30.0));
  CHECK(cfg.flags.soft_attention == false);
  CHECK(cfg.lambda == doctest::Approx(0.02));
  CHECK_THROWS_AS(parse_train_config_text("not_a_key = 1\n"), InvalidConfig);
  CHECK_THROWS_AS(parse_train_config_text("aug.rotation_deg_min = 50\n"), InvalidConfig);
}

TEST_CASE("rng determinism and mixing") {
  Rng a(77), b(77);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
  CHECK(Rng::mix(1, 2) != Rng::mix(2, 1));
  CHECK(Rng::mix(1, 2, 3) == Rng::mix(1, 2, 3));
}
