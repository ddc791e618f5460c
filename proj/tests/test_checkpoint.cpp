#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <bit>
#include <filesystem>

#include "disrep/config.hpp"
#include "disrep/trainer.hpp"

using namespace disrep;

namespace {

RunConfig tiny_config() {
  RunConfig c = RunConfig::for_preset(DatasetPreset::shapes);
  c.width_divisor = 16;
  c.iters = 4;
  c.seed = 21;
  c.data_dir = "";
  return c;
}

std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "disrep_test_checkpoint";
  std::filesystem::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_CASE("config text") {
  const RunConfig c = parse_config("# comment\ndataset = mnist\nlambda1 = 2.5\ncat_dims = 10, 5\niters=7\n");
  CHECK(c.weights.lambda1 == 2.5);
  CHECK(c.latent.cat_dims == std::vector<int>{10, 5});
  CHECK(c.iters == 7);
  CHECK(c.ramp_iters == 1000);
  CHECK(parse_config(c.to_text()).to_text() == c.to_text());

  CHECK_THROWS_AS(parse_config("learning_rate = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("iters = many\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("iters\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("dataset = cifar\n"), ConfigError);
}

TEST_CASE("mnist preset echoes the published hyperparameters") {
  const RunConfig c = RunConfig::for_preset(DatasetPreset::mnist);
  CHECK(c.weights.lambda1 == 10.0);
  CHECK(c.optimizer.lr_d == 1e-4);
  CHECK(c.optimizer.lr_ge == 3e-4);
  CHECK(c.optimizer.beta1 == 0.5);
  CHECK(c.optimizer.batch_size == 64);
  CHECK(c.latent == LatentSpec::mnist());
  CHECK(c.labeled_count == 100);
  const std::string text = c.to_text();
  CHECK(text.find("lambda1 = 10\n") != std::string::npos);
  CHECK(text.find("lr_d = 1e-04\n") != std::string::npos);
}

TEST_CASE("doubles and fingerprints") {
  for (double v : {0.1, 1e-4, 3e-4, 1.0 / 3.0, 6.02214076e23, -0.0})
    CHECK(std::bit_cast<uint64_t>(std::stod(format_double(v))) == std::bit_cast<uint64_t>(v));
  // Published FNV-1a 64-bit test vectors.
  CHECK(fingerprint("") == "cbf29ce484222325");
  CHECK(fingerprint("a") == "af63dc4c8601ec8c");
}

TEST_CASE("container encoding") {
  Container c;
  c.manifest = {{"format_version", "1"}, {"kind", "test"}};
  Mat<float> f(2, 2);
  f << 0.1f, -0.0f, std::numeric_limits<float>::denorm_min(), 3.0e38f;
  Mat<double> d(1, 3);
  d << 0.1, 1e-300, -2.5;
  c.put("f", f);
  c.put("d", d);
  const auto bytes = encode_container(c);
  CHECK(std::string(bytes.begin(), bytes.begin() + 8) == "DISREPCK");

  const Container back = decode_container(bytes);
  CHECK(back.get("kind") == "test");
  Mat<float> f2(2, 2);
  Mat<double> d2(1, 3);
  back.take("f", f2);
  back.take("d", d2);
  for (Eigen::Index i = 0; i < 4; ++i) CHECK(std::bit_cast<uint32_t>(f2(i)) == std::bit_cast<uint32_t>(f(i)));
  for (Eigen::Index i = 0; i < 3; ++i) CHECK(std::bit_cast<uint64_t>(d2(i)) == std::bit_cast<uint64_t>(d(i)));
  CHECK(encode_container(back) == bytes);

  Mat<float> wrong(3, 1);
  CHECK_THROWS_AS(back.take("f", wrong), LoadError);
  CHECK_THROWS_AS(back.take("missing", f2), LoadError);

  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  CHECK_THROWS_AS(decode_container(bad_magic), FormatError);
  auto bad_version = bytes;
  bad_version[8] = 9;
  CHECK_THROWS_AS(decode_container(bad_version), LoadError);
  auto truncated = bytes;
  truncated.resize(bytes.size() - 3);
  CHECK_THROWS_AS(decode_container(truncated), FormatError);
}

TEST_CASE("model checkpoints") {
  const RunConfig config = tiny_config();
  TrainState state = init_state(config, image_shape_for(config));
  const auto data = load_datasets(config);
  train_step(state, draw_batch(data.train, data.labeled, 0.5, config.optimizer.batch_size, state.rng), config);

  const auto path = scratch("a.ckpt");
  save_checkpoint(state, config, path);
  const Container c = load_container(path);
  CHECK(c.get("kind") == "model");
  CHECK(c.get("iteration") == "1");
  CHECK(c.get("image_shape") == "16x16x1");
  CHECK(c.get("fingerprint") == state.fingerprint);

  SUBCASE("save, load, save is byte-identical") {
    auto loaded = load_checkpoint(path, &config);
    CHECK(loaded.state.iteration == 1);
    CHECK(loaded.config.to_text() == config.to_text());
    const auto again = scratch("b.ckpt");
    save_checkpoint(loaded.state, loaded.config, again);
    CHECK(read_file(again) == read_file(path));
    auto original = state.model.generator.named_params();
    auto restored = loaded.state.model.generator.named_params();
    REQUIRE(original.size() == restored.size());
    for (size_t i = 0; i < original.size(); ++i) CHECK(original[i].second->value == restored[i].second->value);
  }

  SUBCASE("tampered manifests are rejected") {
    Container t = c;
    for (auto& [k, v] : t.manifest)
      if (k == "format_version") v = "2";
    CHECK_THROWS_AS(checkpoint_from_container(t), LoadError);

    Container arch = c;
    for (auto& [k, v] : arch.manifest)
      if (k == "architecture.generator") v += " |extra";
    CHECK_THROWS_AS(checkpoint_from_container(arch), LoadError);

    RunConfig other = config;
    other.width_divisor = 8;
    CHECK_THROWS_AS(load_checkpoint(path, &other), LoadError);
  }

  std::filesystem::remove_all(path.parent_path());
}
