#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "disrep/latent.hpp"
#include "disrep/losses.hpp"
#include "disrep/netspec.hpp"
#include "disrep/schedule.hpp"

namespace disrep {

/// Everything that determines a training run. Serialized as a flat UTF-8
/// `key = value` file; unknown keys are rejected.
struct RunConfig {
  std::string dataset = "mnist";  // mnist | svhn | celeba | shapes
  std::string family = "mnist";   // network family: mnist | svhn
  int image_size = 28;            // shapes only; idx datasets take the size from the file
  int width_divisor = 1;
  LatentSpec latent = LatentSpec::mnist();
  LossWeights weights;
  OptimizerSpec optimizer;
  int64_t iters = 50000;
  int64_t ramp_iters = 1000;
  int labeled_count = 100;
  int64_t checkpoint_every = 5000;
  uint64_t seed = 0;
  std::string data_dir = "data";
  int shapes_train = 10000;
  int shapes_test = 2000;

  DatasetPreset preset() const { return parse_preset(dataset); }

  /// Defaults for a dataset preset (iterations, ramps, latent layout, family).
  static RunConfig for_preset(DatasetPreset preset);

  void set(const std::string& key, const std::string& value);
  void validate() const;

  /// Canonical `key = value` lines in a fixed order.
  std::vector<std::pair<std::string, std::string>> entries() const;
  std::string to_text() const;
};

RunConfig parse_config(const std::string& text, RunConfig base = {});
RunConfig load_config(const std::filesystem::path& path);

/// Network family for a config (image shape from the dataset).
FamilyConfigs family_for(const RunConfig& config, Shape image);
Shape image_shape_for(const RunConfig& config);

/// Round-trippable decimal form of a double.
std::string format_double(double v);

/// 64-bit FNV-1a hash, printed as 16 hex digits.
std::string fingerprint(const std::string& text);

}  // namespace disrep
