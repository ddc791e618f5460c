#include "disrep/schedule.hpp"

namespace disrep {

DatasetPreset parse_preset(const std::string& name) {
  if (name == "mnist") return DatasetPreset::mnist;
  if (name == "svhn") return DatasetPreset::svhn;
  if (name == "celeba") return DatasetPreset::celeba;
  if (name == "shapes") return DatasetPreset::shapes;
  throw ConfigError("unknown dataset preset '" + name + "'");
}

std::string to_string(DatasetPreset preset) {
  switch (preset) {
    case DatasetPreset::mnist: return "mnist";
    case DatasetPreset::svhn: return "svhn";
    case DatasetPreset::celeba: return "celeba";
    case DatasetPreset::shapes: return "shapes";
  }
  return "?";
}

int preset_ramp_iters(DatasetPreset preset) {
  switch (preset) {
    case DatasetPreset::mnist:
    case DatasetPreset::shapes:
      return 1000;
    case DatasetPreset::svhn:
    case DatasetPreset::celeba:
      return 10000;
  }
  return 1000;
}

int preset_train_iters(DatasetPreset preset) {
  switch (preset) {
    case DatasetPreset::mnist: return 50000;
    case DatasetPreset::svhn: return 150000;
    case DatasetPreset::celeba: return 300000;
    case DatasetPreset::shapes: return 3000;
  }
  return 50000;
}

void OptimizerSpec::validate() const {
  if (!(lr_d > 0) || !(lr_ge > 0)) throw ArgumentError("learning rates must be positive");
  if (!(beta1 > 0 && beta1 < 1) || !(beta2 > 0 && beta2 < 1)) throw ArgumentError("Adam betas must lie in (0, 1)");
  if (!(eps > 0)) throw ArgumentError("Adam epsilon must be positive");
  if (batch_size < 1) throw ArgumentError("batch size must be positive");
}

}  // namespace disrep
