#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "disrep/layers.hpp"

namespace disrep {

enum class DatasetPreset { mnist, svhn, celeba, shapes };

DatasetPreset parse_preset(const std::string& name);
std::string to_string(DatasetPreset preset);

/// Iterations over which lambda3/lambda4 rise and the labeled-draw
/// probability falls.
int preset_ramp_iters(DatasetPreset preset);
/// Default total training length.
int preset_train_iters(DatasetPreset preset);

struct RampSchedule {
  double start_value = 0.0;
  double end_value = 1.0;
  int64_t ramp_iters = 1000;

  double value(int64_t iter) const {
    if (ramp_iters <= 0) return end_value;
    const double frac = std::min(static_cast<double>(std::max<int64_t>(iter, 0)) / static_cast<double>(ramp_iters), 1.0);
    if (frac >= 1.0) return end_value;
    return start_value + (end_value - start_value) * frac;
  }
};

struct OptimizerSpec {
  double lr_d = 1e-4;
  double lr_ge = 3e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double eps = 1e-8;
  int batch_size = 64;

  void validate() const;
};

enum class RampedWeight { lambda3, lambda4 };

/// Ramp factor in [0, 1] for lambda3 or lambda4 (both share one schedule).
inline double lambda_at(int64_t iter, RampedWeight, int64_t ramp_iters) { return RampSchedule{0.0, 1.0, ramp_iters}.value(iter); }
inline double lambda_at(int64_t iter, RampedWeight which, DatasetPreset preset) {
  return lambda_at(iter, which, preset_ramp_iters(preset));
}

/// Probability of drawing a training sample from the labeled subset.
inline double labeled_prob_at(int64_t iter, double labeled_ratio, int64_t ramp_iters) {
  return RampSchedule{1.0, labeled_ratio, ramp_iters}.value(iter);
}
inline double labeled_prob_at(int64_t iter, double labeled_ratio, DatasetPreset preset) {
  return labeled_prob_at(iter, labeled_ratio, preset_ramp_iters(preset));
}

// ---------------------------------------------------------------------------
// Adam

template <typename Scalar>
struct AdamMoments {
  Mat<Scalar> m;
  Mat<Scalar> v;
};

/// One bias-corrected Adam update at step `t` (1-based). Throws NumericFault on
/// a non-finite gradient before touching the parameter.
template <typename Scalar>
void adam_step(Mat<Scalar>& param, const Mat<Scalar>& grad, AdamMoments<Scalar>& moments, double lr, double beta1,
               double beta2, double eps, int64_t t) {
  if (t < 1) throw ArgumentError("adam_step: step count must be >= 1");
  if (grad.rows() != param.rows() || grad.cols() != param.cols()) throw ArgumentError("adam_step: shape mismatch");
  if (!grad.allFinite()) throw NumericFault("adam_step: non-finite gradient");
  if (moments.m.size() == 0) {
    moments.m = Mat<Scalar>::Zero(param.rows(), param.cols());
    moments.v = Mat<Scalar>::Zero(param.rows(), param.cols());
  }
  moments.m = Scalar(beta1) * moments.m + Scalar(1 - beta1) * grad;
  moments.v = Scalar(beta2) * moments.v + Scalar(1 - beta2) * grad.cwiseAbs2();
  const Scalar c1 = Scalar(1.0 / (1.0 - std::pow(beta1, static_cast<double>(t))));
  const Scalar c2 = Scalar(1.0 / (1.0 - std::pow(beta2, static_cast<double>(t))));
  param.array() -= Scalar(lr) * (moments.m.array() * c1) / ((moments.v.array() * c2).sqrt() + Scalar(eps));
}

/// Adam state for one network: a moment pair per parameter plus the step count.
template <typename Scalar>
struct Adam {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int64_t step_count = 0;
  std::vector<AdamMoments<Scalar>> moments;

  void step(const std::vector<Param<Scalar>*>& params) {
    if (moments.empty()) moments.resize(params.size());
    if (moments.size() != params.size()) throw ArgumentError("Adam: parameter count changed");
    for (const auto* p : params)
      if (!p->grad.allFinite()) throw NumericFault("adam: non-finite gradient for " + p->name);
    ++step_count;
    for (size_t i = 0; i < params.size(); ++i)
      adam_step(params[i]->value, params[i]->grad, moments[i], lr, beta1, beta2, eps, step_count);
  }
};

}  // namespace disrep
