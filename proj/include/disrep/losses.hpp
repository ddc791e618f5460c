#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <utility>

#include "disrep/netspec.hpp"

namespace disrep {

/// Probability floor used inside every logarithm.
inline constexpr double kProbFloor = 1e-7;

/// lambda1 supervised, lambda2 reconstruction, lambda3 mutual information,
/// lambda4 adversarial. lambda3/lambda4 are ramp targets; the trainer scales
/// them by the schedule.
struct LossWeights {
  double lambda1 = 10.0;
  double lambda2 = 1.0;
  double lambda3 = 1.0;
  double lambda4 = 1.0;

  void validate() const {
    if (lambda1 < 0 || lambda2 < 0 || lambda3 < 0 || lambda4 < 0)
      throw ArgumentError("loss weights must be non-negative");
  }
};

struct LossReport {
  double rec = 0;
  double info_cat = 0;
  double info_cont = 0;
  double sup = 0;
  double adv_d = 0;
  double adv_g = 0;
  double adv_e = 0;
  double total_ge = 0;
  double total_d = 0;

  bool all_finite() const {
    for (double v : {rec, info_cat, info_cont, sup, adv_d, adv_g, adv_e, total_ge, total_d})
      if (!std::isfinite(v)) return false;
    return true;
  }
};

// ---------------------------------------------------------------------------
// Reconstruction

/// Per-sample sum of squared pixel differences, averaged over the batch.
template <typename Scalar>
Scalar reconstruction_loss(const Mat<Scalar>& x, const Mat<Scalar>& x_hat, Mat<Scalar>* grad_x_hat = nullptr,
                           Scalar scale = Scalar(1)) {
  if (x.rows() != x_hat.rows() || x.cols() != x_hat.cols())
    throw ArgumentError("reconstruction_loss: shape mismatch");
  if (x.cols() == 0) return Scalar(0);
  const Scalar inv_b = Scalar(1) / Scalar(x.cols());
  if (grad_x_hat) *grad_x_hat = (x_hat - x) * (Scalar(2) * inv_b * scale);
  return (x_hat - x).squaredNorm() * inv_b;
}

// ---------------------------------------------------------------------------
// Categorical cross-entropy against soft or one-hot targets

/// -sum_k target[k] * log softmax(logits)[k] over one column of length k,
/// with the log-probability floored at log(kProbFloor). Adds scale * d/d logits
/// into `grad` when non-null. All pointers address contiguous column data.
template <typename Scalar>
Scalar cross_entropy_column(const Scalar* target, const Scalar* logits, int k, Scalar* grad, Scalar scale) {
  const Scalar log_floor = std::log(Scalar(kProbFloor));
  Scalar mx = logits[0];
  for (int j = 1; j < k; ++j) mx = std::max(mx, logits[j]);
  Scalar sum = 0;
  for (int j = 0; j < k; ++j) sum += std::exp(logits[j] - mx);
  const Scalar lse = mx + std::log(sum);
  Scalar loss = 0;
  Scalar live_mass = 0;
  for (int j = 0; j < k; ++j) {
    if (target[j] == Scalar(0)) continue;
    const Scalar lp = logits[j] - lse;
    if (lp < log_floor) {
      loss -= target[j] * log_floor;
    } else {
      loss -= target[j] * lp;
      live_mass += target[j];
      if (grad) grad[j] -= scale * target[j];
    }
  }
  if (grad && live_mass != Scalar(0))
    for (int j = 0; j < k; ++j) grad[j] += scale * live_mass * std::exp(logits[j] - lse);
  return loss;
}

// ---------------------------------------------------------------------------
// Mutual-information lower bound

struct InfoTerms {
  double cat = 0;
  double cont = 0;
  double total() const { return cat + cont; }
};

/// Negative log-likelihood of the structured part of `codes` under the
/// encoder posterior: categorical cross-entropy per block plus factored
/// Gaussian NLL of cont. H(c) is omitted. Averaged over the batch.
/// When `grad` is non-null, `scale` * d(cat + cont)/d(enc) is accumulated.
template <typename Scalar>
InfoTerms info_loss(const LatentSpec& spec, const Mat<Scalar>& codes, const EncoderOutput<Scalar>& enc,
                    EncoderOutput<Scalar>* grad = nullptr, Scalar scale = Scalar(1)) {
  if (codes.rows() != spec.total_dim() || codes.cols() != enc.batch())
    throw ArgumentError("info_loss: code batch does not match encoder output");
  InfoTerms terms;
  const Eigen::Index batch = codes.cols();
  if (batch == 0) return terms;
  const Scalar inv_b = Scalar(1) / Scalar(batch);

  Scalar cat = 0;
  for (int b = 0; b < spec.num_blocks(); ++b) {
    const int k = spec.cat_dims[b];
    const Mat<Scalar> target = codes.middleRows(spec.cat_offset(b), k);
    for (Eigen::Index i = 0; i < batch; ++i)
      cat += cross_entropy_column(target.col(i).data(), enc.cat_logits[b].col(i).data(), k,
                                  grad ? grad->cat_logits[b].col(i).data() : nullptr, scale * inv_b);
  }

  Scalar cont = 0;
  if (spec.cont_dim > 0) {
    const auto& logstd = enc.cont_logstd;
    if ((logstd.array() < Scalar(kLogStdMin)).any() || (logstd.array() > Scalar(kLogStdMax)).any())
      throw NumericFault("info_loss: cont log-std outside [" + std::to_string(kLogStdMin) + ", " +
                         std::to_string(kLogStdMax) + "]");
    const Scalar half_log_2pi = Scalar(0.5 * std::log(2.0 * std::numbers::pi));
    const Mat<Scalar> diff = codes.bottomRows(spec.cont_dim) - enc.cont_mean;
    const Mat<Scalar> inv_var = (Scalar(-2) * logstd.array()).exp().matrix();
    const Mat<Scalar> z2 = (diff.array().square() * inv_var.array()).matrix();
    cont = (half_log_2pi + logstd.array() + Scalar(0.5) * z2.array()).sum();
    if (grad) {
      grad->cont_mean -= (diff.array() * inv_var.array()).matrix() * (scale * inv_b);
      grad->cont_logstd += (Scalar(1) - z2.array()).matrix() * (scale * inv_b);
    }
  }
  terms.cat = static_cast<double>(cat * inv_b);
  terms.cont = static_cast<double>(cont * inv_b);
  return terms;
}

// ---------------------------------------------------------------------------
// Supervised

/// Cross-entropy of labeled categorical blocks. `labels` and `mask` are
/// (attributes x batch); attribute j supervises categorical block j. The sum
/// over labeled blocks is averaged over samples carrying at least one label.
template <typename Scalar>
Scalar supervised_loss(const LatentSpec& spec, const EncoderOutput<Scalar>& enc, const MatI& labels, const MatB& mask,
                       EncoderOutput<Scalar>* grad = nullptr, Scalar scale = Scalar(1)) {
  if (labels.rows() != mask.rows() || labels.cols() != mask.cols() || mask.cols() != enc.batch())
    throw ArgumentError("supervised_loss: label/mask/batch shape mismatch");
  if (mask.rows() > spec.num_blocks()) throw ArgumentError("supervised_loss: more label attributes than blocks");

  Eigen::Index labeled_samples = 0;
  for (Eigen::Index i = 0; i < mask.cols(); ++i)
    if (mask.col(i).any()) ++labeled_samples;
  if (labeled_samples == 0) return Scalar(0);
  const Scalar norm = Scalar(1) / Scalar(labeled_samples);

  Scalar loss = 0;
  for (Eigen::Index j = 0; j < mask.rows(); ++j) {
    const int k = spec.cat_dims[j];
    for (Eigen::Index i = 0; i < mask.cols(); ++i) {
      if (!mask(j, i)) continue;
      const int y = labels(j, i);
      if (y < 0 || y >= k)
        throw ArgumentError("supervised_loss: label " + std::to_string(y) + " outside block of size " +
                            std::to_string(k));
      Vec<Scalar> target = Vec<Scalar>::Zero(k);
      target[y] = Scalar(1);
      loss += cross_entropy_column(target.data(), enc.cat_logits[j].col(i).data(), k,
                                   grad ? grad->cat_logits[j].col(i).data() : nullptr, scale * norm);
    }
  }
  return loss * norm;
}

// ---------------------------------------------------------------------------
// Adversarial

struct AdversarialLosses {
  double d = 0;  // discriminator: -mean log d_real - mean log(1 - d_fake)
  double g = 0;  // generator (non-saturating): -mean log d_fake
  double e = 0;  // encoder (non-saturating): -mean log(1 - d_real)
};

template <typename Scalar>
Mat<Scalar> clamp_prob(const Mat<Scalar>& p) {
  return p.cwiseMax(Scalar(kProbFloor)).cwiseMin(Scalar(1 - kProbFloor));
}

template <typename Scalar>
AdversarialLosses adversarial_losses(const Mat<Scalar>& d_real, const Mat<Scalar>& d_fake) {
  const Mat<Scalar> r = clamp_prob(d_real);
  const Mat<Scalar> f = clamp_prob(d_fake);
  AdversarialLosses out;
  const double real_log = r.size() ? static_cast<double>(r.array().log().mean()) : 0.0;
  const double fake_log1m = f.size() ? static_cast<double>((Scalar(1) - f.array()).log().mean()) : 0.0;
  out.d = -real_log - fake_log1m;
  out.g = f.size() ? -static_cast<double>(f.array().log().mean()) : 0.0;
  out.e = r.size() ? -static_cast<double>((Scalar(1) - r.array()).log().mean()) : 0.0;
  return out;
}

/// 1 where `p` lies inside the clamp range, 0 where the clamp is active.
template <typename Scalar>
Mat<Scalar> clamp_pass(const Mat<Scalar>& p) {
  return ((p.array() >= Scalar(kProbFloor)) && (p.array() <= Scalar(1 - kProbFloor))).template cast<Scalar>().matrix();
}

/// d L_D / d d_real and d L_D / d d_fake.
template <typename Scalar>
std::pair<Mat<Scalar>, Mat<Scalar>> discriminator_loss_grad(const Mat<Scalar>& d_real, const Mat<Scalar>& d_fake) {
  const Mat<Scalar> r = clamp_prob(d_real);
  const Mat<Scalar> f = clamp_prob(d_fake);
  Mat<Scalar> gr = (-(r.array().inverse()) * clamp_pass(d_real).array()).matrix() / Scalar(r.size());
  Mat<Scalar> gf = (((Scalar(1) - f.array()).inverse()) * clamp_pass(d_fake).array()).matrix() / Scalar(f.size());
  return {std::move(gr), std::move(gf)};
}

/// d L_G / d d_fake.
template <typename Scalar>
Mat<Scalar> generator_loss_grad(const Mat<Scalar>& d_fake) {
  const Mat<Scalar> f = clamp_prob(d_fake);
  return (-(f.array().inverse()) * clamp_pass(d_fake).array()).matrix() / Scalar(f.size());
}

/// d L_E / d d_real.
template <typename Scalar>
Mat<Scalar> encoder_loss_grad(const Mat<Scalar>& d_real) {
  const Mat<Scalar> r = clamp_prob(d_real);
  return (((Scalar(1) - r.array()).inverse()) * clamp_pass(d_real).array()).matrix() / Scalar(r.size());
}

// ---------------------------------------------------------------------------

/// Weighted objectives. The mutual-information term enters as its negative
/// log-likelihood, so maximizing the bound is minimizing lambda3 * info.
inline std::pair<double, double> composite(const LossReport& r, const LossWeights& w) {
  w.validate();
  const double total_ge =
      w.lambda1 * r.sup + w.lambda2 * r.rec + w.lambda3 * (r.info_cat + r.info_cont) + w.lambda4 * (r.adv_g + r.adv_e);
  const double total_d = w.lambda4 * r.adv_d;
  return {total_ge, total_d};
}

}  // namespace disrep
