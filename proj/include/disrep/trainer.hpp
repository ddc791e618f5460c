#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "disrep/checkpoint.hpp"
#include "disrep/config.hpp"
#include "disrep/data.hpp"
#include "disrep/losses.hpp"
#include "disrep/netspec.hpp"
#include "disrep/schedule.hpp"

namespace disrep {

/// Effective loss weights at one iteration (ramps applied).
struct StepWeights {
  double lambda1 = 10.0;
  double lambda2 = 1.0;
  double lambda3 = 1.0;
  double lambda4 = 1.0;

  LossWeights as_loss_weights() const { return {lambda1, lambda2, lambda3, lambda4}; }
};

inline StepWeights weights_at(const LossWeights& w, int64_t iter, int64_t ramp_iters) {
  return {w.lambda1, w.lambda2, w.lambda3 * lambda_at(iter, RampedWeight::lambda3, ramp_iters),
          w.lambda4 * lambda_at(iter, RampedWeight::lambda4, ramp_iters)};
}

/// Discriminator half of an iteration: scores (X, E(X)) against (G(Z), Z) and
/// leaves lambda4 * dL_D/dtheta_D in the discriminator's gradients. G and E
/// gradients are left zero.
template <typename Scalar>
AdversarialLosses discriminator_pass(Model<Scalar>& model, const Mat<Scalar>& images, const Mat<Scalar>& codes,
                                     const StepWeights& w, Rng& rng) {
  const auto& spec = model.spec;
  const EncoderOutput<Scalar> enc = forward_E(model.encoder, spec, images, Mode::train, rng);
  const Mat<Scalar> code_real = posterior_mean_code(spec, enc);
  const Mat<Scalar> x_fake = forward_G(model.generator, codes, Mode::train, rng);

  DiscriminatorTrace<Scalar> t_real;
  DiscriminatorTrace<Scalar> t_fake;
  const Mat<Scalar> d_real = forward_D(model.discriminator, images, code_real, Mode::train, rng, t_real);
  const Mat<Scalar> d_fake = forward_D(model.discriminator, x_fake, codes, Mode::train, rng, t_fake);
  const AdversarialLosses adv = adversarial_losses(d_real, d_fake);

  model.generator.zero_grad();
  model.encoder.zero_grad();
  model.discriminator.zero_grad();
  if (w.lambda4 != 0.0) {
    auto [g_real, g_fake] = discriminator_loss_grad(d_real, d_fake);
    backward_D(model.discriminator, t_real, Mat<Scalar>(g_real * Scalar(w.lambda4)));
    backward_D(model.discriminator, t_fake, Mat<Scalar>(g_fake * Scalar(w.lambda4)));
  }
  return adv;
}

/// Generator/encoder half of an iteration. Leaves d(total_ge)/dtheta in the
/// generator and encoder gradients; discriminator gradients are zeroed.
/// `labels`/`mask` are (attributes x B) and may have zero rows.
template <typename Scalar>
LossReport generator_encoder_pass(Model<Scalar>& model, const Mat<Scalar>& images, const MatI& labels,
                                  const MatB& mask, const Mat<Scalar>& codes, const StepWeights& w, Rng& rng) {
  const auto& spec = model.spec;
  auto& G = model.generator;
  auto& E = model.encoder;
  auto& D = model.discriminator;
  G.zero_grad();
  E.zero_grad();
  D.zero_grad();
  LossReport report;

  // Encoder path: X -> E(X) -> G(E(X)).
  Trace<Scalar> t_enc_real;
  const EncoderOutput<Scalar> enc = forward_E(E, spec, images, Mode::train, rng, t_enc_real);
  EncoderOutput<Scalar> g_enc = EncoderOutput<Scalar>::zeros_like(enc);
  const Mat<Scalar> code_real = posterior_mean_code(spec, enc);
  Trace<Scalar> t_rec;
  const Mat<Scalar> x_rec = forward_G(G, code_real, Mode::train, rng, t_rec);
  Mat<Scalar> g_x_rec;
  report.rec = static_cast<double>(reconstruction_loss(images, x_rec, &g_x_rec, Scalar(w.lambda2)));
  report.sup = static_cast<double>(supervised_loss(spec, enc, labels, mask, &g_enc, Scalar(w.lambda1)));

  // Generator path: Z -> G(Z) -> E(G(Z)).
  Trace<Scalar> t_fake;
  const Mat<Scalar> x_fake = forward_G(G, codes, Mode::train, rng, t_fake);
  Trace<Scalar> t_enc_fake;
  const EncoderOutput<Scalar> enc_fake = forward_E(E, spec, x_fake, Mode::train, rng, t_enc_fake);
  EncoderOutput<Scalar> g_enc_fake = EncoderOutput<Scalar>::zeros_like(enc_fake);
  const InfoTerms info = info_loss(spec, codes, enc_fake, &g_enc_fake, Scalar(w.lambda3));
  report.info_cat = info.cat;
  report.info_cont = info.cont;

  DiscriminatorTrace<Scalar> t_d_real;
  DiscriminatorTrace<Scalar> t_d_fake;
  const Mat<Scalar> d_real = forward_D(D, images, code_real, Mode::train, rng, t_d_real);
  const Mat<Scalar> d_fake = forward_D(D, x_fake, codes, Mode::train, rng, t_d_fake);
  const AdversarialLosses adv = adversarial_losses(d_real, d_fake);
  report.adv_d = adv.d;
  report.adv_g = adv.g;
  report.adv_e = adv.e;

  Mat<Scalar> g_x_fake = backward_E(E, spec, t_enc_fake, enc_fake, g_enc_fake);
  Mat<Scalar> g_code_real = Mat<Scalar>::Zero(code_real.rows(), code_real.cols());
  if (w.lambda4 != 0.0) {
    const Scalar l4 = Scalar(w.lambda4);
    g_code_real += backward_D(D, t_d_real, Mat<Scalar>(encoder_loss_grad(d_real) * l4)).second;
    g_x_fake += backward_D(D, t_d_fake, Mat<Scalar>(generator_loss_grad(d_fake) * l4)).first;
    D.zero_grad();
  }
  backward_G(G, t_fake, g_x_fake);
  g_code_real += backward_G(G, t_rec, g_x_rec);
  posterior_mean_code_backward(spec, enc, g_code_real, g_enc);
  backward_E(E, spec, t_enc_real, enc, g_enc);

  std::tie(report.total_ge, report.total_d) = composite(report, w.as_loss_weights());
  return report;
}

// ---------------------------------------------------------------------------

using Real = float;

struct TrainState {
  int64_t iteration = 0;
  Model<Real> model;
  Adam<Real> adam_d;
  Adam<Real> adam_g;
  Adam<Real> adam_e;
  Rng rng;
  std::string fingerprint;
};

/// Fresh state: networks initialized from the config seed.
TrainState init_state(const RunConfig& config, Shape image);

/// One iteration: a discriminator update, then one joint generator/encoder
/// update on the same batch and latent sample. Throws NumericFault on a
/// non-finite loss.
LossReport train_step(TrainState& state, const LabeledBatch& batch, const RunConfig& config);

struct DataSplits {
  Dataset train;
  Dataset test;
  LabeledSubset labeled;
};

/// Loads (or generates, for shapes) the train/test splits and selects the
/// labeled subset, all determined by the config seed.
DataSplits load_datasets(const RunConfig& config);

struct LogRow {
  int64_t iter = 0;
  LossReport report;
};

std::string log_header();
std::string log_line(const LogRow& row);

struct TrainOptions {
  std::filesystem::path output_dir;  // checkpoints and loss.csv; empty disables file output
  std::function<void(const LogRow&)> on_row;
  bool append_log = false;
};

/// Runs train_step until config.iters, checkpointing every
/// config.checkpoint_every iterations and at the end.
std::vector<LogRow> train(TrainState& state, const DataSplits& data, const RunConfig& config,
                          const TrainOptions& options = {});

std::filesystem::path checkpoint_path(const std::filesystem::path& dir, int64_t iteration);

Container checkpoint_container(TrainState& state, const RunConfig& config);
void save_checkpoint(TrainState& state, const RunConfig& config, const std::filesystem::path& path);

struct LoadedCheckpoint {
  RunConfig config;
  TrainState state;
};

/// Restores config and state; when `expected` is given, the stored
/// architecture must match the one built from it.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path, const RunConfig* expected = nullptr);
LoadedCheckpoint checkpoint_from_container(const Container& c, const RunConfig* expected = nullptr);

/// Architecture echo stored in manifests.
std::string architecture_text(const Model<Real>& model);

}  // namespace disrep
