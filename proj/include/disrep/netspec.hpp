#pragma once

#include <string>
#include <utility>
#include <vector>

#include "disrep/latent.hpp"
#include "disrep/layers.hpp"

namespace disrep {

enum class LayerKind { convolution, transposed_convolution, fully_connected, reshape, concatenate, dropout, output_head };
enum class Activation { elu, sigmoid, softmax, linear };

struct LayerDesc {
  LayerKind kind = LayerKind::fully_connected;
  int kernel = 0;
  int units = 0;  // output channels, units, or head width
  int stride = 1;
  Activation activation = Activation::linear;
  bool batch_norm = false;
  double dropout = 0.0;  // applied after the activation
  Shape reshape{};       // target shape for LayerKind::reshape

  bool operator==(const LayerDesc&) const = default;
};

enum class NetRole { generator, encoder, discriminator, classifier };

/// One linear chain of layers. The discriminator has three: "image",
/// "code", and "joint" (whose input is the concatenation of the first two).
struct Branch {
  std::string name;
  Shape input;
  std::vector<LayerDesc> layers;

  bool operator==(const Branch&) const = default;
};

struct NetworkConfig {
  NetRole role = NetRole::generator;
  std::vector<Branch> branches;

  const Branch& branch(const std::string& name) const;
  bool operator==(const NetworkConfig&) const = default;
};

struct FamilyConfigs {
  NetworkConfig generator;
  NetworkConfig encoder;
  NetworkConfig discriminator;
};

/// Width of the encoder head: u_hat, categorical logits, cont mean, cont log-std.
inline int encoder_head_width(const LatentSpec& spec) { return spec.u_dim + spec.cat_total() + 2 * spec.cont_dim; }

/// Smaller family (28x28x1 by default). `width_divisor` scales every channel
/// and unit count down for desk-scale runs; 1 reproduces the published sizes.
FamilyConfigs build_mnist_family(const LatentSpec& spec, Shape image = {28, 28, 1}, int width_divisor = 1);

/// Larger family (32x32x3 for SVHN, any multiple-of-8 crop for faces).
FamilyConfigs build_svhn_celeba_family(const LatentSpec& spec, Shape image = {32, 32, 3}, int width_divisor = 1);

/// Oracle classifier: the encoder's convolution stack with a plain softmax head.
NetworkConfig build_classifier(const NetworkConfig& encoder, int num_classes);

/// Propagates shapes through a branch, validating every layer; returns the output shape.
Shape propagate(const Branch& branch);
/// Validates all branches of a config. Throws ConfigError.
void validate(const NetworkConfig& config);
/// Output shape of the config's final branch.
Shape output_shape(const NetworkConfig& config);

/// Human-readable layer list, one layer per line.
std::string describe(const NetworkConfig& config);
std::string to_string(NetRole role);

// ---------------------------------------------------------------------------
// Runtime networks

template <typename Scalar>
Sequential<Scalar> instantiate(const Branch& branch, Rng& rng) {
  Sequential<Scalar> seq;
  Shape shape = branch.input;
  for (const auto& d : branch.layers) {
    switch (d.kind) {
      case LayerKind::convolution: {
        const auto g = ConvGeometry::same(shape, d.units, d.kernel, d.stride);
        seq.add(std::make_unique<Conv2d<Scalar>>(g, rng));
        shape = g.out;
        break;
      }
      case LayerKind::transposed_convolution: {
        const Shape out{shape.height * d.stride, shape.width * d.stride, d.units};
        const auto g = ConvGeometry::same(out, shape.channels, d.kernel, d.stride);
        seq.add(std::make_unique<ConvTranspose2d<Scalar>>(g, rng));
        shape = out;
        break;
      }
      case LayerKind::fully_connected:
      case LayerKind::output_head:
        seq.add(std::make_unique<Dense<Scalar>>(shape.size(), d.units, rng));
        shape = {1, 1, d.units};
        break;
      case LayerKind::reshape:
        shape = d.reshape;
        break;
      case LayerKind::concatenate:
      case LayerKind::dropout:
        break;
    }
    if (d.batch_norm) seq.add(std::make_unique<BatchNorm<Scalar>>(shape.channels));
    if (d.activation == Activation::elu) seq.add(std::make_unique<Elu<Scalar>>());
    if (d.activation == Activation::sigmoid) seq.add(std::make_unique<Sigmoid<Scalar>>());
    if (d.dropout > 0.0) seq.add(std::make_unique<Dropout<Scalar>>(d.dropout));
  }
  return seq;
}

template <typename Scalar>
struct Network {
  NetworkConfig config;
  std::vector<Sequential<Scalar>> branches;

  Network() = default;
  Network(NetworkConfig cfg, Rng& rng) : config(std::move(cfg)) {
    validate(config);
    for (const auto& b : config.branches) branches.push_back(instantiate<Scalar>(b, rng));
  }

  std::vector<std::pair<std::string, Param<Scalar>*>> named_params() { return collect(false); }
  std::vector<std::pair<std::string, Param<Scalar>*>> named_buffers() { return collect(true); }

  std::vector<Param<Scalar>*> params() {
    std::vector<Param<Scalar>*> out;
    for (auto& b : branches)
      for (auto* p : b.params()) out.push_back(p);
    return out;
  }
  void zero_grad() {
    for (auto& b : branches) b.zero_grad();
  }
  Eigen::Index parameter_count() {
    Eigen::Index n = 0;
    for (auto* p : params()) n += p->value.size();
    return n;
  }

 private:
  std::vector<std::pair<std::string, Param<Scalar>*>> collect(bool buffers) {
    std::vector<std::pair<std::string, Param<Scalar>*>> out;
    for (size_t b = 0; b < branches.size(); ++b) {
      for (size_t i = 0; i < branches[b].size(); ++i) {
        std::vector<Param<Scalar>*> ps;
        auto& layer = branches[b].layer(i);
        if (buffers)
          layer.buffers(ps);
        else
          layer.params(ps);
        for (auto* p : ps) out.emplace_back(config.branches[b].name + "." + std::to_string(i) + "." + p->name, p);
      }
    }
    return out;
  }
};

// ---------------------------------------------------------------------------
// Encoder head

inline constexpr double kLogStdMin = -5.0;
inline constexpr double kLogStdMax = 2.0;

/// Per-sample encoder statistics; every matrix has one column per sample.
/// The same structure carries gradients with respect to these statistics.
template <typename Scalar>
struct EncoderOutput {
  Mat<Scalar> u_hat;
  std::vector<Mat<Scalar>> cat_logits;
  Mat<Scalar> cont_mean;
  Mat<Scalar> cont_logstd;

  Eigen::Index batch() const { return u_hat.cols(); }

  static EncoderOutput zeros_like(const EncoderOutput& o) {
    EncoderOutput z;
    z.u_hat = Mat<Scalar>::Zero(o.u_hat.rows(), o.u_hat.cols());
    for (const auto& l : o.cat_logits) z.cat_logits.push_back(Mat<Scalar>::Zero(l.rows(), l.cols()));
    z.cont_mean = Mat<Scalar>::Zero(o.cont_mean.rows(), o.cont_mean.cols());
    z.cont_logstd = Mat<Scalar>::Zero(o.cont_logstd.rows(), o.cont_logstd.cols());
    return z;
  }
};

/// Column-wise softmax.
template <typename Scalar>
Mat<Scalar> softmax(const Mat<Scalar>& logits) {
  Mat<Scalar> p = logits.rowwise() - logits.colwise().maxCoeff();
  p = p.array().exp().matrix();
  p.array().rowwise() /= p.colwise().sum().array();
  return p;
}

/// Column-wise log-softmax.
template <typename Scalar>
Mat<Scalar> log_softmax(const Mat<Scalar>& logits) {
  Mat<Scalar> shifted = logits.rowwise() - logits.colwise().maxCoeff();
  Eigen::Matrix<Scalar, 1, Eigen::Dynamic> lse = shifted.array().exp().colwise().sum().log().matrix();
  return shifted.rowwise() - lse;
}

template <typename Scalar>
EncoderOutput<Scalar> split_head(const LatentSpec& spec, const Mat<Scalar>& raw) {
  if (raw.rows() != encoder_head_width(spec)) throw ArgumentError("encoder head width mismatch");
  EncoderOutput<Scalar> out;
  out.u_hat = raw.topRows(spec.u_dim).array().tanh().matrix();
  for (int b = 0; b < spec.num_blocks(); ++b)
    out.cat_logits.push_back(raw.middleRows(spec.cat_offset(b), spec.cat_dims[b]));
  out.cont_mean = raw.middleRows(spec.cont_offset(), spec.cont_dim).array().tanh().matrix();
  out.cont_logstd = raw.middleRows(spec.cont_offset() + spec.cont_dim, spec.cont_dim)
                        .cwiseMax(Scalar(kLogStdMin))
                        .cwiseMin(Scalar(kLogStdMax));
  return out;
}

/// Gradient with respect to the raw head given gradients w.r.t. the head statistics.
template <typename Scalar>
Mat<Scalar> split_head_backward(const LatentSpec& spec, const EncoderOutput<Scalar>& out,
                                const EncoderOutput<Scalar>& grad) {
  Mat<Scalar> g(encoder_head_width(spec), out.batch());
  g.topRows(spec.u_dim) = (grad.u_hat.array() * (Scalar(1) - out.u_hat.array().square())).matrix();
  for (int b = 0; b < spec.num_blocks(); ++b) g.middleRows(spec.cat_offset(b), spec.cat_dims[b]) = grad.cat_logits[b];
  g.middleRows(spec.cont_offset(), spec.cont_dim) =
      (grad.cont_mean.array() * (Scalar(1) - out.cont_mean.array().square())).matrix();
  g.middleRows(spec.cont_offset() + spec.cont_dim, spec.cont_dim) =
      grad.cont_logstd.binaryExpr(out.cont_logstd, [](Scalar gv, Scalar v) {
        return (v > Scalar(kLogStdMin) && v < Scalar(kLogStdMax)) ? gv : Scalar(0);
      });
  return g;
}

/// Deterministic code from encoder statistics: (u_hat, softmax(cats), cont_mean).
template <typename Scalar>
Mat<Scalar> posterior_mean_code(const LatentSpec& spec, const EncoderOutput<Scalar>& out) {
  Mat<Scalar> code(spec.total_dim(), out.batch());
  code.topRows(spec.u_dim) = out.u_hat;
  for (int b = 0; b < spec.num_blocks(); ++b)
    code.middleRows(spec.cat_offset(b), spec.cat_dims[b]) = softmax(out.cat_logits[b]);
  code.bottomRows(spec.cont_dim) = out.cont_mean;
  return code;
}

/// Accumulates into `grad` the gradient of posterior_mean_code given d(loss)/d(code).
template <typename Scalar>
void posterior_mean_code_backward(const LatentSpec& spec, const EncoderOutput<Scalar>& out,
                                  const Mat<Scalar>& grad_code, EncoderOutput<Scalar>& grad) {
  grad.u_hat += grad_code.topRows(spec.u_dim);
  for (int b = 0; b < spec.num_blocks(); ++b) {
    const Mat<Scalar> p = softmax(out.cat_logits[b]);
    const Mat<Scalar> gp = grad_code.middleRows(spec.cat_offset(b), spec.cat_dims[b]);
    const Eigen::Matrix<Scalar, 1, Eigen::Dynamic> dot = (p.array() * gp.array()).colwise().sum();
    grad.cat_logits[b] += (p.array() * (gp.rowwise() - dot).array()).matrix();
  }
  grad.cont_mean += grad_code.bottomRows(spec.cont_dim);
}

// ---------------------------------------------------------------------------
// Forward maps

template <typename Scalar>
Mat<Scalar> forward_G(Network<Scalar>& g, const Mat<Scalar>& codes, Mode mode, Rng& rng, Trace<Scalar>& trace) {
  return g.branches.at(0).forward(codes, mode, rng, trace, "generator");
}

template <typename Scalar>
Mat<Scalar> forward_G(Network<Scalar>& g, const Mat<Scalar>& codes, Mode mode, Rng& rng) {
  Trace<Scalar> trace;
  return forward_G(g, codes, mode, rng, trace);
}

/// Returns d(loss)/d(codes).
template <typename Scalar>
Mat<Scalar> backward_G(Network<Scalar>& g, const Trace<Scalar>& trace, const Mat<Scalar>& grad_images) {
  return g.branches.at(0).backward(trace, grad_images);
}

template <typename Scalar>
EncoderOutput<Scalar> forward_E(Network<Scalar>& e, const LatentSpec& spec, const Mat<Scalar>& images, Mode mode,
                                Rng& rng, Trace<Scalar>& trace) {
  return split_head(spec, e.branches.at(0).forward(images, mode, rng, trace, "encoder"));
}

template <typename Scalar>
EncoderOutput<Scalar> forward_E(Network<Scalar>& e, const LatentSpec& spec, const Mat<Scalar>& images, Mode mode,
                                Rng& rng) {
  Trace<Scalar> trace;
  return forward_E(e, spec, images, mode, rng, trace);
}

/// Returns d(loss)/d(images).
template <typename Scalar>
Mat<Scalar> backward_E(Network<Scalar>& e, const LatentSpec& spec, const Trace<Scalar>& trace,
                       const EncoderOutput<Scalar>& out, const EncoderOutput<Scalar>& grad) {
  return e.branches.at(0).backward(trace, split_head_backward(spec, out, grad));
}

template <typename Scalar>
struct DiscriminatorTrace {
  Trace<Scalar> image;
  Trace<Scalar> code;
  Trace<Scalar> joint;
  Eigen::Index image_features = 0;
};

/// Probability (1 x B) that each (image, code) pair came from the encoder path.
template <typename Scalar>
Mat<Scalar> forward_D(Network<Scalar>& d, const Mat<Scalar>& images, const Mat<Scalar>& codes, Mode mode, Rng& rng,
                      DiscriminatorTrace<Scalar>& trace) {
  if (images.cols() != codes.cols()) throw ArgumentError("forward_D: image and code batch sizes differ");
  const Mat<Scalar> fi = d.branches.at(0).forward(images, mode, rng, trace.image, "discriminator/image");
  const Mat<Scalar> fc = d.branches.at(1).forward(codes, mode, rng, trace.code, "discriminator/code");
  Mat<Scalar> joint(fi.rows() + fc.rows(), fi.cols());
  joint << fi, fc;
  trace.image_features = fi.rows();
  return d.branches.at(2).forward(joint, mode, rng, trace.joint, "discriminator/joint");
}

template <typename Scalar>
Mat<Scalar> forward_D(Network<Scalar>& d, const Mat<Scalar>& images, const Mat<Scalar>& codes, Mode mode, Rng& rng) {
  DiscriminatorTrace<Scalar> trace;
  return forward_D(d, images, codes, mode, rng, trace);
}

/// Returns (d/d images, d/d codes).
template <typename Scalar>
std::pair<Mat<Scalar>, Mat<Scalar>> backward_D(Network<Scalar>& d, const DiscriminatorTrace<Scalar>& trace,
                                               const Mat<Scalar>& grad) {
  const Mat<Scalar> gj = d.branches.at(2).backward(trace.joint, grad);
  Mat<Scalar> gi = d.branches.at(0).backward(trace.image, gj.topRows(trace.image_features));
  Mat<Scalar> gc = d.branches.at(1).backward(trace.code, gj.bottomRows(gj.rows() - trace.image_features));
  return {std::move(gi), std::move(gc)};
}

/// The three networks of the model plus the latent layout they share.
template <typename Scalar>
struct Model {
  LatentSpec spec;
  Network<Scalar> generator;
  Network<Scalar> encoder;
  Network<Scalar> discriminator;

  Model() = default;
  Model(const LatentSpec& s, const FamilyConfigs& family, Rng& rng)
      : spec(s),
        generator(family.generator, rng),
        encoder(family.encoder, rng),
        discriminator(family.discriminator, rng) {}

  Shape image_shape() const { return output_shape(generator.config); }
};

}  // namespace disrep
