#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "disrep/errors.hpp"
#include "disrep/types.hpp"

namespace disrep {

/// Trainable tensor with its accumulated gradient. Buffers (running
/// statistics) use the same type with an empty gradient.
template <typename Scalar>
struct Param {
  std::string name;
  Mat<Scalar> value;
  Mat<Scalar> grad;
};

/// Saved tensors of one layer invocation, consumed by backward.
template <typename Scalar>
using Saved = std::vector<Mat<Scalar>>;

template <typename Scalar>
class Layer {
 public:
  virtual ~Layer() = default;

  virtual Mat<Scalar> forward(const Mat<Scalar>& x, Mode mode, Rng& rng, Saved<Scalar>& saved) = 0;
  /// Accumulates parameter gradients and returns the gradient w.r.t. the input.
  virtual Mat<Scalar> backward(const Saved<Scalar>& saved, const Mat<Scalar>& grad) = 0;

  virtual void params(std::vector<Param<Scalar>*>&) {}
  virtual void buffers(std::vector<Param<Scalar>*>&) {}
  virtual std::unique_ptr<Layer> clone() const = 0;
  virtual std::string name() const = 0;
};

// ---------------------------------------------------------------------------
// Convolution geometry

/// Geometry of a strided convolution from `in` to `out` with TF-style "same"
/// padding. A transposed convolution reuses the geometry of its adjoint
/// convolution, i.e. `in` is the transposed convolution's output.
struct ConvGeometry {
  Shape in;
  Shape out;
  int kernel = 1;
  int stride = 1;
  int pad_top = 0;
  int pad_left = 0;

  static ConvGeometry same(Shape in, int out_channels, int kernel, int stride) {
    ConvGeometry g;
    g.in = in;
    g.kernel = kernel;
    g.stride = stride;
    g.out = {(in.height + stride - 1) / stride, (in.width + stride - 1) / stride, out_channels};
    const int pad_h = std::max((g.out.height - 1) * stride + kernel - in.height, 0);
    const int pad_w = std::max((g.out.width - 1) * stride + kernel - in.width, 0);
    g.pad_top = pad_h / 2;
    g.pad_left = pad_w / 2;
    return g;
  }
};

/// Unfolds receptive fields: x is (in.size() x B), result is
/// (k*k*in.channels x out.h*out.w*B) with column index (b*out.h + oy)*out.w + ox.
template <typename Scalar>
void im2col(const Mat<Scalar>& x, const ConvGeometry& g, Mat<Scalar>& cols) {
  const int batch = static_cast<int>(x.cols());
  const int c = g.in.channels;
  const int k = g.kernel;
  cols.setZero(k * k * c, static_cast<Eigen::Index>(g.out.height) * g.out.width * batch);
  for (int b = 0; b < batch; ++b) {
    const Scalar* src = x.col(b).data();
    for (int oy = 0; oy < g.out.height; ++oy) {
      for (int ox = 0; ox < g.out.width; ++ox) {
        Scalar* dst = cols.col((static_cast<Eigen::Index>(b) * g.out.height + oy) * g.out.width + ox).data();
        for (int ky = 0; ky < k; ++ky) {
          const int iy = oy * g.stride - g.pad_top + ky;
          if (iy < 0 || iy >= g.in.height) continue;
          for (int kx = 0; kx < k; ++kx) {
            const int ix = ox * g.stride - g.pad_left + kx;
            if (ix < 0 || ix >= g.in.width) continue;
            std::copy_n(src + (static_cast<Eigen::Index>(iy) * g.in.width + ix) * c, c, dst + (ky * k + kx) * c);
          }
        }
      }
    }
  }
}

/// Adjoint of im2col: scatters-and-adds columns back into (in.size() x B).
template <typename Scalar>
void col2im(const Mat<Scalar>& cols, const ConvGeometry& g, int batch, Mat<Scalar>& x) {
  const int c = g.in.channels;
  const int k = g.kernel;
  x.setZero(g.in.size(), batch);
  for (int b = 0; b < batch; ++b) {
    Scalar* dst = x.col(b).data();
    for (int oy = 0; oy < g.out.height; ++oy) {
      for (int ox = 0; ox < g.out.width; ++ox) {
        const Scalar* src = cols.col((static_cast<Eigen::Index>(b) * g.out.height + oy) * g.out.width + ox).data();
        for (int ky = 0; ky < k; ++ky) {
          const int iy = oy * g.stride - g.pad_top + ky;
          if (iy < 0 || iy >= g.in.height) continue;
          for (int kx = 0; kx < k; ++kx) {
            const int ix = ox * g.stride - g.pad_left + kx;
            if (ix < 0 || ix >= g.in.width) continue;
            Scalar* d = dst + (static_cast<Eigen::Index>(iy) * g.in.width + ix) * c;
            const Scalar* s = src + (ky * k + kx) * c;
            for (int ch = 0; ch < c; ++ch) d[ch] += s[ch];
          }
        }
      }
    }
  }
}

template <typename Scalar>
Mat<Scalar> gaussian_init(Eigen::Index rows, Eigen::Index cols, double stddev, Rng& rng) {
  std::normal_distribution<double> normal(0.0, stddev);
  Mat<Scalar> m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<Scalar>(normal(rng));
  return m;
}

inline constexpr double kInitStddev = 0.02;

// ---------------------------------------------------------------------------
// Layers

template <typename Scalar>
class Dense final : public Layer<Scalar> {
 public:
  Dense(int in, int out, Rng& rng)
      : weight_{"weight", gaussian_init<Scalar>(out, in, kInitStddev, rng), Mat<Scalar>::Zero(out, in)},
        bias_{"bias", Mat<Scalar>::Zero(out, 1), Mat<Scalar>::Zero(out, 1)} {}

  Mat<Scalar> forward(const Mat<Scalar>& x, Mode, Rng&, Saved<Scalar>& saved) override {
    saved = {x};
    Mat<Scalar> y = weight_.value * x;
    y.colwise() += bias_.value.col(0);
    return y;
  }

  Mat<Scalar> backward(const Saved<Scalar>& saved, const Mat<Scalar>& grad) override {
    weight_.grad.noalias() += grad * saved[0].transpose();
    bias_.grad += grad.rowwise().sum();
    return weight_.value.transpose() * grad;
  }

  void params(std::vector<Param<Scalar>*>& out) override {
    out.push_back(&weight_);
    out.push_back(&bias_);
  }
  std::unique_ptr<Layer<Scalar>> clone() const override { return std::make_unique<Dense>(*this); }
  std::string name() const override {
    return "dense " + std::to_string(weight_.value.cols()) + "->" + std::to_string(weight_.value.rows());
  }

 private:
  Param<Scalar> weight_;
  Param<Scalar> bias_;
};

template <typename Scalar>
class Conv2d final : public Layer<Scalar> {
 public:
  Conv2d(const ConvGeometry& g, Rng& rng) : geom_(g) {
    const int fan = g.kernel * g.kernel * g.in.channels;
    weight_ = {"weight", gaussian_init<Scalar>(g.out.channels, fan, kInitStddev, rng),
               Mat<Scalar>::Zero(g.out.channels, fan)};
    bias_ = {"bias", Mat<Scalar>::Zero(g.out.channels, 1), Mat<Scalar>::Zero(g.out.channels, 1)};
  }

  Mat<Scalar> forward(const Mat<Scalar>& x, Mode, Rng&, Saved<Scalar>& saved) override {
    const auto batch = x.cols();
    saved.resize(1);
    im2col(x, geom_, saved[0]);
    Mat<Scalar> y = weight_.value * saved[0];
    y.colwise() += bias_.value.col(0);
    return Eigen::Map<const Mat<Scalar>>(y.data(), geom_.out.size(), batch);
  }

  Mat<Scalar> backward(const Saved<Scalar>& saved, const Mat<Scalar>& grad) override {
    const auto batch = grad.cols();
    Eigen::Map<const Mat<Scalar>> g(grad.data(), geom_.out.channels, grad.size() / geom_.out.channels);
    weight_.grad.noalias() += g * saved[0].transpose();
    bias_.grad += g.rowwise().sum();
    Mat<Scalar> gcols = weight_.value.transpose() * g;
    Mat<Scalar> gx;
    col2im(gcols, geom_, static_cast<int>(batch), gx);
    return gx;
  }

  void params(std::vector<Param<Scalar>*>& out) override {
    out.push_back(&weight_);
    out.push_back(&bias_);
  }
  std::unique_ptr<Layer<Scalar>> clone() const override { return std::make_unique<Conv2d>(*this); }
  std::string name() const override {
    return "conv " + std::to_string(geom_.kernel) + "x" + std::to_string(geom_.kernel) + "/" +
           std::to_string(geom_.out.channels) + "/s" + std::to_string(geom_.stride);
  }

 private:
  ConvGeometry geom_;
  Param<Scalar> weight_;
  Param<Scalar> bias_;
};

/// Transposed convolution; `g` is the geometry of the adjoint convolution,
/// so g.out is this layer's input shape and g.in its output shape.
template <typename Scalar>
class ConvTranspose2d final : public Layer<Scalar> {
 public:
  ConvTranspose2d(const ConvGeometry& g, Rng& rng) : geom_(g) {
    const int fan = g.kernel * g.kernel * g.in.channels;
    weight_ = {"weight", gaussian_init<Scalar>(g.out.channels, fan, kInitStddev, rng),
               Mat<Scalar>::Zero(g.out.channels, fan)};
    bias_ = {"bias", Mat<Scalar>::Zero(g.in.channels, 1), Mat<Scalar>::Zero(g.in.channels, 1)};
  }

  Mat<Scalar> forward(const Mat<Scalar>& x, Mode, Rng&, Saved<Scalar>& saved) override {
    const auto batch = x.cols();
    Eigen::Map<const Mat<Scalar>> xm(x.data(), geom_.out.channels, x.size() / geom_.out.channels);
    Mat<Scalar> cols = weight_.value.transpose() * xm;
    Mat<Scalar> y;
    col2im(cols, geom_, static_cast<int>(batch), y);
    Eigen::Map<Mat<Scalar>> ym(y.data(), geom_.in.channels, y.size() / geom_.in.channels);
    ym.colwise() += bias_.value.col(0);
    saved = {x};
    return y;
  }

  Mat<Scalar> backward(const Saved<Scalar>& saved, const Mat<Scalar>& grad) override {
    const auto batch = grad.cols();
    const Mat<Scalar>& x = saved[0];
    Eigen::Map<const Mat<Scalar>> xm(x.data(), geom_.out.channels, x.size() / geom_.out.channels);
    Eigen::Map<const Mat<Scalar>> gm(grad.data(), geom_.in.channels, grad.size() / geom_.in.channels);
    bias_.grad += gm.rowwise().sum();
    Mat<Scalar> gcols;
    im2col(grad, geom_, gcols);
    weight_.grad.noalias() += xm * gcols.transpose();
    Mat<Scalar> gx = weight_.value * gcols;
    return Eigen::Map<const Mat<Scalar>>(gx.data(), geom_.out.size(), batch);
  }

  void params(std::vector<Param<Scalar>*>& out) override {
    out.push_back(&weight_);
    out.push_back(&bias_);
  }
  std::unique_ptr<Layer<Scalar>> clone() const override { return std::make_unique<ConvTranspose2d>(*this); }
  std::string name() const override {
    return "tconv " + std::to_string(geom_.kernel) + "x" + std::to_string(geom_.kernel) + "/" +
           std::to_string(geom_.in.channels) + "/s" + std::to_string(geom_.stride);
  }

 private:
  ConvGeometry geom_;
  Param<Scalar> weight_;
  Param<Scalar> bias_;
};

/// Per-channel batch normalization. Training uses batch statistics and
/// updates running averages; inference uses the running averages.
template <typename Scalar>
class BatchNorm final : public Layer<Scalar> {
 public:
  static constexpr double kMomentum = 0.99;
  static constexpr double kEps = 1e-5;

  explicit BatchNorm(int channels)
      : gamma_{"gamma", Mat<Scalar>::Ones(channels, 1), Mat<Scalar>::Zero(channels, 1)},
        beta_{"beta", Mat<Scalar>::Zero(channels, 1), Mat<Scalar>::Zero(channels, 1)},
        running_mean_{"running_mean", Mat<Scalar>::Zero(channels, 1), {}},
        running_var_{"running_var", Mat<Scalar>::Ones(channels, 1), {}} {}

  Mat<Scalar> forward(const Mat<Scalar>& x, Mode mode, Rng&, Saved<Scalar>& saved) override {
    const auto c = gamma_.value.rows();
    const auto n = x.size() / c;
    Eigen::Map<const Mat<Scalar>> xm(x.data(), c, n);
    Mat<Scalar> y(x.rows(), x.cols());
    Eigen::Map<Mat<Scalar>> ym(y.data(), c, n);

    if (mode == Mode::inference) {
      Vec<Scalar> invstd = (running_var_.value.col(0).array() + Scalar(kEps)).rsqrt();
      Mat<Scalar> xhat = ((xm.colwise() - running_mean_.value.col(0)).array().colwise() * invstd.array()).matrix();
      ym = (xhat.array().colwise() * gamma_.value.col(0).array()).matrix();
      ym.colwise() += beta_.value.col(0);
      saved = {std::move(xhat), invstd, Mat<Scalar>()};  // third slot marks inference
      return y;
    }

    Vec<Scalar> mean = xm.rowwise().mean();
    Mat<Scalar> centered = xm.colwise() - mean;
    Vec<Scalar> var = centered.array().square().rowwise().mean();
    Vec<Scalar> invstd = (var.array() + Scalar(kEps)).rsqrt();
    Mat<Scalar> xhat = (centered.array().colwise() * invstd.array()).matrix();
    ym = (xhat.array().colwise() * gamma_.value.col(0).array()).matrix();
    ym.colwise() += beta_.value.col(0);

    const Scalar unbias = n > 1 ? Scalar(double(n) / double(n - 1)) : Scalar(1);
    running_mean_.value = Scalar(kMomentum) * running_mean_.value + Scalar(1 - kMomentum) * mean;
    running_var_.value = Scalar(kMomentum) * running_var_.value + Scalar(1 - kMomentum) * unbias * var;
    saved = {std::move(xhat), invstd};
    return y;
  }

  Mat<Scalar> backward(const Saved<Scalar>& saved, const Mat<Scalar>& grad) override {
    const auto c = gamma_.value.rows();
    const auto n = grad.size() / c;
    Eigen::Map<const Mat<Scalar>> g(grad.data(), c, n);
    Mat<Scalar> gx(grad.rows(), grad.cols());
    Eigen::Map<Mat<Scalar>> gxm(gx.data(), c, n);

    const Mat<Scalar>& xhat = saved[0];
    const Vec<Scalar> invstd = saved[1].col(0);
    Vec<Scalar> dbeta = g.rowwise().sum();
    Vec<Scalar> dgamma = (g.array() * xhat.array()).rowwise().sum();
    beta_.grad.col(0) += dbeta;
    gamma_.grad.col(0) += dgamma;

    if (saved.size() == 3) {  // inference: fixed statistics
      gxm = (g.array().colwise() * (invstd.array() * gamma_.value.col(0).array())).matrix();
      return gx;
    }

    const Scalar inv_n = Scalar(1) / Scalar(n);
    Vec<Scalar> scale = gamma_.value.col(0).cwiseProduct(invstd);
    Mat<Scalar> tmp = g * Scalar(n);
    tmp.colwise() -= dbeta;
    tmp.array() -= xhat.array().colwise() * dgamma.array();
    gxm = (tmp.array().colwise() * (scale.array() * inv_n)).matrix();
    return gx;
  }

  void params(std::vector<Param<Scalar>*>& out) override {
    out.push_back(&gamma_);
    out.push_back(&beta_);
  }
  void buffers(std::vector<Param<Scalar>*>& out) override {
    out.push_back(&running_mean_);
    out.push_back(&running_var_);
  }
  std::unique_ptr<Layer<Scalar>> clone() const override { return std::make_unique<BatchNorm>(*this); }
  std::string name() const override { return "batchnorm " + std::to_string(gamma_.value.rows()); }

 private:
  Param<Scalar> gamma_;
  Param<Scalar> beta_;
  Param<Scalar> running_mean_;
  Param<Scalar> running_var_;
};

template <typename Scalar>
class Elu final : public Layer<Scalar> {
 public:
  Mat<Scalar> forward(const Mat<Scalar>& x, Mode, Rng&, Saved<Scalar>& saved) override {
    Mat<Scalar> y = x.unaryExpr([](Scalar v) { return v > Scalar(0) ? v : std::expm1(v); });
    saved = {y};
    return y;
  }
  Mat<Scalar> backward(const Saved<Scalar>& saved, const Mat<Scalar>& grad) override {
    return grad.binaryExpr(saved[0], [](Scalar g, Scalar y) { return y > Scalar(0) ? g : g * (y + Scalar(1)); });
  }
  std::unique_ptr<Layer<Scalar>> clone() const override { return std::make_unique<Elu>(*this); }
  std::string name() const override { return "elu"; }
};

template <typename Scalar>
Scalar sigmoid(Scalar v) {
  return v >= Scalar(0) ? Scalar(1) / (Scalar(1) + std::exp(-v)) : std::exp(v) / (Scalar(1) + std::exp(v));
}

template <typename Scalar>
class Sigmoid final : public Layer<Scalar> {
 public:
  Mat<Scalar> forward(const Mat<Scalar>& x, Mode, Rng&, Saved<Scalar>& saved) override {
    Mat<Scalar> y = x.unaryExpr([](Scalar v) { return sigmoid(v); });
    saved = {y};
    return y;
  }
  Mat<Scalar> backward(const Saved<Scalar>& saved, const Mat<Scalar>& grad) override {
    return (grad.array() * saved[0].array() * (Scalar(1) - saved[0].array())).matrix();
  }
  std::unique_ptr<Layer<Scalar>> clone() const override { return std::make_unique<Sigmoid>(*this); }
  std::string name() const override { return "sigmoid"; }
};

/// Inverted dropout: kept units are scaled by 1/(1-p) during training.
template <typename Scalar>
class Dropout final : public Layer<Scalar> {
 public:
  explicit Dropout(double p) : p_(p) {}

  Mat<Scalar> forward(const Mat<Scalar>& x, Mode mode, Rng& rng, Saved<Scalar>& saved) override {
    if (mode == Mode::inference || p_ == 0.0) {
      saved.clear();
      return x;
    }
    std::bernoulli_distribution keep(1.0 - p_);
    const Scalar scale = Scalar(1.0 / (1.0 - p_));
    Mat<Scalar> mask(x.rows(), x.cols());
    for (Eigen::Index i = 0; i < mask.size(); ++i) mask.data()[i] = keep(rng) ? scale : Scalar(0);
    saved = {mask};
    return x.cwiseProduct(mask);
  }
  Mat<Scalar> backward(const Saved<Scalar>& saved, const Mat<Scalar>& grad) override {
    return saved.empty() ? grad : Mat<Scalar>(grad.cwiseProduct(saved[0]));
  }
  std::unique_ptr<Layer<Scalar>> clone() const override { return std::make_unique<Dropout>(*this); }
  std::string name() const override { return "dropout " + std::to_string(p_).substr(0, 4); }

 private:
  double p_;
};

// ---------------------------------------------------------------------------

template <typename Scalar>
struct Trace {
  std::vector<Saved<Scalar>> saved;
};

/// Ordered layer stack. Forward passes record into a caller-owned Trace so
/// the same network can be evaluated several times before backpropagating.
template <typename Scalar>
class Sequential {
 public:
  Sequential() = default;
  Sequential(const Sequential& o) {
    for (const auto& l : o.layers_) layers_.push_back(l->clone());
  }
  Sequential& operator=(const Sequential& o) {
    if (this != &o) {
      layers_.clear();
      for (const auto& l : o.layers_) layers_.push_back(l->clone());
    }
    return *this;
  }
  Sequential(Sequential&&) noexcept = default;
  Sequential& operator=(Sequential&&) noexcept = default;

  void add(std::unique_ptr<Layer<Scalar>> layer) { layers_.push_back(std::move(layer)); }
  size_t size() const { return layers_.size(); }
  const Layer<Scalar>& layer(size_t i) const { return *layers_[i]; }
  Layer<Scalar>& layer(size_t i) { return *layers_[i]; }

  Mat<Scalar> forward(const Mat<Scalar>& x, Mode mode, Rng& rng, Trace<Scalar>& trace,
                      const std::string& net_name = "net") {
    trace.saved.assign(layers_.size(), {});
    Mat<Scalar> h = x;
    for (size_t i = 0; i < layers_.size(); ++i) {
      h = layers_[i]->forward(h, mode, rng, trace.saved[i]);
      if (!h.allFinite())
        throw NumericFault(net_name + ": non-finite activation after layer " + std::to_string(i) + " (" +
                           layers_[i]->name() + ")");
    }
    return h;
  }

  Mat<Scalar> forward(const Mat<Scalar>& x, Mode mode, Rng& rng) {
    Trace<Scalar> trace;
    return forward(x, mode, rng, trace);
  }

  Mat<Scalar> backward(const Trace<Scalar>& trace, Mat<Scalar> grad) {
    for (size_t i = layers_.size(); i-- > 0;) grad = layers_[i]->backward(trace.saved[i], grad);
    return grad;
  }

  std::vector<Param<Scalar>*> params() {
    std::vector<Param<Scalar>*> out;
    for (auto& l : layers_) l->params(out);
    return out;
  }
  std::vector<Param<Scalar>*> buffers() {
    std::vector<Param<Scalar>*> out;
    for (auto& l : layers_) l->buffers(out);
    return out;
  }
  void zero_grad() {
    for (auto* p : params()) p->grad.setZero();
  }

 private:
  std::vector<std::unique_ptr<Layer<Scalar>>> layers_;
};

}  // namespace disrep
