#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "gradcheck.hpp"

using namespace disrep;
using namespace disrep::testing;

namespace {

/// Checks d(sum(R * layer(x)))/d(x, params) for one layer in train mode.
GradCheck check_layer(Layer<double>& layer, Eigen::Index in_rows, int batch, uint64_t seed = 1) {
  Rng rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  Param<double> x{"x", Mat<double>(in_rows, batch), Mat<double>::Zero(in_rows, batch)};
  for (Eigen::Index i = 0; i < x.value.size(); ++i) x.value.data()[i] = n(rng);
  std::vector<Param<double>*> ps;
  layer.params(ps);
  for (auto* p : ps)
    for (Eigen::Index i = 0; i < p->value.size(); ++i) p->value.data()[i] += 0.3 * n(rng);

  const Rng fwd_rng = rng;
  Saved<double> saved;
  Rng r0 = fwd_rng;
  const Mat<double> y = layer.forward(x.value, Mode::train, r0, saved);
  Mat<double> upstream(y.rows(), y.cols());
  for (Eigen::Index i = 0; i < upstream.size(); ++i) upstream.data()[i] = n(rng);
  for (auto* p : ps) p->grad.setZero();
  x.grad = layer.backward(saved, upstream);

  auto loss = [&]() {
    Saved<double> s;
    Rng r = fwd_rng;
    return layer.forward(x.value, Mode::train, r, s).cwiseProduct(upstream).sum();
  };
  std::vector<std::pair<std::string, Param<double>*>> all{{"x", &x}};
  for (auto* p : ps) all.emplace_back(p->name, p);
  return check_gradients(loss, all, 1e-3, 64);
}

}  // namespace

TEST_CASE("dense gradients") {
  Rng rng(1);
  Dense<double> d(5, 3, rng);
  const auto r = check_layer(d, 5, 4);
  CHECK_MESSAGE(r.max_rel < 1e-6, r.worst);
}

TEST_CASE("four-parameter toy network") {
  Rng rng(2);
  Dense<double> d(3, 1, rng);
  std::vector<Param<double>*> ps;
  d.params(ps);
  Eigen::Index count = 0;
  for (auto* p : ps) count += p->value.size();
  CHECK(count == 4);
  const auto r = check_layer(d, 3, 2);
  CHECK_MESSAGE(r.max_rel < 1e-4, r.worst);
}

TEST_CASE("convolution gradients") {
  Rng rng(3);
  for (int stride : {1, 2})
    for (int kernel : {1, 3, 4}) {
      const auto g = ConvGeometry::same({6, 5, 2}, 3, kernel, stride);
      Conv2d<double> c(g, rng);
      const auto r = check_layer(c, g.in.size(), 2);
      CHECK_MESSAGE(r.max_rel < 1e-6, "k" << kernel << " s" << stride << ": " << r.worst);
    }
}

TEST_CASE("transposed convolution gradients") {
  Rng rng(4);
  for (int stride : {1, 2})
    for (int kernel : {3, 4}) {
      const auto g = ConvGeometry::same({6, 6, 2}, 3, kernel, stride);
      ConvTranspose2d<double> t(g, rng);
      const auto r = check_layer(t, g.out.size(), 2);
      CHECK_MESSAGE(r.max_rel < 1e-6, "k" << kernel << " s" << stride << ": " << r.worst);
    }
}

TEST_CASE("transposed convolution is the adjoint of convolution") {
  Rng rng(5);
  const auto g = ConvGeometry::same({6, 6, 2}, 3, 4, 2);
  Conv2d<double> c(g, rng);
  ConvTranspose2d<double> t(g, rng);
  std::vector<Param<double>*> cp, tp;
  c.params(cp);
  t.params(tp);
  // Same weights in both layouts, zero biases.
  tp[0]->value = cp[0]->value;
  cp[1]->value.setZero();
  tp[1]->value.setZero();
  std::normal_distribution<double> n;
  Mat<double> x(g.in.size(), 1), y(g.out.size(), 1);
  for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = n(rng);
  for (Eigen::Index i = 0; i < y.size(); ++i) y(i) = n(rng);
  Saved<double> s;
  const double lhs = c.forward(x, Mode::inference, rng, s).cwiseProduct(y).sum();
  const double rhs = t.forward(y, Mode::inference, rng, s).cwiseProduct(x).sum();
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
}

TEST_CASE("batch norm") {
  BatchNorm<double> bn(3);
  const auto r = check_layer(bn, 4 * 3, 3);
  CHECK_MESSAGE(r.max_rel < 1e-5, r.worst);

  SUBCASE("inference uses running statistics") {
    BatchNorm<double> b(1);
    Mat<double> x(1, 4);
    x << 1, 2, 3, 4;
    Rng rng(0);
    Saved<double> s;
    const Mat<double> train = b.forward(x, Mode::train, rng, s);
    CHECK(train.mean() == doctest::Approx(0.0).epsilon(1e-12));
    std::vector<Param<double>*> buf;
    b.buffers(buf);
    REQUIRE(buf.size() == 2);
    CHECK(buf[0]->value(0) == doctest::Approx(0.01 * 2.5));
    CHECK(buf[1]->value(0) == doctest::Approx(0.99 + 0.01 * (5.0 / 3.0)));
    const Mat<double> inf = b.forward(x, Mode::inference, rng, s);
    CHECK(inf(0) == doctest::Approx((1 - 0.025) / std::sqrt(buf[1]->value(0) + 1e-5)));
  }
}

TEST_CASE("activations and dropout") {
  Elu<double> elu;
  auto r = check_layer(elu, 7, 3);
  CHECK_MESSAGE(r.max_rel < 1e-6, r.worst);
  Sigmoid<double> sig;
  r = check_layer(sig, 7, 3);
  CHECK_MESSAGE(r.max_rel < 1e-6, r.worst);
  Dropout<double> drop(0.3);
  r = check_layer(drop, 50, 4);
  CHECK_MESSAGE(r.max_rel < 1e-6, r.worst);

  Rng rng(9);
  Saved<double> s;
  const Mat<double> ones = Mat<double>::Ones(1000, 10);
  CHECK(drop.forward(ones, Mode::inference, rng, s) == ones);
  const Mat<double> y = drop.forward(ones, Mode::train, rng, s);
  const double kept = (y.array() > 0).cast<double>().mean();
  CHECK(kept == doctest::Approx(0.7).epsilon(0.03));
  CHECK(y.maxCoeff() == doctest::Approx(1.0 / 0.7));
}

TEST_CASE("sequential flags non-finite activations") {
  Rng rng(1);
  Sequential<double> seq;
  seq.add(std::make_unique<Dense<double>>(2, 2, rng));
  Mat<double> x(2, 1);
  x << std::numeric_limits<double>::infinity(), 1;
  Trace<double> t;
  CHECK_THROWS_AS(seq.forward(x, Mode::train, rng, t, "probe"), NumericFault);
}

TEST_CASE("sequential copies are deep") {
  Rng rng(1);
  Sequential<double> a;
  a.add(std::make_unique<Dense<double>>(2, 2, rng));
  Sequential<double> b = a;
  b.params()[0]->value.setZero();
  CHECK_FALSE(a.params()[0]->value.isZero());
}

TEST_CASE("network gradients for every loss") {
  for (auto kind : {LossKind::supervised, LossKind::reconstruction, LossKind::info, LossKind::adversarial_ge,
                    LossKind::adversarial_d}) {
    const auto r = check_model_loss(kind);
    INFO(std::string(loss_name(kind)) << ": " << r.worst << " over " << r.checked);
    CHECK(r.checked > 50);
    CHECK(r.max_rel < 1e-4);
  }
}
