#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "disrep/schedule.hpp"

using namespace disrep;

TEST_CASE("preset tables") {
  CHECK(preset_ramp_iters(DatasetPreset::mnist) == 1000);
  CHECK(preset_ramp_iters(DatasetPreset::svhn) == 10000);
  CHECK(preset_ramp_iters(DatasetPreset::celeba) == 10000);
  CHECK(preset_train_iters(DatasetPreset::mnist) == 50000);
  CHECK(preset_train_iters(DatasetPreset::svhn) == 150000);
  CHECK(preset_train_iters(DatasetPreset::celeba) == 300000);
  CHECK(parse_preset("shapes") == DatasetPreset::shapes);
  CHECK_THROWS_AS(parse_preset("cifar"), ConfigError);
}

TEST_CASE("lambda ramp") {
  const auto m = DatasetPreset::mnist;
  CHECK(lambda_at(0, RampedWeight::lambda3, m) == 0.0);
  CHECK(lambda_at(500, RampedWeight::lambda4, m) == 0.5);
  CHECK(lambda_at(1000, RampedWeight::lambda3, m) == 1.0);
  CHECK(lambda_at(250000, RampedWeight::lambda3, m) == 1.0);
  CHECK(lambda_at(1000, RampedWeight::lambda4, DatasetPreset::svhn) == 0.1);
}

TEST_CASE("labeled probability") {
  const double ratio = 100.0 / 50000.0;
  CHECK(labeled_prob_at(0, ratio, DatasetPreset::mnist) == 1.0);
  CHECK(labeled_prob_at(1000, ratio, DatasetPreset::mnist) == 0.002);
  CHECK(labeled_prob_at(40000, ratio, DatasetPreset::mnist) == 0.002);
  CHECK(labeled_prob_at(500, 0.002, DatasetPreset::mnist) == doctest::Approx(0.501).epsilon(1e-15));
}

TEST_CASE("adam") {
  Mat<double> p = Mat<double>::Zero(1, 1);
  AdamMoments<double> mom;
  adam_step<double>(p, Mat<double>::Ones(1, 1), mom, 1e-3, 0.5, 0.999, 1e-8, 1);
  CHECK(p(0) == doctest::Approx(-0.0009999999900000003).epsilon(1e-12));

  Mat<double> q = Mat<double>::Constant(2, 2, 0.7);
  AdamMoments<double> zero;
  adam_step<double>(q, Mat<double>::Zero(2, 2), zero, 1e-3, 0.5, 0.999, 1e-8, 1);
  CHECK(q == Mat<double>::Constant(2, 2, 0.7));

  Mat<double> r = Mat<double>::Zero(1, 3);
  Mat<double> g(1, 3);
  g << 2.0, -0.5, 1e-3;
  AdamMoments<double> mr;
  for (int t = 1; t <= 3; ++t) {
    const Mat<double> before = r;
    adam_step(r, g, mr, 1e-2, 0.5, 0.999, 1e-8, t);
    for (int i = 0; i < 3; ++i) CHECK((r(i) - before(i)) * mr.m(i) < 0);
  }

  Mat<double> bad = Mat<double>::Constant(1, 1, std::nan(""));
  Mat<double> s = Mat<double>::Ones(1, 1);
  AdamMoments<double> mb;
  CHECK_THROWS_AS(adam_step(s, bad, mb, 1e-3, 0.5, 0.999, 1e-8, 1), NumericFault);
  CHECK(s(0) == 1.0);
}

TEST_CASE("optimizer spec") {
  OptimizerSpec o;
  CHECK(o.lr_d == 1e-4);
  CHECK(o.lr_ge == 3e-4);
  CHECK(o.beta1 == 0.5);
  CHECK(o.beta2 == 0.999);
  CHECK(o.batch_size == 64);
  o.batch_size = 0;
  CHECK_THROWS(o.validate());
}
