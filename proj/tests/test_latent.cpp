#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "disrep/latent.hpp"

using namespace disrep;

TEST_CASE("presets and dimensions") {
  CHECK(LatentSpec::mnist() == LatentSpec{16, {10}, 2});
  CHECK(LatentSpec::svhn() == LatentSpec{128, {10, 5, 5, 5}, 4});
  CHECK(LatentSpec::celeba() == LatentSpec{128, {5, 2, 2, 2}, 4});
  CHECK(LatentSpec::mnist().total_dim() == 28);
  CHECK(LatentSpec::svhn().cat_offset(2) == 143);
  CHECK(LatentSpec::svhn().cont_offset() == 153);
  CHECK_THROWS_AS(LatentSpec({2, {1}, 0}).validate(), ArgumentError);
  CHECK_THROWS_AS(LatentSpec({-1, {3}, 0}).validate(), ArgumentError);
}

TEST_CASE("sample_code") {
  Rng rng(1);
  const auto spec = LatentSpec::mnist();
  const auto code = sample_code<double>(spec, rng);
  CHECK(flatten(code).size() == 28);
  CHECK(matches(code, spec));
  CHECK(is_simplex_valid(code));
  CHECK(code.cats[0].sum() == 1.0);
  CHECK(code.u.cwiseAbs().maxCoeff() <= 1.0);
  CHECK(code.cont.cwiseAbs().maxCoeff() <= 1.0);
}

TEST_CASE("categorical sampling is uniform") {
  Rng rng(2024);
  const LatentSpec spec{0, {2}, 0};
  int zeros = 0;
  for (int i = 0; i < 10000; ++i) zeros += sample_code<double>(spec, rng).cats[0][0] == 1.0;
  CHECK(std::abs(zeros / 10000.0 - 0.5) <= 0.02);
}

TEST_CASE("set_category") {
  Rng rng(3);
  const auto code = sample_code<double>(LatentSpec::mnist(), rng);
  const auto seven = set_category(code, 0, 7);
  CHECK(seven.cats[0] == Vec<double>::Unit(10, 7));
  CHECK(seven.u == code.u);
  CHECK(set_category(seven, 0, 7) == seven);
  CHECK(set_category(set_category(code, 0, 3), 0, 5) == set_category(code, 0, 5));
  CHECK_THROWS_AS(set_category(code, 1, 0), ArgumentError);
  CHECK_THROWS_AS(set_category(code, 0, 10), ArgumentError);
}

TEST_CASE("interpolate") {
  const LatentSpec spec{2, {10}, 0};
  LatentCode<double> a{Vec<double>(2), {Vec<double>::Unit(10, 4)}, Vec<double>(0)};
  LatentCode<double> b{Vec<double>::Zero(2), {Vec<double>::Unit(10, 9)}, Vec<double>(0)};
  a.u << 1, -1;
  CHECK(interpolate(a, b, 0.0) == a);
  CHECK(interpolate(a, b, 1.0) == b);
  const auto mid = interpolate(a, b, 0.5);
  CHECK(mid.cats[0][4] == 0.5);
  CHECK(mid.cats[0][9] == 0.5);
  const auto q = interpolate(a, b, 0.25);
  CHECK(q.u[0] == doctest::Approx(0.75).epsilon(1e-15));
  CHECK(q.u[1] == doctest::Approx(-0.75).epsilon(1e-15));
  CHECK(matches(q, spec));
}

TEST_CASE("flatten and unflatten") {
  Rng rng(4);
  const auto spec = LatentSpec::svhn();
  const auto code = sample_code<double>(spec, rng);
  CHECK(unflatten<double>(spec, flatten(code)) == code);
  const auto zero = unflatten<double>(LatentSpec::mnist(), Vec<double>::Zero(28));
  CHECK(zero.u.isZero());
  CHECK(zero.cats[0].isZero());
  CHECK_FALSE(is_simplex_valid(zero));
  CHECK_THROWS_AS(unflatten<double>(spec, Vec<double>::Zero(5)), ArgumentError);
}

TEST_CASE("batched helpers") {
  Rng rng(5);
  const auto spec = LatentSpec::mnist();
  Mat<float> codes = sample_code_batch<float>(spec, 6, rng);
  CHECK(codes.rows() == 28);
  CHECK(codes.cols() == 6);
  set_category_batch(spec, codes, 0, 2);
  for (int i = 0; i < 6; ++i) CHECK(unflatten<float>(spec, codes.col(i)).cats[0] == Vec<float>::Unit(10, 2));
}
