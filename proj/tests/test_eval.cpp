#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>

#include "disrep/eval.hpp"

using namespace disrep;

namespace {

/// Untrained model on 8x8 images with one 4-way block.
Model<Real> tiny_model(uint64_t seed = 1) {
  const LatentSpec spec{4, {4}, 2};
  Rng rng(seed);
  return Model<Real>(spec, build_mnist_family(spec, {8, 8, 1}, 16), rng);
}

Mat<Real> random_images(Eigen::Index n, uint64_t seed) {
  Rng rng(seed);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  Mat<Real> x(64, n);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = u(rng);
  return x;
}

}  // namespace

TEST_CASE("generator error bounds") {
  const LatentSpec spec{2, {10}, 0};
  // Image k lights pixel k; the classifier reads the brightest of the first ten.
  const GenerateFn lookup = [&](const Mat<Real>& codes) {
    Mat<Real> x = Mat<Real>::Zero(16, codes.cols());
    for (Eigen::Index i = 0; i < codes.cols(); ++i) {
      Eigen::Index k = 0;
      codes.col(i).segment(spec.cat_offset(0), 10).maxCoeff(&k);
      x(k, i) = 1;
    }
    return x;
  };
  const ClassifyFn read = [](const Mat<Real>& x) {
    std::vector<int> out;
    for (Eigen::Index i = 0; i < x.cols(); ++i) {
      Eigen::Index k = 0;
      x.col(i).head(10).maxCoeff(&k);
      out.push_back(int(k));
    }
    return out;
  };
  Rng rng(3);
  const auto perfect = generator_error(lookup, spec, read, 10, 50, rng);
  CHECK(perfect.generator_error == 0.0);
  CHECK(perfect.class_error.size() == 10);

  Rng guess(4);
  const ClassifyFn coin = [&](const Mat<Real>& x) {
    std::vector<int> out;
    for (Eigen::Index i = 0; i < x.cols(); ++i) out.push_back(int(guess() % 10));
    return out;
  };
  const auto random = generator_error(lookup, spec, coin, 10, 1000, rng);
  CHECK(random.generator_error == doctest::Approx(90.0).epsilon(0.02));

  CHECK_THROWS_AS(generator_error(lookup, spec, read, 9, 10, rng), ArgumentError);
}

TEST_CASE("encoder accuracy") {
  Mat<Real> uniform = Mat<Real>::Constant(10, 1000, 0.1f);
  std::vector<int> labels;
  for (int i = 0; i < 1000; ++i) labels.push_back(i % 10);
  CHECK(accuracy_from_posteriors(uniform, labels) == doctest::Approx(0.1));

  Mat<Real> one(3, 1);
  one << 0.1f, 0.7f, 0.2f;
  CHECK(accuracy_from_posteriors(one, {1}) == 1.0);
  CHECK(accuracy_from_posteriors(one, {2}) == 0.0);

  EvalReport r;
  r.encoder_accuracy = 96.25;
  const std::string text = r.to_text();
  CHECK(text.find("encoder_accuracy_pct: 96.25\n") != std::string::npos);
  CHECK(text.find("encoder_error_pct: 3.75\n") != std::string::npos);
}

TEST_CASE("aggregated runs") {
  EvalReport a, b;
  a.class_error = {0.0, 2.0};
  b.class_error = {1.0, 1.0};
  a.generator_error = 1.0;
  b.generator_error = 1.0 + 0.5;
  const auto m = aggregate({a, b});
  CHECK(m.runs == 2);
  CHECK(m.generator_error == doctest::Approx(1.25));
  CHECK(m.generator_error_std == doctest::Approx(0.25));
  CHECK(m.class_error[1] == doctest::Approx(1.5));
}

TEST_CASE("grid layouts") {
  Model<Real> m = tiny_model();
  Rng rng(5);
  GridParams p;
  p.columns = 6;
  const Grid sweep = grid_generate(m.generator, m.spec, nullptr, GridMode::class_sweep, p, rng);
  CHECK(sweep.rows == 4);
  CHECK(sweep.cols == 6);
  CHECK(sweep.tiles.cols() == 24);

  p.steps = 5;
  p.cont_index = 1;
  const Grid cont = grid_generate(m.generator, m.spec, nullptr, GridMode::continuous_sweep, p, rng);
  CHECK(cont.rows == 4);
  CHECK(cont.cols == 5);

  const Mat<Real> inputs = random_images(3, 6);
  p.inputs = inputs;
  CHECK_THROWS_AS(grid_generate(m.generator, m.spec, nullptr, GridMode::translate, p, rng), ArgumentError);
  const Grid tr = grid_generate(m.generator, m.spec, &m.encoder, GridMode::translate, p, rng);
  CHECK(tr.rows == 3);
  CHECK(tr.cols == 5);
  for (int r = 0; r < 3; ++r) CHECK(tr.cell(r, 0) == inputs.col(r));

  p.inputs = random_images(4, 7);
  const Grid in = grid_generate(m.generator, m.spec, &m.encoder, GridMode::interpolate, p, rng);
  CHECK(in.rows == 2);
  CHECK(in.cols == 5);
  for (int r = 0; r < 2; ++r) {
    CHECK(in.cell(r, 0) == p.inputs.col(2 * r));
    CHECK(in.cell(r, 4) == p.inputs.col(2 * r + 1));
  }
  CHECK_FALSE(in.cell(0, 2) == p.inputs.col(0));

  CHECK(parse_grid_mode("class-sweep") == GridMode::class_sweep);
  CHECK(to_string(GridMode::interpolate) == "interpolate");
  CHECK_THROWS_AS(parse_grid_mode("mosaic"), ArgumentError);
}

TEST_CASE("translating to the encoded class reproduces the reconstruction") {
  Model<Real> m = tiny_model(2);
  const Mat<Real> inputs = random_images(6, 8);
  const Mat<Real> code = encode_code(m.encoder, m.spec, inputs);
  const Mat<Real> rec = reconstruct(m, inputs);
  Rng rng(0);
  for (Eigen::Index i = 0; i < inputs.cols(); ++i) {
    Eigen::Index k = 0;
    code.col(i).segment(m.spec.cat_offset(0), 4).maxCoeff(&k);
    GridParams p;
    p.inputs = inputs.col(i);
    p.classes = {int(k)};
    const Grid g = grid_generate(m.generator, m.spec, &m.encoder, GridMode::translate, p, rng);
    CHECK((g.cell(0, 1) - rec.col(i)).squaredNorm() == 0.0f);
  }
}

TEST_CASE("rendering and files") {
  Model<Real> m = tiny_model();
  GridParams p;
  p.columns = 3;
  Rng a(9), b(9);
  const Grid g1 = grid_generate(m.generator, m.spec, nullptr, GridMode::class_sweep, p, a);
  const Grid g2 = grid_generate(m.generator, m.spec, nullptr, GridMode::class_sweep, p, b);
  CHECK(g1.tiles == g2.tiles);

  const Image8 img = render(g1);
  CHECK(img.width == 3 * 8 + 2 * kSeparator);
  CHECK(img.height == 4 * 8 + 3 * kSeparator);
  CHECK(img.pixels.size() == size_t(img.width * img.height));
  CHECK(img.pixels[size_t(8)] == 255);  // first separator column

  const auto dir = std::filesystem::temp_directory_path() / "disrep_test_eval";
  std::filesystem::create_directories(dir);
  const auto path = dir / grid_filename(GridMode::class_sweep, 3000, 7);
  CHECK(path.filename() == "class-sweep_3000_7.png");
  write_png(img, path);
  const auto bytes = read_file(path);
  REQUIRE(bytes.size() > 8);
  CHECK(bytes[1] == 'P');
  CHECK(bytes[2] == 'N');
  CHECK(bytes[3] == 'G');
  write_png(render(g2), dir / "again.png");
  CHECK(read_file(dir / "again.png") == bytes);
  std::filesystem::remove_all(dir);
}

TEST_CASE("reconstruction and round trip metrics") {
  Model<Real> m = tiny_model(3);
  Dataset d;
  d.shape = {8, 8, 1};
  d.images = random_images(20, 10);
  const double e = reconstruction_error(m, d);
  CHECK(e > 0.0);
  CHECK(reconstruction_error(m, d, 20) == e);
  Rng r1(1), r2(1);
  const double agree = round_trip_agreement(m, 200, r1);
  CHECK(agree >= 0.0);
  CHECK(agree <= 1.0);
  CHECK(round_trip_agreement(m, 200, r2) == agree);
}

TEST_CASE("oracle classifier") {
  Rng rng(12);
  Dataset train = make_shapes(600, 16, rng);
  Dataset test = make_shapes(200, 16, rng);
  OracleOptions o;
  o.width_divisor = 4;
  o.iters = 500;
  o.seed = 3;
  o.accuracy_floor = 1.01;
  OracleClassifier a = train_oracle(train, test, o);
  OracleClassifier b = train_oracle(train, test, o);
  CHECK(a.test_accuracy == b.test_accuracy);
  CHECK(a.test_accuracy > 0.6);
  CHECK_FALSE(a.warning.empty());

  const auto dir = std::filesystem::temp_directory_path() / "disrep_test_oracle";
  std::filesystem::create_directories(dir);
  save_oracle(a, dir / "o.ckpt");
  OracleClassifier c = load_oracle(dir / "o.ckpt");
  CHECK(c.test_accuracy == a.test_accuracy);
  CHECK(c.warning == a.warning);
  CHECK(c.predict(test.images) == a.predict(test.images));
  std::filesystem::remove_all(dir);
}
