#include "disrep/eval.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "disrep/config.hpp"
#include "disrep/losses.hpp"

namespace disrep {

namespace {

constexpr Eigen::Index kChunk = 256;

template <typename F>
Mat<Real> chunked(const Mat<Real>& in, Eigen::Index out_rows, F&& f) {
  Mat<Real> out(out_rows, in.cols());
  for (Eigen::Index b = 0; b < in.cols(); b += kChunk) {
    const Eigen::Index n = std::min(kChunk, in.cols() - b);
    out.middleCols(b, n) = f(Mat<Real>(in.middleCols(b, n)));
  }
  return out;
}

Mat<Real> generate(Network<Real>& g, const Mat<Real>& codes) {
  Rng rng(0);
  return chunked(codes, output_shape(g.config).size(), [&](const Mat<Real>& c) {
    return forward_G(g, c, Mode::inference, rng);
  });
}

int argmax_col(const Mat<Real>& m, Eigen::Index col, Eigen::Index row0, Eigen::Index rows) {
  Eigen::Index best = 0;
  m.col(col).segment(row0, rows).maxCoeff(&best);
  return static_cast<int>(best);
}

std::string shape_text(const Shape& s) {
  return std::to_string(s.height) + "x" + std::to_string(s.width) + "x" + std::to_string(s.channels);
}

Shape parse_shape(const std::string& text) {
  Shape s;
  char x1 = 0;
  char x2 = 0;
  std::istringstream in(text);
  if (!(in >> s.height >> x1 >> s.width >> x2 >> s.channels) || x1 != 'x' || x2 != 'x')
    throw LoadError("oracle: bad image shape '" + text + "'");
  return s;
}

}  // namespace

// ---------------------------------------------------------------------------

NetworkConfig oracle_config(const std::string& family, Shape image, int width_divisor, int num_classes) {
  const LatentSpec probe{1, {num_classes}, 1};
  const FamilyConfigs f = family == "svhn" ? build_svhn_celeba_family(probe, image, width_divisor)
                                           : build_mnist_family(probe, image, width_divisor);
  return build_classifier(f.encoder, num_classes);
}

std::vector<int> OracleClassifier::predict(const Mat<Real>& images) {
  Rng rng(0);
  const Mat<Real> logits = chunked(images, num_classes, [&](const Mat<Real>& x) {
    return net.branches.at(0).forward(x, Mode::inference, rng);
  });
  std::vector<int> out(static_cast<size_t>(images.cols()));
  for (Eigen::Index i = 0; i < images.cols(); ++i) out[size_t(i)] = argmax_col(logits, i, 0, num_classes);
  return out;
}

OracleClassifier train_oracle(const Dataset& train, const Dataset& test, const OracleOptions& options) {
  if (train.num_attributes() == 0 || train.cardinalities.empty()) throw ArgumentError("train_oracle: unlabeled dataset");
  if (!(train.shape == test.shape)) throw ArgumentError("train_oracle: train and test shapes differ");
  std::vector<Eigen::Index> labeled;
  for (Eigen::Index i = 0; i < train.size(); ++i)
    if (train.labels(0, i) >= 0) labeled.push_back(i);
  if (labeled.empty()) throw ArgumentError("train_oracle: no labeled samples");

  OracleClassifier oracle;
  oracle.family = options.family;
  oracle.width_divisor = options.width_divisor;
  oracle.image = train.shape;
  oracle.num_classes = train.cardinalities[0];
  oracle.accuracy_floor = options.accuracy_floor;
  Rng rng(options.seed);
  oracle.net = Network<Real>(oracle_config(options.family, train.shape, options.width_divisor, oracle.num_classes), rng);

  Adam<Real> adam{options.lr, 0.9, 0.999, 1e-8, 0, {}};
  auto& seq = oracle.net.branches.at(0);
  const int k = oracle.num_classes;
  const int bs = options.batch_size;
  Mat<Real> x(train.images.rows(), bs);
  Mat<Real> target = Mat<Real>::Zero(k, bs);
  for (int64_t it = 0; it < options.iters; ++it) {
    target.setZero();
    for (int j = 0; j < bs; ++j) {
      const auto i = labeled[size_t(rng() % labeled.size())];
      x.col(j) = train.images.col(i);
      target(train.labels(0, i), j) = 1;
    }
    Trace<Real> trace;
    const Mat<Real> logits = seq.forward(x, Mode::train, rng, trace, "oracle");
    // Exact softmax cross-entropy; no probability floor, so no dead gradients.
    const Mat<Real> grad = (softmax(logits) - target) / Real(bs);
    oracle.net.zero_grad();
    seq.backward(trace, grad);
    adam.step(oracle.net.params());
  }

  const auto pred = oracle.predict(test.images);
  Eigen::Index correct = 0;
  for (Eigen::Index i = 0; i < test.size(); ++i) correct += pred[size_t(i)] == test.labels(0, i);
  oracle.test_accuracy = double(correct) / double(test.size());
  if (oracle.test_accuracy < options.accuracy_floor) {
    oracle.warning = "test accuracy " + format_double(oracle.test_accuracy) + " below floor " +
                     format_double(options.accuracy_floor);
  }
  return oracle;
}

Container oracle_container(OracleClassifier& oracle) {
  Container c;
  c.manifest = {
      {"format_version", std::to_string(Container::kFormatVersion)},
      {"kind", "oracle"},
      {"family", oracle.family},
      {"width_divisor", std::to_string(oracle.width_divisor)},
      {"image_shape", shape_text(oracle.image)},
      {"num_classes", std::to_string(oracle.num_classes)},
      {"test_accuracy", format_double(oracle.test_accuracy)},
      {"accuracy_floor", format_double(oracle.accuracy_floor)},
      {"warning", oracle.warning},
  };
  for (auto& [name, p] : oracle.net.named_params()) c.put("C." + name, p->value);
  for (auto& [name, p] : oracle.net.named_buffers()) c.put("C." + name, p->value);
  return c;
}

void save_oracle(OracleClassifier& oracle, const std::filesystem::path& path) {
  save_container(oracle_container(oracle), path);
}

OracleClassifier load_oracle(const std::filesystem::path& path) {
  const Container c = load_container(path);
  if (c.get("kind") != "oracle") throw LoadError("oracle: " + path.string() + " is not an oracle classifier");
  OracleClassifier o;
  o.family = c.get("family");
  o.width_divisor = std::stoi(c.get("width_divisor"));
  o.image = parse_shape(c.get("image_shape"));
  o.num_classes = std::stoi(c.get("num_classes"));
  o.test_accuracy = std::stod(c.get("test_accuracy"));
  o.accuracy_floor = std::stod(c.get("accuracy_floor"));
  o.warning = c.get("warning");
  Rng rng(0);
  o.net = Network<Real>(oracle_config(o.family, o.image, o.width_divisor, o.num_classes), rng);
  for (auto& [name, p] : o.net.named_params()) c.take("C." + name, p->value);
  for (auto& [name, p] : o.net.named_buffers()) c.take("C." + name, p->value);
  return o;
}

// ---------------------------------------------------------------------------

std::string EvalReport::to_text() const {
  std::ostringstream os;
  os << "iteration: " << iteration << "\n"
     << "seed: " << seed << "\n"
     << "runs: " << runs << "\n"
     << "per_class: " << per_class << "\n"
     << "classes: " << class_error.size() << "\n"
     << "generator_error_pct: " << format_double(generator_error) << "\n"
     << "generator_error_std_pct: " << format_double(generator_error_std) << "\n";
  for (size_t k = 0; k < class_error.size(); ++k)
    os << "generator_error_pct.class_" << k << ": " << format_double(class_error[k]) << "\n";
  os << "encoder_accuracy_pct: " << format_double(encoder_accuracy) << "\n"
     << "encoder_error_pct: " << format_double(100.0 - encoder_accuracy) << "\n"
     << "encoder_samples: " << encoder_samples << "\n"
     << "oracle_accuracy_pct: " << format_double(oracle_accuracy) << "\n";
  return os.str();
}

std::string EvalReport::to_csv() const {
  std::string out = "class,requested,error_pct\n";
  for (size_t k = 0; k < class_error.size(); ++k)
    out += std::to_string(k) + "," + std::to_string(per_class) + "," + format_double(class_error[k]) + "\n";
  return out;
}

EvalReport aggregate(const std::vector<EvalReport>& runs) {
  if (runs.empty()) throw ArgumentError("aggregate: no runs");
  EvalReport out = runs.front();
  const double n = double(runs.size());
  out.runs = static_cast<int>(runs.size());
  std::fill(out.class_error.begin(), out.class_error.end(), 0.0);
  out.generator_error = out.encoder_accuracy = out.oracle_accuracy = 0.0;
  for (const auto& r : runs) {
    if (r.class_error.size() != out.class_error.size()) throw ArgumentError("aggregate: class counts differ");
    for (size_t k = 0; k < r.class_error.size(); ++k) out.class_error[k] += r.class_error[k] / n;
    out.generator_error += r.generator_error / n;
    out.encoder_accuracy += r.encoder_accuracy / n;
    out.oracle_accuracy += r.oracle_accuracy / n;
  }
  double var = 0.0;
  for (const auto& r : runs) var += (r.generator_error - out.generator_error) * (r.generator_error - out.generator_error);
  out.generator_error_std = std::sqrt(var / n);
  return out;
}

EvalReport generator_error(const GenerateFn& generate_fn, const LatentSpec& spec, const ClassifyFn& classify,
                           int num_classes, int per_class, Rng& rng) {
  if (spec.num_blocks() == 0) throw ArgumentError("generator_error: latent spec has no categorical block");
  if (num_classes != spec.cat_dims[0])
    throw ArgumentError("generator_error: classifier has " + std::to_string(num_classes) + " classes, latent block has " +
                        std::to_string(spec.cat_dims[0]));
  if (per_class < 1) throw ArgumentError("generator_error: per_class must be >= 1");
  EvalReport report;
  report.per_class = per_class;
  report.class_error.resize(size_t(num_classes));
  for (int k = 0; k < num_classes; ++k) {
    Mat<Real> codes = sample_code_batch<Real>(spec, per_class, rng);
    set_category_batch(spec, codes, 0, k);
    const auto pred = classify(generate_fn(codes));
    const auto wrong = std::count_if(pred.begin(), pred.end(), [k](int p) { return p != k; });
    report.class_error[size_t(k)] = 100.0 * double(wrong) / double(per_class);
  }
  report.generator_error =
      std::accumulate(report.class_error.begin(), report.class_error.end(), 0.0) / double(num_classes);
  return report;
}

EvalReport generator_error(Model<Real>& model, OracleClassifier& oracle, int per_class, Rng& rng) {
  if (!(oracle.image == model.image_shape()))
    throw ArgumentError("generator_error: oracle image shape " + shape_text(oracle.image) + " differs from generator " +
                        shape_text(model.image_shape()));
  EvalReport r = generator_error([&](const Mat<Real>& c) { return generate(model.generator, c); }, model.spec,
                                 [&](const Mat<Real>& x) { return oracle.predict(x); }, oracle.num_classes, per_class,
                                 rng);
  r.oracle_accuracy = 100.0 * oracle.test_accuracy;
  return r;
}

double accuracy_from_posteriors(const Mat<Real>& probs, const std::vector<int>& labels) {
  if (size_t(probs.cols()) != labels.size()) throw ArgumentError("accuracy: label count mismatch");
  if (labels.empty()) throw ArgumentError("accuracy: empty set");
  size_t correct = 0;
  for (Eigen::Index i = 0; i < probs.cols(); ++i) correct += argmax_col(probs, i, 0, probs.rows()) == labels[size_t(i)];
  return double(correct) / double(labels.size());
}

double encoder_accuracy(Model<Real>& model, const Dataset& test) {
  const auto& spec = model.spec;
  if (spec.num_blocks() == 0 || test.num_attributes() == 0) throw ArgumentError("encoder_accuracy: no class labels");
  Rng rng(0);
  const Mat<Real> probs = chunked(test.images, spec.cat_dims[0], [&](const Mat<Real>& x) {
    return softmax(forward_E(model.encoder, spec, x, Mode::inference, rng).cat_logits[0]);
  });
  std::vector<int> labels(test.labels.row(0).begin(), test.labels.row(0).end());
  return accuracy_from_posteriors(probs, labels);
}

double reconstruction_error(Model<Real>& model, const Dataset& data, Eigen::Index max_samples) {
  const Eigen::Index n = max_samples < 0 ? data.size() : std::min(max_samples, data.size());
  if (n == 0) throw ArgumentError("reconstruction_error: empty set");
  Rng rng(0);
  double total = 0.0;
  for (Eigen::Index b = 0; b < n; b += kChunk) {
    const Eigen::Index m = std::min(kChunk, n - b);
    const Mat<Real> x = data.images.middleCols(b, m);
    const auto enc = forward_E(model.encoder, model.spec, x, Mode::inference, rng);
    const Mat<Real> x_hat = forward_G(model.generator, posterior_mean_code(model.spec, enc), Mode::inference, rng);
    total += double(reconstruction_loss(x, x_hat)) * double(m);
  }
  return total / double(n);
}

double round_trip_agreement(Model<Real>& model, int count, Rng& rng) {
  const auto& spec = model.spec;
  if (spec.num_blocks() == 0) throw ArgumentError("round_trip_agreement: no categorical block");
  if (count < 1) throw ArgumentError("round_trip_agreement: count must be >= 1");
  const Mat<Real> codes = sample_code_batch<Real>(spec, count, rng);
  const Mat<Real> x = generate(model.generator, codes);
  Rng local(0);
  const Mat<Real> logits = chunked(x, spec.cat_dims[0], [&](const Mat<Real>& xb) {
    return forward_E(model.encoder, spec, xb, Mode::inference, local).cat_logits[0];
  });
  int agree = 0;
  for (int i = 0; i < count; ++i)
    agree += argmax_col(logits, i, 0, spec.cat_dims[0]) == argmax_col(codes, i, spec.cat_offset(0), spec.cat_dims[0]);
  return double(agree) / double(count);
}

Mat<Real> encode_code(Network<Real>& encoder, const LatentSpec& spec, const Mat<Real>& images) {
  Rng rng(0);
  return chunked(images, spec.total_dim(), [&](const Mat<Real>& x) {
    const auto enc = forward_E(encoder, spec, x, Mode::inference, rng);
    Mat<Real> code = posterior_mean_code(spec, enc);
    for (int b = 0; b < spec.num_blocks(); ++b)
      for (Eigen::Index i = 0; i < code.cols(); ++i) {
        auto block = code.col(i).segment(spec.cat_offset(b), spec.cat_dims[b]);
        Eigen::Index best = 0;
        block.maxCoeff(&best);
        block.setZero();
        block(best) = 1;
      }
    return code;
  });
}

Mat<Real> reconstruct(Model<Real>& model, const Mat<Real>& images) {
  return generate(model.generator, encode_code(model.encoder, model.spec, images));
}

// ---------------------------------------------------------------------------

GridMode parse_grid_mode(const std::string& name) {
  if (name == "class-sweep") return GridMode::class_sweep;
  if (name == "continuous-sweep") return GridMode::continuous_sweep;
  if (name == "translate") return GridMode::translate;
  if (name == "interpolate") return GridMode::interpolate;
  throw ArgumentError("unknown grid mode '" + name + "'");
}

std::string to_string(GridMode mode) {
  switch (mode) {
    case GridMode::class_sweep: return "class-sweep";
    case GridMode::continuous_sweep: return "continuous-sweep";
    case GridMode::translate: return "translate";
    case GridMode::interpolate: return "interpolate";
  }
  return "unknown";
}

Grid grid_generate(Network<Real>& generator, const LatentSpec& spec, Network<Real>* encoder, GridMode mode,
                   const GridParams& params, Rng& rng) {
  Grid grid;
  grid.tile = output_shape(generator.config);
  const Eigen::Index features = grid.tile.size();
  if (params.block < 0 || params.block >= spec.num_blocks()) throw ArgumentError("grid: block out of range");
  const int k = spec.cat_dims[params.block];
  auto place_col = [&](int c, const Mat<Real>& images) {
    for (int r = 0; r < grid.rows; ++r) grid.tiles.col(Eigen::Index(r) * grid.cols + c) = images.col(r);
  };

  switch (mode) {
    case GridMode::class_sweep: {
      if (params.columns < 1) throw ArgumentError("grid: columns must be >= 1");
      grid.rows = k;
      grid.cols = params.columns;
      grid.tiles.resize(features, Eigen::Index(grid.rows) * grid.cols);
      const Mat<Real> base = sample_code_batch<Real>(spec, grid.cols, rng);
      for (int r = 0; r < k; ++r) {
        Mat<Real> codes = base;
        set_category_batch(spec, codes, params.block, r);
        grid.tiles.middleCols(Eigen::Index(r) * grid.cols, grid.cols) = generate(generator, codes);
      }
      break;
    }
    case GridMode::continuous_sweep: {
      if (params.cont_index < 0 || params.cont_index >= spec.cont_dim)
        throw ArgumentError("grid: continuous index " + std::to_string(params.cont_index) + " out of range");
      if (params.steps < 2) throw ArgumentError("grid: steps must be >= 2");
      grid.rows = params.rows > 0 ? params.rows : k;
      grid.cols = params.steps;
      grid.tiles.resize(features, Eigen::Index(grid.rows) * grid.cols);
      const Mat<Real> base = sample_code_batch<Real>(spec, grid.rows, rng);
      const Eigen::Index row = spec.cont_offset() + params.cont_index;
      for (int r = 0; r < grid.rows; ++r) {
        Mat<Real> codes = base.col(r).replicate(1, grid.cols);
        set_category_batch(spec, codes, params.block, r % k);
        for (int c = 0; c < grid.cols; ++c) codes(row, c) = Real(-1.0 + 2.0 * c / (grid.cols - 1));
        grid.tiles.middleCols(Eigen::Index(r) * grid.cols, grid.cols) = generate(generator, codes);
      }
      break;
    }
    case GridMode::translate: {
      if (!encoder) throw ArgumentError("grid: translate needs an encoder");
      if (params.inputs.cols() == 0 || params.inputs.rows() != features)
        throw ArgumentError("grid: translate needs input images of the generator's shape");
      std::vector<int> targets = params.classes;
      if (targets.empty()) {
        targets.resize(size_t(k));
        std::iota(targets.begin(), targets.end(), 0);
      }
      for (int t : targets)
        if (t < 0 || t >= k) throw ArgumentError("grid: target class " + std::to_string(t) + " out of range");
      grid.rows = static_cast<int>(params.inputs.cols());
      grid.cols = 1 + static_cast<int>(targets.size());
      grid.tiles.resize(features, Eigen::Index(grid.rows) * grid.cols);
      place_col(0, params.inputs);
      const Mat<Real> code = encode_code(*encoder, spec, params.inputs);
      for (size_t j = 0; j < targets.size(); ++j) {
        Mat<Real> c = code;
        set_category_batch(spec, c, params.block, targets[j]);
        place_col(int(j) + 1, generate(generator, c));
      }
      break;
    }
    case GridMode::interpolate: {
      if (!encoder) throw ArgumentError("grid: interpolate needs an encoder");
      if (params.inputs.cols() < 2 || params.inputs.cols() % 2 != 0 || params.inputs.rows() != features)
        throw ArgumentError("grid: interpolate needs pairs of input images of the generator's shape");
      if (params.steps < 2) throw ArgumentError("grid: steps must be >= 2");
      grid.rows = static_cast<int>(params.inputs.cols() / 2);
      grid.cols = params.steps;
      grid.tiles.resize(features, Eigen::Index(grid.rows) * grid.cols);
      const Mat<Real> code = encode_code(*encoder, spec, params.inputs);
      for (int r = 0; r < grid.rows; ++r) {
        const Vec<Real> a = code.col(2 * r);
        const Vec<Real> b = code.col(2 * r + 1);
        Mat<Real> codes(code.rows(), grid.cols);
        for (int c = 0; c < grid.cols; ++c) {
          const Real t = Real(c) / Real(grid.cols - 1);
          codes.col(c) = (Real(1) - t) * a + t * b;
        }
        auto row = grid.tiles.middleCols(Eigen::Index(r) * grid.cols, grid.cols);
        row = generate(generator, codes);
        row.col(0) = params.inputs.col(2 * r);
        row.col(grid.cols - 1) = params.inputs.col(2 * r + 1);
      }
      break;
    }
  }
  return grid;
}

Image8 render(const Grid& grid) {
  const Shape t = grid.tile;
  Image8 img;
  img.channels = t.channels;
  img.width = grid.cols * t.width + (grid.cols - 1) * kSeparator;
  img.height = grid.rows * t.height + (grid.rows - 1) * kSeparator;
  img.pixels.assign(size_t(img.width) * img.height * img.channels, 255);
  for (int r = 0; r < grid.rows; ++r)
    for (int c = 0; c < grid.cols; ++c) {
      const auto tile = grid.cell(r, c);
      const int y0 = r * (t.height + kSeparator);
      const int x0 = c * (t.width + kSeparator);
      for (int y = 0; y < t.height; ++y)
        for (int x = 0; x < t.width; ++x)
          for (int ch = 0; ch < t.channels; ++ch) {
            const Real v = tile((Eigen::Index(y) * t.width + x) * t.channels + ch);
            const size_t at = (size_t(y0 + y) * img.width + (x0 + x)) * img.channels + ch;
            img.pixels[at] = static_cast<uint8_t>(std::lround(std::clamp(v, Real(0), Real(1)) * 255));
          }
    }
  return img;
}

void write_png(const Image8& image, const std::filesystem::path& path) {
  if (image.channels != 1 && image.channels != 3) throw ArgumentError("write_png: 1 or 3 channels required");
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  FILE* fp = std::fopen(path.c_str(), "wb");
  if (!fp) throw std::runtime_error("cannot open " + path.string() + " for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    throw std::runtime_error("failed writing " + path.string());
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, png_uint_32(image.width), png_uint_32(image.height), 8,
               image.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  const size_t stride = size_t(image.width) * image.channels;
  for (int y = 0; y < image.height; ++y) png_write_row(png, image.pixels.data() + size_t(y) * stride);
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  if (std::fclose(fp) != 0) throw std::runtime_error("failed closing " + path.string());
}

std::string grid_filename(GridMode mode, int64_t iteration, uint64_t seed) {
  return to_string(mode) + "_" + std::to_string(iteration) + "_" + std::to_string(seed) + ".png";
}

}  // namespace disrep
