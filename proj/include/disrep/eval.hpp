#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "disrep/checkpoint.hpp"
#include "disrep/data.hpp"
#include "disrep/netspec.hpp"
#include "disrep/trainer.hpp"

namespace disrep {

// ---------------------------------------------------------------------------
// Oracle classifier

struct OracleOptions {
  std::string family = "mnist";
  int width_divisor = 1;
  int64_t iters = 2000;
  int batch_size = 64;
  double lr = 1e-3;
  double accuracy_floor = 0.99;
  uint64_t seed = 0;
};

struct OracleClassifier {
  Network<Real> net;
  std::string family;
  int width_divisor = 1;
  Shape image;
  int num_classes = 0;
  double test_accuracy = 0.0;
  double accuracy_floor = 0.0;
  std::string warning;

  /// Argmax class per column.
  std::vector<int> predict(const Mat<Real>& images);
};

NetworkConfig oracle_config(const std::string& family, Shape image, int width_divisor, int num_classes);

/// Trains on every labeled training sample; records test accuracy and a
/// warning when it falls below the floor.
OracleClassifier train_oracle(const Dataset& train, const Dataset& test, const OracleOptions& options);

Container oracle_container(OracleClassifier& oracle);
void save_oracle(OracleClassifier& oracle, const std::filesystem::path& path);
OracleClassifier load_oracle(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Quantitative protocol

struct EvalReport {
  int64_t iteration = 0;
  uint64_t seed = 0;
  int runs = 1;
  int per_class = 0;
  std::vector<double> class_error;  // percent
  double generator_error = 0.0;     // percent, mean over classes
  double generator_error_std = 0.0;  // across runs
  double encoder_accuracy = 0.0;    // percent
  int64_t encoder_samples = 0;
  double oracle_accuracy = 0.0;     // percent

  std::string to_text() const;
  std::string to_csv() const;
};

/// Mean of several runs; generator_error_std is the population std of the overall errors.
EvalReport aggregate(const std::vector<EvalReport>& runs);

using GenerateFn = std::function<Mat<Real>(const Mat<Real>& codes)>;
using ClassifyFn = std::function<std::vector<int>(const Mat<Real>& images)>;

/// Requests per_class samples of each category of block 0 and scores them with
/// `classify`. Fills per_class, class_error and generator_error.
EvalReport generator_error(const GenerateFn& generate, const LatentSpec& spec, const ClassifyFn& classify,
                           int num_classes, int per_class, Rng& rng);
EvalReport generator_error(Model<Real>& model, OracleClassifier& oracle, int per_class, Rng& rng);

/// Fraction of columns whose argmax equals the label.
double accuracy_from_posteriors(const Mat<Real>& probs, const std::vector<int>& labels);

/// Encoder accuracy on block 0 over a labeled set, in [0, 1].
double encoder_accuracy(Model<Real>& model, const Dataset& test);

/// Mean per-sample reconstruction loss in inference mode.
double reconstruction_error(Model<Real>& model, const Dataset& data, Eigen::Index max_samples = -1);

/// Fraction of fresh codes whose block-0 category survives G then E.
double round_trip_agreement(Model<Real>& model, int count, Rng& rng);

/// E's deterministic code with every categorical block snapped to its argmax.
Mat<Real> encode_code(Network<Real>& encoder, const LatentSpec& spec, const Mat<Real>& images);
Mat<Real> reconstruct(Model<Real>& model, const Mat<Real>& images);

// ---------------------------------------------------------------------------
// Figure grids

enum class GridMode { class_sweep, continuous_sweep, translate, interpolate };

GridMode parse_grid_mode(const std::string& name);
std::string to_string(GridMode mode);

struct GridParams {
  int block = 0;
  int columns = 8;          // class-sweep: fixed codes per row
  int rows = 0;             // continuous-sweep: 0 means one row per class
  int cont_index = 0;       // continuous-sweep
  int steps = 7;            // continuous-sweep and interpolate columns
  std::vector<int> classes;  // translate targets; empty means all
  Mat<Real> inputs;         // translate: one per row; interpolate: pairs (2r, 2r+1)
};

/// Tiles in row-major order, one image per column of `tiles`.
struct Grid {
  Shape tile;
  int rows = 0;
  int cols = 0;
  Mat<Real> tiles;

  auto cell(int r, int c) const { return tiles.col(Eigen::Index(r) * cols + c); }
};

/// `encoder` may be null for class-sweep and continuous-sweep.
Grid grid_generate(Network<Real>& generator, const LatentSpec& spec, Network<Real>* encoder, GridMode mode,
                   const GridParams& params, Rng& rng);

struct Image8 {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::vector<uint8_t> pixels;  // row-major, interleaved channels
};

constexpr int kSeparator = 2;

Image8 render(const Grid& grid);
void write_png(const Image8& image, const std::filesystem::path& path);
std::string grid_filename(GridMode mode, int64_t iteration, uint64_t seed);

}  // namespace disrep
