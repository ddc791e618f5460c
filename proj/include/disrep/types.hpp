#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>

namespace disrep {

// Batches are column-major: one sample per column, features stored
// height-major, then width, then channel (channel fastest).
template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using MatI = Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic>;
using MatB = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>;

using Rng = std::mt19937_64;

/// Spatial shape of one sample. Fully-connected activations are 1x1xC.
struct Shape {
  int height = 1;
  int width = 1;
  int channels = 1;

  int size() const { return height * width * channels; }
  bool operator==(const Shape&) const = default;
};

enum class Mode { train, inference };

}  // namespace disrep
