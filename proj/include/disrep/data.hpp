#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "disrep/types.hpp"

namespace disrep {

/// Images in [0,1], one sample per column (HWC order), plus per-sample
/// attribute labels where -1 marks a missing label.
struct Dataset {
  Shape shape;
  Mat<float> images;
  MatI labels;                     // attributes x N
  std::vector<int> cardinalities;  // per attribute
  Mat<float> factors;              // optional ground-truth generative factors (factors x N)
  std::string split = "train";

  Eigen::Index size() const { return images.cols(); }
  int num_attributes() const { return static_cast<int>(labels.rows()); }
};

// ---------------------------------------------------------------------------
// IDX container

/// Raw IDX array. Only the unsigned-byte element type (0x08) is supported.
struct IdxArray {
  uint8_t type = 0x08;
  std::vector<uint32_t> dims;
  std::vector<uint8_t> data;

  bool operator==(const IdxArray&) const = default;
};

IdxArray parse_idx(std::span<const uint8_t> bytes);
std::vector<uint8_t> encode_idx(const IdxArray& array);

std::vector<uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const uint8_t> bytes);

/// Images file: magic 0x00000803 (N x H x W) or 0x00000804 (N x H x W x C).
/// Labels file: magic 0x00000801 (N). Pixels are scaled by 1/255.
Dataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path);
Dataset dataset_from_idx(const IdxArray& images, const IdxArray& labels);

/// Images file alone; the result carries no labels.
Dataset load_idx_images(const std::filesystem::path& images_path);

/// Inverse of dataset_from_idx: pixels are mapped back with round(255 * x).
IdxArray images_to_idx(const Dataset& dataset);
IdxArray labels_to_idx(const Dataset& dataset);
void save_idx(const Dataset& dataset, const std::filesystem::path& images_path,
              const std::filesystem::path& labels_path);

// ---------------------------------------------------------------------------
// Synthetic shapes

enum class ShapeClass { square = 0, circle = 1, triangle = 2 };

/// Grayscale images of one centered shape each, class label in {0,1,2},
/// scale in [0.4, 0.9] * size, rotation in [0, 2 pi). factors rows: scale, rotation.
Dataset make_shapes(int n, int size, Rng& rng);

// ---------------------------------------------------------------------------
// Labeled subset and batches

struct LabeledSubset {
  std::vector<Eigen::Index> indices;
  std::vector<int> coverage;  // labeled samples per class of attribute 0
};

/// Class-balanced subset of `count` samples (quota floor or ceil of count/K per class).
LabeledSubset select_labeled(const Dataset& dataset, int count, Rng& rng);

struct LabeledBatch {
  Mat<float> images;
  MatI labels;  // attributes x B, -1 where the sample was drawn unlabeled
  MatB mask;    // attributes x B
  std::vector<Eigen::Index> indices;

  Eigen::Index size() const { return images.cols(); }
};

/// Each sample comes from the labeled subset with probability p_labeled
/// (mask true where the attribute is present), otherwise uniformly from the
/// whole dataset with mask false.
LabeledBatch draw_batch(const Dataset& dataset, const LabeledSubset& subset, double p_labeled, int batch_size,
                        Rng& rng);

/// All samples of `dataset` in order, fully labeled where labels exist.
LabeledBatch slice_batch(const Dataset& dataset, Eigen::Index begin, Eigen::Index end);

}  // namespace disrep
