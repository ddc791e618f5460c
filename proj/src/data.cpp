#include "disrep/data.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numbers>
#include <numeric>

#include "disrep/errors.hpp"

namespace disrep {

namespace {

uint32_t read_be32(std::span<const uint8_t> bytes, size_t offset) {
  return (uint32_t(bytes[offset]) << 24) | (uint32_t(bytes[offset + 1]) << 16) | (uint32_t(bytes[offset + 2]) << 8) |
         uint32_t(bytes[offset + 3]);
}

void write_be32(std::vector<uint8_t>& out, uint32_t v) {
  out.push_back(uint8_t(v >> 24));
  out.push_back(uint8_t(v >> 16));
  out.push_back(uint8_t(v >> 8));
  out.push_back(uint8_t(v));
}

std::string hex(uint32_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s = "0x";
  for (int shift = 28; shift >= 0; shift -= 4) s += digits[(v >> shift) & 0xf];
  return s;
}

}  // namespace

IdxArray parse_idx(std::span<const uint8_t> bytes) {
  if (bytes.size() < 4) throw FormatError("idx: truncated header at offset 0 (" + std::to_string(bytes.size()) + " bytes)");
  const uint32_t magic = read_be32(bytes, 0);
  if (bytes[0] != 0 || bytes[1] != 0) throw FormatError("idx: bad magic " + hex(magic) + " at offset 0");
  if (bytes[2] != 0x08)
    throw FormatError("idx: unsupported element type " + hex(bytes[2]) + " at offset 2 (only unsigned byte)");
  const int ndims = bytes[3];
  if (ndims < 1 || ndims > 4) throw FormatError("idx: bad magic " + hex(magic) + " at offset 0 (rank " + std::to_string(ndims) + ")");

  IdxArray arr;
  arr.type = bytes[2];
  const size_t header = 4 + 4 * size_t(ndims);
  if (bytes.size() < header)
    throw FormatError("idx: truncated dimension header at offset " + std::to_string(bytes.size()));
  size_t count = 1;
  for (int d = 0; d < ndims; ++d) {
    arr.dims.push_back(read_be32(bytes, 4 + 4 * d));
    count *= arr.dims.back();
  }
  if (bytes.size() != header + count)
    throw FormatError("idx: payload size mismatch at offset " + std::to_string(header) + ": expected " +
                      std::to_string(count) + " bytes, found " + std::to_string(bytes.size() - header));
  arr.data.assign(bytes.begin() + static_cast<std::ptrdiff_t>(header), bytes.end());
  return arr;
}

std::vector<uint8_t> encode_idx(const IdxArray& arr) {
  std::vector<uint8_t> out = {0, 0, arr.type, static_cast<uint8_t>(arr.dims.size())};
  for (uint32_t d : arr.dims) write_be32(out, d);
  out.insert(out.end(), arr.data.begin(), arr.data.end());
  return out;
}

std::vector<uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, std::span<const uint8_t> bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

Dataset dataset_from_idx(const IdxArray& images, const IdxArray& labels) {
  if (images.dims.size() != 3 && images.dims.size() != 4)
    throw FormatError("idx: image file must have magic 0x00000803 or 0x00000804 (offset 0)");
  if (labels.dims.size() != 1) throw FormatError("idx: label file must have magic 0x00000801 (offset 0)");
  if (images.dims[0] != labels.dims[0])
    throw FormatError("idx: count mismatch at offset 4: " + std::to_string(images.dims[0]) + " images vs " +
                      std::to_string(labels.dims[0]) + " labels");

  Dataset ds;
  const auto n = static_cast<Eigen::Index>(images.dims[0]);
  ds.shape = {int(images.dims[1]), int(images.dims[2]), images.dims.size() == 4 ? int(images.dims[3]) : 1};
  ds.images.resize(ds.shape.size(), n);
  const float scale = 1.0f / 255.0f;
  for (size_t i = 0; i < images.data.size(); ++i) ds.images.data()[i] = float(images.data[i]) * scale;

  ds.labels.resize(1, n);
  int max_label = 1;
  for (Eigen::Index i = 0; i < n; ++i) {
    ds.labels(0, i) = labels.data[size_t(i)];
    max_label = std::max(max_label, ds.labels(0, i));
  }
  ds.cardinalities = {max_label + 1};
  return ds;
}

Dataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path) {
  const auto img_bytes = read_file(images_path);
  const auto lbl_bytes = read_file(labels_path);
  IdxArray images;
  IdxArray labels;
  try {
    images = parse_idx(img_bytes);
  } catch (const FormatError& e) {
    throw FormatError(images_path.string() + ": " + e.what());
  }
  try {
    labels = parse_idx(lbl_bytes);
  } catch (const FormatError& e) {
    throw FormatError(labels_path.string() + ": " + e.what());
  }
  return dataset_from_idx(images, labels);
}

Dataset load_idx_images(const std::filesystem::path& images_path) {
  const IdxArray images = parse_idx(read_file(images_path));
  IdxArray labels;
  labels.dims = {images.dims.empty() ? 0u : images.dims[0]};
  labels.data.assign(labels.dims[0], 0);
  Dataset ds = dataset_from_idx(images, labels);
  ds.labels.resize(0, ds.size());
  ds.cardinalities.clear();
  return ds;
}

IdxArray images_to_idx(const Dataset& ds) {
  IdxArray arr;
  arr.dims = {uint32_t(ds.size()), uint32_t(ds.shape.height), uint32_t(ds.shape.width)};
  if (ds.shape.channels != 1) arr.dims.push_back(uint32_t(ds.shape.channels));
  arr.data.resize(size_t(ds.images.size()));
  for (size_t i = 0; i < arr.data.size(); ++i) {
    const float v = std::clamp(ds.images.data()[i], 0.0f, 1.0f);
    arr.data[i] = static_cast<uint8_t>(std::lround(v * 255.0f));
  }
  return arr;
}

IdxArray labels_to_idx(const Dataset& ds) {
  IdxArray arr;
  arr.dims = {uint32_t(ds.size())};
  arr.data.resize(size_t(ds.size()));
  for (Eigen::Index i = 0; i < ds.size(); ++i) {
    const int y = ds.labels.rows() > 0 ? ds.labels(0, i) : 0;
    if (y < 0 || y > 255) throw ArgumentError("labels_to_idx: label outside unsigned byte range");
    arr.data[size_t(i)] = static_cast<uint8_t>(y);
  }
  return arr;
}

void save_idx(const Dataset& ds, const std::filesystem::path& images_path, const std::filesystem::path& labels_path) {
  write_file(images_path, encode_idx(images_to_idx(ds)));
  write_file(labels_path, encode_idx(labels_to_idx(ds)));
}

// ---------------------------------------------------------------------------

namespace {

bool inside_shape(ShapeClass cls, double x, double y, double extent, double angle) {
  // Rotate the sample point into the shape frame.
  const double c = std::cos(-angle);
  const double s = std::sin(-angle);
  const double rx = c * x - s * y;
  const double ry = s * x + c * y;
  const double radius = extent / 2.0;  // circumscribed radius
  switch (cls) {
    case ShapeClass::circle:
      return rx * rx + ry * ry <= radius * radius;
    case ShapeClass::square: {
      const double half = radius / std::numbers::sqrt2;
      return std::abs(rx) <= half && std::abs(ry) <= half;
    }
    case ShapeClass::triangle: {
      // Equilateral triangle with circumradius `radius`, one vertex up.
      std::array<std::array<double, 2>, 3> v;
      for (int i = 0; i < 3; ++i) {
        const double a = std::numbers::pi / 2 + i * 2.0 * std::numbers::pi / 3.0;
        v[i] = {radius * std::cos(a), radius * std::sin(a)};
      }
      for (int i = 0; i < 3; ++i) {
        const auto& p = v[i];
        const auto& q = v[(i + 1) % 3];
        const double cross = (q[0] - p[0]) * (ry - p[1]) - (q[1] - p[1]) * (rx - p[0]);
        if (cross < 0) return false;
      }
      return true;
    }
  }
  return false;
}

}  // namespace

Dataset make_shapes(int n, int size, Rng& rng) {
  if (size < 12) throw ArgumentError("make_shapes: size must be >= 12");
  if (n < 0) throw ArgumentError("make_shapes: negative sample count");
  constexpr int kSuper = 4;

  Dataset ds;
  ds.shape = {size, size, 1};
  ds.images = Mat<float>::Zero(size * size, n);
  ds.labels.resize(1, n);
  ds.cardinalities = {3};
  ds.factors.resize(2, n);

  std::uniform_int_distribution<int> pick_class(0, 2);
  std::uniform_real_distribution<double> pick_scale(0.4, 0.9);
  std::uniform_real_distribution<double> pick_angle(0.0, 2.0 * std::numbers::pi);
  const double center = size / 2.0;
  for (int i = 0; i < n; ++i) {
    const int cls = pick_class(rng);
    const double scale = pick_scale(rng);
    const double angle = pick_angle(rng);
    ds.labels(0, i) = cls;
    ds.factors(0, i) = float(scale);
    ds.factors(1, i) = float(angle);
    const double extent = scale * size;
    for (int py = 0; py < size; ++py) {
      for (int px = 0; px < size; ++px) {
        int hits = 0;
        for (int sy = 0; sy < kSuper; ++sy)
          for (int sx = 0; sx < kSuper; ++sx) {
            // Image y grows downward; flip so the triangle points up.
            const double x = px + (sx + 0.5) / kSuper - center;
            const double y = center - (py + (sy + 0.5) / kSuper);
            hits += inside_shape(ShapeClass(cls), x, y, extent, angle);
          }
        ds.images(py * size + px, i) = float(hits) / float(kSuper * kSuper);
      }
    }
  }
  return ds;
}

// ---------------------------------------------------------------------------

LabeledSubset select_labeled(const Dataset& ds, int count, Rng& rng) {
  if (count < 0 || count > ds.size())
    throw SelectionError("select_labeled: count " + std::to_string(count) + " exceeds dataset size " +
                         std::to_string(ds.size()));
  if (ds.num_attributes() == 0 || ds.cardinalities.empty()) throw SelectionError("select_labeled: dataset has no labels");

  const int k = ds.cardinalities[0];
  std::vector<std::vector<Eigen::Index>> by_class(static_cast<size_t>(k));
  for (Eigen::Index i = 0; i < ds.size(); ++i) {
    const int y = ds.labels(0, i);
    if (y >= 0 && y < k) by_class[size_t(y)].push_back(i);
  }

  // Classes receiving the remainder are drawn at random.
  std::vector<int> order(static_cast<size_t>(k));
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<int> quota(size_t(k), count / k);
  for (int r = 0; r < count % k; ++r) ++quota[size_t(order[size_t(r)])];

  LabeledSubset subset;
  subset.coverage.assign(size_t(k), 0);
  for (int c = 0; c < k; ++c) {
    auto& pool = by_class[size_t(c)];
    if (static_cast<int>(pool.size()) < quota[size_t(c)])
      throw SelectionError("select_labeled: class " + std::to_string(c) + " has " + std::to_string(pool.size()) +
                           " samples, quota is " + std::to_string(quota[size_t(c)]));
    std::shuffle(pool.begin(), pool.end(), rng);
    subset.indices.insert(subset.indices.end(), pool.begin(), pool.begin() + quota[size_t(c)]);
    subset.coverage[size_t(c)] = quota[size_t(c)];
  }
  std::sort(subset.indices.begin(), subset.indices.end());
  return subset;
}

LabeledBatch draw_batch(const Dataset& ds, const LabeledSubset& subset, double p_labeled, int batch_size, Rng& rng) {
  if (p_labeled < 0.0 || p_labeled > 1.0) throw ArgumentError("draw_batch: p_labeled outside [0, 1]");
  if (ds.size() == 0) throw ArgumentError("draw_batch: empty dataset");
  const int attrs = ds.num_attributes();
  LabeledBatch batch;
  batch.images.resize(ds.shape.size(), batch_size);
  batch.labels = MatI::Constant(attrs, batch_size, -1);
  batch.mask = MatB::Constant(attrs, batch_size, false);
  batch.indices.resize(size_t(batch_size));

  std::bernoulli_distribution labeled(p_labeled);
  std::uniform_int_distribution<Eigen::Index> any(0, ds.size() - 1);
  for (int b = 0; b < batch_size; ++b) {
    Eigen::Index idx;
    bool from_subset = labeled(rng) && !subset.indices.empty();
    if (from_subset) {
      std::uniform_int_distribution<size_t> pick(0, subset.indices.size() - 1);
      idx = subset.indices[pick(rng)];
    } else {
      idx = any(rng);
    }
    batch.indices[size_t(b)] = idx;
    batch.images.col(b) = ds.images.col(idx);
    if (from_subset) {
      for (int a = 0; a < attrs; ++a) {
        batch.labels(a, b) = ds.labels(a, idx);
        batch.mask(a, b) = ds.labels(a, idx) >= 0;
      }
    }
  }
  return batch;
}

LabeledBatch slice_batch(const Dataset& ds, Eigen::Index begin, Eigen::Index end) {
  end = std::min(end, ds.size());
  if (begin < 0 || begin > end) throw ArgumentError("slice_batch: bad range");
  LabeledBatch batch;
  batch.images = ds.images.middleCols(begin, end - begin);
  batch.labels = ds.labels.middleCols(begin, end - begin);
  batch.mask = (batch.labels.array() >= 0).matrix();
  for (Eigen::Index i = begin; i < end; ++i) batch.indices.push_back(i);
  return batch;
}

}  // namespace disrep
