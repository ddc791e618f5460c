#pragma once

#include <cmath>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "disrep/errors.hpp"
#include "disrep/types.hpp"

namespace disrep {

/// Layout of Z = (u, c): unstructured dims, categorical blocks, continuous dims.
/// Flattened order is always u, then each categorical block in order, then cont.
struct LatentSpec {
  int u_dim = 0;
  std::vector<int> cat_dims;
  int cont_dim = 0;

  int cat_total() const { return std::accumulate(cat_dims.begin(), cat_dims.end(), 0); }
  int total_dim() const { return u_dim + cat_total() + cont_dim; }
  int num_blocks() const { return static_cast<int>(cat_dims.size()); }

  /// Offset of categorical block `block` in the flattened vector.
  int cat_offset(int block) const {
    int off = u_dim;
    for (int i = 0; i < block; ++i) off += cat_dims[i];
    return off;
  }
  int cont_offset() const { return u_dim + cat_total(); }

  void validate() const {
    if (u_dim < 0 || cont_dim < 0) throw ArgumentError("latent: negative dimension");
    for (int k : cat_dims)
      if (k < 2) throw ArgumentError("latent: categorical cardinality must be >= 2");
  }

  bool operator==(const LatentSpec&) const = default;

  static LatentSpec mnist() { return {16, {10}, 2}; }
  static LatentSpec svhn() { return {128, {10, 5, 5, 5}, 4}; }
  static LatentSpec celeba() { return {128, {5, 2, 2, 2}, 4}; }
};

std::string to_string(const LatentSpec& spec);

template <typename Scalar>
struct LatentCode {
  Vec<Scalar> u;
  std::vector<Vec<Scalar>> cats;
  Vec<Scalar> cont;

  bool operator==(const LatentCode& o) const {
    if (u != o.u || cont != o.cont || cats.size() != o.cats.size()) return false;
    for (size_t i = 0; i < cats.size(); ++i)
      if (cats[i] != o.cats[i]) return false;
    return true;
  }
};

template <typename Scalar>
bool matches(const LatentCode<Scalar>& code, const LatentSpec& spec) {
  if (code.u.size() != spec.u_dim || code.cont.size() != spec.cont_dim) return false;
  if (code.cats.size() != spec.cat_dims.size()) return false;
  for (size_t i = 0; i < code.cats.size(); ++i)
    if (code.cats[i].size() != spec.cat_dims[i]) return false;
  return true;
}

/// True when every categorical block is non-negative and sums to 1 within `tol`.
template <typename Scalar>
bool is_simplex_valid(const LatentCode<Scalar>& code, double tol = 1e-6) {
  for (const auto& block : code.cats) {
    if ((block.array() < Scalar(0)).any()) return false;
    if (std::abs(static_cast<double>(block.sum()) - 1.0) > tol) return false;
  }
  return true;
}

template <typename Scalar>
LatentCode<Scalar> sample_code(const LatentSpec& spec, Rng& rng) {
  spec.validate();
  std::uniform_real_distribution<double> uniform(-1.0, 1.0);
  LatentCode<Scalar> code;
  code.u.resize(spec.u_dim);
  for (int i = 0; i < spec.u_dim; ++i) code.u[i] = static_cast<Scalar>(uniform(rng));
  for (int k : spec.cat_dims) {
    std::uniform_int_distribution<int> pick(0, k - 1);
    Vec<Scalar> block = Vec<Scalar>::Zero(k);
    block[pick(rng)] = Scalar(1);
    code.cats.push_back(std::move(block));
  }
  code.cont.resize(spec.cont_dim);
  for (int i = 0; i < spec.cont_dim; ++i) code.cont[i] = static_cast<Scalar>(uniform(rng));
  return code;
}

template <typename Scalar>
LatentCode<Scalar> set_category(LatentCode<Scalar> code, int block_index, int category) {
  if (block_index < 0 || block_index >= static_cast<int>(code.cats.size()))
    throw ArgumentError("set_category: block index " + std::to_string(block_index) + " out of range");
  auto& block = code.cats[block_index];
  if (category < 0 || category >= block.size())
    throw ArgumentError("set_category: category " + std::to_string(category) + " out of range");
  block.setZero();
  block[category] = Scalar(1);
  return code;
}

template <typename Scalar>
LatentCode<Scalar> interpolate(const LatentCode<Scalar>& a, const LatentCode<Scalar>& b, Scalar t) {
  bool same = a.u.size() == b.u.size() && a.cont.size() == b.cont.size() && a.cats.size() == b.cats.size();
  for (size_t i = 0; same && i < a.cats.size(); ++i) same = a.cats[i].size() == b.cats[i].size();
  if (!same) throw ArgumentError("interpolate: codes do not share a latent spec");

  const Scalar s = Scalar(1) - t;
  LatentCode<Scalar> out;
  out.u = s * a.u + t * b.u;
  out.cont = s * a.cont + t * b.cont;
  for (size_t i = 0; i < a.cats.size(); ++i) out.cats.push_back(s * a.cats[i] + t * b.cats[i]);
  return out;
}

template <typename Scalar>
Vec<Scalar> flatten(const LatentCode<Scalar>& code) {
  Eigen::Index n = code.u.size() + code.cont.size();
  for (const auto& c : code.cats) n += c.size();
  Vec<Scalar> out(n);
  Eigen::Index pos = 0;
  out.segment(pos, code.u.size()) = code.u;
  pos += code.u.size();
  for (const auto& c : code.cats) {
    out.segment(pos, c.size()) = c;
    pos += c.size();
  }
  out.segment(pos, code.cont.size()) = code.cont;
  return out;
}

template <typename Scalar, typename Derived>
LatentCode<Scalar> unflatten(const LatentSpec& spec, const Eigen::MatrixBase<Derived>& v) {
  if (v.size() != spec.total_dim())
    throw ArgumentError("unflatten: length " + std::to_string(v.size()) + " != total_dim " +
                        std::to_string(spec.total_dim()));
  LatentCode<Scalar> code;
  code.u = v.segment(0, spec.u_dim).template cast<Scalar>();
  for (int b = 0; b < spec.num_blocks(); ++b)
    code.cats.push_back(v.segment(spec.cat_offset(b), spec.cat_dims[b]).template cast<Scalar>());
  code.cont = v.segment(spec.cont_offset(), spec.cont_dim).template cast<Scalar>();
  return code;
}

/// Stacks flattened codes column-wise into a (total_dim x batch) matrix.
template <typename Scalar>
Mat<Scalar> stack_codes(const std::vector<LatentCode<Scalar>>& codes) {
  if (codes.empty()) return {};
  Mat<Scalar> out(flatten(codes.front()).size(), static_cast<Eigen::Index>(codes.size()));
  for (size_t i = 0; i < codes.size(); ++i) out.col(static_cast<Eigen::Index>(i)) = flatten(codes[i]);
  return out;
}

template <typename Scalar>
Mat<Scalar> sample_code_batch(const LatentSpec& spec, int batch, Rng& rng) {
  Mat<Scalar> out(spec.total_dim(), batch);
  for (int i = 0; i < batch; ++i) out.col(i) = flatten(sample_code<Scalar>(spec, rng));
  return out;
}

/// Overwrites categorical block `block` of every column with the one-hot of `category`.
template <typename Scalar>
void set_category_batch(const LatentSpec& spec, Mat<Scalar>& codes, int block, int category) {
  if (block < 0 || block >= spec.num_blocks()) throw ArgumentError("set_category: block out of range");
  if (category < 0 || category >= spec.cat_dims[block]) throw ArgumentError("set_category: category out of range");
  auto rows = codes.middleRows(spec.cat_offset(block), spec.cat_dims[block]);
  rows.setZero();
  rows.row(category).setOnes();
}

}  // namespace disrep
