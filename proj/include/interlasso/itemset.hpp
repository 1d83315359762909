#pragma once

#include <compare>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "interlasso/core_data.hpp"

namespace interlasso {

/// A sorted set of 0-based covariate indices naming one interaction feature.
/// Ordering is lexicographic, which is also the depth-first visiting order of
/// the itemset tree.
class Itemset {
 public:
  Itemset() = default;
  /// Throws std::invalid_argument unless `indices` is nonempty and strictly increasing.
  explicit Itemset(std::vector<std::uint32_t> indices);
  Itemset(std::initializer_list<std::uint32_t> indices)
      : Itemset(std::vector<std::uint32_t>(indices)) {}

  std::size_t size() const { return indices_.size(); }
  bool empty() const { return indices_.empty(); }
  std::uint32_t back() const { return indices_.back(); }
  std::span<const std::uint32_t> indices() const { return indices_; }
  auto begin() const { return indices_.begin(); }
  auto end() const { return indices_.end(); }

  /// This itemset extended by a larger index.
  Itemset with(std::uint32_t k) const;
  /// True when `other` lies in this node's subtree (this is a proper prefix).
  bool is_ancestor_of(const Itemset& other) const;
  /// "{1,3}" using 1-based indices.
  std::string to_string() const;

  friend auto operator<=>(const Itemset&, const Itemset&) = default;
  friend bool operator==(const Itemset&, const Itemset&) = default;

 private:
  std::vector<std::uint32_t> indices_;
};

/// An interaction column x_j: its itemset plus the nonzero (instance, value)
/// pairs, sorted by instance.
struct SparseFeature {
  Itemset itemset;
  SparseVector entries;

  double norm_sq() const;
  double dot(std::span<const double> v) const;
  bool is_zero() const { return entries.empty(); }
};

}  // namespace interlasso
