#include "interlasso/itemset.hpp"

#include <algorithm>
#include <stdexcept>

namespace interlasso {

Itemset::Itemset(std::vector<std::uint32_t> indices) : indices_(std::move(indices)) {
  if (indices_.empty()) throw std::invalid_argument("itemset must be nonempty");
  for (std::size_t i = 1; i < indices_.size(); ++i)
    if (indices_[i - 1] >= indices_[i])
      throw std::invalid_argument("itemset indices must be strictly increasing");
}

Itemset Itemset::with(std::uint32_t k) const {
  if (!indices_.empty() && k <= indices_.back())
    throw std::invalid_argument("extension index must exceed the last index");
  Itemset out;
  out.indices_.reserve(indices_.size() + 1);
  out.indices_ = indices_;
  out.indices_.push_back(k);
  return out;
}

bool Itemset::is_ancestor_of(const Itemset& other) const {
  return other.indices_.size() > indices_.size() &&
         std::equal(indices_.begin(), indices_.end(), other.indices_.begin());
}

std::string Itemset::to_string() const {
  std::string s = "{";
  for (std::size_t i = 0; i < indices_.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(indices_[i] + 1);
  }
  return s + "}";
}

double SparseFeature::norm_sq() const {
  double s = 0.0;
  for (const Entry& e : entries) s += e.value * e.value;
  return s;
}

double SparseFeature::dot(std::span<const double> v) const {
  double s = 0.0;
  for (const Entry& e : entries) s += v[e.index] * e.value;
  return s;
}

}  // namespace interlasso
