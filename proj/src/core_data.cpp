#include "interlasso/core_data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <numbers>
#include <ostream>
#include <string_view>

#include <fmt/format.h>

namespace interlasso {

CovariateMatrix::CovariateMatrix(std::size_t n, std::vector<SparseVector> columns)
    : n_(n), columns_(std::move(columns)) {
  std::vector<std::size_t> row_count(n_ + 1, 0);
  for (std::size_t k = 0; k < columns_.size(); ++k) {
    const auto& col = columns_[k];
    for (std::size_t e = 0; e < col.size(); ++e) {
      const Entry& entry = col[e];
      if (entry.index >= n_)
        throw DataError(fmt::format("column {}: instance index {} out of range", k + 1, entry.index));
      if (e > 0 && col[e - 1].index >= entry.index)
        throw DataError(fmt::format("column {}: instance indices not strictly increasing", k + 1));
      if (!(entry.value > 0.0 && entry.value <= 1.0))
        throw DataError(fmt::format("column {}: value {} outside (0,1]", k + 1, entry.value));
      if (entry.value != 1.0) is_binary_ = false;
      ++row_count[entry.index + 1];
    }
    nnz_ += col.size();
  }
  row_start_.assign(n_ + 1, 0);
  for (std::size_t i = 0; i < n_; ++i) row_start_[i + 1] = row_start_[i] + row_count[i + 1];
  row_entries_.resize(nnz_);
  std::vector<std::size_t> cursor(row_start_.begin(), row_start_.end() - 1);
  // Columns are visited in increasing k, so every row comes out sorted.
  for (std::size_t k = 0; k < columns_.size(); ++k)
    for (const Entry& entry : columns_[k])
      row_entries_[cursor[entry.index]++] = {static_cast<std::uint32_t>(k), entry.value};
}

ResponseVector::ResponseVector(std::vector<double> values) : values_(std::move(values)) {
  for (std::size_t i = 0; i < values_.size(); ++i)
    if (!std::isfinite(values_[i])) throw DataError(fmt::format("response {} is not finite", i));
}

Dataset::Dataset(CovariateMatrix z_in, ResponseVector y_in) : z(std::move(z_in)), y(std::move(y_in)) {
  if (y.size() != z.n())
    throw DataError(fmt::format("response length {} does not match instance count {}", y.size(), z.n()));
}

void ProblemConfig::validate() const {
  if (order < 1) throw std::invalid_argument("order must be >= 1");
  if (!(lambda_min_ratio > 0.0 && lambda_min_ratio < 1.0))
    throw std::invalid_argument("lambda_min_ratio must lie in (0,1)");
  if (!(lambda_decay > 0.0 && lambda_decay < 1.0))
    throw std::invalid_argument("lambda_decay must lie in (0,1)");
  if (!(tol > 0.0)) throw std::invalid_argument("tol must be > 0");
  if (delta && !(*delta > 0.0)) throw std::invalid_argument("delta must be > 0");
  if (max_sweeps_factor == 0) throw std::invalid_argument("max_sweeps_factor must be > 0");
}

DenseMatrix RawLibsvm::to_dense() const {
  DenseMatrix m(rows.size(), d);
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (auto [k, v] : rows[i]) m.at(i, k) = v;
  return m;
}

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <class T>
bool parse_number(std::string_view token, T& out) {
  if (!token.empty() && token.front() == '+') token.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), out);
  return ec == std::errc() && ptr == token.data() + token.size();
}

}  // namespace

RawLibsvm read_libsvm(std::istream& in) {
  RawLibsvm raw;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view rest = trim(line);
    if (rest.empty()) continue;
    auto next_token = [&rest]() {
      const auto end = rest.find_first_of(" \t");
      std::string_view tok = rest.substr(0, end);
      rest = end == std::string_view::npos ? std::string_view{} : trim(rest.substr(end));
      return tok;
    };
    const auto fail = [line_no](std::string_view what) {
      return DataError(fmt::format("line {}: {}", line_no, what));
    };

    double label = 0.0;
    if (!parse_number(next_token(), label) || !std::isfinite(label)) throw fail("malformed label");
    std::vector<std::pair<std::uint32_t, double>> row;
    std::uint32_t previous = 0;
    while (!rest.empty()) {
      const std::string_view tok = next_token();
      const auto colon = tok.find(':');
      if (colon == std::string_view::npos) throw fail(fmt::format("malformed feature '{}'", tok));
      std::uint32_t index = 0;
      double value = 0.0;
      if (!parse_number(tok.substr(0, colon), index) || index == 0)
        throw fail(fmt::format("malformed feature index in '{}'", tok));
      if (!parse_number(tok.substr(colon + 1), value) || !std::isfinite(value))
        throw fail(fmt::format("malformed feature value in '{}'", tok));
      if (index <= previous) throw fail("feature indices must be strictly increasing");
      previous = index;
      row.emplace_back(index - 1, value);
      raw.d = std::max<std::size_t>(raw.d, index);
    }
    raw.labels.push_back(label);
    raw.rows.push_back(std::move(row));
  }
  if (raw.rows.empty()) throw DataError("no instances");
  return raw;
}

Dataset load_libsvm(std::istream& in) {
  const RawLibsvm raw = read_libsvm(in);
  std::vector<SparseVector> columns(raw.d);
  for (std::size_t i = 0; i < raw.rows.size(); ++i) {
    for (auto [k, v] : raw.rows[i]) {
      if (v < 0.0 || v > 1.0)
        throw DataError(fmt::format(
            "instance {}, covariate {}: value {} outside [0,1] (binarize continuous inputs)", i + 1,
            k + 1, v));
      if (v == 0.0) continue;
      columns[k].push_back({static_cast<std::uint32_t>(i), v});
    }
  }
  return Dataset(CovariateMatrix(raw.rows.size(), std::move(columns)), ResponseVector(raw.labels));
}

void write_libsvm(std::ostream& out, const Dataset& data) {
  const auto& z = data.z;
  for (std::size_t i = 0; i < z.n(); ++i) {
    std::string line = fmt::format("{:.17g}", data.y[i]);
    for (const Entry& e : z.row(i)) line += fmt::format(" {}:{:.17g}", e.index + 1, e.value);
    line += '\n';
    out << line;
  }
}

CovariateMatrix binarize(const DenseMatrix& raw, double delta) {
  if (!(delta > 0.0)) throw std::invalid_argument("delta must be > 0");
  const std::size_t n = raw.rows;
  std::vector<SparseVector> columns(2 * raw.cols);
  for (std::size_t k = 0; k < raw.cols; ++k) {
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double v = raw.at(i, k);
      if (!std::isfinite(v))
        throw DataError(fmt::format("instance {}, covariate {}: value is not finite", i + 1, k + 1));
      mean += v;
    }
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) var += (raw.at(i, k) - mean) * (raw.at(i, k) - mean);
    var /= static_cast<double>(n);
    bool constant = true;
    for (std::size_t i = 1; i < n && constant; ++i) constant = raw.at(i, k) == raw.at(0, k);
    if (constant || !(var > 0.0)) continue;
    const double sd = std::sqrt(var);
    for (std::size_t i = 0; i < n; ++i) {
      const double s = (raw.at(i, k) - mean) / sd;
      if (s > delta) columns[2 * k].push_back({static_cast<std::uint32_t>(i), 1.0});
      if (s < -delta) columns[2 * k + 1].push_back({static_cast<std::uint32_t>(i), 1.0});
    }
  }
  return CovariateMatrix(n, std::move(columns));
}

ResponseVector standardize_response(std::span<const double> y) {
  if (y.size() < 2) throw DataError("degenerate response: need at least two instances");
  if (std::all_of(y.begin(), y.end(), [&](double v) { return v == y.front(); }))
    throw DataError("degenerate response");
  const double n = static_cast<double>(y.size());
  double mean = 0.0;
  for (double v : y) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : y) var += (v - mean) * (v - mean);
  var /= n;
  const double sd = std::sqrt(var);
  std::vector<double> out(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) out[i] = (y[i] - mean) / sd;
  return ResponseVector(std::move(out));
}

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace

Rng::Rng(std::uint64_t seed) {
  for (auto& s : s_) s = splitmix64(seed);
}

std::uint64_t Rng::next() {
  const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double Rng::uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

double Rng::normal() {
  const double u1 = 1.0 - uniform();  // (0,1]
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

Dataset synth_generate(std::size_t n, std::size_t d, double sparsity, double sigma,
                       std::uint64_t seed) {
  if (!(sparsity >= 0.0 && sparsity <= 1.0)) throw std::invalid_argument("sparsity must lie in [0,1]");
  if (!(sigma >= 0.0)) throw std::invalid_argument("sigma must be >= 0");
  Rng rng(seed);
  const double density = 1.0 - sparsity;
  std::vector<SparseVector> columns(d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < d; ++k)
      if (rng.uniform() < density) columns[k].push_back({static_cast<std::uint32_t>(i), 1.0});
  std::vector<double> y(n);
  for (auto& v : y) v = sigma * rng.normal();
  return Dataset(CovariateMatrix(n, std::move(columns)), ResponseVector(std::move(y)));
}

}  // namespace interlasso
