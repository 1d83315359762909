#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace interlasso {

/// Thrown for malformed or out-of-contract input data.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One stored nonzero of a sparse vector. In a column `index` is the instance,
/// in a row it is the covariate.
struct Entry {
  std::uint32_t index;
  double value;

  friend bool operator==(const Entry&, const Entry&) = default;
};

using SparseVector = std::vector<Entry>;

/// The n x d covariate matrix Z with values in [0,1], stored by column.
/// A row-major copy is kept alongside so children of a tree node can be
/// generated by scattering the node's support over rows.
class CovariateMatrix {
 public:
  CovariateMatrix() = default;

  /// Validates the columns: indices strictly increasing and < n, values in
  /// (0,1]. Throws DataError otherwise.
  CovariateMatrix(std::size_t n, std::vector<SparseVector> columns);

  std::size_t n() const { return n_; }
  std::size_t d() const { return columns_.size(); }
  bool is_binary() const { return is_binary_; }
  std::size_t nnz() const { return nnz_; }

  std::span<const Entry> column(std::size_t k) const { return columns_[k]; }
  std::span<const Entry> row(std::size_t i) const {
    return {row_entries_.data() + row_start_[i], row_entries_.data() + row_start_[i + 1]};
  }

  friend bool operator==(const CovariateMatrix& a, const CovariateMatrix& b) {
    return a.n_ == b.n_ && a.columns_ == b.columns_;
  }

 private:
  std::size_t n_ = 0;
  std::vector<SparseVector> columns_;
  std::vector<std::size_t> row_start_{0};
  std::vector<Entry> row_entries_;
  std::size_t nnz_ = 0;
  bool is_binary_ = true;
};

/// Response vector y; every entry finite.
class ResponseVector {
 public:
  ResponseVector() = default;
  explicit ResponseVector(std::vector<double> values);

  std::size_t size() const { return values_.size(); }
  std::span<const double> values() const { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }

  friend bool operator==(const ResponseVector&, const ResponseVector&) = default;

 private:
  std::vector<double> values_;
};

struct Dataset {
  CovariateMatrix z;
  ResponseVector y;

  Dataset() = default;
  /// Throws DataError when y.size() != z.n().
  Dataset(CovariateMatrix z, ResponseVector y);
};

/// Dense row-major real matrix, used only for raw continuous inputs that are
/// binarized before they reach the tree.
struct DenseMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  DenseMatrix() = default;
  DenseMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}
  double& at(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double at(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
};

enum class ScreenMode { kSfp, kNone };

/// Which form of the centre vector c the screening rules use. kDualCentered
/// is c = (1/lambda_t + 1/lambda_{t-1}) y - a; kRatioScaled multiplies a by
/// lambda_{t-1}/lambda_t.
enum class CenterVariant { kDualCentered, kRatioScaled };

/// Threshold used by the binary-covariate case selection.
enum class RefinementThreshold { kNormalized, kAsPrinted };

struct ProblemConfig {
  int order = 3;
  std::optional<double> delta;
  double lambda_decay = 0.1;
  double lambda_min_ratio = 0.01;
  double tol = 1e-6;
  ScreenMode screen_mode = ScreenMode::kSfp;
  bool binary_refinement = false;
  RefinementThreshold refinement_threshold = RefinementThreshold::kNormalized;
  CenterVariant center_variant = CenterVariant::kDualCentered;
  unsigned threads = 1;
  /// Sweep cap per solve is max_sweeps_factor * |features|.
  std::size_t max_sweeps_factor = 100;
  /// Keep each step's surviving itemsets in the PathResult (for validation).
  bool keep_supersets = false;

  /// Throws std::invalid_argument when an invariant is violated.
  void validate() const;
};

/// Raw libsvm content before range checks: sparse rows with arbitrary reals.
struct RawLibsvm {
  std::size_t d = 0;
  std::vector<double> labels;
  std::vector<std::vector<std::pair<std::uint32_t, double>>> rows;  // 0-based covariate

  DenseMatrix to_dense() const;
};

/// Parses "label idx:val ..." lines (1-based, strictly increasing indices).
RawLibsvm read_libsvm(std::istream& in);

/// Loads a libsvm file whose values must already lie in [0,1]; explicit zeros
/// are dropped.
Dataset load_libsvm(std::istream& in);

/// Writes `data` in libsvm format with 17 significant digits.
void write_libsvm(std::ostream& out, const Dataset& data);

/// Standardizes every column (mean 0, population variance 1) and maps it to
/// two binary columns (value > delta) and (value < -delta). Column 2k is the
/// upper indicator of raw covariate k, column 2k+1 the lower one.
CovariateMatrix binarize(const DenseMatrix& raw, double delta);

/// Shift to mean 0 and scale to population variance 1.
ResponseVector standardize_response(std::span<const double> y);

/// SplitMix64-seeded xoshiro256** generator. The bit stream and the derived
/// uniform/normal draws are fixed by this implementation, so synthetic data
/// replicate across platforms and standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);
  std::uint64_t next();
  /// Uniform on [0,1) with 53 random bits.
  double uniform();
  /// Standard normal via Box-Muller (one draw per call, no caching).
  double normal();

 private:
  std::uint64_t s_[4];
};

/// Binary Z with i.i.d. Bernoulli(1 - sparsity) entries (drawn row by row) and
/// y = N(0, sigma^2) noise.
Dataset synth_generate(std::size_t n, std::size_t d, double sparsity, double sigma,
                       std::uint64_t seed);

}  // namespace interlasso
