#include "interlasso/min_norm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <stdexcept>

#include "interlasso/core_data.hpp"

namespace interlasso {

namespace {

using Matrix = std::vector<std::vector<double>>;

bool entries_less(const SparseVector& a, const SparseVector& b) {
  return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end(), [](const Entry& l, const Entry& r) {
    return l.index != r.index ? l.index < r.index : l.value < r.value;
  });
}

double dot(std::span<const Entry> x, std::span<const double> v) {
  double s = 0.0;
  for (const Entry& e : x) s += e.value * v[e.index];
  return s;
}

// Solves the square system a x = b by Gaussian elimination with partial
// pivoting; nullopt when a pivot vanishes.
std::optional<std::vector<double>> solve_square(Matrix a, std::vector<double> b) {
  const std::size_t n = b.size();
  double scale = 0.0;
  for (const auto& row : a)
    for (double v : row) scale = std::max(scale, std::abs(v));
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t p = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::abs(a[r][c]) > std::abs(a[p][c])) p = r;
    if (std::abs(a[p][c]) <= 1e-14 * scale) return std::nullopt;
    std::swap(a[p], a[c]);
    std::swap(b[p], b[c]);
    for (std::size_t r = c + 1; r < n; ++r) {
      const double f = a[r][c] / a[c][c];
      if (f == 0.0) continue;
      for (std::size_t k = c; k < n; ++k) a[r][k] -= f * a[c][k];
      b[r] -= f * b[c];
    }
  }
  std::vector<double> x(n);
  for (std::size_t c = n; c-- > 0;) {
    double s = b[c];
    for (std::size_t k = c + 1; k < n; ++k) s -= a[c][k] * x[k];
    x[c] = s / a[c][c];
  }
  return x;
}

// Least squares over the columns flagged in `passive`, via the normal equations.
std::vector<double> passive_least_squares(const Matrix& columns, std::span<const double> f,
                                          const std::vector<bool>& passive) {
  std::vector<std::size_t> idx;
  for (std::size_t j = 0; j < columns.size(); ++j)
    if (passive[j]) idx.push_back(j);
  Matrix normal(idx.size(), std::vector<double>(idx.size()));
  std::vector<double> rhs(idx.size());
  for (std::size_t a = 0; a < idx.size(); ++a) {
    const auto& ca = columns[idx[a]];
    rhs[a] = std::inner_product(ca.begin(), ca.end(), f.begin(), 0.0);
    for (std::size_t b = 0; b <= a; ++b) {
      const auto& cb = columns[idx[b]];
      normal[a][b] = normal[b][a] = std::inner_product(ca.begin(), ca.end(), cb.begin(), 0.0);
    }
  }
  std::vector<double> z(columns.size(), 0.0);
  if (const auto x = solve_square(std::move(normal), std::move(rhs)))
    for (std::size_t a = 0; a < idx.size(); ++a) z[idx[a]] = (*x)[a];
  return z;
}

// Null-space basis of the Gram matrix k (orthonormal columns, possibly none),
// found by Cholesky with symmetric pivoting. Only the lower triangle is used.
Matrix null_space(Matrix a) {
  const std::size_t n = a.size();
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  double top = 0.0;
  for (std::size_t i = 0; i < n; ++i) top = std::max(top, a[i][i]);
  const double floor = 1e-10 * top;
  // Symmetric swap of rows/columns p and q (p < q) within the lower triangle.
  const auto swap_sym = [&](std::size_t p, std::size_t q) {
    for (std::size_t j = 0; j < p; ++j) std::swap(a[p][j], a[q][j]);
    for (std::size_t j = p + 1; j < q; ++j) std::swap(a[j][p], a[q][j]);
    for (std::size_t i = q + 1; i < n; ++i) std::swap(a[i][p], a[i][q]);
    std::swap(a[p][p], a[q][q]);
  };
  std::vector<double> col(n);
  std::size_t rank = 0;
  for (; rank < n; ++rank) {
    std::size_t p = rank;
    for (std::size_t i = rank + 1; i < n; ++i)
      if (a[i][i] > a[p][p]) p = i;
    if (a[p][p] <= floor) break;
    if (p != rank) {
      swap_sym(rank, p);
      std::swap(perm[p], perm[rank]);
    }
    const double pivot = std::sqrt(a[rank][rank]);
    a[rank][rank] = pivot;
    for (std::size_t i = rank + 1; i < n; ++i) col[i] = a[i][rank] /= pivot;
    for (std::size_t i = rank + 1; i < n; ++i) {
      const double li = col[i];
      if (li == 0.0) continue;
      double* row = a[i].data();
      for (std::size_t j = rank + 1; j <= i; ++j) row[j] -= li * col[j];
    }
  }
  if (rank == n) return {};

  // Each dependent column d gives v with v_d = 1 and v_I = -L11^{-T} l_d.
  Matrix basis;
  for (std::size_t d = rank; d < n; ++d) {
    std::vector<double> c(rank);
    for (std::size_t i = rank; i-- > 0;) {
      double s = a[d][i];
      for (std::size_t j = i + 1; j < rank; ++j) s -= a[j][i] * c[j];
      c[i] = s / a[i][i];
    }
    std::vector<double> v(n, 0.0);
    v[perm[d]] = 1.0;
    for (std::size_t i = 0; i < rank; ++i) v[perm[i]] = -c[i];
    // Modified Gram-Schmidt, twice for orthogonality.
    for (int pass = 0; pass < 2; ++pass)
      for (const auto& q : basis) {
        const double proj = std::inner_product(q.begin(), q.end(), v.begin(), 0.0);
        for (std::size_t i = 0; i < n; ++i) v[i] -= proj * q[i];
      }
    const double norm = std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
    if (norm <= 1e-10) continue;
    for (double& x : v) x /= norm;
    basis.push_back(std::move(v));
  }
  return basis;
}

}  // namespace

std::vector<double> nnls(const std::vector<std::vector<double>>& columns, std::span<const double> f) {
  const std::size_t p = columns.size();
  const std::size_t m = f.size();
  std::vector<double> w(p, 0.0);
  std::vector<bool> passive(p, false), blocked(p, false);
  constexpr double kTol = 1e-12;
  for (std::size_t iter = 0; iter < 3 * p + 3; ++iter) {
    std::vector<double> r(f.begin(), f.end());
    for (std::size_t j = 0; j < p; ++j)
      if (w[j] != 0.0)
        for (std::size_t i = 0; i < m; ++i) r[i] -= w[j] * columns[j][i];
    std::size_t best = p;
    double best_g = kTol;
    for (std::size_t j = 0; j < p; ++j) {
      if (passive[j] || blocked[j]) continue;
      const double g = std::inner_product(columns[j].begin(), columns[j].end(), r.begin(), 0.0);
      if (g > best_g) {
        best_g = g;
        best = j;
      }
    }
    if (best == p) break;
    passive[best] = true;
    for (std::size_t inner = 0; inner <= p; ++inner) {
      const std::vector<double> z = passive_least_squares(columns, f, passive);
      if (inner == 0 && z[best] <= 0.0) {
        // Rounding made the entering column useless; never retry it.
        passive[best] = false;
        blocked[best] = true;
        break;
      }
      double alpha = 1.0;
      for (std::size_t j = 0; j < p; ++j)
        if (passive[j] && z[j] <= 0.0) alpha = std::min(alpha, w[j] / (w[j] - z[j]));
      for (std::size_t j = 0; j < p; ++j)
        if (passive[j]) w[j] += alpha * (z[j] - w[j]);
      if (alpha >= 1.0) break;
      for (std::size_t j = 0; j < p; ++j)
        if (passive[j] && w[j] <= kTol * kTol) {
          passive[j] = false;
          w[j] = 0.0;
        }
    }
  }
  return w;
}

SparseSolution min_norm_solution(const SparseSolution& solution, std::span<const SparseFeature> candidates,
                                 std::span<const double> y, double tie_tol) {
  if (solution.empty()) return solution;
  const double lambda = solution.lambda;

  // Residual from the support columns.
  std::vector<const SparseFeature*> by_itemset;
  by_itemset.reserve(candidates.size());
  for (const auto& f : candidates) by_itemset.push_back(&f);
  std::sort(by_itemset.begin(), by_itemset.end(),
            [](const SparseFeature* a, const SparseFeature* b) { return a->itemset < b->itemset; });
  auto find = [&](const Itemset& s) -> const SparseFeature* {
    auto it = std::lower_bound(by_itemset.begin(), by_itemset.end(), s,
                               [](const SparseFeature* f, const Itemset& k) { return f->itemset < k; });
    return it != by_itemset.end() && (*it)->itemset == s ? *it : nullptr;
  };
  std::vector<double> r(y.begin(), y.end());
  for (const auto& [itemset, coef] : solution.coefficients) {
    const SparseFeature* f = find(itemset);
    if (!f) throw std::invalid_argument("support feature " + itemset.to_string() + " is not a candidate");
    for (const Entry& e : f->entries) r[e.index] -= coef * e.value;
  }

  // Tied set, with signs, grouped by identical columns.
  struct Member {
    const SparseFeature* feature;
    double sign;
    double gamma;  // sign * beta >= 0
  };
  std::vector<Member> tied;
  const SparseFeature* previous = nullptr;
  for (const SparseFeature* f : by_itemset) {
    if (previous && previous->itemset == f->itemset) continue;
    previous = f;
    if (f->entries.empty()) continue;
    const double g = dot(f->entries, r);
    auto it = solution.coefficients.find(f->itemset);
    const bool active = it != solution.coefficients.end() && it->second != 0.0;
    if (!active && std::abs(g) < lambda * (1.0 - tie_tol)) continue;
    const double sign = active ? (it->second > 0.0 ? 1.0 : -1.0) : (g > 0.0 ? 1.0 : -1.0);
    tied.push_back({f, sign, active ? std::abs(it->second) : 0.0});
  }
  std::stable_sort(tied.begin(), tied.end(), [](const Member& a, const Member& b) {
    return entries_less(a.feature->entries, b.feature->entries);
  });
  struct Group {
    std::size_t begin, end;
    double sign;
    double scaled;  // total gamma / sqrt(multiplicity)
  };
  std::vector<Group> groups;
  for (std::size_t i = 0; i < tied.size();) {
    std::size_t j = i;
    double total = 0.0;
    while (j < tied.size() && tied[j].feature->entries == tied[i].feature->entries) total += tied[j++].gamma;
    groups.push_back({i, j, tied[i].sign, total / std::sqrt(static_cast<double>(j - i))});
    i = j;
  }

  // Scaled columns b_g = sign_g sqrt(m_g) x_g; their Gram matrix decides uniqueness.
  const std::size_t u = groups.size();
  Matrix gram(u, std::vector<double>(u, 0.0));
  {
    std::vector<double> dense(y.size(), 0.0);
    for (std::size_t a = 0; a < u; ++a) {
      const auto& xa = tied[groups[a].begin].feature->entries;
      const double sa = groups[a].sign * std::sqrt(static_cast<double>(groups[a].end - groups[a].begin));
      for (const Entry& e : xa) dense[e.index] = sa * e.value;
      for (std::size_t b = 0; b <= a; ++b) {
        const auto& xb = tied[groups[b].begin].feature->entries;
        const double sb = groups[b].sign * std::sqrt(static_cast<double>(groups[b].end - groups[b].begin));
        gram[a][b] = sb * dot(xb, dense);
      }
      for (const Entry& e : xa) dense[e.index] = 0.0;
    }
  }
  std::vector<double> scaled(u);
  for (std::size_t g = 0; g < u; ++g) scaled[g] = groups[g].scaled;

  const Matrix q = null_space(std::move(gram));
  if (!q.empty()) {
    // Minimize |s + Q t| subject to s + Q t >= 0: with t0 = -Q^T s and
    // t = t0 + x this is the least-distance program |x| -> min, Q x >= h.
    const std::size_t k = q.size();
    std::vector<double> t0(k, 0.0);
    for (std::size_t c = 0; c < k; ++c)
      t0[c] = -std::inner_product(q[c].begin(), q[c].end(), scaled.begin(), 0.0);
    std::vector<std::vector<double>> columns(u, std::vector<double>(k + 1));
    for (std::size_t g = 0; g < u; ++g) {
      double qt0 = 0.0;
      for (std::size_t c = 0; c < k; ++c) {
        columns[g][c] = q[c][g];
        qt0 += q[c][g] * t0[c];
      }
      columns[g][k] = -scaled[g] - qt0;
    }
    std::vector<double> f(k + 1, 0.0);
    f[k] = 1.0;
    const std::vector<double> w = nnls(columns, f);
    std::vector<double> res(k + 1);
    for (std::size_t i = 0; i <= k; ++i) {
      double s = -f[i];
      for (std::size_t g = 0; g < u; ++g) s += columns[g][i] * w[g];
      res[i] = s;
    }
    // res[k] == 0 would mean the feasible set is empty, which the current
    // solution rules out; keep it in that case.
    if (std::abs(res[k]) > 1e-12) {
      std::vector<double> t(k);
      for (std::size_t c = 0; c < k; ++c) t[c] = t0[c] - res[c] / res[k];
      for (std::size_t g = 0; g < u; ++g) {
        double v = scaled[g];
        for (std::size_t c = 0; c < k; ++c) v += q[c][g] * t[c];
        scaled[g] = v;
      }
    }
  }

  double largest = 0.0;
  for (double v : scaled) largest = std::max(largest, v);
  SparseSolution out = solution;
  out.coefficients.clear();
  for (std::size_t g = 0; g < u; ++g) {
    if (scaled[g] <= 1e-13 * largest) continue;
    const double per_member = scaled[g] / std::sqrt(static_cast<double>(groups[g].end - groups[g].begin));
    for (std::size_t i = groups[g].begin; i < groups[g].end; ++i)
      out.coefficients[tied[i].feature->itemset] = groups[g].sign * per_member;
  }
  return out;
}

}  // namespace interlasso
