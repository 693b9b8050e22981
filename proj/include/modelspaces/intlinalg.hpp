#pragma once

// Exact integer linear algebra: Smith normal form, integer kernels, and
// mod-m solving.  Everything here is exact; arithmetic overflow throws
// instead of silently wrapping.

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

namespace msp {

inline long long checked_add(long long a, long long b) {
  long long r;
  if (__builtin_add_overflow(a, b, &r)) throw std::overflow_error("integer overflow (add)");
  return r;
}

inline long long checked_mul(long long a, long long b) {
  long long r;
  if (__builtin_mul_overflow(a, b, &r)) throw std::overflow_error("integer overflow (mul)");
  return r;
}

struct IMat {
  int rows = 0;
  int cols = 0;
  std::vector<long long> a;

  IMat() = default;
  IMat(int r, int c) : rows(r), cols(c), a(static_cast<std::size_t>(r) * c, 0) {}

  static IMat identity(int n) {
    IMat m(n, n);
    for (int i = 0; i < n; ++i) m.at(i, i) = 1;
    return m;
  }

  long long& at(int i, int j) { return a[static_cast<std::size_t>(i) * cols + j]; }
  long long at(int i, int j) const { return a[static_cast<std::size_t>(i) * cols + j]; }

  void swap_rows(int i, int j) {
    if (i == j) return;
    for (int c = 0; c < cols; ++c) std::swap(at(i, c), at(j, c));
  }
  void swap_cols(int i, int j) {
    if (i == j) return;
    for (int r = 0; r < rows; ++r) std::swap(at(r, i), at(r, j));
  }
  // row_i += q * row_j
  void add_row(int i, int j, long long q) {
    if (q == 0) return;
    for (int c = 0; c < cols; ++c) at(i, c) = checked_add(at(i, c), checked_mul(q, at(j, c)));
  }
  // col_i += q * col_j
  void add_col(int i, int j, long long q) {
    if (q == 0) return;
    for (int r = 0; r < rows; ++r) at(r, i) = checked_add(at(r, i), checked_mul(q, at(r, j)));
  }
  void negate_row(int i) {
    for (int c = 0; c < cols; ++c) at(i, c) = -at(i, c);
  }
  void negate_col(int j) {
    for (int r = 0; r < rows; ++r) at(r, j) = -at(r, j);
  }
};

struct SnfResult {
  IMat s;                    // the diagonal form, s = u * input * v
  IMat u, uinv;              // row operations (tracked on demand)
  IMat v;                    // column operations
  int rank = 0;
  std::vector<long long> diag;  // nonzero diagonal entries d_1 | d_2 | ...
};

struct SnfOptions {
  bool need_u = false;
  bool need_uinv = false;
  bool need_v = false;
};

// Smith normal form over the integers with smallest-pivot selection.
inline SnfResult smith_normal_form(IMat m, SnfOptions opt = {}) {
  SnfResult res;
  const int R = m.rows, C = m.cols;
  if (opt.need_u) res.u = IMat::identity(R);
  if (opt.need_uinv) res.uinv = IMat::identity(R);
  if (opt.need_v) res.v = IMat::identity(C);

  auto row_op = [&](int i, int j, long long q) {
    m.add_row(i, j, q);
    if (opt.need_u) res.u.add_row(i, j, q);
    if (opt.need_uinv) res.uinv.add_col(j, i, -q);  // inverse op appended on the right
  };
  auto col_op = [&](int i, int j, long long q) {
    m.add_col(i, j, q);
    if (opt.need_v) res.v.add_col(i, j, q);
  };
  auto swap_r = [&](int i, int j) {
    if (i == j) return;
    m.swap_rows(i, j);
    if (opt.need_u) res.u.swap_rows(i, j);
    if (opt.need_uinv) res.uinv.swap_cols(i, j);
  };
  auto swap_c = [&](int i, int j) {
    if (i == j) return;
    m.swap_cols(i, j);
    if (opt.need_v) res.v.swap_cols(i, j);
  };
  auto negate_r = [&](int i) {
    m.negate_row(i);
    if (opt.need_u) res.u.negate_row(i);
    if (opt.need_uinv) res.uinv.negate_col(i);
  };

  int t = 0;
  while (t < R && t < C) {
    // Locate the smallest-magnitude nonzero entry in the trailing submatrix.
    int pi = -1, pj = -1;
    long long best = 0;
    for (int i = t; i < R; ++i)
      for (int j = t; j < C; ++j) {
        long long x = std::llabs(m.at(i, j));
        if (x != 0 && (pi < 0 || x < best)) {
          best = x;
          pi = i;
          pj = j;
        }
      }
    if (pi < 0) break;  // submatrix is zero
    swap_r(t, pi);
    swap_c(t, pj);
    if (m.at(t, t) < 0) negate_r(t);

    bool clean = false;
    while (!clean) {
      clean = true;
      long long p = m.at(t, t);
      for (int i = t + 1; i < R; ++i) {
        long long q = m.at(i, t) / p;
        if (q != 0) row_op(i, t, -q);
        if (m.at(i, t) != 0) {
          swap_r(t, i);  // remainder is strictly smaller, repeat
          if (m.at(t, t) < 0) negate_r(t);
          clean = false;
          break;
        }
      }
      if (!clean) continue;
      for (int j = t + 1; j < C; ++j) {
        long long q = m.at(t, j) / p;
        if (q != 0) col_op(j, t, -q);
        if (m.at(t, j) != 0) {
          swap_c(t, j);
          clean = false;
          break;
        }
      }
      if (!clean) continue;
      // Divisibility: fold in any entry the pivot does not divide.
      p = m.at(t, t);
      for (int i = t + 1; i < R && clean; ++i)
        for (int j = t + 1; j < C && clean; ++j)
          if (m.at(i, j) % p != 0) {
            row_op(t, i, 1);
            clean = false;
          }
    }
    ++t;
  }
  res.rank = t;
  res.diag.reserve(t);
  for (int i = 0; i < t; ++i) res.diag.push_back(m.at(i, i));
  res.s = std::move(m);
  return res;
}

// Basis of {x : m x = 0} over the integers: the kernel columns of v.
inline std::vector<std::vector<long long>> integer_kernel_basis(const IMat& m) {
  SnfResult snf = smith_normal_form(m, SnfOptions{.need_v = true});
  std::vector<std::vector<long long>> basis;
  for (int j = snf.rank; j < m.cols; ++j) {
    std::vector<long long> col(m.cols);
    for (int i = 0; i < m.cols; ++i) col[i] = snf.v.at(i, j);
    basis.push_back(std::move(col));
  }
  return basis;
}

inline long long mod_reduce(long long x, long long mod) {
  long long r = x % mod;
  return r < 0 ? r + mod : r;
}

// Generators, as columns, of {x in (Z/mod)^cols : m x = 0 (mod mod)}.
// Computed from the Smith form of m with the modulus folded in afterward.
inline std::vector<std::vector<std::uint32_t>> kernel_mod(const IMat& m, long long mod) {
  IMat mm = m;
  for (auto& x : mm.a) x = mod_reduce(x, mod);
  SnfResult snf = smith_normal_form(mm, SnfOptions{.need_v = true});
  std::vector<std::vector<std::uint32_t>> gens;
  auto take_col = [&](int j, long long scale) {
    std::vector<std::uint32_t> col(static_cast<std::size_t>(m.cols));
    bool nonzero = false;
    for (int i = 0; i < m.cols; ++i) {
      long long val = mod_reduce(checked_mul(snf.v.at(i, j), scale), mod);
      col[static_cast<std::size_t>(i)] = static_cast<std::uint32_t>(val);
      nonzero |= (val != 0);
    }
    if (nonzero) gens.push_back(std::move(col));
  };
  for (int i = 0; i < snf.rank; ++i) {
    long long g = std::gcd(snf.diag[i], mod);
    if (g == mod) take_col(i, 1);       // d_i = 0 mod m: column itself is free
    else if (mod / g > 1) take_col(i, mod / g);
  }
  for (int j = snf.rank; j < m.cols; ++j) take_col(j, 1);
  return gens;
}

// Invariant factors gcd(d_i, mod) of the mod-m kernel: |kernel| =
// prod gcd(d_i,mod) * mod^(cols-rank).  Returns log_mod of the kernel size.
inline double kernel_mod_log_size(const IMat& m, long long mod) {
  IMat mm = m;
  for (auto& x : mm.a) x = mod_reduce(x, mod);
  SnfResult snf = smith_normal_form(mm);
  double logm = static_cast<double>(m.cols - snf.rank);
  for (long long d : snf.diag) {
    long long g = std::gcd(d, mod);
    if (g > 1) logm += std::log(static_cast<double>(g)) / std::log(static_cast<double>(mod));
  }
  return logm;
}

inline long long mod_inverse(long long a, long long mod) {
  long long t = 0, nt = 1, r = mod, nr = mod_reduce(a, mod);
  while (nr != 0) {
    long long q = r / nr;
    std::swap(t -= q * nt, nt);
    std::swap(r -= q * nr, nr);
  }
  if (r != 1) throw std::invalid_argument("mod_inverse: not invertible");
  return mod_reduce(t, mod);
}

// Factored solver for repeated systems m x = b (mod mod) with a fixed m.
class ModSolver {
 public:
  ModSolver() = default;
  ModSolver(IMat m, long long mod) : rows_(m.rows), cols_(m.cols), mod_(mod) {
    for (auto& x : m.a) x = mod_reduce(x, mod);
    snf_ = smith_normal_form(std::move(m), SnfOptions{.need_u = true, .need_v = true});
  }

  std::optional<std::vector<std::uint32_t>> solve(const std::vector<std::uint32_t>& b) const {
    if (static_cast<int>(b.size()) != rows_) throw std::invalid_argument("ModSolver: size mismatch");
    std::vector<long long> c(static_cast<std::size_t>(rows_), 0);
    for (int i = 0; i < rows_; ++i) {
      long long acc = 0;
      for (int j = 0; j < rows_; ++j)
        acc = mod_reduce(acc + mod_reduce(snf_.u.at(i, j), mod_) * b[static_cast<std::size_t>(j)], mod_);
      c[static_cast<std::size_t>(i)] = acc;
    }
    std::vector<long long> y(static_cast<std::size_t>(cols_), 0);
    for (int i = 0; i < rows_; ++i) {
      long long ci = c[static_cast<std::size_t>(i)];
      if (i < snf_.rank) {
        long long d = mod_reduce(snf_.diag[static_cast<std::size_t>(i)], mod_);
        if (d == 0) {
          if (ci != 0) return std::nullopt;
          continue;
        }
        long long g = std::gcd(d, mod_);
        if (ci % g != 0) return std::nullopt;
        long long mg = mod_ / g;
        y[static_cast<std::size_t>(i)] = mod_reduce((ci / g) * mod_inverse(d / g, mg), mg);
      } else if (ci != 0) {
        return std::nullopt;
      }
    }
    std::vector<std::uint32_t> x(static_cast<std::size_t>(cols_), 0);
    for (int i = 0; i < cols_; ++i) {
      long long acc = 0;
      for (int j = 0; j < cols_; ++j)
        acc = mod_reduce(acc + mod_reduce(snf_.v.at(i, j), mod_) * y[static_cast<std::size_t>(j)], mod_);
      x[static_cast<std::size_t>(i)] = static_cast<std::uint32_t>(acc);
    }
    return x;
  }

 private:
  int rows_ = 0, cols_ = 0;
  long long mod_ = 2;
  SnfResult snf_;
};

// Solve m x = b (mod mod).  Returns one solution or nullopt.
inline std::optional<std::vector<std::uint32_t>> solve_mod(const IMat& m, const std::vector<std::uint32_t>& b,
                                                           long long mod) {
  return ModSolver(m, mod).solve(b);
}

}  // namespace msp
