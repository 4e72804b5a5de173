#pragma once

// Constructors for the example classes: scaled isometries, weighted cyclic
// shifts, truncated Fock models, twisted tensor pairs and block sums.

#include <cmath>
#include <complex>
#include <cstdint>
#include <random>
#include <vector>

#include "wold/repn.hpp"

namespace wold::gen {

using linalg::Complex;

/// Haar-like unitary from the QR factor of a seeded complex Gaussian matrix.
inline ComplexMatrix random_unitary(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  ComplexMatrix z(static_cast<Index>(n), static_cast<Index>(n));
  for (Index c = 0; c < z.cols(); ++c) {
    for (Index r = 0; r < z.rows(); ++r) z(r, c) = Complex(g(rng), g(rng));
  }
  Eigen::HouseholderQR<ComplexMatrix> qr(z);
  ComplexMatrix q = qr.householderQ() * linalg::identity(n);
  // pin the column phases so the factor is unique
  const ComplexMatrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Index c = 0; c < q.cols(); ++c) {
    const Complex diag = r(c, c);
    if (std::abs(diag) > 0.0) q.col(c) *= diag / std::abs(diag);
  }
  return q;
}

/// Random complex Gaussian matrix with unit operator norm.
inline ComplexMatrix random_unit_norm(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  ComplexMatrix z(static_cast<Index>(rows), static_cast<Index>(cols));
  for (Index c = 0; c < z.cols(); ++c) {
    for (Index r = 0; r < z.rows(); ++r) z(r, c) = Complex(g(rng), g(rng));
  }
  return z / linalg::op_norm(z);
}

/// Scalar algebra, Atilde = [U_1 ... U_d] / sqrt(d) with seeded unitaries
/// U_t on C^n: a unitary for d = 1, a row coisometry (Atilde Atilde^* = I)
/// otherwise.
inline CovariantRep unitary_rep(std::size_t n, std::uint64_t seed = 7, std::size_t d = 1) {
  if (n < 1 || d < 1) throw Error(ErrorCode::BadParams, "need n, d >= 1");
  CovariantRep rep;
  rep.K_dim = n;
  rep.E.dim = d;
  rep.atilde.resize(static_cast<Index>(n), static_cast<Index>(d * n));
  for (std::size_t t = 0; t < d; ++t) {
    rep.atilde.middleCols(static_cast<Index>(t * n), static_cast<Index>(n)) =
        random_unitary(n, seed + t) / std::sqrt(static_cast<double>(d));
  }
  return rep;
}

/// d = 1, scalar algebra, Atilde = t.
inline CovariantRep single_operator_rep(const ComplexMatrix& t) {
  CovariantRep rep;
  rep.K_dim = static_cast<std::size_t>(t.rows());
  rep.E.dim = 1;
  rep.atilde = t;
  validate(rep);
  return rep;
}

/// Nilpotent shift e_0 -> e_1 -> ... -> e_{n-1} -> 0.
inline ComplexMatrix nilpotent_shift(std::size_t n) {
  ComplexMatrix j = ComplexMatrix::Zero(static_cast<Index>(n), static_cast<Index>(n));
  for (Index p = 0; p + 1 < static_cast<Index>(n); ++p) j(p + 1, p) = 1.0;
  return j;
}

/// Cyclic permutation e_p -> e_{(p+1) mod n}.
inline ComplexMatrix cyclic_shift(std::size_t n) {
  ComplexMatrix c = ComplexMatrix::Zero(static_cast<Index>(n), static_cast<Index>(n));
  for (Index p = 0; p < static_cast<Index>(n); ++p) c((p + 1) % static_cast<Index>(n), p) = 1.0;
  return c;
}

/// Atilde' = beta Atilde and sigma' = beta sigma for an isometric base.
inline CovariantRep gen_scaled_isometry(const CovariantRep& base, double beta,
                                        const ToleranceConfig& tol = {}) {
  validate(base);
  if (!(beta > 0.0 && beta < 1.0)) throw Error(ErrorCode::BadParams, "beta must lie in (0,1)");
  const auto dn = static_cast<std::size_t>(base.atilde.cols());
  if (linalg::op_norm(base.atilde.adjoint() * base.atilde - linalg::identity(dn)) > tol.eq_tol) {
    throw Error(ErrorCode::NotIsometric, "base representation is not isometric");
  }
  CovariantRep out = base;
  out.atilde *= beta;
  for (auto& s : out.sigma) s *= beta;
  return out;
}

/// Finite cyclic surrogate of a weighted multi-shift: n directions on C^N,
/// A(delta_i) e_m = w(i,m) e_{(i + n m) mod N} with directions counted from 1.
inline CovariantRep gen_weighted_cyclic_shift(std::size_t n, std::size_t N, const ComplexMatrix& weights) {
  if (n < 1 || N < n) throw Error(ErrorCode::BadParams, "need N >= n >= 1");
  if (weights.rows() != static_cast<Index>(n) || weights.cols() != static_cast<Index>(N)) {
    throw Error(ErrorCode::DimensionMismatch, "weights must be n x N");
  }
  linalg::require_finite(weights, "weights");
  if (weights.cwiseAbs().maxCoeff() > 1.0) throw Error(ErrorCode::BadWeights, "a weight exceeds 1 in modulus");
  CovariantRep rep;
  rep.K_dim = N;
  rep.E.dim = n;
  rep.atilde = ComplexMatrix::Zero(static_cast<Index>(N), static_cast<Index>(n * N));
  for (std::size_t t = 0; t < n; ++t) {
    for (std::size_t m = 0; m < N; ++m) {
      const std::size_t target = (t + 1 + n * m) % N;
      rep.atilde(static_cast<Index>(target), static_cast<Index>(t * N + m)) =
          weights(static_cast<Index>(t), static_cast<Index>(m));
    }
  }
  return rep;
}

/// Level-truncated Fock model (sum_{l<=N} E^l) (x) W: Atilde creates on
/// levels below N and kills the top level. The window is levels 0..N-1.
inline CovariantRep gen_truncated_fock(std::size_t d, std::size_t N, std::size_t W,
                                       std::size_t max_dim = std::size_t{1} << 20) {
  if (d < 1 || N < 1 || W < 1) throw Error(ErrorCode::BadParams, "need d, N, W >= 1");
  std::vector<std::size_t> offset(N + 2, 0);
  std::vector<std::size_t> words(N + 1, 1);
  for (std::size_t l = 0; l <= N; ++l) {
    words[l] = checked_pow(d, l, max_dim);
    offset[l + 1] = offset[l] + words[l] * W;
    if (offset[l + 1] > max_dim) throw Error(ErrorCode::Overflow, "truncated Fock space too large");
  }
  const std::size_t n = offset[N + 1];
  if (n > max_dim / d) throw Error(ErrorCode::Overflow, "truncated Fock space too large");
  CovariantRep rep;
  rep.K_dim = n;
  rep.E.dim = d;
  rep.atilde = ComplexMatrix::Zero(static_cast<Index>(n), static_cast<Index>(d * n));
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t l = 0; l < N; ++l) {
      for (std::size_t p = 0; p < words[l]; ++p) {
        for (std::size_t w = 0; w < W; ++w) {
          const std::size_t from = offset[l] + p * W + w;
          const std::size_t to = offset[l + 1] + (i * words[l] + p) * W + w;
          rep.atilde(static_cast<Index>(to), static_cast<Index>(i * n + from)) = 1.0;
        }
      }
    }
  }
  std::vector<std::size_t> window(offset[N]);
  for (std::size_t b = 0; b < window.size(); ++b) window[b] = b;
  rep.window_mask = Frame::coordinate(n, window);
  return rep;
}

/// Block-diagonal sum of representations over the same correspondence.
/// Windows are combined blockwise; a summand without a window contributes
/// its whole block.
inline CovariantRep gen_block_direct_sum(const std::vector<CovariantRep>& reps) {
  if (reps.empty()) throw Error(ErrorCode::BadParams, "no summands");
  for (const auto& r : reps) validate(r);
  const std::size_t d = reps.front().d();
  const std::size_t g = reps.front().sigma.size();
  bool any_window = false;
  std::size_t n = 0;
  for (const auto& r : reps) {
    if (r.d() != d || r.sigma.size() != g || r.E.scalar() != reps.front().E.scalar()) {
      throw Error(ErrorCode::DimensionMismatch, "summands differ in correspondence or generators");
    }
    any_window = any_window || r.window_mask.has_value();
    n += r.K_dim;
  }
  CovariantRep out;
  out.K_dim = n;
  out.E = reps.front().E;
  out.atilde = ComplexMatrix::Zero(static_cast<Index>(n), static_cast<Index>(d * n));
  out.sigma.assign(g, ComplexMatrix::Zero(static_cast<Index>(n), static_cast<Index>(n)));
  std::vector<ComplexMatrix> window_blocks;
  Index off = 0;
  Index window_cols = 0;
  for (const auto& r : reps) {
    const auto nr = static_cast<Index>(r.K_dim);
    for (std::size_t t = 0; t < d; ++t) {
      const auto tt = static_cast<Index>(t);
      out.atilde.block(off, tt * static_cast<Index>(n) + off, nr, nr) = r.atilde.middleCols(tt * nr, nr);
    }
    for (std::size_t a = 0; a < g; ++a) out.sigma[a].block(off, off, nr, nr) = r.sigma[a];
    window_blocks.push_back(r.window_mask ? r.window_mask->basis() : linalg::identity(r.K_dim));
    window_cols += window_blocks.back().cols();
    off += nr;
  }
  if (any_window) {
    ComplexMatrix wb = ComplexMatrix::Zero(static_cast<Index>(n), window_cols);
    Index row = 0;
    Index col = 0;
    for (const auto& b : window_blocks) {
      wb.block(row, col, b.rows(), b.cols()) = b;
      row += b.rows();
      col += b.cols();
    }
    out.window_mask = Frame::from_orthonormal(std::move(wb), 1e-10);
  }
  return out;
}

/// One tensor factor of a twisted pair: a truncated shift on C^{N+1}
/// (window: levels below N) or a cyclic permutation of C^c.
struct Factor {
  enum class Kind { Fock, Cyclic };
  Kind kind = Kind::Fock;
  std::size_t size = 1;  // N for Fock, c for Cyclic

  static Factor fock(std::size_t N) { return {Kind::Fock, N}; }
  static Factor cyclic(std::size_t c) { return {Kind::Cyclic, c}; }

  std::size_t dim() const { return kind == Kind::Fock ? size + 1 : size; }
  ComplexMatrix shift() const { return kind == Kind::Fock ? nilpotent_shift(dim()) : cyclic_shift(dim()); }
};

inline void require_unimodular(Complex omega, const ToleranceConfig& tol) {
  if (!std::isfinite(omega.real()) || !std::isfinite(omega.imag())) {
    throw Error(ErrorCode::NonFinite, "omega is not finite");
  }
  if (std::abs(std::abs(omega) - 1.0) > tol.eq_tol) throw Error(ErrorCode::NotUnimodular, "|omega| != 1");
}

/// Two directions on X (x) Y (x) W with d_1 = d_2 = 1:
/// T_1 = S_X (x) I (x) I, T_2 = D (x) S_Y (x) I with D e_p = omega^p e_p, and
/// twist U_12 = conj(omega) I. A cyclic first factor of length c needs
/// omega^c = 1 for the relations to close.
inline ProductSystemRep gen_twisted_tensor_pair(Factor x, Factor y, Complex omega, std::size_t W,
                                                const ToleranceConfig& tol = {}) {
  require_unimodular(omega, tol);
  if (x.size < 1 || y.size < 1 || W < 1) throw Error(ErrorCode::BadParams, "factor sizes must be positive");
  if (x.kind == Factor::Kind::Cyclic &&
      std::abs(std::pow(omega, static_cast<double>(x.size)) - 1.0) > tol.eq_tol) {
    throw Error(ErrorCode::BadParams, "cyclic first factor needs omega^c = 1");
  }
  const std::size_t a = x.dim();
  const std::size_t b = y.dim();
  ComplexMatrix phase = ComplexMatrix::Zero(static_cast<Index>(a), static_cast<Index>(a));
  for (std::size_t p = 0; p < a; ++p) phase(static_cast<Index>(p), static_cast<Index>(p)) = std::pow(omega, static_cast<double>(p));
  const ComplexMatrix iw = linalg::identity(W);
  ProductSystemRep psr;
  psr.K_dim = a * b * W;
  psr.corrs = {Correspondence{}, Correspondence{}};
  psr.atildes = {linalg::kron(linalg::kron(x.shift(), linalg::identity(b)), iw),
                 linalg::kron(linalg::kron(phase, y.shift()), iw)};
  psr.flips[{0, 1}] = ComplexMatrix::Ones(1, 1);
  psr.twists[{0, 1}] = std::conj(omega) * linalg::identity(psr.K_dim);
  if (x.kind == Factor::Kind::Fock || y.kind == Factor::Kind::Fock) {
    std::vector<std::size_t> window;
    const std::size_t pa = x.kind == Factor::Kind::Fock ? x.size : a;
    const std::size_t qb = y.kind == Factor::Kind::Fock ? y.size : b;
    for (std::size_t p = 0; p < pa; ++p) {
      for (std::size_t q = 0; q < qb; ++q) {
        for (std::size_t w = 0; w < W; ++w) window.push_back((p * b + q) * W + w);
      }
    }
    psr.window_mask = Frame::coordinate(psr.K_dim, window);
  }
  return psr;
}

/// Truncated Fock (x) truncated Fock pair twisted by omega.
inline ProductSystemRep gen_twisted_fock_pair(Complex omega, std::size_t N, std::size_t W,
                                              const ToleranceConfig& tol = {}) {
  return gen_twisted_tensor_pair(Factor::fock(N), Factor::fock(N), omega, W, tol);
}

/// Block-diagonal sum of product-system representations with the same
/// correspondences and flips.
inline ProductSystemRep gen_product_direct_sum(const std::vector<ProductSystemRep>& parts) {
  if (parts.empty()) throw Error(ErrorCode::BadParams, "no summands");
  const ProductSystemRep& first = parts.front();
  const std::size_t k = first.k();
  for (const auto& p : parts) {
    validate(p);
    if (p.k() != k || p.sigma.size() != first.sigma.size()) {
      throw Error(ErrorCode::DimensionMismatch, "summands differ in directions or generators");
    }
    for (std::size_t i = 0; i < k; ++i) {
      if (p.d(i) != first.d(i)) throw Error(ErrorCode::DimensionMismatch, "summands differ in correspondence");
    }
  }
  ProductSystemRep out;
  out.corrs = first.corrs;
  out.flips = first.flips;
  std::vector<CovariantRep> blocks;
  for (std::size_t i = 0; i < k; ++i) {
    blocks.clear();
    for (const auto& p : parts) blocks.push_back(p.direction(i));
    CovariantRep sum = gen_block_direct_sum(blocks);
    out.atildes.push_back(sum.atilde);
    if (i == 0) {
      out.K_dim = sum.K_dim;
      out.sigma = sum.sigma;
      out.window_mask = sum.window_mask;
    }
  }
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i + 1; j < k; ++j) {
      bool stored = false;
      for (const auto& p : parts) stored = stored || p.twists.count({i, j}) > 0;
      if (!stored) continue;
      ComplexMatrix u = ComplexMatrix::Zero(static_cast<Index>(out.K_dim), static_cast<Index>(out.K_dim));
      Index off = 0;
      for (const auto& p : parts) {
        const auto np = static_cast<Index>(p.K_dim);
        u.block(off, off, np, np) = p.twist(i, j);
        off += np;
      }
      out.twists[{i, j}] = u;
    }
  }
  return out;
}

/// Fock(x)Fock + Fock(x)cyclic + cyclic(x)Fock + cyclic(x)cyclic, blockwise,
/// with omega^c = 1 so every block closes.
inline ProductSystemRep gen_four_block_pair(std::size_t N, std::size_t c, Complex omega, std::size_t W,
                                            const ToleranceConfig& tol = {}) {
  return gen_product_direct_sum({
      gen_twisted_tensor_pair(Factor::fock(N), Factor::fock(N), omega, W, tol),
      gen_twisted_tensor_pair(Factor::fock(N), Factor::cyclic(c), omega, W, tol),
      gen_twisted_tensor_pair(Factor::cyclic(c), Factor::fock(N), omega, W, tol),
      gen_twisted_tensor_pair(Factor::cyclic(c), Factor::cyclic(c), omega, W, tol),
  });
}

/// A k = 1 product system wrapping a single representation.
inline ProductSystemRep as_product_system(const CovariantRep& rep) {
  ProductSystemRep psr;
  psr.K_dim = rep.K_dim;
  psr.sigma = rep.sigma;
  psr.corrs = {rep.E};
  psr.atildes = {rep.atilde};
  psr.window_mask = rep.window_mask;
  return psr;
}

}  // namespace wold::gen
