#pragma once

// Data model: correspondences, covariant representations encoded by the map
// Atilde : E (x) K -> K, and product-system representations with flips and
// twists. Directions are 0-based in the API.

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "wold/check_report.hpp"
#include "wold/error.hpp"
#include "wold/linalg.hpp"

namespace wold {

using linalg::Frame;
using linalg::Index;
using linalg::ToleranceConfig;

/// A finite-dimensional correspondence. Empty action lists mean the scalar
/// algebra acting by multiplication.
struct Correspondence {
  std::size_t dim = 1;
  std::vector<ComplexMatrix> left_action;
  std::vector<ComplexMatrix> right_action;

  bool scalar() const { return left_action.empty() && right_action.empty(); }
};

struct CovariantRep {
  std::size_t K_dim = 0;
  std::vector<ComplexMatrix> sigma;  // one per algebra generator
  Correspondence E;
  ComplexMatrix atilde;  // K_dim x (E.dim * K_dim); block column t is A(delta_t)
  std::optional<Frame> window_mask;

  std::size_t d() const { return E.dim; }

  /// A(delta_t) as an n x n matrix.
  ComplexMatrix block(std::size_t t) const {
    const auto n = static_cast<Index>(K_dim);
    return atilde.middleCols(static_cast<Index>(t) * n, n);
  }
};

inline void validate(const CovariantRep& rep) {
  const auto n = static_cast<Index>(rep.K_dim);
  const auto d = static_cast<Index>(rep.E.dim);
  if (rep.E.dim == 0 || rep.K_dim == 0) {
    throw Error(ErrorCode::DimensionMismatch, "dimensions must be positive");
  }
  if (rep.atilde.rows() != n || rep.atilde.cols() != d * n) {
    throw Error(ErrorCode::DimensionMismatch,
                "atilde must be " + std::to_string(n) + "x" + std::to_string(d * n));
  }
  linalg::require_finite(rep.atilde, "atilde");
  if (rep.E.left_action.size() != rep.E.right_action.size() ||
      (!rep.E.scalar() && rep.E.left_action.size() != rep.sigma.size())) {
    throw Error(ErrorCode::DimensionMismatch, "generator lists have different lengths");
  }
  for (const auto& s : rep.sigma) {
    if (s.rows() != n || s.cols() != n) throw Error(ErrorCode::DimensionMismatch, "sigma size");
    linalg::require_finite(s, "sigma");
  }
  for (std::size_t g = 0; g < rep.E.left_action.size(); ++g) {
    for (const ComplexMatrix* m : {&rep.E.left_action[g], &rep.E.right_action[g]}) {
      if (m->rows() != d || m->cols() != d) {
        throw Error(ErrorCode::DimensionMismatch, "correspondence action size");
      }
      linalg::require_finite(*m, "correspondence action");
    }
  }
  if (rep.window_mask && rep.window_mask->ambient_dim() != rep.K_dim) {
    throw Error(ErrorCode::DimensionMismatch, "window_mask ambient dimension");
  }
}

/// Subset of directions {0..k-1} as a bitmask.
struct DirectionSet {
  std::uint32_t mask = 0;
  std::size_t k = 0;

  static DirectionSet all(std::size_t k) { return {static_cast<std::uint32_t>((1u << k) - 1u), k}; }
  static DirectionSet none(std::size_t k) { return {0u, k}; }

  bool contains(std::size_t i) const { return (mask >> i) & 1u; }
  bool empty() const { return mask == 0; }
  DirectionSet complement() const { return {all(k).mask & ~mask, k}; }

  std::vector<std::size_t> members() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < k; ++i) {
      if (contains(i)) out.push_back(i);
    }
    return out;
  }

  /// 1-based label such as "{1,2}" or "{}".
  std::string label() const {
    std::string s = "{";
    bool first = true;
    for (auto i : members()) {
      if (!first) s += ",";
      s += std::to_string(i + 1);
      first = false;
    }
    return s + "}";
  }

  friend bool operator<(DirectionSet a, DirectionSet b) { return a.mask < b.mask; }
  friend bool operator==(DirectionSet a, DirectionSet b) { return a.mask == b.mask && a.k == b.k; }
};

/// Canonical transposition E_i (x) E_j -> E_j (x) E_i.
inline ComplexMatrix transposition_flip(std::size_t di, std::size_t dj) {
  ComplexMatrix f = ComplexMatrix::Zero(static_cast<Index>(di * dj), static_cast<Index>(di * dj));
  for (std::size_t a = 0; a < di; ++a) {
    for (std::size_t b = 0; b < dj; ++b) {
      f(static_cast<Index>(b * di + a), static_cast<Index>(a * dj + b)) = 1.0;
    }
  }
  return f;
}

struct ProductSystemRep {
  std::size_t K_dim = 0;
  std::vector<ComplexMatrix> sigma;
  std::vector<Correspondence> corrs;
  std::vector<ComplexMatrix> atildes;
  std::map<std::pair<std::size_t, std::size_t>, ComplexMatrix> flips;   // (i,j): E_i(x)E_j -> E_j(x)E_i
  std::map<std::pair<std::size_t, std::size_t>, ComplexMatrix> twists;  // keys with i < j
  std::optional<Frame> window_mask;

  std::size_t k() const { return atildes.size(); }
  std::size_t d(std::size_t i) const { return corrs.at(i).dim; }

  /// u_{i,j}; falls back to the inverse of a stored u_{j,i}, then to the
  /// transposition.
  ComplexMatrix flip(std::size_t i, std::size_t j) const {
    if (auto it = flips.find({i, j}); it != flips.end()) return it->second;
    if (auto it = flips.find({j, i}); it != flips.end()) return it->second.adjoint();
    return transposition_flip(d(i), d(j));
  }

  /// U_{ij}, with U_{ji} = U_{ij}^* and identity when nothing is stored.
  ComplexMatrix twist(std::size_t i, std::size_t j) const {
    if (i == j) return linalg::identity(K_dim);
    if (i < j) {
      if (auto it = twists.find({i, j}); it != twists.end()) return it->second;
      return linalg::identity(K_dim);
    }
    return twist(j, i).adjoint();
  }

  /// u_{i,j} (x) U_{ij} : E_i (x) E_j (x) K -> E_j (x) E_i (x) K.
  ComplexMatrix flip_twist(std::size_t i, std::size_t j, std::size_t max_dim = std::size_t{1} << 20) const {
    return linalg::kron(flip(i, j), twist(i, j), max_dim);
  }

  CovariantRep direction(std::size_t i) const {
    CovariantRep rep;
    rep.K_dim = K_dim;
    rep.sigma = sigma;
    rep.E = corrs.at(i);
    rep.atilde = atildes.at(i);
    rep.window_mask = window_mask;
    return rep;
  }
};

inline void validate(const ProductSystemRep& psr) {
  if (psr.k() == 0 || psr.corrs.size() != psr.k()) {
    throw Error(ErrorCode::DimensionMismatch, "need one correspondence per direction");
  }
  for (std::size_t i = 0; i < psr.k(); ++i) validate(psr.direction(i));
  const auto n = static_cast<Index>(psr.K_dim);
  for (const auto& [key, u] : psr.flips) {
    if (key.first >= psr.k() || key.second >= psr.k()) {
      throw Error(ErrorCode::DimensionMismatch, "flip direction out of range");
    }
    const auto dd = static_cast<Index>(psr.d(key.first) * psr.d(key.second));
    if (u.rows() != dd || u.cols() != dd) {
      throw Error(ErrorCode::DimensionMismatch, "flip size");
    }
    linalg::require_finite(u, "flip");
  }
  for (const auto& [key, u] : psr.twists) {
    if (key.first >= key.second || key.second >= psr.k() || u.rows() != n || u.cols() != n) {
      throw Error(ErrorCode::DimensionMismatch, "twist key or size");
    }
    linalg::require_finite(u, "twist");
  }
}

inline std::size_t checked_pow(std::size_t base, std::size_t exp, std::size_t max_dim) {
  std::size_t out = 1;
  for (std::size_t e = 0; e < exp; ++e) {
    if (base != 0 && out > max_dim / base) throw Error(ErrorCode::Overflow, "tensor power too large");
    out *= base;
  }
  return out;
}

/// Atilde_l = Atilde (I_E (x) Atilde) ... (I_{E^{l-1}} (x) Atilde).
inline ComplexMatrix atilde_iter(const CovariantRep& rep, std::size_t l,
                                 std::size_t max_dim = std::size_t{1} << 20) {
  if (l == 0) return linalg::identity(rep.K_dim);
  ComplexMatrix m = rep.atilde;
  std::size_t prefix = 1;
  for (std::size_t j = 2; j <= l; ++j) {
    prefix = checked_pow(rep.d(), j - 1, max_dim);
    m = m * linalg::lift(prefix, rep.atilde, max_dim);
  }
  return m;
}

/// Ordered word over the listed directions: factor order
/// E_{dirs[0]}^{powers[0]} (x) E_{dirs[1]}^{powers[1]} (x) ... (x) K.
inline ComplexMatrix atilde_word(const ProductSystemRep& psr, const std::vector<std::size_t>& dirs,
                                 const std::vector<std::size_t>& powers,
                                 std::size_t max_dim = std::size_t{1} << 20) {
  if (dirs.size() != powers.size()) throw Error(ErrorCode::DimensionMismatch, "word length");
  ComplexMatrix m;
  bool started = false;
  std::size_t prefix = 1;
  for (std::size_t s = 0; s < dirs.size(); ++s) {
    if (powers[s] == 0) continue;
    const CovariantRep rep = psr.direction(dirs[s]);
    ComplexMatrix factor = atilde_iter(rep, powers[s], max_dim);
    if (!started) {
      m = std::move(factor);
      started = true;
    } else {
      m = m * linalg::lift(prefix, factor, max_dim);
    }
    const std::size_t grow = checked_pow(rep.d(), powers[s], max_dim);
    if (prefix > max_dim / grow) throw Error(ErrorCode::Overflow, "word domain too large");
    prefix *= grow;
  }
  if (!started) return linalg::identity(psr.K_dim);
  return m;
}

/// Atilde_m for a multi-index over all k directions in order 1..k.
inline ComplexMatrix atilde_multi(const ProductSystemRep& psr, const std::vector<std::size_t>& m,
                                  std::size_t max_dim = std::size_t{1} << 20) {
  if (m.size() != psr.k()) throw Error(ErrorCode::DimensionMismatch, "multi-index length");
  std::vector<std::size_t> dirs(psr.k());
  for (std::size_t i = 0; i < dirs.size(); ++i) dirs[i] = i;
  return atilde_word(psr, dirs, m, max_dim);
}

/// Dimension of E_{dirs[0]}^{powers[0]} (x) ... for a word.
inline std::size_t word_dim(const ProductSystemRep& psr, const std::vector<std::size_t>& dirs,
                            const std::vector<std::size_t>& powers,
                            std::size_t max_dim = std::size_t{1} << 20) {
  std::size_t out = 1;
  for (std::size_t s = 0; s < dirs.size(); ++s) {
    const std::size_t grow = checked_pow(psr.d(dirs[s]), powers[s], max_dim);
    if (out > max_dim / grow) throw Error(ErrorCode::Overflow, "word domain too large");
    out *= grow;
  }
  return out;
}

/// Orthonormal basis of the window, or the identity when the model has none
/// or the scope is Full.
inline ComplexMatrix window_basis(const std::optional<Frame>& window, std::size_t n, Scope scope) {
  if (scope == Scope::Window && window) return window->basis();
  return linalg::identity(n);
}

inline bool uses_window(const std::optional<Frame>& window, Scope scope) {
  return scope == Scope::Window && window.has_value();
}

/// Intertwining Atilde (phi(a) (x) I) = sigma(a) Atilde and the two-sided
/// identity sigma(a) A(xi) sigma(b) = A(a . xi . b) over generators and the unit.
inline CheckReport check_covariance(const CovariantRep& rep, const ToleranceConfig& tol) {
  validate(rep);
  ResidualTracker tr;
  if (rep.E.scalar()) {
    auto r = tr.finish("covariance", tol.eq_tol, false);
    r.note = "scalar algebra: vacuous";
    return r;
  }
  const std::size_t g = rep.sigma.size();
  const auto n = static_cast<Index>(rep.K_dim);
  const ComplexMatrix in = linalg::identity(rep.K_dim);
  for (std::size_t a = 0; a < g; ++a) {
    tr.add("intertwining", rep.atilde * linalg::kron(rep.E.left_action[a], in) - rep.sigma[a] * rep.atilde);
  }
  // index g stands for the unit of the algebra
  const auto d = static_cast<Index>(rep.d());
  auto left = [&](std::size_t a) { return a == g ? linalg::identity(rep.d()) : rep.E.left_action[a]; };
  auto right = [&](std::size_t b) { return b == g ? linalg::identity(rep.d()) : rep.E.right_action[b]; };
  for (std::size_t a = 0; a <= g; ++a) {
    for (std::size_t b = 0; b <= g; ++b) {
      if (a == g && b == g) continue;
      const ComplexMatrix sa = a == g ? in : rep.sigma[a];
      const ComplexMatrix sb = b == g ? in : rep.sigma[b];
      const ComplexMatrix act = right(b) * left(a);
      for (Index t = 0; t < d; ++t) {
        ComplexMatrix lhs = sa * rep.atilde.middleCols(t * n, n) * sb;
        ComplexMatrix rhs = ComplexMatrix::Zero(n, n);
        for (Index s = 0; s < d; ++s) rhs += act(s, t) * rep.atilde.middleCols(s * n, n);
        tr.add("bimodule", lhs - rhs);
      }
    }
  }
  return tr.finish("covariance", tol.eq_tol, false);
}

}  // namespace wold
