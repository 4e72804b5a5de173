#pragma once

// Left inverses, the chi maps, range projections and the commutation and
// exchange identities among directions of a product-system representation.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "wold/generators.hpp"
#include "wold/hypotheses.hpp"
#include "wold/repn.hpp"

namespace wold::structure {

using linalg::Complex;

/// Inverse of a Gram matrix M^* M, or its Moore-Penrose inverse restricted
/// to the injectivity window ran M^* when M is not bounded below.
struct GramInverse {
  ComplexMatrix inverse;  // n x n (cols of M)
  double cond = 1.0;
  bool window_guarded = false;
  Frame injectivity;  // ran M^*
};

namespace detail {

inline double gram_condition(const ComplexMatrix& g) {
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(g, Eigen::EigenvaluesOnly);
  const auto& ev = es.eigenvalues();
  if (ev.size() == 0) return 1.0;
  if (!(ev(0) > 0.0)) return std::numeric_limits<double>::infinity();
  return ev(ev.size() - 1) / ev(0);
}

/// (B^* M^* M B)^{-1} via a Cholesky solve, with condition refusal.
inline ComplexMatrix solve_gram(const ComplexMatrix& mb, const ToleranceConfig& tol, double& cond) {
  const ComplexMatrix g = mb.adjoint() * mb;
  cond = gram_condition(g);
  if (!(cond <= tol.max_gram_cond)) {
    throw Error(ErrorCode::IllConditioned, "Gram matrix condition number " + std::to_string(cond) +
                                               " exceeds " + std::to_string(tol.max_gram_cond));
  }
  Eigen::LLT<ComplexMatrix> llt(g);
  if (llt.info() != Eigen::Success) throw Error(ErrorCode::IllConditioned, "Gram matrix is not positive definite");
  return llt.solve(linalg::identity(static_cast<std::size_t>(g.rows())));
}

}  // namespace detail

/// `window_domain`, when given, is the part of the domain on which the
/// operator must be injective for the guarded inverse to be accepted.
inline GramInverse gram_inverse(const ComplexMatrix& m, const ToleranceConfig& tol,
                                const std::optional<ComplexMatrix>& window_domain) {
  GramInverse out;
  const auto cols = static_cast<std::size_t>(m.cols());
  if (linalg::smallest_singular(m) > tol.rank_tol) {
    out.inverse = detail::solve_gram(m, tol, out.cond);
    out.injectivity = Frame::full(cols, tol.rank_tol);
    return out;
  }
  if (!window_domain) throw Error(ErrorCode::NotLeftInvertible, "operator is not bounded below");
  out.injectivity = linalg::orthonormal_frame(m.adjoint(), tol);
  const Frame win = linalg::orthonormal_frame(*window_domain, tol);
  const double leak = linalg::containment_residual(win, out.injectivity);
  if (leak > tol.eq_tol) {
    throw Error(ErrorCode::NotLeftInvertible, "operator is not injective on the window (defect " +
                                                  std::to_string(leak) + ")");
  }
  out.window_guarded = true;
  const ComplexMatrix& bv = out.injectivity.basis();
  out.inverse = bv * detail::solve_gram(m * bv, tol, out.cond) * bv.adjoint();
  return out;
}

struct LeftInverse {
  std::size_t direction = 0;
  ComplexMatrix L;  // (d n) x n
  double gram_cond = 1.0;
  bool window_guarded = false;
  Frame injectivity;
  ComplexMatrix gram_inv;  // (Atilde^* Atilde)^{-1}, or its guarded pseudo-inverse
};

inline LeftInverse left_inverse(const CovariantRep& rep, const ToleranceConfig& tol, std::size_t direction = 0) {
  validate(rep);
  std::optional<ComplexMatrix> win;
  if (rep.window_mask) win = linalg::lift(rep.d(), rep.window_mask->basis(), tol.max_dim);
  GramInverse g = gram_inverse(rep.atilde, tol, win);
  LeftInverse li;
  li.direction = direction;
  li.gram_cond = g.cond;
  li.window_guarded = g.window_guarded;
  li.injectivity = std::move(g.injectivity);
  li.gram_inv = std::move(g.inverse);
  li.L = li.gram_inv * rep.atilde.adjoint();
  return li;
}

inline LeftInverse left_inverse(const ProductSystemRep& psr, std::size_t i, const ToleranceConfig& tol) {
  return left_inverse(psr.direction(i), tol, i);
}

/// L_n = (I_{E^{n-1}} (x) L) ... (I_E (x) L) L.
inline ComplexMatrix left_inverse_iter(const CovariantRep& rep, const LeftInverse& li, std::size_t n,
                                       const ToleranceConfig& tol) {
  if (n == 0) return linalg::identity(rep.K_dim);
  ComplexMatrix m = li.L;
  for (std::size_t j = 1; j < n; ++j) {
    m = linalg::lift(checked_pow(rep.d(), j, tol.max_dim), li.L, tol.max_dim) * m;
  }
  return m;
}

/// chi(x) = Atilde (I_E (x) x) L.
inline ComplexMatrix chi(const CovariantRep& rep, const LeftInverse& li, const ComplexMatrix& x,
                         const ToleranceConfig& tol) {
  return rep.atilde * linalg::lift(rep.d(), x, tol.max_dim) * li.L;
}

/// chi_l(x) = Atilde_l (I_{E^l} (x) x) L_l.
inline ComplexMatrix chi_iter(const CovariantRep& rep, const LeftInverse& li, std::size_t l,
                              const ComplexMatrix& x, const ToleranceConfig& tol) {
  if (l == 0) return x;
  const std::size_t p = checked_pow(rep.d(), l, tol.max_dim);
  return atilde_iter(rep, l, tol.max_dim) * linalg::lift(p, x, tol.max_dim) * left_inverse_iter(rep, li, l, tol);
}

/// Orthogonal projection onto ran Atilde_m through M (M^* M)^+ M^*, with the
/// pseudo-inverse taken on the injectivity window of M.
inline ComplexMatrix range_projection(const CovariantRep& rep, std::size_t m, const ToleranceConfig& tol) {
  if (m == 0) return linalg::identity(rep.K_dim);
  const ComplexMatrix am = atilde_iter(rep, m, tol.max_dim);
  const Frame v = linalg::orthonormal_frame(am.adjoint(), tol);
  double cond = 1.0;
  const ComplexMatrix amv = am * v.basis();
  if (amv.cols() == 0) return ComplexMatrix::Zero(am.rows(), am.rows());
  return amv * detail::solve_gram(amv, tol, cond) * amv.adjoint();
}

inline ComplexMatrix range_projection(const ProductSystemRep& psr, std::size_t i, std::size_t m,
                                      const ToleranceConfig& tol) {
  return range_projection(psr.direction(i), m, tol);
}

/// Ordered product P_1^{m_1} P_2^{m_2} ... P_k^{m_k}.
inline ComplexMatrix joint_projection(const ProductSystemRep& psr, const std::vector<std::size_t>& m,
                                      const ToleranceConfig& tol) {
  if (m.size() != psr.k()) throw Error(ErrorCode::DimensionMismatch, "multi-index length");
  ComplexMatrix p = linalg::identity(psr.K_dim);
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (m[i] > 0) p = p * range_projection(psr, i, m[i], tol);
  }
  return p;
}

/// Projection onto ran Atilde_m computed from an orthonormal frame of the
/// range; independent of the Gram formula.
inline ComplexMatrix multi_range_projection(const ProductSystemRep& psr, const std::vector<std::size_t>& m,
                                            const ToleranceConfig& tol) {
  const ComplexMatrix a = atilde_multi(psr, m, tol.max_dim);
  return linalg::orthonormal_frame(a, tol, a.norm()).projector();
}

struct ProjectionGrid {
  std::size_t level_cap = 0;
  std::vector<std::vector<ComplexMatrix>> per_direction;  // [i][m-1] = P_i^m
  std::map<std::vector<std::size_t>, ComplexMatrix> joint;

  const ComplexMatrix& at(std::size_t i, std::size_t m) const { return per_direction.at(i).at(m - 1); }
};

inline void for_each_multi_index(const std::vector<std::size_t>& caps,
                                 const std::function<void(const std::vector<std::size_t>&)>& f) {
  std::vector<std::size_t> m(caps.size(), 0);
  while (true) {
    f(m);
    std::size_t pos = 0;
    while (pos < m.size() && m[pos] == caps[pos]) m[pos++] = 0;
    if (pos == m.size()) return;
    ++m[pos];
  }
}

inline ProjectionGrid projection_grid(const ProductSystemRep& psr, std::size_t level_cap,
                                      const ToleranceConfig& tol) {
  ProjectionGrid g;
  g.level_cap = level_cap;
  g.per_direction.resize(psr.k());
  for (std::size_t i = 0; i < psr.k(); ++i) {
    for (std::size_t m = 1; m <= level_cap; ++m) g.per_direction[i].push_back(range_projection(psr, i, m, tol));
  }
  for_each_multi_index(std::vector<std::size_t>(psr.k(), level_cap), [&](const std::vector<std::size_t>& m) {
    ComplexMatrix p = linalg::identity(psr.K_dim);
    for (std::size_t i = 0; i < m.size(); ++i) {
      if (m[i] > 0) p = p * g.at(i, m[i]);
    }
    g.joint.emplace(m, std::move(p));
  });
  return g;
}

/// Seeded random operator commuting with every sigma generator, compressed
/// to the window so it stays inside the injectivity window of each direction.
inline ComplexMatrix random_commutant_element(const ProductSystemRep& psr, std::mt19937_64& rng,
                                              const ToleranceConfig& tol) {
  const auto n = static_cast<Index>(psr.K_dim);
  std::normal_distribution<double> g(0.0, 1.0);
  ComplexMatrix x(n, n);
  if (psr.sigma.empty()) {
    for (Index c = 0; c < n; ++c) {
      for (Index r = 0; r < n; ++r) x(r, c) = Complex(g(rng), g(rng));
    }
  } else {
    // nullspace of x -> [x, sigma(a)] over all generators, on vec(x)
    const ComplexMatrix in = linalg::identity(psr.K_dim);
    ComplexMatrix op(static_cast<Index>(psr.sigma.size()) * n * n, n * n);
    for (std::size_t a = 0; a < psr.sigma.size(); ++a) {
      // vec(x s - s x) = (s^T (x) I - I (x) s) vec(x) for column-major vec
      op.middleRows(static_cast<Index>(a) * n * n, n * n) =
          linalg::kron(psr.sigma[a].transpose(), in) - linalg::kron(in, psr.sigma[a]);
    }
    const Frame null = linalg::kernel(op, tol);
    ComplexVector coeff(static_cast<Index>(null.rank()));
    for (Index c = 0; c < coeff.size(); ++c) coeff(c) = Complex(g(rng), g(rng));
    const ComplexVector v = null.basis() * coeff;
    x = Eigen::Map<const ComplexMatrix>(v.data(), n, n);
  }
  if (psr.window_mask) {
    const ComplexMatrix p = psr.window_mask->projector();
    x = p * x * p;
  }
  const double nx = linalg::op_norm(x);
  return nx > 0.0 ? ComplexMatrix(x / nx) : x;
}

struct ChiReport {
  CheckReport homomorphism;
  CheckReport commutation;
  CheckReport projection;  // chi_l(I) = P_l
};

/// chi^i(xy) = chi^i(x) chi^i(y), chi^i chi^j = chi^j chi^i and chi_l^i(I) = P_l^i
/// over seeded samples from the commutant.
inline ChiReport verify_chi(const ProductSystemRep& psr, std::size_t samples, std::uint64_t seed,
                            const ToleranceConfig& tol, std::size_t level_cap = 2) {
  std::mt19937_64 rng(seed);
  std::vector<CovariantRep> reps;
  std::vector<LeftInverse> lis;
  for (std::size_t i = 0; i < psr.k(); ++i) {
    reps.push_back(psr.direction(i));
    lis.push_back(left_inverse(reps.back(), tol, i));
  }
  ResidualTracker hom;
  ResidualTracker com;
  ResidualTracker proj;
  for (std::size_t s = 0; s < samples; ++s) {
    const ComplexMatrix x = random_commutant_element(psr, rng, tol);
    const ComplexMatrix y = random_commutant_element(psr, rng, tol);
    const double scale = std::max(1.0, linalg::op_norm(x) * linalg::op_norm(y));
    for (std::size_t i = 0; i < psr.k(); ++i) {
      const auto r = linalg::operator_residual(chi(reps[i], lis[i], x * y, tol) -
                                               chi(reps[i], lis[i], x, tol) * chi(reps[i], lis[i], y, tol));
      hom.add("chi" + std::to_string(i + 1), r.norm / scale, r.witness);
      for (std::size_t j = i + 1; j < psr.k(); ++j) {
        com.add("chi" + std::to_string(i + 1) + "chi" + std::to_string(j + 1),
                chi(reps[i], lis[i], chi(reps[j], lis[j], x, tol), tol) -
                    chi(reps[j], lis[j], chi(reps[i], lis[i], x, tol), tol));
      }
    }
  }
  const ComplexMatrix in = linalg::identity(psr.K_dim);
  for (std::size_t i = 0; i < psr.k(); ++i) {
    for (std::size_t l = 1; l <= level_cap; ++l) {
      proj.add("P" + std::to_string(i + 1) + "^" + std::to_string(l),
               chi_iter(reps[i], lis[i], l, in, tol) - range_projection(reps[i], l, tol));
    }
  }
  const bool guarded = psr.window_mask.has_value();
  ChiReport out{hom.finish("chi_homomorphism", tol.eq_tol, guarded),
                com.finish("chi_commutation", tol.eq_tol, guarded),
                proj.finish("chi_unit_is_range_projection", tol.eq_tol, guarded)};
  out.homomorphism.metrics["samples"] = static_cast<double>(samples);
  out.commutation.metrics["samples"] = static_cast<double>(samples);
  return out;
}

/// Frame for the intersection over i in beta of ker Atilde^(i)*; the whole
/// space when beta is empty.
inline Frame wandering_space(const ProductSystemRep& psr, DirectionSet beta, const ToleranceConfig& tol) {
  Frame out = Frame::full(psr.K_dim, tol.rank_tol);
  for (auto i : beta.members()) {
    out = linalg::intersect(out, linalg::kernel(psr.atildes.at(i).adjoint(), tol), tol);
  }
  return out;
}

/// Images A_t(S) = Atilde_t (E^t (x) S) for t = 0..cap by the recursion
/// A_{t+1}(S) = Atilde (E (x) A_t(S)). Stops early once a term is zero.
inline std::vector<Frame> image_chain(const ComplexMatrix& atilde, std::size_t d, const Frame& start,
                                      std::size_t cap, const ToleranceConfig& tol) {
  std::vector<Frame> chain{start};
  for (std::size_t t = 1; t <= cap && chain.back().rank() > 0; ++t) {
    chain.push_back(linalg::image(atilde, linalg::tensor_frame(d, chain.back(), tol.max_dim), tol));
  }
  return chain;
}

struct ChainSummary {
  Frame result;
  bool stabilized = false;
  double nesting_defect = 0.0;  // sup_t |(I - P_{A_t}) A_{t+1}|, for intersections
};

/// Closed span of the chain terms; stable when the last term adds nothing.
inline ChainSummary chain_span(const std::vector<Frame>& chain, std::size_t ambient, const ToleranceConfig& tol) {
  ChainSummary s;
  s.result = linalg::span(chain, ambient, tol);
  if (chain.back().rank() == 0 || s.result.rank() == ambient) {
    s.stabilized = true;
  } else if (chain.size() >= 2) {
    const Frame before = linalg::span(std::span<const Frame>(chain.data(), chain.size() - 1), ambient, tol);
    s.stabilized = before.rank() == s.result.rank();
  }
  return s;
}

/// Intersection of the chain terms; stable when the last two terms agree.
inline ChainSummary chain_intersection(const std::vector<Frame>& chain, const ToleranceConfig& tol) {
  ChainSummary s;
  s.result = chain.front();
  for (std::size_t t = 1; t < chain.size(); ++t) {
    s.result = linalg::intersect(s.result, chain[t], tol);
    s.nesting_defect = std::max(s.nesting_defect, linalg::containment_residual(chain[t], chain[t - 1]));
  }
  if (chain.back().rank() == 0) {
    s.stabilized = true;
  } else if (chain.size() >= 2) {
    s.stabilized = linalg::max_principal_angle(chain[chain.size() - 1], chain[chain.size() - 2]) <= tol.rank_tol * 100.0;
  }
  return s;
}

/// Reducing defects of a subspace for one direction: Atilde-invariance,
/// Atilde^*-invariance, and sigma-invariance from both sides.
inline double reducing_defect(const CovariantRep& rep, const Frame& s, const ToleranceConfig& tol) {
  const ComplexMatrix p = s.projector();
  const ComplexMatrix q = linalg::identity(rep.K_dim) - p;
  const ComplexMatrix ip = linalg::lift(rep.d(), p, tol.max_dim);
  const ComplexMatrix iq = linalg::lift(rep.d(), q, tol.max_dim);
  double out = std::max(linalg::op_norm(q * rep.atilde * ip), linalg::op_norm(iq * rep.atilde.adjoint() * p));
  for (const auto& sg : rep.sigma) {
    out = std::max({out, linalg::op_norm(q * sg * p), linalg::op_norm(p * sg * q)});
  }
  return out;
}

inline std::vector<CheckReport> verify_N_beta_properties(const ProductSystemRep& psr, DirectionSet beta,
                                                         const ToleranceConfig& tol) {
  validate(psr);
  if (beta.empty()) throw Error(ErrorCode::BadParams, "direction set must be nonempty");
  const Frame nb = wandering_space(psr, beta, tol);
  const ComplexMatrix p = nb.projector();
  const ComplexMatrix q = linalg::identity(psr.K_dim) - p;
  ResidualTracker inv;
  ResidualTracker twist;
  ResidualTracker prop2;
  for (std::size_t j = 0; j < psr.k(); ++j) {
    if (beta.contains(j)) continue;
    const std::size_t dj = psr.d(j);
    const ComplexMatrix& aj = psr.atildes[j];
    const std::string tag = std::to_string(j + 1);
    inv.add("invariant@" + tag, q * aj * linalg::lift(dj, p, tol.max_dim));
    inv.add("coinvariant@" + tag, linalg::lift(dj, q, tol.max_dim) * aj.adjoint() * p);
    const Frame moved = linalg::image(aj, linalg::tensor_frame(dj, nb, tol.max_dim), tol);
    const Frame lhs = linalg::intersect(nb, linalg::orthocomplement(moved), tol);
    const Frame rhs = linalg::intersect(nb, linalg::kernel(aj.adjoint(), tol), tol);
    const double angle = linalg::max_principal_angle(lhs, rhs);
    const ComplexVector w = lhs.rank() > 0 ? ComplexVector(lhs.basis().col(0))
                                           : (rhs.rank() > 0 ? ComplexVector(rhs.basis().col(0))
                                                             : ComplexVector::Zero(static_cast<Index>(psr.K_dim)));
    prop2.add("wandering_split@" + tag, angle, w);
  }
  for (std::size_t i = 0; i < psr.k(); ++i) {
    for (std::size_t j = i + 1; j < psr.k(); ++j) {
      const ComplexMatrix u = psr.twist(i, j);
      twist.add("U" + std::to_string(i + 1) + std::to_string(j + 1), u * p - p * u);
    }
  }
  const std::string b = beta.label();
  std::vector<CheckReport> out{inv.finish("N" + b + "_reducing", tol.eq_tol, false),
                               twist.finish("N" + b + "_twist_invariant", tol.eq_tol, false),
                               prop2.finish("N" + b + "_wandering_split", tol.eq_tol, false)};
  for (auto& r : out) r.metrics["rank_N"] = static_cast<double>(nb.rank());
  return out;
}

struct ExchangeReport {
  Frame lhs;  // intersection over t of A^(i)_t( span_s A^(j)_s(N_j) )
  Frame rhs;  // span over s of A^(j)_s( intersection_t A^(i)_t(N_j) )
  bool lhs_stabilized = false;
  bool rhs_stabilized = false;
  CheckReport report;
};

/// Exchange of the intersection over direction i and the span over
/// direction j, both starting from the wandering space of direction j.
inline ExchangeReport verify_exchange(const ProductSystemRep& psr, std::size_t i, std::size_t j,
                                      std::size_t cap, const ToleranceConfig& tol) {
  const std::size_t n = psr.K_dim;
  const Frame nj = linalg::kernel(psr.atildes.at(j).adjoint(), tol);
  ExchangeReport out;

  const ChainSummary inner_span = chain_span(image_chain(psr.atildes[j], psr.d(j), nj, cap, tol), n, tol);
  const ChainSummary lhs = chain_intersection(image_chain(psr.atildes[i], psr.d(i), inner_span.result, cap, tol), tol);
  const ChainSummary inner_cap = chain_intersection(image_chain(psr.atildes[i], psr.d(i), nj, cap, tol), tol);
  const ChainSummary rhs = chain_span(image_chain(psr.atildes[j], psr.d(j), inner_cap.result, cap, tol), n, tol);

  out.lhs = lhs.result;
  out.rhs = rhs.result;
  out.lhs_stabilized = inner_span.stabilized && lhs.stabilized;
  out.rhs_stabilized = inner_cap.stabilized && rhs.stabilized;
  const double angle = linalg::max_principal_angle(out.lhs, out.rhs);
  out.report = scalar_report("exchange(" + std::to_string(i + 1) + "," + std::to_string(j + 1) + ")", angle, tol.eq_tol);
  if (!out.report.passed) {
    out.report.witness = out.lhs.rank() >= out.rhs.rank() && out.lhs.rank() > 0
                             ? ComplexVector(out.lhs.basis().col(0))
                             : ComplexVector(out.rhs.basis().col(0));
  }
  out.report.metrics["rank_lhs"] = static_cast<double>(out.lhs.rank());
  out.report.metrics["rank_rhs"] = static_cast<double>(out.rhs.rank());
  out.report.metrics["lhs_stabilized"] = out.lhs_stabilized ? 1.0 : 0.0;
  out.report.metrics["rhs_stabilized"] = out.rhs_stabilized ? 1.0 : 0.0;
  out.report.metrics["cap"] = static_cast<double>(cap);
  if (!(out.lhs_stabilized && out.rhs_stabilized)) out.report.note = "not stabilized at cap " + std::to_string(cap);
  return out;
}

/// Gram intertwining X (I_{E_i} (x) G_j^+) = G_j^+ X with
/// X = (I_{E_j} (x) Atilde^(i)) (u_ij (x) U_ij), and the exchange of Gram
/// inverses under the flip-twists:
/// (I_{E_i} (x) G_j^+) F_ji (I_{E_j} (x) G_i^+) = F_ji (I_{E_j} (x) G_i^+) F_ij (I_{E_i} (x) G_j^+) F_ji.
inline std::vector<CheckReport> verify_gram_identities(const ProductSystemRep& psr,
                                                       const std::vector<LeftInverse>& lis,
                                                       const ToleranceConfig& tol, Scope scope) {
  const bool win = uses_window(psr.window_mask, scope);
  const std::size_t n = psr.K_dim;
  ResidualTracker inter;
  ResidualTracker exch;
  for (std::size_t i = 0; i < psr.k(); ++i) {
    for (std::size_t j = 0; j < psr.k(); ++j) {
      if (i == j) continue;
      const std::size_t di = psr.d(i);
      const std::size_t dj = psr.d(j);
      const std::string tag = "(" + std::to_string(i + 1) + "," + std::to_string(j + 1) + ")";
      const ComplexMatrix fij = psr.flip_twist(i, j, tol.max_dim);
      const ComplexMatrix fji = psr.flip_twist(j, i, tol.max_dim);
      const ComplexMatrix& gi = lis[i].gram_inv;
      const ComplexMatrix& gj = lis[j].gram_inv;
      const ComplexMatrix c = hyp::domain_compression(psr.window_mask, n, di * dj, scope);

      const ComplexMatrix x = linalg::lift(dj, psr.atildes[i], tol.max_dim) * fij;
      const auto r1 = linalg::operator_residual((x * linalg::lift(di, gj, tol.max_dim) - gj * x) * c);
      inter.add("gram_intertwining" + tag, r1.norm, c * r1.witness);

      const ComplexMatrix igj = linalg::lift(di, gj, tol.max_dim);
      const ComplexMatrix jgi = linalg::lift(dj, gi, tol.max_dim);
      const ComplexMatrix lhs = igj * fji * jgi;
      const ComplexMatrix rhs = fji * jgi * fij * igj * fji;
      const auto r2 = linalg::operator_residual((lhs - rhs) * c);
      exch.add("gram_exchange" + tag, r2.norm, c * r2.witness);
    }
  }
  return {inter.finish(hyp::scoped("gram_intertwining", win), tol.eq_tol, win),
          exch.finish(hyp::scoped("gram_exchange", win), tol.eq_tol, win)};
}

/// One report per identity of the projection calculus and the exchange
/// identity, over all ordered pairs of directions.
inline std::vector<CheckReport> verify_structure_identities(const ProductSystemRep& psr, std::size_t level_cap,
                                                            const ToleranceConfig& tol, Scope scope = Scope::Window,
                                                            std::size_t chi_samples = 20, std::uint64_t seed = 2024) {
  validate(psr);
  std::vector<LeftInverse> lis;
  std::vector<CovariantRep> reps;
  for (std::size_t i = 0; i < psr.k(); ++i) {
    reps.push_back(psr.direction(i));
    lis.push_back(left_inverse(reps.back(), tol, i));
  }
  std::vector<CheckReport> out = verify_gram_identities(psr, lis, tol, scope);

  const ProjectionGrid grid = projection_grid(psr, level_cap, tol);
  ResidualTracker chain;
  ResidualTracker joint;
  ResidualTracker commute;
  ResidualTracker nesting;
  ResidualTracker order;
  for (std::size_t i = 0; i < psr.k(); ++i) {
    for (std::size_t j = 0; j < psr.k(); ++j) {
      if (i == j) continue;
      const std::string tag = "(" + std::to_string(i + 1) + "," + std::to_string(j + 1) + ")";
      const ComplexMatrix pij = grid.at(i, 1) * grid.at(j, 1);
      chain.add("P1P1=chi(P1)" + tag, pij - chi(reps[i], lis[i], grid.at(j, 1), tol));
      std::vector<std::size_t> m(psr.k(), 0);
      m[i] = 1;
      m[j] = 1;
      joint.add("P1P1=P(ei+ej)" + tag, pij - multi_range_projection(psr, m, tol));
    }
  }
  // every pair of grid projections, across directions and levels
  std::vector<const ComplexMatrix*> all;
  for (std::size_t i = 0; i < psr.k(); ++i) {
    for (std::size_t m = 1; m <= level_cap; ++m) {
      all.push_back(&grid.at(i, m));
      if (m + 1 <= level_cap) {
        nesting.add("P" + std::to_string(i + 1) + "^" + std::to_string(m),
                    grid.at(i, m) * grid.at(i, m + 1) - grid.at(i, m + 1));
      }
    }
  }
  for (std::size_t a = 0; a < all.size(); ++a) {
    for (std::size_t b = a + 1; b < all.size(); ++b) commute.add("grid", (*all[a]) * (*all[b]) - (*all[b]) * (*all[a]));
  }
  for (const auto& [m, p] : grid.joint) {
    ComplexMatrix rev = linalg::identity(psr.K_dim);
    for (std::size_t i = m.size(); i-- > 0;) {
      if (m[i] > 0) rev = rev * grid.at(i, m[i]);
    }
    order.add("joint_order", p - rev);
    if (std::any_of(m.begin(), m.end(), [](std::size_t v) { return v > 0; })) {
      order.add("joint_range", p - multi_range_projection(psr, m, tol));
    }
  }
  const bool guarded = psr.window_mask.has_value();
  out.push_back(chain.finish("projection_chi_chain", tol.eq_tol, guarded));
  out.push_back(joint.finish("joint_projection", tol.eq_tol, guarded));
  out.push_back(commute.finish("grid_commutation", tol.eq_tol, guarded));
  out.push_back(nesting.finish("range_nesting", tol.eq_tol, guarded));
  out.push_back(order.finish("joint_projection_order", tol.eq_tol, guarded));
  for (auto& r : out) r.metrics["level_cap"] = static_cast<double>(level_cap);

  const ChiReport cr = verify_chi(psr, chi_samples, seed, tol, std::min<std::size_t>(level_cap, 2));
  out.push_back(cr.homomorphism);
  out.push_back(cr.commutation);
  out.push_back(cr.projection);

  for (std::size_t i = 0; i < psr.k(); ++i) {
    for (std::size_t j = 0; j < psr.k(); ++j) {
      if (i == j) continue;
      out.push_back(verify_exchange(psr, i, j, level_cap, tol).report);
    }
  }
  return out;
}

}  // namespace wold::structure
