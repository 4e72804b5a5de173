#pragma once

// Wold-type decompositions: one correspondence (induced part generated by
// the wandering space, plus the invertible remainder) and k directions
// (2^k summands indexed by direction sets), each with an enumeration oracle.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "wold/hypotheses.hpp"
#include "wold/structure.hpp"

namespace wold::decomp {

using structure::ChainSummary;
using structure::chain_intersection;
using structure::chain_span;
using structure::image_chain;

enum class Classification { Induced, Invertible, Neither };

inline std::string to_string(Classification c) {
  switch (c) {
    case Classification::Induced: return "INDUCED";
    case Classification::Invertible: return "INVERTIBLE";
    case Classification::Neither: return "NEITHER";
  }
  return "NEITHER";
}

struct SingleDecomposition {
  Frame wandering;
  std::vector<Frame> grades;  // A_n(wandering), n = 0, 1, ...
  std::vector<Frame> ranges;  // R_1 = ran Atilde, R_{m+1} = Atilde(E (x) R_m)
  Frame K1;
  Frame K2;
  std::size_t level_cap = 0;
  bool grades_stabilized = false;
  bool ranges_stabilized = false;
  bool stabilized = false;
  std::map<std::string, CheckReport> hypothesis_flags;
  std::map<std::string, double> residuals;
};

/// Hypothesis reports attached to a decomposition, on the full space and,
/// when the model carries one, on its window.
inline std::map<std::string, CheckReport> hypothesis_flags(const CovariantRep& rep, const ToleranceConfig& tol,
                                                           std::size_t m_max = 4) {
  std::map<std::string, CheckReport> out;
  auto put = [&](CheckReport r) { out.emplace(r.name, std::move(r)); };
  put(check_covariance(rep, tol));
  std::vector<Scope> scopes{Scope::Full};
  if (rep.window_mask) scopes.push_back(Scope::Window);
  for (Scope s : scopes) {
    put(hyp::check_isometric(rep, tol, s));
    auto ni = hyp::check_near_isometric(rep, m_max, tol, s);
    put(ni.a);
    put(ni.b);
    for (int c = 1; c <= 3; ++c) put(hyp::check_mt1(rep, c, {}, tol, s));
  }
  put(hyp::check_coisometric(rep, tol));
  return out;
}

inline double max_cross_overlap(const std::vector<Frame>& frames) {
  double out = 0.0;
  for (std::size_t a = 0; a < frames.size(); ++a) {
    for (std::size_t b = a + 1; b < frames.size(); ++b) out = std::max(out, linalg::max_overlap(frames[a], frames[b]));
  }
  return out;
}

/// ran Atilde_m from the matrix of Atilde_m, independent of the recursion.
inline Frame range_frame(const CovariantRep& rep, std::size_t m, const ToleranceConfig& tol) {
  if (m == 0) return Frame::full(rep.K_dim, tol.rank_tol);
  const ComplexMatrix am = atilde_iter(rep, m, tol.max_dim);
  return linalg::orthonormal_frame(am, tol, am.norm());
}

inline SingleDecomposition wold_single(const CovariantRep& rep, std::size_t level_cap, const ToleranceConfig& tol) {
  validate(rep);
  const std::size_t n = rep.K_dim;
  const std::size_t d = rep.d();
  SingleDecomposition out;
  out.level_cap = level_cap;
  out.wandering = linalg::kernel(rep.atilde.adjoint(), tol);

  std::vector<Frame> chain = image_chain(rep.atilde, d, out.wandering, level_cap, tol);
  const ChainSummary k1 = chain_span(chain, n, tol);
  out.K1 = k1.result;
  out.grades_stabilized = k1.stabilized;
  for (auto& g : chain) {
    if (g.rank() > 0) out.grades.push_back(std::move(g));
  }

  out.ranges.push_back(linalg::image(rep.atilde, Frame::full(d * n, tol.rank_tol), tol));
  while (true) {
    const Frame& last = out.ranges.back();
    if (last.rank() == 0) {
      out.ranges_stabilized = true;
      break;
    }
    if (out.ranges.size() >= 2 && last.rank() == out.ranges[out.ranges.size() - 2].rank()) {
      out.ranges_stabilized = true;
      break;
    }
    if (out.ranges.size() >= level_cap) break;
    out.ranges.push_back(linalg::image(rep.atilde, linalg::tensor_frame(d, last, tol.max_dim), tol));
  }
  out.K2 = out.ranges.back();
  out.stabilized = out.grades_stabilized && out.ranges_stabilized;

  auto& res = out.residuals;
  res["cross_grade_overlap"] = max_cross_overlap(out.grades);
  double grade_vs_range = 0.0;
  for (std::size_t m = 0; m < out.grades.size(); ++m) {
    grade_vs_range = std::max(grade_vs_range, linalg::max_overlap(out.grades[m], range_frame(rep, m + 1, tol)));
  }
  res["grade_range_overlap"] = grade_vs_range;
  const Frame parts[] = {out.K1, out.K2};
  const auto ds = linalg::direct_sum_check(parts, n, tol);
  res["direct_sum_overlap"] = ds.max_overlap;
  res["direct_sum_span_defect"] = ds.span_defect;
  res["reducing_defect_K1"] = structure::reducing_defect(rep, out.K1, tol);
  res["reducing_defect_K2"] = structure::reducing_defect(rep, out.K2, tol);
  // ran A_m = A_m(N) + ran A_{m+1}, for the levels that have a grade
  for (std::size_t m = 0; m <= 3; ++m) {
    const Frame grade = m < out.grades.size() ? out.grades[m] : Frame::empty(n);
    const Frame level[] = {grade, range_frame(rep, m + 1, tol)};
    const auto li = linalg::direct_sum_within(level, range_frame(rep, m, tol), tol);
    res["level_identity_defect_m" + std::to_string(m)] = std::max(li.max_overlap, li.span_defect);
  }
  res["rank_K1"] = static_cast<double>(out.K1.rank());
  res["rank_K2"] = static_cast<double>(out.K2.rank());
  out.hypothesis_flags = hypothesis_flags(rep, tol);
  return out;
}

struct ClassificationReport {
  Classification tag = Classification::Neither;
  double reducing_defect = 0.0;
  double induced_defect = 0.0;     // generation and orthogonality of restricted grades
  double invertible_defect = 0.0;  // |(I - P_image) B_S|
  double inverse_bound = 0.0;      // 1 / smallest singular value of the compressed map onto S
  std::size_t wandering_rank = 0;
};

/// Classifies the restriction to a reducing subspace S without the
/// reducing precondition; used by the multi-direction engine per direction.
inline ClassificationReport classify_restriction(const CovariantRep& rep, const Frame& s, const ToleranceConfig& tol,
                                                 std::size_t level_cap) {
  ClassificationReport out;
  out.reducing_defect = structure::reducing_defect(rep, s, tol);
  if (s.rank() == 0) {
    out.tag = Classification::Neither;
    return out;
  }
  const std::size_t n = rep.K_dim;
  const std::size_t d = rep.d();
  const Frame moved = linalg::image(rep.atilde, linalg::tensor_frame(d, s, tol.max_dim), tol);
  const Frame wand = linalg::intersect(s, linalg::orthocomplement(moved), tol);
  out.wandering_rank = wand.rank();
  const auto chain = image_chain(rep.atilde, d, wand, level_cap, tol);
  const Frame gen = linalg::span(chain, n, tol);
  out.induced_defect = wand.rank() == 0 ? 1.0
                                        : std::max(linalg::max_principal_angle(gen, s), max_cross_overlap(chain));
  out.invertible_defect = linalg::containment_residual(s, moved);
  const ComplexMatrix compressed = s.basis().adjoint() * rep.atilde * linalg::lift(d, s.basis(), tol.max_dim);
  const Eigen::VectorXd sv = linalg::singular_values(compressed);
  const double smin = sv.size() >= static_cast<Index>(s.rank()) ? sv(static_cast<Index>(s.rank()) - 1) : 0.0;
  out.inverse_bound = smin > 0.0 ? 1.0 / smin : std::numeric_limits<double>::infinity();
  if (out.induced_defect <= tol.eq_tol) {
    out.tag = Classification::Induced;
  } else if (out.invertible_defect <= tol.eq_tol && smin > tol.rank_tol) {
    out.tag = Classification::Invertible;
  }
  return out;
}

struct SummandClassification {
  ClassificationReport report;
  double containment_K1 = 0.0;
  double containment_K2 = 0.0;
};

inline SummandClassification classify_summand(const CovariantRep& rep, const Frame& s,
                                              const SingleDecomposition& dec, const ToleranceConfig& tol) {
  validate(rep);
  SummandClassification out;
  out.report = classify_restriction(rep, s, tol, dec.level_cap);
  if (out.report.reducing_defect > tol.eq_tol) {
    throw Error(ErrorCode::NotReducing,
                "subspace is not reducing (defect " + std::to_string(out.report.reducing_defect) + ")");
  }
  out.containment_K1 = linalg::containment_residual(s, dec.K1);
  out.containment_K2 = linalg::containment_residual(s, dec.K2);
  return out;
}

namespace detail {

/// Column of s farthest from t, as a witness for a containment failure.
inline ComplexVector farthest_column(const Frame& s, const Frame& t) {
  if (s.rank() == 0) return ComplexVector::Zero(static_cast<Index>(s.ambient_dim()));
  const ComplexMatrix off = s.basis() - t.basis() * (t.basis().adjoint() * s.basis());
  Index best = 0;
  off.colwise().norm().maxCoeff(&best);
  return s.basis().col(best);
}

}  // namespace detail

/// S must classify as `expected` and lie in the matching summand.
inline CheckReport uniqueness_check(const CovariantRep& rep, const Frame& s, Classification expected,
                                    const SingleDecomposition& dec, const ToleranceConfig& tol) {
  const SummandClassification c = classify_summand(rep, s, dec, tol);
  const Frame& target = expected == Classification::Induced ? dec.K1 : dec.K2;
  const double contain = expected == Classification::Induced ? c.containment_K1 : c.containment_K2;
  const bool tag_ok = c.report.tag == expected;
  CheckReport r = scalar_report("uniqueness_" + to_string(expected), contain + (tag_ok ? 0.0 : 1.0), tol.eq_tol);
  r.metrics["containment"] = contain;
  r.metrics["induced_defect"] = c.report.induced_defect;
  r.metrics["invertible_defect"] = c.report.invertible_defect;
  r.metrics["inverse_bound"] = c.report.inverse_bound;
  r.note = "classified " + to_string(c.report.tag);
  if (!r.passed) r.witness = detail::farthest_column(s, target);
  return r;
}

struct Summand {
  DirectionSet beta;
  Frame wandering;  // N_beta (the whole space for the empty set)
  Frame core;       // intersection over complement directions
  Frame K;
  bool stabilized = true;
  double nesting_defect = 0.0;
  std::map<std::string, double> residuals;
  std::vector<Classification> per_direction;
};

struct MultiDecomposition {
  std::vector<Summand> summands;  // indexed by direction-set mask
  std::vector<std::size_t> level_caps;
  bool stabilized = true;
  std::map<std::string, double> residuals;
  std::map<std::string, CheckReport> hypothesis_flags;

  const Summand& at(DirectionSet b) const { return summands.at(b.mask); }
};

inline constexpr std::size_t kMaxDirections = 4;

/// One summand: the wandering space of beta, pushed through the complement
/// directions and intersected (innermost direction first, relying on range
/// nesting so each direction is a single chain), then spanned over the beta
/// directions.
inline Summand build_summand(const ProductSystemRep& psr, DirectionSet beta, const std::vector<std::size_t>& caps,
                             const ToleranceConfig& tol) {
  const std::size_t n = psr.K_dim;
  Summand s;
  s.beta = beta;
  s.wandering = structure::wandering_space(psr, beta, tol);
  Frame cur = s.wandering;
  const auto comp = beta.complement().members();
  for (auto it = comp.rbegin(); it != comp.rend(); ++it) {
    const ChainSummary c = chain_intersection(image_chain(psr.atildes[*it], psr.d(*it), cur, caps[*it], tol), tol);
    s.stabilized = s.stabilized && c.stabilized;
    s.nesting_defect = std::max(s.nesting_defect, c.nesting_defect);
    cur = c.result;
  }
  s.core = cur;
  const auto mem = beta.members();
  for (auto it = mem.rbegin(); it != mem.rend(); ++it) {
    const ChainSummary c = chain_span(image_chain(psr.atildes[*it], psr.d(*it), cur, caps[*it], tol), n, tol);
    s.stabilized = s.stabilized && c.stabilized;
    cur = c.result;
  }
  s.K = cur;
  return s;
}

inline MultiDecomposition wold_multi(const ProductSystemRep& psr, const std::vector<std::size_t>& level_caps,
                                     const ToleranceConfig& tol, std::size_t max_directions = kMaxDirections) {
  validate(psr);
  const std::size_t k = psr.k();
  if (k > max_directions) {
    throw Error(ErrorCode::TooManyDirections,
                std::to_string(k) + " directions exceed the cap of " + std::to_string(max_directions));
  }
  if (level_caps.size() != k) throw Error(ErrorCode::DimensionMismatch, "one level cap per direction");
  const std::size_t n = psr.K_dim;
  MultiDecomposition out;
  out.level_caps = level_caps;
  const std::uint32_t count = 1u << k;
  std::vector<Frame> frames;
  for (std::uint32_t mask = 0; mask < count; ++mask) {
    Summand s = build_summand(psr, DirectionSet{mask, k}, level_caps, tol);
    out.stabilized = out.stabilized && s.stabilized;
    frames.push_back(s.K);
    out.summands.push_back(std::move(s));
  }

  const auto ds = linalg::direct_sum_check(frames, n, tol);
  out.residuals["pairwise_overlap"] = ds.max_overlap;
  out.residuals["total_span_defect"] = ds.span_defect;
  double reducing = 0.0;
  double classification = 0.0;
  double nesting = 0.0;
  for (auto& s : out.summands) {
    s.residuals["rank"] = static_cast<double>(s.K.rank());
    nesting = std::max(nesting, s.nesting_defect);
    for (std::size_t i = 0; i < k; ++i) {
      const CovariantRep rep = psr.direction(i);
      const std::string tag = std::to_string(i + 1);
      const ClassificationReport c = classify_restriction(rep, s.K, tol, level_caps[i]);
      s.per_direction.push_back(c.tag);
      s.residuals["reducing_defect@" + tag] = c.reducing_defect;
      reducing = std::max(reducing, c.reducing_defect);
      if (s.K.rank() == 0) continue;
      const double defect = s.beta.contains(i) ? c.induced_defect : c.invertible_defect;
      s.residuals["classification_defect@" + tag] = defect;
      if (!s.beta.contains(i)) s.residuals["inverse_bound@" + tag] = c.inverse_bound;
      classification = std::max(classification, defect);
    }
  }
  out.residuals["reducing_defect"] = reducing;
  out.residuals["classification_defect"] = classification;
  out.residuals["nesting_defect"] = nesting;

  auto put = [&](CheckReport r) { out.hypothesis_flags.emplace(r.name, std::move(r)); };
  put(hyp::check_twist_family(psr, tol));
  std::vector<Scope> scopes{Scope::Full};
  if (psr.window_mask) scopes.push_back(Scope::Window);
  for (Scope sc : scopes) {
    const auto tw = hyp::check_twisted(psr, tol, sc);
    put(tw.relations);
    put(tw.consistency);
    const auto db = hyp::check_doubly_twisted(psr, tol, sc, &tw.relations);
    put(db.relation);
    put(db.consistency);
  }
  return out;
}

/// Builds K_beta by raw enumeration: every complement word applied to N_beta
/// (intersected one word at a time), then every beta word applied to that
/// core, orthonormalized in one pass.
inline Frame brute_force_oracle(const ProductSystemRep& psr, DirectionSet beta, const std::vector<std::size_t>& caps,
                                const ToleranceConfig& tol, std::size_t max_vectors = 1000000) {
  validate(psr);
  if (caps.size() != psr.k()) throw Error(ErrorCode::DimensionMismatch, "one level cap per direction");
  const std::size_t n = psr.K_dim;
  Frame nb = Frame::full(n, tol.rank_tol);
  for (auto i : beta.members()) {
    // ker Atilde^* as the orthocomplement of the range
    nb = linalg::intersect(nb, linalg::orthocomplement(linalg::orthonormal_frame(psr.atildes[i], tol)), tol);
  }
  const auto comp = beta.complement().members();
  const auto mem = beta.members();
  std::vector<std::size_t> comp_caps;
  for (auto i : comp) comp_caps.push_back(caps[i]);
  std::size_t budget = 0;
  Frame core = nb;
  structure::for_each_multi_index(comp_caps, [&](const std::vector<std::size_t>& m) {
    const ComplexMatrix w = atilde_word(psr, comp, m, tol.max_dim);
    const std::size_t p = word_dim(psr, comp, m, tol.max_dim);
    budget += p * nb.rank();
    if (budget > max_vectors) throw Error(ErrorCode::Overflow, "oracle enumeration exceeds vector budget");
    const ComplexMatrix v = w * linalg::lift(p, nb.basis(), tol.max_dim);
    core = linalg::intersect(core, linalg::orthonormal_frame(v, tol, w.norm()), tol);
  });
  std::vector<std::size_t> mem_caps;
  for (auto i : mem) mem_caps.push_back(caps[i]);
  std::vector<ComplexMatrix> blocks;
  Index total = 0;
  double scale = 0.0;
  structure::for_each_multi_index(mem_caps, [&](const std::vector<std::size_t>& m) {
    const ComplexMatrix w = atilde_word(psr, mem, m, tol.max_dim);
    const std::size_t p = word_dim(psr, mem, m, tol.max_dim);
    budget += p * core.rank();
    if (budget > max_vectors) throw Error(ErrorCode::Overflow, "oracle enumeration exceeds vector budget");
    blocks.push_back(w * linalg::lift(p, core.basis(), tol.max_dim));
    total += blocks.back().cols();
    scale = std::max(scale, w.norm());
  });
  ComplexMatrix all(static_cast<Index>(n), total);
  Index at = 0;
  for (const auto& b : blocks) {
    all.middleCols(at, b.cols()) = b;
    at += b.cols();
  }
  return linalg::orthonormal_frame(all, tol);
}

/// S must be induced in the beta directions, invertible in the others, and
/// lie in K_beta.
inline CheckReport uniqueness_check(const ProductSystemRep& psr, const Frame& s, DirectionSet beta,
                                    const MultiDecomposition& dec, const ToleranceConfig& tol) {
  double worst_tag = 0.0;
  double reducing = 0.0;
  std::string tags;
  for (std::size_t i = 0; i < psr.k(); ++i) {
    const ClassificationReport c = classify_restriction(psr.direction(i), s, tol, dec.level_caps.at(i));
    reducing = std::max(reducing, c.reducing_defect);
    const Classification want = beta.contains(i) ? Classification::Induced : Classification::Invertible;
    if (c.tag != want) worst_tag = 1.0;
    tags += (tags.empty() ? "" : ",") + to_string(c.tag);
  }
  if (reducing > tol.eq_tol) {
    throw Error(ErrorCode::NotReducing, "subspace is not reducing (defect " + std::to_string(reducing) + ")");
  }
  const Frame& target = dec.at(beta).K;
  const double contain = linalg::containment_residual(s, target);
  CheckReport r = scalar_report("uniqueness" + beta.label(), contain + worst_tag, tol.eq_tol);
  r.metrics["containment"] = contain;
  r.note = "classified " + tags;
  if (!r.passed) r.witness = detail::farthest_column(s, target);
  return r;
}

}  // namespace wold::decomp
