#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include <Eigen/LU>

#include "wold/all.hpp"

using namespace wold;
using linalg::Complex;
using linalg::Frame;
using linalg::Index;

namespace {

// ---- test-side oracles: plain loops, Gram-Schmidt and LU, no SVD ----

ComplexMatrix naive_kron(const ComplexMatrix& a, const ComplexMatrix& b) {
  ComplexMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < a.cols(); ++j)
      for (Index k = 0; k < b.rows(); ++k)
        for (Index l = 0; l < b.cols(); ++l) out(i * b.rows() + k, j * b.cols() + l) = a(i, j) * b(k, l);
  return out;
}

// Modified Gram-Schmidt with one reorthogonalization pass.
ComplexMatrix gs_basis(const ComplexMatrix& m, double tol = 1e-9) {
  std::vector<ComplexVector> cols;
  const double scale = std::max(1.0, m.norm());
  for (Index c = 0; c < m.cols(); ++c) {
    ComplexVector v = m.col(c);
    for (int pass = 0; pass < 2; ++pass)
      for (const auto& q : cols) v -= q * q.dot(v);
    if (v.norm() > tol * scale) cols.push_back(v / v.norm());
  }
  ComplexMatrix out(m.rows(), static_cast<Index>(cols.size()));
  for (std::size_t i = 0; i < cols.size(); ++i) out.col(static_cast<Index>(i)) = cols[i];
  return out;
}

ComplexMatrix projector_of(const ComplexMatrix& basis) { return basis * basis.adjoint(); }

double subspace_distance(const ComplexMatrix& b1, const ComplexMatrix& b2) {
  return (projector_of(b1) - projector_of(b2)).norm();
}

ComplexMatrix lu_kernel(const ComplexMatrix& a) {
  Eigen::FullPivLU<ComplexMatrix> lu(a);
  lu.setThreshold(1e-10);
  if (lu.rank() == a.cols()) return ComplexMatrix(a.cols(), 0);
  return gs_basis(lu.kernel());
}

ComplexMatrix random_matrix(Index r, Index c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  ComplexMatrix m(r, c);
  for (Index i = 0; i < r; ++i)
    for (Index j = 0; j < c; ++j) m(i, j) = Complex(nd(rng), nd(rng));
  return m;
}

ComplexMatrix coords(Index n, std::initializer_list<Index> idx) {
  ComplexMatrix b = ComplexMatrix::Zero(n, static_cast<Index>(idx.size()));
  Index c = 0;
  for (Index i : idx) b(i, c++) = 1.0;
  return b;
}

// Atilde_m built by explicit Kronecker loops.
ComplexMatrix naive_power(const ComplexMatrix& a, Index d, int m) {
  const Index n = a.rows();
  ComplexMatrix out = ComplexMatrix::Identity(n, n);
  Index p = 1;
  for (int j = 0; j < m; ++j) {
    out = out * naive_kron(ComplexMatrix::Identity(p, p), a);
    p *= d;
  }
  return out;
}

// K1 = span of Atilde_l applied to E^l (x) ker Atilde^*.
ComplexMatrix naive_induced_part(const ComplexMatrix& a, Index d, int cap) {
  const ComplexMatrix nb = lu_kernel(a.adjoint());
  ComplexMatrix all(a.rows(), 0);
  Index p = 1;
  for (int l = 0; l <= cap; ++l) {
    const ComplexMatrix v = naive_power(a, d, l) * naive_kron(ComplexMatrix::Identity(p, p), nb);
    ComplexMatrix next(a.rows(), all.cols() + v.cols());
    next << all, v;
    all = next;
    p *= d;
  }
  return gs_basis(all);
}

ToleranceConfig tol;

const std::string data_dir = WOLD_DATA_DIR;

CovariantRep block_example() {
  return gen::gen_block_direct_sum({gen::gen_truncated_fock(2, 3, 1), gen::unitary_rep(2, 7, 2)});
}

Complex fifth_root() { return std::polar(1.0, 2.0 * std::numbers::pi / 5.0); }

}  // namespace

// ================= linalg =================

TEST(Linalg, KronMatchesIndexLoops) {
  const ComplexMatrix a = random_matrix(2, 3, 1);
  const ComplexMatrix b = random_matrix(3, 2, 2);
  EXPECT_LT((linalg::kron(a, b) - naive_kron(a, b)).norm(), 1e-14);
}

TEST(Linalg, KronMixedProduct) {
  const ComplexMatrix a = random_matrix(2, 2, 3), b = random_matrix(3, 3, 4);
  const ComplexMatrix c = random_matrix(2, 2, 5), d = random_matrix(3, 3, 6);
  EXPECT_LT((linalg::kron(a, b) * linalg::kron(c, d) - linalg::kron(a * c, b * d)).norm(), 1e-12);
}

TEST(Linalg, KronRefusesOversizedProducts) {
  const ComplexMatrix a = ComplexMatrix::Identity(64, 64);
  EXPECT_THROW(linalg::kron(a, a, 1000), Error);
  try {
    linalg::kron(a, a, 1000);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Overflow);
  }
}

TEST(Linalg, LiftIsIdentityKron) {
  const ComplexMatrix x = random_matrix(3, 3, 7);
  EXPECT_LT((linalg::lift(2, x) - naive_kron(ComplexMatrix::Identity(2, 2), x)).norm(), 1e-15);
}

TEST(Linalg, OrthonormalFrameRankAndProjector) {
  ComplexMatrix m = random_matrix(6, 3, 8);
  ComplexMatrix dup(6, 5);
  dup << m, m.col(0) + m.col(1), 2.0 * m.col(2);
  const Frame f = linalg::orthonormal_frame(dup, tol);
  EXPECT_EQ(f.rank(), 3u);
  EXPECT_LT((f.basis().adjoint() * f.basis() - ComplexMatrix::Identity(3, 3)).norm(), 1e-13);
  const ComplexMatrix p = f.projector();
  EXPECT_LT((p * p - p).norm(), 1e-13);
  EXPECT_LT((p - p.adjoint()).norm(), 1e-14);
  EXPECT_LT(subspace_distance(f.basis(), gs_basis(m)), 1e-12);
}

TEST(Linalg, RankCutoffIgnoresRoundoffResidue) {
  // A rank-one matrix plus entries at the roundoff scale stays rank one.
  ComplexMatrix m = random_matrix(5, 1, 9) * random_matrix(1, 5, 10);
  m += 1e-15 * random_matrix(5, 5, 11);
  EXPECT_EQ(linalg::orthonormal_frame(m, tol).rank(), 1u);
}

TEST(Linalg, EmptyAndFullFrames) {
  EXPECT_EQ(Frame::empty(4).rank(), 0u);
  EXPECT_EQ(Frame::full(4).rank(), 4u);
  EXPECT_EQ(linalg::orthocomplement(Frame::empty(4)).rank(), 4u);
  EXPECT_EQ(linalg::orthocomplement(Frame::full(4)).rank(), 0u);
}

TEST(Linalg, OrthocomplementIsComplementary) {
  const Frame f = linalg::orthonormal_frame(random_matrix(7, 3, 12), tol);
  const Frame c = linalg::orthocomplement(f);
  EXPECT_EQ(c.rank(), 4u);
  EXPECT_LT((f.basis().adjoint() * c.basis()).norm(), 1e-13);
  EXPECT_LT((f.projector() + c.projector() - ComplexMatrix::Identity(7, 7)).norm(), 1e-13);
}

TEST(Linalg, KernelMatchesLu) {
  const ComplexMatrix a = random_matrix(3, 6, 13);
  const Frame k = linalg::kernel(a, tol);
  EXPECT_EQ(k.rank(), 3u);
  EXPECT_LT((a * k.basis()).norm(), 1e-12);
  EXPECT_LT(subspace_distance(k.basis(), lu_kernel(a)), 1e-10);
}

TEST(Linalg, ImageOfFrame) {
  const ComplexMatrix a = random_matrix(5, 4, 14);
  const Frame s = Frame::from_orthonormal(coords(4, {0, 2}));
  const Frame img = linalg::image(a, s, tol);
  EXPECT_EQ(img.rank(), 2u);
  EXPECT_LT(subspace_distance(img.basis(), gs_basis(a * coords(4, {0, 2}))), 1e-12);
  EXPECT_THROW(linalg::image(a, Frame::full(5), tol), Error);
}

TEST(Linalg, IntersectCoordinateSubspaces) {
  const Frame s1 = Frame::from_orthonormal(coords(5, {0, 1, 2}));
  const Frame s2 = Frame::from_orthonormal(coords(5, {1, 2, 3}));
  const Frame i = linalg::intersect(s1, s2, tol);
  EXPECT_EQ(i.rank(), 2u);
  EXPECT_LT(subspace_distance(i.basis(), coords(5, {1, 2})), 1e-13);
}

TEST(Linalg, IntersectMatchesStackedKernel) {
  // x = B1 u = B2 v  <=>  [B1, -B2] (u, v) = 0
  const ComplexMatrix common = random_matrix(8, 2, 15);
  ComplexMatrix g1(8, 4), g2(8, 4);
  g1 << common, random_matrix(8, 2, 16);
  g2 << common * random_matrix(2, 2, 17), random_matrix(8, 2, 18);
  const Frame s1 = linalg::orthonormal_frame(g1, tol), s2 = linalg::orthonormal_frame(g2, tol);
  ComplexMatrix stacked(8, 8);
  stacked << s1.basis(), -s2.basis();
  const ComplexMatrix ker = lu_kernel(stacked);
  const ComplexMatrix expected = gs_basis(s1.basis() * ker.topRows(4));
  const Frame got = linalg::intersect(s1, s2, tol);
  EXPECT_EQ(got.rank(), 2u);
  EXPECT_LT(subspace_distance(got.basis(), expected), 1e-9);
}

TEST(Linalg, PrincipalAngleBetweenLines) {
  for (double theta : {1e-7, 1e-3, 0.3, 1.2, std::numbers::pi / 2}) {
    ComplexMatrix a(2, 1), b(2, 1);
    a << 1.0, 0.0;
    b << std::cos(theta), Complex(0.0, std::sin(theta));
    const double got =
        linalg::max_principal_angle(Frame::from_orthonormal(a), Frame::from_orthonormal(b));
    EXPECT_NEAR(got, theta, 1e-12 + 1e-9 * theta);
  }
}

TEST(Linalg, PrincipalAngleRankMismatchIsRightAngle) {
  EXPECT_NEAR(linalg::max_principal_angle(Frame::from_orthonormal(coords(3, {0})),
                                          Frame::from_orthonormal(coords(3, {0, 1}))),
              std::numbers::pi / 2, 1e-15);
}

TEST(Linalg, SpanAndDirectSum) {
  const Frame a = Frame::from_orthonormal(coords(4, {0}));
  const Frame b = Frame::from_orthonormal(coords(4, {1, 2}));
  const Frame c = Frame::from_orthonormal(coords(4, {3}));
  const std::vector<Frame> parts{a, b, c};
  EXPECT_EQ(linalg::span(parts, 4, tol).rank(), 4u);
  const auto ok = linalg::direct_sum_check(parts, 4, tol);
  EXPECT_TRUE(ok.passed);
  EXPECT_LT(ok.max_overlap, 1e-15);
  const auto missing = linalg::direct_sum_check(std::vector<Frame>{a, b}, 4, tol);
  EXPECT_FALSE(missing.passed);
  const auto overlap = linalg::direct_sum_check(std::vector<Frame>{a, b, c, a}, 4, tol);
  EXPECT_FALSE(overlap.passed);
  EXPECT_NEAR(overlap.max_overlap, 1.0, 1e-12);
}

TEST(Linalg, PsdCheckWitness) {
  ComplexMatrix h = ComplexMatrix::Zero(3, 3);
  h(0, 0) = 1.0;
  h(1, 1) = -0.5;
  h(2, 2) = 2.0;
  const auto r = linalg::psd_check(h, tol);
  EXPECT_FALSE(r.psd);
  EXPECT_NEAR(r.min_eigenvalue, -0.5, 1e-14);
  EXPECT_NEAR(std::real(r.witness.dot(h * r.witness)), -0.5, 1e-14);
  EXPECT_TRUE(linalg::psd_check(ComplexMatrix::Identity(3, 3), tol).psd);
}

TEST(Linalg, PsdCheckRejectsNonHermitian) {
  ComplexMatrix h = ComplexMatrix::Identity(2, 2);
  h(0, 1) = 1.0;
  try {
    linalg::psd_check(h, tol);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NotHermitian);
  }
}

TEST(Linalg, OperatorResidualWitnessAttainsNorm) {
  const ComplexMatrix r = random_matrix(4, 4, 19);
  const auto res = linalg::operator_residual(r);
  EXPECT_NEAR((r * res.witness).norm(), res.norm, 1e-12);
  EXPECT_NEAR(res.witness.norm(), 1.0, 1e-14);
}

TEST(Linalg, NonFiniteInputIsRejected) {
  ComplexMatrix m = ComplexMatrix::Identity(2, 2);
  m(1, 0) = std::numeric_limits<double>::quiet_NaN();
  try {
    linalg::require_finite(m, "m");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NonFinite);
  }
}

TEST(Linalg, ToleranceValidation) {
  ToleranceConfig bad;
  bad.rank_tol = -1.0;
  EXPECT_THROW(bad.validate(), Error);
  ToleranceConfig bad2;
  bad2.psd_tol = 1e-3;
  EXPECT_THROW(bad2.validate(), Error);
  EXPECT_NO_THROW(ToleranceConfig{}.validate());
}

// ================= repn =================

TEST(Repn, DirectionSetLabels) {
  const DirectionSet s{0b101u, 3};
  EXPECT_EQ(s.label(), "{1,3}");
  EXPECT_EQ(s.complement().label(), "{2}");
  EXPECT_EQ(DirectionSet::none(2).label(), "{}");
  EXPECT_EQ(DirectionSet::all(2).members().size(), 2u);
}

TEST(Repn, IteratedAtildeMatchesKronLoops) {
  const CovariantRep rep = gen::gen_truncated_fock(2, 3, 1);
  for (int m = 0; m <= 3; ++m) {
    const ComplexMatrix got = atilde_iter(rep, static_cast<std::size_t>(m), tol.max_dim);
    EXPECT_LT((got - naive_power(rep.atilde, 2, m)).norm(), 1e-13) << "m=" << m;
  }
}

TEST(Repn, ScalarModeIteratesAsPowers) {
  const ComplexMatrix t = gen::nilpotent_shift(4) + 0.5 * gen::cyclic_shift(4);
  const CovariantRep rep = gen::single_operator_rep(t);
  ComplexMatrix p = ComplexMatrix::Identity(4, 4);
  for (std::size_t m = 0; m <= 4; ++m) {
    EXPECT_LT((atilde_iter(rep, m, tol.max_dim) - p).norm(), 1e-13);
    p = t * p;
  }
}

TEST(Repn, ValidateRejectsShapeMismatch) {
  CovariantRep rep = gen::single_operator_rep(ComplexMatrix::Identity(3, 3));
  rep.atilde = ComplexMatrix::Identity(3, 4);
  try {
    validate(rep);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DimensionMismatch);
  }
}

TEST(Repn, WordDimensionOverflow) {
  EXPECT_THROW(checked_pow(2, 40, std::size_t{1} << 20), Error);
  EXPECT_EQ(checked_pow(3, 4, 1000), 81u);
}

namespace {
// Algebra C^2 generated by p = diag(1, 0). E = C^2 with e0 = p E (1-p) and
// e1 = (1-p) E p; A(e0) and A(e1) map the matching corners of K = C^2.
CovariantRep corner_rep(bool broken) {
  CovariantRep rep;
  rep.K_dim = 2;
  ComplexMatrix p = ComplexMatrix::Zero(2, 2);
  p(0, 0) = 1.0;
  ComplexMatrix q = ComplexMatrix::Identity(2, 2) - p;
  rep.sigma = {p};
  rep.E.dim = 2;
  rep.E.left_action = {p};
  rep.E.right_action = {q};
  rep.atilde = ComplexMatrix::Zero(2, 4);
  rep.atilde(0, 1) = 0.7;  // A(e0) = 0.7 e_0 e_1^*
  rep.atilde(1, 2) = 0.9;  // A(e1) = 0.9 e_1 e_0^*
  if (broken) rep.atilde(0, 0) = 0.3;
  return rep;
}
}  // namespace

TEST(Repn, CovarianceWithNontrivialAlgebra) {
  EXPECT_TRUE(check_covariance(corner_rep(false), tol).passed);
  const CheckReport bad = check_covariance(corner_rep(true), tol);
  EXPECT_FALSE(bad.passed);
  EXPECT_GT(bad.residual, 0.1);
}

TEST(Repn, ProductDefaults) {
  const ProductSystemRep psr = gen::gen_twisted_fock_pair(fifth_root(), 2, 1);
  EXPECT_EQ(psr.k(), 2u);
  EXPECT_LT((psr.twist(1, 0) - psr.twist(0, 1).adjoint()).norm(), 1e-15);
  EXPECT_LT((psr.flip(0, 1) * psr.flip(1, 0) - ComplexMatrix::Identity(1, 1)).norm(), 1e-15);
}

// ================= generators =================

TEST(Generators, RandomUnitaryIsUnitaryAndSeeded) {
  const ComplexMatrix u = gen::random_unitary(5, 3);
  EXPECT_LT((u.adjoint() * u - ComplexMatrix::Identity(5, 5)).norm(), 1e-13);
  EXPECT_EQ((u - gen::random_unitary(5, 3)).norm(), 0.0);
  EXPECT_GT((u - gen::random_unitary(5, 4)).norm(), 0.1);
}

TEST(Generators, ScaledIsometryRejectsBadInput) {
  EXPECT_THROW(gen::gen_scaled_isometry(gen::unitary_rep(3), 1.5), Error);
  const CovariantRep non_iso = gen::single_operator_rep(0.5 * ComplexMatrix::Identity(2, 2));
  try {
    gen::gen_scaled_isometry(non_iso, 0.5);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NotIsometric);
  }
}

TEST(Generators, WeightedCyclicRejectsLargeWeights) {
  try {
    gen::gen_weighted_cyclic_shift(1, 3, ComplexMatrix::Constant(1, 3, 1.5));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::BadWeights);
  }
}

TEST(Generators, TruncatedFockShape) {
  const CovariantRep rep = gen::gen_truncated_fock(2, 3, 1);
  EXPECT_EQ(rep.K_dim, 15u);
  ASSERT_TRUE(rep.window_mask.has_value());
  EXPECT_EQ(rep.window_mask->rank(), 7u);
  // isometric on the window, zero on the top level
  const ComplexMatrix c = linalg::lift(2, rep.window_mask->basis());
  const ComplexMatrix m = rep.atilde * c;
  EXPECT_LT((m.adjoint() * m - ComplexMatrix::Identity(14, 14)).norm(), 1e-14);
}

TEST(Generators, TwistedPairNeedsUnimodularOmega) {
  try {
    gen::gen_twisted_fock_pair(Complex(0.9, 0.0), 2, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NotUnimodular);
  }
  EXPECT_THROW(gen::gen_twisted_tensor_pair(gen::Factor::cyclic(3), gen::Factor::fock(2), Complex(-1.0, 0.0), 1),
               Error);
}

// ================= hypotheses =================

TEST(Hypotheses, ScaledIsometryNearIsometric) {
  const CovariantRep rep = gen::gen_scaled_isometry(gen::unitary_rep(4), 0.5);
  const auto r = hyp::check_near_isometric(rep, 4, tol);
  EXPECT_TRUE(r.a.passed);
  EXPECT_NEAR(r.a.metrics.at("delta"), 0.5, 1e-10);
  EXPECT_TRUE(r.b.passed);
  EXPECT_LE(r.b.residual, 1e-10);
  // the identity Atilde_m^* Atilde_{m+1} = beta^{2m} (I (x) Atilde), checked directly
  for (int m = 1; m <= 4; ++m) {
    const ComplexMatrix lhs = naive_power(rep.atilde, 1, m).adjoint() * naive_power(rep.atilde, 1, m + 1);
    EXPECT_LT((lhs - std::pow(0.25, m) * rep.atilde).norm(), 1e-12);
  }
}

TEST(Hypotheses, IsometricAndCoisometric) {
  const CovariantRep u = gen::unitary_rep(3);
  EXPECT_TRUE(hyp::check_isometric(u, tol).passed);
  EXPECT_TRUE(hyp::check_coisometric(u, tol).passed);
  const CovariantRep shift = gen::single_operator_rep(gen::nilpotent_shift(3));
  EXPECT_FALSE(hyp::check_isometric(shift, tol).passed);
  EXPECT_FALSE(hyp::check_left_invertible(shift, tol).passed);
}

TEST(Hypotheses, WeightedCyclicWeakestBasisVector) {
  // n = 2 directions on C^4 with constant weight 0.8: Atilde Atilde^* = 2 (0.64) I
  const CovariantRep rep = gen::gen_weighted_cyclic_shift(2, 4, ComplexMatrix::Constant(2, 4, 0.8));
  const auto r = hyp::check_near_isometric(rep, 2, tol);
  EXPECT_FALSE(r.a.passed);  // Atilde: C^8 -> C^4 has a kernel
  EXPECT_NEAR(r.a.metrics.at("op_norm"), std::sqrt(2.0) * 0.8, 1e-12);
  EXPECT_NEAR(r.a.metrics.at("weakest_basis_norm"), 0.8, 1e-12);
  EXPECT_DOUBLE_EQ(r.a.metrics.at("weakest_basis_direction"), 0.0);
  EXPECT_DOUBLE_EQ(r.a.metrics.at("weakest_basis_vector"), 0.0);
}

TEST(Hypotheses, Mt1ConditionOneOnIsometry) {
  const auto r = hyp::check_mt1(gen::unitary_rep(4), 1, {}, tol);
  EXPECT_TRUE(r.passed);
  EXPECT_GE(r.metrics.at("min_eigenvalue"), -1e-10);
}

TEST(Hypotheses, Mt1ConditionOneFailsOnScaledIsometry) {
  const double beta = 0.5;
  const CovariantRep rep = gen::gen_scaled_isometry(gen::unitary_rep(4), beta);
  const auto r = hyp::check_mt1(rep, 1, {}, tol);
  EXPECT_FALSE(r.passed);
  ASSERT_TRUE(r.witness.has_value());
  // 2|T x|^2 - |T^2 x|^2 - |x|^2 evaluated from T directly
  const ComplexMatrix& t = rep.atilde;
  const ComplexVector& x = *r.witness;
  const double q = 2.0 * (t * x).squaredNorm() - (t * t * x).squaredNorm() - x.squaredNorm();
  EXPECT_LE(q, -std::pow(1.0 - beta * beta, 2) + 1e-9);
}

TEST(Hypotheses, Mt1ConditionFourNeedsSequence) {
  try {
    hyp::check_mt1(gen::unitary_rep(2), 4, {}, tol);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::BadParams);
  }
  hyp::Mt1Params p;
  p.l = 1.0;
  p.l_seq = {1.0, 1.0, 1.0};
  EXPECT_TRUE(hyp::check_mt1(gen::unitary_rep(2), 4, p, tol).passed);
}

TEST(Hypotheses, WindowScopeSeparatesTruncation) {
  const CovariantRep rep = gen::gen_truncated_fock(2, 2, 1);
  EXPECT_FALSE(hyp::check_isometric(rep, tol, Scope::Full).passed);
  const CheckReport w = hyp::check_isometric(rep, tol, Scope::Window);
  EXPECT_TRUE(w.passed);
  EXPECT_TRUE(w.window_restricted);
  EXPECT_EQ(w.name, "isometric@window");
}

TEST(Hypotheses, TwistedPairRelations) {
  const ProductSystemRep psr = gen::gen_twisted_fock_pair(fifth_root(), 3, 1);
  EXPECT_TRUE(hyp::check_twist_family(psr, tol).passed);
  const auto tw = hyp::check_twisted(psr, tol, Scope::Window);
  EXPECT_LE(tw.relations.residual, 1e-9);
  EXPECT_LE(tw.consistency.residual, 1e-12);
  const auto db = hyp::check_doubly_twisted(psr, tol, Scope::Window, &tw.relations);
  EXPECT_LE(db.relation.residual, 1e-9);
  EXPECT_LE(db.consistency.residual, 1e-12);
}

TEST(Hypotheses, TwistedRelationOracle) {
  // T1 T2 = omega-bar-adjusted: with T2 = D (x) S, T1 = S (x) I and D e_p = omega^p e_p,
  // T2 T1 = omega T1 T2 on the window, checked from the blocks directly.
  const Complex w = fifth_root();
  const ProductSystemRep psr = gen::gen_twisted_fock_pair(w, 3, 1);
  const ComplexMatrix& t1 = psr.atildes[0];
  const ComplexMatrix& t2 = psr.atildes[1];
  const ComplexMatrix c = psr.window_mask->basis();
  EXPECT_LT(((t2 * t1 - w * t1 * t2) * c).norm(), 1e-13);
  EXPECT_GT(((t1 * t2 - t2 * t1) * c).norm(), 0.1);
}

TEST(Hypotheses, BrokenTwistFails) {
  ProductSystemRep psr = gen::gen_twisted_fock_pair(fifth_root(), 2, 1);
  psr.twists[{0, 1}] *= 1.001;
  EXPECT_FALSE(hyp::check_twist_family(psr, tol).passed);
}

// ================= structure =================

TEST(Structure, LeftInverseOnBoundedBelowRep) {
  const CovariantRep rep = gen::gen_scaled_isometry(gen::unitary_rep(3), 0.5);
  const auto li = structure::left_inverse(rep, tol);
  EXPECT_FALSE(li.window_guarded);
  EXPECT_LT((li.L * rep.atilde - ComplexMatrix::Identity(3, 3)).norm(), 1e-12);
  EXPECT_NEAR(li.gram_cond, 1.0, 1e-10);
}

TEST(Structure, GuardedLeftInverseOnWindow) {
  const CovariantRep rep = gen::gen_truncated_fock(1, 3, 1);
  const auto li = structure::left_inverse(rep, tol);
  EXPECT_TRUE(li.window_guarded);
  const ComplexMatrix c = rep.window_mask->basis();
  EXPECT_LT((li.L * rep.atilde * c - c).norm(), 1e-13);
}

TEST(Structure, LeftInverseRefusedWithoutWindow) {
  const CovariantRep rep = gen::single_operator_rep(gen::nilpotent_shift(3));
  try {
    structure::left_inverse(rep, tol);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NotLeftInvertible);
  }
}

TEST(Structure, IllConditionedGramRefused) {
  ComplexMatrix t = ComplexMatrix::Identity(2, 2);
  t(1, 1) = 1e-7;  // Gram condition 1e14
  try {
    structure::left_inverse(gen::single_operator_rep(t), tol);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::IllConditioned);
  }
}

TEST(Structure, RangeProjectionMatchesGsOfPowers) {
  const CovariantRep rep = gen::gen_truncated_fock(2, 3, 1);
  for (std::size_t m = 1; m <= 2; ++m) {
    const ComplexMatrix p = structure::range_projection(rep, m, tol);
    const ComplexMatrix expected = projector_of(gs_basis(naive_power(rep.atilde, 2, static_cast<int>(m))));
    EXPECT_LT((p - expected).norm(), 1e-10) << "m=" << m;
  }
}

TEST(Structure, ChiIsHomomorphismOnCommutant) {
  const ProductSystemRep psr = gen::gen_twisted_fock_pair(fifth_root(), 3, 1);
  const auto r = structure::verify_chi(psr, 10, 99, tol, 2);
  EXPECT_TRUE(r.homomorphism.passed) << r.homomorphism.residual;
  EXPECT_TRUE(r.commutation.passed) << r.commutation.residual;
  EXPECT_TRUE(r.projection.passed) << r.projection.residual;
}

TEST(Structure, WanderingSpaceIsJointCokernel) {
  const ProductSystemRep psr = gen::gen_twisted_fock_pair(Complex(1.0, 0.0), 2, 1);
  const Frame n12 = structure::wandering_space(psr, DirectionSet::all(2), tol);
  ComplexMatrix stacked(psr.atildes[0].cols() + psr.atildes[1].cols(), 9);
  stacked << psr.atildes[0].adjoint(), psr.atildes[1].adjoint();
  EXPECT_LT(subspace_distance(n12.basis(), lu_kernel(stacked)), 1e-10);
  EXPECT_EQ(n12.rank(), 1u);  // the vacuum e_0 (x) e_0
  EXPECT_EQ(structure::wandering_space(psr, DirectionSet::none(2), tol).rank(), 9u);
}

TEST(Structure, ImageChainStopsAtZero) {
  const CovariantRep rep = gen::single_operator_rep(gen::nilpotent_shift(4));
  const Frame e0 = Frame::from_orthonormal(coords(4, {0}));
  const auto chain = structure::image_chain(rep.atilde, 1, e0, 10, tol);
  ASSERT_EQ(chain.size(), 5u);  // e0, e1, e2, e3, then the zero frame ends the chain
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(chain[i].rank(), 1u);
  EXPECT_EQ(chain[4].rank(), 0u);
}

TEST(Structure, NBetaProperties) {
  const ProductSystemRep psr = gen::gen_four_block_pair(2, 2, Complex(1.0, 0.0), 1);
  for (std::uint32_t mask = 1; mask < 4; ++mask) {
    for (const auto& r : structure::verify_N_beta_properties(psr, DirectionSet{mask, 2}, tol)) {
      EXPECT_TRUE(r.passed) << r.name << " " << r.residual;
    }
  }
}

TEST(Structure, ExchangeOnUntwistedPair) {
  const ProductSystemRep psr = gen::gen_twisted_fock_pair(Complex(1.0, 0.0), 3, 1);
  const auto ex = structure::verify_exchange(psr, 0, 1, 4, tol);
  EXPECT_TRUE(ex.report.passed);
  EXPECT_TRUE(ex.lhs_stabilized);
  EXPECT_TRUE(ex.rhs_stabilized);
  EXPECT_EQ(ex.lhs.rank(), ex.rhs.rank());
}

TEST(Structure, IdentitiesPassOnFourBlockPair) {
  const ProductSystemRep psr = gen::gen_four_block_pair(2, 2, Complex(-1.0, 0.0), 1);
  for (const auto& r : structure::verify_structure_identities(psr, 3, tol, Scope::Window, 5)) {
    EXPECT_TRUE(r.passed) << r.name << " " << r.residual << " " << r.note;
  }
}

// ================= decomposition =================

TEST(Decomposition, BlockExampleRanksAndResiduals) {
  const CovariantRep rep = block_example();
  const auto dec = decomp::wold_single(rep, 6, tol);
  EXPECT_EQ(dec.K1.rank(), 15u);
  EXPECT_EQ(dec.K2.rank(), 2u);
  ASSERT_EQ(dec.grades.size(), 4u);
  const std::size_t expected[] = {1, 2, 4, 8};
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(dec.grades[i].rank(), expected[i]);
  EXPECT_TRUE(dec.stabilized);
  for (const auto& [k, v] : dec.residuals) {
    if (k.rfind("rank_", 0) == 0) continue;
    EXPECT_LE(v, 1e-9) << k;
  }
}

TEST(Decomposition, InducedPartMatchesNaiveSpan) {
  const CovariantRep rep = block_example();
  const auto dec = decomp::wold_single(rep, 6, tol);
  EXPECT_LT(subspace_distance(dec.K1.basis(), naive_induced_part(rep.atilde, 2, 6)), 1e-9);
}

TEST(Decomposition, UnitaryHasNoInducedPart) {
  const auto dec = decomp::wold_single(gen::unitary_rep(4, 11, 2), 6, tol);
  EXPECT_EQ(dec.K1.rank(), 0u);
  EXPECT_EQ(dec.K2.rank(), 4u);
}

TEST(Decomposition, ShiftIsPurelyInduced) {
  const auto dec = decomp::wold_single(gen::gen_truncated_fock(1, 5, 2), 8, tol);
  EXPECT_EQ(dec.K1.rank(), 12u);
  EXPECT_EQ(dec.K2.rank(), 0u);
}

TEST(Decomposition, UniquenessOnBlocks) {
  const CovariantRep rep = block_example();
  const auto dec = decomp::wold_single(rep, 6, tol);
  ComplexMatrix fock = ComplexMatrix::Zero(17, 15);
  fock.topRows(15) = ComplexMatrix::Identity(15, 15);
  ComplexMatrix unit = ComplexMatrix::Zero(17, 2);
  unit.bottomRows(2) = ComplexMatrix::Identity(2, 2);
  const auto inv = decomp::uniqueness_check(rep, Frame::from_orthonormal(unit), decomp::Classification::Invertible,
                                            dec, tol);
  EXPECT_TRUE(inv.passed) << inv.residual;
  const auto ind = decomp::uniqueness_check(rep, Frame::from_orthonormal(fock), decomp::Classification::Induced,
                                            dec, tol);
  EXPECT_TRUE(ind.passed) << ind.residual;
  // the wrong label fails
  EXPECT_FALSE(decomp::uniqueness_check(rep, Frame::from_orthonormal(unit), decomp::Classification::Induced, dec, tol)
                   .passed);
}

TEST(Decomposition, NonReducingSummandRefused) {
  const CovariantRep rep = block_example();
  const auto dec = decomp::wold_single(rep, 6, tol);
  try {
    decomp::classify_summand(rep, Frame::from_orthonormal(coords(17, {0})), dec, tol);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NotReducing);
  }
}

TEST(Decomposition, FourBlockSummands) {
  const ProductSystemRep psr = gen::gen_four_block_pair(2, 2, Complex(1.0, 0.0), 1);
  const std::vector<std::size_t> caps{4, 4};
  const auto dec = decomp::wold_multi(psr, caps, tol);
  EXPECT_EQ(dec.at(DirectionSet{0b00u, 2}).K.rank(), 4u);
  EXPECT_EQ(dec.at(DirectionSet{0b01u, 2}).K.rank(), 6u);
  EXPECT_EQ(dec.at(DirectionSet{0b10u, 2}).K.rank(), 6u);
  EXPECT_EQ(dec.at(DirectionSet{0b11u, 2}).K.rank(), 9u);
  for (const auto& s : dec.summands) {
    const Frame o = decomp::brute_force_oracle(psr, s.beta, caps, tol);
    EXPECT_LE(linalg::max_principal_angle(o, s.K), 1e-8) << s.beta.label();
  }
}

TEST(Decomposition, FourBlockSummandsMatchCoordinateBlocks) {
  // blocks are laid out in order Fock(x)Fock, Fock(x)cyclic, cyclic(x)Fock, cyclic(x)cyclic
  const ProductSystemRep psr = gen::gen_four_block_pair(2, 2, Complex(1.0, 0.0), 1);
  const auto dec = decomp::wold_multi(psr, {4, 4}, tol);
  auto block = [](Index start, Index len) {
    ComplexMatrix b = ComplexMatrix::Zero(25, len);
    b.block(start, 0, len, len) = ComplexMatrix::Identity(len, len);
    return b;
  };
  EXPECT_LT(subspace_distance(dec.at(DirectionSet{0b11u, 2}).K.basis(), block(0, 9)), 1e-9);
  EXPECT_LT(subspace_distance(dec.at(DirectionSet{0b01u, 2}).K.basis(), block(9, 6)), 1e-9);
  EXPECT_LT(subspace_distance(dec.at(DirectionSet{0b10u, 2}).K.basis(), block(15, 6)), 1e-9);
  EXPECT_LT(subspace_distance(dec.at(DirectionSet{0b00u, 2}).K.basis(), block(21, 4)), 1e-9);
}

TEST(Decomposition, MultiWithOneDirectionAgreesWithSingle) {
  const CovariantRep rep = gen::gen_block_direct_sum({gen::gen_truncated_fock(1, 3, 1), gen::unitary_rep(3)});
  const auto single = decomp::wold_single(rep, 6, tol);
  const auto multi = decomp::wold_multi(gen::as_product_system(rep), {6}, tol);
  EXPECT_LE(linalg::max_principal_angle(multi.at(DirectionSet{1u, 1}).K, single.K1), 1e-9);
  EXPECT_LE(linalg::max_principal_angle(multi.at(DirectionSet{0u, 1}).K, single.K2), 1e-9);
}

TEST(Decomposition, TwistedPairIsDoublyInduced) {
  const ProductSystemRep psr = gen::gen_twisted_fock_pair(fifth_root(), 3, 1);
  const auto dec = decomp::wold_multi(psr, {6, 6}, tol);
  EXPECT_EQ(dec.summands.size(), 4u);
  EXPECT_EQ(dec.at(DirectionSet::all(2)).K.rank(), 16u);
  for (const auto& [k, v] : dec.residuals) EXPECT_LE(v, 1e-9) << k;
}

// ================= io =================

TEST(Io, RepRoundTrip) {
  const CovariantRep rep = block_example();
  const auto back = io::rep_from_text(io::rep_to_json(rep).dump());
  ASSERT_FALSE(back.product);
  EXPECT_EQ((back.single.atilde - rep.atilde).norm(), 0.0);
  EXPECT_EQ(back.single.window_mask->rank(), rep.window_mask->rank());
  const ProductSystemRep psr = gen::gen_twisted_fock_pair(fifth_root(), 2, 1);
  const auto back2 = io::rep_from_text(io::rep_to_json(psr).dump());
  ASSERT_TRUE(back2.product);
  EXPECT_EQ((back2.psr.twist(0, 1) - psr.twist(0, 1)).norm(), 0.0);
  EXPECT_EQ((back2.psr.atildes[1] - psr.atildes[1]).norm(), 0.0);
}

TEST(Io, BareNanIsNonFinite) {
  std::ifstream in(data_dir + "/nan_entry.json");
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    io::rep_from_text(ss.str());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NonFinite);
    EXPECT_NE(std::string(e.what()).find("atilde[3][3]"), std::string::npos);
  }
}

TEST(Io, SyntaxErrorReportsLine) {
  try {
    io::rep_from_text("{\n \"mode\": \"single\",\n \"K_dim\": 2,,\n}");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Parse);
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
}

TEST(Io, FieldDiagnostics) {
  auto code_and_text = [](const std::string& text) -> std::pair<ErrorCode, std::string> {
    try {
      io::rep_from_text(text);
    } catch (const Error& e) {
      return {e.code(), e.what()};
    }
    return {ErrorCode::Parse, "no error"};
  };
  const auto missing = code_and_text(R"({"mode":"single","K_dim":1,"correspondences":[{"dim":1}]})");
  EXPECT_NE(missing.second.find("'atilde'"), std::string::npos) << missing.second;
  const auto ragged =
      code_and_text(R"({"mode":"single","K_dim":1,"correspondences":[{"dim":1}],"atilde":[[[1,0]],[]]})");
  EXPECT_NE(ragged.second.find("atilde[1]"), std::string::npos) << ragged.second;
  const auto shape =
      code_and_text(R"({"mode":"single","K_dim":2,"correspondences":[{"dim":1}],"atilde":[[[1,0]]]})");
  EXPECT_EQ(shape.first, ErrorCode::DimensionMismatch);
  const auto mode = code_and_text(R"({"mode":"triple","K_dim":1})");
  EXPECT_NE(mode.second.find("'mode'"), std::string::npos);
}

TEST(Io, CanonicalFrameOrientation) {
  ComplexMatrix b(3, 1);
  b << 0.0, Complex(0.0, -0.6), Complex(0.8, 0.0);
  const Frame f = Frame::from_orthonormal(b);
  const ComplexMatrix c = io::canonical_basis(f);
  EXPECT_NEAR(c(1, 0).real(), 0.6, 1e-15);
  EXPECT_EQ(c(1, 0).imag(), 0.0);
  EXPECT_LT(linalg::max_principal_angle(io::frame_from_json(io::frame_to_json(f)), f), 1e-12);
}

TEST(Io, ShippedDataFilesLoad) {
  for (const char* name : {"block_mixed.json", "truncated_fock.json", "twisted_fock_pair.json", "four_block.json"}) {
    EXPECT_NO_THROW(io::rep_from_file(data_dir + "/" + name)) << name;
  }
}

// ================= cli =================

namespace {
cli::RunResult run_demo(cli::Command c, const std::string& name) {
  cli::RunConfig cfg;
  cfg.command = c;
  cfg.demo_name = name;
  return cli::run(cfg);
}
}  // namespace

TEST(Cli, BlockMixedDecompose) {
  const auto r = run_demo(cli::Command::Decompose, "block-mixed");
  EXPECT_EQ(r.exit_code, 0) << r.summary;
  const auto& res = r.document["decomposition"]["result"];
  EXPECT_EQ(res["K1"]["rank"], 3);
  EXPECT_EQ(res["K2"]["rank"], 2);
}

TEST(Cli, TwistedPairMulti) {
  const auto r = run_demo(cli::Command::Multi, "twisted-fock-pair");
  EXPECT_EQ(r.exit_code, 0) << r.summary;
  EXPECT_EQ(r.document["decomposition"]["result"]["summands"].size(), 4u);
  EXPECT_LE(r.document["residuals"]["oracle_max_angle"].get<double>(), 1e-8);
}

TEST(Cli, AllDemosPass) {
  for (const auto& name : cli::demo_names()) {
    EXPECT_EQ(run_demo(cli::Command::Demo, name).exit_code, 0) << name;
  }
}

TEST(Cli, NanInputExitsTwo) {
  cli::RunConfig cfg;
  cfg.command = cli::Command::Check;
  cfg.input_path = data_dir + "/nan_entry.json";
  const auto r = cli::run(cfg);
  EXPECT_EQ(r.exit_code, 2);
  EXPECT_EQ(r.document["error"]["code"], "NonFinite");
}

TEST(Cli, FailingHypothesesExitOne) {
  // covariance fails, so no alternative hypothesis can be admissible
  const std::string path = ::testing::TempDir() + "broken_corner.json";
  std::ofstream(path) << io::rep_to_json(corner_rep(true)).dump();
  cli::RunConfig cfg;
  cfg.command = cli::Command::Check;
  cfg.input_path = path;
  const auto r = cli::run(cfg);
  EXPECT_EQ(r.exit_code, 1) << r.summary;
  EXPECT_FALSE(r.document["hypotheses"].empty());
}

TEST(Cli, ExactlyOneSource) {
  cli::RunConfig cfg;
  EXPECT_EQ(cli::run(cfg).exit_code, 2);
  cfg.demo_name = "block-mixed";
  cfg.input_path = data_dir + "/block_mixed.json";
  EXPECT_EQ(cli::run(cfg).exit_code, 2);
}

TEST(Cli, DocumentIsDeterministic) {
  const auto a = run_demo(cli::Command::Demo, "twisted-fock-pair");
  const auto b = run_demo(cli::Command::Demo, "twisted-fock-pair");
  EXPECT_EQ(a.document.dump(), b.document.dump());
}

TEST(Cli, FileAndDemoAgree) {
  cli::RunConfig cfg;
  cfg.command = cli::Command::Decompose;
  cfg.input_path = data_dir + "/block_mixed.json";
  const auto f = cli::run(cfg);
  const auto d = run_demo(cli::Command::Decompose, "block-mixed");
  EXPECT_EQ(f.document["residuals"].dump(), d.document["residuals"].dump());
}

TEST(Cli, SummaryResidualsAppearInDocument) {
  const auto r = run_demo(cli::Command::Demo, "truncated-fock");
  for (const char* section : {"hypotheses", "structure_identities"}) {
    for (const auto& rep : r.document[section]) {
      EXPECT_NE(r.summary.find(rep["name"].get<std::string>()), std::string::npos);
      EXPECT_TRUE(rep["residual"].is_number());
    }
  }
  for (const auto& rep : r.document["decomposition"]["reports"]) {
    EXPECT_NE(r.summary.find(rep["name"].get<std::string>()), std::string::npos);
  }
}
