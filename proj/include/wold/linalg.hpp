#pragma once

// Dense complex linear algebra and the subspace calculus used by every other
// module. Subspaces are carried as orthonormal frames; projectors are formed
// on demand.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "wold/error.hpp"

namespace wold::linalg {

using Complex = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;
using Index = Eigen::Index;

struct ToleranceConfig {
  double rank_tol = 1e-10;  // relative singular-value cutoff
  double eq_tol = 1e-8;     // operator-norm residual cutoff for identities
  double psd_tol = -1e-9;   // eigenvalue floor for positive semidefiniteness
  std::size_t max_dim = std::size_t{1} << 20;  // per-dimension cap for kron products
  double max_gram_cond = 1e12;

  void validate() const {
    if (!(rank_tol >= 0.0) || !(eq_tol >= 0.0) || !(psd_tol <= 0.0) || !(max_gram_cond > 0.0)) {
      throw Error(ErrorCode::BadParams,
                  "tolerances must satisfy rank_tol >= 0, eq_tol >= 0, psd_tol <= 0");
    }
  }
};

inline void require_finite(const ComplexMatrix& m, std::string_view what) {
  if (!m.allFinite()) {
    throw Error(ErrorCode::NonFinite, std::string(what) + " has a non-finite entry");
  }
}

inline ComplexMatrix identity(std::size_t n) {
  return ComplexMatrix::Identity(static_cast<Index>(n), static_cast<Index>(n));
}

/// Orthonormal spanning set for a subspace of C^ambient_dim.
class Frame {
 public:
  Frame() = default;

  static Frame empty(std::size_t ambient) {
    return Frame(ComplexMatrix(static_cast<Index>(ambient), 0), 0.0);
  }

  static Frame full(std::size_t ambient, double tol = 0.0) { return Frame(identity(ambient), tol); }

  /// Span of the listed standard basis vectors.
  static Frame coordinate(std::size_t ambient, std::span<const std::size_t> indices,
                          double tol = 0.0) {
    ComplexMatrix b = ComplexMatrix::Zero(static_cast<Index>(ambient),
                                          static_cast<Index>(indices.size()));
    for (std::size_t c = 0; c < indices.size(); ++c) {
      if (indices[c] >= ambient) {
        throw Error(ErrorCode::DimensionMismatch, "coordinate index out of range");
      }
      b(static_cast<Index>(indices[c]), static_cast<Index>(c)) = 1.0;
    }
    return from_orthonormal(std::move(b), tol);
  }

  /// Wraps columns that are already orthonormal. Throws if they are not.
  static Frame from_orthonormal(ComplexMatrix basis, double tol = 0.0) {
    if (basis.cols() > 0) {
      const double defect =
          (basis.adjoint() * basis - ComplexMatrix::Identity(basis.cols(), basis.cols()))
              .cwiseAbs()
              .maxCoeff();
      if (!(defect <= std::max(10.0 * tol, 1e-12))) {
        throw Error(ErrorCode::BadParams, "frame columns are not orthonormal");
      }
    }
    return Frame(std::move(basis), tol);
  }

  std::size_t ambient_dim() const { return static_cast<std::size_t>(basis_.rows()); }
  std::size_t rank() const { return static_cast<std::size_t>(basis_.cols()); }
  const ComplexMatrix& basis() const { return basis_; }
  double tol() const { return tol_; }

  ComplexMatrix projector() const { return basis_ * basis_.adjoint(); }

 private:
  Frame(ComplexMatrix basis, double tol) : basis_(std::move(basis)), tol_(tol) {}

  ComplexMatrix basis_;
  double tol_ = 0.0;

  friend Frame orthonormal_frame(const ComplexMatrix&, const ToleranceConfig&, double);
  friend Frame orthocomplement(const Frame&);
};

inline Eigen::VectorXd singular_values(const ComplexMatrix& a) {
  if (a.size() == 0) return Eigen::VectorXd(0);
  Eigen::BDCSVD<ComplexMatrix> svd(a);
  return svd.singularValues();
}

/// Frame for the column space of `vectors`. Singular values at or below
/// rank_tol * max(sigma_max, reference_scale) are dropped; a zero matrix has
/// rank 0. `reference_scale` lets callers supply the norm of an operator whose
/// image is being taken, so roundoff residue is not promoted to a direction.
inline Frame orthonormal_frame(const ComplexMatrix& vectors, const ToleranceConfig& tol,
                               double reference_scale = 0.0) {
  require_finite(vectors, "vectors");
  const Index n = vectors.rows();
  if (n == 0 || vectors.cols() == 0) return Frame::empty(static_cast<std::size_t>(n));
  Eigen::BDCSVD<ComplexMatrix> svd(vectors, Eigen::ComputeThinU);
  const Eigen::VectorXd& s = svd.singularValues();
  const double smax = s.size() > 0 ? s(0) : 0.0;
  if (smax == 0.0) return Frame::empty(static_cast<std::size_t>(n));
  const double cutoff = tol.rank_tol * std::max(smax, reference_scale);
  Index r = 0;
  while (r < s.size() && s(r) > cutoff) ++r;
  return Frame(svd.matrixU().leftCols(r), tol.rank_tol);
}

inline Frame orthocomplement(const Frame& s) {
  const auto n = static_cast<Index>(s.ambient_dim());
  const auto r = static_cast<Index>(s.rank());
  if (r == 0) return Frame(ComplexMatrix::Identity(n, n), s.tol());
  if (r >= n) return Frame(ComplexMatrix(n, 0), s.tol());
  Eigen::HouseholderQR<ComplexMatrix> qr(s.basis());
  ComplexMatrix q = qr.householderQ() * ComplexMatrix::Identity(n, n);
  return Frame(q.rightCols(n - r), s.tol());
}

inline Frame kernel(const ComplexMatrix& a, const ToleranceConfig& tol) {
  require_finite(a, "matrix");
  return orthocomplement(orthonormal_frame(a.adjoint(), tol));
}

inline Frame image(const ComplexMatrix& a, const Frame& s, const ToleranceConfig& tol) {
  if (static_cast<std::size_t>(a.cols()) != s.ambient_dim()) {
    throw Error(ErrorCode::DimensionMismatch,
                "image: operator has " + std::to_string(a.cols()) + " columns, frame lives in C^" +
                    std::to_string(s.ambient_dim()));
  }
  require_finite(a, "operator");
  if (s.rank() == 0) return Frame::empty(static_cast<std::size_t>(a.rows()));
  return orthonormal_frame(a * s.basis(), tol, a.norm());
}

/// Intersection through principal angles: left singular directions of
/// B1^* B2 whose cosine is at least 1 - rank_tol.
inline Frame intersect(const Frame& s1, const Frame& s2, const ToleranceConfig& tol) {
  if (s1.ambient_dim() != s2.ambient_dim()) {
    throw Error(ErrorCode::DimensionMismatch, "intersect: frames live in different spaces");
  }
  if (s1.rank() == 0 || s2.rank() == 0) return Frame::empty(s1.ambient_dim());
  const ComplexMatrix m = s1.basis().adjoint() * s2.basis();
  Eigen::JacobiSVD<ComplexMatrix> svd(m, Eigen::ComputeFullU);
  const Eigen::VectorXd& c = svd.singularValues();
  Index k = 0;
  while (k < c.size() && c(k) >= 1.0 - tol.rank_tol) ++k;
  return Frame::from_orthonormal(s1.basis() * svd.matrixU().leftCols(k), tol.rank_tol);
}

/// Closed span of the union of several subspaces of the same space.
inline Frame span(std::span<const Frame> frames, std::size_t ambient, const ToleranceConfig& tol) {
  Index total = 0;
  for (const auto& f : frames) {
    if (f.ambient_dim() != ambient) {
      throw Error(ErrorCode::DimensionMismatch, "span: frames live in different spaces");
    }
    total += static_cast<Index>(f.rank());
  }
  ComplexMatrix all(static_cast<Index>(ambient), total);
  Index at = 0;
  for (const auto& f : frames) {
    all.middleCols(at, static_cast<Index>(f.rank())) = f.basis();
    at += static_cast<Index>(f.rank());
  }
  return orthonormal_frame(all, tol);
}

inline Frame span(const Frame& a, const Frame& b, const ToleranceConfig& tol) {
  const Frame pair[] = {a, b};
  return span(pair, a.ambient_dim(), tol);
}

/// Kronecker product, left-factor-major: basis (i of A-domain, t of B-domain)
/// maps to flat index i * B.cols() + t, so kron(I_d, X) is block diagonal.
inline ComplexMatrix kron(const ComplexMatrix& a, const ComplexMatrix& b,
                          std::size_t max_dim = std::size_t{1} << 20) {
  const auto rows = static_cast<std::size_t>(a.rows()) * static_cast<std::size_t>(b.rows());
  const auto cols = static_cast<std::size_t>(a.cols()) * static_cast<std::size_t>(b.cols());
  const bool row_overflow = a.rows() != 0 && rows / static_cast<std::size_t>(a.rows()) !=
                                                 static_cast<std::size_t>(b.rows());
  const bool col_overflow = a.cols() != 0 && cols / static_cast<std::size_t>(a.cols()) !=
                                                 static_cast<std::size_t>(b.cols());
  if (row_overflow || col_overflow || rows > max_dim || cols > max_dim) {
    throw Error(ErrorCode::Overflow, "kron: product dimension exceeds " + std::to_string(max_dim));
  }
  ComplexMatrix out = ComplexMatrix::Zero(static_cast<Index>(rows), static_cast<Index>(cols));
  const Index br = b.rows();
  const Index bc = b.cols();
  for (Index i = 0; i < a.rows(); ++i) {
    for (Index j = 0; j < a.cols(); ++j) {
      const Complex aij = a(i, j);
      if (aij != Complex(0.0, 0.0)) out.block(i * br, j * bc, br, bc) = aij * b;
    }
  }
  return out;
}

/// I_p (x) X.
inline ComplexMatrix lift(std::size_t p, const ComplexMatrix& x,
                          std::size_t max_dim = std::size_t{1} << 20) {
  if (p == 1) return x;
  return kron(identity(p), x, max_dim);
}

/// Frame for E^{(x)p} (x) S, i.e. the columns of I_p (x) B_S.
inline Frame tensor_frame(std::size_t p, const Frame& s, std::size_t max_dim = std::size_t{1} << 20) {
  return Frame::from_orthonormal(lift(p, s.basis(), max_dim), s.tol());
}

inline double op_norm(const ComplexMatrix& a) {
  const Eigen::VectorXd s = singular_values(a);
  return s.size() > 0 ? s(0) : 0.0;
}

/// inf over unit x of |Ax|; zero whenever A has more columns than rows.
inline double smallest_singular(const ComplexMatrix& a) {
  if (a.cols() == 0 || a.cols() > a.rows()) return 0.0;
  const Eigen::VectorXd s = singular_values(a);
  return s(s.size() - 1);
}

struct OperatorResidual {
  double norm = 0.0;
  ComplexVector witness;  // unit vector attaining the norm
};

inline OperatorResidual operator_residual(const ComplexMatrix& r) {
  OperatorResidual out;
  if (r.size() == 0) {
    out.witness = ComplexVector::Zero(r.cols());
    return out;
  }
  Eigen::BDCSVD<ComplexMatrix> svd(r, Eigen::ComputeThinV);
  out.norm = svd.singularValues()(0);
  out.witness = svd.matrixV().col(0);
  return out;
}

struct PsdResult {
  bool psd = true;
  double min_eigenvalue = 0.0;
  ComplexVector witness;  // eigenvector of the smallest eigenvalue
};

inline PsdResult psd_check(const ComplexMatrix& h, const ToleranceConfig& tol) {
  if (h.rows() != h.cols()) throw Error(ErrorCode::DimensionMismatch, "psd_check: not square");
  require_finite(h, "form");
  PsdResult out;
  if (h.rows() == 0) return out;
  const double scale = op_norm(h);
  if (op_norm(h - h.adjoint()) > tol.eq_tol * scale) {
    throw Error(ErrorCode::NotHermitian, "psd_check: form is not Hermitian");
  }
  const ComplexMatrix sym = 0.5 * (h + h.adjoint());
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(sym);
  out.min_eigenvalue = es.eigenvalues()(0);
  out.witness = es.eigenvectors().col(0);
  out.psd = out.min_eigenvalue >= tol.psd_tol;
  return out;
}

/// Principal angles in ascending order; min(rank) of them. Small angles come
/// from sines and large ones from cosines so both ends stay accurate.
inline std::vector<double> principal_angles(const Frame& s1, const Frame& s2) {
  if (s1.ambient_dim() != s2.ambient_dim()) {
    throw Error(ErrorCode::DimensionMismatch, "principal_angles: frames live in different spaces");
  }
  const Frame& big = s1.rank() >= s2.rank() ? s1 : s2;
  const Frame& small = s1.rank() >= s2.rank() ? s2 : s1;
  std::vector<double> angles;
  if (small.rank() == 0) return angles;
  const ComplexMatrix cross = big.basis().adjoint() * small.basis();
  const Eigen::VectorXd cosines = singular_values(cross);
  const Eigen::VectorXd sines = singular_values(small.basis() - big.basis() * cross);
  const Index r = static_cast<Index>(small.rank());
  angles.resize(static_cast<std::size_t>(r));
  for (Index k = 0; k < r; ++k) {
    const double c = std::clamp(cosines(k), 0.0, 1.0);
    const double s = std::clamp(sines(r - 1 - k), 0.0, 1.0);
    angles[static_cast<std::size_t>(k)] = s < std::numbers::sqrt2 / 2.0 ? std::asin(s) : std::acos(c);
  }
  std::sort(angles.begin(), angles.end());
  return angles;
}

/// Largest principal angle, with a rank mismatch counted as a right angle.
inline double max_principal_angle(const Frame& s1, const Frame& s2) {
  if (s1.rank() != s2.rank()) return std::numbers::pi / 2.0;
  const auto angles = principal_angles(s1, s2);
  return angles.empty() ? 0.0 : angles.back();
}

/// |(I - P_T) B_S|: zero iff S is contained in T.
inline double containment_residual(const Frame& s, const Frame& t) {
  if (s.ambient_dim() != t.ambient_dim()) {
    throw Error(ErrorCode::DimensionMismatch, "containment_residual: frames live in different spaces");
  }
  if (s.rank() == 0) return 0.0;
  return op_norm(s.basis() - t.basis() * (t.basis().adjoint() * s.basis()));
}

/// Largest |<u, v>| over basis pairs u in a, v in b.
inline double max_overlap(const Frame& a, const Frame& b) {
  if (a.rank() == 0 || b.rank() == 0) return 0.0;
  return (a.basis().adjoint() * b.basis()).cwiseAbs().maxCoeff();
}

struct DirectSumReport {
  double max_overlap = 0.0;
  double span_defect = 0.0;  // ambient_dim - rank of the concatenation
  bool passed = true;
};

inline DirectSumReport direct_sum_check(std::span<const Frame> frames, std::size_t ambient,
                                        const ToleranceConfig& tol) {
  DirectSumReport out;
  for (std::size_t a = 0; a < frames.size(); ++a) {
    for (std::size_t b = a + 1; b < frames.size(); ++b) {
      out.max_overlap = std::max(out.max_overlap, max_overlap(frames[a], frames[b]));
    }
  }
  const Frame all = span(frames, ambient, tol);
  out.span_defect = static_cast<double>(ambient) - static_cast<double>(all.rank());
  out.passed = out.max_overlap <= tol.eq_tol && out.span_defect <= tol.eq_tol;
  return out;
}

/// Orthogonality of `parts` plus equality of their span with `whole`
/// (largest principal angle), for splittings inside a proper subspace.
inline DirectSumReport direct_sum_within(std::span<const Frame> parts, const Frame& whole,
                                         const ToleranceConfig& tol) {
  DirectSumReport out;
  for (std::size_t a = 0; a < parts.size(); ++a) {
    for (std::size_t b = a + 1; b < parts.size(); ++b) {
      out.max_overlap = std::max(out.max_overlap, max_overlap(parts[a], parts[b]));
    }
  }
  const Frame all = span(parts, whole.ambient_dim(), tol);
  out.span_defect = max_principal_angle(all, whole);
  out.passed = out.max_overlap <= tol.eq_tol && out.span_defect <= tol.eq_tol;
  return out;
}

}  // namespace wold::linalg
