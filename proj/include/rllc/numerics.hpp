#pragma once

#include <Eigen/Core>

#include <optional>
#include <stdexcept>
#include <string>

namespace rllc {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

struct DimensionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct SingularMatrixError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NonFiniteError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A Cholesky pivot below this fraction of the largest diagonal entry marks
/// the system as numerically singular.
inline constexpr double kSpdPivotTolerance = 1e-14;

/// Default stability shift for the relaxed pseudo-inverse.
inline constexpr double kDefaultPinvEpsilon = 1e-8;

template <typename Derived>
void require_finite(const Eigen::DenseBase<Derived>& m, const char* what) {
  if (!m.allFinite()) {
    throw NonFiniteError(std::string(what) + ": non-finite entry");
  }
}

/// Plain dense product with an explicit inner-dimension check.
Mat matrix_multiply(const Eigen::Ref<const Mat>& a, const Eigen::Ref<const Mat>& b);

/// Solves A x = b for symmetric positive definite A via Cholesky with one
/// step of iterative refinement. Throws SingularMatrixError when a pivot
/// falls below kSpdPivotTolerance times the largest diagonal entry.
Vec solve_spd(const Eigen::Ref<const Mat>& a, const Eigen::Ref<const Vec>& b);

/// Inverse of a square nonsingular matrix (LU plus one Newton correction).
Mat invert(const Eigen::Ref<const Mat>& q);

/// Applies the relaxed Moore-Penrose inverse: returns (MᵀM + εI)⁻¹ Mᵀ g.
/// With ε = 0 this is the coefficient vector of the orthogonal projection of
/// g onto the column span of M; M must then have full column rank. Only the
/// k×k normal system is formed, never an n×n object.
Vec relaxed_pinv_apply(const Eigen::Ref<const Mat>& m, const Eigen::Ref<const Vec>& g,
                       double epsilon);

/// Same as relaxed_pinv_apply but reports a singular normal system as
/// std::nullopt instead of throwing.
std::optional<Vec> try_relaxed_pinv_apply(const Eigen::Ref<const Mat>& m,
                                          const Eigen::Ref<const Vec>& g, double epsilon);

/// Ratio of smallest to largest eigenvalue of MᵀM; 0 for a zero matrix.
/// Used as the rank proxy for "essential equivalence" domain checks.
double gram_eigen_ratio(const Eigen::Ref<const Mat>& m);

}  // namespace rllc
