#include "rllc/numerics.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include <cmath>
#include <string>

namespace rllc {

Mat matrix_multiply(const Eigen::Ref<const Mat>& a, const Eigen::Ref<const Mat>& b) {
  if (a.cols() != b.rows()) {
    throw DimensionError("matrix_multiply: inner dimensions " + std::to_string(a.cols()) +
                         " and " + std::to_string(b.rows()) + " do not agree");
  }
  Mat out = a * b;
  require_finite(out, "matrix_multiply");
  return out;
}

namespace {

// Lower Cholesky factor; fails when a pivot drops to pivot_floor or below.
bool cholesky(const Mat& a, double pivot_floor, Mat& lower) {
  const Eigen::Index k = a.rows();
  lower.setZero(k, k);
  for (Eigen::Index j = 0; j < k; ++j) {
    double d = a(j, j) - lower.row(j).head(j).squaredNorm();
    if (!(d > pivot_floor)) {
      return false;
    }
    d = std::sqrt(d);
    lower(j, j) = d;
    for (Eigen::Index i = j + 1; i < k; ++i) {
      lower(i, j) = (a(i, j) - lower.row(i).head(j).dot(lower.row(j).head(j))) / d;
    }
  }
  return true;
}

Vec cholesky_solve(const Mat& lower, const Vec& b) {
  Vec y = lower.triangularView<Eigen::Lower>().solve(b);
  return lower.transpose().triangularView<Eigen::Upper>().solve(y);
}

std::optional<Vec> try_solve_spd(const Eigen::Ref<const Mat>& a, const Eigen::Ref<const Vec>& b,
                                 double pivot_floor) {
  if (a.rows() != a.cols()) {
    throw DimensionError("solve_spd: matrix is not square");
  }
  if (a.rows() != b.size()) {
    throw DimensionError("solve_spd: right-hand side length does not match");
  }
  Mat lower;
  if (!cholesky(a, pivot_floor, lower)) {
    return std::nullopt;
  }
  Vec x = cholesky_solve(lower, b);
  // One refinement step keeps the residual near machine level even for
  // condition numbers around 1e8.
  x += cholesky_solve(lower, Vec(b - a * x));
  require_finite(x, "solve_spd");
  return x;
}

double relative_pivot_floor(const Eigen::Ref<const Mat>& a) {
  const double max_diag = a.diagonal().maxCoeff();
  return kSpdPivotTolerance * std::max(max_diag, 0.0);
}

}  // namespace

Vec solve_spd(const Eigen::Ref<const Mat>& a, const Eigen::Ref<const Vec>& b) {
  auto x = try_solve_spd(a, b, relative_pivot_floor(a));
  if (!x) {
    throw SingularMatrixError("solve_spd: non-positive-definite pivot");
  }
  return *x;
}

Mat invert(const Eigen::Ref<const Mat>& q) {
  if (q.rows() != q.cols()) {
    throw DimensionError("invert: matrix is not square");
  }
  Eigen::FullPivLU<Mat> lu(q);
  const double max_piv = lu.matrixLU().diagonal().cwiseAbs().maxCoeff();
  const double min_piv = lu.matrixLU().diagonal().cwiseAbs().minCoeff();
  if (max_piv <= 0.0 || min_piv < 1e-14 * max_piv) {
    throw SingularMatrixError("invert: matrix is numerically singular");
  }
  Mat x = lu.inverse();
  // Newton correction: X <- X (2I - Q X).
  x = x * (2.0 * Mat::Identity(q.rows(), q.cols()) - q * x);
  require_finite(x, "invert");
  return x;
}

std::optional<Vec> try_relaxed_pinv_apply(const Eigen::Ref<const Mat>& m,
                                          const Eigen::Ref<const Vec>& g, double epsilon) {
  if (m.rows() != g.size()) {
    throw DimensionError("relaxed_pinv_apply: memory has " + std::to_string(m.rows()) +
                         " rows but gradient has length " + std::to_string(g.size()));
  }
  if (epsilon < 0.0) {
    throw std::invalid_argument("relaxed_pinv_apply: epsilon must be nonnegative");
  }
  Mat gram = m.transpose() * m;
  if (epsilon > 0.0) {
    gram.diagonal().array() += epsilon;
  }
  // With a positive shift the system is positive definite by construction, so
  // only pivot positivity is required; the relative floor applies to eps = 0,
  // where it detects rank-deficient memory.
  const double floor = epsilon > 0.0 ? 0.0 : relative_pivot_floor(gram);
  auto x = try_solve_spd(gram, Vec(m.transpose() * g), floor);
  if (x) {
    require_finite(*x, "relaxed_pinv_apply");
  }
  return x;
}

Vec relaxed_pinv_apply(const Eigen::Ref<const Mat>& m, const Eigen::Ref<const Vec>& g,
                       double epsilon) {
  auto x = try_relaxed_pinv_apply(m, g, epsilon);
  if (!x) {
    throw SingularMatrixError("relaxed_pinv_apply: normal system numerically singular");
  }
  return *x;
}

double gram_eigen_ratio(const Eigen::Ref<const Mat>& m) {
  Mat gram = m.transpose() * m;
  Eigen::SelfAdjointEigenSolver<Mat> es(gram, Eigen::EigenvaluesOnly);
  const double largest = es.eigenvalues().maxCoeff();
  if (largest <= 0.0) {
    return 0.0;
  }
  return std::max(es.eigenvalues().minCoeff(), 0.0) / largest;
}

}  // namespace rllc
