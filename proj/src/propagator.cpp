#include "rllc/propagator.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iostream>

namespace rllc {

namespace {

void (*g_warning_handler)(const std::string&) = nullptr;

void warn(const std::string& message) {
  if (g_warning_handler) {
    g_warning_handler(message);
  } else {
    std::cerr << "[rllc] warning: " << message << "\n";
  }
}

// Shortest %g form that still round-trips through the expression parser.
std::string format_number(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.12g", x);
  return buf;
}

std::string complex_label(double alpha, double beta) {
  if (beta == 0.0) return format_number(alpha);
  std::string im = format_number(beta) + "i";
  if (alpha == 0.0) return im;
  return format_number(alpha) + (beta > 0 ? "+" : "") + im;
}

void check_decay(const Propagator& p) {
  if (!p.decays()) {
    warn(p.label + ": eigenvalue modulus " + format_number(p.max_abs_eigenvalue) +
         " >= 1, abstract rule does not decay");
  }
}

}  // namespace

void set_propagator_warning_handler(void (*handler)(const std::string&)) {
  g_warning_handler = handler;
}

namespace {

void require_finite_scalar(double x, const char* what) {
  if (!std::isfinite(x)) {
    throw NonFiniteError(std::string(what) + ": parameter must be finite");
  }
}

}  // namespace

Propagator momentum(double beta) {
  require_finite_scalar(beta, "momentum");
  Propagator p;
  p.B = Mat::Constant(1, 1, beta);
  p.a = Vec::Ones(1);
  p.label = "M(" + format_number(beta) + ")";
  p.max_abs_eigenvalue = std::abs(beta);
  check_decay(p);
  return p;
}

Propagator complex_momentum(double alpha, double beta) {
  require_finite_scalar(alpha, "complex_momentum");
  require_finite_scalar(beta, "complex_momentum");
  Propagator p;
  p.B.resize(2, 2);
  p.B << alpha, -beta, beta, alpha;
  p.a = Vec::Zero(2);
  p.a[0] = 1.0;
  p.label = "CM(" + complex_label(alpha, beta) + ")";
  p.max_abs_eigenvalue = std::hypot(alpha, beta);
  check_decay(p);
  return p;
}

Propagator jordan_momentum(int m, double lambda) {
  if (m < 1) {
    throw std::invalid_argument("jordan_momentum: block size must be at least 1");
  }
  require_finite_scalar(lambda, "jordan_momentum");
  Propagator p;
  p.B = Mat::Identity(m, m) * lambda;
  for (int i = 0; i + 1 < m; ++i) {
    p.B(i, i + 1) = 1.0;
  }
  p.a = Vec::Zero(m);
  p.a[0] = 1.0;
  p.label = m == 1 ? "M(" + format_number(lambda) + ")"
                   : "M" + std::to_string(m) + "(" + format_number(lambda) + ")";
  p.max_abs_eigenvalue = std::abs(lambda);
  check_decay(p);
  return p;
}

Propagator complex_jordan_momentum(int m, double alpha, double beta) {
  if (m < 1) {
    throw std::invalid_argument("complex_jordan_momentum: block size must be at least 1");
  }
  require_finite_scalar(alpha, "complex_jordan_momentum");
  require_finite_scalar(beta, "complex_jordan_momentum");
  Propagator p;
  p.B = Mat::Zero(2 * m, 2 * m);
  for (int b = 0; b < m; ++b) {
    p.B(2 * b, 2 * b) = alpha;
    p.B(2 * b, 2 * b + 1) = -beta;
    p.B(2 * b + 1, 2 * b) = beta;
    p.B(2 * b + 1, 2 * b + 1) = alpha;
    if (b + 1 < m) {
      p.B(2 * b, 2 * b + 2) = 1.0;
      p.B(2 * b + 1, 2 * b + 3) = 1.0;
    }
  }
  p.a = Vec::Zero(2 * m);
  p.a[0] = 1.0;
  p.label = m == 1 ? "CM(" + complex_label(alpha, beta) + ")"
                   : "CM" + std::to_string(m) + "(" + complex_label(alpha, beta) + ")";
  p.max_abs_eigenvalue = std::hypot(alpha, beta);
  check_decay(p);
  return p;
}

Propagator union_of(const Propagator& p, const Propagator& q) {
  Propagator u;
  const int kp = p.dim();
  const int kq = q.dim();
  u.B = Mat::Zero(kp + kq, kp + kq);
  u.B.topLeftCorner(kp, kp) = p.B;
  u.B.bottomRightCorner(kq, kq) = q.B;
  u.a.resize(kp + kq);
  u.a.head(kp) = p.a;
  u.a.tail(kq) = q.a;
  u.label = p.label + "⊕" + q.label;
  u.max_abs_eigenvalue = std::max(p.max_abs_eigenvalue, q.max_abs_eigenvalue);
  return u;
}

AbstractRule abstract_rule(const Propagator& p, int unit, int len) {
  if (unit < 0 || unit >= p.dim()) {
    throw std::out_of_range("abstract_rule: unit " + std::to_string(unit) +
                            " out of range for dimension " + std::to_string(p.dim()));
  }
  if (len < 1) {
    throw std::invalid_argument("abstract_rule: length must be at least 1");
  }
  AbstractRule rule;
  rule.unit = unit;
  rule.coefficients.resize(len);
  Eigen::RowVectorXd row = p.a.transpose();
  for (int i = 0; i < len; ++i) {
    rule.coefficients[i] = row[unit];
    row = row * p.B;
  }
  return rule;
}

Mat abstract_rule_matrix(const Propagator& p, int len) {
  Mat rules(len, p.dim());
  Eigen::RowVectorXd row = p.a.transpose();
  for (int i = 0; i < len; ++i) {
    rules.row(i) = row;
    row = row * p.B;
  }
  return rules;
}

SpectralNormEstimate spectral_norm_estimate(const Eigen::Ref<const Mat>& b, int max_iterations) {
  SpectralNormEstimate est;
  const Eigen::Index k = b.cols();
  Mat gram = b.transpose() * b;
  // Deterministic start with nonuniform coordinates to avoid landing exactly
  // orthogonal to the dominant singular direction.
  Vec v(k);
  for (Eigen::Index i = 0; i < k; ++i) {
    v[i] = 1.0 + static_cast<double>(i) / static_cast<double>(k);
  }
  v.normalize();
  double value = 0.0;
  est.converged = false;
  for (int it = 0; it < max_iterations; ++it) {
    Vec w = gram * v;
    const double norm = w.norm();
    est.iterations = it + 1;
    if (norm == 0.0) {
      est.value = 0.0;
      est.converged = true;
      return est;
    }
    const double next = std::sqrt(v.dot(w) > 0.0 ? v.dot(w) : 0.0);
    v = w / norm;
    if (std::abs(next - value) <= 1e-13 * std::max(1.0, next)) {
      est.value = next;
      est.converged = true;
      return est;
    }
    value = next;
  }
  est.value = value;
  return est;
}

double spectral_radius(const Propagator& p) { return spectral_norm_estimate(p.B).value; }

Propagator conjugate(const Propagator& p, const Eigen::Ref<const Mat>& q) {
  if (q.rows() != p.dim() || q.cols() != p.dim()) {
    throw DimensionError("conjugate: basis matrix must be " + std::to_string(p.dim()) + "x" +
                         std::to_string(p.dim()));
  }
  Mat q_inv = invert(q);  // throws SingularMatrixError for singular q
  Propagator out;
  out.B = q_inv * p.B * q;
  out.a = q.transpose() * p.a;
  out.label = "conj(" + p.label + ")";
  out.max_abs_eigenvalue = p.max_abs_eigenvalue;
  return out;
}

namespace {

// Orthonormal basis of the column span with numerical rank detection.
Mat orthonormal_span(const Mat& m, int& rank) {
  Eigen::JacobiSVD<Mat> svd(m, Eigen::ComputeThinU);
  const double max_sv = svd.singularValues().size() ? svd.singularValues()[0] : 0.0;
  const double tol = max_sv * 1e-12;
  rank = 0;
  for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i) {
    if (svd.singularValues()[i] > tol) ++rank;
  }
  return svd.matrixU().leftCols(std::max(rank, 1));
}

}  // namespace

SpanAngleResult span_angle_detail(const Propagator& p, const Propagator& q, int len) {
  if (len < std::max(p.dim(), q.dim())) {
    throw std::invalid_argument("span_angle: truncation length shorter than propagator dimension");
  }
  SpanAngleResult res;
  Mat up = orthonormal_span(abstract_rule_matrix(p, len), res.rank_p);
  Mat uq = orthonormal_span(abstract_rule_matrix(q, len), res.rank_q);
  res.rank_deficient = res.rank_p < p.dim() || res.rank_q < q.dim();
  Eigen::JacobiSVD<Mat> svd(Mat(up.transpose() * uq));
  const double smallest_cos = std::clamp(svd.singularValues().minCoeff(), -1.0, 1.0);
  if (smallest_cos > 0.99) {
    // near-zero angles lose half the significant digits through acos; the
    // sine of the largest principal angle is the largest singular value of
    // the lower-dimensional basis projected onto the other's complement
    const Mat& small = up.cols() <= uq.cols() ? up : uq;
    const Mat& large = up.cols() <= uq.cols() ? uq : up;
    Eigen::JacobiSVD<Mat> res_svd(Mat(small - large * (large.transpose() * small)));
    res.angle = std::asin(std::clamp(res_svd.singularValues().maxCoeff(), 0.0, 1.0));
  } else {
    res.angle = std::acos(smallest_cos);
  }
  return res;
}

double span_angle(const Propagator& p, const Propagator& q, int len) {
  return span_angle_detail(p, q, len).angle;
}

}  // namespace rllc
