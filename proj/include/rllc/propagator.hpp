#pragma once

#include "rllc/numerics.hpp"

#include <string>

namespace rllc {

/// A linear memory-update rule (B, a). The memory matrix M (one column per
/// unit) evolves as M <- M·B + g·aᵀ when gradient g arrives, so column j is
/// updated to a_j·g + Σ_i B(i,j)·m_i.
///
/// Immutable after construction; safe to share across threads.
struct Propagator {
  Mat B;              ///< k×k update matrix
  Vec a;              ///< length-k injection vector
  std::string label;  ///< human-readable name, e.g. "M(0.9)⊕M2(0.6)"

  /// Largest eigenvalue modulus of B, known analytically for every
  /// constructor. Decaying abstract rules require this to be below 1.
  double max_abs_eigenvalue = 0.0;

  int dim() const { return static_cast<int>(B.rows()); }
  bool decays() const { return max_abs_eigenvalue < 1.0; }
};

/// Single momentum unit: B = [beta], a = (1). Warns on |beta| >= 1.
Propagator momentum(double beta);

/// Complex momentum gamma = alpha + beta·i realized over two real units
/// (real part first): B = [[alpha, -beta], [beta, alpha]], a = (1, 0).
Propagator complex_momentum(double alpha, double beta);

/// Jordan block of size m: unit 1 is a momentum vector of the gradient,
/// unit i a momentum vector of unit i-1, all with parameter lambda.
/// B = J_m(lambda) (lambda on the diagonal, 1 above), a = e_1.
Propagator jordan_momentum(int m, double lambda);

/// Real form of a complex Jordan block of size m (2m real units): 2×2
/// rotation-scaling blocks for alpha + beta·i on the diagonal, identity
/// blocks above, gradient injected into the first unit.
Propagator complex_jordan_momentum(int m, double alpha, double beta);

/// Union of propagators: block-diagonal B, concatenated a. The two groups of
/// units evolve independently. Associative.
Propagator union_of(const Propagator& p, const Propagator& q);

inline Propagator operator+(const Propagator& p, const Propagator& q) { return union_of(p, q); }

/// The time-invariant coefficient sequence of one memory unit: after t steps
/// from zero memory, unit j equals Σ_i g_{t-i}·coefficients[i].
struct AbstractRule {
  int unit = 0;
  Vec coefficients;  ///< coefficients[i] = (aᵀBⁱ)_unit

  /// Magnitude of the last kept coefficient; reported so truncation is
  /// visible to the caller rather than silent.
  double tail() const { return coefficients.size() ? std::abs(coefficients[coefficients.size() - 1]) : 0.0; }
};

/// Default truncation length; covers decay below 1e-2 for beta <= 0.9.
inline constexpr int kDefaultRuleLength = 50;

AbstractRule abstract_rule(const Propagator& p, int unit, int len = kDefaultRuleLength);

/// len×k matrix whose column j is the truncated abstract rule of unit j.
Mat abstract_rule_matrix(const Propagator& p, int len);

struct SpectralNormEstimate {
  double value = 0.0;
  bool converged = true;
  int iterations = 0;
};

/// Largest singular value of b via power iteration on bᵀb. Non-convergence
/// within max_iterations returns the best estimate with converged = false.
SpectralNormEstimate spectral_norm_estimate(const Eigen::Ref<const Mat>& b,
                                            int max_iterations = 10000);

/// Spectral norm of p.B, the quantity bounding abstract-rule decay.
double spectral_radius(const Propagator& p);

/// Rewrites the propagator in the memory basis M -> M·Q:
/// B' = Q⁻¹·B·Q, a' = Qᵀ·a. Preserves eigenvalues and abstract-rule spans.
Propagator conjugate(const Propagator& p, const Eigen::Ref<const Mat>& q);

struct SpanAngleResult {
  double angle = 0.0;  ///< largest principal angle, radians
  int rank_p = 0;      ///< numerical rank of p's truncated rule span
  int rank_q = 0;
  bool rank_deficient = false;
};

/// Largest principal angle between the subspaces of ℝ^len spanned by the
/// truncated abstract rules of all units of p and of q. Rank-deficient spans
/// are flagged; the angle is then measured against the actual spans.
SpanAngleResult span_angle_detail(const Propagator& p, const Propagator& q, int len);

double span_angle(const Propagator& p, const Propagator& q, int len);

/// Sink for constructor warnings (|eigenvalue| >= 1 etc.); defaults to
/// stderr. Tests may install a quiet handler.
void set_propagator_warning_handler(void (*handler)(const std::string&));

}  // namespace rllc
