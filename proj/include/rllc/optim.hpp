#pragma once

#include "rllc/propagator.hpp"

#include <any>
#include <functional>
#include <memory>
#include <optional>
#include <string>

namespace rllc {

/// Snapshot of an optimizer's law/memory state, for trajectory logging and
/// rank monitoring. Only memory-based (fixed-law and law-correcting)
/// optimizers provide one.
struct StateProbe {
  Vec law;           ///< current learning-law coefficients
  Vec column_norms;  ///< L2 norm of each memory column
  double rank_ratio = 0.0;  ///< lambda_min / lambda_max of MᵀM
  bool law_update_skipped = false;  ///< last step skipped its law update
  int skipped_law_updates = 0;      ///< total skipped so far (rank-deficient memory)
  /// Smallest ⟨p, g⟩ seen over executed law corrections, where p is the
  /// projection of g onto the memory span; nonnegative up to rounding.
  std::optional<double> min_correction_alignment;
};

/// An optimizer is a state-update / parameter-update pair: step() consumes a
/// gradient, advances the internal state, and returns the parameter delta.
///
/// Deterministic: identical gradient streams from identical initial states
/// produce identical delta streams. Instances are single-threaded; distinct
/// instances may run concurrently.
class Optimizer {
 public:
  virtual ~Optimizer() = default;
  virtual Vec step(const Eigen::Ref<const Vec>& gradient) = 0;
  virtual std::optional<StateProbe> probe() const { return std::nullopt; }
  virtual std::string name() const = 0;
};

using OptimizerPtr = std::unique_ptr<Optimizer>;

/// Plain gradient descent: delta = -lr * g.
OptimizerPtr make_sgd(double lr);

/// Heavy-ball momentum: m <- beta*m + g; delta = -lr * m.
OptimizerPtr make_momentum_sgd(double lr, double beta);

/// Nesterov accelerated gradient in velocity form:
/// v <- beta*v + lr*g; delta = -(lr*g + beta*v).
OptimizerPtr make_nag(double lr, double beta);

/// Bias-corrected Adam with the usual defaults.
OptimizerPtr make_adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

/// Linear-memory optimizer with a constant learning law:
/// M <- M*B + g*aᵀ; delta = -base_lr * M * law. Subsumes SGD, momentum SGD
/// and NAG for suitable (propagator, law) pairs.
OptimizerPtr make_fixed_law(Propagator p, Vec law, double base_lr);

struct RllcOptions {
  double c1 = 0.1;                       ///< base learning rate
  double c2 = 0.01;                      ///< law (meta) learning rate
  Vec initial_law;                       ///< defaults to all-ones
  double epsilon = kDefaultPinvEpsilon;  ///< pseudo-inverse stability shift
};

/// Linear-memory optimizer with retrospective law correction. Each step, in
/// order: (1) L <- L + c2 * (MᵀM + εI)⁻¹Mᵀ g using the pre-update memory;
/// (2) M <- M*B + g*aᵀ; (3) delta = -c1 * M * L.
///
/// With ε = 0 the correction is the exact projection coefficient vector and
/// is only defined on rank-k memory; steps whose memory is numerically
/// rank-deficient (always the first few from M₀ = 0) skip the law update and
/// are counted in the probe.
OptimizerPtr make_rllc(Propagator p, const RllcOptions& options);

/// Arbitrary memory update rule: mutates the memory matrix (n×k) and an
/// opaque hidden state in place when a gradient arrives.
using MemoryUpdateRule = std::function<void(Mat& memory, std::any& hidden, const Vec& gradient)>;

/// Law correction over an arbitrary memory rule; same three-phase step as
/// make_rllc. initial_memory may be empty (zero matrix, sized on first
/// step) or an explicit n×k matrix.
OptimizerPtr make_rllc_generic(MemoryUpdateRule update, int k, const RllcOptions& options,
                               Mat initial_memory = Mat(), std::any initial_hidden = std::any(),
                               std::string name = "rllc-generic");

}  // namespace rllc
