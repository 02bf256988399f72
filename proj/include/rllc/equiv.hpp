#pragma once

#include "rllc/optim.hpp"
#include "rllc/tasks.hpp"

#include <cstdint>
#include <vector>

namespace rllc {

/// Rank-proxy value below which the memory matrix is treated as having left
/// the full-rank ("essential equivalence") domain.
inline constexpr double kRankProxyThreshold = 1e-10;

/// Outcome of feeding one gradient stream through two optimizers.
struct TrajectoryReport {
  int steps = 0;
  /// Largest infinity-norm gap between the cumulative update sums.
  double max_param_deviation = 0.0;
  /// Largest infinity-norm of the first optimizer's cumulative updates.
  double trajectory_scale = 0.0;
  /// First step whose deviation exceeded the tolerance, if any.
  std::optional<int> first_divergence_step;
  /// Smallest eigenvalue ratio of MᵀM observed across both optimizers
  /// (1.0 when neither exposes memory). Includes the zero-memory warmup.
  double rank_floor = 1.0;
  /// Same floor restricted to steps after full rank was first established;
  /// this is the detector for leaving the essential-equivalence domain
  /// mid-run, rather than never having entered it.
  double rank_floor_after_warmup = 1.0;
  /// Steps (past warmup) whose rank proxy fell below kRankProxyThreshold.
  int steps_below_rank_threshold = 0;

  double relative_deviation() const {
    return max_param_deviation / std::max(1.0, trajectory_scale);
  }
};

/// A pre-recorded gradient sequence; column t is the gradient of step t+1.
/// Feeding the same stream to several optimizers makes their comparison
/// symmetric and reproducible.
struct GradientStream {
  Mat gradients;

  int dim() const { return static_cast<int>(gradients.rows()); }
  int steps() const { return static_cast<int>(gradients.cols()); }
};

/// Records the closed-loop gradient sequence of `driver` on `task`, starting
/// from task.initial_params(init_seed). noise_sigma adds seeded Gaussian
/// noise to each recorded gradient (a stochastic-objective stand-in for
/// deterministic tasks).
GradientStream record_task_stream(const Task& task, Optimizer& driver, int steps,
                                  std::uint64_t init_seed, double noise_sigma = 0.0,
                                  std::uint64_t noise_seed = 0);

/// Independent seeded Gaussian gradients.
GradientStream random_stream(int dim, int steps, std::uint64_t seed);

/// Feeds the identical stream to both optimizers and compares cumulative
/// update sums step by step (these determine the parameter trajectories for
/// any shared starting point).
TrajectoryReport compare_trajectories(Optimizer& first, Optimizer& second,
                                      const GradientStream& stream, double tol);

/// Runs the law-correcting optimizer for p against the one for
/// conjugate(p, Q) with the law mapped through the basis change (L0' =
/// Q⁻¹·L0), both with eps = 0, on the same stream. Equivalence is exact
/// while the memory matrix keeps rank k; the report's rank_floor shows how
/// close the run came to leaving that domain.
TrajectoryReport check_basis_independence(const Propagator& p, const Eigen::Ref<const Mat>& Q,
                                          double c1, double c2, const Vec& L0,
                                          const GradientStream& stream, double tol);

/// Gram condition above which a span-convergence point is flagged unstable.
inline constexpr double kSpanGramConditionLimit = 1e4;

struct SpanConvergencePoint {
  double eps = 0.0;
  double angle = 0.0;           ///< largest principal angle, radians
  double gram_condition = 0.0;  ///< condition of the rule Gram matrix of the split pair
  bool unstable = false;
};

/// For each eps, the angle between the rule span of M(λ+eps)⊕M(λ-eps) and
/// that of M₂(λ). The angles shrink as eps does, while the pair's Gram
/// matrix degenerates; both effects are reported.
std::vector<SpanConvergencePoint> demo_span_convergence(double lambda,
                                                        const std::vector<double>& eps_list,
                                                        int len);

}  // namespace rllc
