#include "rllc/equiv.hpp"

#include "rllc/rng.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>

namespace rllc {

GradientStream record_task_stream(const Task& task, Optimizer& driver, int steps,
                                  std::uint64_t init_seed, double noise_sigma,
                                  std::uint64_t noise_seed) {
  if (steps < 1) throw std::invalid_argument("record_task_stream: steps must be positive");
  GradientStream stream;
  stream.gradients.resize(task.param_dim(), steps);
  Vec theta = task.initial_params(init_seed);
  Rng noise(mix_seed(noise_seed, 0x57e4));
  for (int t = 0; t < steps; ++t) {
    Vec g = task.gradient(theta, mix_seed(noise_seed, static_cast<std::uint64_t>(t)));
    if (noise_sigma > 0.0) {
      for (Eigen::Index i = 0; i < g.size(); ++i) g[i] += noise_sigma * noise.normal();
    }
    stream.gradients.col(t) = g;
    theta += driver.step(g);
  }
  return stream;
}

GradientStream random_stream(int dim, int steps, std::uint64_t seed) {
  if (dim < 1 || steps < 1) throw std::invalid_argument("random_stream: dim and steps must be positive");
  GradientStream stream;
  stream.gradients.resize(dim, steps);
  Rng rng(mix_seed(seed, 0xf10));
  for (int t = 0; t < steps; ++t) {
    for (int i = 0; i < dim; ++i) stream.gradients(i, t) = rng.normal();
  }
  return stream;
}

TrajectoryReport compare_trajectories(Optimizer& first, Optimizer& second,
                                      const GradientStream& stream, double tol) {
  TrajectoryReport report;
  report.steps = stream.steps();
  const int n = stream.dim();
  Vec sum_first = Vec::Zero(n);
  Vec sum_second = Vec::Zero(n);
  bool warmed_up = false;
  for (int t = 0; t < stream.steps(); ++t) {
    const Vec g = stream.gradients.col(t);
    sum_first += first.step(g);
    sum_second += second.step(g);
    const double deviation = (sum_first - sum_second).lpNorm<Eigen::Infinity>();
    report.max_param_deviation = std::max(report.max_param_deviation, deviation);
    report.trajectory_scale =
        std::max(report.trajectory_scale, sum_first.lpNorm<Eigen::Infinity>());
    if (deviation > tol && !report.first_divergence_step) {
      report.first_divergence_step = t + 1;
    }
    double step_ratio = 1.0;
    for (const Optimizer* opt : {&first, &second}) {
      if (auto probe = opt->probe()) step_ratio = std::min(step_ratio, probe->rank_ratio);
    }
    report.rank_floor = std::min(report.rank_floor, step_ratio);
    if (!warmed_up && step_ratio >= kRankProxyThreshold) warmed_up = true;
    if (warmed_up) {
      report.rank_floor_after_warmup = std::min(report.rank_floor_after_warmup, step_ratio);
      if (step_ratio < kRankProxyThreshold) ++report.steps_below_rank_threshold;
    }
  }
  return report;
}

TrajectoryReport check_basis_independence(const Propagator& p, const Eigen::Ref<const Mat>& Q,
                                          double c1, double c2, const Vec& L0,
                                          const GradientStream& stream, double tol) {
  if (L0.size() != p.dim()) {
    throw DimensionError("check_basis_independence: initial law length mismatch");
  }
  RllcOptions base;
  base.c1 = c1;
  base.c2 = c2;
  base.initial_law = L0;
  base.epsilon = 0.0;  // exactness requires the true pseudo-inverse

  RllcOptions mapped = base;
  mapped.initial_law = invert(Q) * L0;

  auto original = make_rllc(p, base);
  auto transformed = make_rllc(conjugate(p, Q), mapped);
  return compare_trajectories(*original, *transformed, stream, tol);
}

std::vector<SpanConvergencePoint> demo_span_convergence(double lambda,
                                                        const std::vector<double>& eps_list,
                                                        int len) {
  std::vector<SpanConvergencePoint> points;
  points.reserve(eps_list.size());
  for (double eps : eps_list) {
    if (eps == 0.0) {
      throw std::invalid_argument(
          "demo_span_convergence: eps = 0 collapses the pair to a single unit");
    }
    if (std::abs(lambda + eps) >= 1.0 || std::abs(lambda - eps) >= 1.0) {
      throw std::invalid_argument("demo_span_convergence: |lambda ± eps| must stay below 1");
    }
    const Propagator pair = union_of(momentum(lambda + eps), momentum(lambda - eps));
    const Propagator block = jordan_momentum(2, lambda);

    SpanConvergencePoint point;
    point.eps = eps;
    point.angle = span_angle(pair, block, len);

    const Mat rules = abstract_rule_matrix(pair, len);
    Eigen::SelfAdjointEigenSolver<Mat> es(Mat(rules.transpose() * rules), Eigen::EigenvaluesOnly);
    const double smallest = std::max(es.eigenvalues().minCoeff(), 0.0);
    const double largest = es.eigenvalues().maxCoeff();
    point.gram_condition = smallest > 0.0 ? largest / smallest : std::numeric_limits<double>::infinity();
    point.unstable = point.gram_condition > kSpanGramConditionLimit;
    points.push_back(point);
  }
  return points;
}

}  // namespace rllc
