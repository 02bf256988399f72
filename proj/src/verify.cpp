#include "rllc/verify.hpp"

#include "rllc/equiv.hpp"
#include "rllc/rng.hpp"

#include <Eigen/QR>

#include <cmath>
#include <complex>
#include <cstdio>
#include <functional>

namespace rllc {

namespace {

std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.3g", x);
  return buf;
}

bool close(double actual, double expected, double rtol) {
  return std::abs(actual - expected) <= rtol * std::max({1.0, std::abs(actual), std::abs(expected)});
}

// ---------------------------------------------------------------------------
// abstract-rules: closed forms vs iterated rules vs impulse responses
// ---------------------------------------------------------------------------

double binom(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  double out = 1.0;
  for (int i = 0; i < k; ++i) out = out * (n - i) / (i + 1);
  return out;
}

using ClosedForm = std::function<double(int unit, int position)>;

ClosedForm momentum_form(double beta) {
  return [beta](int, int i) { return std::pow(beta, i); };
}

ClosedForm jordan_form(double lambda) {
  return [lambda](int unit, int i) {
    if (i < unit) return 0.0;
    return binom(i, unit) * std::pow(lambda, i - unit);
  };
}

ClosedForm complex_jordan_form(double alpha, double beta) {
  return [alpha, beta](int unit, int i) {
    const int block = unit / 2;
    if (i < block) return 0.0;
    const std::complex<double> z =
        binom(i, block) * std::pow(std::complex<double>(alpha, beta), i - block);
    return unit % 2 == 0 ? z.real() : -z.imag();
  };
}

// Concatenates block closed forms the way union_of concatenates units.
ClosedForm union_form(std::vector<std::pair<int, ClosedForm>> blocks) {
  return [blocks = std::move(blocks)](int unit, int i) {
    for (const auto& [dim, form] : blocks) {
      if (unit < dim) return form(unit, i);
      unit -= dim;
    }
    return 0.0;
  };
}

struct RuleCase {
  Propagator propagator;
  ClosedForm form;
};

std::vector<RuleCase> rule_cases() {
  std::vector<RuleCase> cases;
  cases.push_back({momentum(0.9), momentum_form(0.9)});
  cases.push_back({momentum(0.0), momentum_form(0.0)});
  cases.push_back({momentum(0.5), momentum_form(0.5)});
  cases.push_back({momentum(-0.9), momentum_form(-0.9)});
  cases.push_back({complex_momentum(0.0, 0.9), complex_jordan_form(0.0, 0.9)});
  cases.push_back({complex_momentum(0.3, 0.2), complex_jordan_form(0.3, 0.2)});
  cases.push_back({jordan_momentum(2, 0.6), jordan_form(0.6)});
  cases.push_back({jordan_momentum(3, 0.6), jordan_form(0.6)});
  cases.push_back({complex_jordan_momentum(2, 0.3, 0.2), complex_jordan_form(0.3, 0.2)});
  cases.push_back({union_of(momentum(0.9), momentum(0.0)),
                   union_form({{1, momentum_form(0.9)}, {1, momentum_form(0.0)}})});
  cases.push_back({union_of(union_of(momentum(0.9), momentum(0.8)), momentum(0.7)),
                   union_form({{1, momentum_form(0.9)},
                               {1, momentum_form(0.8)},
                               {1, momentum_form(0.7)}})});
  cases.push_back({union_of(momentum(0.9), jordan_momentum(2, 0.6)),
                   union_form({{1, momentum_form(0.9)}, {2, jordan_form(0.6)}})});
  cases.push_back({union_of(union_of(momentum(0.9), momentum(-0.9)), complex_momentum(0.0, 0.9)),
                   union_form({{1, momentum_form(0.9)},
                               {1, momentum_form(-0.9)},
                               {2, complex_jordan_form(0.0, 0.9)}})});
  return cases;
}

// Direct iteration of the memory update with a single impulse gradient; the
// memory column's coefficient at the impulse row must track the rule.
double impulse_deviation(const Propagator& p, int len) {
  const int n = p.dim() + 3;
  const int impulse_row = 1;
  Vec e = Vec::Zero(n);
  e[impulse_row] = 1.0;
  Mat memory = Mat::Zero(n, p.dim());
  Mat rules = abstract_rule_matrix(p, len);
  double worst = 0.0;
  for (int t = 1; t <= len; ++t) {
    const Vec g = t == 1 ? e : Vec(Vec::Zero(n));
    memory = memory * p.B + g * p.a.transpose();
    for (int unit = 0; unit < p.dim(); ++unit) {
      worst = std::max(worst, std::abs(memory(impulse_row, unit) - rules(t - 1, unit)));
      // all other rows stay exactly zero for an impulse stream
      for (int r = 0; r < n; ++r) {
        if (r != impulse_row) worst = std::max(worst, std::abs(memory(r, unit)));
      }
    }
  }
  return worst;
}

std::vector<CheckResult> suite_abstract_rules() {
  std::vector<CheckResult> results;
  constexpr int kPositions = 60;
  for (const auto& c : rule_cases()) {
    double worst_rel = 0.0;
    bool ok = true;
    for (int unit = 0; unit < c.propagator.dim(); ++unit) {
      const AbstractRule rule = abstract_rule(c.propagator, unit, kPositions);
      for (int i = 0; i < kPositions; ++i) {
        const double expected = c.form(unit, i);
        const double denom = std::max({1.0, std::abs(expected), std::abs(rule.coefficients[i])});
        worst_rel = std::max(worst_rel, std::abs(rule.coefficients[i] - expected) / denom);
        ok = ok && close(rule.coefficients[i], expected, 1e-10);
      }
    }
    const double impulse = impulse_deviation(c.propagator, kPositions);
    ok = ok && impulse <= 1e-12;
    results.push_back({"abstract-rule " + c.propagator.label, ok,
                       "closed-form rel dev " + fmt(worst_rel) + ", impulse dev " + fmt(impulse)});
  }
  return results;
}

// ---------------------------------------------------------------------------
// equivalences: fixed laws over M(beta)⊕M(0) vs reference optimizers
// ---------------------------------------------------------------------------

struct EquivalenceCase {
  std::string name;
  std::function<OptimizerPtr()> reference;
  std::function<OptimizerPtr()> fixed;
};

std::vector<CheckResult> suite_equivalences() {
  constexpr double kLr = 0.005;
  constexpr double kBeta = 0.9;
  constexpr int kSteps = 1000;
  constexpr double kTol = 1e-10;

  const Propagator pair = union_of(momentum(kBeta), momentum(0.0));
  auto law = [](double l1, double l2) {
    Vec v(2);
    v << l1, l2;
    return v;
  };

  std::vector<EquivalenceCase> cases;
  cases.push_back({"fixed-law (0,c) vs sgd", [&] { return make_sgd(kLr); },
                   [&] { return make_fixed_law(pair, law(0.0, kLr), 1.0); }});
  cases.push_back({"fixed-law (c,0) vs momentum-sgd",
                   [&] { return make_momentum_sgd(kLr, kBeta); },
                   [&] { return make_fixed_law(pair, law(kLr, 0.0), 1.0); }});
  cases.push_back({"fixed-law (c*beta,c) vs nag", [&] { return make_nag(kLr, kBeta); },
                   [&] { return make_fixed_law(pair, law(kLr * kBeta, kLr), 1.0); }});
  cases.push_back({"fixed-law M(0) vs sgd", [&] { return make_sgd(kLr); },
                   [&] { return make_fixed_law(momentum(0.0), Vec::Ones(1), kLr); }});
  cases.push_back({"fixed-law M(beta) vs momentum-sgd",
                   [&] { return make_momentum_sgd(kLr, kBeta); },
                   [&] { return make_fixed_law(momentum(kBeta), Vec::Ones(1), kLr); }});

  const TaskPtr quad = quadratic_task(10, 100.0, 7);
  std::vector<CheckResult> results;
  for (const auto& c : cases) {
    auto driver = c.reference();
    const GradientStream quad_stream = record_task_stream(*quad, *driver, kSteps, 3);
    const GradientStream rand_stream = random_stream(10, kSteps, 17);
    for (const auto& [stream_name, stream] :
         {std::pair<const char*, const GradientStream&>{"quadratic", quad_stream},
          std::pair<const char*, const GradientStream&>{"random", rand_stream}}) {
      auto ref = c.reference();
      auto fixed = c.fixed();
      const TrajectoryReport report = compare_trajectories(*ref, *fixed, stream, kTol);
      results.push_back({c.name + " [" + stream_name + "]",
                         report.max_param_deviation < kTol,
                         "max deviation " + fmt(report.max_param_deviation) + " over " +
                             std::to_string(kSteps) + " steps"});
    }
  }
  return results;
}

// ---------------------------------------------------------------------------
// basis-independence
// ---------------------------------------------------------------------------

Mat random_conditioned_matrix(int k, double max_condition, Rng& rng) {
  auto gaussian = [&rng](int n) {
    Mat m(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) m(i, j) = rng.normal();
    return m;
  };
  Mat u = Eigen::HouseholderQR<Mat>(gaussian(k)).householderQ();
  Mat v = Eigen::HouseholderQR<Mat>(gaussian(k)).householderQ();
  Vec s(k);
  s[0] = 1.0;
  for (int i = 1; i < k; ++i) {
    s[i] = std::exp(rng.uniform(0.0, std::log(0.9 * max_condition)));
  }
  return u * s.asDiagonal() * v.transpose();
}

std::vector<CheckResult> suite_basis_independence() {
  constexpr int kTrials = 20;
  constexpr int kSteps = 300;
  constexpr double kTol = 1e-6;
  constexpr double kC1 = 0.01;
  constexpr double kC2 = 0.05;

  std::vector<CheckResult> results;
  const TaskPtr quad = quadratic_task(20, 10.0, 21);
  for (const Propagator& p :
       {union_of(momentum(0.9), momentum(0.0)), jordan_momentum(2, 0.6)}) {
    RllcOptions options;
    options.c1 = kC1;
    options.c2 = kC2;
    options.initial_law = Vec::Ones(p.dim());
    options.epsilon = 0.0;
    auto driver = make_rllc(p, options);
    const GradientStream stream = record_task_stream(*quad, *driver, kSteps, 5, 0.5, 99);

    Rng rng(mix_seed(0xba515, p.dim()));
    double worst = 0.0;
    double rank_floor = 1.0;
    bool ok = true;
    for (int trial = 0; trial < kTrials; ++trial) {
      const Mat q = random_conditioned_matrix(p.dim(), 10.0, rng);
      const TrajectoryReport report =
          check_basis_independence(p, q, kC1, kC2, options.initial_law, stream, kTol);
      worst = std::max(worst, report.relative_deviation());
      rank_floor = std::min(rank_floor, report.rank_floor_after_warmup);
      ok = ok && report.relative_deviation() < kTol;
    }
    results.push_back({"basis independence " + p.label, ok,
                       std::to_string(kTrials) + " random Q, worst rel deviation " + fmt(worst) +
                           ", rank floor " + fmt(rank_floor)});
  }
  return results;
}

// ---------------------------------------------------------------------------
// span-convergence
// ---------------------------------------------------------------------------

std::vector<CheckResult> suite_span_convergence() {
  std::vector<CheckResult> results;
  const auto points = demo_span_convergence(0.75, {0.1, 0.05, 0.01}, 50);
  bool decreasing = true;
  bool positive = true;
  std::string detail;
  for (std::size_t i = 0; i < points.size(); ++i) {
    positive = positive && points[i].angle > 0.0;
    if (i > 0) decreasing = decreasing && points[i].angle < points[i - 1].angle;
    detail += (i ? ", " : "") + std::string("eps=") + fmt(points[i].eps) + " angle=" +
              fmt(points[i].angle);
  }
  results.push_back({"span angles strictly decreasing", decreasing && positive, detail});

  const auto tiny = demo_span_convergence(0.75, {0.001}, 50);
  results.push_back({"tiny eps flags Gram instability", tiny[0].unstable && tiny[0].angle < 1e-3,
                     "gram condition " + fmt(tiny[0].gram_condition) + ", angle " +
                         fmt(tiny[0].angle)});
  return results;
}

// ---------------------------------------------------------------------------
// gradients: central finite differences
// ---------------------------------------------------------------------------

struct FdOutcome {
  double worst_rel = 0.0;
  int checked = 0;
  int excluded = 0;
  bool ok = true;
};

// Central differences at h and h/2; coordinates whose two estimates disagree
// badly sit on a ReLU kink and are excluded (only relevant for the MLP).
FdOutcome finite_difference_check(const Task& task, const Vec& params, double rtol, int coords,
                                  std::uint64_t seed, bool allow_exclusions) {
  constexpr double kH = 1e-6;
  const Vec grad = task.gradient(params, 0);
  Rng rng(mix_seed(seed, 0xfd));
  FdOutcome outcome;
  for (int c = 0; c < coords; ++c) {
    const int i = static_cast<int>(rng.below(static_cast<std::uint64_t>(task.param_dim())));
    Vec probe = params;
    auto fd_at = [&](double h) {
      probe[i] = params[i] + h;
      const double up = task.loss(probe, Split::train);
      probe[i] = params[i] - h;
      const double down = task.loss(probe, Split::train);
      probe[i] = params[i];
      return (up - down) / (2.0 * h);
    };
    const double fd = fd_at(kH);
    const double fd_half = fd_at(kH / 2.0);
    if (allow_exclusions &&
        std::abs(fd - fd_half) > 0.25 * std::max({std::abs(fd), std::abs(grad[i]), 1e-3})) {
      ++outcome.excluded;
      continue;
    }
    const double denom = std::max({1.0, std::abs(fd), std::abs(grad[i])});
    outcome.worst_rel = std::max(outcome.worst_rel, std::abs(fd - grad[i]) / denom);
    outcome.ok = outcome.ok && close(grad[i], fd, rtol);
    ++outcome.checked;
  }
  outcome.ok = outcome.ok && outcome.checked >= (3 * coords) / 4;
  return outcome;
}

std::vector<CheckResult> suite_gradients() {
  std::vector<CheckResult> results;

  auto run = [&](const std::string& name, const TaskPtr& task, const Vec& params, double rtol,
                 bool allow_exclusions) {
    const FdOutcome outcome = finite_difference_check(*task, params, rtol, 20, 77,
                                                      allow_exclusions);
    results.push_back({name, outcome.ok,
                       "worst rel dev " + fmt(outcome.worst_rel) + " on " +
                           std::to_string(outcome.checked) + " coords" +
                           (outcome.excluded
                                ? " (" + std::to_string(outcome.excluded) + " kink excluded)"
                                : "")});
  };

  const TaskPtr quad = quadratic_task(10, 10.0, 5);
  run("quadratic gradient vs central differences", quad, quad->initial_params(2), 1e-6, false);

  const TaskPtr rosen = rosenbrock_task(6);
  run("rosenbrock gradient vs central differences", rosen, rosen->initial_params(2), 1e-6, false);

  auto blob = std::make_shared<Dataset>(synthetic_classification(300, 10, 3, 1.5, 11));
  const TaskPtr logi = logistic_task(blob, 1e-3, 0);
  Vec w = logi->initial_params(1);
  Rng jitter(123);
  for (Eigen::Index i = 0; i < w.size(); ++i) w[i] += 0.3 * jitter.normal();
  run("logistic gradient vs central differences", logi, w, 1e-5, false);

  auto blob2 = std::make_shared<Dataset>(synthetic_classification(200, 8, 3, 1.0, 12));
  const TaskPtr mlp = mlp_task(blob2, {16}, 0, 4);
  run("mlp backprop vs central differences", mlp, mlp->initial_params(9), 1e-3, true);

  return results;
}

}  // namespace

const std::vector<std::string>& verify_suite_names() {
  static const std::vector<std::string> names = {
      "equivalences", "basis-independence", "abstract-rules", "span-convergence", "gradients"};
  return names;
}

std::vector<CheckResult> run_verify_suite(const std::string& which) {
  if (which == "equivalences") return suite_equivalences();
  if (which == "basis-independence") return suite_basis_independence();
  if (which == "abstract-rules") return suite_abstract_rules();
  if (which == "span-convergence") return suite_span_convergence();
  if (which == "gradients") return suite_gradients();
  throw UsageError("unknown verify suite '" + which +
                   "' (expected equivalences, basis-independence, abstract-rules, "
                   "span-convergence or gradients)");
}

}  // namespace rllc
