#include "rllc/harness.hpp"

#include "rllc/propagator_expr.hpp"
#include "rllc/rng.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <thread>

namespace rllc {

namespace {

namespace fs = std::filesystem;

std::string fmt_g(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.12g", x);
  return buf;
}

std::shared_ptr<const Dataset> make_dataset(const ExperimentConfig& config) {
  const std::string source = config.get("data.source", "synthetic");
  if (source == "synthetic") {
    return std::make_shared<Dataset>(synthetic_classification(
        config.get_int("data.samples", 1000), config.get_int("data.features", 20),
        config.get_int("data.classes", 2), config.get_double("data.separation", 1.0),
        config.get_u64("data.seed", 1)));
  }
  if (source == "idx") {
    std::optional<int> limit;
    if (config.has("data.limit")) limit = config.get_int("data.limit", 0);
    return std::make_shared<Dataset>(
        load_idx(config.require("data.images"), config.require("data.labels"), limit,
                 config.get_double("data.mean", 0.1307), config.get_double("data.std", 0.3081)));
  }
  if (source == "file") {
    return std::make_shared<Dataset>(Dataset::load(config.require("data.path")));
  }
  throw UsageError("experiment '" + config.name + "': unknown data.source '" + source + "'");
}

Vec parse_law(const ExperimentConfig& config, const std::string& key, int dim) {
  const auto values = config.get_doubles(key);
  if (values.empty()) return Vec();
  if (static_cast<int>(values.size()) != dim) {
    throw UsageError("experiment '" + config.name + "': " + key + " needs " +
                     std::to_string(dim) + " entries");
  }
  Vec law(dim);
  for (int i = 0; i < dim; ++i) law[i] = values[i];
  return law;
}

}  // namespace

TaskPtr make_task_from_config(const ExperimentConfig& config) {
  const std::string kind = config.require("task");
  if (kind == "quadratic") {
    return quadratic_task(config.get_int("task.n", 10), config.get_double("task.condition", 10.0),
                          config.get_u64("task.seed", 1));
  }
  if (kind == "rosenbrock") {
    return rosenbrock_task(config.get_int("task.n", 2));
  }
  if (kind == "logistic") {
    return logistic_task(make_dataset(config), config.get_double("task.l2", 0.0),
                         config.get_int("task.batch", 0));
  }
  if (kind == "mlp") {
    auto hidden = config.get_ints("task.hidden");
    if (hidden.empty()) hidden = {32};
    return mlp_task(make_dataset(config), hidden, config.get_int("task.batch", 0),
                    config.get_u64("task.seed", 1));
  }
  throw UsageError("experiment '" + config.name + "': unknown task '" + kind + "'");
}

OptimizerPtr make_optimizer_from_config(const ExperimentConfig& config) {
  const std::string kind = config.require("optimizer");
  if (kind == "sgd") {
    return make_sgd(config.require_double("optimizer.lr"));
  }
  if (kind == "momentum") {
    return make_momentum_sgd(config.require_double("optimizer.lr"),
                             config.get_double("optimizer.beta", 0.9));
  }
  if (kind == "nag") {
    return make_nag(config.require_double("optimizer.lr"),
                    config.get_double("optimizer.beta", 0.9));
  }
  if (kind == "adam") {
    return make_adam(config.require_double("optimizer.lr"),
                     config.get_double("optimizer.beta1", 0.9),
                     config.get_double("optimizer.beta2", 0.999),
                     config.get_double("optimizer.eps", 1e-8));
  }
  if (kind == "fixed-law") {
    Propagator p = parse_propagator(config.require("optimizer.propagator"));
    Vec law = parse_law(config, "optimizer.law", p.dim());
    if (law.size() == 0) law = Vec::Ones(p.dim());
    return make_fixed_law(std::move(p), std::move(law),
                          config.get_double("optimizer.lr", 1.0));
  }
  if (kind == "rllc") {
    Propagator p = parse_propagator(config.require("optimizer.propagator"));
    RllcOptions options;
    options.c1 = config.require_double("optimizer.c1");
    options.c2 = config.get_double("optimizer.c2", 0.01);
    options.epsilon = config.get_double("optimizer.epsilon", kDefaultPinvEpsilon);
    options.initial_law = parse_law(config, "optimizer.L0", p.dim());
    return make_rllc(std::move(p), options);
  }
  throw UsageError("experiment '" + config.name + "': unknown optimizer '" + kind + "'");
}

namespace {

// Detects the M(beta)⊕M(0) shape whose law ratio L1/L2 = beta reproduces NAG.
std::optional<double> detect_nag_beta(const ExperimentConfig& config) {
  if (config.get("optimizer", "") != "rllc" && config.get("optimizer", "") != "fixed-law") {
    return std::nullopt;
  }
  if (!config.has("optimizer.propagator")) return std::nullopt;
  Propagator p = parse_propagator(config.require("optimizer.propagator"));
  if (p.dim() != 2) return std::nullopt;
  if (p.B(0, 1) != 0.0 || p.B(1, 0) != 0.0 || p.B(1, 1) != 0.0) return std::nullopt;
  if (p.a[0] != 1.0 || p.a[1] != 1.0) return std::nullopt;
  if (p.B(0, 0) == 0.0) return std::nullopt;
  return p.B(0, 0);
}

}  // namespace

RunRecord run_experiment_seed(const ExperimentConfig& config, std::uint64_t seed,
                              const TaskPtr& prebuilt) {
  const TaskPtr task = prebuilt ? prebuilt : make_task_from_config(config);
  OptimizerPtr optimizer = make_optimizer_from_config(config);

  RunRecord record;
  record.experiment = config.name;
  record.task_name = task->name();
  record.optimizer_name = optimizer->name();
  record.hash = config_hash(config);
  record.seed = seed;
  record.steps = config.get_int("steps", 100);
  record.log_every = std::max(1, config.get_int("log_every", 1));
  record.nag_beta = detect_nag_beta(config);
  if (record.steps < 1) throw UsageError("experiment '" + config.name + "': steps must be >= 1");

  const bool has_val = task->has_split(Split::val);
  Vec theta = task->initial_params(seed);
  const auto started = std::chrono::steady_clock::now();

  double train_loss = task->loss(theta, Split::train);
  record.best_train_loss = train_loss;

  auto log_row = [&](int step) {
    RunRow row;
    row.step = step;
    row.train_loss = train_loss;
    if (has_val) row.val_loss = task->loss(theta, Split::val);
    row.metric = task->metric(theta, Split::train);
    row.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                            started)
                      .count();
    if (auto probe = optimizer->probe()) {
      row.law = probe->law;
      row.column_norms = probe->column_norms;
    }
    record.rows.push_back(std::move(row));
  };

  for (int step = 1; step <= record.steps; ++step) {
    Vec g;
    try {
      g = task->gradient(theta, mix_seed(seed, static_cast<std::uint64_t>(step)));
      theta += optimizer->step(g);
    } catch (const NonFiniteError& err) {
      record.aborted_at = step;
      record.abort_reason = err.what();
      break;
    }
    if (step % record.log_every == 0 || step == record.steps) {
      train_loss = task->loss(theta, Split::train);
      if (!std::isfinite(train_loss)) {
        record.aborted_at = step;
        record.abort_reason = "non-finite train loss";
        break;
      }
      record.best_train_loss = std::min(record.best_train_loss, train_loss);
      log_row(step);
    }
  }

  record.final_train_loss = record.aborted_at ? std::numeric_limits<double>::infinity()
                                              : train_loss;
  if (!record.aborted_at) {
    record.final_metric = task->metric(theta, Split::train);
  }
  return record;
}

std::vector<RunRecord> run_experiment(const ExperimentConfig& config) {
  auto seeds = config.get_u64s("seeds");
  if (seeds.empty()) seeds = {config.get_u64("seed", 1)};
  const TaskPtr task = make_task_from_config(config);
  std::vector<RunRecord> records;
  records.reserve(seeds.size());
  for (std::uint64_t seed : seeds) {
    records.push_back(run_experiment_seed(config, seed, task));
  }
  return records;
}

namespace {

void write_optional(std::string& line, const std::optional<double>& value) {
  line += ",";
  if (value) line += fmt_g(*value);
}

}  // namespace

void write_record_csv(const RunRecord& record, const std::string& path) {
  fs::create_directories(fs::path(path).parent_path().empty() ? "." : fs::path(path).parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);

  out << "# experiment=" << record.experiment << "\n";
  out << "# task=" << record.task_name << "\n";
  out << "# optimizer=" << record.optimizer_name << "\n";
  out << "# config_hash=" << record.hash << "\n";
  out << "# seed=" << record.seed << "\n";
  out << "# steps=" << record.steps << "\n";
  out << "# log_every=" << record.log_every << "\n";
  if (record.nag_beta) out << "# nag_beta=" << fmt_g(*record.nag_beta) << "\n";
  if (record.aborted_at) {
    out << "# aborted_at=" << *record.aborted_at << "\n";
    out << "# abort_reason=" << record.abort_reason << "\n";
  }

  const bool has_val = !record.rows.empty() && record.rows.front().val_loss.has_value();
  const bool has_metric = !record.rows.empty() && record.rows.front().metric.has_value();
  const int law_dim = record.rows.empty() ? 0 : static_cast<int>(record.rows.front().law.size());

  std::string header = "step,train_loss";
  if (has_val) header += ",val_loss";
  if (has_metric) header += ",metric";
  header += ",wall_ms";
  for (int i = 1; i <= law_dim; ++i) header += ",L" + std::to_string(i);
  for (int i = 1; i <= law_dim; ++i) header += ",mnorm" + std::to_string(i);
  out << header << "\n";

  for (const auto& row : record.rows) {
    std::string line = std::to_string(row.step) + "," + fmt_g(row.train_loss);
    if (has_val) write_optional(line, row.val_loss);
    if (has_metric) write_optional(line, row.metric);
    line += "," + std::string(fmt_g(row.wall_ms));
    for (int i = 0; i < law_dim; ++i) line += "," + std::string(fmt_g(row.law[i]));
    for (int i = 0; i < law_dim; ++i) line += "," + std::string(fmt_g(row.column_norms[i]));
    out << line << "\n";
  }
  if (!out) throw std::runtime_error("short write to " + path);
}

RunRecord read_record_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open record " + path);
  RunRecord record;
  std::string line;
  std::vector<std::string> columns;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      const std::string key = line.substr(2, eq - 2);
      const std::string value = line.substr(eq + 1);
      if (key == "experiment") record.experiment = value;
      else if (key == "task") record.task_name = value;
      else if (key == "optimizer") record.optimizer_name = value;
      else if (key == "config_hash") record.hash = value;
      else if (key == "seed") record.seed = std::strtoull(value.c_str(), nullptr, 10);
      else if (key == "steps") record.steps = std::atoi(value.c_str());
      else if (key == "log_every") record.log_every = std::atoi(value.c_str());
      else if (key == "nag_beta") record.nag_beta = std::atof(value.c_str());
      else if (key == "aborted_at") record.aborted_at = std::atoi(value.c_str());
      else if (key == "abort_reason") record.abort_reason = value;
      continue;
    }
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (columns.empty()) {
      columns = fields;
      continue;
    }
    if (fields.size() != columns.size()) {
      throw UsageError(path + ": row has " + std::to_string(fields.size()) + " fields, header has " +
                       std::to_string(columns.size()));
    }
    RunRow row;
    std::vector<double> law;
    std::vector<double> norms;
    for (std::size_t i = 0; i < columns.size(); ++i) {
      const std::string& col = columns[i];
      const std::string& val = fields[i];
      if (col == "step") row.step = std::atoi(val.c_str());
      else if (col == "train_loss") row.train_loss = std::atof(val.c_str());
      else if (col == "val_loss") { if (!val.empty()) row.val_loss = std::atof(val.c_str()); }
      else if (col == "metric") { if (!val.empty()) row.metric = std::atof(val.c_str()); }
      else if (col == "wall_ms") row.wall_ms = std::atof(val.c_str());
      else if (col.rfind("L", 0) == 0) law.push_back(std::atof(val.c_str()));
      else if (col.rfind("mnorm", 0) == 0) norms.push_back(std::atof(val.c_str()));
    }
    row.law = Eigen::Map<const Vec>(law.data(), law.size());
    row.column_norms = Eigen::Map<const Vec>(norms.data(), norms.size());
    record.rows.push_back(std::move(row));
  }
  if (!record.rows.empty()) {
    record.final_train_loss = record.rows.back().train_loss;
    record.best_train_loss = record.rows.front().train_loss;
    for (const auto& row : record.rows) {
      record.best_train_loss = std::min(record.best_train_loss, row.train_loss);
    }
    record.final_metric = record.rows.back().metric;
  }
  return record;
}

void dump_law_trajectory(const RunRecord& record, const std::string& path) {
  if (record.rows.empty() || record.rows.front().law.size() == 0) {
    throw UsageError("law trajectory: record has no learning-law columns (not an RLLC-family run)");
  }
  const int law_dim = static_cast<int>(record.rows.front().law.size());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  std::string header = "step";
  for (int i = 1; i <= law_dim; ++i) header += ",L" + std::to_string(i);
  const bool flag_nag = record.nag_beta.has_value() && law_dim == 2;
  if (flag_nag) header += ",nag_phase";
  out << header << "\n";
  for (const auto& row : record.rows) {
    std::string line = std::to_string(row.step);
    for (int i = 0; i < law_dim; ++i) line += "," + std::string(fmt_g(row.law[i]));
    if (flag_nag) {
      const double beta = *record.nag_beta;
      int flag = 0;
      if (std::abs(row.law[1]) > 1e-12) {
        const double ratio = row.law[0] / row.law[1];
        flag = std::abs(ratio - beta) <= 0.1 * std::abs(beta) ? 1 : 0;
      }
      line += "," + std::to_string(flag);
    }
    out << line << "\n";
  }
  if (!out) throw std::runtime_error("short write to " + path);
}

std::vector<ExperimentConfig> expand_grid(const ExperimentConfig& config) {
  // grid.<param> lists expand over optimizer.<param>.
  std::vector<std::pair<std::string, std::vector<double>>> axes;
  for (const auto& [key, value] : config.kv) {
    if (key.rfind("grid.", 0) == 0) {
      const auto values = config.get_doubles(key);
      if (values.empty()) {
        throw UsageError("experiment '" + config.name + "': empty grid list '" + key + "'");
      }
      axes.emplace_back(key.substr(5), values);
    }
  }
  if (axes.empty()) return {config};

  std::vector<ExperimentConfig> cells;
  std::vector<std::size_t> index(axes.size(), 0);
  while (true) {
    ExperimentConfig cell = config;
    for (const auto& [key, values] : axes) cell.kv.erase("grid." + key);
    std::string suffix;
    for (std::size_t axis = 0; axis < axes.size(); ++axis) {
      const auto& [param, values] = axes[axis];
      const double value = values[index[axis]];
      cell.kv["optimizer." + param] = fmt_g(value);
      suffix += "__" + param + "=" + fmt_g(value);
    }
    cell.name = config.name + suffix;
    cells.push_back(std::move(cell));

    std::size_t axis = 0;
    while (axis < axes.size() && ++index[axis] == axes[axis].second.size()) {
      index[axis] = 0;
      ++axis;
    }
    if (axis == axes.size()) break;
  }
  return cells;
}

namespace {

std::string sanitize_filename(std::string name) {
  for (char& c : name) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.' ||
          c == '=')) {
      c = '_';
    }
  }
  return name;
}

void summarize_cell(SuiteCell& cell) {
  double sum = 0.0;
  cell.min_final_loss = std::numeric_limits<double>::infinity();
  cell.max_final_loss = -std::numeric_limits<double>::infinity();
  double metric_sum = 0.0;
  int metric_count = 0;
  for (std::size_t i = 0; i < cell.final_losses.size(); ++i) {
    const double loss = cell.final_losses[i];
    sum += loss;
    cell.min_final_loss = std::min(cell.min_final_loss, loss);
    cell.max_final_loss = std::max(cell.max_final_loss, loss);
    if (cell.final_metrics[i]) {
      metric_sum += *cell.final_metrics[i];
      ++metric_count;
    }
  }
  const auto count = static_cast<double>(cell.final_losses.size());
  cell.mean_final_loss = count > 0 ? sum / count : std::numeric_limits<double>::infinity();
  if (metric_count > 0) cell.mean_metric = metric_sum / metric_count;
}

}  // namespace

SuiteOutcome run_suite(const std::vector<ExperimentConfig>& configs, int parallelism,
                       const std::string& out_dir) {
  SuiteOutcome outcome;
  const fs::path root = out_dir;
  fs::create_directories(root / "cells");

  // Expand grids up front so cells can run in any order.
  struct Planned {
    std::string section;
    ExperimentConfig config;
    std::vector<std::uint64_t> seeds;
    TaskPtr task;
  };
  std::vector<Planned> plan;
  for (const auto& config : configs) {
    auto seeds = config.get_u64s("seeds");
    if (seeds.empty()) seeds = {config.get_u64("seed", 1)};
    // Tasks are shared across cells of a section (and safe to share across
    // threads); build them once, before the parallel phase.
    TaskPtr task = make_task_from_config(config);
    for (auto& cell : expand_grid(config)) {
      plan.push_back({config.name, std::move(cell), seeds, task});
    }
  }

  std::vector<SuiteCell> cells(plan.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    while (true) {
      const std::size_t at = next.fetch_add(1);
      if (at >= plan.size()) return;
      const Planned& p = plan[at];
      SuiteCell cell;
      cell.section = p.section;
      cell.cell_name = p.config.name;
      cell.config = p.config;
      for (std::uint64_t seed : p.seeds) {
        RunRecord record = run_experiment_seed(p.config, seed, p.task);
        const fs::path file = root / "cells" /
                              (sanitize_filename(p.config.name) + "__seed" +
                               std::to_string(seed) + ".csv");
        write_record_csv(record, file.string());
        cell.final_losses.push_back(record.final_train_loss);
        cell.final_metrics.push_back(record.final_metric);
        if (record.aborted_at) ++cell.aborted_runs;
      }
      summarize_cell(cell);
      cells[at] = std::move(cell);
    }
  };

  const int jobs = std::max(1, parallelism);
  if (jobs == 1 || plan.size() <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  outcome.cells = std::move(cells);

  // Best cell per section by mean final train loss (NaN-free by construction;
  // aborted runs contribute +inf so diverging cells rank last).
  for (const auto& config : configs) {
    const SuiteCell* best = nullptr;
    for (const auto& cell : outcome.cells) {
      if (cell.section != config.name) continue;
      if (!best || cell.mean_final_loss < best->mean_final_loss) best = &cell;
    }
    if (best) outcome.rows.push_back({config.name, *best});
  }

  const fs::path grid_path = root / "grid.csv";
  {
    std::ofstream out(grid_path);
    out << "section,cell,seeds,aborted,final_train_loss_mean,final_train_loss_min,"
           "final_train_loss_max,final_metric_mean\n";
    for (const auto& cell : outcome.cells) {
      out << cell.section << "," << cell.cell_name << "," << cell.final_losses.size() << ","
          << cell.aborted_runs << "," << fmt_g(cell.mean_final_loss) << ","
          << fmt_g(cell.min_final_loss) << "," << fmt_g(cell.max_final_loss) << ","
          << (cell.mean_metric ? fmt_g(*cell.mean_metric) : "") << "\n";
    }
  }
  const fs::path summary_path = root / "summary.csv";
  {
    std::ofstream out(summary_path);
    out << "section,best_cell,seeds,final_train_loss_mean,final_train_loss_min,"
           "final_train_loss_max,final_metric_mean\n";
    for (const auto& row : outcome.rows) {
      const auto& cell = row.best;
      out << row.section << "," << cell.cell_name << "," << cell.final_losses.size() << ","
          << fmt_g(cell.mean_final_loss) << "," << fmt_g(cell.min_final_loss) << ","
          << fmt_g(cell.max_final_loss) << ","
          << (cell.mean_metric ? fmt_g(*cell.mean_metric) : "") << "\n";
    }
  }
  outcome.grid_path = grid_path.string();
  outcome.summary_path = summary_path.string();
  return outcome;
}

std::string resolve_output_dir(const std::string& configured) {
  fs::path path = configured.empty() ? "runs" : configured;
  if (path.is_absolute()) return path.string();
  const char* base = std::getenv("RLLC_OUTPUT_ROOT");
  if (base && *base) return (fs::path(base) / path).string();
  return path.string();
}

}  // namespace rllc
