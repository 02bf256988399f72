#pragma once

#include "rllc/config.hpp"
#include "rllc/optim.hpp"
#include "rllc/tasks.hpp"

#include <optional>
#include <string>
#include <vector>

namespace rllc {

/// Builds the task named by the section's task.* keys. Tasks are immutable
/// and thread-safe, so one instance may back many runs.
TaskPtr make_task_from_config(const ExperimentConfig& config);

/// Fresh optimizer instance from the section's optimizer.* keys.
OptimizerPtr make_optimizer_from_config(const ExperimentConfig& config);

struct RunRow {
  int step = 0;
  double train_loss = 0.0;
  std::optional<double> val_loss;
  std::optional<double> metric;
  double wall_ms = 0.0;
  Vec law;           ///< empty unless the optimizer exposes a state probe
  Vec column_norms;  ///< ditto
};

/// Per-seed result of one training run, the row material for one CSV file.
struct RunRecord {
  std::string experiment;
  std::string task_name;
  std::string optimizer_name;
  std::string hash;  ///< config hash; identical configs share it across seeds
  std::uint64_t seed = 0;
  int steps = 0;
  int log_every = 1;
  /// Decay parameter of an M(beta)⊕M(0)-shaped propagator; drives the
  /// NAG-phase flag in law-trajectory dumps.
  std::optional<double> nag_beta;
  std::vector<RunRow> rows;
  double final_train_loss = 0.0;
  double best_train_loss = 0.0;
  std::optional<double> final_metric;
  std::optional<int> aborted_at;  ///< step of a non-finite loss/gradient, if any
  std::string abort_reason;
};

/// Runs the training loop for one seed: gradient -> optimizer -> delta ->
/// params, logging every log_every steps plus the final step. A non-finite
/// loss or gradient aborts with a diagnostic record instead of throwing.
RunRecord run_experiment_seed(const ExperimentConfig& config, std::uint64_t seed,
                              const TaskPtr& task = nullptr);

/// All seeds of the section's seed list (default seed 1).
std::vector<RunRecord> run_experiment(const ExperimentConfig& config);

void write_record_csv(const RunRecord& record, const std::string& path);
RunRecord read_record_csv(const std::string& path);

/// Writes (step, L1..Lk) rows, plus a nag_phase flag column when the record
/// carries a NAG ratio target: flagged where |L1/L2 - beta| <= 0.1*|beta|.
/// Rejects records without law columns.
void dump_law_trajectory(const RunRecord& record, const std::string& path);

/// Expands grid.* keys (comma lists over optimizer hyperparameters) into
/// concrete experiment cells; returns the section itself when no grid keys
/// are present.
std::vector<ExperimentConfig> expand_grid(const ExperimentConfig& config);

struct SuiteCell {
  std::string section;
  std::string cell_name;  ///< section plus grid assignments
  ExperimentConfig config;
  std::vector<double> final_losses;  ///< per seed; +inf for aborted runs
  std::vector<std::optional<double>> final_metrics;
  double mean_final_loss = 0.0;
  double min_final_loss = 0.0;
  double max_final_loss = 0.0;
  std::optional<double> mean_metric;
  int aborted_runs = 0;
};

struct SuiteRow {
  std::string section;
  SuiteCell best;  ///< grid cell with smallest mean final train loss
};

struct SuiteOutcome {
  std::vector<SuiteCell> cells;  ///< every grid cell, run order
  std::vector<SuiteRow> rows;    ///< one per section
  std::string summary_path;
  std::string grid_path;
};

/// Runs every section (grid-expanded) across its seeds, writing per-run CSVs
/// under out_dir/cells, a per-cell grid.csv and a per-section summary.csv.
/// Cells run independently; parallelism > 1 distributes them over threads.
/// Individual failures are recorded and the suite continues.
SuiteOutcome run_suite(const std::vector<ExperimentConfig>& configs, int parallelism,
                       const std::string& out_dir);

/// Output directory resolution: absolute paths win; otherwise paths are
/// rooted at $RLLC_OUTPUT_ROOT when set.
std::string resolve_output_dir(const std::string& configured);

}  // namespace rllc
