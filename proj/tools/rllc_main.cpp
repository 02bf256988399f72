#include "rllc/config.hpp"
#include "rllc/harness.hpp"
#include "rllc/propagator_expr.hpp"
#include "rllc/verify.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>

namespace {

namespace fs = std::filesystem;

int cmd_run(const std::string& config_path, const std::string& only) {
  auto configs = rllc::load_config_file(config_path);
  if (configs.empty()) throw rllc::UsageError("config file has no [experiment] sections");
  bool matched = false;
  for (const auto& config : configs) {
    if (!only.empty() && config.name != only) continue;
    matched = true;
    const std::string out_dir = rllc::resolve_output_dir(config.get("output", "runs"));
    const auto records = rllc::run_experiment(config);
    for (const auto& record : records) {
      const fs::path file = fs::path(out_dir) / config.name /
                            ("seed" + std::to_string(record.seed) + ".csv");
      fs::create_directories(file.parent_path());
      rllc::write_record_csv(record, file.string());
      std::printf("%s seed=%llu final_loss=%.6g%s -> %s\n", config.name.c_str(),
                  static_cast<unsigned long long>(record.seed), record.final_train_loss,
                  record.aborted_at ? (" ABORTED@" + std::to_string(*record.aborted_at)).c_str()
                                    : "",
                  file.c_str());
    }
  }
  if (!matched) throw rllc::UsageError("no experiment named '" + only + "' in " + config_path);
  return 0;
}

int cmd_suite(const std::string& config_path, int jobs, std::string out_dir) {
  auto configs = rllc::load_config_file(config_path);
  if (out_dir.empty()) {
    out_dir = configs.empty() ? "runs" : configs.front().get("output", "runs");
  }
  out_dir = rllc::resolve_output_dir(out_dir);
  const auto outcome = rllc::run_suite(configs, jobs, out_dir);
  for (const auto& row : outcome.rows) {
    std::printf("%-30s best=%s mean_final_loss=%.6g%s\n", row.section.c_str(),
                row.best.cell_name.c_str(), row.best.mean_final_loss,
                row.best.mean_metric ? (" metric=" + std::to_string(*row.best.mean_metric)).c_str()
                                     : "");
  }
  std::printf("summary: %s\n", outcome.summary_path.c_str());
  std::printf("grid:    %s\n", outcome.grid_path.c_str());
  return 0;
}

int cmd_verify(const std::string& which) {
  const auto results = rllc::run_verify_suite(which);
  bool all_passed = true;
  for (const auto& result : results) {
    std::printf("[%s] %s: %s\n", result.passed ? "PASS" : "FAIL", result.name.c_str(),
                result.detail.c_str());
    all_passed = all_passed && result.passed;
  }
  return all_passed ? 0 : 1;
}

int cmd_abstract_rule(const std::string& expr, int unit, int len) {
  const rllc::Propagator p = rllc::parse_propagator(expr);
  if (unit < 0 || unit >= p.dim()) {
    throw rllc::UsageError("--unit " + std::to_string(unit) + " out of range; " + p.label +
                           " has " + std::to_string(p.dim()) + " units");
  }
  const rllc::AbstractRule rule = rllc::abstract_rule(p, unit, len);
  std::printf("# %s unit %d, %d positions (tail %.3g)\n", p.label.c_str(), unit, len,
              rule.tail());
  for (int i = 0; i < len; ++i) {
    std::printf("%s%.12g", i ? "," : "", rule.coefficients[i]);
  }
  std::printf("\n");
  return 0;
}

int cmd_law_dump(const std::string& record_path, std::string out_path) {
  const rllc::RunRecord record = rllc::read_record_csv(record_path);
  if (out_path.empty()) {
    fs::path p = record_path;
    p.replace_extension("");
    out_path = p.string() + "_law.csv";
  }
  rllc::dump_law_trajectory(record, out_path);
  std::printf("law trajectory -> %s\n", out_path.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Linear-memory optimizers with retrospective learning-law correction"};
  app.require_subcommand(1);

  std::string config_path, only_name, out_dir, verify_name, expr, record_path, law_out;
  int jobs = 1, unit = 0, len = 50;

  auto* run = app.add_subcommand("run", "Run the experiments in a config file");
  run->add_option("config", config_path, "config file")->required();
  run->add_option("--name", only_name, "run only the named experiment section");

  auto* suite = app.add_subcommand("suite", "Run a grid suite and write summary CSVs");
  suite->add_option("config", config_path, "config file")->required();
  suite->add_option("--jobs", jobs, "parallel cells")->check(CLI::PositiveNumber);
  suite->add_option("--out", out_dir, "output directory (overrides config)");

  auto* verify = app.add_subcommand("verify", "Run a named property suite");
  verify->add_option("suite", verify_name, "one of: equivalences, basis-independence, "
                                           "abstract-rules, span-convergence, gradients")
      ->required();

  auto* rule = app.add_subcommand("abstract-rule", "Print a unit's abstract rule");
  rule->add_option("expr", expr, "propagator expression, e.g. M(0.9)+Mk(2,0.6)")->required();
  rule->add_option("--unit", unit, "unit index (0-based)");
  rule->add_option("--len", len, "number of positions")->check(CLI::PositiveNumber);

  auto* dump = app.add_subcommand("law-dump", "Extract the learning-law trajectory from a record");
  dump->add_option("record", record_path, "run record CSV")->required();
  dump->add_option("-o,--out", law_out, "output CSV path");

  try {
    app.parse(argc, argv);
    if (run->parsed()) return cmd_run(config_path, only_name);
    if (suite->parsed()) return cmd_suite(config_path, jobs, out_dir);
    if (verify->parsed()) return cmd_verify(verify_name);
    if (rule->parsed()) return cmd_abstract_rule(expr, unit, len);
    if (dump->parsed()) return cmd_law_dump(record_path, law_out);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const rllc::UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const rllc::PropagatorParseError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
