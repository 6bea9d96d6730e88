#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "erd/cli/config.hpp"
#include "erd/data/task_stream.hpp"

namespace erd::cli {

/// Loads `dataset_path`, or generates the synthetic spec when it is empty.
data::Dataset resolve_dataset(const ExperimentConfig& config);
data::TaskStream resolve_stream(const ExperimentConfig& config, const data::Dataset& dataset);

/// Writes the synthetic dataset to `out`. Generator settings are validated before
/// anything touches the disk.
void cmd_gen_synth(const ExperimentConfig& config, const std::filesystem::path& out);

/// Writes the class-to-task assignment as JSON.
void cmd_split(const ExperimentConfig& config, const std::filesystem::path& out_file);

/// Run directory layout:
///   config.resolved.json   every field, defaults filled in
///   stream.json            class ids per task and meta-test
///   metrics.jsonl          one record per line, appended after each session
///   session_<t>/model/     checkpoint after task t
///   session_<t>/buffer/    exemplar buffer after task t
/// Each session's files are written before the next task starts.
void cmd_train(const ExperimentConfig& config, const std::filesystem::path& run_dir,
               std::ostream* log = nullptr);

/// Evaluates a saved checkpoint on the stream of `config`: seen tasks 1..session
/// and the meta-test classes. Writes metrics.jsonl into `out`.
std::vector<eval::MetricRecord> cmd_eval(const ExperimentConfig& config,
                                         const std::filesystem::path& checkpoint,
                                         std::size_t session, const std::filesystem::path& out);

/// Axes: P, lambda_m, lambda_e, n_ex, bf.
bool is_sweep_axis(const std::string& axis);
ExperimentConfig with_axis_value(const ExperimentConfig& base, const std::string& axis,
                                 double value);

struct SweepOutcome {
  double value = 0.0;
  std::filesystem::path run_dir;
  bool ok = false;
  std::string error;
};

/// One run directory per value under `out` (named "<axis>=<value>"), all with
/// the base seed, plus sweep.csv with one row per value and session:
///   axis,value,session,seen_mean_acc,seen_mean_ci95,meta_test_acc,meta_test_ci95
/// A failed run is recorded in sweep_failures.txt and the sweep moves on.
/// `jobs` > 1 runs that many configurations at once.
std::vector<SweepOutcome> cmd_sweep(const ExperimentConfig& base, const std::string& axis,
                                    const std::vector<double>& values,
                                    const std::filesystem::path& out, std::size_t jobs = 1,
                                    std::ostream* log = nullptr);

}  // namespace erd::cli
