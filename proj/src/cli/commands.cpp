#include "erd/cli/commands.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <map>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include "erd/data/synthetic.hpp"
#include "erd/errors.hpp"
#include "erd/eval/evaluator.hpp"
#include "erd/learners/checkpoint.hpp"

namespace erd::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string());
  out << text;
  out.flush();
  if (!out) throw IoError("failed writing " + path.string());
}

std::string session_dir_name(std::size_t t) { return "session_" + std::to_string(t); }

std::string format_value(double v) {
  std::ostringstream s;
  s << v;
  return s.str();
}

}  // namespace

data::Dataset resolve_dataset(const ExperimentConfig& config) {
  if (config.dataset_path.empty()) return data::generate_synthetic(config.synthetic);
  return data::load_dataset(config.dataset_path);
}

data::TaskStream resolve_stream(const ExperimentConfig& config, const data::Dataset& dataset) {
  return data::build_task_stream(dataset, config.stream.n_tasks, config.stream.classes_per_task,
                                 config.stream.n_meta_test, config.stream.seed);
}

void cmd_gen_synth(const ExperimentConfig& config, const fs::path& out) {
  config.synthetic.validate();
  const auto dataset = data::generate_synthetic(config.synthetic);
  data::save_dataset(out, dataset);
}

void cmd_split(const ExperimentConfig& config, const fs::path& out_file) {
  const auto dataset = resolve_dataset(config);
  const auto stream = resolve_stream(config, dataset);
  if (out_file.has_parent_path()) fs::create_directories(out_file.parent_path());
  data::save_stream_layout(out_file, stream);
}

namespace {

void train_on(const ExperimentConfig& raw, const data::Dataset& dataset, const fs::path& run_dir,
              std::ostream* log) {
  const ExperimentConfig config = materialize(raw);
  config.validate();
  const auto stream = resolve_stream(config, dataset);
  const auto setup = make_run_setup(config, dataset.front().dim());

  fs::create_directories(run_dir);
  json resolved = to_json(config);
  resolved["output"]["dir"] = run_dir.string();
  write_text(run_dir / "config.resolved.json", resolved.dump(2) + "\n");
  data::save_stream_layout(run_dir / "stream.json", stream);
  const fs::path metrics = run_dir / "metrics.jsonl";
  write_text(metrics, "");

  trainer::TrainingObserver observer;
  observer.on_session = [&](const trainer::SessionResult& result,
                            const memory::ExemplarBuffer& buffer) {
    const fs::path dir = run_dir / session_dir_name(result.task);
    learners::save_model(dir / "model", result.model);
    memory::save_buffer(dir / "buffer", buffer);
    eval::append_jsonl(metrics, result.metrics);
    if (log) {
      *log << "session " << result.task << " (" << trainer::to_string(config.train.method)
           << ", " << result.optimizer_steps << " steps)";
      for (const auto& r : result.metrics) {
        if (r.metric == eval::MetricKind::per_task_acc) continue;
        *log << "  " << eval::to_string(r.metric) << " " << r.mean << " +- " << r.ci95;
      }
      *log << '\n';
    }
  };
  trainer::run(stream, setup, observer);
}

}  // namespace

void cmd_train(const ExperimentConfig& config, const fs::path& run_dir, std::ostream* log) {
  config.validate();
  const auto dataset = resolve_dataset(config);
  train_on(config, dataset, run_dir, log);
}

std::vector<eval::MetricRecord> cmd_eval(const ExperimentConfig& raw, const fs::path& checkpoint,
                                         std::size_t session, const fs::path& out) {
  const ExperimentConfig config = materialize(raw);
  config.validate();
  const auto dataset = resolve_dataset(config);
  const auto stream = resolve_stream(config, dataset);
  if (session < 1 || session > stream.n_tasks()) {
    throw ValidationError("session must be in [1, " + std::to_string(stream.n_tasks()) + "]");
  }
  const auto model = learners::load_model(checkpoint);
  const auto& spec = config.train.episode_spec;

  auto records =
      eval::eval_seen(model, stream, session, spec, config.eval.n_ep_per_task, config.eval.seed);
  records.push_back(eval::eval_meta_test(model, stream, spec, config.eval.n_ep, config.eval.seed));
  for (auto& r : records) r.session = session;

  fs::create_directories(out);
  write_text(out / "metrics.jsonl", "");
  eval::append_jsonl(out / "metrics.jsonl", records);
  return records;
}

bool is_sweep_axis(const std::string& axis) {
  return axis == "P" || axis == "lambda_m" || axis == "lambda_e" || axis == "n_ex" ||
         axis == "bf";
}

ExperimentConfig with_axis_value(const ExperimentConfig& base, const std::string& axis,
                                 double value) {
  ExperimentConfig c = base;
  auto count = [&]() {
    if (value < 1.0 || value != static_cast<double>(static_cast<std::size_t>(value))) {
      throw ValidationError("axis " + axis + " needs a positive integer, got " +
                            format_value(value));
    }
    return static_cast<std::size_t>(value);
  };
  if (axis == "P") {
    c.train.sampler.p_prev = value;
  } else if (axis == "lambda_m") {
    c.train.weights.lambda_m = value;
  } else if (axis == "lambda_e") {
    c.train.weights.lambda_e = value;
  } else if (axis == "n_ex") {
    c.memory.policy = memory::BufferPolicy::per_class(count());
    c.memory.policy.bf = base.memory.policy.bf;
  } else if (axis == "bf") {
    c.memory.policy = memory::BufferPolicy::bounded(count());
    c.memory.policy.n_ex = base.memory.policy.n_ex;
  } else {
    throw ValidationError("unknown sweep axis '" + axis + "' (P, lambda_m, lambda_e, n_ex, bf)");
  }
  return c;
}

std::vector<SweepOutcome> cmd_sweep(const ExperimentConfig& base, const std::string& axis,
                                    const std::vector<double>& values, const fs::path& out,
                                    std::size_t jobs, std::ostream* log) {
  if (!is_sweep_axis(axis)) {
    throw ValidationError("unknown sweep axis '" + axis + "' (P, lambda_m, lambda_e, n_ex, bf)");
  }
  if (values.empty()) throw ValidationError("sweep needs at least one value");
  base.validate();
  const auto dataset = resolve_dataset(base);
  fs::create_directories(out);

  std::vector<SweepOutcome> outcomes(values.size());
  std::mutex log_mutex;
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t i = next++; i < values.size(); i = next++) {
      auto& o = outcomes[i];
      o.value = values[i];
      o.run_dir = out / (axis + "=" + format_value(values[i]));
      try {
        const auto config = with_axis_value(base, axis, values[i]);
        train_on(config, dataset, o.run_dir, nullptr);
        o.ok = true;
      } catch (const std::exception& e) {
        o.error = e.what();
      }
      if (log) {
        std::lock_guard lock(log_mutex);
        *log << axis << "=" << format_value(o.value) << ": " << (o.ok ? "done" : "FAILED " + o.error)
             << '\n';
      }
    }
  };
  const std::size_t n_threads = std::max<std::size_t>(1, std::min(jobs, values.size()));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    for (std::size_t i = 0; i < n_threads; ++i) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }

  std::ostringstream csv;
  csv.precision(17);
  csv << "axis,value,session,seen_mean_acc,seen_mean_ci95,meta_test_acc,meta_test_ci95\n";
  std::ostringstream failures;
  for (const auto& o : outcomes) {
    if (!o.ok) {
      failures << axis << "=" << format_value(o.value) << ": " << o.error << '\n';
      continue;
    }
    const auto records = eval::read_jsonl(o.run_dir / "metrics.jsonl");
    std::map<std::size_t, std::pair<const eval::MetricRecord*, const eval::MetricRecord*>> rows;
    for (const auto& r : records) {
      if (r.metric == eval::MetricKind::seen_mean_acc) rows[r.session].first = &r;
      if (r.metric == eval::MetricKind::meta_test_acc) rows[r.session].second = &r;
    }
    for (const auto& [session, pair] : rows) {
      csv << axis << ',' << format_value(o.value) << ',' << session << ',';
      if (pair.first) csv << pair.first->mean << ',' << pair.first->ci95;
      else csv << ',';
      csv << ',';
      if (pair.second) csv << pair.second->mean << ',' << pair.second->ci95;
      else csv << ',';
      csv << '\n';
    }
  }
  write_text(out / "sweep.csv", csv.str());
  const fs::path failure_file = out / "sweep_failures.txt";
  if (failures.str().empty()) {
    fs::remove(failure_file);
  } else {
    write_text(failure_file, failures.str());
  }
  return outcomes;
}

}  // namespace erd::cli
