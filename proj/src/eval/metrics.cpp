#include "erd/eval/metrics.hpp"

#include <cmath>
#include <fstream>
#include "json.hpp"

#include "erd/errors.hpp"

namespace erd::eval {

using json = nlohmann::json;

std::string_view to_string(MetricKind kind) {
  switch (kind) {
    case MetricKind::meta_test_acc: return "meta_test_acc";
    case MetricKind::seen_mean_acc: return "seen_mean_acc";
    case MetricKind::per_task_acc: return "per_task_acc";
  }
  return "unknown";
}

MetricKind parse_metric_kind(std::string_view text) {
  if (text == "meta_test_acc") return MetricKind::meta_test_acc;
  if (text == "seen_mean_acc") return MetricKind::seen_mean_acc;
  if (text == "per_task_acc") return MetricKind::per_task_acc;
  throw FormatError("unknown metric '" + std::string(text) + "'");
}

Summary summarize(std::span<const double> values) {
  Summary out;
  if (values.empty()) return out;
  const double n = static_cast<double>(values.size());
  double total = 0.0;
  for (double v : values) total += v;
  out.mean = total / n;
  if (values.size() < 2) return out;
  double squares = 0.0;
  for (double v : values) squares += (v - out.mean) * (v - out.mean);
  out.ci95 = 1.96 * std::sqrt(squares / (n - 1.0)) / std::sqrt(n);
  return out;
}

std::string to_json_line(const MetricRecord& record) {
  json j;
  j["session"] = record.session;
  j["metric"] = std::string(to_string(record.metric));
  if (record.task_id) j["task_id"] = *record.task_id;
  j["mean"] = record.mean;
  j["ci95"] = record.ci95;
  j["n_episodes"] = record.n_episodes;
  j["shots"] = record.shots;
  j["ways"] = record.ways;
  j["seed"] = record.seed;
  return j.dump();
}

MetricRecord parse_json_line(std::string_view line) {
  try {
    const json j = json::parse(line);
    MetricRecord record;
    record.session = j.at("session").get<std::size_t>();
    record.metric = parse_metric_kind(j.at("metric").get<std::string>());
    if (j.contains("task_id")) record.task_id = j.at("task_id").get<std::size_t>();
    record.mean = j.at("mean").get<double>();
    record.ci95 = j.at("ci95").get<double>();
    record.n_episodes = j.at("n_episodes").get<std::size_t>();
    record.shots = j.at("shots").get<std::size_t>();
    record.ways = j.at("ways").get<std::size_t>();
    record.seed = j.at("seed").get<std::uint64_t>();
    return record;
  } catch (const json::exception& e) {
    throw FormatError("malformed metric record: " + std::string(e.what()));
  }
}

void append_jsonl(const std::filesystem::path& path, std::span<const MetricRecord> records) {
  std::ofstream out(path, std::ios::app);
  if (!out) throw IoError("cannot open " + path.string());
  for (const auto& r : records) out << to_json_line(r) << '\n';
  out.flush();
  if (!out) throw IoError("failed writing " + path.string());
}

std::vector<MetricRecord> read_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<MetricRecord> records;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) records.push_back(parse_json_line(line));
  }
  return records;
}

void write_csv(const std::filesystem::path& path, std::span<const MetricRecord> records) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string());
  out << "session,metric,task_id,mean,ci95,n_episodes\n";
  out.precision(17);
  for (const auto& r : records) {
    out << r.session << ',' << to_string(r.metric) << ',';
    if (r.task_id) out << *r.task_id;
    out << ',' << r.mean << ',' << r.ci95 << ',' << r.n_episodes << '\n';
  }
}

}  // namespace erd::eval
