#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace erd::eval {

enum class MetricKind { meta_test_acc, seen_mean_acc, per_task_acc };

std::string_view to_string(MetricKind kind);
MetricKind parse_metric_kind(std::string_view text);

/// One evaluation result. ci95 = 1.96 * sample_std / sqrt(n_episodes) over
/// per-episode accuracies; task_id is set for per_task_acc only.
struct MetricRecord {
  std::size_t session = 0;
  MetricKind metric = MetricKind::meta_test_acc;
  std::optional<std::size_t> task_id;
  double mean = 0.0;
  double ci95 = 0.0;
  std::size_t n_episodes = 0;
  std::size_t shots = 0;
  std::size_t ways = 0;
  std::uint64_t seed = 0;

  bool operator==(const MetricRecord&) const = default;
};

struct Summary {
  double mean = 0.0;
  double ci95 = 0.0;
};

/// Mean and 95% interval half-width (n-1 standard deviation) of a sample.
Summary summarize(std::span<const double> values);

std::string to_json_line(const MetricRecord& record);
MetricRecord parse_json_line(std::string_view line);

/// Appends one JSON object per record, one per line.
void append_jsonl(const std::filesystem::path& path, std::span<const MetricRecord> records);
std::vector<MetricRecord> read_jsonl(const std::filesystem::path& path);

/// Header: session,metric,task_id,mean,ci95,n_episodes
void write_csv(const std::filesystem::path& path, std::span<const MetricRecord> records);

}  // namespace erd::eval
