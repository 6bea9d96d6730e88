#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "erd/data/task_stream.hpp"
#include "erd/memory/exemplar_buffer.hpp"
#include "erd/rng.hpp"
#include "erd/sampler/episode.hpp"

namespace erd::sampler {

/// How previous-task classes enter a cross-task sub-episode.
///   fixed_count: exactly round(N * P) previous classes
///   binomial:    each of the N slots is previous with probability P
///   rand_pool:   N classes uniformly over every class seen so far
enum class PrevStrategy { fixed_count, binomial, rand_pool };

std::string_view to_string(PrevStrategy strategy);
PrevStrategy parse_prev_strategy(std::string_view text);

struct SamplerConfig {
  double p_prev = 0.2;
  PrevStrategy strategy = PrevStrategy::fixed_count;

  void validate() const;
};

/// A class that rows can be drawn from.
///
/// `rows` is either a full split of a class or a buffer's exemplar block;
/// `source_rows`, when set, maps each row of `rows` back to its train-split
/// row index.
struct ClassSource {
  int class_id = 0;
  std::size_t origin_task = 0;
  data::Split split = data::Split::train;
  const data::FeatureMatrix* rows = nullptr;
  const std::vector<std::size_t>* source_rows = nullptr;
  /// Buffer-backed classes may fall back to drawing with replacement.
  bool allow_replacement = false;

  std::size_t size() const { return rows->rows; }
};

/// Classes of a task (train or test split).
std::vector<ClassSource> task_sources(const data::Task& task,
                                      data::Split split = data::Split::train);
/// Classes of an arbitrary pool, all tagged with the same origin task.
std::vector<ClassSource> pool_sources(std::span<const data::ClassData> classes,
                                      std::size_t origin_task, data::Split split);
/// Non-empty classes stored in the buffer.
std::vector<ClassSource> buffer_sources(const memory::ExemplarBuffer& buffer);

/// Episode over the given classes: N classes without replacement, then
/// K + K^Q rows per class without replacement, the first K as support.
Episode sample_standard(std::span<const ClassSource> pool, const EpisodeSpec& spec, Rng& rng);
Episode sample_standard(const data::Task& task, const EpisodeSpec& spec, Rng& rng);

/// Mixes current-task classes with buffer classes according to `config`.
/// Previous-class rows come from the buffer only.
Episode sample_cross_task(const data::Task& current, const memory::ExemplarBuffer& buffer,
                          const EpisodeSpec& spec, const SamplerConfig& config, Rng& rng);

/// N buffer classes with K + K^Q rows each.
Episode sample_exemplar(const memory::ExemplarBuffer& buffer, const EpisodeSpec& spec, Rng& rng);

}  // namespace erd::sampler
