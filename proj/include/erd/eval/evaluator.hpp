#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "erd/data/task_stream.hpp"
#include "erd/eval/metrics.hpp"
#include "erd/learners/networks.hpp"
#include "erd/sampler/episode.hpp"
#include "erd/sampler/sampler.hpp"

namespace erd::eval {

struct EpisodicResult {
  MetricRecord record;
  std::vector<double> accuracies;  // one per episode
  /// Every row the episodes used, when tracing was requested.
  std::vector<sampler::SampleRef> touched;
};

/// Runs n_ep standard episodes drawn from the test split of `pool`. Episode e
/// uses its own generator seeded with derive_seed(seed, e), so results do not
/// depend on evaluation order. Embeddings are computed once per class.
///
/// ProtoNet predicts the nearest prototype; RelationNet averages the relation
/// scores of each class's support rows and takes the best class.
EpisodicResult eval_episodic(const learners::Model<float>& model,
                             std::span<const data::ClassData> pool,
                             const sampler::EpisodeSpec& spec, std::size_t n_ep,
                             std::uint64_t seed, bool trace = false);

/// Per-task accuracy for tasks 1..t plus their unweighted mean.
/// Task u is evaluated with seed derive_seed(seed, u). The returned records
/// are the t per_task_acc entries followed by seen_mean_acc.
std::vector<MetricRecord> eval_seen(const learners::Model<float>& model,
                                    const data::TaskStream& stream, std::size_t t,
                                    const sampler::EpisodeSpec& spec, std::size_t n_ep_per_task,
                                    std::uint64_t seed);

MetricRecord eval_meta_test(const learners::Model<float>& model, const data::TaskStream& stream,
                            const sampler::EpisodeSpec& spec, std::size_t n_ep,
                            std::uint64_t seed);

}  // namespace erd::eval
