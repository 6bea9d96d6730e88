#include "erd/eval/evaluator.hpp"

#include <cmath>
#include <map>

#include "erd/autodiff/ops.hpp"
#include "erd/errors.hpp"
#include "erd/learners/episodic.hpp"
#include "erd/rng.hpp"

namespace erd::eval {

namespace {

using learners::to_tensor;

// Gathers cached embeddings for a list of episode rows.
ad::Tensor gather(const std::map<int, ad::Tensor>& cache,
                  const std::vector<sampler::EpisodeRow>& rows, std::size_t width) {
  auto out = ad::Tensor::zeros({rows.size(), width});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& emb = cache.at(rows[i].source.class_id);
    const auto src = emb.data().subspan(rows[i].source.row * width, width);
    std::copy(src.begin(), src.end(), out.data().begin() + i * width);
  }
  return out;
}

std::vector<std::size_t> predict(const learners::Model<float>& model,
                                 const sampler::Episode& episode, const ad::Tensor& support,
                                 const ad::Tensor& query) {
  const std::size_t n_way = episode.spec.n_way;
  const std::size_t nq = query.dim(0);
  std::vector<std::size_t> predicted(nq, 0);
  if (model.type == learners::LearnerType::proto) {
    const auto labels = episode.support_labels();
    const auto logits =
        learners::proto_logits(learners::compute_prototypes(support, labels, n_way), query);
    for (std::size_t q = 0; q < nq; ++q) {
      for (std::size_t k = 1; k < n_way; ++k) {
        if (logits.at(q, k) > logits.at(q, predicted[q])) predicted[q] = k;
      }
    }
    return predicted;
  }
  const auto scores = learners::relation_scores_from_embeddings(*model.relation, support, query);
  const std::size_t ns = support.dim(0);
  for (std::size_t q = 0; q < nq; ++q) {
    std::vector<double> per_class(n_way, 0.0);
    for (std::size_t s = 0; s < ns; ++s) per_class[episode.support[s].label] += scores.at(q, s);
    for (std::size_t k = 1; k < n_way; ++k) {
      if (per_class[k] > per_class[predicted[q]]) predicted[q] = k;
    }
  }
  return predicted;
}

}  // namespace

EpisodicResult eval_episodic(const learners::Model<float>& model,
                             std::span<const data::ClassData> pool,
                             const sampler::EpisodeSpec& spec, std::size_t n_ep,
                             std::uint64_t seed, bool trace) {
  spec.validate();
  if (n_ep == 0) throw EvaluationError("evaluation needs at least one episode");
  if (pool.size() < spec.n_way) {
    throw EvaluationError("evaluation pool has " + std::to_string(pool.size()) +
                          " classes, episodes need " + std::to_string(spec.n_way));
  }
  for (const auto& c : pool) {
    if (c.test.rows < spec.rows_per_class()) {
      throw EvaluationError("class " + std::to_string(c.id) + " has " +
                            std::to_string(c.test.rows) + " test rows, episodes need " +
                            std::to_string(spec.rows_per_class()));
    }
  }
  if (model.type == learners::LearnerType::relation && !model.relation) {
    throw EvaluationError("relation learner without a relation module");
  }

  ad::NoGradScope<float> no_grad;
  std::map<int, ad::Tensor> cache;
  for (const auto& c : pool) cache[c.id] = model.embed.forward(to_tensor<float>(c.test));
  const std::size_t width = model.embed.output_dim();

  const auto sources = sampler::pool_sources(pool, 0, data::Split::test);
  EpisodicResult result;
  result.accuracies.reserve(n_ep);
  for (std::size_t e = 0; e < n_ep; ++e) {
    Rng rng(derive_seed(seed, e));
    const auto episode = sampler::sample_standard(sources, spec, rng);
    const auto support = gather(cache, episode.support, width);
    const auto query = gather(cache, episode.query, width);
    const auto predicted = predict(model, episode, support, query);
    std::size_t correct = 0;
    for (std::size_t q = 0; q < predicted.size(); ++q) correct += predicted[q] == episode.query[q].label;
    result.accuracies.push_back(static_cast<double>(correct) /
                                static_cast<double>(predicted.size()));
    if (trace) {
      for (const auto& row : episode.support) result.touched.push_back(row.source);
      for (const auto& row : episode.query) result.touched.push_back(row.source);
    }
  }
  const auto summary = summarize(result.accuracies);
  result.record.mean = summary.mean;
  result.record.ci95 = summary.ci95;
  result.record.n_episodes = n_ep;
  result.record.shots = spec.k_shot;
  result.record.ways = spec.n_way;
  result.record.seed = seed;
  return result;
}

std::vector<MetricRecord> eval_seen(const learners::Model<float>& model,
                                    const data::TaskStream& stream, std::size_t t,
                                    const sampler::EpisodeSpec& spec, std::size_t n_ep_per_task,
                                    std::uint64_t seed) {
  if (t < 1 || t > stream.n_tasks()) {
    throw EvaluationError("seen-class evaluation needs 1 <= t <= " +
                          std::to_string(stream.n_tasks()));
  }
  std::vector<MetricRecord> records;
  double mean_total = 0.0;
  double ci_squares = 0.0;
  for (std::size_t u = 1; u <= t; ++u) {
    auto result =
        eval_episodic(model, stream.task(u).classes, spec, n_ep_per_task, derive_seed(seed, u));
    auto record = result.record;
    record.session = t;
    record.metric = MetricKind::per_task_acc;
    record.task_id = u;
    mean_total += record.mean;
    ci_squares += record.ci95 * record.ci95;
    records.push_back(record);
  }
  MetricRecord seen;
  seen.session = t;
  seen.metric = MetricKind::seen_mean_acc;
  seen.mean = mean_total / static_cast<double>(t);
  // Interval of an average of t independent estimates.
  seen.ci95 = std::sqrt(ci_squares) / static_cast<double>(t);
  seen.n_episodes = n_ep_per_task * t;
  seen.shots = spec.k_shot;
  seen.ways = spec.n_way;
  seen.seed = seed;
  records.push_back(seen);
  return records;
}

MetricRecord eval_meta_test(const learners::Model<float>& model, const data::TaskStream& stream,
                            const sampler::EpisodeSpec& spec, std::size_t n_ep,
                            std::uint64_t seed) {
  if (stream.meta_test.empty()) throw EvaluationError("task stream has no meta-test classes");
  auto record = eval_episodic(model, stream.meta_test, spec, n_ep, seed).record;
  record.metric = MetricKind::meta_test_acc;
  return record;
}

}  // namespace erd::eval
