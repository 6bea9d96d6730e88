#include "erd/sampler/episode.hpp"

#include <set>

#include "erd/errors.hpp"

namespace erd::sampler {

void EpisodeSpec::validate() const {
  if (n_way < 1 || k_shot < 1 || k_query < 1) {
    throw ValidationError("episode spec: n_way, k_shot and k_query must all be >= 1");
  }
}

std::string_view to_string(EpisodeKind kind) {
  switch (kind) {
    case EpisodeKind::standard: return "standard";
    case EpisodeKind::cross_task: return "cross_task";
    case EpisodeKind::exemplar: return "exemplar";
  }
  return "unknown";
}

std::vector<std::size_t> Episode::support_labels() const {
  std::vector<std::size_t> labels;
  labels.reserve(support.size());
  for (const auto& row : support) labels.push_back(row.label);
  return labels;
}

std::vector<std::size_t> Episode::query_labels() const {
  std::vector<std::size_t> labels;
  labels.reserve(query.size());
  for (const auto& row : query) labels.push_back(row.label);
  return labels;
}

void validate_episode(const Episode& episode, std::size_t current_task) {
  const auto& spec = episode.spec;
  if (episode.class_ids.size() != spec.n_way) {
    throw ValidationError("episode has " + std::to_string(episode.class_ids.size()) +
                          " classes, expected " + std::to_string(spec.n_way));
  }
  if (std::set<int>(episode.class_ids.begin(), episode.class_ids.end()).size() != spec.n_way) {
    throw ValidationError("episode classes are not distinct");
  }
  if (episode.support.size() != spec.n_way * spec.k_shot ||
      episode.query.size() != spec.n_way * spec.k_query) {
    throw ValidationError("episode row counts do not match its spec");
  }
  if (episode.support_x.rows != episode.support.size() ||
      episode.query_x.rows != episode.query.size()) {
    throw ValidationError("episode feature rows do not match its row records");
  }
  for (std::size_t i = 0; i < episode.support.size(); ++i) {
    const auto& row = episode.support[i];
    if (row.label != i / spec.k_shot || row.source.class_id != episode.class_ids[row.label]) {
      throw ValidationError("support rows are not grouped by episode class");
    }
  }
  for (std::size_t i = 0; i < episode.query.size(); ++i) {
    const auto& row = episode.query[i];
    if (row.label != i / spec.k_query || row.source.class_id != episode.class_ids[row.label]) {
      throw ValidationError("query rows are not grouped by episode class");
    }
  }
  if (episode.kind == EpisodeKind::exemplar && current_task > 0) {
    for (const auto* rows : {&episode.support, &episode.query}) {
      for (const auto& row : *rows) {
        if (row.origin_task >= current_task) {
          throw ValidationError("exemplar episode row from task " +
                                std::to_string(row.origin_task) + " at task " +
                                std::to_string(current_task));
        }
      }
    }
  }
  // Rows drawn from full splits never repeat. Buffer rows may, when a class
  // holds fewer exemplars than the episode needs.
  auto from_split = [&](const EpisodeRow& row) {
    if (episode.kind == EpisodeKind::standard) return true;
    return episode.kind == EpisodeKind::cross_task && current_task > 0 &&
           row.origin_task == current_task;
  };
  std::set<SampleRef> used;
  for (const auto* rows : {&episode.support, &episode.query}) {
    for (const auto& row : *rows) {
      if (from_split(row) && !used.insert(row.source).second) {
        throw ValidationError("sample (class " + std::to_string(row.source.class_id) + ", row " +
                              std::to_string(row.source.row) + ") appears twice in one episode");
      }
    }
  }
}

}  // namespace erd::sampler
