#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

#include "erd/data/dataset.hpp"

namespace erd::sampler {

/// N-way, K-shot problem with K^Q query rows per class.
struct EpisodeSpec {
  std::size_t n_way = 5;
  std::size_t k_shot = 1;
  std::size_t k_query = 15;

  void validate() const;
  std::size_t rows_per_class() const { return k_shot + k_query; }
};

enum class EpisodeKind { standard, cross_task, exemplar };

std::string_view to_string(EpisodeKind kind);

/// Where a row came from: a class, a split and a row of that split.
struct SampleRef {
  int class_id = 0;
  data::Split split = data::Split::train;
  std::size_t row = 0;

  bool operator==(const SampleRef&) const = default;
  auto operator<=>(const SampleRef&) const = default;
};

struct EpisodeRow {
  SampleRef source;
  std::size_t label = 0;        // episode class index in [0, n_way)
  std::size_t origin_task = 0;  // task number that introduced the class

  bool operator==(const EpisodeRow&) const = default;
};

/// Support and query sets. Rows are grouped by episode class: class k owns
/// support rows [k*K, (k+1)*K) and query rows [k*K^Q, (k+1)*K^Q).
struct Episode {
  EpisodeKind kind = EpisodeKind::standard;
  EpisodeSpec spec;
  std::vector<int> class_ids;  // episode class index -> dataset class id
  std::vector<EpisodeRow> support;
  std::vector<EpisodeRow> query;
  data::FeatureMatrix support_x;
  data::FeatureMatrix query_x;

  std::vector<std::size_t> support_labels() const;
  std::vector<std::size_t> query_labels() const;
};

/// Throws ValidationError if the structural invariants do not hold: N
/// distinct classes, K support and K^Q query rows each, grouped by class, and
/// no sample used twice unless it comes from the buffer. With current_task
/// set, exemplar rows must also come from earlier tasks.
void validate_episode(const Episode& episode, std::size_t current_task = 0);

}  // namespace erd::sampler
