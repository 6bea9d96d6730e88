#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "erd/data/synthetic.hpp"
#include "erd/trainer/trainer.hpp"

namespace erd::cli {

struct StreamSpec {
  std::size_t n_tasks = 8;
  std::size_t classes_per_task = 5;
  std::size_t n_meta_test = 20;
  std::uint64_t seed = 0;
};

struct ModelSection {
  learners::LearnerType learner = learners::LearnerType::proto;
  /// Widths after the input layer; the input width comes from the data.
  std::vector<std::size_t> hidden_widths{64, 64, 32};
  std::vector<std::size_t> relation_hidden{32};
};

struct MemorySection {
  /// Both budgets are kept; `kind` picks the active one.
  memory::BufferPolicy policy{memory::BufferPolicy::Kind::per_class, 20, 1000};
  /// Unset means ntc for proto and random for relation.
  std::optional<memory::Selection> selection;
};

/// Everything a run depends on. Serialized as nested JSON:
///   data{path, synthetic{...}}, stream, model, train, loss, sampler,
///   episode, memory, eval, output{dir}
struct ExperimentConfig {
  std::string dataset_path;  // empty: generate from `synthetic`
  data::SyntheticSpec synthetic{.noise_sigma = 0.55};
  StreamSpec stream;
  ModelSection model;
  trainer::TrainConfig train;
  MemorySection memory;
  trainer::EvalSettings eval;
  std::string output_dir = "runs/erd";

  void validate() const;
};

nlohmann::json to_json(const ExperimentConfig& config);

/// Strict: every key must be known and every value must have the type of
/// the default. Missing keys keep their defaults. Throws ValidationError.
ExperimentConfig from_json(const nlohmann::json& j);

/// Applies "a.b.c=value". The value is parsed as JSON when possible and
/// taken as a plain string otherwise.
void apply_override(nlohmann::json& j, std::string_view assignment);

/// Reads `path` (if given), applies overrides, then ERD_SEED (train.seed).
ExperimentConfig load_config(const std::optional<std::filesystem::path>& path,
                             const std::vector<std::string>& overrides);

/// Fills in choices left to the learner type (exemplar selection).
ExperimentConfig materialize(ExperimentConfig config);

trainer::RunSetup make_run_setup(const ExperimentConfig& config, std::size_t input_dim);

}  // namespace erd::cli
