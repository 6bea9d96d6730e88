#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string_view>
#include <vector>

#include "erd/data/task_stream.hpp"
#include "erd/distill/distill.hpp"
#include "erd/eval/metrics.hpp"
#include "erd/learners/networks.hpp"
#include "erd/memory/exemplar_buffer.hpp"
#include "erd/sampler/sampler.hpp"
#include "erd/trainer/adam.hpp"

namespace erd::trainer {

/// erd: cross-task + exemplar sub-episodes with both distillation terms.
/// ft: standard episodes from the current task, meta loss only.
/// joint: standard episodes over the union of all tasks (upper bound).
enum class Method { erd, ft, joint };

std::string_view to_string(Method method);
Method parse_method(std::string_view text);

struct TrainConfig {
  Method method = Method::erd;
  std::size_t epochs_per_task = 20;
  std::size_t episodes_per_epoch = 50;
  double learning_rate = 1e-3;
  distill::LossWeights weights;
  sampler::SamplerConfig sampler;
  sampler::EpisodeSpec episode_spec;
  std::uint64_t seed = 0;
  bool reset_optimizer_per_task = true;
  distill::DistillHead m_distill_head = distill::DistillHead::old_head;

  void validate() const;
};

struct EvalSettings {
  bool enabled = true;
  std::size_t n_ep = 1000;           // meta-test episodes
  std::size_t n_ep_per_task = 1000;  // episodes per seen task
  std::uint64_t seed = 0;
  /// Episode shape used for evaluation (defaults to the training shape
  /// when unset).
  std::optional<sampler::EpisodeSpec> episode_spec;
};

struct MemoryConfig {
  memory::BufferPolicy policy = memory::BufferPolicy::per_class(20);
  memory::Selection selection = memory::Selection::ntc;
};

/// Everything a training run needs besides the data.
struct RunSetup {
  TrainConfig train;
  learners::ModelShape model;
  MemoryConfig memory;
  EvalSettings eval;
};

struct SessionResult {
  std::size_t task = 0;
  learners::Model<float> model;
  std::vector<eval::MetricRecord> metrics;
  double seconds = 0.0;
  std::size_t optimizer_steps = 0;
  std::size_t episodes = 0;  // sub-episodes sampled, all kinds
};

struct StepInfo {
  std::size_t task = 0;
  std::size_t epoch = 0;
  std::size_t step = 0;
  double total = 0.0;
  double meta = 0.0;
  double dist_m = 0.0;
  double dist_e = 0.0;
};

/// Optional hooks, called on the training thread.
struct TrainingObserver {
  std::function<void(std::size_t task, const distill::TeacherSnapshot<float>&)> on_teacher;
  std::function<void(const StepInfo&, const learners::Model<float>& student,
                     const distill::TeacherSnapshot<float>* teacher)>
      on_step;
  std::function<void(const SessionResult&, const memory::ExemplarBuffer&)> on_session;
};

/// Sequential training over the task stream. For erd at task t >= 2 the
/// teacher is snapshotted first; each step samples one cross-task and one
/// exemplar sub-episode, sums meta + lambda_m * dist_m + lambda_e * dist_e
/// (each term divided by its query count) and takes one Adam step. At task 1
/// erd trains exactly like ft. After each task the buffer is updated (erd)
/// and the model is evaluated.
std::vector<SessionResult> run_incremental(const data::TaskStream& stream, const RunSetup& setup,
                                           const TrainingObserver& observer = {});

/// One training phase on the union of every task, then evaluation.
/// Runs as many steps as the incremental schedule would in total.
SessionResult run_joint(const data::TaskStream& stream, const RunSetup& setup,
                        const TrainingObserver& observer = {});

/// run_joint for method joint, run_incremental otherwise.
std::vector<SessionResult> run(const data::TaskStream& stream, const RunSetup& setup,
                               const TrainingObserver& observer = {});

}  // namespace erd::trainer
