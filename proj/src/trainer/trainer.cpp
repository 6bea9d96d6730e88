#include "erd/trainer/trainer.hpp"

#include <chrono>
#include <cmath>
#include <optional>

#include "erd/autodiff/ops.hpp"
#include "erd/errors.hpp"
#include "erd/eval/evaluator.hpp"
#include "erd/learners/episodic.hpp"
#include "erd/rng.hpp"

namespace erd::trainer {

namespace {

constexpr std::uint64_t kModelStream = 1;
constexpr std::uint64_t kTrainStream = 100;
constexpr std::uint64_t kMemoryStream = 200;

using Clock = std::chrono::steady_clock;

std::string where(std::size_t task, std::size_t epoch, std::size_t step) {
  return "task " + std::to_string(task) + ", epoch " + std::to_string(epoch) + ", step " +
         std::to_string(step);
}

double value_of(const ad::Tensor& t) { return t.defined() ? static_cast<double>(t.item()) : 0.0; }

ad::Tensor per_query(const ad::Tensor& loss, const sampler::Episode& episode) {
  return ad::scale(loss, 1.0 / static_cast<double>(episode.query.size()));
}

class StepRunner {
 public:
  StepRunner(learners::Model<float>& model, const TrainConfig& config)
      : model_(model), params_(model.parameters()) {
    hyper_.learning_rate = config.learning_rate;
  }

  void reset() { state_.reset(); }

  // Runs backward on `total` (already recorded on `tape`) and applies Adam.
  void apply(ad::Tape<float>& tape, const ad::Tensor& total) {
    tape.backward(total);
    adam_step(params_, state_, hyper_);
    for (auto& p : params_) p.zero_grad();
    ++steps_;
  }

  std::size_t steps() const { return steps_; }

 private:
  learners::Model<float>& model_;
  std::vector<ad::Tensor> params_;
  AdamState state_;
  AdamHyper hyper_;
  std::size_t steps_ = 0;
};

std::vector<eval::MetricRecord> evaluate_session(const learners::Model<float>& model,
                                                 const data::TaskStream& stream, std::size_t t,
                                                 const RunSetup& setup) {
  if (!setup.eval.enabled) return {};
  const auto spec = setup.eval.episode_spec.value_or(setup.train.episode_spec);
  auto records =
      eval::eval_seen(model, stream, t, spec, setup.eval.n_ep_per_task, setup.eval.seed);
  if (!stream.meta_test.empty()) {
    auto meta = eval::eval_meta_test(model, stream, spec, setup.eval.n_ep, setup.eval.seed);
    meta.session = t;
    records.push_back(meta);
  }
  return records;
}

}  // namespace

std::string_view to_string(Method method) {
  switch (method) {
    case Method::erd: return "erd";
    case Method::ft: return "ft";
    case Method::joint: return "joint";
  }
  return "unknown";
}

Method parse_method(std::string_view text) {
  if (text == "erd") return Method::erd;
  if (text == "ft") return Method::ft;
  if (text == "joint") return Method::joint;
  throw ValidationError("unknown training method '" + std::string(text) + "'");
}

void TrainConfig::validate() const {
  if (epochs_per_task < 1) throw ValidationError("epochs_per_task must be >= 1");
  if (episodes_per_epoch < 1) throw ValidationError("episodes_per_epoch must be >= 1");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw ValidationError("learning_rate must be > 0");
  }
  weights.validate();
  sampler.validate();
  episode_spec.validate();
}

std::vector<SessionResult> run_incremental(const data::TaskStream& stream, const RunSetup& setup,
                                           const TrainingObserver& observer) {
  const auto& cfg = setup.train;
  cfg.validate();
  data::validate_stream(stream);
  if (cfg.method == Method::joint) throw ValidationError("use run_joint for joint training");

  Rng init_rng = Rng(cfg.seed).split(kModelStream);
  auto model = learners::Model<float>::create(setup.model, init_rng);
  if (model.embed.input_dim() != stream.tasks.front().classes.front().dim()) {
    throw ValidationError("model input width " + std::to_string(model.embed.input_dim()) +
                          " does not match data width " +
                          std::to_string(stream.tasks.front().classes.front().dim()));
  }
  StepRunner runner(model, cfg);
  memory::ExemplarBuffer buffer(setup.memory.policy, setup.memory.selection);
  std::optional<distill::TeacherSnapshot<float>> teacher;
  const auto& spec = cfg.episode_spec;

  std::vector<SessionResult> sessions;
  for (const auto& task : stream.tasks) {
    const auto started = Clock::now();
    const std::size_t t = task.number;
    const bool replay = cfg.method == Method::erd && t >= 2;
    if (replay) {
      teacher.emplace(model);
      if (observer.on_teacher) observer.on_teacher(t, *teacher);
    }
    if (cfg.reset_optimizer_per_task) runner.reset();

    Rng rng = Rng(cfg.seed).split(kTrainStream + t);
    const std::size_t steps_before = runner.steps();
    std::size_t episodes = 0;
    for (std::size_t epoch = 0; epoch < cfg.epochs_per_task; ++epoch) {
      for (std::size_t step = 0; step < cfg.episodes_per_epoch; ++step) {
        StepInfo info{t, epoch, step};
        ad::Tape<float> tape;
        ad::Tensor total;
        try {
          ad::TapeScope<float> scope(tape);
          if (!replay) {
            const auto episode = sampler::sample_standard(task, spec, rng);
            ++episodes;
            auto meta = per_query(learners::meta_loss(model, episode), episode);
            total = distill::combined_loss(meta, {}, {}, cfg.weights);
            info.meta = value_of(meta);
          } else {
            const auto cross = sampler::sample_cross_task(task, buffer, spec, cfg.sampler, rng);
            ++episodes;
            std::optional<sampler::Episode> exemplar;
            if (sampler::buffer_sources(buffer).size() >= spec.n_way) {
              exemplar = sampler::sample_exemplar(buffer, spec, rng);
              ++episodes;
            }
            auto meta = per_query(learners::meta_loss(model, cross), cross);
            ad::Tensor dist_m;
            ad::Tensor dist_e;
            if (cfg.weights.lambda_m > 0.0) {
              dist_m = per_query(
                  distill::distill_loss(&*teacher, model, cross, cfg.m_distill_head), cross);
            }
            if (exemplar && cfg.weights.lambda_e > 0.0) {
              dist_e = per_query(
                  distill::distill_loss(&*teacher, model, *exemplar, cfg.m_distill_head),
                  *exemplar);
            }
            total = distill::combined_loss(meta, dist_m, dist_e, cfg.weights);
            info.meta = value_of(meta);
            info.dist_m = value_of(dist_m);
            info.dist_e = value_of(dist_e);
          }
        } catch (const TrainingError& e) {
          throw TrainingError(std::string(e.what()) + " at " + where(t, epoch, step));
        }
        info.total = value_of(total);
        if (!std::isfinite(info.total)) {
          throw TrainingError("non-finite loss at " + where(t, epoch, step));
        }
        runner.apply(tape, total);
        if (observer.on_step) observer.on_step(info, model, teacher ? &*teacher : nullptr);
      }
    }

    if (cfg.method == Method::erd) {
      Rng memory_rng = Rng(cfg.seed).split(kMemoryStream + t);
      buffer.commit_task(task, model.embed, memory_rng);
    }

    SessionResult result;
    result.task = t;
    result.model = model.clone();
    result.metrics = evaluate_session(model, stream, t, setup);
    result.optimizer_steps = runner.steps() - steps_before;
    result.episodes = episodes;
    result.seconds = std::chrono::duration<double>(Clock::now() - started).count();
    if (observer.on_session) observer.on_session(result, buffer);
    sessions.push_back(std::move(result));
  }
  return sessions;
}

SessionResult run_joint(const data::TaskStream& stream, const RunSetup& setup,
                        const TrainingObserver& observer) {
  const auto& cfg = setup.train;
  cfg.validate();
  data::validate_stream(stream);
  const auto started = Clock::now();

  Rng init_rng = Rng(cfg.seed).split(kModelStream);
  auto model = learners::Model<float>::create(setup.model, init_rng);
  StepRunner runner(model, cfg);

  std::vector<sampler::ClassSource> pool;
  for (const auto& task : stream.tasks) {
    const auto sources = sampler::task_sources(task);
    pool.insert(pool.end(), sources.begin(), sources.end());
  }
  const std::size_t M = stream.n_tasks();
  const std::size_t epochs = M * cfg.epochs_per_task;
  Rng rng = Rng(cfg.seed).split(kTrainStream);
  std::size_t episodes = 0;
  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    for (std::size_t step = 0; step < cfg.episodes_per_epoch; ++step) {
      ad::Tape<float> tape;
      ad::Tensor total;
      {
        ad::TapeScope<float> scope(tape);
        const auto episode = sampler::sample_standard(pool, cfg.episode_spec, rng);
        ++episodes;
        total = per_query(learners::meta_loss(model, episode), episode);
      }
      StepInfo info{M, epoch, step, value_of(total), value_of(total)};
      if (!std::isfinite(info.total)) {
        throw TrainingError("non-finite loss at " + where(M, epoch, step) + " (joint)");
      }
      runner.apply(tape, total);
      if (observer.on_step) observer.on_step(info, model, nullptr);
    }
  }

  SessionResult result;
  result.task = M;
  result.model = model.clone();
  result.metrics = evaluate_session(model, stream, M, setup);
  result.optimizer_steps = runner.steps();
  result.episodes = episodes;
  result.seconds = std::chrono::duration<double>(Clock::now() - started).count();
  if (observer.on_session) {
    const memory::ExemplarBuffer unused(setup.memory.policy, setup.memory.selection);
    observer.on_session(result, unused);
  }
  return result;
}

std::vector<SessionResult> run(const data::TaskStream& stream, const RunSetup& setup,
                               const TrainingObserver& observer) {
  if (setup.train.method == Method::joint) return {run_joint(stream, setup, observer)};
  return run_incremental(stream, setup, observer);
}

}  // namespace erd::trainer
