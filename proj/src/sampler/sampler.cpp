#include "erd/sampler/sampler.hpp"

#include <algorithm>
#include <cmath>

#include "erd/errors.hpp"

namespace erd::sampler {

std::string_view to_string(PrevStrategy strategy) {
  switch (strategy) {
    case PrevStrategy::fixed_count: return "fixed_count";
    case PrevStrategy::binomial: return "binomial";
    case PrevStrategy::rand_pool: return "rand_pool";
  }
  return "unknown";
}

PrevStrategy parse_prev_strategy(std::string_view text) {
  if (text == "fixed_count") return PrevStrategy::fixed_count;
  if (text == "binomial") return PrevStrategy::binomial;
  if (text == "rand_pool") return PrevStrategy::rand_pool;
  throw ValidationError("unknown sampler strategy '" + std::string(text) + "'");
}

void SamplerConfig::validate() const {
  if (!(p_prev >= 0.0 && p_prev <= 1.0)) throw ValidationError("p_prev must lie in [0, 1]");
}

std::vector<ClassSource> task_sources(const data::Task& task, data::Split split) {
  return pool_sources(task.classes, task.number, split);
}

std::vector<ClassSource> pool_sources(std::span<const data::ClassData> classes,
                                      std::size_t origin_task, data::Split split) {
  std::vector<ClassSource> out;
  out.reserve(classes.size());
  for (const auto& c : classes) {
    ClassSource src;
    src.class_id = c.id;
    src.origin_task = origin_task;
    src.split = split;
    src.rows = split == data::Split::train ? &c.train : &c.test;
    out.push_back(src);
  }
  return out;
}

std::vector<ClassSource> buffer_sources(const memory::ExemplarBuffer& buffer) {
  std::vector<ClassSource> out;
  for (const auto& [id, set] : buffer.classes()) {
    if (set.rows.rows == 0) continue;
    ClassSource src;
    src.class_id = id;
    src.origin_task = set.origin_task;
    src.split = data::Split::train;
    src.rows = &set.rows;
    src.source_rows = &set.source_rows;
    src.allow_replacement = true;
    out.push_back(src);
  }
  return out;
}

namespace {

struct RowDraw {
  std::vector<std::size_t> support;
  std::vector<std::size_t> query;
};

// Buffer classes smaller than K + K^Q: support without replacement (with
// replacement only if even K rows are missing), query with replacement from
// the rows not used as support, or from all rows if none are left.
RowDraw draw_rows(const ClassSource& src, const EpisodeSpec& spec, Rng& rng) {
  const std::size_t count = src.size();
  const std::size_t need = spec.rows_per_class();
  RowDraw draw;
  if (count >= need) {
    auto picked = rng.sample_without_replacement(count, need);
    draw.support.assign(picked.begin(), picked.begin() + spec.k_shot);
    draw.query.assign(picked.begin() + spec.k_shot, picked.end());
    return draw;
  }
  if (!src.allow_replacement || count == 0) {
    throw SamplingError("class " + std::to_string(src.class_id) + " has " +
                        std::to_string(count) + " rows, episode needs " + std::to_string(need));
  }
  if (count >= spec.k_shot) {
    draw.support = rng.sample_without_replacement(count, spec.k_shot);
  } else {
    for (std::size_t i = 0; i < spec.k_shot; ++i) draw.support.push_back(rng.below(count));
  }
  std::vector<std::size_t> remainder;
  for (std::size_t r = 0; r < count; ++r) {
    if (std::find(draw.support.begin(), draw.support.end(), r) == draw.support.end()) {
      remainder.push_back(r);
    }
  }
  if (remainder.empty()) {
    remainder.resize(count);
    for (std::size_t r = 0; r < count; ++r) remainder[r] = r;
  }
  for (std::size_t i = 0; i < spec.k_query; ++i) {
    draw.query.push_back(remainder[rng.below(remainder.size())]);
  }
  return draw;
}

Episode assemble(EpisodeKind kind, const EpisodeSpec& spec,
                 const std::vector<const ClassSource*>& classes, Rng& rng) {
  const std::size_t dim = classes.front()->rows->cols;
  Episode episode;
  episode.kind = kind;
  episode.spec = spec;
  episode.support_x = data::FeatureMatrix(spec.n_way * spec.k_shot, dim);
  episode.query_x = data::FeatureMatrix(spec.n_way * spec.k_query, dim);
  for (std::size_t label = 0; label < classes.size(); ++label) {
    const ClassSource& src = *classes[label];
    if (src.rows->cols != dim) throw SamplingError("episode classes differ in feature width");
    episode.class_ids.push_back(src.class_id);
    const RowDraw draw = draw_rows(src, spec, rng);
    auto emit = [&](std::size_t local, std::vector<EpisodeRow>& rows, data::FeatureMatrix& x) {
      EpisodeRow row;
      row.source.class_id = src.class_id;
      row.source.split = src.split;
      row.source.row = src.source_rows ? (*src.source_rows)[local] : local;
      row.label = label;
      row.origin_task = src.origin_task;
      const auto values = src.rows->row(local);
      std::copy(values.begin(), values.end(), x.row(rows.size()).begin());
      rows.push_back(row);
    };
    for (std::size_t local : draw.support) emit(local, episode.support, episode.support_x);
    for (std::size_t local : draw.query) emit(local, episode.query, episode.query_x);
  }
  return episode;
}

void pick(std::span<const ClassSource> from, std::size_t count, Rng& rng,
          std::vector<const ClassSource*>& out, const char* what) {
  if (count > from.size()) {
    throw SamplingError(std::string("need ") + std::to_string(count) + " " + what +
                        " classes, only " + std::to_string(from.size()) + " available");
  }
  for (std::size_t i : rng.sample_without_replacement(from.size(), count)) {
    out.push_back(&from[i]);
  }
}

}  // namespace

Episode sample_standard(std::span<const ClassSource> pool, const EpisodeSpec& spec, Rng& rng) {
  spec.validate();
  std::vector<const ClassSource*> classes;
  pick(pool, spec.n_way, rng, classes, "episode");
  return assemble(EpisodeKind::standard, spec, classes, rng);
}

Episode sample_standard(const data::Task& task, const EpisodeSpec& spec, Rng& rng) {
  const auto sources = task_sources(task);
  return sample_standard(sources, spec, rng);
}

Episode sample_cross_task(const data::Task& current, const memory::ExemplarBuffer& buffer,
                          const EpisodeSpec& spec, const SamplerConfig& config, Rng& rng) {
  spec.validate();
  config.validate();
  const auto now = task_sources(current);
  std::vector<ClassSource> previous;
  for (const auto& src : buffer_sources(buffer)) {
    if (src.origin_task < current.number) previous.push_back(src);
  }

  std::vector<const ClassSource*> classes;
  switch (config.strategy) {
    case PrevStrategy::fixed_count:
    case PrevStrategy::binomial: {
      std::size_t n_prev = 0;
      if (config.strategy == PrevStrategy::fixed_count) {
        n_prev = static_cast<std::size_t>(std::llround(spec.n_way * config.p_prev));
      } else {
        for (std::size_t slot = 0; slot < spec.n_way; ++slot) n_prev += rng.bernoulli(config.p_prev);
      }
      pick(previous, n_prev, rng, classes, "previous-task");
      pick(now, spec.n_way - n_prev, rng, classes, "current-task");
      break;
    }
    case PrevStrategy::rand_pool: {
      std::vector<ClassSource> seen = previous;
      seen.insert(seen.end(), now.begin(), now.end());
      std::vector<const ClassSource*> chosen;
      pick(seen, spec.n_way, rng, chosen, "seen");
      // `seen` dies at the end of this scope; remap onto the long-lived vectors.
      for (const auto* c : chosen) {
        const std::size_t index = static_cast<std::size_t>(c - seen.data());
        classes.push_back(index < previous.size() ? &previous[index]
                                                  : &now[index - previous.size()]);
      }
      break;
    }
  }
  return assemble(EpisodeKind::cross_task, spec, classes, rng);
}

Episode sample_exemplar(const memory::ExemplarBuffer& buffer, const EpisodeSpec& spec, Rng& rng) {
  spec.validate();
  const auto sources = buffer_sources(buffer);
  if (sources.empty()) throw SamplingError("exemplar buffer is empty");
  std::vector<const ClassSource*> classes;
  pick(sources, spec.n_way, rng, classes, "buffer");
  return assemble(EpisodeKind::exemplar, spec, classes, rng);
}

}  // namespace erd::sampler
