#include "erd/cli/config.hpp"

#include <cstdlib>
#include <fstream>

#include "erd/errors.hpp"

namespace erd::cli {

using nlohmann::json;

namespace {

json policy_json(const MemorySection& m) {
  json j;
  j["policy"] = m.policy.kind == memory::BufferPolicy::Kind::per_class ? "per_class" : "bounded";
  j["n_ex"] = m.policy.n_ex;
  j["bf"] = m.policy.bf;
  j["selection"] = m.selection ? std::string(memory::to_string(*m.selection)) : "auto";
  return j;
}

// `schema` is the serialized default config: its shape and value types are
// the schema.
void check_against(const json& value, const json& schema, const std::string& where) {
  auto fail = [&](const std::string& what) {
    throw ValidationError("config: " + (where.empty() ? std::string("<root>") : where) + ": " +
                          what);
  };
  if (schema.is_object()) {
    if (!value.is_object()) fail("expected an object");
    for (const auto& [key, item] : value.items()) {
      const std::string sub = where.empty() ? key : where + "." + key;
      if (!schema.contains(key)) {
        throw ValidationError("config: unknown key '" + sub + "'");
      }
      check_against(item, schema.at(key), sub);
    }
  } else if (schema.is_array()) {
    if (!value.is_array()) fail("expected an array");
    for (std::size_t i = 0; i < value.size(); ++i) {
      check_against(value[i], schema.empty() ? json(0u) : schema[0],
                    where + "[" + std::to_string(i) + "]");
    }
  } else if (schema.is_number_unsigned()) {
    const bool ok = value.is_number_unsigned() ||
                    (value.is_number_integer() && value.get<std::int64_t>() >= 0);
    if (!ok) fail("expected a non-negative integer");
  } else if (schema.is_number()) {
    if (!value.is_number()) fail("expected a number");
  } else if (schema.is_boolean()) {
    if (!value.is_boolean()) fail("expected true or false");
  } else if (schema.is_string()) {
    if (!value.is_string()) fail("expected a string");
  }
}

template <typename T>
T get(const json& j, const char* a, const char* b) {
  return j.at(a).at(b).get<T>();
}

template <typename Parse>
auto parse_field(const std::string& text, const char* key, Parse parse) {
  try {
    return parse(text);
  } catch (const Error& e) {
    throw ValidationError(std::string("config: ") + key + ": " + e.what());
  }
}

}  // namespace

void ExperimentConfig::validate() const {
  if (dataset_path.empty()) synthetic.validate();
  if (stream.n_tasks == 0 || stream.classes_per_task == 0) {
    throw ValidationError("config: stream needs at least one task and one class per task");
  }
  if (model.hidden_widths.empty()) throw ValidationError("config: model.hidden_widths is empty");
  for (auto w : model.hidden_widths) {
    if (w == 0) throw ValidationError("config: model.hidden_widths has a zero width");
  }
  for (auto w : model.relation_hidden) {
    if (w == 0) throw ValidationError("config: model.relation_hidden has a zero width");
  }
  train.validate();
  memory.policy.validate();
  if (eval.enabled && (eval.n_ep == 0 || eval.n_ep_per_task == 0)) {
    throw ValidationError("config: eval episode counts must be positive");
  }
  if (output_dir.empty()) throw ValidationError("config: output.dir is empty");
}

json to_json(const ExperimentConfig& c) {
  json j;
  j["version"] = 1u;
  const auto& s = c.synthetic;
  j["data"] = {{"path", c.dataset_path},
               {"synthetic",
                {{"n_classes", s.n_classes},
                 {"dim", s.dim},
                 {"per_class_train", s.per_class_train},
                 {"per_class_test", s.per_class_test},
                 {"mean_radius", s.mean_radius},
                 {"noise_sigma", s.noise_sigma},
                 {"seed", s.seed}}}};
  j["stream"] = {{"n_tasks", c.stream.n_tasks},
                 {"classes_per_task", c.stream.classes_per_task},
                 {"n_meta_test", c.stream.n_meta_test},
                 {"seed", c.stream.seed}};
  j["model"] = {{"learner_type", std::string(learners::to_string(c.model.learner))},
                {"hidden_widths", c.model.hidden_widths},
                {"relation_hidden", c.model.relation_hidden}};
  const auto& t = c.train;
  j["train"] = {{"method", std::string(trainer::to_string(t.method))},
                {"epochs_per_task", t.epochs_per_task},
                {"episodes_per_epoch", t.episodes_per_epoch},
                {"learning_rate", t.learning_rate},
                {"seed", t.seed},
                {"reset_optimizer_per_task", t.reset_optimizer_per_task},
                {"m_distill_head", std::string(distill::to_string(t.m_distill_head))}};
  j["loss"] = {{"lambda_m", t.weights.lambda_m}, {"lambda_e", t.weights.lambda_e}};
  j["sampler"] = {{"p_prev", t.sampler.p_prev},
                  {"strategy", std::string(sampler::to_string(t.sampler.strategy))}};
  j["episode"] = {{"n_way", t.episode_spec.n_way},
                  {"k_shot", t.episode_spec.k_shot},
                  {"k_query", t.episode_spec.k_query}};
  j["memory"] = policy_json(c.memory);
  j["eval"] = {{"enabled", c.eval.enabled},
               {"n_ep", c.eval.n_ep},
               {"n_ep_per_task", c.eval.n_ep_per_task},
               {"seed", c.eval.seed}};
  j["output"] = {{"dir", c.output_dir}};
  return j;
}

ExperimentConfig from_json(const json& user) {
  const json schema = to_json(ExperimentConfig{});
  check_against(user, schema, "");
  if (user.contains("version") && user["version"].get<unsigned>() != 1) {
    throw ValidationError("config: unsupported version " + user["version"].dump());
  }
  json j = schema;
  j.merge_patch(user);

  ExperimentConfig c;
  c.dataset_path = get<std::string>(j, "data", "path");
  const json& s = j["data"]["synthetic"];
  c.synthetic.n_classes = s.at("n_classes").get<std::size_t>();
  c.synthetic.dim = s.at("dim").get<std::size_t>();
  c.synthetic.per_class_train = s.at("per_class_train").get<std::size_t>();
  c.synthetic.per_class_test = s.at("per_class_test").get<std::size_t>();
  c.synthetic.mean_radius = s.at("mean_radius").get<double>();
  c.synthetic.noise_sigma = s.at("noise_sigma").get<double>();
  c.synthetic.seed = s.at("seed").get<std::uint64_t>();

  c.stream.n_tasks = get<std::size_t>(j, "stream", "n_tasks");
  c.stream.classes_per_task = get<std::size_t>(j, "stream", "classes_per_task");
  c.stream.n_meta_test = get<std::size_t>(j, "stream", "n_meta_test");
  c.stream.seed = get<std::uint64_t>(j, "stream", "seed");

  c.model.learner = parse_field(get<std::string>(j, "model", "learner_type"),
                                "model.learner_type", learners::parse_learner_type);
  c.model.hidden_widths = get<std::vector<std::size_t>>(j, "model", "hidden_widths");
  c.model.relation_hidden = get<std::vector<std::size_t>>(j, "model", "relation_hidden");

  auto& t = c.train;
  t.method = parse_field(get<std::string>(j, "train", "method"), "train.method",
                         trainer::parse_method);
  t.epochs_per_task = get<std::size_t>(j, "train", "epochs_per_task");
  t.episodes_per_epoch = get<std::size_t>(j, "train", "episodes_per_epoch");
  t.learning_rate = get<double>(j, "train", "learning_rate");
  t.seed = get<std::uint64_t>(j, "train", "seed");
  t.reset_optimizer_per_task = get<bool>(j, "train", "reset_optimizer_per_task");
  t.m_distill_head = parse_field(get<std::string>(j, "train", "m_distill_head"),
                                 "train.m_distill_head", distill::parse_distill_head);
  t.weights.lambda_m = get<double>(j, "loss", "lambda_m");
  t.weights.lambda_e = get<double>(j, "loss", "lambda_e");
  t.sampler.p_prev = get<double>(j, "sampler", "p_prev");
  t.sampler.strategy = parse_field(get<std::string>(j, "sampler", "strategy"), "sampler.strategy",
                                   sampler::parse_prev_strategy);
  t.episode_spec.n_way = get<std::size_t>(j, "episode", "n_way");
  t.episode_spec.k_shot = get<std::size_t>(j, "episode", "k_shot");
  t.episode_spec.k_query = get<std::size_t>(j, "episode", "k_query");

  const std::string policy = get<std::string>(j, "memory", "policy");
  const auto n_ex = get<std::size_t>(j, "memory", "n_ex");
  const auto bf = get<std::size_t>(j, "memory", "bf");
  if (policy == "per_class") {
    c.memory.policy = memory::BufferPolicy::per_class(n_ex);
  } else if (policy == "bounded") {
    c.memory.policy = memory::BufferPolicy::bounded(bf);
  } else {
    throw ValidationError("config: memory.policy must be per_class or bounded, got '" + policy +
                          "'");
  }
  // Keep the inactive budget so a resolved config round-trips unchanged.
  c.memory.policy.n_ex = n_ex;
  c.memory.policy.bf = bf;
  const std::string selection = get<std::string>(j, "memory", "selection");
  if (selection != "auto") {
    c.memory.selection = parse_field(selection, "memory.selection", memory::parse_selection);
  }

  c.eval.enabled = get<bool>(j, "eval", "enabled");
  c.eval.n_ep = get<std::size_t>(j, "eval", "n_ep");
  c.eval.n_ep_per_task = get<std::size_t>(j, "eval", "n_ep_per_task");
  c.eval.seed = get<std::uint64_t>(j, "eval", "seed");
  c.output_dir = get<std::string>(j, "output", "dir");

  c.validate();
  return c;
}

void apply_override(json& j, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    throw ValidationError("--set expects key=value, got '" + std::string(assignment) + "'");
  }
  const std::string key(assignment.substr(0, eq));
  const std::string text(assignment.substr(eq + 1));

  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;

  json* node = &j;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? dot : dot - start);
    if (part.empty()) throw ValidationError("--set: malformed key '" + key + "'");
    if (!node->is_object()) throw ValidationError("--set: '" + key + "' is not an object path");
    if (dot == std::string::npos) {
      (*node)[part] = std::move(value);
      return;
    }
    node = &(*node)[part];
    if (node->is_null()) *node = json::object();
    start = dot + 1;
  }
}

ExperimentConfig load_config(const std::optional<std::filesystem::path>& path,
                             const std::vector<std::string>& overrides) {
  json j = json::object();
  if (path) {
    std::ifstream in(*path);
    if (!in) throw IoError("cannot read config " + path->string());
    try {
      j = json::parse(in);
    } catch (const json::parse_error& e) {
      throw FormatError("config " + path->string() + ": " + e.what());
    }
  }
  for (const auto& o : overrides) apply_override(j, o);
  if (const char* env = std::getenv("ERD_SEED"); env && *env) {
    char* end = nullptr;
    const unsigned long long seed = std::strtoull(env, &end, 10);
    if (*end != '\0' || env[0] == '-') {
      throw ValidationError(std::string("ERD_SEED is not an unsigned integer: ") + env);
    }
    j["train"]["seed"] = static_cast<std::uint64_t>(seed);
  }
  return from_json(j);
}

ExperimentConfig materialize(ExperimentConfig config) {
  if (!config.memory.selection) {
    config.memory.selection = config.model.learner == learners::LearnerType::proto
                                  ? memory::Selection::ntc
                                  : memory::Selection::random;
  }
  return config;
}

trainer::RunSetup make_run_setup(const ExperimentConfig& config, std::size_t input_dim) {
  const ExperimentConfig c = materialize(config);
  trainer::RunSetup setup;
  setup.train = c.train;
  setup.model.type = c.model.learner;
  setup.model.embed_widths = {input_dim};
  setup.model.embed_widths.insert(setup.model.embed_widths.end(), c.model.hidden_widths.begin(),
                                  c.model.hidden_widths.end());
  setup.model.relation_hidden = c.model.relation_hidden;
  const auto& p = c.memory.policy;
  setup.memory.policy = p.kind == memory::BufferPolicy::Kind::per_class
                            ? memory::BufferPolicy::per_class(p.n_ex)
                            : memory::BufferPolicy::bounded(p.bf);
  setup.memory.selection = *c.memory.selection;
  setup.eval = c.eval;
  return setup;
}

}  // namespace erd::cli
