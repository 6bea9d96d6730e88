#include "erd/memory/exemplar_buffer.hpp"

#include <algorithm>
#include <fstream>
#include "json.hpp"
#include <numeric>
#include <set>

#include "erd/autodiff/tape.hpp"
#include "erd/errors.hpp"
#include "erd/learners/networks.hpp"

namespace erd::memory {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::string_view to_string(Selection selection) {
  return selection == Selection::ntc ? "ntc" : "random";
}

Selection parse_selection(std::string_view text) {
  if (text == "ntc") return Selection::ntc;
  if (text == "random") return Selection::random;
  throw ValidationError("selection must be 'ntc' or 'random', got '" + std::string(text) + "'");
}

void BufferPolicy::validate() const {
  if (kind == Kind::per_class && n_ex < 1) throw ValidationError("n_ex must be >= 1");
  if (kind == Kind::bounded && bf < 1) throw ValidationError("bf must be >= 1");
}

std::vector<std::size_t> ntc_order(const data::FeatureMatrix& embeddings, std::size_t n) {
  const std::size_t count = embeddings.rows;
  const std::size_t width = embeddings.cols;
  std::vector<double> mean(width, 0.0);
  for (std::size_t r = 0; r < count; ++r) {
    for (std::size_t k = 0; k < width; ++k) mean[k] += embeddings.row(r)[k];
  }
  for (auto& m : mean) m /= static_cast<double>(count);
  std::vector<double> distance(count, 0.0);
  for (std::size_t r = 0; r < count; ++r) {
    for (std::size_t k = 0; k < width; ++k) {
      const double d = embeddings.row(r)[k] - mean[k];
      distance[r] += d * d;
    }
  }
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return distance[a] < distance[b]; });
  order.resize(std::min(n, count));
  return order;
}

std::vector<std::size_t> select_exemplars(const data::FeatureMatrix& train_rows,
                                          const learners::EmbeddingNet<float>& net, std::size_t n,
                                          Selection selection, Rng& rng) {
  if (train_rows.rows == 0) throw ValidationError("cannot select exemplars from an empty class");
  n = std::min(n, train_rows.rows);
  if (selection == Selection::random) return rng.sample_without_replacement(train_rows.rows, n);

  ad::NoGradScope<float> no_grad;
  const auto embedded = net.forward(learners::to_tensor<float>(train_rows));
  data::FeatureMatrix embeddings(embedded.dim(0), embedded.dim(1),
                                 {embedded.data().begin(), embedded.data().end()});
  return ntc_order(embeddings, n);
}

ExemplarBuffer::ExemplarBuffer(BufferPolicy policy, Selection selection)
    : policy_(policy), selection_(selection) {
  policy_.validate();
}

void ExemplarBuffer::commit_task(const data::Task& task, const learners::EmbeddingNet<float>& net,
                                 Rng& rng) {
  std::set<int> incoming;
  for (const auto& c : task.classes) {
    if (store_.contains(c.id) || !incoming.insert(c.id).second) {
      throw ValidationError("class " + std::to_string(c.id) + " is already in the buffer");
    }
  }
  std::size_t take = policy_.n_ex;
  if (policy_.kind == BufferPolicy::Kind::bounded) {
    const std::size_t total = store_.size() + task.classes.size();
    take = policy_.bf / total + 1;  // quota, plus a possible remainder slot
  }
  for (const auto& c : task.classes) {
    ExemplarSet set;
    set.class_id = c.id;
    set.origin_task = task.number;
    set.source_rows = select_exemplars(c.train, net, take, selection_, rng);
    set.rows = data::FeatureMatrix(set.source_rows.size(), c.train.cols);
    for (std::size_t i = 0; i < set.source_rows.size(); ++i) {
      const auto src = c.train.row(set.source_rows[i]);
      std::copy(src.begin(), src.end(), set.rows.row(i).begin());
    }
    store_.emplace(c.id, std::move(set));
  }
  if (policy_.kind == BufferPolicy::Kind::bounded) rebalance();
  ++commits_;
}

void ExemplarBuffer::rebalance() {
  const std::size_t n = store_.size();
  if (n == 0) return;
  const std::size_t quota = policy_.bf / n;
  std::size_t extra = policy_.bf - quota * n;
  // std::map iterates class ids in ascending order.
  for (auto& [id, set] : store_) {
    std::size_t keep = quota;
    if (extra > 0) {
      ++keep;
      --extra;
    }
    if (set.source_rows.size() > keep) {
      set.source_rows.resize(keep);
      set.rows.values.resize(keep * set.rows.cols);
      set.rows.rows = keep;
    }
  }
}

void ExemplarBuffer::restore(ExemplarSet set) {
  if (store_.contains(set.class_id)) {
    throw ValidationError("class " + std::to_string(set.class_id) + " is already in the buffer");
  }
  const int id = set.class_id;
  store_.emplace(id, std::move(set));
}

BufferStats buffer_stats(const ExemplarBuffer& buffer) {
  BufferStats stats;
  for (const auto& [id, set] : buffer.classes()) {
    ++stats.n_classes;
    stats.total_rows += set.rows.rows;
    stats.per_class_counts[id] = set.rows.rows;
  }
  return stats;
}

void save_buffer(const fs::path& dir, const ExemplarBuffer& buffer) {
  fs::create_directories(dir);
  json manifest;
  manifest["version"] = 1;
  const auto& policy = buffer.policy();
  if (policy.kind == BufferPolicy::Kind::per_class) {
    manifest["policy"] = {{"type", "per_class"}, {"n_ex", policy.n_ex}};
  } else {
    manifest["policy"] = {{"type", "bounded"}, {"bf", policy.bf}};
  }
  manifest["selection"] = std::string(to_string(buffer.selection()));
  manifest["commits"] = buffer.commits();
  manifest["classes"] = json::array();
  for (const auto& [id, set] : buffer.classes()) {
    const std::string file = "exemplars_" + std::to_string(id) + ".emlt";
    data::write_tensor_file(dir / file, set.rows);
    manifest["classes"].push_back({{"id", id},
                                   {"origin_task", set.origin_task},
                                   {"file", file},
                                   {"source_rows", set.source_rows}});
  }
  std::ofstream out(dir / "buffer.json", std::ios::trunc);
  if (!out) throw IoError("cannot write " + (dir / "buffer.json").string());
  out << manifest.dump(2) << '\n';
}

ExemplarBuffer load_buffer(const fs::path& dir) {
  std::ifstream in(dir / "buffer.json");
  if (!in) throw IoError("missing buffer.json in " + dir.string());
  try {
    const json manifest = json::parse(in);
    if (manifest.at("version").get<int>() != 1) throw FormatError("unsupported buffer version");
    const auto& p = manifest.at("policy");
    const auto type = p.at("type").get<std::string>();
    BufferPolicy policy;
    if (type == "per_class") {
      policy = BufferPolicy::per_class(p.at("n_ex").get<std::size_t>());
    } else if (type == "bounded") {
      policy = BufferPolicy::bounded(p.at("bf").get<std::size_t>());
    } else {
      throw FormatError("unknown buffer policy '" + type + "'");
    }
    ExemplarBuffer buffer(policy, parse_selection(manifest.at("selection").get<std::string>()));
    for (const auto& entry : manifest.at("classes")) {
      ExemplarSet set;
      set.class_id = entry.at("id").get<int>();
      set.origin_task = entry.at("origin_task").get<std::size_t>();
      set.source_rows = entry.at("source_rows").get<std::vector<std::size_t>>();
      set.rows = data::read_tensor_file(dir / entry.at("file").get<std::string>());
      if (set.rows.rows != set.source_rows.size()) {
        throw FormatError("exemplar rows and source_rows disagree for class " +
                          std::to_string(set.class_id));
      }
      buffer.restore(std::move(set));
    }
    buffer.commits_ = manifest.at("commits").get<std::size_t>();
    return buffer;
  } catch (const json::exception& e) {
    throw FormatError("malformed buffer.json: " + std::string(e.what()));
  }
}

}  // namespace erd::memory
