#pragma once

#include <filesystem>
#include <map>
#include <string_view>
#include <vector>

#include "erd/data/task_stream.hpp"
#include "erd/learners/networks.hpp"
#include "erd/rng.hpp"

namespace erd::memory {

enum class Selection { ntc, random };

std::string_view to_string(Selection selection);
Selection parse_selection(std::string_view text);

/// Growing buffer (n_ex exemplars for every stored class) or bounded buffer
/// (at most bf exemplars in total).
struct BufferPolicy {
  enum class Kind { per_class, bounded };

  Kind kind = Kind::per_class;
  std::size_t n_ex = 20;
  std::size_t bf = 1000;

  static BufferPolicy per_class(std::size_t n_ex) { return {Kind::per_class, n_ex, 0}; }
  static BufferPolicy bounded(std::size_t bf) { return {Kind::bounded, 0, bf}; }

  void validate() const;
  bool operator==(const BufferPolicy&) const = default;
};

/// Stored exemplars of one class, kept in selection order.
struct ExemplarSet {
  int class_id = 0;
  std::size_t origin_task = 0;
  std::vector<std::size_t> source_rows;  // rows of the class's train split
  data::FeatureMatrix rows;

  bool operator==(const ExemplarSet&) const = default;
};

struct BufferStats {
  std::size_t n_classes = 0;
  std::size_t total_rows = 0;
  std::map<int, std::size_t> per_class_counts;

  bool operator==(const BufferStats&) const = default;
};

/// Rows ordered by squared distance of their embedding to the mean
/// embedding, ascending, ties broken by row index; first n kept.
std::vector<std::size_t> ntc_order(const data::FeatureMatrix& embeddings, std::size_t n);

/// Picks up to n train rows of a class. NTC embeds every row with `net`
/// first; random draws uniformly without replacement.
std::vector<std::size_t> select_exemplars(const data::FeatureMatrix& train_rows,
                                          const learners::EmbeddingNet<float>& net, std::size_t n,
                                          Selection selection, Rng& rng);

class ExemplarBuffer {
 public:
  ExemplarBuffer() = default;
  ExemplarBuffer(BufferPolicy policy, Selection selection);

  /// Stores exemplars for every class of a finished task, then (bounded
  /// policy) rebalances to floor(bf / n_classes) per class, giving the
  /// remaining slots one each to the lowest class ids. Truncation keeps the
  /// prefix of each selection order.
  void commit_task(const data::Task& task, const learners::EmbeddingNet<float>& net, Rng& rng);

  const BufferPolicy& policy() const { return policy_; }
  Selection selection() const { return selection_; }
  const std::map<int, ExemplarSet>& classes() const { return store_; }
  bool contains(int class_id) const { return store_.contains(class_id); }
  const ExemplarSet& at(int class_id) const { return store_.at(class_id); }
  bool empty() const { return store_.empty(); }
  std::size_t n_classes() const { return store_.size(); }
  /// Number of commit_task calls so far.
  std::size_t commits() const { return commits_; }

  /// Inserts a class as-is (checkpoint loading).
  void restore(ExemplarSet set);

  bool operator==(const ExemplarBuffer&) const = default;

 private:
  friend ExemplarBuffer load_buffer(const std::filesystem::path& dir);

  void rebalance();

  BufferPolicy policy_;
  Selection selection_ = Selection::ntc;
  std::map<int, ExemplarSet> store_;
  std::size_t commits_ = 0;
};

BufferStats buffer_stats(const ExemplarBuffer& buffer);

/// buffer.json plus one EMLT file per stored class.
void save_buffer(const std::filesystem::path& dir, const ExemplarBuffer& buffer);
ExemplarBuffer load_buffer(const std::filesystem::path& dir);

}  // namespace erd::memory
