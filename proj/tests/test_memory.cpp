#include <algorithm>
#include <fstream>
#include <numeric>
#include <set>

#include "doctest.h"
#include "support.hpp"

#include "erd/errors.hpp"
#include "erd/memory/exemplar_buffer.hpp"

using namespace erd;
using namespace erd::memory;
using learners::EmbeddingNet;

namespace {

EmbeddingNet<float> random_net(std::size_t dim, Rng& rng) {
  return EmbeddingNet<float>({dim, 8, 4}, rng);
}

data::Task random_task(std::size_t number, std::vector<int> ids, std::size_t rows,
                       std::size_t dim, Rng& rng) {
  data::Task t;
  t.number = number;
  for (int id : ids) {
    t.classes.push_back({id, test::random_matrix(rows, dim, rng), test::random_matrix(2, dim, rng)});
  }
  return t;
}

// Row indices sorted by (squared distance to the mean, index).
std::vector<std::size_t> argsort_oracle(const data::FeatureMatrix& m) {
  std::vector<long double> mean(m.cols, 0.0L);
  for (std::size_t r = 0; r < m.rows; ++r) {
    for (std::size_t k = 0; k < m.cols; ++k) mean[k] += m.row(r)[k];
  }
  for (auto& v : mean) v /= m.rows;
  std::vector<std::pair<long double, std::size_t>> keyed;
  for (std::size_t r = 0; r < m.rows; ++r) {
    long double d = 0.0L;
    for (std::size_t k = 0; k < m.cols; ++k) d += (m.row(r)[k] - mean[k]) * (m.row(r)[k] - mean[k]);
    keyed.emplace_back(d, r);
  }
  std::sort(keyed.begin(), keyed.end());
  std::vector<std::size_t> out;
  for (const auto& [d, r] : keyed) out.push_back(r);
  return out;
}

void check_budget(const ExemplarBuffer& buffer, const data::Dataset& seen) {
  const auto stats = buffer_stats(buffer);
  if (buffer.policy().kind == BufferPolicy::Kind::per_class) {
    for (const auto& [id, count] : stats.per_class_counts) CHECK(count <= buffer.policy().n_ex);
  } else {
    CHECK(stats.total_rows <= buffer.policy().bf);
  }
  for (const auto& c : seen) {
    const auto& set = buffer.at(c.id);
    REQUIRE(set.rows.rows == set.source_rows.size());
    for (std::size_t i = 0; i < set.source_rows.size(); ++i) {
      const auto src = c.train.row(set.source_rows[i]);
      const auto dst = set.rows.row(i);
      CHECK(std::equal(src.begin(), src.end(), dst.begin()));
    }
  }
}

}  // namespace

TEST_CASE("ntc_order: three points on a line") {
  data::FeatureMatrix line(3, 1, {0, 1, 10});
  CHECK(ntc_order(line, 2) == std::vector<std::size_t>{1, 0});
  const auto identity = test::fixed_mlp<float>({1, 1}, {{1}}, {{0}});
  Rng rng(1);
  CHECK(select_exemplars(line, identity, 2, Selection::ntc, rng) == std::vector<std::size_t>{1, 0});
}

TEST_CASE("ntc_order: ties go to the smaller row index") {
  data::FeatureMatrix sym(4, 1, {-1, 1, -2, 2});
  CHECK(ntc_order(sym, 4) == std::vector<std::size_t>{0, 1, 2, 3});
}

TEST_CASE("select_exemplars clamps n to the class size") {
  Rng rng(2);
  const auto rows = test::random_matrix(6, 3, rng);
  const auto net = random_net(3, rng);
  for (auto sel : {Selection::ntc, Selection::random}) {
    auto picked = select_exemplars(rows, net, 50, sel, rng);
    CHECK(picked.size() == 6);
    std::sort(picked.begin(), picked.end());
    CHECK(picked == std::vector<std::size_t>{0, 1, 2, 3, 4, 5});
  }
  CHECK_THROWS_AS(select_exemplars(data::FeatureMatrix(0, 3), net, 2, Selection::ntc, rng),
                  ValidationError);
}

TEST_CASE("random selection is deterministic and without replacement") {
  Rng init(3);
  const auto rows = test::random_matrix(40, 3, init);
  const auto net = random_net(3, init);
  Rng a(9), b(9);
  const auto first = select_exemplars(rows, net, 12, Selection::random, a);
  CHECK(first == select_exemplars(rows, net, 12, Selection::random, b));
  CHECK(std::set<std::size_t>(first.begin(), first.end()).size() == 12);
  for (auto r : first) CHECK(r < 40);
}

TEST_CASE("property: ntc selection equals a brute-force argsort") {
  Rng rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t count = 5 + rng.below(40);
    const auto rows = test::random_matrix(count, 5, rng);
    const auto net = random_net(5, rng);
    const std::size_t n = 1 + rng.below(count + 5);

    const auto embedded = net.forward(learners::to_tensor<float>(rows));
    data::FeatureMatrix emb(count, 4, {embedded.data().begin(), embedded.data().end()});
    auto expected = argsort_oracle(emb);
    expected.resize(std::min(n, count));
    CHECK(select_exemplars(rows, net, n, Selection::ntc, rng) == expected);
  }
}

TEST_CASE("per_class buffers grow by n_ex per class") {
  Rng rng(5);
  const auto net = random_net(3, rng);
  ExemplarBuffer buffer(BufferPolicy::per_class(20), Selection::ntc);
  CHECK(buffer_stats(buffer) == BufferStats{});
  std::size_t expected = 0;
  for (std::size_t t = 1; t <= 3; ++t) {
    std::vector<int> ids;
    for (int k = 0; k < 5; ++k) ids.push_back(int(t) * 10 + k);
    buffer.commit_task(random_task(t, ids, 30, 3, rng), net, rng);
    expected += 100;
    CHECK(buffer_stats(buffer).total_rows == expected);
    for (int id : ids) CHECK(buffer.at(id).origin_task == t);
  }
  const auto stats = buffer_stats(buffer);
  CHECK(stats.n_classes == 15);
  CHECK(stats.total_rows == 300);
  for (const auto& [id, count] : stats.per_class_counts) CHECK(count == 20);
  CHECK(buffer.commits() == 3);
}

TEST_CASE("bounded buffer quotas with 75 classes") {
  Rng rng(6);
  const auto net = random_net(3, rng);
  ExemplarBuffer buffer(BufferPolicy::bounded(1000), Selection::ntc);
  for (std::size_t t = 1; t <= 15; ++t) {
    std::vector<int> ids;
    for (int k = 0; k < 5; ++k) ids.push_back(int((t - 1) * 5) + k);
    buffer.commit_task(random_task(t, ids, 20, 3, rng), net, rng);
    CHECK(buffer_stats(buffer).total_rows <= 1000);
  }
  // floor(1000 / 75) = 13 each, the 25 leftover slots go to ids 0..24
  const auto stats = buffer_stats(buffer);
  CHECK(stats.total_rows == 1000);
  for (const auto& [id, count] : stats.per_class_counts) CHECK(count == (id < 25 ? 14u : 13u));
}

TEST_CASE("bounded truncation only drops the tail of the ntc order") {
  Rng rng(7);
  const auto net = random_net(3, rng);
  ExemplarBuffer buffer(BufferPolicy::bounded(60), Selection::ntc);
  buffer.commit_task(random_task(1, {0, 1, 2}, 30, 3, rng), net, rng);
  std::map<int, std::vector<std::size_t>> before;
  for (const auto& [id, set] : buffer.classes()) before[id] = set.source_rows;
  CHECK(before.at(0).size() == 20);
  buffer.commit_task(random_task(2, {3, 4, 5}, 30, 3, rng), net, rng);
  for (const auto& [id, rows] : before) {
    const auto& now = buffer.at(id).source_rows;
    CHECK(now.size() == 10);
    CHECK(std::equal(now.begin(), now.end(), rows.begin()));
  }
}

TEST_CASE("property: budget invariants over random task sequences") {
  Rng rng(8);
  for (int seq = 0; seq < 1000; ++seq) {
    const bool bounded = rng.below(2) == 1;
    const auto policy = bounded ? BufferPolicy::bounded(1 + rng.below(60))
                                : BufferPolicy::per_class(1 + rng.below(12));
    const auto selection = rng.below(2) == 1 ? Selection::ntc : Selection::random;
    ExemplarBuffer buffer(policy, selection);
    const std::size_t dim = 2;
    const auto net = test::fixed_mlp<float>({2, 2}, {{1, 0.5f, -0.5f, 1}}, {{0, 0}});
    const std::size_t n_tasks = 1 + rng.below(5);
    data::Dataset seen;
    int next_id = 0;
    for (std::size_t t = 1; t <= n_tasks; ++t) {
      std::vector<int> ids;
      const std::size_t width = 1 + rng.below(4);
      for (std::size_t k = 0; k < width; ++k) ids.push_back(next_id++);
      auto task = random_task(t, ids, 1 + rng.below(15), dim, rng);
      buffer.commit_task(task, net, rng);
      seen.insert(seen.end(), task.classes.begin(), task.classes.end());
      check_budget(buffer, seen);
    }
    CHECK(buffer.n_classes() == seen.size());
  }
}

TEST_CASE("committing a class twice is rejected") {
  Rng rng(9);
  const auto net = random_net(3, rng);
  ExemplarBuffer buffer(BufferPolicy::per_class(4), Selection::random);
  buffer.commit_task(random_task(1, {1, 2}, 10, 3, rng), net, rng);
  CHECK_THROWS_AS(buffer.commit_task(random_task(2, {2, 3}, 10, 3, rng), net, rng),
                  ValidationError);
  CHECK_THROWS_AS(buffer.commit_task(random_task(2, {5, 5}, 10, 3, rng), net, rng),
                  ValidationError);
  CHECK(buffer.n_classes() == 2);
}

TEST_CASE("buffer checkpoint round-trip is bit-exact") {
  for (auto policy : {BufferPolicy::per_class(7), BufferPolicy::bounded(25)}) {
    test::TempDir dir("buffer");
    Rng rng(10);
    const auto net = random_net(4, rng);
    ExemplarBuffer buffer(policy, Selection::ntc);
    buffer.commit_task(random_task(1, {3, 8, 1}, 12, 4, rng), net, rng);
    buffer.commit_task(random_task(2, {20, 21}, 12, 4, rng), net, rng);
    save_buffer(dir.path(), buffer);
    CHECK(std::filesystem::exists(dir / "buffer.json"));
    const auto back = load_buffer(dir.path());
    CHECK(back == buffer);
    CHECK(buffer_stats(back) == buffer_stats(buffer));
  }
}

TEST_CASE("load_buffer error paths") {
  test::TempDir dir("buffer_err");
  CHECK_THROWS_AS(load_buffer(dir.path()), IoError);
  std::ofstream(dir / "buffer.json") << "[1, 2";
  CHECK_THROWS_AS(load_buffer(dir.path()), FormatError);
}

TEST_CASE("policy validation and selection names") {
  CHECK_THROWS_AS(BufferPolicy::per_class(0).validate(), ValidationError);
  CHECK_THROWS_AS(BufferPolicy::bounded(0).validate(), ValidationError);
  CHECK_THROWS_AS(ExemplarBuffer(BufferPolicy::per_class(0), Selection::ntc), ValidationError);
  CHECK(parse_selection("ntc") == Selection::ntc);
  CHECK(parse_selection(to_string(Selection::random)) == Selection::random);
  CHECK_THROWS_AS(parse_selection("herding"), ValidationError);
}
