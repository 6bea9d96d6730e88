#include <map>
#include <set>

#include "doctest.h"
#include "support.hpp"

#include "erd/errors.hpp"
#include "erd/sampler/sampler.hpp"

using namespace erd;
using namespace erd::sampler;

namespace {

// Row r of class c holds (c, r, 0, ...) so rows identify themselves.
data::FeatureMatrix tagged_rows(int class_id, std::size_t rows, std::size_t dim = 3) {
  data::FeatureMatrix m(rows, dim);
  for (std::size_t r = 0; r < rows; ++r) {
    m.row(r)[0] = static_cast<float>(class_id);
    m.row(r)[1] = static_cast<float>(r);
  }
  return m;
}

data::Task make_task(std::size_t number, std::vector<int> ids, std::size_t rows = 30) {
  data::Task t;
  t.number = number;
  for (int id : ids) t.classes.push_back({id, tagged_rows(id, rows), tagged_rows(id, 10)});
  return t;
}

// Buffer holding `per_class` rows of each class, taken from train rows
// 2, 4, 6, ... so that buffer-local and train-split indices differ.
memory::ExemplarBuffer make_buffer(const std::vector<std::pair<int, std::size_t>>& class_task,
                                   std::size_t per_class) {
  memory::ExemplarBuffer buffer(memory::BufferPolicy::per_class(per_class),
                                memory::Selection::random);
  for (auto [id, task] : class_task) {
    memory::ExemplarSet set;
    set.class_id = id;
    set.origin_task = task;
    set.rows = data::FeatureMatrix(per_class, 3);
    for (std::size_t i = 0; i < per_class; ++i) {
      set.source_rows.push_back(2 * i);
      set.rows.row(i)[0] = static_cast<float>(id);
      set.rows.row(i)[1] = static_cast<float>(2 * i);
    }
    buffer.restore(std::move(set));
  }
  return buffer;
}

std::size_t previous_count(const Episode& e, std::size_t current) {
  std::set<int> prev;
  for (const auto& r : e.support) {
    if (r.origin_task < current) prev.insert(r.source.class_id);
  }
  return prev.size();
}

// Every row's features must equal the row its SampleRef names.
void check_identity(const Episode& e) {
  auto check = [](const std::vector<EpisodeRow>& rows, const data::FeatureMatrix& x) {
    for (std::size_t i = 0; i < rows.size(); ++i) {
      CHECK(x.row(i)[0] == static_cast<float>(rows[i].source.class_id));
      CHECK(x.row(i)[1] == static_cast<float>(rows[i].source.row));
    }
  };
  check(e.support, e.support_x);
  check(e.query, e.query_x);
}

// Probability mass function of Binomial(n, p).
std::vector<double> binomial_pmf(int n, double p) {
  std::vector<double> pmf(n + 1);
  for (int k = 0; k <= n; ++k) {
    double c = 1.0;
    for (int i = 1; i <= k; ++i) c = c * (n - k + i) / i;
    pmf[k] = c * std::pow(p, k) * std::pow(1 - p, n - k);
  }
  return pmf;
}

}  // namespace

TEST_CASE("sample_standard: 5 classes, spec(5,1,15)") {
  const auto task = make_task(1, {10, 11, 12, 13, 14});
  Rng rng(1);
  const auto e = sample_standard(task, EpisodeSpec{5, 1, 15}, rng);
  CHECK(e.kind == EpisodeKind::standard);
  CHECK(std::set<int>(e.class_ids.begin(), e.class_ids.end()) == std::set<int>{10, 11, 12, 13, 14});
  CHECK(e.support.size() == 5);
  CHECK(e.query.size() == 75);
  CHECK(e.support_x.rows == 5);
  CHECK(e.query_x.rows == 75);
  CHECK_NOTHROW(validate_episode(e));
  check_identity(e);
  for (std::size_t k = 0; k < 5; ++k) {
    CHECK(e.support[k].label == k);
    for (std::size_t q = 0; q < 15; ++q) CHECK(e.query[k * 15 + q].label == k);
  }
}

TEST_CASE("sample_standard: errors and determinism") {
  const auto task = make_task(1, {0, 1, 2, 3});
  Rng rng(2);
  CHECK_THROWS_AS(sample_standard(task, EpisodeSpec{5, 1, 15}, rng), SamplingError);
  const auto thin = make_task(1, {0, 1, 2, 3, 4}, 10);
  CHECK_THROWS_AS(sample_standard(thin, EpisodeSpec{5, 1, 15}, rng), SamplingError);
  CHECK_THROWS_AS(sample_standard(thin, EpisodeSpec{0, 1, 1}, rng), ValidationError);

  const auto full = make_task(1, {0, 1, 2, 3, 4, 5, 6});
  Rng a(99), b(99);
  const auto e1 = sample_standard(full, EpisodeSpec{5, 2, 3}, a);
  const auto e2 = sample_standard(full, EpisodeSpec{5, 2, 3}, b);
  CHECK(e1.class_ids == e2.class_ids);
  CHECK(e1.support == e2.support);
  CHECK(e1.query == e2.query);
  CHECK(e1.support_x == e2.support_x);
}

TEST_CASE("property: no row repeats within a class when enough rows exist") {
  const auto task = make_task(1, {0, 1, 2, 3, 4, 5, 6, 7}, 20);
  Rng rng(5);
  for (int trial = 0; trial < 500; ++trial) {
    const EpisodeSpec spec{1 + rng.below(8), 1 + rng.below(5), 1 + rng.below(15)};
    const auto e = sample_standard(task, spec, rng);
    CHECK_NOTHROW(validate_episode(e));
    std::map<int, std::set<std::size_t>> used;
    std::size_t total = 0;
    for (const auto* rows : {&e.support, &e.query}) {
      for (const auto& r : *rows) {
        used[r.source.class_id].insert(r.source.row);
        ++total;
      }
    }
    std::size_t distinct = 0;
    for (const auto& [id, s] : used) distinct += s.size();
    CHECK(distinct == total);
    CHECK(used.size() == spec.n_way);
  }
}

TEST_CASE("sample_cross_task: fixed_count P=0.2 N=5 takes exactly one previous class") {
  const auto current = make_task(3, {20, 21, 22, 23, 24});
  const auto buffer = make_buffer({{0, 1}, {1, 1}, {2, 1}, {10, 2}, {11, 2}}, 20);
  const SamplerConfig config{0.2, PrevStrategy::fixed_count};
  Rng rng(7);
  for (int trial = 0; trial < 10000; ++trial) {
    const auto e = sample_cross_task(current, buffer, EpisodeSpec{}, config, rng);
    REQUIRE(previous_count(e, 3) == 1);
    CHECK(e.kind == EpisodeKind::cross_task);
  }
}

TEST_CASE("sample_cross_task: previous-class rows come only from the buffer") {
  const auto current = make_task(2, {20, 21, 22, 23, 24});
  const auto buffer = make_buffer({{0, 1}, {1, 1}, {2, 1}, {3, 1}, {4, 1}}, 20);
  Rng rng(8);
  for (int trial = 0; trial < 300; ++trial) {
    const auto e = sample_cross_task(current, buffer, EpisodeSpec{}, {0.4, PrevStrategy::fixed_count},
                                     rng);
    CHECK_NOTHROW(validate_episode(e, 2));
    check_identity(e);
    for (const auto* rows : {&e.support, &e.query}) {
      for (const auto& r : *rows) {
        if (r.origin_task < 2) {
          CHECK(buffer.contains(r.source.class_id));
          const auto& src = buffer.at(r.source.class_id).source_rows;
          CHECK(std::find(src.begin(), src.end(), r.source.row) != src.end());
          CHECK(r.source.split == data::Split::train);
        } else {
          CHECK(r.origin_task == 2);
          CHECK(r.source.class_id >= 20);
        }
      }
    }
  }
}

TEST_CASE("sample_cross_task: P=0 draws a standard episode from the current task") {
  const auto current = make_task(4, {20, 21, 22, 23, 24, 25});
  const auto buffer = make_buffer({{0, 1}, {1, 2}, {2, 3}}, 20);
  for (auto strategy : {PrevStrategy::fixed_count, PrevStrategy::binomial}) {
    Rng rng(9);
    for (int trial = 0; trial < 200; ++trial) {
      const auto e = sample_cross_task(current, buffer, EpisodeSpec{}, {0.0, strategy}, rng);
      CHECK(previous_count(e, 4) == 0);
    }
  }
  // fixed_count with P = 0 consumes the generator exactly like sample_standard.
  Rng a(10), b(10);
  const auto cross = sample_cross_task(current, buffer, EpisodeSpec{}, {0.0, PrevStrategy::fixed_count}, a);
  const auto standard = sample_standard(current, EpisodeSpec{}, b);
  CHECK(cross.class_ids == standard.class_ids);
  CHECK(cross.support == standard.support);
  CHECK(cross.query == standard.query);
}

TEST_CASE("sample_cross_task: binomial P=0.4 averages 2 previous classes") {
  const auto current = make_task(2, {20, 21, 22, 23, 24});
  const auto buffer = make_buffer({{0, 1}, {1, 1}, {2, 1}, {3, 1}, {4, 1}}, 16);
  const SamplerConfig config{0.4, PrevStrategy::binomial};
  const EpisodeSpec spec{5, 1, 1};
  Rng rng(11);
  const int draws = 100000;
  double total = 0.0;
  for (int i = 0; i < draws; ++i) total += previous_count(sample_cross_task(current, buffer, spec, config, rng), 2);
  CHECK(std::abs(total / draws - 2.0) <= 0.02);
}

TEST_CASE("sample_cross_task: binomial histogram passes chi-square against Binomial(5, 0.2)") {
  const auto current = make_task(2, {20, 21, 22, 23, 24});
  const auto buffer = make_buffer({{0, 1}, {1, 1}, {2, 1}, {3, 1}, {4, 1}}, 16);
  const SamplerConfig config{0.2, PrevStrategy::binomial};
  const EpisodeSpec spec{5, 1, 1};
  Rng rng(12);
  const int draws = 100000;
  std::vector<double> observed(6, 0.0);
  for (int i = 0; i < draws; ++i) observed[previous_count(sample_cross_task(current, buffer, spec, config, rng), 2)] += 1;
  const auto pmf = binomial_pmf(5, 0.2);
  double chi2 = 0.0;
  for (int k = 0; k <= 5; ++k) {
    const double expected = pmf[k] * draws;
    chi2 += (observed[k] - expected) * (observed[k] - expected) / expected;
  }
  // chi-square upper 0.001 quantile with 5 degrees of freedom
  CHECK(chi2 < 20.515);
}

TEST_CASE("sample_cross_task: rand_pool draws uniformly over every seen class") {
  const auto current = make_task(2, {20, 21, 22, 23, 24});
  const auto buffer = make_buffer({{0, 1}, {1, 1}, {2, 1}, {3, 1}, {4, 1}}, 20);
  Rng rng(13);
  std::map<int, int> hits;
  const int draws = 20000;
  for (int i = 0; i < draws; ++i) {
    const auto e = sample_cross_task(current, buffer, EpisodeSpec{5, 1, 1}, {0.2, PrevStrategy::rand_pool}, rng);
    CHECK(std::set<int>(e.class_ids.begin(), e.class_ids.end()).size() == 5);
    for (int id : e.class_ids) ++hits[id];
  }
  CHECK(hits.size() == 10);
  // Each class appears with probability 5/10.
  for (const auto& [id, n] : hits) CHECK(std::abs(double(n) / draws - 0.5) < 0.02);
}

TEST_CASE("sample_cross_task: not enough previous classes is a sampling error") {
  const auto current = make_task(2, {20, 21, 22, 23, 24});
  const auto buffer = make_buffer({{0, 1}}, 20);
  Rng rng(14);
  CHECK_THROWS_AS(sample_cross_task(current, buffer, EpisodeSpec{}, {0.4, PrevStrategy::fixed_count}, rng),
                  SamplingError);
  const memory::ExemplarBuffer empty(memory::BufferPolicy::per_class(20), memory::Selection::ntc);
  CHECK_THROWS_AS(sample_cross_task(current, empty, EpisodeSpec{}, {0.2, PrevStrategy::fixed_count}, rng),
                  SamplingError);
}

TEST_CASE("sample_exemplar: 5 classes x 20 exemplars") {
  const auto buffer = make_buffer({{0, 1}, {1, 1}, {2, 1}, {3, 2}, {4, 2}}, 20);
  Rng rng(15);
  const auto e = sample_exemplar(buffer, EpisodeSpec{5, 1, 15}, rng);
  CHECK(e.kind == EpisodeKind::exemplar);
  CHECK_NOTHROW(validate_episode(e, 3));
  check_identity(e);
  for (const auto* rows : {&e.support, &e.query}) {
    for (const auto& r : *rows) {
      CHECK(r.origin_task < 3);
      const auto& src = buffer.at(r.source.class_id).source_rows;
      CHECK(std::find(src.begin(), src.end(), r.source.row) != src.end());
    }
  }
  std::map<int, std::set<std::size_t>> used;
  for (const auto* rows : {&e.support, &e.query}) {
    for (const auto& r : *rows) used[r.source.class_id].insert(r.source.row);
  }
  for (const auto& [id, s] : used) CHECK(s.size() == 16);

  Rng a(16), b(16);
  CHECK(sample_exemplar(buffer, EpisodeSpec{}, a).query == sample_exemplar(buffer, EpisodeSpec{}, b).query);
}

TEST_CASE("sample_exemplar: errors") {
  Rng rng(17);
  const auto four = make_buffer({{0, 1}, {1, 1}, {2, 1}, {3, 1}}, 20);
  CHECK_THROWS_AS(sample_exemplar(four, EpisodeSpec{}, rng), SamplingError);
  const memory::ExemplarBuffer empty(memory::BufferPolicy::per_class(20), memory::Selection::ntc);
  CHECK_THROWS_AS(sample_exemplar(empty, EpisodeSpec{}, rng), SamplingError);
}

TEST_CASE("small buffer classes: support without replacement, query from the remainder") {
  const auto buffer = make_buffer({{0, 1}, {1, 1}, {2, 1}, {3, 1}, {4, 1}}, 3);
  Rng rng(18);
  for (int trial = 0; trial < 200; ++trial) {
    const auto e = sample_exemplar(buffer, EpisodeSpec{5, 2, 15}, rng);
    CHECK(e.query.size() == 75);
    for (std::size_t k = 0; k < 5; ++k) {
      const auto s0 = e.support[2 * k].source.row;
      const auto s1 = e.support[2 * k + 1].source.row;
      CHECK(s0 != s1);
      for (std::size_t q = 0; q < 15; ++q) {
        const auto row = e.query[15 * k + q].source.row;
        CHECK(row != s0);
        CHECK(row != s1);
      }
    }
  }
  // A single exemplar serves as support and as every query.
  const auto single = make_buffer({{0, 1}, {1, 1}, {2, 1}, {3, 1}, {4, 1}}, 1);
  const auto e = sample_exemplar(single, EpisodeSpec{5, 1, 4}, rng);
  for (std::size_t k = 0; k < 5; ++k) {
    for (std::size_t q = 0; q < 4; ++q) CHECK(e.query[4 * k + q].source.row == e.support[k].source.row);
  }
}

TEST_CASE("validate_episode catches broken structure") {
  const auto task = make_task(1, {0, 1, 2, 3, 4});
  Rng rng(19);
  auto e = sample_standard(task, EpisodeSpec{}, rng);
  auto bad = e;
  bad.query.pop_back();
  CHECK_THROWS_AS(validate_episode(bad), ValidationError);
  bad = e;
  bad.query[0].source = bad.support[0].source;
  CHECK_THROWS_AS(validate_episode(bad), ValidationError);
  bad = e;
  bad.class_ids[1] = bad.class_ids[0];
  CHECK_THROWS_AS(validate_episode(bad), ValidationError);
  bad = e;
  bad.kind = EpisodeKind::exemplar;  // rows from task 1 cannot be exemplars at task 1
  CHECK_THROWS_AS(validate_episode(bad, 1), ValidationError);
  CHECK_NOTHROW(validate_episode(bad, 2));
}

TEST_CASE("strategy names round-trip") {
  for (auto s : {PrevStrategy::fixed_count, PrevStrategy::binomial, PrevStrategy::rand_pool}) {
    CHECK(parse_prev_strategy(to_string(s)) == s);
  }
  CHECK_THROWS_AS(parse_prev_strategy("sometimes"), ValidationError);
  CHECK_THROWS_AS((SamplerConfig{1.5, PrevStrategy::binomial}.validate()), ValidationError);
}
