#include <cmath>
#include <fstream>
#include <numbers>

#include "doctest.h"
#include "support.hpp"

#include "erd/autodiff/gradcheck.hpp"
#include "erd/autodiff/ops.hpp"
#include "erd/data/synthetic.hpp"
#include "erd/errors.hpp"
#include "erd/learners/checkpoint.hpp"
#include "erd/learners/episodic.hpp"
#include "erd/sampler/sampler.hpp"

using namespace erd;
using namespace erd::learners;
using ad::Tensor;
using ad::Tensor64;
using test::fixed_mlp;
using test::make_episode;
using test::random_episode;

namespace {

Tensor64 rows64(std::size_t r, std::size_t c, std::vector<double> v) {
  return Tensor64({r, c}, std::move(v));
}

}  // namespace

TEST_CASE("compute_prototypes: reference cases") {
  auto one = rows64(2, 2, {1, 2, 3, 4});
  const std::vector<std::size_t> labels1 = {0, 1};
  auto p1 = compute_prototypes(one, labels1, 2);
  for (std::size_t i = 0; i < 4; ++i) CHECK(p1.at(i) == one.at(i));

  auto pts = rows64(2, 2, {0, 0, 2, 2});
  const std::vector<std::size_t> same = {0, 0};
  auto mid = compute_prototypes(pts, same, 1);
  CHECK(mid.at(0) == 1.0);
  CHECK(mid.at(1) == 1.0);

  const std::vector<std::size_t> missing = {0, 0};
  CHECK_THROWS_AS(compute_prototypes(pts, missing, 2), ValidationError);
}

TEST_CASE("compute_prototypes: 5-way 5-shot matches brute-force means") {
  Rng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    auto emb = test::random_tensor<float>({25, 6}, rng, 3.0, false);
    std::vector<std::size_t> labels(25);
    for (std::size_t i = 0; i < 25; ++i) labels[i] = i / 5;
    rng.shuffle(labels);
    auto protos = compute_prototypes(emb, labels, 5);
    for (std::size_t k = 0; k < 5; ++k) {
      for (std::size_t d = 0; d < 6; ++d) {
        double s = 0.0;
        for (std::size_t i = 0; i < 25; ++i) {
          if (labels[i] == k) s += emb.at(i, d);
        }
        CHECK(std::abs(protos.at(k, d) - s / 5.0) < 1e-6);
      }
    }
  }
}

TEST_CASE("proto_classify: reference probabilities") {
  // equidistant query
  auto protos = rows64(4, 2, {1, 0, -1, 0, 0, 1, 0, -1});
  auto p = proto_classify(protos, rows64(1, 2, {0, 0}));
  for (std::size_t k = 0; k < 4; ++k) CHECK(p.at(0, k) == doctest::Approx(0.25).epsilon(1e-12));

  // query on c_1, others at squared distance >= 50
  auto far = rows64(3, 2, {0, 0, 5, 5, -5, 6});
  auto q = proto_classify(far, rows64(1, 2, {0, 0}));
  CHECK(q.at(0, 0) > 0.999);

  // squared distances 1 and 2
  auto two = rows64(2, 2, {1, 0, 1, 1});
  auto r = proto_classify(two, rows64(1, 2, {0, 0}));
  CHECK(std::abs(r.at(0, 0) - 0.7311) < 1e-4);
  CHECK(std::abs(r.at(0, 1) - 0.2689) < 1e-4);
}

TEST_CASE("property: proto_classify is invariant to a joint isometry") {
  Rng rng(21);
  const std::size_t d = 4;
  for (int trial = 0; trial < 100; ++trial) {
    // random orthogonal matrix by Gram-Schmidt
    std::vector<std::vector<double>> basis;
    while (basis.size() < d) {
      std::vector<double> v(d);
      for (auto& x : v) x = rng.normal();
      for (const auto& b : basis) {
        double dot = 0.0;
        for (std::size_t i = 0; i < d; ++i) dot += v[i] * b[i];
        for (std::size_t i = 0; i < d; ++i) v[i] -= dot * b[i];
      }
      double norm = 0.0;
      for (double x : v) norm += x * x;
      norm = std::sqrt(norm);
      if (norm < 1e-6) continue;
      for (auto& x : v) x /= norm;
      basis.push_back(v);
    }
    std::vector<double> shift(d);
    for (auto& s : shift) s = 5.0 * rng.normal();
    auto transform = [&](const Tensor64& x) {
      std::vector<double> out(x.size());
      const std::size_t rows = x.dim(0);
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t i = 0; i < d; ++i) {
          double acc = shift[i];
          for (std::size_t j = 0; j < d; ++j) acc += basis[i][j] * x.at(r, j);
          out[r * d + i] = acc;
        }
      }
      return Tensor64(x.shape(), out);
    };
    auto protos = test::random_tensor<double>({5, d}, rng, 1.0, false);
    auto queries = test::random_tensor<double>({3, d}, rng, 1.0, false);
    auto p = proto_classify(protos, queries);
    auto p2 = proto_classify(transform(protos), transform(queries));
    for (std::size_t i = 0; i < p.size(); ++i) CHECK(std::abs(p.at(i) - p2.at(i)) < 1e-5);
  }
}

TEST_CASE("property: proto_classify argmax is the nearest prototype") {
  Rng rng(22);
  for (int trial = 0; trial < 2000; ++trial) {
    const std::size_t n = 2 + rng.below(6);
    auto protos = test::random_tensor<float>({n, 3}, rng, 2.0, false);
    auto query = test::random_tensor<float>({1, 3}, rng, 2.0, false);
    auto p = proto_classify(protos, query);
    std::size_t arg = 0, nearest = 0;
    double best = 1e300;
    for (std::size_t k = 0; k < n; ++k) {
      if (p.at(0, k) > p.at(0, arg)) arg = k;
      double dist = 0.0;
      for (std::size_t j = 0; j < 3; ++j) {
        const double diff = double(query.at(0, j)) - protos.at(k, j);
        dist += diff * diff;
      }
      if (dist < best) {
        best = dist;
        nearest = k;
      }
    }
    CHECK(arg == nearest);
  }
}

TEST_CASE("proto_meta_loss: perfect separation gives zero loss") {
  // identity-like embedding scaled by 100: classes sit 100 apart
  auto net = fixed_mlp<double>({2, 2}, {{100, 0, 0, 100}}, {{0, 0}});
  data::FeatureMatrix s(2, 2, {0, 0, 1, 0});
  data::FeatureMatrix q(4, 2, {0, 0, 0, 0, 1, 0, 1, 0});
  const auto e = make_episode(2, 1, 2, s, q);
  CHECK(std::abs(proto_meta_loss(net, e).item()) < 1e-9);
}

TEST_CASE("proto_meta_loss: an untrained network is near chance") {
  data::SyntheticSpec spec;
  spec.n_classes = 10;
  spec.per_class_train = 30;
  // small-scale inputs keep embedding distances near zero, so predictions are near uniform
  spec.mean_radius = 0.1;
  spec.noise_sigma = 0.1;
  const auto ds = data::generate_synthetic(spec);
  data::Task task{1, ds};
  Rng rng(23);
  ModelShape shape;
  const auto model = Model<float>::create(shape, rng);
  double total = 0.0;
  for (int i = 0; i < 100; ++i) {
    const auto e = sampler::sample_standard(task, sampler::EpisodeSpec{}, rng);
    total += proto_meta_loss(model.embed, e).item() / double(e.query.size());
  }
  CHECK(std::abs(total / 100.0 - std::log(5.0)) <= 0.3);
}

TEST_CASE("gradient checks on 2-way 1-shot toy episodes") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(seed);
    const auto e = random_episode(2, 1, 2, 4, rng);
    ModelShape shape;
    shape.embed_widths = {4, 6, 3};
    shape.relation_hidden = {5};

    shape.type = LearnerType::proto;
    auto proto = Model<float>::create(shape, rng).cast<double>();
    const auto r1 = ad::gradient_check<double>([&] { return proto_meta_loss(proto.embed, e); },
                                               proto.parameters(), 1e-5);
    CHECK(r1.max_relative_error < 1e-4);

    shape.type = LearnerType::relation;
    auto rel = Model<float>::create(shape, rng).cast<double>();
    const auto r2 = ad::gradient_check<double>(
        [&] { return relation_meta_loss(rel.embed, *rel.relation, e); }, rel.parameters(), 1e-5);
    CHECK(r2.max_relative_error < 1e-4);
  }
}

TEST_CASE("relation_scores: range, determinism and pairwise recomputation") {
  Rng rng(24);
  const auto e = random_episode(3, 2, 2, 5, rng);
  ModelShape shape;
  shape.type = LearnerType::relation;
  shape.embed_widths = {5, 8, 4};
  Rng init_a(7), init_b(7);
  const auto model = Model<float>::create(shape, init_a);
  const auto twin = Model<float>::create(shape, init_b);
  auto scores = relation_scores(model.embed, *model.relation, e);
  auto again = relation_scores(twin.embed, *twin.relation, e);
  REQUIRE(scores.shape() == ad::Shape{6, 6});
  for (std::size_t i = 0; i < scores.size(); ++i) {
    CHECK(scores.at(i) > 0.0f);
    CHECK(scores.at(i) < 1.0f);
    CHECK(scores.at(i) == again.at(i));
  }
  const auto emb = embed_episode(model.embed, e);
  for (std::size_t q = 0; q < 6; ++q) {
    for (std::size_t s = 0; s < 6; ++s) {
      std::vector<float> pair;
      for (std::size_t d = 0; d < 4; ++d) pair.push_back(emb.support.at(s, d));
      for (std::size_t d = 0; d < 4; ++d) pair.push_back(emb.query.at(q, d));
      const auto single = model.relation->forward(Tensor({1, 8}, pair));
      CHECK(std::abs(single.item() - scores.at(q, s)) < 1e-6);
    }
  }
}

TEST_CASE("relation_meta_loss: reference values") {
  // last layer zero: every score is sigmoid(0) = 0.5
  auto embed = fixed_mlp<double>({1, 1}, {{1}}, {{0}});
  RelationModule<double> half(fixed_mlp<double>({2, 2, 1}, {{1, 0, 0, 1}, {0, 0}}, {{0, 0}, {0}}));
  data::FeatureMatrix s(2, 1, {0, 1});
  data::FeatureMatrix q(2, 1, {0, 1});
  const auto e = make_episode(2, 1, 1, s, q);
  CHECK(relation_meta_loss(embed, half, e).item() == doctest::Approx(1.0).epsilon(1e-12));

  // g(s, q) = sigmoid(20 - 40 |s - q|): about 1 on matching pairs, 0 otherwise
  RelationModule<double> sharp(
      fixed_mlp<double>({2, 2, 1}, {{1, -1, -1, 1}, {-40, -40}}, {{0, 0}, {20}}));
  CHECK(relation_meta_loss(embed, sharp, e).item() < 1e-12);
  const auto targets = relation_targets<double>(e);
  CHECK(targets.at(0, 0) == 1.0);
  CHECK(targets.at(0, 1) == 0.0);
  CHECK(targets.at(1, 1) == 1.0);
}

TEST_CASE("network construction and initialization") {
  Rng rng(25);
  ModelShape shape;
  shape.embed_widths = {32, 64, 64, 32};
  const auto model = Model<float>::create(shape, rng);
  CHECK(model.embed.n_layers() == 3);
  CHECK_FALSE(model.relation.has_value());
  for (std::size_t l = 0; l < 3; ++l) {
    const double in = double(shape.embed_widths[l]);
    const double out = double(shape.embed_widths[l + 1]);
    const double bound = std::sqrt(6.0 / (in + out));
    for (float w : model.embed.weight(l).data()) CHECK(std::abs(w) <= bound);
    for (float b : model.embed.bias(l).data()) CHECK(b == 0.0f);
  }
  shape.type = LearnerType::relation;
  const auto rel = Model<float>::create(shape, rng);
  REQUIRE(rel.relation.has_value());
  CHECK(rel.relation->mlp().input_dim() == 64);
  CHECK(rel.relation->mlp().output_dim() == 1);

  Rng bad_rng(1);
  CHECK_THROWS_AS(RelationModule<float>({5, 1}, bad_rng), ValidationError);
  CHECK_THROWS_AS(RelationModule<float>({4, 2}, bad_rng), ValidationError);
}

TEST_CASE("clone is independent and set_trainable freezes parameters") {
  Rng rng(26);
  ModelShape shape;
  shape.type = LearnerType::relation;
  auto model = Model<float>::create(shape, rng);
  auto copy = model.clone();
  CHECK(same_parameters(model, copy));
  copy.parameters()[0].data()[0] += 1.0f;
  CHECK_FALSE(same_parameters(model, copy));
  copy.set_trainable(false);
  for (const auto& p : copy.parameters()) CHECK_FALSE(p.requires_grad());
  for (const auto& p : model.parameters()) CHECK(p.requires_grad());
}

TEST_CASE("checkpoint round-trip is bit-exact for both learners") {
  for (auto type : {LearnerType::proto, LearnerType::relation}) {
    test::TempDir dir("ckpt");
    Rng rng(27);
    ModelShape shape;
    shape.type = type;
    shape.embed_widths = {7, 9, 5};
    shape.relation_hidden = {6, 3};
    auto model = Model<float>::create(shape, rng);
    for (auto& p : model.parameters()) {
      for (auto& v : p.data()) v = static_cast<float>(rng.normal());
    }
    save_model(dir.path(), model);
    CHECK(std::filesystem::exists(dir / "model.json"));
    const auto back = load_model(dir.path());
    CHECK(back.type == type);
    CHECK(back.embed.widths() == model.embed.widths());
    CHECK(same_parameters(back, model));
    CHECK(back.relation.has_value() == (type == LearnerType::relation));
  }
}

TEST_CASE("load_model error paths") {
  test::TempDir dir("ckpt_err");
  CHECK_THROWS_AS(load_model(dir.path()), IoError);
  Rng rng(28);
  const auto model = Model<float>::create(ModelShape{}, rng);
  save_model(dir.path(), model);
  std::filesystem::remove(dir / "embed.W1.emlt");
  CHECK_THROWS_AS(load_model(dir.path()), IoError);
  std::ofstream(dir / "model.json") << "{not json";
  CHECK_THROWS_AS(load_model(dir.path()), FormatError);
}

TEST_CASE("learner names round-trip") {
  CHECK(parse_learner_type("proto") == LearnerType::proto);
  CHECK(parse_learner_type("relation") == LearnerType::relation);
  CHECK_THROWS_AS(parse_learner_type("maml"), ValidationError);
}
