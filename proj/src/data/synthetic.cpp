#include "erd/data/synthetic.hpp"

#include <cmath>
#include <numeric>

#include "erd/errors.hpp"
#include "erd/rng.hpp"

namespace erd::data {

void SyntheticSpec::validate() const {
  if (n_classes < 2) throw ValidationError("synthetic spec: n_classes must be >= 2");
  if (dim < 1) throw ValidationError("synthetic spec: dim must be >= 1");
  if (per_class_train < 1 || per_class_test < 1) {
    throw ValidationError("synthetic spec: each split needs at least one row per class");
  }
  if (!(noise_sigma > 0.0) || !std::isfinite(noise_sigma)) {
    throw ValidationError("synthetic spec: noise_sigma must be > 0");
  }
  if (!(mean_radius >= 0.0) || !std::isfinite(mean_radius)) {
    throw ValidationError("synthetic spec: mean_radius must be finite and >= 0");
  }
}

Dataset generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  const std::size_t total = spec.per_class_train + spec.per_class_test;
  Dataset classes;
  classes.reserve(spec.n_classes);
  for (std::size_t c = 0; c < spec.n_classes; ++c) {
    std::vector<double> mean(spec.dim);
    double norm = 0.0;
    while (norm == 0.0) {
      for (auto& m : mean) m = rng.normal();
      norm = std::sqrt(std::inner_product(mean.begin(), mean.end(), mean.begin(), 0.0));
    }
    for (auto& m : mean) m *= spec.mean_radius / norm;

    FeatureMatrix samples(total, spec.dim);
    for (std::size_t r = 0; r < total; ++r) {
      auto row = samples.row(r);
      for (std::size_t k = 0; k < spec.dim; ++k) {
        row[k] = static_cast<float>(mean[k] + spec.noise_sigma * rng.normal());
      }
    }
    std::vector<std::size_t> order(total);
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(order);

    ClassData cls;
    cls.id = static_cast<int>(c);
    cls.train = FeatureMatrix(spec.per_class_train, spec.dim);
    cls.test = FeatureMatrix(spec.per_class_test, spec.dim);
    for (std::size_t r = 0; r < total; ++r) {
      auto src = samples.row(order[r]);
      auto dst = r < spec.per_class_train ? cls.train.row(r)
                                          : cls.test.row(r - spec.per_class_train);
      std::copy(src.begin(), src.end(), dst.begin());
    }
    classes.push_back(std::move(cls));
  }
  return classes;
}

}  // namespace erd::data
