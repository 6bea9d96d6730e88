#pragma once

#include <cstdint>

#include "erd/data/dataset.hpp"

namespace erd::data {

/// Gaussian class clusters whose means lie on a sphere.
struct SyntheticSpec {
  std::size_t n_classes = 60;
  std::size_t dim = 32;
  std::size_t per_class_train = 100;
  std::size_t per_class_test = 40;
  double mean_radius = 3.0;
  double noise_sigma = 0.5;
  std::uint64_t seed = 1;

  void validate() const;
};

/// Class c (id c, in order) draws its mean as a normalised Gaussian vector
/// scaled to mean_radius, then per_class_train + per_class_test samples
/// mean + noise_sigma * N(0, I). Rows are shuffled and the first
/// per_class_train become the train split. One generator, seeded by
/// spec.seed, is consumed in exactly that order.
Dataset generate_synthetic(const SyntheticSpec& spec);

}  // namespace erd::data
