#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "erd/autodiff/tensor.hpp"
#include "erd/data/dataset.hpp"
#include "erd/learners/networks.hpp"
#include "erd/rng.hpp"
#include "erd/sampler/episode.hpp"

namespace erd::test {

// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("erd_" + tag + "_" + std::to_string(::getpid()) + "_" +
             std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

template <typename T>
ad::BasicTensor<T> random_tensor(ad::Shape shape, Rng& rng, double scale = 1.0,
                                 bool requires_grad = true) {
  std::vector<T> values(ad::element_count(shape));
  for (auto& v : values) v = static_cast<T>(scale * rng.normal());
  return ad::BasicTensor<T>(std::move(shape), std::move(values), requires_grad);
}

inline data::FeatureMatrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng,
                                         double scale = 1.0) {
  data::FeatureMatrix m(rows, cols);
  for (auto& v : m.values) v = static_cast<float>(scale * rng.normal());
  return m;
}

// Episode over hand-made rows. Class k owns support rows [k*K, (k+1)*K) and
// query rows [k*Q, (k+1)*Q).
inline sampler::Episode make_episode(std::size_t n, std::size_t k, std::size_t q,
                                     const data::FeatureMatrix& support,
                                     const data::FeatureMatrix& query,
                                     sampler::EpisodeKind kind = sampler::EpisodeKind::standard) {
  sampler::Episode e;
  e.kind = kind;
  e.spec = {n, k, q};
  e.support_x = support;
  e.query_x = query;
  for (std::size_t c = 0; c < n; ++c) {
    e.class_ids.push_back(static_cast<int>(c));
    for (std::size_t i = 0; i < k; ++i) {
      e.support.push_back({{static_cast<int>(c), data::Split::train, c * k + i}, c, 1});
    }
    for (std::size_t i = 0; i < q; ++i) {
      e.query.push_back({{static_cast<int>(c), data::Split::train, 1000 + c * q + i}, c, 1});
    }
  }
  return e;
}

inline sampler::Episode random_episode(std::size_t n, std::size_t k, std::size_t q,
                                       std::size_t dim, Rng& rng,
                                       sampler::EpisodeKind kind = sampler::EpisodeKind::standard) {
  auto s = random_matrix(n * k, dim, rng);
  auto qx = random_matrix(n * q, dim, rng);
  return make_episode(n, k, q, s, qx, kind);
}

// Mlp with given row-major [in, out] weights and biases per layer.
template <typename T>
learners::Mlp<T> fixed_mlp(std::vector<std::size_t> widths, std::vector<std::vector<T>> w,
                           std::vector<std::vector<T>> b) {
  std::vector<ad::BasicTensor<T>> weights, biases;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    weights.emplace_back(ad::Shape{widths[l], widths[l + 1]}, w[l], true);
    biases.emplace_back(ad::Shape{widths[l + 1]}, b[l], true);
  }
  return learners::Mlp<T>(widths, weights, biases);
}

}  // namespace erd::test
