#pragma once

#include <optional>
#include <string_view>
#include <vector>

#include "erd/autodiff/tensor.hpp"
#include "erd/data/dataset.hpp"
#include "erd/rng.hpp"

namespace erd::learners {

using ad::BasicTensor;

enum class LearnerType { proto, relation };

std::string_view to_string(LearnerType type);
LearnerType parse_learner_type(std::string_view text);

/// Copies a feature block into a tensor without gradient tracking.
template <typename T>
BasicTensor<T> to_tensor(const data::FeatureMatrix& matrix);

/// Fully connected stack: widths[0] -> widths[1] -> ... with relu between
/// layers and no activation after the last one.
///
/// Weights are W[in,out] initialised uniform(-a, a), a = sqrt(6/(in+out));
/// biases start at zero.
template <typename T>
class Mlp {
 public:
  Mlp() = default;
  Mlp(std::vector<std::size_t> widths, Rng& rng);
  /// Wraps existing parameter tensors (checkpoint loading).
  Mlp(std::vector<std::size_t> widths, std::vector<BasicTensor<T>> weights,
      std::vector<BasicTensor<T>> biases);

  BasicTensor<T> forward(const BasicTensor<T>& x) const;

  const std::vector<std::size_t>& widths() const { return widths_; }
  std::size_t input_dim() const { return widths_.front(); }
  std::size_t output_dim() const { return widths_.back(); }
  std::size_t n_layers() const { return weights_.size(); }

  /// W0, b0, W1, b1, ... sharing storage with the network.
  std::vector<BasicTensor<T>> parameters() const;
  const BasicTensor<T>& weight(std::size_t layer) const { return weights_.at(layer); }
  const BasicTensor<T>& bias(std::size_t layer) const { return biases_.at(layer); }

  Mlp clone() const;
  void set_trainable(bool trainable);

  template <typename U>
  Mlp<U> cast() const;

 private:
  std::vector<std::size_t> widths_;
  std::vector<BasicTensor<T>> weights_;
  std::vector<BasicTensor<T>> biases_;
};

template <typename T>
template <typename U>
Mlp<U> Mlp<T>::cast() const {
  std::vector<BasicTensor<U>> weights;
  std::vector<BasicTensor<U>> biases;
  for (const auto& w : weights_) weights.push_back(w.template cast<U>());
  for (const auto& b : biases_) biases.push_back(b.template cast<U>());
  return Mlp<U>(widths_, std::move(weights), std::move(biases));
}

/// f_theta: feature vector -> embedding.
template <typename T>
using EmbeddingNet = Mlp<T>;

/// g_phi: concatenated (support, query) embedding pair -> score in (0, 1).
template <typename T>
class RelationModule {
 public:
  RelationModule() = default;
  /// widths[0] must be twice the embedding width and widths.back() must be 1.
  RelationModule(std::vector<std::size_t> widths, Rng& rng);
  explicit RelationModule(Mlp<T> mlp);

  /// pairs[P, 2E] -> scores[P, 1].
  BasicTensor<T> forward(const BasicTensor<T>& pairs) const;

  const Mlp<T>& mlp() const { return mlp_; }
  std::vector<BasicTensor<T>> parameters() const { return mlp_.parameters(); }
  RelationModule clone() const { return RelationModule(mlp_.clone()); }
  void set_trainable(bool trainable) { mlp_.set_trainable(trainable); }

  template <typename U>
  RelationModule<U> cast() const {
    return RelationModule<U>(mlp_.template cast<U>());
  }

 private:
  Mlp<T> mlp_;
};

struct ModelShape {
  LearnerType type = LearnerType::proto;
  std::vector<std::size_t> embed_widths{32, 64, 64, 32};
  std::vector<std::size_t> relation_hidden{32};
};

/// Episodic learner: embedding network, plus a relation head for RelationNet.
template <typename T>
struct Model {
  LearnerType type = LearnerType::proto;
  EmbeddingNet<T> embed;
  std::optional<RelationModule<T>> relation;

  static Model create(const ModelShape& shape, Rng& rng);

  std::vector<BasicTensor<T>> parameters() const;
  /// Deep copy; the copy keeps the trainable flags of this model.
  Model clone() const;
  void set_trainable(bool trainable);

  template <typename U>
  Model<U> cast() const {
    Model<U> out;
    out.type = type;
    out.embed = embed.template cast<U>();
    if (relation) out.relation = relation->template cast<U>();
    return out;
  }
};

/// Bitwise equality of all parameter values.
template <typename T>
bool same_parameters(const Model<T>& a, const Model<T>& b);

}  // namespace erd::learners
