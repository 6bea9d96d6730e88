#include "erd/learners/networks.hpp"

#include <cmath>
#include <cstring>

#include "erd/autodiff/ops.hpp"
#include "erd/errors.hpp"

namespace erd::learners {

std::string_view to_string(LearnerType type) {
  return type == LearnerType::proto ? "proto" : "relation";
}

LearnerType parse_learner_type(std::string_view text) {
  if (text == "proto") return LearnerType::proto;
  if (text == "relation") return LearnerType::relation;
  throw ValidationError("unknown learner type '" + std::string(text) + "'");
}

template <typename T>
BasicTensor<T> to_tensor(const data::FeatureMatrix& matrix) {
  return BasicTensor<T>({matrix.rows, matrix.cols},
                        std::vector<T>(matrix.values.begin(), matrix.values.end()));
}

template <typename T>
Mlp<T>::Mlp(std::vector<std::size_t> widths, Rng& rng) : widths_(std::move(widths)) {
  if (widths_.size() < 2) throw ValidationError("network needs at least one layer");
  for (std::size_t w : widths_) {
    if (w == 0) throw ValidationError("network layer widths must be >= 1");
  }
  for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
    const std::size_t in = widths_[l];
    const std::size_t out = widths_[l + 1];
    const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
    std::vector<T> values(in * out);
    for (auto& v : values) v = static_cast<T>((2.0 * rng.uniform() - 1.0) * bound);
    weights_.emplace_back(ad::Shape{in, out}, std::move(values), true);
    biases_.push_back(BasicTensor<T>::zeros({out}, true));
  }
}

template <typename T>
Mlp<T>::Mlp(std::vector<std::size_t> widths, std::vector<BasicTensor<T>> weights,
            std::vector<BasicTensor<T>> biases)
    : widths_(std::move(widths)), weights_(std::move(weights)), biases_(std::move(biases)) {
  if (widths_.size() < 2 || weights_.size() != widths_.size() - 1 ||
      biases_.size() != weights_.size()) {
    throw ValidationError("network parameters do not match its layer widths");
  }
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    if (weights_[l].shape() != ad::Shape{widths_[l], widths_[l + 1]} ||
        biases_[l].shape() != ad::Shape{widths_[l + 1]}) {
      throw DimensionError("layer " + std::to_string(l) + " parameter shapes do not match widths");
    }
  }
}

template <typename T>
BasicTensor<T> Mlp<T>::forward(const BasicTensor<T>& x) const {
  BasicTensor<T> h = x;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    h = ad::linear(h, weights_[l], biases_[l]);
    if (l + 1 < weights_.size()) h = ad::relu(h);
  }
  return h;
}

template <typename T>
std::vector<BasicTensor<T>> Mlp<T>::parameters() const {
  std::vector<BasicTensor<T>> out;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    out.push_back(weights_[l]);
    out.push_back(biases_[l]);
  }
  return out;
}

template <typename T>
Mlp<T> Mlp<T>::clone() const {
  std::vector<BasicTensor<T>> weights;
  std::vector<BasicTensor<T>> biases;
  for (const auto& w : weights_) weights.push_back(w.clone());
  for (const auto& b : biases_) biases.push_back(b.clone());
  return Mlp(widths_, std::move(weights), std::move(biases));
}

template <typename T>
void Mlp<T>::set_trainable(bool trainable) {
  for (auto& w : weights_) w.set_requires_grad(trainable);
  for (auto& b : biases_) b.set_requires_grad(trainable);
}

template <typename T>
RelationModule<T>::RelationModule(std::vector<std::size_t> widths, Rng& rng)
    : RelationModule(Mlp<T>(std::move(widths), rng)) {}

template <typename T>
RelationModule<T>::RelationModule(Mlp<T> mlp) : mlp_(std::move(mlp)) {
  if (mlp_.output_dim() != 1) throw ValidationError("relation module must output one score");
  if (mlp_.input_dim() % 2 != 0) {
    throw ValidationError("relation module input must be a concatenated embedding pair");
  }
}

template <typename T>
BasicTensor<T> RelationModule<T>::forward(const BasicTensor<T>& pairs) const {
  return ad::sigmoid(mlp_.forward(pairs));
}

template <typename T>
Model<T> Model<T>::create(const ModelShape& shape, Rng& rng) {
  Model model;
  model.type = shape.type;
  model.embed = EmbeddingNet<T>(shape.embed_widths, rng);
  if (shape.type == LearnerType::relation) {
    std::vector<std::size_t> widths{2 * model.embed.output_dim()};
    widths.insert(widths.end(), shape.relation_hidden.begin(), shape.relation_hidden.end());
    widths.push_back(1);
    model.relation = RelationModule<T>(std::move(widths), rng);
  }
  return model;
}

template <typename T>
std::vector<BasicTensor<T>> Model<T>::parameters() const {
  auto params = embed.parameters();
  if (relation) {
    auto extra = relation->parameters();
    params.insert(params.end(), extra.begin(), extra.end());
  }
  return params;
}

template <typename T>
Model<T> Model<T>::clone() const {
  Model copy;
  copy.type = type;
  copy.embed = embed.clone();
  if (relation) copy.relation = relation->clone();
  return copy;
}

template <typename T>
void Model<T>::set_trainable(bool trainable) {
  embed.set_trainable(trainable);
  if (relation) relation->set_trainable(trainable);
}

template <typename T>
bool same_parameters(const Model<T>& a, const Model<T>& b) {
  const auto pa = a.parameters();
  const auto pb = b.parameters();
  if (a.type != b.type || pa.size() != pb.size()) return false;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    if (pa[i].shape() != pb[i].shape()) return false;
    const auto da = pa[i].data();
    const auto db = pb[i].data();
    if (std::memcmp(da.data(), db.data(), da.size_bytes()) != 0) return false;
  }
  return true;
}

#define ERD_INSTANTIATE_NETWORKS(T)                                      \
  template BasicTensor<T> to_tensor<T>(const data::FeatureMatrix&);      \
  template class Mlp<T>;                                                 \
  template class RelationModule<T>;                                      \
  template struct Model<T>;                                              \
  template bool same_parameters(const Model<T>&, const Model<T>&);

ERD_INSTANTIATE_NETWORKS(float)
ERD_INSTANTIATE_NETWORKS(double)

#undef ERD_INSTANTIATE_NETWORKS

}  // namespace erd::learners
