#include "erd/learners/episodic.hpp"

#include "erd/autodiff/ops.hpp"
#include "erd/errors.hpp"

namespace erd::learners {

template <typename T>
EpisodeEmbeddings<T> embed_episode(const EmbeddingNet<T>& net, const sampler::Episode& episode) {
  return {net.forward(to_tensor<T>(episode.support_x)), net.forward(to_tensor<T>(episode.query_x))};
}

template <typename T>
BasicTensor<T> compute_prototypes(const BasicTensor<T>& support_embeddings,
                                  std::span<const std::size_t> labels, std::size_t n_way) {
  return ad::segment_mean(support_embeddings, labels, n_way);
}

template <typename T>
BasicTensor<T> proto_logits(const BasicTensor<T>& prototypes,
                            const BasicTensor<T>& query_embeddings) {
  if (prototypes.rank() != 2 || prototypes.dim(0) == 0) {
    throw ValidationError("proto_logits: prototype set is empty");
  }
  return ad::scale(ad::squared_distances(query_embeddings, prototypes), -1.0);
}

template <typename T>
BasicTensor<T> proto_classify(const BasicTensor<T>& prototypes,
                              const BasicTensor<T>& query_embeddings) {
  return ad::softmax(proto_logits(prototypes, query_embeddings));
}

template <typename T>
BasicTensor<T> proto_probabilities(const EmbeddingNet<T>& net, const sampler::Episode& episode) {
  const auto emb = embed_episode(net, episode);
  const auto labels = episode.support_labels();
  const auto prototypes = compute_prototypes(emb.support, labels, episode.spec.n_way);
  return proto_classify(prototypes, emb.query);
}

template <typename T>
BasicTensor<T> proto_meta_loss(const EmbeddingNet<T>& net, const sampler::Episode& episode) {
  const auto emb = embed_episode(net, episode);
  const auto support_labels = episode.support_labels();
  const auto query_labels = episode.query_labels();
  const auto prototypes = compute_prototypes(emb.support, support_labels, episode.spec.n_way);
  return ad::nll_sum(ad::log_softmax(proto_logits(prototypes, emb.query)), query_labels);
}

template <typename T>
BasicTensor<T> relation_scores_from_embeddings(const RelationModule<T>& head,
                                               const BasicTensor<T>& support_embeddings,
                                               const BasicTensor<T>& query_embeddings) {
  const std::size_t ns = support_embeddings.dim(0);
  const std::size_t nq = query_embeddings.dim(0);
  auto pairs = ad::pair_concat(support_embeddings, query_embeddings);
  return ad::reshape(head.forward(pairs), {nq, ns});
}

template <typename T>
BasicTensor<T> relation_scores(const EmbeddingNet<T>& net, const RelationModule<T>& head,
                               const sampler::Episode& episode) {
  const auto emb = embed_episode(net, episode);
  return relation_scores_from_embeddings(head, emb.support, emb.query);
}

template <typename T>
BasicTensor<T> relation_targets(const sampler::Episode& episode) {
  const std::size_t ns = episode.support.size();
  const std::size_t nq = episode.query.size();
  auto targets = BasicTensor<T>::zeros({nq, ns});
  for (std::size_t q = 0; q < nq; ++q) {
    for (std::size_t s = 0; s < ns; ++s) {
      if (episode.query[q].label == episode.support[s].label) targets.at(q * ns + s) = T(1);
    }
  }
  return targets;
}

template <typename T>
BasicTensor<T> relation_meta_loss(const EmbeddingNet<T>& net, const RelationModule<T>& head,
                                  const sampler::Episode& episode) {
  const auto scores = relation_scores(net, head, episode);
  const auto targets = relation_targets<T>(episode);
  return ad::scale(ad::mse(scores, targets), static_cast<double>(scores.size()));
}

template <typename T>
BasicTensor<T> meta_loss(const Model<T>& model, const sampler::Episode& episode) {
  if (model.type == LearnerType::proto) return proto_meta_loss(model.embed, episode);
  if (!model.relation) throw PreconditionError("relation learner without a relation module");
  return relation_meta_loss(model.embed, *model.relation, episode);
}

#define ERD_INSTANTIATE_EPISODIC(T)                                                            \
  template EpisodeEmbeddings<T> embed_episode(const EmbeddingNet<T>&, const sampler::Episode&); \
  template BasicTensor<T> compute_prototypes(const BasicTensor<T>&, std::span<const std::size_t>, \
                                             std::size_t);                                     \
  template BasicTensor<T> proto_logits(const BasicTensor<T>&, const BasicTensor<T>&);          \
  template BasicTensor<T> proto_classify(const BasicTensor<T>&, const BasicTensor<T>&);        \
  template BasicTensor<T> proto_probabilities(const EmbeddingNet<T>&, const sampler::Episode&); \
  template BasicTensor<T> proto_meta_loss(const EmbeddingNet<T>&, const sampler::Episode&);    \
  template BasicTensor<T> relation_scores(const EmbeddingNet<T>&, const RelationModule<T>&,    \
                                          const sampler::Episode&);                            \
  template BasicTensor<T> relation_scores_from_embeddings(                                     \
      const RelationModule<T>&, const BasicTensor<T>&, const BasicTensor<T>&);                 \
  template BasicTensor<T> relation_targets<T>(const sampler::Episode&);                        \
  template BasicTensor<T> relation_meta_loss(const EmbeddingNet<T>&, const RelationModule<T>&, \
                                             const sampler::Episode&);                         \
  template BasicTensor<T> meta_loss(const Model<T>&, const sampler::Episode&);

ERD_INSTANTIATE_EPISODIC(float)
ERD_INSTANTIATE_EPISODIC(double)

#undef ERD_INSTANTIATE_EPISODIC

}  // namespace erd::learners
