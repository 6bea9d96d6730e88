#pragma once

#include <span>

#include "erd/learners/networks.hpp"
#include "erd/sampler/episode.hpp"

namespace erd::learners {

template <typename T>
struct EpisodeEmbeddings {
  BasicTensor<T> support;  // [N*K, E]
  BasicTensor<T> query;    // [N*K^Q, E]
};

template <typename T>
EpisodeEmbeddings<T> embed_episode(const EmbeddingNet<T>& net, const sampler::Episode& episode);

// ---- ProtoNet ------------------------------------------------------------

/// c_k = mean of the support embeddings labelled k. Throws ValidationError
/// if some class has no support row.
template <typename T>
BasicTensor<T> compute_prototypes(const BasicTensor<T>& support_embeddings,
                                  std::span<const std::size_t> labels, std::size_t n_way);

/// -||q - c_k||^2 for every query row and prototype: [n_query, N].
template <typename T>
BasicTensor<T> proto_logits(const BasicTensor<T>& prototypes, const BasicTensor<T>& query_embeddings);

/// p(y = k | q): softmax of proto_logits over k, one row per query.
template <typename T>
BasicTensor<T> proto_classify(const BasicTensor<T>& prototypes,
                              const BasicTensor<T>& query_embeddings);

/// Class probabilities for every query row of the episode under `net`.
template <typename T>
BasicTensor<T> proto_probabilities(const EmbeddingNet<T>& net, const sampler::Episode& episode);

/// -sum over query rows of log p(true class). A sum, not a mean.
template <typename T>
BasicTensor<T> proto_meta_loss(const EmbeddingNet<T>& net, const sampler::Episode& episode);

// ---- RelationNet ---------------------------------------------------------

/// scores[q, s] = g(concat(f(x_s), f(x_q))), shape [n_query, n_support].
template <typename T>
BasicTensor<T> relation_scores(const EmbeddingNet<T>& net, const RelationModule<T>& head,
                               const sampler::Episode& episode);

template <typename T>
BasicTensor<T> relation_scores_from_embeddings(const RelationModule<T>& head,
                                               const BasicTensor<T>& support_embeddings,
                                               const BasicTensor<T>& query_embeddings);

/// 1 where the support and query rows share a class, else 0: [n_query, n_support].
template <typename T>
BasicTensor<T> relation_targets(const sampler::Episode& episode);

/// sum over (support, query) pairs of (score - 1[y = y'])^2.
template <typename T>
BasicTensor<T> relation_meta_loss(const EmbeddingNet<T>& net, const RelationModule<T>& head,
                                  const sampler::Episode& episode);

/// Meta loss for whichever learner the model is.
template <typename T>
BasicTensor<T> meta_loss(const Model<T>& model, const sampler::Episode& episode);

}  // namespace erd::learners
