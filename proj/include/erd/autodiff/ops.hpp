#pragma once

#include <cstddef>
#include <span>

#include "erd/autodiff/tape.hpp"
#include "erd/autodiff/tensor.hpp"

namespace erd::ad {

/// Lower clamp applied to q inside kl_divergence.
inline constexpr double kKlFloor = 1e-12;

/// x[B,D_in] * W[D_in,D_out] + b[D_out].
template <typename T>
BasicTensor<T> linear(const BasicTensor<T>& x, const BasicTensor<T>& weight,
                      const BasicTensor<T>& bias);

/// Elementwise max(0, x). Subgradient at 0 is 0.
template <typename T>
BasicTensor<T> relu(const BasicTensor<T>& x);

template <typename T>
BasicTensor<T> sigmoid(const BasicTensor<T>& x);

/// Softmax over the last axis (the whole vector for rank 1, each row for
/// rank 2), with max subtraction.
template <typename T>
BasicTensor<T> softmax(const BasicTensor<T>& logits);

template <typename T>
BasicTensor<T> log_softmax(const BasicTensor<T>& logits);

/// sum_i p_i log(p_i / max(q_i, 1e-12)), summed over rows for rank 2.
/// Terms with p_i = 0 contribute 0. p is treated as a constant.
template <typename T>
BasicTensor<T> kl_divergence(const BasicTensor<T>& p, const BasicTensor<T>& q);

/// Mean of squared elementwise differences.
template <typename T>
BasicTensor<T> mse(const BasicTensor<T>& a, const BasicTensor<T>& b);

/// out[i,j] = ||a_i - b_j||^2 for a[n,D], b[m,D].
template <typename T>
BasicTensor<T> squared_distances(const BasicTensor<T>& a, const BasicTensor<T>& b);

/// Mean of the rows of x[n,D] assigned to each of n_groups groups.
template <typename T>
BasicTensor<T> segment_mean(const BasicTensor<T>& x, std::span<const std::size_t> group_of_row,
                            std::size_t n_groups);

/// Row q*|S| + s is [support_s, query_q] for support[|S|,D], query[|Q|,D].
template <typename T>
BasicTensor<T> pair_concat(const BasicTensor<T>& support, const BasicTensor<T>& query);

/// -sum_i log_probs[i, target_i].
template <typename T>
BasicTensor<T> nll_sum(const BasicTensor<T>& log_probs, std::span<const std::size_t> targets);

template <typename T>
BasicTensor<T> sum(const BasicTensor<T>& x);

template <typename T>
BasicTensor<T> scale(const BasicTensor<T>& x, double factor);

template <typename T>
BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b);

template <typename T>
BasicTensor<T> sub(const BasicTensor<T>& a, const BasicTensor<T>& b);

/// Same data viewed with a new shape of equal element count.
template <typename T>
BasicTensor<T> reshape(const BasicTensor<T>& x, Shape shape);

}  // namespace erd::ad
