#include "erd/autodiff/ops.hpp"

#include <algorithm>
#include <cmath>
#include <initializer_list>
#include <limits>

namespace erd::ad {

std::string shape_string(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

namespace {

template <typename T>
Tape<T>* recording_tape(std::initializer_list<const BasicTensor<T>*> inputs) {
  Tape<T>* tape = Tape<T>::active();
  if (tape == nullptr) return nullptr;
  for (const auto* input : inputs) {
    if (input->requires_grad()) return tape;
  }
  return nullptr;
}

template <typename T>
void require_rank(const BasicTensor<T>& x, std::size_t rank, const char* op) {
  if (!x.defined() || x.rank() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " +
                         std::to_string(rank) + " tensor, got " +
                         (x.defined() ? shape_string(x.shape()) : "undefined"));
  }
}

template <typename T>
void require_same_shape(const BasicTensor<T>& a, const BasicTensor<T>& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " +
                         shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  }
}

// Rows and width of the last axis; rank 1 is a single row.
template <typename T>
std::pair<std::size_t, std::size_t> row_view(const BasicTensor<T>& x, const char* op) {
  if (x.rank() == 1) return {1, x.dim(0)};
  if (x.rank() == 2) return {x.dim(0), x.dim(1)};
  throw DimensionError(std::string(op) + ": expected rank 1 or 2, got " +
                       shape_string(x.shape()));
}

}  // namespace

template <typename T>
BasicTensor<T> linear(const BasicTensor<T>& x, const BasicTensor<T>& weight,
                      const BasicTensor<T>& bias) {
  require_rank(x, 2, "linear");
  require_rank(weight, 2, "linear");
  require_rank(bias, 1, "linear");
  const std::size_t batch = x.dim(0);
  const std::size_t in = x.dim(1);
  const std::size_t out_dim = weight.dim(1);
  if (weight.dim(0) != in || bias.dim(0) != out_dim) {
    throw DimensionError("linear: x " + shape_string(x.shape()) + ", W " +
                         shape_string(weight.shape()) + ", b " +
                         shape_string(bias.shape()) + " do not conform");
  }
  auto out = BasicTensor<T>::zeros({batch, out_dim});
  {
    const T* xs = x.data().data();
    const T* ws = weight.data().data();
    const T* bs = bias.data().data();
    T* os = out.data().data();
    for (std::size_t i = 0; i < batch; ++i) {
      T* row = os + i * out_dim;
      std::copy(bs, bs + out_dim, row);
      for (std::size_t k = 0; k < in; ++k) {
        const T xv = xs[i * in + k];
        const T* wrow = ws + k * out_dim;
        for (std::size_t j = 0; j < out_dim; ++j) row[j] += xv * wrow[j];
      }
    }
  }
  if (auto* tape = recording_tape<T>({&x, &weight, &bias})) {
    out.set_requires_grad(true);
    tape->record([x, weight, bias, out, batch, in, out_dim]() mutable {
      if (!out.has_grad()) return;
      const T* gy = out.grad().data();
      if (x.requires_grad()) {
        T* gx = x.mutable_grad().data();
        const T* ws = weight.data().data();
        for (std::size_t i = 0; i < batch; ++i) {
          for (std::size_t k = 0; k < in; ++k) {
            const T* wrow = ws + k * out_dim;
            const T* grow = gy + i * out_dim;
            T acc = 0;
            for (std::size_t j = 0; j < out_dim; ++j) acc += grow[j] * wrow[j];
            gx[i * in + k] += acc;
          }
        }
      }
      if (weight.requires_grad()) {
        T* gw = weight.mutable_grad().data();
        const T* xs = x.data().data();
        for (std::size_t i = 0; i < batch; ++i) {
          const T* grow = gy + i * out_dim;
          for (std::size_t k = 0; k < in; ++k) {
            const T xv = xs[i * in + k];
            T* gwrow = gw + k * out_dim;
            for (std::size_t j = 0; j < out_dim; ++j) gwrow[j] += xv * grow[j];
          }
        }
      }
      if (bias.requires_grad()) {
        T* gb = bias.mutable_grad().data();
        for (std::size_t i = 0; i < batch; ++i) {
          for (std::size_t j = 0; j < out_dim; ++j) gb[j] += gy[i * out_dim + j];
        }
      }
    });
  }
  return out;
}

template <typename T>
BasicTensor<T> relu(const BasicTensor<T>& x) {
  auto out = BasicTensor<T>::zeros(x.shape());
  auto xs = x.data();
  auto os = out.data();
  for (std::size_t i = 0; i < xs.size(); ++i) os[i] = xs[i] > T(0) ? xs[i] : T(0);
  if (auto* tape = recording_tape<T>({&x})) {
    out.set_requires_grad(true);
    tape->record([x, out]() mutable {
      if (!out.has_grad()) return;
      auto gy = out.grad();
      auto xs = x.data();
      auto gx = x.mutable_grad();
      for (std::size_t i = 0; i < gy.size(); ++i) {
        if (xs[i] > T(0)) gx[i] += gy[i];
      }
    });
  }
  return out;
}

template <typename T>
BasicTensor<T> sigmoid(const BasicTensor<T>& x) {
  auto out = BasicTensor<T>::zeros(x.shape());
  auto xs = x.data();
  auto os = out.data();
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double v = static_cast<double>(xs[i]);
    // Branches keep exp() from overflowing for large |v|.
    os[i] = static_cast<T>(v >= 0 ? 1.0 / (1.0 + std::exp(-v))
                                  : std::exp(v) / (1.0 + std::exp(v)));
  }
  if (auto* tape = recording_tape<T>({&x})) {
    out.set_requires_grad(true);
    tape->record([x, out]() mutable {
      if (!out.has_grad()) return;
      auto gy = out.grad();
      auto ys = out.data();
      auto gx = x.mutable_grad();
      for (std::size_t i = 0; i < gy.size(); ++i) gx[i] += gy[i] * ys[i] * (T(1) - ys[i]);
    });
  }
  return out;
}

template <typename T>
BasicTensor<T> softmax(const BasicTensor<T>& logits) {
  const auto [rows, width] = row_view(logits, "softmax");
  auto out = BasicTensor<T>::zeros(logits.shape());
  auto xs = logits.data();
  auto os = out.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const T* in = xs.data() + r * width;
    T* o = os.data() + r * width;
    const double max = *std::max_element(in, in + width);
    double total = 0.0;
    for (std::size_t j = 0; j < width; ++j) total += std::exp(static_cast<double>(in[j]) - max);
    for (std::size_t j = 0; j < width; ++j) {
      o[j] = static_cast<T>(std::exp(static_cast<double>(in[j]) - max) / total);
    }
  }
  if (auto* tape = recording_tape<T>({&logits})) {
    out.set_requires_grad(true);
    tape->record([logits, out, rows, width]() mutable {
      if (!out.has_grad()) return;
      auto gy = out.grad();
      auto ys = out.data();
      auto gx = logits.mutable_grad();
      for (std::size_t r = 0; r < rows; ++r) {
        double dot = 0.0;
        for (std::size_t j = 0; j < width; ++j) {
          dot += static_cast<double>(gy[r * width + j]) * ys[r * width + j];
        }
        for (std::size_t j = 0; j < width; ++j) {
          const std::size_t idx = r * width + j;
          gx[idx] += static_cast<T>(ys[idx] * (gy[idx] - dot));
        }
      }
    });
  }
  return out;
}

template <typename T>
BasicTensor<T> log_softmax(const BasicTensor<T>& logits) {
  const auto [rows, width] = row_view(logits, "log_softmax");
  auto out = BasicTensor<T>::zeros(logits.shape());
  auto xs = logits.data();
  auto os = out.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const T* in = xs.data() + r * width;
    T* o = os.data() + r * width;
    const double max = *std::max_element(in, in + width);
    double total = 0.0;
    for (std::size_t j = 0; j < width; ++j) total += std::exp(static_cast<double>(in[j]) - max);
    const double log_total = std::log(total) + max;
    for (std::size_t j = 0; j < width; ++j) o[j] = static_cast<T>(in[j] - log_total);
  }
  if (auto* tape = recording_tape<T>({&logits})) {
    out.set_requires_grad(true);
    tape->record([logits, out, rows, width]() mutable {
      if (!out.has_grad()) return;
      auto gy = out.grad();
      auto ys = out.data();
      auto gx = logits.mutable_grad();
      for (std::size_t r = 0; r < rows; ++r) {
        double total = 0.0;
        for (std::size_t j = 0; j < width; ++j) total += gy[r * width + j];
        for (std::size_t j = 0; j < width; ++j) {
          const std::size_t idx = r * width + j;
          gx[idx] += static_cast<T>(gy[idx] - std::exp(static_cast<double>(ys[idx])) * total);
        }
      }
    });
  }
  return out;
}

template <typename T>
BasicTensor<T> kl_divergence(const BasicTensor<T>& p, const BasicTensor<T>& q) {
  require_same_shape(p, q, "kl_divergence");
  row_view(p, "kl_divergence");
  auto ps = p.data();
  auto qs = q.data();
  double total = 0.0;
  for (std::size_t i = 0; i < ps.size(); ++i) {
    if (ps[i] <= T(0)) continue;
    const double qi = std::max(static_cast<double>(qs[i]), kKlFloor);
    total += ps[i] * (std::log(static_cast<double>(ps[i])) - std::log(qi));
  }
  auto out = BasicTensor<T>::scalar(static_cast<T>(total));
  if (auto* tape = recording_tape<T>({&q})) {
    out.set_requires_grad(true);
    tape->record([p, q, out]() mutable {
      if (!out.has_grad()) return;
      const double g = out.grad()[0];
      auto ps = p.data();
      auto qs = q.data();
      auto gq = q.mutable_grad();
      for (std::size_t i = 0; i < ps.size(); ++i) {
        if (ps[i] <= T(0) || static_cast<double>(qs[i]) <= kKlFloor) continue;
        gq[i] += static_cast<T>(-g * ps[i] / static_cast<double>(qs[i]));
      }
    });
  }
  return out;
}

template <typename T>
BasicTensor<T> mse(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  require_same_shape(a, b, "mse");
  auto as = a.data();
  auto bs = b.data();
  const std::size_t n = as.size();
  if (n == 0) throw DimensionError("mse: empty tensors");
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = static_cast<double>(as[i]) - bs[i];
    total += d * d;
  }
  auto out = BasicTensor<T>::scalar(static_cast<T>(total / n));
  if (auto* tape = recording_tape<T>({&a, &b})) {
    out.set_requires_grad(true);
    tape->record([a, b, out, n]() mutable {
      if (!out.has_grad()) return;
      const double g = out.grad()[0] * 2.0 / n;
      auto as = a.data();
      auto bs = b.data();
      if (a.requires_grad()) {
        auto ga = a.mutable_grad();
        for (std::size_t i = 0; i < n; ++i) ga[i] += static_cast<T>(g * (as[i] - bs[i]));
      }
      if (b.requires_grad()) {
        auto gb = b.mutable_grad();
        for (std::size_t i = 0; i < n; ++i) gb[i] -= static_cast<T>(g * (as[i] - bs[i]));
      }
    });
  }
  return out;
}

template <typename T>
BasicTensor<T> squared_distances(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  require_rank(a, 2, "squared_distances");
  require_rank(b, 2, "squared_distances");
  if (a.dim(1) != b.dim(1)) {
    throw DimensionError("squared_distances: widths differ " + shape_string(a.shape()) +
                         " vs " + shape_string(b.shape()));
  }
  const std::size_t n = a.dim(0);
  const std::size_t m = b.dim(0);
  const std::size_t width = a.dim(1);
  auto out = BasicTensor<T>::zeros({n, m});
  const T* as = a.data().data();
  const T* bs = b.data().data();
  T* os = out.data().data();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      T acc = 0;
      for (std::size_t k = 0; k < width; ++k) {
        const T d = as[i * width + k] - bs[j * width + k];
        acc += d * d;
      }
      os[i * m + j] = acc;
    }
  }
  if (auto* tape = recording_tape<T>({&a, &b})) {
    out.set_requires_grad(true);
    tape->record([a, b, out, n, m, width]() mutable {
      if (!out.has_grad()) return;
      const T* gy = out.grad().data();
      const T* as = a.data().data();
      const T* bs = b.data().data();
      T* ga = a.requires_grad() ? a.mutable_grad().data() : nullptr;
      T* gb = b.requires_grad() ? b.mutable_grad().data() : nullptr;
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
          const T g = T(2) * gy[i * m + j];
          if (g == T(0)) continue;
          for (std::size_t k = 0; k < width; ++k) {
            const T d = g * (as[i * width + k] - bs[j * width + k]);
            if (ga) ga[i * width + k] += d;
            if (gb) gb[j * width + k] -= d;
          }
        }
      }
    });
  }
  return out;
}

template <typename T>
BasicTensor<T> segment_mean(const BasicTensor<T>& x, std::span<const std::size_t> group_of_row,
                            std::size_t n_groups) {
  require_rank(x, 2, "segment_mean");
  const std::size_t rows = x.dim(0);
  const std::size_t width = x.dim(1);
  if (group_of_row.size() != rows) {
    throw DimensionError("segment_mean: " + std::to_string(group_of_row.size()) +
                         " group labels for " + std::to_string(rows) + " rows");
  }
  std::vector<std::size_t> counts(n_groups, 0);
  for (std::size_t g : group_of_row) {
    if (g >= n_groups) throw ValidationError("segment_mean: group label out of range");
    ++counts[g];
  }
  for (std::size_t g = 0; g < n_groups; ++g) {
    if (counts[g] == 0) {
      throw ValidationError("segment_mean: group " + std::to_string(g) + " is empty");
    }
  }
  std::vector<double> sums(n_groups * width, 0.0);
  auto xs = x.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t g = group_of_row[r];
    for (std::size_t k = 0; k < width; ++k) sums[g * width + k] += xs[r * width + k];
  }
  auto out = BasicTensor<T>::zeros({n_groups, width});
  auto os = out.data();
  for (std::size_t g = 0; g < n_groups; ++g) {
    for (std::size_t k = 0; k < width; ++k) {
      os[g * width + k] = static_cast<T>(sums[g * width + k] / counts[g]);
    }
  }
  if (auto* tape = recording_tape<T>({&x})) {
    out.set_requires_grad(true);
    std::vector<std::size_t> groups(group_of_row.begin(), group_of_row.end());
    tape->record([x, out, groups = std::move(groups), counts, width]() mutable {
      if (!out.has_grad()) return;
      auto gy = out.grad();
      auto gx = x.mutable_grad();
      for (std::size_t r = 0; r < groups.size(); ++r) {
        const std::size_t g = groups[r];
        const T inv = T(1) / static_cast<T>(counts[g]);
        for (std::size_t k = 0; k < width; ++k) gx[r * width + k] += gy[g * width + k] * inv;
      }
    });
  }
  return out;
}

template <typename T>
BasicTensor<T> pair_concat(const BasicTensor<T>& support, const BasicTensor<T>& query) {
  require_rank(support, 2, "pair_concat");
  require_rank(query, 2, "pair_concat");
  if (support.dim(1) != query.dim(1)) {
    throw DimensionError("pair_concat: widths differ " + shape_string(support.shape()) +
                         " vs " + shape_string(query.shape()));
  }
  const std::size_t ns = support.dim(0);
  const std::size_t nq = query.dim(0);
  const std::size_t width = support.dim(1);
  auto out = BasicTensor<T>::zeros({ns * nq, 2 * width});
  auto ss = support.data();
  auto qs = query.data();
  auto os = out.data();
  for (std::size_t q = 0; q < nq; ++q) {
    for (std::size_t s = 0; s < ns; ++s) {
      T* row = os.data() + (q * ns + s) * 2 * width;
      std::copy_n(ss.data() + s * width, width, row);
      std::copy_n(qs.data() + q * width, width, row + width);
    }
  }
  if (auto* tape = recording_tape<T>({&support, &query})) {
    out.set_requires_grad(true);
    tape->record([support, query, out, ns, nq, width]() mutable {
      if (!out.has_grad()) return;
      auto gy = out.grad();
      T* gs = support.requires_grad() ? support.mutable_grad().data() : nullptr;
      T* gq = query.requires_grad() ? query.mutable_grad().data() : nullptr;
      for (std::size_t q = 0; q < nq; ++q) {
        for (std::size_t s = 0; s < ns; ++s) {
          const T* row = gy.data() + (q * ns + s) * 2 * width;
          for (std::size_t k = 0; k < width; ++k) {
            if (gs) gs[s * width + k] += row[k];
            if (gq) gq[q * width + k] += row[width + k];
          }
        }
      }
    });
  }
  return out;
}

template <typename T>
BasicTensor<T> nll_sum(const BasicTensor<T>& log_probs, std::span<const std::size_t> targets) {
  require_rank(log_probs, 2, "nll_sum");
  const std::size_t rows = log_probs.dim(0);
  const std::size_t width = log_probs.dim(1);
  if (targets.size() != rows) throw DimensionError("nll_sum: one target per row required");
  double total = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    if (targets[r] >= width) throw ValidationError("nll_sum: target out of range");
    total -= log_probs.at(r, targets[r]);
  }
  auto out = BasicTensor<T>::scalar(static_cast<T>(total));
  if (auto* tape = recording_tape<T>({&log_probs})) {
    out.set_requires_grad(true);
    std::vector<std::size_t> labels(targets.begin(), targets.end());
    tape->record([log_probs, out, labels = std::move(labels), width]() mutable {
      if (!out.has_grad()) return;
      const T g = out.grad()[0];
      auto gx = log_probs.mutable_grad();
      for (std::size_t r = 0; r < labels.size(); ++r) gx[r * width + labels[r]] -= g;
    });
  }
  return out;
}

template <typename T>
BasicTensor<T> sum(const BasicTensor<T>& x) {
  double total = 0.0;
  for (T v : x.data()) total += v;
  auto out = BasicTensor<T>::scalar(static_cast<T>(total));
  if (auto* tape = recording_tape<T>({&x})) {
    out.set_requires_grad(true);
    tape->record([x, out]() mutable {
      if (!out.has_grad()) return;
      const T g = out.grad()[0];
      for (T& v : x.mutable_grad()) v += g;
    });
  }
  return out;
}

template <typename T>
BasicTensor<T> scale(const BasicTensor<T>& x, double factor) {
  auto out = BasicTensor<T>::zeros(x.shape());
  auto xs = x.data();
  auto os = out.data();
  for (std::size_t i = 0; i < xs.size(); ++i) os[i] = static_cast<T>(xs[i] * factor);
  if (auto* tape = recording_tape<T>({&x})) {
    out.set_requires_grad(true);
    tape->record([x, out, factor]() mutable {
      if (!out.has_grad()) return;
      auto gy = out.grad();
      auto gx = x.mutable_grad();
      for (std::size_t i = 0; i < gy.size(); ++i) gx[i] += static_cast<T>(gy[i] * factor);
    });
  }
  return out;
}

namespace {

template <typename T>
BasicTensor<T> add_scaled(const BasicTensor<T>& a, const BasicTensor<T>& b, T sign,
                          const char* op) {
  require_same_shape(a, b, op);
  auto out = BasicTensor<T>::zeros(a.shape());
  auto as = a.data();
  auto bs = b.data();
  auto os = out.data();
  for (std::size_t i = 0; i < as.size(); ++i) os[i] = as[i] + sign * bs[i];
  if (auto* tape = recording_tape<T>({&a, &b})) {
    out.set_requires_grad(true);
    tape->record([a, b, out, sign]() mutable {
      if (!out.has_grad()) return;
      auto gy = out.grad();
      if (a.requires_grad()) {
        auto ga = a.mutable_grad();
        for (std::size_t i = 0; i < gy.size(); ++i) ga[i] += gy[i];
      }
      if (b.requires_grad()) {
        auto gb = b.mutable_grad();
        for (std::size_t i = 0; i < gy.size(); ++i) gb[i] += sign * gy[i];
      }
    });
  }
  return out;
}

}  // namespace

template <typename T>
BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  return add_scaled(a, b, T(1), "add");
}

template <typename T>
BasicTensor<T> sub(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  return add_scaled(a, b, T(-1), "sub");
}

template <typename T>
BasicTensor<T> reshape(const BasicTensor<T>& x, Shape shape) {
  if (element_count(shape) != x.size()) {
    throw DimensionError("reshape: " + shape_string(x.shape()) + " -> " + shape_string(shape));
  }
  auto data = x.data();
  BasicTensor<T> out(std::move(shape), std::vector<T>(data.begin(), data.end()));
  if (auto* tape = recording_tape<T>({&x})) {
    out.set_requires_grad(true);
    tape->record([x, out]() mutable {
      if (!out.has_grad()) return;
      auto gy = out.grad();
      auto gx = x.mutable_grad();
      for (std::size_t i = 0; i < gy.size(); ++i) gx[i] += gy[i];
    });
  }
  return out;
}

#define ERD_INSTANTIATE_OPS(T)                                                                 \
  template BasicTensor<T> linear(const BasicTensor<T>&, const BasicTensor<T>&,                \
                                 const BasicTensor<T>&);                                      \
  template BasicTensor<T> relu(const BasicTensor<T>&);                                        \
  template BasicTensor<T> sigmoid(const BasicTensor<T>&);                                     \
  template BasicTensor<T> softmax(const BasicTensor<T>&);                                     \
  template BasicTensor<T> log_softmax(const BasicTensor<T>&);                                 \
  template BasicTensor<T> kl_divergence(const BasicTensor<T>&, const BasicTensor<T>&);        \
  template BasicTensor<T> mse(const BasicTensor<T>&, const BasicTensor<T>&);                  \
  template BasicTensor<T> squared_distances(const BasicTensor<T>&, const BasicTensor<T>&);    \
  template BasicTensor<T> segment_mean(const BasicTensor<T>&, std::span<const std::size_t>,   \
                                       std::size_t);                                          \
  template BasicTensor<T> pair_concat(const BasicTensor<T>&, const BasicTensor<T>&);          \
  template BasicTensor<T> nll_sum(const BasicTensor<T>&, std::span<const std::size_t>);       \
  template BasicTensor<T> sum(const BasicTensor<T>&);                                         \
  template BasicTensor<T> scale(const BasicTensor<T>&, double);                               \
  template BasicTensor<T> add(const BasicTensor<T>&, const BasicTensor<T>&);                  \
  template BasicTensor<T> sub(const BasicTensor<T>&, const BasicTensor<T>&);                  \
  template BasicTensor<T> reshape(const BasicTensor<T>&, Shape);

ERD_INSTANTIATE_OPS(float)
ERD_INSTANTIATE_OPS(double)

#undef ERD_INSTANTIATE_OPS

}  // namespace erd::ad
