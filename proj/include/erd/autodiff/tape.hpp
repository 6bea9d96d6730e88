#pragma once

#include <functional>
#include <vector>

#include "erd/autodiff/tensor.hpp"

namespace erd::ad {

/// Ordered record of differentiable operations.
///
/// Operations record themselves into the tape that is active on the calling
/// thread (see TapeScope) when at least one input requires a gradient.
/// Without an active tape every operation is a plain forward evaluation.
template <typename T>
class Tape {
 public:
  using BackwardFn = std::function<void()>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  void record(BackwardFn fn) { nodes_.push_back(std::move(fn)); }

  /// Seeds d(loss)/d(loss) = 1 and replays the recorded rules in reverse.
  void backward(BasicTensor<T> loss) {
    if (loss.size() != 1) throw DimensionError("backward() needs a scalar loss");
    if (!loss.requires_grad()) return;
    loss.mutable_grad()[0] += T(1);
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
  }

  std::size_t size() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }

  static Tape*& active() {
    thread_local Tape* current = nullptr;
    return current;
  }

 private:
  std::vector<BackwardFn> nodes_;
};

/// Makes a tape the recording target for the current thread.
template <typename T>
class TapeScope {
 public:
  explicit TapeScope(Tape<T>& tape) : previous_(Tape<T>::active()) {
    Tape<T>::active() = &tape;
  }
  ~TapeScope() { Tape<T>::active() = previous_; }
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape<T>* previous_;
};

/// Suspends recording for the current thread.
template <typename T>
class NoGradScope {
 public:
  NoGradScope() : previous_(Tape<T>::active()) { Tape<T>::active() = nullptr; }
  ~NoGradScope() { Tape<T>::active() = previous_; }
  NoGradScope(const NoGradScope&) = delete;
  NoGradScope& operator=(const NoGradScope&) = delete;

 private:
  Tape<T>* previous_;
};

}  // namespace erd::ad
