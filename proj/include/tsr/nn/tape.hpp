#pragma once

#include "tsr/core.hpp"

#include <deque>
#include <functional>
#include <utility>
#include <vector>

namespace tsr::nn {

// Records executed layer applications and replays them in reverse.
// Node storage is a deque so references to earlier values stay valid while
// later nodes are appended.
template <typename S>
class Tape {
 public:
  struct Var {
    std::size_t id = 0;
  };
  using BackwardFn = std::function<void(Tape&, std::size_t out)>;

  explicit Tape(bool recording = true) : recording_(recording) {}

  bool recording() const { return recording_; }

  Var leaf(FeatureSequence<S> value) {
    nodes_.push_back(Node{std::move(value), {}});
    return Var{nodes_.size() - 1};
  }

  Var record(FeatureSequence<S> value, BackwardFn fn) {
    nodes_.push_back(Node{std::move(value), {}});
    const std::size_t id = nodes_.size() - 1;
    if (recording_) ops_.push_back(Op{id, std::move(fn)});
    return Var{id};
  }

  const FeatureSequence<S>& value(Var v) const { return nodes_.at(v.id).value; }
  const FeatureSequence<S>& value(std::size_t id) const { return nodes_.at(id).value; }

  bool has_grad(std::size_t id) const { return nodes_.at(id).grad.size() != 0; }

  // Zero-initialized on first access.
  FeatureSequence<S>& grad(std::size_t id) {
    auto& n = nodes_.at(id);
    if (n.grad.size() == 0) n.grad = FeatureSequence<S>::Zero(n.value.rows(), n.value.cols());
    return n.grad;
  }
  FeatureSequence<S>& grad(Var v) { return grad(v.id); }

  void backward(Var out, const FeatureSequence<S>& out_grad) {
    if (!recording_) throw StateError("backward on a non-recording tape");
    const auto& v = value(out);
    if (v.rows() != out_grad.rows() || v.cols() != out_grad.cols())
      throw DimensionError("backward: output grad " + shape_str(out_grad.rows(), out_grad.cols()) +
                           " does not match output " + shape_str(v.rows(), v.cols()));
    grad(out) += out_grad;
    for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) {
      if (!has_grad(it->out)) continue;
      it->fn(*this, it->out);
    }
  }

  std::size_t num_nodes() const { return nodes_.size(); }

 private:
  struct Node {
    FeatureSequence<S> value;
    FeatureSequence<S> grad;
  };
  struct Op {
    std::size_t out;
    BackwardFn fn;
  };
  bool recording_;
  std::deque<Node> nodes_;
  std::vector<Op> ops_;
};

}  // namespace tsr::nn
