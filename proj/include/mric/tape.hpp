#pragma once

#include <cstdint>
#include <functional>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "mric/tensor.hpp"

namespace mric {

/// Gradients keyed by tensor id. Lookups of tensors that never received a
/// gradient yield zeros of the right length.
template <typename T>
class Gradients {
 public:
  void accumulate(const BasicTensor<T>& t, std::span<const T> g) {
    auto& slot = slot_for(t);
    for (std::size_t i = 0; i < g.size(); ++i) slot[i] += g[i];
  }

  /// Mutable buffer for `t`, zero-initialized on first touch.
  std::vector<T>& slot_for(const BasicTensor<T>& t) {
    auto [it, inserted] = grads_.try_emplace(t.id());
    if (inserted) it->second.assign(t.numel(), T{0});
    return it->second;
  }

  bool contains(const BasicTensor<T>& t) const { return grads_.count(t.id()) != 0; }

  std::vector<T> get(const BasicTensor<T>& t) const {
    auto it = grads_.find(t.id());
    if (it == grads_.end()) return std::vector<T>(t.numel(), T{0});
    return it->second;
  }

  const std::vector<T>* find(std::uint64_t id) const {
    auto it = grads_.find(id);
    return it == grads_.end() ? nullptr : &it->second;
  }

  void seed(std::uint64_t id, std::vector<T> g) { grads_[id] = std::move(g); }

 private:
  std::unordered_map<std::uint64_t, std::vector<T>> grads_;
};

/// Ordered record of differentiable operations for one reverse sweep.
///
/// Nodes are appended as operations execute, so inputs always precede the
/// node that consumes them. A tape belongs to a single thread.
template <typename T>
class GradTape {
 public:
  // Receives d(loss)/d(output) and accumulates into the inputs' slots.
  using Rule = std::function<void(std::span<const T> grad_out, Gradients<T>& grads)>;

  struct Node {
    std::vector<BasicTensor<T>> inputs;
    std::uint64_t output;
    Rule rule;
  };

  void record(std::vector<BasicTensor<T>> inputs, BasicTensor<T>& output, Rule rule) {
    output.set_requires_grad(true);
    output.mark_non_leaf();
    nodes_.push_back(Node{std::move(inputs), output.id(), std::move(rule)});
  }

  const std::vector<Node>& nodes() const { return nodes_; }
  std::size_t size() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }

 private:
  std::vector<Node> nodes_;
};

/// True when `tape` is live and some input participates in differentiation.
template <typename T>
bool should_record(const GradTape<T>* tape,
                   std::initializer_list<const BasicTensor<T>*> inputs) {
  if (tape == nullptr) return false;
  for (auto* t : inputs) {
    if (t->requires_grad()) return true;
  }
  return false;
}

/// Reverse sweep from a scalar loss. Leaf inputs that require gradients get
/// their `grad` overwritten; the full map is returned. Replaying the same
/// tape yields identical results because the tape is not consumed.
template <typename T>
Gradients<T> backward(const BasicTensor<T>& loss, const GradTape<T>& tape) {
  if (!loss.defined() || loss.numel() != 1) {
    throw ShapeError("backward requires a scalar loss");
  }
  if (!std::isfinite(static_cast<double>(loss.item()))) {
    throw NumericError("backward on non-finite loss");
  }
  const auto& nodes = tape.nodes();
  std::size_t last = nodes.size();
  for (std::size_t i = nodes.size(); i-- > 0;) {
    if (nodes[i].output == loss.id()) {
      last = i;
      break;
    }
  }
  if (last == nodes.size()) {
    throw DisconnectedGraphError("loss was not produced through this tape");
  }

  Gradients<T> grads;
  grads.seed(loss.id(), std::vector<T>{T{1}});
  for (std::size_t i = last + 1; i-- > 0;) {
    const auto& node = nodes[i];
    const auto* g = grads.find(node.output);
    if (g == nullptr) continue;
    // Rules may insert new slots; copy so the span stays valid.
    const std::vector<T> grad_out = *g;
    node.rule(grad_out, grads);
  }

  std::unordered_set<std::uint64_t> seen;
  for (const auto& node : nodes) {
    for (auto input : node.inputs) {
      if (input.is_leaf() && input.requires_grad() && seen.insert(input.id()).second) {
        input.set_grad(grads.get(input));
      }
    }
  }
  return grads;
}

}  // namespace mric
