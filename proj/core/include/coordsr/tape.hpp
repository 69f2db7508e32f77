#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "coordsr/tensor.hpp"

namespace coordsr {

class Tape;

/// Handle to a value recorded on a Tape. Cheap to copy; valid while the
/// tape lives.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  Tape& tape() const { return *tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Dynamic reverse-mode record. Ops append entries in execution order, so
/// every entry's inputs precede it. A tape supports exactly one backward.
class Tape {
 public:
  /// Receives the gradient of the entry's output; pushes contributions into
  /// its inputs via accumulate()/grad_accumulator().
  using BackwardFn = std::function<void(Tape&, const Tensor& grad_out)>;

  struct Entry {
    std::string op;
    std::vector<std::size_t> inputs;
    std::size_t output = 0;
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Leaf holding `value`; gradients are tracked iff value.requires_grad().
  Var leaf(Tensor value);
  Var constant(Tensor value);

  /// Appends an op result. `fn` is dropped when no input needs a gradient.
  /// Throws NumericError if `value` holds NaN/Inf.
  Var record(std::string_view op, Tensor value, const std::vector<Var>& inputs,
             BackwardFn fn);

  const Tensor& value(Var v) const;
  bool needs_grad(Var v) const;

  bool has_grad(Var v) const;
  const Tensor& grad(Var v) const;

  /// Zero-initialized (on first use) gradient buffer of `v`, for backward
  /// functions that accumulate in place.
  Tensor& grad_accumulator(Var v);
  void accumulate(Var v, const Tensor& g);

  void backward(Var loss);

  bool consumed() const { return consumed_; }
  std::size_t size() const { return nodes_.size(); }
  std::vector<Entry> entries() const;

 private:
  struct Node {
    std::string op;
    Tensor value;
    Tensor grad;
    bool has_grad = false;
    bool needs_grad = false;
    bool is_leaf = false;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
  };

  Node& node(Var v);
  const Node& node(Var v) const;
  void check_open(std::string_view what) const;

  std::deque<Node> nodes_;
  bool consumed_ = false;
};

}  // namespace coordsr
