#include "coordsr/tape.hpp"

#include "coordsr/errors.hpp"

namespace coordsr {

const Tensor& Var::value() const {
  if (!tape_) throw UsageError("value() on an unbound Var");
  return tape_->value(*this);
}

Tape::Node& Tape::node(Var v) {
  if (v.tape_ != this || v.id_ >= nodes_.size()) throw UsageError("Var does not belong to this tape");
  return nodes_[v.id_];
}

const Tape::Node& Tape::node(Var v) const {
  if (v.tape_ != this || v.id_ >= nodes_.size()) throw UsageError("Var does not belong to this tape");
  return nodes_[v.id_];
}

void Tape::check_open(std::string_view what) const {
  if (consumed_) throw UsageError(std::string(what) + " on a consumed tape");
}

Var Tape::leaf(Tensor value) {
  check_open("leaf");
  if (!value.all_finite()) throw NumericError("leaf holds non-finite values");
  Node n;
  n.op = "leaf";
  n.needs_grad = value.requires_grad();
  n.is_leaf = true;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Tensor value) {
  value.set_requires_grad(false);
  return leaf(std::move(value));
}

Var Tape::record(std::string_view op, Tensor value, const std::vector<Var>& inputs,
                 BackwardFn fn) {
  check_open("record");
  if (!value.all_finite()) {
    throw NumericError(std::string(op) + " produced non-finite values");
  }
  Node n;
  n.op = std::string(op);
  n.value = std::move(value);
  n.inputs.reserve(inputs.size());
  for (const Var& in : inputs) {
    n.inputs.push_back(in.id_);
    n.needs_grad = n.needs_grad || node(in).needs_grad;
  }
  if (n.needs_grad) n.backward = std::move(fn);
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

const Tensor& Tape::value(Var v) const { return node(v).value; }

bool Tape::needs_grad(Var v) const { return node(v).needs_grad; }

bool Tape::has_grad(Var v) const { return node(v).has_grad; }

const Tensor& Tape::grad(Var v) const {
  const Node& n = node(v);
  if (!n.has_grad) throw UsageError("no gradient recorded for " + n.op);
  return n.grad;
}

Tensor& Tape::grad_accumulator(Var v) {
  Node& n = node(v);
  if (!n.has_grad) {
    n.grad = Tensor::zeros(n.value.shape());
    n.has_grad = true;
  }
  return n.grad;
}

void Tape::accumulate(Var v, const Tensor& g) {
  if (!needs_grad(v)) return;
  Tensor& acc = grad_accumulator(v);
  if (acc.shape() != g.shape()) {
    throw ConfigError("gradient shape " + shape_str(g.shape()) + " does not match value " +
                      shape_str(acc.shape()));
  }
  auto dst = acc.data();
  auto src = g.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

void Tape::backward(Var loss) {
  check_open("backward");
  if (nodes_.empty()) throw UsageError("backward on an empty tape");
  Node& root = node(loss);
  if (root.value.numel() != 1) {
    throw UsageError("backward requires a scalar loss, got shape " + shape_str(root.value.shape()));
  }
  consumed_ = true;
  root.grad = Tensor(root.value.shape(), 1.0f);
  root.has_grad = true;

  for (std::size_t i = loss.id_ + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.has_grad || !n.backward) continue;
    n.backward(*this, n.grad);
  }

  for (Node& n : nodes_) {
    n.backward = nullptr;
    if (n.is_leaf && n.needs_grad && !n.has_grad) {
      n.grad = Tensor::zeros(n.value.shape());
      n.has_grad = true;
    }
  }
}

std::vector<Tape::Entry> Tape::entries() const {
  std::vector<Entry> out;
  out.reserve(nodes_.size());
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    out.push_back(Entry{nodes_[i].op, nodes_[i].inputs, i});
  }
  return out;
}

}  // namespace coordsr
