#pragma once

// Classification and distillation objectives for the three branches.

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "dkt/model.hpp"
#include "dkt/ops.hpp"

namespace dkt {

struct LossWeights {
  double source = 1.0;     // CE on the source branch
  double target_ce = 1.0;  // CE on the target branch (0 for strict UDA)
  double bridge = 1.0;     // CE on the bridge branch
  double distill = 1.0;    // bridge -> target distillation
  double temperature = 1.0;

  void validate() const {
    for (double w : {source, target_ce, bridge, distill})
      if (!(w >= 0.0)) throw std::invalid_argument("loss weights must be >= 0");
    if (source + target_ce + bridge + distill <= 0.0) throw std::invalid_argument("loss weights are all zero");
    if (!(temperature > 0.0)) throw std::invalid_argument("temperature must be > 0");
  }
};

/// -log softmax(logits)[label]
template <class T>
Tensor<T> cross_entropy(const Tensor<T>& logits, std::size_t label) {
  if (label >= logits.numel())
    throw std::out_of_range("cross_entropy: label " + std::to_string(label) + " out of range for " +
                            std::to_string(logits.numel()) + " classes");
  return scale(gather(reshape(log_softmax(logits), {logits.numel()}), 0, {label}), T(-1));
}

/// -sum_i p_i log q_i with p = softmax(teacher / tau) held constant and
/// q = softmax(student / tau).
template <class T>
Tensor<T> distillation_loss(const Tensor<T>& teacher_logits, const Tensor<T>& student_logits, T temperature = T(1)) {
  if (teacher_logits.numel() != student_logits.numel())
    throw ShapeError("distillation_loss: teacher " + shape_str(teacher_logits.shape()) + " vs student " +
                     shape_str(student_logits.shape()));
  Tensor<T> p;
  {
    NoGradGuard guard;
    p = softmax(scale(reshape(detach(teacher_logits), {teacher_logits.numel()}), T(1) / temperature));
  }
  auto log_q = log_softmax(scale(reshape(student_logits, {student_logits.numel()}), T(1) / temperature));
  return scale(sum(mul(log_q, p)), T(-1));
}

template <class T>
struct LossTerms {
  Tensor<T> total;
  double source = 0, target = 0, bridge = 0, distill = 0;
};

/// Weighted sum of the branch objectives. Terms with zero weight are not
/// built at all, so they contribute neither value nor gradient.
template <class T>
LossTerms<T> total_loss(const TripleOutput<T>& out, std::size_t label, const LossWeights& w) {
  w.validate();
  auto need = [](const auto& branch, const char* name) -> const BranchOutput<T>& {
    if (!branch) throw std::invalid_argument(std::string("total_loss: ") + name + " branch was not computed");
    return *branch;
  };
  LossTerms<T> r;
  std::vector<Tensor<T>> parts;
  auto term = [&](double weight, const Tensor<T>& loss, double& slot) {
    slot = static_cast<double>(loss.item());
    parts.push_back(scale(loss, static_cast<T>(weight)));
  };
  if (w.source > 0) term(w.source, cross_entropy(need(out.source, "source").logits, label), r.source);
  if (w.target_ce > 0) term(w.target_ce, cross_entropy(need(out.target, "target").logits, label), r.target);
  if (w.bridge > 0) term(w.bridge, cross_entropy(need(out.bridge, "bridge").logits, label), r.bridge);
  if (w.distill > 0)
    term(w.distill,
         distillation_loss(need(out.bridge, "bridge").logits, need(out.target, "target").logits,
                           static_cast<T>(w.temperature)),
         r.distill);
  r.total = parts.size() == 1 ? parts[0] : sum(concat(parts, 0));
  return r;
}

}  // namespace dkt
