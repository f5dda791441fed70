#pragma once

// Central finite-difference gradient checks, for every primitive and for the
// full training objective on a tiny model.

#include <chrono>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "dkt/attention.hpp"
#include "dkt/config.hpp"
#include "dkt/losses.hpp"
#include "dkt/model.hpp"
#include "dkt/ops.hpp"
#include "dkt/rng.hpp"

namespace dkt {

struct GradCheckResult {
  std::string name;
  double max_rel_error = 0;
  std::size_t checked = 0;
  bool passed = false;
  std::string worst;  // location of the largest error
};

inline constexpr double kGradCheckStep = 1e-5;
inline constexpr double kGradCheckTolerance = 1e-4;

/// |a - fd| / (|a| + |fd| + 1e-8), maximised over every element of every input.
/// The analytic side backpropagates `loss_fn`; the numeric side differences
/// `numeric_fn`, which must equal `loss_fn` with every stop-gradient input
/// frozen at its current value.
inline GradCheckResult check_gradients(const std::string& name, const std::function<Tensor<double>()>& loss_fn,
                                       const std::function<Tensor<double>()>& numeric_fn,
                                       std::vector<Tensor<double>> inputs, double h = kGradCheckStep,
                                       double tol = kGradCheckTolerance) {
  for (auto& x : inputs) x.zero_grad();
  loss_fn().backward();
  std::vector<std::vector<double>> analytic;
  for (auto& x : inputs)
    analytic.push_back(x.has_grad() ? std::vector<double>(x.grad().begin(), x.grad().end())
                                    : std::vector<double>(x.numel(), 0.0));

  GradCheckResult r;
  r.name = name;
  NoGradGuard guard;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    auto w = inputs[i].mutable_data();
    for (std::size_t j = 0; j < w.size(); ++j) {
      const double orig = w[j];
      w[j] = orig + h;
      const double up = numeric_fn().item();
      w[j] = orig - h;
      const double down = numeric_fn().item();
      w[j] = orig;
      const double fd = (up - down) / (2 * h);
      const double a = analytic[i][j];
      const double rel = std::abs(a - fd) / (std::abs(a) + std::abs(fd) + 1e-8);
      ++r.checked;
      if (rel > r.max_rel_error || !std::isfinite(rel)) {
        r.max_rel_error = std::isfinite(rel) ? rel : INFINITY;
        r.worst = "input " + std::to_string(i) + " element " + std::to_string(j) + ": analytic " +
                  std::to_string(a) + " vs numeric " + std::to_string(fd);
      }
    }
  }
  for (auto& x : inputs) x.zero_grad();
  r.passed = r.max_rel_error < tol;
  return r;
}

inline GradCheckResult check_gradients(const std::string& name, const std::function<Tensor<double>()>& loss_fn,
                                       std::vector<Tensor<double>> inputs, double h = kGradCheckStep,
                                       double tol = kGradCheckTolerance) {
  return check_gradients(name, loss_fn, loss_fn, std::move(inputs), h, tol);
}

/// M=4, N=3, D=8, h=2, L=2, K=3.
inline RunConfig tiny_gradcheck_config() {
  RunConfig c;
  c.merge_text(
      "frames = 3\nstride = 1\nheight = 4\nwidth = 4\npatch = 2\nchannels = 1\n"
      "dim = 8\nheads = 2\nlayers = 2\nmlp_ratio = 2\nnum_classes = 3\n");
  return c;
}

namespace detail {

inline Tensor<double> random_tensor(Rng& rng, Shape s, double lo = -1, double hi = 1) {
  std::vector<double> v(numel(s));
  for (auto& x : v) x = rng.uniform(lo, hi);
  return Tensor<double>(std::move(s), std::move(v), true);
}

inline VideoClip random_clip(Rng& rng, const ClipSpec& spec, std::size_t label, Domain d) {
  VideoClip c;
  c.frames = spec.raw_frames();
  c.height = spec.height;
  c.width = spec.width;
  c.channels = spec.channels;
  c.label = label;
  c.domain = d;
  c.pixels.resize(c.frames * c.frame_size());
  for (auto& p : c.pixels) p = static_cast<float>(rng.uniform());
  return c;
}

/// Randomizes every parameter so no gradient is structurally tiny
/// (e.g. unit gains and zero biases at initialization).
inline void perturb_parameters(ModelParams<double>& p, Rng& rng, double spread) {
  for (auto& n : p.named())
    for (auto& v : n.tensor.mutable_data()) v += rng.uniform(-spread, spread);
}

// sum(op(x) * w) for a fixed random w, so every output element matters.
inline std::function<Tensor<double>()> weighted(std::function<Tensor<double>()> f, Rng& rng) {
  auto probe = [&] {
    NoGradGuard g;
    return f();
  }();
  auto w = random_tensor(rng, probe.shape());
  w.set_requires_grad(false);
  return [f, w] { return sum(mul(f(), w)); };
}

}  // namespace detail

/// Every primitive, the three attention kernels, both losses, and total_loss
/// of the triple model under `cfg` (intended for tiny configs).
inline std::vector<GradCheckResult> run_gradcheck_suite(const RunConfig& cfg, std::uint64_t seed = 7) {
  using detail::random_tensor;
  using detail::weighted;
  using T = double;
  Rng rng(seed);
  std::vector<GradCheckResult> out;
  auto check = [&](const std::string& name, std::function<Tensor<T>()> f, std::vector<Tensor<T>> in) {
    out.push_back(check_gradients(name, weighted(std::move(f), rng), std::move(in)));
  };

  {
    auto a = random_tensor(rng, {3, 4}), b = random_tensor(rng, {4, 2});
    check("matmul", [=] { return matmul(a, b); }, {a, b});
    auto ba = random_tensor(rng, {2, 3, 4}), bb = random_tensor(rng, {2, 4, 2});
    check("matmul_batched", [=] { return matmul(ba, bb); }, {ba, bb});
    check("matmul_broadcast", [=] { return matmul(ba, b); }, {ba, b});
  }
  {
    auto a = random_tensor(rng, {3, 4}), b = random_tensor(rng, {4}), c = random_tensor(rng, {3, 4});
    check("add", [=] { return add(a, b); }, {a, b});
    check("sub", [=] { return sub(a, c); }, {a, c});
    check("mul", [=] { return mul(a, c); }, {a, c});
    check("scale", [=] { return scale(a, 1.7); }, {a});
    check("gelu", [=] { return gelu(scale(a, 3.0)); }, {a});
    check("exp", [=] { return exp(a); }, {a});
    auto pos = random_tensor(rng, {5}, 0.5, 2.0);
    check("log", [=] { return log(pos); }, {pos});
    check("sum", [=] { return sum(a); }, {a});
    check("mean", [=] { return mean(a); }, {a});
  }
  {
    auto x = random_tensor(rng, {3, 4, 5}, -2, 2);
    check("softmax_last", [=] { return softmax(x, -1); }, {x});
    check("softmax_mid", [=] { return softmax(x, 1); }, {x});
    check("log_softmax", [=] { return log_softmax(x, -1); }, {x});
    auto g = random_tensor(rng, {5}), b = random_tensor(rng, {5});
    check("layernorm", [=] { return layernorm(x, g, b); }, {x, g, b});
    check("reshape", [=] { return reshape(x, {4, 15}); }, {x});
    check("transpose", [=] { return transpose(x, 0, 2); }, {x});
    auto y = random_tensor(rng, {3, 2, 5});
    check("concat", [=] { return concat<T>({x, y}, 1); }, {x, y});
    check("slice", [=] { return slice(x, 1, 1, 2); }, {x});
    check("gather", [=] { return gather(x, 1, {3, 0, 3, 1}); }, {x});
    auto table = random_tensor(rng, {6, 3});
    check("embedding_lookup", [=] { return embedding_lookup(table, {5, 1, 1, 0}); }, {table});
  }

  const auto mcfg = cfg.model_config();
  const auto grid = mcfg.grid();
  {
    const std::size_t d = mcfg.clip.dim, l = grid.tokens();
    AttentionParams<T> p{random_tensor(rng, {d, d}), random_tensor(rng, {d, d}), random_tensor(rng, {d, d}),
                         random_tensor(rng, {d, d}), mcfg.heads};
    auto z = random_tensor(rng, {l, d}), z2 = random_tensor(rng, {l, d});
    std::vector<Tensor<T>> all{z, p.wq, p.wk, p.wv, p.wo};
    check("attend_time", [=] { return attend_time(z, grid, p, true); }, all);
    check("attend_time_no_cls", [=] { return attend_time(z, grid, p, false); }, all);
    check("attend_space", [=] { return attend_space(z, grid, p, true); }, all);
    auto cross_in = all;
    cross_in.push_back(z2);
    check("attend_cross", [=] { return attend_cross(z, z2, p); }, cross_in);
  }
  {
    auto logits = random_tensor(rng, {mcfg.num_classes}, -2, 2);
    auto teacher = random_tensor(rng, {mcfg.num_classes}, -2, 2);
    out.push_back(check_gradients("cross_entropy", [=] { return cross_entropy(logits, 1); }, {logits}));
    out.push_back(check_gradients(
        "distillation_loss", [=] { return distillation_loss(teacher, logits, 2.0); }, {logits}));
  }
  {
    auto params = ModelParams<T>::init(mcfg, seed);
    detail::perturb_parameters(params, rng, 0.3);
    const auto src = detail::random_clip(rng, mcfg.clip, 1, Domain::source);
    const auto tgt = detail::random_clip(rng, mcfg.clip, 1, Domain::target);
    const auto weights = cfg.train_config().effective_weights();
    // The distillation teacher is detached, so the numeric side holds the
    // bridge logits at their unperturbed value and differences only the rest.
    Tensor<T> teacher;
    {
      NoGradGuard g;
      teacher = forward_triple(src, tgt, params).bridge->logits;
    }
    auto numeric = [=] {
      auto out = forward_triple(src, tgt, params);
      if (weights.distill <= 0) return total_loss(out, src.label, weights).total;
      auto no_distill = weights;
      no_distill.distill = 0;
      auto kd = scale(distillation_loss(teacher, out.target->logits, static_cast<T>(weights.temperature)),
                      static_cast<T>(weights.distill));
      if (no_distill.source + no_distill.target_ce + no_distill.bridge <= 0) return kd;
      return add(total_loss(out, src.label, no_distill).total, kd);
    };
    out.push_back(check_gradients(
        "total_loss",
        [=] { return total_loss(forward_triple(src, tgt, params), src.label, weights).total; }, numeric,
        params.parameters()));
  }
  return out;
}

}  // namespace dkt
