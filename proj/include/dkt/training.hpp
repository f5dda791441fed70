#pragma once

// Training loop over source/target pairs, evaluation and metrics.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "dkt/losses.hpp"
#include "dkt/model.hpp"
#include "dkt/optim.hpp"
#include "dkt/rng.hpp"
#include "dkt/synth.hpp"

namespace dkt {

struct AblationFlags {
  AttentionMode attention = AttentionMode::space_time;
  bool cross_attention = true;
  bool distillation = true;
  bool strict_uda = false;
};

struct TrainConfig {
  OptimizerConfig optimizer;
  Schedule schedule = Schedule::cosine;
  std::size_t epochs = 30;
  std::size_t batch_size = 4;
  double clip_norm = 1.0;
  std::uint64_t seed = 1;
  LossWeights weights;
  AblationFlags flags;  // flags.attention must agree with the model config

  void validate() const {
    if (!(optimizer.lr >= 0)) throw std::invalid_argument("train: lr must be >= 0");
    if (epochs < 1) throw std::invalid_argument("train: epochs must be >= 1");
    if (batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
    effective_weights().validate();
  }

  /// Loss weights after the ablation flags are applied.
  LossWeights effective_weights() const {
    LossWeights w = weights;
    if (!flags.cross_attention) w.bridge = w.distill = 0;
    if (!flags.distillation) w.distill = 0;
    if (flags.strict_uda) w.target_ce = 0;
    return w;
  }

  BranchSelection branches() const {
    const auto w = effective_weights();
    BranchSelection b;
    b.bridge = w.bridge > 0 || w.distill > 0;
    b.source = w.source > 0;
    b.target = w.target_ce > 0 || w.distill > 0;
    return b;
  }
};

struct EvalResult {
  std::size_t num_classes = 0;
  double top1 = 0, top5 = 0;
  bool has_top5 = false;
  std::vector<std::vector<std::size_t>> confusion;  // [true][predicted]
  std::vector<std::size_t> labels, predictions;
};

struct MetricsRecord {
  std::size_t epoch = 0;
  double loss_source = 0, loss_target = 0, loss_bridge = 0, loss_distill = 0, loss_total = 0;
  EvalResult test_source, test_target;
};

/// Worker count from DKTF_THREADS (default 1).
inline std::size_t worker_count() {
  if (const char* s = std::getenv("DKTF_THREADS")) {
    long v = std::strtol(s, nullptr, 10);
    if (v >= 1) return static_cast<std::size_t>(v);
  }
  return 1;
}

/// Top-1 (and top-5 when K > 5) accuracy plus the confusion matrix, using
/// single-clip inference.
template <class T>
EvalResult evaluate(const ModelParams<T>& params, const std::vector<VideoClip>& clips,
                    std::size_t threads = worker_count()) {
  if (clips.empty()) throw std::invalid_argument("evaluate: empty clip set");
  const std::size_t k = params.config.num_classes;
  std::vector<Prediction> preds(clips.size());
  auto run = [&](std::size_t begin, std::size_t step) {
    for (std::size_t i = begin; i < clips.size(); i += step) preds[i] = infer(clips[i], params);
  };
  threads = std::clamp<std::size_t>(threads, 1, clips.size());
  if (threads == 1) {
    run(0, 1);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < threads; ++w) pool.emplace_back(run, w, threads);
    for (auto& t : pool) t.join();
  }

  EvalResult r;
  r.num_classes = k;
  r.has_top5 = k > 5;
  r.confusion.assign(k, std::vector<std::size_t>(k, 0));
  std::size_t hit1 = 0, hit5 = 0;
  for (std::size_t i = 0; i < clips.size(); ++i) {
    const std::size_t y = clips[i].label;
    if (y >= k) throw std::invalid_argument("evaluate: clip label out of range");
    const auto& p = preds[i].probabilities;
    r.labels.push_back(y);
    r.predictions.push_back(preds[i].label);
    ++r.confusion[y][preds[i].label];
    if (preds[i].label == y) ++hit1;
    // rank of the true class: number of classes scored strictly higher
    std::size_t above = 0;
    for (std::size_t c = 0; c < k; ++c)
      if (p[c] > p[y]) ++above;
    if (above < 5) ++hit5;
  }
  r.top1 = static_cast<double>(hit1) / static_cast<double>(clips.size());
  r.top5 = r.has_top5 ? static_cast<double>(hit5) / static_cast<double>(clips.size()) : r.top1;
  return r;
}

namespace detail {
/// Same-class random re-pairing of the training pool for one epoch.
inline std::vector<std::pair<std::size_t, std::size_t>> epoch_pairs(const PairBatch& train, std::size_t num_classes,
                                                                    Rng& rng) {
  std::vector<std::vector<std::size_t>> by_class(num_classes);
  for (std::size_t i = 0; i < train.size(); ++i) by_class.at(train[i].label()).push_back(i);
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (auto& members : by_class) {
    auto targets = members;
    rng.shuffle(targets.begin(), targets.end());
    for (std::size_t j = 0; j < members.size(); ++j) pairs.emplace_back(members[j], targets[j]);
  }
  rng.shuffle(pairs.begin(), pairs.end());
  return pairs;
}
}  // namespace detail

using EpochCallback = std::function<void(const MetricsRecord&)>;

/// Trains `params` in place; one MetricsRecord per epoch.
template <class T>
std::vector<MetricsRecord> train(ModelParams<T>& params, const Dataset& data, const TrainConfig& cfg,
                                 const EpochCallback& on_epoch = {}) {
  cfg.validate();
  if (cfg.flags.attention != params.config.attention)
    throw std::invalid_argument("train: attention mode differs between train and model config");
  if (data.train.empty()) throw std::invalid_argument("train: empty training set");
  for (const auto& p : data.train)
    if (p.source.label != p.target.label) throw std::invalid_argument("train: pair with mismatched labels");

  const auto weights = cfg.effective_weights();
  const auto which = cfg.branches();
  auto plist = params.parameters();
  Optimizer<T> opt(plist, cfg.optimizer);
  Rng order_rng(derive_seed(cfg.seed, 0x5348554646ULL));

  const std::size_t steps_per_epoch = (data.train.size() + cfg.batch_size - 1) / cfg.batch_size;
  const std::size_t total_steps = steps_per_epoch * cfg.epochs;
  std::size_t step = 0;
  std::vector<MetricsRecord> history;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    auto pairs = detail::epoch_pairs(data.train, data.num_classes, order_rng);
    MetricsRecord rec;
    rec.epoch = epoch;
    for (std::size_t b = 0; b < pairs.size(); b += cfg.batch_size) {
      const std::size_t end = std::min(pairs.size(), b + cfg.batch_size);
      const T inv_batch = T(1) / static_cast<T>(end - b);
      for (std::size_t i = b; i < end; ++i) {
        const auto& src = data.train[pairs[i].first].source;
        const auto& tgt = data.train[pairs[i].second].target;
        auto out = forward_triple(src, tgt, params, which);
        auto terms = total_loss(out, src.label, weights);
        const double value = static_cast<double>(terms.total.item());
        if (!std::isfinite(value)) {
          std::ostringstream os;
          os << "non-finite loss at epoch " << epoch << " step " << step << ": source=" << terms.source
             << " target=" << terms.target << " bridge=" << terms.bridge << " distill=" << terms.distill;
          throw NumericError(os.str());
        }
        scale(terms.total, inv_batch).backward();
        rec.loss_source += terms.source;
        rec.loss_target += terms.target;
        rec.loss_bridge += terms.bridge;
        rec.loss_distill += terms.distill;
        rec.loss_total += value;
      }
      clip_grad_norm(plist, cfg.clip_norm);
      opt.step(learning_rate_at(cfg.schedule, cfg.optimizer.lr, step, total_steps));
      opt.zero_grad();
      ++step;
    }
    const double n = static_cast<double>(pairs.size());
    rec.loss_source /= n;
    rec.loss_target /= n;
    rec.loss_bridge /= n;
    rec.loss_distill /= n;
    rec.loss_total /= n;
    rec.test_source = evaluate(params, data.test_source);
    rec.test_target = evaluate(params, data.test_target);
    if (on_epoch) on_epoch(rec);
    history.push_back(std::move(rec));
  }
  return history;
}

// ---------------------------------------------------------------------------
// CSV output

inline constexpr const char* kMetricsHeader =
    "epoch,loss_source,loss_target,loss_bridge,loss_distill,loss_total,"
    "top1_source,top1_target,top5_source,top5_target";

inline std::string format_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string metrics_csv(const std::vector<MetricsRecord>& history) {
  std::string out = std::string(kMetricsHeader) + "\n";
  for (const auto& r : history) {
    out += std::to_string(r.epoch);
    for (double v : {r.loss_source, r.loss_target, r.loss_bridge, r.loss_distill, r.loss_total, r.test_source.top1,
                     r.test_target.top1, r.test_source.top5, r.test_target.top5})
      out += "," + format_real(v);
    out += "\n";
  }
  return out;
}

/// Header "true\predicted,0,1,...", one row per true class.
inline std::string confusion_csv(const EvalResult& r) {
  std::string out = "true\\predicted";
  for (std::size_t j = 0; j < r.num_classes; ++j) out += "," + std::to_string(j);
  out += "\n";
  for (std::size_t i = 0; i < r.num_classes; ++i) {
    out += std::to_string(i);
    for (std::size_t j = 0; j < r.num_classes; ++j) out += "," + std::to_string(r.confusion[i][j]);
    out += "\n";
  }
  return out;
}

}  // namespace dkt
