#pragma once

// The triple-branch video transformer. One ModelParams instance backs all
// three branches: source, target, and the source->target bridge whose blocks
// replace self-attention with cross-attention from the source stream onto the
// target stream.

#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dkt/attention.hpp"
#include "dkt/ops.hpp"
#include "dkt/rng.hpp"
#include "dkt/tensor.hpp"
#include "dkt/tokenizer.hpp"

namespace dkt {

enum class AttentionMode { space, time, space_time };
enum class BridgeInit { source, target, mean };
enum class QkvSharing { shared, split };

inline bool uses_time(AttentionMode m) { return m != AttentionMode::space; }
inline bool uses_space(AttentionMode m) { return m != AttentionMode::time; }

struct ModelConfig {
  ClipSpec clip;
  std::size_t heads = 4;
  std::size_t layers = 2;
  std::size_t mlp_ratio = 2;
  std::size_t num_classes = 8;
  AttentionMode attention = AttentionMode::space_time;
  QkvSharing qkv = QkvSharing::shared;
  BridgeInit bridge_init = BridgeInit::source;

  TokenGrid grid() const { return {clip.patches_per_frame(), clip.frames}; }

  void validate() const {
    clip.validate();
    if (heads == 0 || clip.dim % heads != 0)
      throw ShapeError("model: dim " + std::to_string(clip.dim) + " not divisible by heads " + std::to_string(heads));
    if (mlp_ratio == 0) throw ShapeError("model: mlp_ratio must be >= 1");
    if (num_classes < 2) throw ShapeError("model: num_classes must be >= 2");
  }
};

template <class T>
struct LayerNormParams {
  Tensor<T> gain, bias;
};

template <class T>
struct BlockParams {
  LayerNormParams<T> ln_time, ln_space, ln_cross, ln_mlp;
  // With QkvSharing::shared the three hold the same wq/wk/wv handles and
  // differ only in their output projection.
  AttentionParams<T> time, space, cross;
  Tensor<T> mlp_w1, mlp_b1, mlp_w2, mlp_b2;
};

template <class T>
struct NamedTensor {
  std::string name;
  Tensor<T> tensor;
};

template <class T>
struct ModelParams {
  ModelConfig config;
  TokenizerParams<T> tokenizer;
  std::vector<BlockParams<T>> blocks;
  LayerNormParams<T> ln_final;
  Tensor<T> head_w, head_b;

  /// Every distinct parameter storage, in a fixed order.
  std::vector<NamedTensor<T>> named() const {
    std::vector<NamedTensor<T>> out{{"tokenizer.patch_embed", tokenizer.patch_embed},
                                    {"tokenizer.positions", tokenizer.positions},
                                    {"tokenizer.cls", tokenizer.cls}};
    auto ln = [&](const std::string& p, const LayerNormParams<T>& l) {
      out.push_back({p + ".gain", l.gain});
      out.push_back({p + ".bias", l.bias});
    };
    for (std::size_t i = 0; i < blocks.size(); ++i) {
      const auto& b = blocks[i];
      const std::string p = "blocks." + std::to_string(i);
      ln(p + ".ln_time", b.ln_time);
      ln(p + ".ln_space", b.ln_space);
      ln(p + ".ln_cross", b.ln_cross);
      ln(p + ".ln_mlp", b.ln_mlp);
      if (config.qkv == QkvSharing::shared) {
        out.push_back({p + ".attn.wq", b.time.wq});
        out.push_back({p + ".attn.wk", b.time.wk});
        out.push_back({p + ".attn.wv", b.time.wv});
      } else {
        for (auto [tag, a] : {std::pair{"time", &b.time}, std::pair{"space", &b.space}}) {
          out.push_back({p + "." + tag + ".wq", a->wq});
          out.push_back({p + "." + tag + ".wk", a->wk});
          out.push_back({p + "." + tag + ".wv", a->wv});
        }
      }
      out.push_back({p + ".time.wo", b.time.wo});
      out.push_back({p + ".space.wo", b.space.wo});
      out.push_back({p + ".cross.wo", b.cross.wo});
      out.push_back({p + ".mlp.w1", b.mlp_w1});
      out.push_back({p + ".mlp.b1", b.mlp_b1});
      out.push_back({p + ".mlp.w2", b.mlp_w2});
      out.push_back({p + ".mlp.b2", b.mlp_b2});
    }
    ln("ln_final", ln_final);
    out.push_back({"head.weight", head_w});
    out.push_back({"head.bias", head_b});
    return out;
  }

  std::vector<Tensor<T>> parameters() const {
    std::vector<Tensor<T>> out;
    for (auto& n : named()) out.push_back(n.tensor);
    return out;
  }

  void zero_grad() const {
    for (auto t : parameters()) t.zero_grad();
  }

  /// Fresh parameters: Xavier-normal projections, N(0, 0.02) positions, zero
  /// class token, unit layernorm gains, zero biases.
  static ModelParams init(const ModelConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    Rng rng(seed);
    const std::size_t d = cfg.clip.dim, hidden = d * cfg.mlp_ratio;
    auto normal = [&](Shape s, double std) {
      std::vector<T> v(numel(s));
      for (auto& x : v) x = static_cast<T>(rng.normal(0.0, std));
      return Tensor<T>(std::move(s), std::move(v), true);
    };
    auto xavier = [&](std::size_t fan_in, std::size_t fan_out) {
      return normal({fan_in, fan_out}, std::sqrt(2.0 / static_cast<double>(fan_in + fan_out)));
    };
    auto ln = [&] { return LayerNormParams<T>{Tensor<T>::full({d}, T(1), true), Tensor<T>::zeros({d}, true)}; };

    ModelParams p;
    p.config = cfg;
    p.tokenizer.patch_embed = xavier(cfg.clip.patch_dim(), d);
    p.tokenizer.positions = normal({cfg.clip.num_tokens(), d}, 0.02);
    p.tokenizer.cls = Tensor<T>::zeros({d}, true);
    for (std::size_t l = 0; l < cfg.layers; ++l) {
      BlockParams<T> b;
      b.ln_time = ln();
      b.ln_space = ln();
      b.ln_cross = ln();
      b.ln_mlp = ln();
      b.time = {xavier(d, d), xavier(d, d), xavier(d, d), xavier(d, d), cfg.heads};
      if (cfg.qkv == QkvSharing::shared)
        b.space = {b.time.wq, b.time.wk, b.time.wv, xavier(d, d), cfg.heads};
      else
        b.space = {xavier(d, d), xavier(d, d), xavier(d, d), xavier(d, d), cfg.heads};
      b.cross = {b.time.wq, b.time.wk, b.time.wv, xavier(d, d), cfg.heads};
      b.mlp_w1 = xavier(d, hidden);
      b.mlp_b1 = Tensor<T>::zeros({hidden}, true);
      b.mlp_w2 = xavier(hidden, d);
      b.mlp_b2 = Tensor<T>::zeros({d}, true);
      p.blocks.push_back(std::move(b));
    }
    p.ln_final = ln();
    p.head_w = xavier(d, cfg.num_classes);
    p.head_b = Tensor<T>::zeros({cfg.num_classes}, true);
    return p;
  }

  /// Deep copy with the same sharing structure but separate storage.
  ModelParams clone() const {
    ModelParams c = init(config, 0);
    auto src = named();
    auto dst = c.named();
    for (std::size_t i = 0; i < src.size(); ++i) {
      auto from = src[i].tensor.data();
      auto to = dst[i].tensor.mutable_data();
      std::copy(from.begin(), from.end(), to.begin());
    }
    return c;
  }
};

template <class T>
struct BranchOutput {
  Tensor<T> logits;                     // [num_classes]
  Tensor<T> cls_feature;                // [1, D], final-layernormed class token
  std::vector<Tensor<T>> states;        // Z^0 .. Z^L
  std::vector<AttentionMap<T>> maps;    // per layer, last attention pass
};

template <class T>
struct TripleOutput {
  std::optional<BranchOutput<T>> source, target, bridge;
};

struct ForwardOptions {
  bool record_maps = false;
  ScoreCounter* counter = nullptr;
};

struct BranchSelection {
  bool source = true, target = true, bridge = true;
};

template <class T>
Tensor<T> apply_ln(const Tensor<T>& x, const LayerNormParams<T>& ln) {
  return layernorm(x, ln.gain, ln.bias);
}

template <class T>
Tensor<T> mlp(const Tensor<T>& x, const BlockParams<T>& b) {
  return add(matmul(gelu(add(matmul(x, b.mlp_w1), b.mlp_b1)), b.mlp_w2), b.mlp_b2);
}

/// Embedded tokens Z^0 of a raw clip.
template <class T>
Tensor<T> tokenize(const VideoClip& clip, const ModelParams<T>& p) {
  const auto& spec = p.config.clip;
  if (clip.height != spec.height || clip.width != spec.width || clip.channels != spec.channels)
    throw ShapeError("clip " + std::to_string(clip.height) + "x" + std::to_string(clip.width) + "x" +
                     std::to_string(clip.channels) + " does not match model input " + std::to_string(spec.height) +
                     "x" + std::to_string(spec.width) + "x" + std::to_string(spec.channels));
  return embed(patchify<T>(sample_frames(clip, spec), spec.patch), p.tokenizer);
}

template <class T>
void classify(BranchOutput<T>& out, const Tensor<T>& z_last, const ModelParams<T>& p) {
  out.cls_feature = apply_ln(slice(z_last, 0, 0, 1), p.ln_final);
  out.logits = reshape(add(matmul(out.cls_feature, p.head_w), p.head_b), {p.config.num_classes});
}

/// One self-attention branch from already-embedded tokens.
template <class T>
BranchOutput<T> forward_tokens(const Tensor<T>& z0, const ModelParams<T>& p, const ForwardOptions& opt = {}) {
  const auto mode = p.config.attention;
  const auto grid = p.config.grid();
  BranchOutput<T> out;
  out.states.push_back(z0);
  Tensor<T> z = z0;
  for (const auto& b : p.blocks) {
    AttentionMap<T> map;
    // The class token joins only the last attention pass of the block.
    if (uses_time(mode))
      z = add(z, attend_time(apply_ln(z, b.ln_time), grid, b.time, !uses_space(mode), opt.counter,
                             opt.record_maps && !uses_space(mode) ? &map : nullptr));
    if (uses_space(mode))
      z = add(z, attend_space(apply_ln(z, b.ln_space), grid, b.space, true, opt.counter,
                              opt.record_maps ? &map : nullptr));
    z = add(z, mlp(apply_ln(z, b.ln_mlp), b));
    out.states.push_back(z);
    if (opt.record_maps) out.maps.push_back(std::move(map));
  }
  classify(out, z, p);
  return out;
}

template <class T>
BranchOutput<T> forward_branch(const VideoClip& clip, const ModelParams<T>& p, const ForwardOptions& opt = {}) {
  return forward_tokens(tokenize(clip, p), p, opt);
}

/// Bridge stream: Z^l = Z^{l-1} + CrossAttn(LN(Z_src^{l-1}), LN(Z_tgt^{l-1})), then the MLP sublayer.
template <class T>
BranchOutput<T> forward_bridge(const BranchOutput<T>& src, const BranchOutput<T>& tgt, const ModelParams<T>& p,
                               const ForwardOptions& opt = {}) {
  BranchOutput<T> out;
  Tensor<T> z;
  switch (p.config.bridge_init) {
    case BridgeInit::source: z = src.states.front(); break;
    case BridgeInit::target: z = tgt.states.front(); break;
    case BridgeInit::mean: z = scale(add(src.states.front(), tgt.states.front()), T(0.5)); break;
  }
  out.states.push_back(z);
  for (std::size_t l = 0; l < p.blocks.size(); ++l) {
    const auto& b = p.blocks[l];
    AttentionMap<T> map;
    z = add(z, attend_cross(apply_ln(src.states[l], b.ln_cross), apply_ln(tgt.states[l], b.ln_cross), b.cross,
                            opt.counter, opt.record_maps ? &map : nullptr));
    z = add(z, mlp(apply_ln(z, b.ln_mlp), b));
    out.states.push_back(z);
    if (opt.record_maps) out.maps.push_back(std::move(map));
  }
  classify(out, z, p);
  return out;
}

/// The three branches. Each branch may read its own parameter set; passing the
/// same ModelParams three times is the weight-shared model.
template <class T>
TripleOutput<T> forward_triple(const VideoClip& source, const VideoClip& target, const ModelParams<T>& p_source,
                               const ModelParams<T>& p_target, const ModelParams<T>& p_bridge,
                               BranchSelection which = {}, const ForwardOptions& opt = {}) {
  if (source.label != target.label)
    throw std::invalid_argument("forward_triple: pair labels differ (" + std::to_string(source.label) + " vs " +
                                std::to_string(target.label) + ")");
  TripleOutput<T> out;
  if (which.source || which.bridge) out.source = forward_branch(source, p_source, opt);
  if (which.target || which.bridge) out.target = forward_branch(target, p_target, opt);
  if (which.bridge) out.bridge = forward_bridge(*out.source, *out.target, p_bridge, opt);
  return out;
}

template <class T>
TripleOutput<T> forward_triple(const VideoClip& source, const VideoClip& target, const ModelParams<T>& p,
                               BranchSelection which = {}, const ForwardOptions& opt = {}) {
  return forward_triple(source, target, p, p, p, which, opt);
}

struct Prediction {
  std::size_t label = 0;
  std::vector<double> probabilities;
};

/// Single-clip inference through one self-attention branch.
template <class T>
Prediction infer(const VideoClip& clip, const ModelParams<T>& p) {
  NoGradGuard guard;
  auto logits = forward_branch(clip, p).logits;
  auto probs = softmax(logits);
  Prediction r;
  for (T v : probs.data()) r.probabilities.push_back(static_cast<double>(v));
  auto L = logits.data();
  r.label = static_cast<std::size_t>(std::max_element(L.begin(), L.end()) - L.begin());
  return r;
}

}  // namespace dkt
