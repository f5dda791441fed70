#pragma once

// Multi-head attention kernels over a token sequence in tokenizer layout:
//   attend_time   - each patch attends to the same patch position in every frame
//   attend_space  - each patch attends to every patch of its own frame
//   attend_cross  - queries from one stream, keys/values from another, unmasked
//   attend_full   - joint attention over all tokens (reference only)
//
// The divided kernels run on gathered groups, so they only ever form the
// scores inside each group. When the class token takes part in a pass it is
// an extra key of every group and its own query attends to all tokens; when it
// does not, its output row is zero (the residual passes it through).

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "dkt/ops.hpp"
#include "dkt/tensor.hpp"
#include "dkt/tokenizer.hpp"

namespace dkt {

template <class T>
struct AttentionParams {
  Tensor<T> wq, wk, wv;  // [D, D], head h uses columns [h*Dh, (h+1)*Dh)
  Tensor<T> wo;          // [D, D]
  std::size_t heads = 1;

  std::size_t dim() const { return wq.dim(0); }
  std::size_t head_dim() const { return dim() / heads; }
  void validate() const {
    const std::size_t d = wq.dim(0);
    if (heads == 0 || d % heads != 0)
      throw ShapeError("attention: dim " + std::to_string(d) + " not divisible by " + std::to_string(heads) + " heads");
    for (const auto* w : {&wq, &wk, &wv, &wo})
      if (w->rank() != 2 || w->dim(0) != d || w->dim(1) != d)
        throw ShapeError("attention: projection must be [" + std::to_string(d) + "," + std::to_string(d) + "], got " +
                         shape_str(w->shape()));
  }
};

/// Counts query-key scores formed.
struct ScoreCounter {
  std::uint64_t scores = 0;
};

/// Dense [heads, tokens, tokens] attention weights; zero outside the mask.
template <class T>
struct AttentionMap {
  std::size_t heads = 0, tokens = 0;
  std::vector<T> weights;
  T at(std::size_t h, std::size_t q, std::size_t k) const { return weights[(h * tokens + q) * tokens + k]; }
};

struct TokenGrid {
  std::size_t patches_per_frame;  // M
  std::size_t frames;             // N
  std::size_t tokens() const { return 1 + patches_per_frame * frames; }
};

/// Which keys each query may see, as equal-sized groups.
struct AttentionGroups {
  std::size_t tokens = 0;
  std::size_t groups = 0, queries_per_group = 0, keys_per_group = 0;
  std::vector<std::size_t> query_index;  // groups * queries_per_group
  std::vector<std::size_t> key_index;    // groups * keys_per_group
  bool cls_global = false;               // token 0 queries every token

  std::uint64_t score_count() const {
    return static_cast<std::uint64_t>(groups) * queries_per_group * keys_per_group + (cls_global ? tokens : 0);
  }
};

inline AttentionGroups temporal_groups(TokenGrid g, bool with_cls) {
  AttentionGroups r;
  r.tokens = g.tokens();
  r.groups = g.patches_per_frame;
  r.queries_per_group = g.frames;
  r.keys_per_group = g.frames + (with_cls ? 1 : 0);
  r.cls_global = with_cls;
  for (std::size_t s = 0; s < g.patches_per_frame; ++s) {
    if (with_cls) r.key_index.push_back(0);
    for (std::size_t t = 0; t < g.frames; ++t) {
      r.query_index.push_back(token_index(s, t, g.patches_per_frame));
      r.key_index.push_back(token_index(s, t, g.patches_per_frame));
    }
  }
  return r;
}

inline AttentionGroups spatial_groups(TokenGrid g, bool with_cls) {
  AttentionGroups r;
  r.tokens = g.tokens();
  r.groups = g.frames;
  r.queries_per_group = g.patches_per_frame;
  r.keys_per_group = g.patches_per_frame + (with_cls ? 1 : 0);
  r.cls_global = with_cls;
  for (std::size_t t = 0; t < g.frames; ++t) {
    if (with_cls) r.key_index.push_back(0);
    for (std::size_t s = 0; s < g.patches_per_frame; ++s) {
      r.query_index.push_back(token_index(s, t, g.patches_per_frame));
      r.key_index.push_back(token_index(s, t, g.patches_per_frame));
    }
  }
  return r;
}

inline AttentionGroups full_groups(std::size_t tokens) {
  AttentionGroups r;
  r.tokens = tokens;
  r.groups = 1;
  r.queries_per_group = r.keys_per_group = tokens;
  for (std::size_t i = 0; i < tokens; ++i) {
    r.query_index.push_back(i);
    r.key_index.push_back(i);
  }
  return r;
}

/// [L, D] -> [h, L, D/h]
template <class T>
Tensor<T> split_heads(const Tensor<T>& x, std::size_t heads) {
  const std::size_t l = x.dim(0), d = x.dim(1);
  return transpose(reshape(x, {l, heads, d / heads}), 0, 1);
}

/// [h, L, Dh] -> [L, h*Dh]
template <class T>
Tensor<T> merge_heads(const Tensor<T>& x) {
  const std::size_t h = x.dim(0), l = x.dim(1), dh = x.dim(2);
  return reshape(transpose(x, 0, 1), {l, h * dh});
}

template <class T>
struct HeadProjections {
  Tensor<T> q, k, v;  // [h, L, Dh]
};

template <class T>
HeadProjections<T> qkv(const Tensor<T>& z, const AttentionParams<T>& p) {
  p.validate();
  if (z.rank() != 2 || z.dim(1) != p.dim())
    throw ShapeError("qkv: tokens " + shape_str(z.shape()) + " vs dim " + std::to_string(p.dim()));
  return {split_heads(matmul(z, p.wq), p.heads), split_heads(matmul(z, p.wk), p.heads),
          split_heads(matmul(z, p.wv), p.heads)};
}

/// Softmax(QK^T / sqrt(Dh)) V restricted to `groups`. Returns [h, L, Dh] in
/// token order.
template <class T>
Tensor<T> grouped_attention(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v, const AttentionGroups& g,
                            ScoreCounter* counter = nullptr, AttentionMap<T>* map = nullptr) {
  const std::size_t h = q.dim(0), l = q.dim(1), dh = q.dim(2);
  if (l != g.tokens || k.dim(1) != g.tokens || v.dim(1) != g.tokens)
    throw ShapeError("attention layout mismatch: " + std::to_string(l) + " tokens vs mask over " +
                     std::to_string(g.tokens));
  const T inv_scale = T(1) / std::sqrt(static_cast<T>(dh));
  const std::size_t G = g.groups, nq = g.queries_per_group, nk = g.keys_per_group;

  auto qg = reshape(gather(q, 1, g.query_index), {h * G, nq, dh});
  auto kg = reshape(gather(k, 1, g.key_index), {h * G, nk, dh});
  auto vg = reshape(gather(v, 1, g.key_index), {h * G, nk, dh});
  auto a = softmax(scale(matmul(qg, transpose(kg, 1, 2)), inv_scale), -1);
  auto og = reshape(matmul(a, vg), {h, G * nq, dh});

  std::vector<Tensor<T>> parts;
  std::vector<std::size_t> order;
  Tensor<T> ac;
  if (g.cls_global) {
    ac = softmax(scale(matmul(slice(q, 1, 0, 1), transpose(k, 1, 2)), inv_scale), -1);
    parts.push_back(matmul(ac, v));
    order.push_back(0);
  }
  parts.push_back(og);
  order.insert(order.end(), g.query_index.begin(), g.query_index.end());

  std::vector<std::size_t> where(l, l);
  for (std::size_t i = 0; i < order.size(); ++i) where[order[i]] = i;
  std::size_t missing = 0;
  for (auto& w : where)
    if (w == l) {
      w = order.size();
      ++missing;
    }
  if (missing) parts.push_back(Tensor<T>::zeros({h, 1, dh}));
  auto out = gather(concat(parts, 1), 1, where);

  if (counter) counter->scores += g.score_count();
  if (map) {
    map->heads = h;
    map->tokens = l;
    map->weights.assign(h * l * l, T(0));
    auto A = a.data();
    for (std::size_t hh = 0; hh < h; ++hh)
      for (std::size_t gi = 0; gi < G; ++gi)
        for (std::size_t j = 0; j < nq; ++j)
          for (std::size_t kk = 0; kk < nk; ++kk) {
            const std::size_t qi = g.query_index[gi * nq + j], ki = g.key_index[gi * nk + kk];
            map->weights[(hh * l + qi) * l + ki] = A[((hh * G + gi) * nq + j) * nk + kk];
          }
    if (g.cls_global) {
      auto C = ac.data();
      for (std::size_t hh = 0; hh < h; ++hh)
        for (std::size_t ki = 0; ki < l; ++ki) map->weights[hh * l * l + ki] = C[hh * l + ki];
    }
  }
  return out;
}

template <class T>
Tensor<T> project_out(const Tensor<T>& heads_out, const AttentionParams<T>& p) {
  return matmul(merge_heads(heads_out), p.wo);
}

/// Divided temporal attention; `with_cls` controls whether the class token
/// takes part in this pass.
template <class T>
Tensor<T> attend_time(const Tensor<T>& z, TokenGrid grid, const AttentionParams<T>& p, bool with_cls = true,
                      ScoreCounter* counter = nullptr, AttentionMap<T>* map = nullptr) {
  auto h = qkv(z, p);
  return project_out(grouped_attention(h.q, h.k, h.v, temporal_groups(grid, with_cls), counter, map), p);
}

/// Divided spatial attention; apply after attend_time within a block.
template <class T>
Tensor<T> attend_space(const Tensor<T>& z, TokenGrid grid, const AttentionParams<T>& p, bool with_cls = true,
                       ScoreCounter* counter = nullptr, AttentionMap<T>* map = nullptr) {
  auto h = qkv(z, p);
  return project_out(grouped_attention(h.q, h.k, h.v, spatial_groups(grid, with_cls), counter, map), p);
}

/// Queries from z_q, keys and values from z_kv, over all tokens.
template <class T>
Tensor<T> attend_cross(const Tensor<T>& z_q, const Tensor<T>& z_kv, const AttentionParams<T>& p,
                       ScoreCounter* counter = nullptr, AttentionMap<T>* map = nullptr) {
  if (z_q.shape() != z_kv.shape())
    throw ShapeError("attend_cross: query stream " + shape_str(z_q.shape()) + " vs key/value stream " +
                     shape_str(z_kv.shape()));
  p.validate();
  auto q = split_heads(matmul(z_q, p.wq), p.heads);
  auto k = split_heads(matmul(z_kv, p.wk), p.heads);
  auto v = split_heads(matmul(z_kv, p.wv), p.heads);
  return project_out(grouped_attention(q, k, v, full_groups(z_q.dim(0)), counter, map), p);
}

/// Joint self-attention over all tokens.
template <class T>
Tensor<T> attend_full(const Tensor<T>& z, const AttentionParams<T>& p, ScoreCounter* counter = nullptr,
                      AttentionMap<T>* map = nullptr) {
  auto h = qkv(z, p);
  return project_out(grouped_attention(h.q, h.k, h.v, full_groups(z.dim(0)), counter, map), p);
}

}  // namespace dkt
