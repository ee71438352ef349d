// Copyright 2026 The MixAttn Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <array>
#include <cassert>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <utility>
#include <vector>

#include "mixattn/error.hpp"

namespace mixattn::kernels {

// ---------------------------------------------------------------------------
// Dense helpers. Matrices are row-major [rows][cols].

/// y = W x, with W of shape [y.size()][x.size()].
inline void matvec(std::span<const float> w, std::span<const float> x, std::span<float> y) {
  assert(w.size() == x.size() * y.size());
  const std::size_t cols = x.size();
  for (std::size_t r = 0; r < y.size(); ++r) {
    const float* row = w.data() + r * cols;
    float acc = 0.0f;
    for (std::size_t c = 0; c < cols; ++c) {
      acc += row[c] * x[c];
    }
    y[r] = acc;
  }
}

inline float dot(std::span<const float> a, std::span<const float> b) {
  float acc = 0.0f;
  for (std::size_t i = 0; i < a.size(); ++i) {
    acc += a[i] * b[i];
  }
  return acc;
}

inline float silu(float x) { return x / (1.0f + std::exp(-x)); }

/// In-place max-subtracted softmax.
inline void softmax(std::span<float> x) {
  if (x.empty()) return;
  const float m = *std::max_element(x.begin(), x.end());
  float sum = 0.0f;
  for (float& v : x) {
    v = std::exp(v - m);
    sum += v;
  }
  for (float& v : x) {
    v /= sum;
  }
}

// ---------------------------------------------------------------------------
// Rotary position embedding

/// Rotates dimension pairs (2k, 2k+1) by position * theta^(-2k / head_dim).
inline void rope_rotate(std::span<float> v, std::int64_t position, double theta) {
  if (v.size() % 2 != 0) {
    throw ContractError("rope_rotate: head_dim must be even");
  }
  const double dim = static_cast<double>(v.size());
  for (std::size_t k = 0; k < v.size() / 2; ++k) {
    const double freq = std::pow(theta, -2.0 * static_cast<double>(k) / dim);
    const double angle = static_cast<double>(position) * freq;
    const auto c = static_cast<float>(std::cos(angle));
    const auto s = static_cast<float>(std::sin(angle));
    const float a = v[2 * k];
    const float b = v[2 * k + 1];
    v[2 * k] = a * c - b * s;
    v[2 * k + 1] = a * s + b * c;
  }
}

/// Rotates every head of a packed [n_heads][head_dim] vector.
inline void rope_rotate_heads(std::span<float> packed, int head_dim, std::int64_t position,
                              double theta) {
  for (std::size_t off = 0; off < packed.size(); off += static_cast<std::size_t>(head_dim)) {
    rope_rotate(packed.subspan(off, static_cast<std::size_t>(head_dim)), position, theta);
  }
}

// ---------------------------------------------------------------------------
// Grouped-query head mapping

/// Contiguous blocks: query heads [g*k, (g+1)*k) read KV head g, k = n_q / n_kv.
inline int gqa_map(int query_head, int n_q, int n_kv) { return query_head / (n_q / n_kv); }

// ---------------------------------------------------------------------------
// Masked attention

struct MaskRule {
  enum class Kind { kCausal, kCausalWindow };

  Kind kind = Kind::kCausal;
  std::int64_t window = 0;

  static MaskRule causal() { return {}; }
  static MaskRule causal_window(std::int64_t s) { return {Kind::kCausalWindow, s}; }

  /// Key at position j is visible to a query at position i. The window
  /// counts the query's own position.
  bool allows(std::int64_t i, std::int64_t j) const {
    if (j > i) return false;
    return kind == Kind::kCausal || i - j <= window - 1;
  }
};

/// One contiguous run of cache entries. keys/values are packed
/// [entry][n_kv_heads][head_dim].
struct KVSegment {
  std::span<const std::int64_t> positions;
  std::span<const float> keys;
  std::span<const float> values;
};

/// Logically ordered keys/values, possibly split across two physical runs
/// (a wrapped ring buffer). Positions ascend across segments.
struct KVView {
  std::array<KVSegment, 2> segments{};
  int n_segments = 0;
  int n_kv_heads = 0;
  int head_dim = 0;

  std::size_t size() const {
    std::size_t n = 0;
    for (int s = 0; s < n_segments; ++s) n += segments[s].positions.size();
    return n;
  }

  template <typename Fn>
  void for_each(Fn&& fn) const {
    const auto width = static_cast<std::size_t>(n_kv_heads) * head_dim;
    for (int s = 0; s < n_segments; ++s) {
      const KVSegment& seg = segments[s];
      for (std::size_t e = 0; e < seg.positions.size(); ++e) {
        fn(seg.positions[e], seg.keys.subspan(e * width, width),
           seg.values.subspan(e * width, width));
      }
    }
  }
};

/// Attends one query head at position `query_pos` over `kv` (KV head
/// `kv_head`). Writes head_dim outputs and returns the number of keys the
/// rule admitted. Weights, if requested, are appended in view order for the
/// admitted keys only.
inline std::int64_t attend(std::span<const float> q, std::int64_t query_pos, const KVView& kv,
                           int kv_head, MaskRule rule, float scale, std::span<float> out,
                           std::vector<float>* weights_out = nullptr) {
  const auto hd = static_cast<std::size_t>(kv.head_dim);
  const std::size_t head_off = static_cast<std::size_t>(kv_head) * hd;

  thread_local std::vector<float> scores;
  scores.clear();
  kv.for_each([&](std::int64_t pos, std::span<const float> k, std::span<const float>) {
    if (rule.allows(query_pos, pos)) {
      scores.push_back(dot(q, k.subspan(head_off, hd)) * scale);
    }
  });
  if (scores.empty()) {
    throw ContractError("masked attention: query has no admissible keys");
  }
  softmax(scores);

  std::fill(out.begin(), out.end(), 0.0f);
  std::size_t idx = 0;
  kv.for_each([&](std::int64_t pos, std::span<const float>, std::span<const float> v) {
    if (!rule.allows(query_pos, pos)) return;
    const float w = scores[idx++];
    const float* vh = v.data() + head_off;
    for (std::size_t d = 0; d < hd; ++d) {
      out[d] += w * vh[d];
    }
  });
  if (weights_out) {
    weights_out->insert(weights_out->end(), scores.begin(), scores.end());
  }
  return static_cast<std::int64_t>(scores.size());
}

/// Multi-head masked attention over a cache view.
///
/// queries: [n_queries][n_q_heads][head_dim], one row per query position.
/// out: same shape. Returns the total number of admitted (query head, key)
/// pairs.
inline std::int64_t masked_attention(std::span<const float> queries,
                                     std::span<const std::int64_t> query_positions,
                                     const KVView& kv, int n_q_heads, MaskRule rule,
                                     std::span<float> out) {
  const auto hd = static_cast<std::size_t>(kv.head_dim);
  const std::size_t row = hd * static_cast<std::size_t>(n_q_heads);
  const float scale = 1.0f / std::sqrt(static_cast<float>(kv.head_dim));
  std::int64_t admitted = 0;
  for (std::size_t t = 0; t < query_positions.size(); ++t) {
    for (int h = 0; h < n_q_heads; ++h) {
      const std::size_t off = t * row + static_cast<std::size_t>(h) * hd;
      admitted += attend(queries.subspan(off, hd), query_positions[t], kv,
                         gqa_map(h, n_q_heads, kv.n_kv_heads), rule, scale, out.subspan(off, hd));
    }
  }
  return admitted;
}

// ---------------------------------------------------------------------------
// Normalization and feed-forward

inline void rmsnorm(std::span<const float> x, std::span<const float> gain, float eps,
                    std::span<float> out) {
  float ss = 0.0f;
  for (float v : x) ss += v * v;
  const float inv = 1.0f / std::sqrt(ss / static_cast<float>(x.size()) + eps);
  for (std::size_t i = 0; i < x.size(); ++i) {
    out[i] = x[i] * inv * gain[i];
  }
}

/// Weights of one SwiGLU block: gate/up [hidden][d], down [d][hidden].
struct SwiGluWeights {
  std::span<const float> gate;
  std::span<const float> up;
  std::span<const float> down;
};

inline void swiglu_forward(std::span<const float> x, const SwiGluWeights& w, int hidden_dim,
                           std::span<float> out) {
  std::vector<float> g(static_cast<std::size_t>(hidden_dim));
  std::vector<float> u(static_cast<std::size_t>(hidden_dim));
  matvec(w.gate, x, g);
  matvec(w.up, x, u);
  for (std::size_t i = 0; i < g.size(); ++i) {
    g[i] = silu(g[i]) * u[i];
  }
  matvec(w.down, g, out);
}

struct ExpertChoice {
  int expert = 0;
  float weight = 0.0f;
};

/// Softmax over router logits, keep the top_k by probability (ties to the
/// lower expert index), renormalize over the kept experts.
inline std::vector<ExpertChoice> select_experts(std::span<const float> router_logits, int top_k) {
  std::vector<float> probs(router_logits.begin(), router_logits.end());
  softmax(probs);
  std::vector<int> order(probs.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return probs[a] > probs[b]; });
  std::vector<ExpertChoice> chosen;
  float total = 0.0f;
  for (int i = 0; i < top_k; ++i) {
    chosen.push_back({order[i], probs[order[i]]});
    total += probs[order[i]];
  }
  for (auto& c : chosen) {
    c.weight /= total;
  }
  return chosen;
}

struct MoEWeights {
  std::span<const float> router;  // [n_experts][d]
  std::vector<SwiGluWeights> experts;
};

inline void moe_forward(std::span<const float> x, const MoEWeights& w, int hidden_dim, int top_k,
                        std::span<float> out) {
  std::vector<float> logits(w.experts.size());
  matvec(w.router, x, logits);
  std::fill(out.begin(), out.end(), 0.0f);
  std::vector<float> expert_out(out.size());
  for (const ExpertChoice& c : select_experts(logits, top_k)) {
    swiglu_forward(x, w.experts[static_cast<std::size_t>(c.expert)], hidden_dim, expert_out);
    for (std::size_t i = 0; i < out.size(); ++i) {
      out[i] += c.weight * expert_out[i];
    }
  }
}

}  // namespace mixattn::kernels
