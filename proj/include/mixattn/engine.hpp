// Copyright 2026 The MixAttn Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mixattn/config.hpp"
#include "mixattn/error.hpp"
#include "mixattn/kernels.hpp"
#include "mixattn/kvcache.hpp"
#include "mixattn/rng.hpp"
#include "mixattn/weights.hpp"

namespace mixattn {

using TokenId = std::int32_t;

/// Views into the weights of one layer. k/v are empty for layers that reuse
/// another layer's cache.
struct LayerWeights {
  std::span<const float> attn_norm;
  std::span<const float> q;
  std::span<const float> k;
  std::span<const float> v;
  std::span<const float> out;
  std::span<const float> ffn_norm;
  kernels::SwiGluWeights dense;
  kernels::MoEWeights moe;
};

/// Immutable, thread-shareable model: config, derived cache layout and
/// weights.
class Model {
 public:
  explicit Model(ModelWeights weights) : weights_(std::move(weights)) {
    const ModelConfig& c = weights_.config;
    layout_ = cache_groups(c);
    for (const TensorSpec& spec : expected_tensors(c)) {
      if (!weights_.contains(spec.name) || weights_.at(spec.name).shape != spec.shape) {
        throw ContractError("weights do not match config at tensor '" + spec.name + "'");
      }
    }
    if (weights_.tensors.size() != expected_tensors(c).size()) {
      throw ContractError("weights carry tensors the config does not define");
    }
    auto t = [&](const std::string& name) { return std::span<const float>(weights_.at(name).data); };
    for (const LayerSpec& l : c.layers) {
      const std::string p = "layers." + std::to_string(l.index) + ".";
      LayerWeights lw;
      lw.attn_norm = t(p + "attn_norm");
      lw.q = t(p + "attn.q");
      if (l.self_compute()) {
        lw.k = t(p + "attn.k");
        lw.v = t(p + "attn.v");
      }
      lw.out = t(p + "attn.out");
      lw.ffn_norm = t(p + "ffn_norm");
      auto swiglu = [&](const std::string& prefix) {
        return kernels::SwiGluWeights{t(prefix + "gate"), t(prefix + "up"), t(prefix + "down")};
      };
      if (c.ffn.type == FfnSpec::Type::kDense) {
        lw.dense = swiglu(p + "ffn.");
      } else {
        lw.moe.router = t(p + "ffn.router");
        for (int e = 0; e < c.ffn.n_experts; ++e) {
          lw.moe.experts.push_back(swiglu(p + "ffn.experts." + std::to_string(e) + "."));
        }
      }
      layers_.push_back(std::move(lw));
    }
    embedding_ = t("embedding");
    final_norm_ = t("final_norm");
    unembedding_ = t("unembedding");
  }

  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;
  Model(Model&&) = default;
  Model& operator=(Model&&) = default;

  const ModelConfig& config() const { return weights_.config; }
  const CacheLayout& layout() const { return layout_; }
  const ModelWeights& weights() const { return weights_; }
  const LayerWeights& layer(int index) const { return layers_.at(index - 1); }

  std::span<const float> embedding_row(TokenId token) const {
    const auto d = static_cast<std::size_t>(config().d_model);
    return embedding_.subspan(static_cast<std::size_t>(token) * d, d);
  }
  std::span<const float> final_norm() const { return final_norm_; }
  std::span<const float> unembedding() const { return unembedding_; }

  /// Applies the configured feed-forward block of one layer.
  void ffn(int index, std::span<const float> x, std::span<float> out) const {
    const LayerWeights& lw = layer(index);
    const FfnSpec& f = config().ffn;
    if (f.type == FfnSpec::Type::kDense) {
      kernels::swiglu_forward(x, lw.dense, f.hidden_dim, out);
    } else {
      kernels::moe_forward(x, lw.moe, f.hidden_dim, f.top_k, out);
    }
  }

 private:
  ModelWeights weights_;
  CacheLayout layout_;
  std::vector<LayerWeights> layers_;
  std::span<const float> embedding_;
  std::span<const float> final_norm_;
  std::span<const float> unembedding_;
};

/// Per-sequence state: one cache per group plus counters. Owned by exactly
/// one in-flight sequence.
class Session {
 public:
  explicit Session(const Model& model)
      : groups_(make_cache_groups(model.config(), model.layout())) {}

  std::int64_t position() const { return position_; }
  std::span<const KVCacheGroup> groups() const { return groups_; }
  CacheStats stats(std::int64_t element_bytes = 4) const { return mixattn::stats(groups_, element_bytes); }

  /// Attention FLOPs so far: 4 * head_dim per admitted (query head, key)
  /// pair, i.e. one multiply-add for the score and one for the value mix.
  std::int64_t attention_flops() const { return attention_flops_; }

  std::int64_t total_appends() const {
    std::int64_t n = 0;
    for (const auto& g : groups_) n += g.appends();
    return n;
  }

 private:
  friend std::vector<float> decode_step(const Model&, Session&, TokenId, std::int64_t);

  std::vector<KVCacheGroup> groups_;
  std::int64_t position_ = 0;
  std::int64_t attention_flops_ = 0;
};

inline kernels::MaskRule mask_rule_for(const CacheGroupSpec& g) {
  return g.kind == AttentionKind::kStandard ? kernels::MaskRule::causal()
                                            : kernels::MaskRule::causal_window(*g.window);
}

/// Runs one token through every layer at `position`, appending to the cache
/// of each self-computing layer. Returns logits over the vocabulary.
inline std::vector<float> decode_step(const Model& model, Session& session, TokenId token,
                                      std::int64_t position) {
  const ModelConfig& c = model.config();
  if (position != session.position_) {
    throw ContractError("decode_step: position " + std::to_string(position) +
                        " but session is at " + std::to_string(session.position_));
  }
  if (position >= c.max_seq_len) {
    throw ContractError("decode_step: position " + std::to_string(position) +
                        " exceeds max_seq_len " + std::to_string(c.max_seq_len));
  }
  if (token < 0 || token >= c.vocab_size) {
    throw ContractError("decode_step: token id " + std::to_string(token) + " out of range");
  }

  const auto d = static_cast<std::size_t>(c.d_model);
  const auto qw = static_cast<std::size_t>(c.q_width());
  const auto kvw = static_cast<std::size_t>(c.kv_width());
  const float scale = 1.0f / std::sqrt(static_cast<float>(c.head_dim));

  std::vector<float> x(model.embedding_row(token).begin(), model.embedding_row(token).end());
  std::vector<float> h(d), q(qw), k(kvw), v(kvw), attn(qw), proj(d);

  for (const LayerSpec& l : c.layers) {
    const LayerWeights& lw = model.layer(l.index);
    const CacheGroupSpec& gs = model.layout().group(model.layout().group_for_layer(l.index));
    KVCacheGroup& cache = session.groups_[static_cast<std::size_t>(gs.id)];

    kernels::rmsnorm(x, lw.attn_norm, kNormEps, h);
    kernels::matvec(lw.q, h, q);
    kernels::rope_rotate_heads(q, c.head_dim, position, c.rope_theta);
    if (l.self_compute()) {
      kernels::matvec(lw.k, h, k);
      kernels::matvec(lw.v, h, v);
      kernels::rope_rotate_heads(k, c.head_dim, position, c.rope_theta);
      cache.append(position, k, v);
    }

    const kernels::KVView view = cache.view();
    const kernels::MaskRule rule = mask_rule_for(gs);
    const auto hd = static_cast<std::size_t>(c.head_dim);
    std::int64_t admitted = 0;
    for (int head = 0; head < c.n_q_heads; ++head) {
      const std::size_t off = static_cast<std::size_t>(head) * hd;
      admitted += kernels::attend(std::span<const float>(q).subspan(off, hd), position, view,
                                  kernels::gqa_map(head, c.n_q_heads, c.n_kv_heads), rule, scale,
                                  std::span<float>(attn).subspan(off, hd));
    }
    session.attention_flops_ += admitted * 4 * c.head_dim;

    kernels::matvec(lw.out, attn, proj);
    for (std::size_t i = 0; i < d; ++i) x[i] += proj[i];

    kernels::rmsnorm(x, lw.ffn_norm, kNormEps, h);
    model.ffn(l.index, h, proj);
    for (std::size_t i = 0; i < d; ++i) x[i] += proj[i];
  }

  kernels::rmsnorm(x, model.final_norm(), kNormEps, h);
  std::vector<float> logits(static_cast<std::size_t>(c.vocab_size));
  kernels::matvec(model.unembedding(), h, logits);
  ++session.position_;
  return logits;
}

struct PrefillResult {
  std::vector<float> logits;  // at the last prompt position
  Session session;
};

/// Feeds the prompt token by token through decode_step. If `all_logits` is
/// given, it receives the logits of every prompt position.
inline PrefillResult prefill(const Model& model, std::span<const TokenId> prompt,
                             std::vector<std::vector<float>>* all_logits = nullptr) {
  if (prompt.empty()) {
    throw ContractError("prefill: empty prompt");
  }
  if (static_cast<std::int64_t>(prompt.size()) > model.config().max_seq_len) {
    throw ContractError("prefill: prompt longer than max_seq_len");
  }
  PrefillResult r{{}, Session(model)};
  for (std::size_t i = 0; i < prompt.size(); ++i) {
    r.logits = decode_step(model, r.session, prompt[i], static_cast<std::int64_t>(i));
    if (all_logits) all_logits->push_back(r.logits);
  }
  return r;
}

// ---------------------------------------------------------------------------
// Generation

struct Sampling {
  enum class Kind { kGreedy, kTemperature };

  Kind kind = Kind::kGreedy;
  float temperature = 1.0f;
  std::uint64_t seed = 0;

  static Sampling greedy() { return {}; }
  static Sampling with_temperature(float t, std::uint64_t seed) {
    return {Kind::kTemperature, t, seed};
  }
};

struct GenerationRequest {
  std::vector<TokenId> prompt;
  int max_new_tokens = 0;
  Sampling sampling;
  bool keep_logits = false;
};

struct GenerationOutput {
  std::vector<TokenId> tokens;
  std::vector<std::vector<float>> step_logits;  // only with keep_logits
  CacheStats final_stats;                       // 4-byte elements
  double prefill_seconds = 0.0;
  std::vector<double> decode_seconds;  // one per decode step
  std::int64_t prefill_attention_flops = 0;
  std::int64_t decode_attention_flops = 0;
  std::int64_t decode_steps = 0;
};

/// Highest logit, ties to the lowest token id.
inline TokenId greedy_pick(std::span<const float> logits) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < logits.size(); ++i) {
    if (logits[i] > logits[best]) best = i;
  }
  return static_cast<TokenId>(best);
}

inline TokenId sample_pick(std::span<const float> logits, float temperature, Rng& rng) {
  std::vector<double> p(logits.size());
  double m = -INFINITY;
  for (float l : logits) m = std::max(m, static_cast<double>(l) / temperature);
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = std::exp(static_cast<double>(logits[i]) / temperature - m);
    sum += p[i];
  }
  const double u = rng.uniform_double() * sum;
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    acc += p[i];
    if (u < acc) return static_cast<TokenId>(i);
  }
  return static_cast<TokenId>(p.size() - 1);
}

/// Prefills the prompt, then produces max_new_tokens tokens. Every generated
/// token is fed back, so on return the caches cover prompt + output.
inline GenerationOutput generate(const Model& model, const GenerationRequest& req) {
  const ModelConfig& c = model.config();
  if (static_cast<std::int64_t>(req.prompt.size()) + req.max_new_tokens > c.max_seq_len) {
    throw ContractError("generate: prompt + max_new_tokens exceeds max_seq_len");
  }
  if (req.max_new_tokens < 0) {
    throw ContractError("generate: negative max_new_tokens");
  }
  for (TokenId t : req.prompt) {
    if (t < 0 || t >= c.vocab_size) {
      throw ContractError("generate: prompt token id " + std::to_string(t) + " out of range");
    }
  }
  using Clock = std::chrono::steady_clock;
  GenerationOutput out;

  auto t0 = Clock::now();
  PrefillResult pre = prefill(model, req.prompt);
  out.prefill_seconds = std::chrono::duration<double>(Clock::now() - t0).count();
  out.prefill_attention_flops = pre.session.attention_flops();

  Rng rng(req.sampling.seed);
  auto pick = [&](const std::vector<float>& logits) {
    return req.sampling.kind == Sampling::Kind::kGreedy
               ? greedy_pick(logits)
               : sample_pick(logits, req.sampling.temperature, rng);
  };

  std::vector<float> logits = std::move(pre.logits);
  Session& session = pre.session;
  for (int i = 0; i < req.max_new_tokens; ++i) {
    if (req.keep_logits) out.step_logits.push_back(logits);
    const TokenId next = pick(logits);
    out.tokens.push_back(next);
    auto t1 = Clock::now();
    logits = decode_step(model, session, next, session.position());
    out.decode_seconds.push_back(std::chrono::duration<double>(Clock::now() - t1).count());
    ++out.decode_steps;
  }
  out.decode_attention_flops = session.attention_flops() - out.prefill_attention_flops;
  out.final_stats = session.stats(4);
  return out;
}

// ---------------------------------------------------------------------------
// Reference forward

/// Full-sequence forward with dense T x T masks and no caches: every
/// consumer layer recomputes its producer's K/V from the producer's saved
/// normalized input. Returns logits at every position.
inline std::vector<std::vector<float>> oracle_logits(const Model& model,
                                                     std::span<const TokenId> tokens) {
  const ModelConfig& c = model.config();
  if (static_cast<std::int64_t>(tokens.size()) > c.max_seq_len) {
    throw ContractError("oracle_logits: sequence longer than max_seq_len");
  }
  const std::size_t T = tokens.size();
  const auto d = static_cast<std::size_t>(c.d_model);
  const auto hd = static_cast<std::size_t>(c.head_dim);
  const auto nq = static_cast<std::size_t>(c.n_q_heads);
  const auto nkv = static_cast<std::size_t>(c.n_kv_heads);
  const std::size_t group = nq / nkv;
  const float scale = 1.0f / std::sqrt(static_cast<float>(c.head_dim));

  std::vector<std::vector<float>> x(T);
  for (std::size_t t = 0; t < T; ++t) {
    auto row = model.embedding_row(tokens[t]);
    x[t].assign(row.begin(), row.end());
  }
  // Normalized attention inputs of self-computing layers, by layer ordinal.
  std::vector<std::vector<std::vector<float>>> producer_input(c.layers.size() + 1);

  std::vector<float> proj(d);
  for (const LayerSpec& l : c.layers) {
    const LayerWeights& lw = model.layer(l.index);
    std::vector<std::vector<float>> h(T, std::vector<float>(d));
    for (std::size_t t = 0; t < T; ++t) kernels::rmsnorm(x[t], lw.attn_norm, kNormEps, h[t]);
    if (l.self_compute()) producer_input[static_cast<std::size_t>(l.index)] = h;

    const int src = l.share_from.value_or(l.index);
    const LayerSpec& producer = c.layer(src);
    const LayerWeights& pw = model.layer(src);
    const auto& hp = producer_input[static_cast<std::size_t>(src)];

    std::vector<std::vector<float>> q(T, std::vector<float>(nq * hd));
    std::vector<std::vector<float>> k(T, std::vector<float>(nkv * hd));
    std::vector<std::vector<float>> v(T, std::vector<float>(nkv * hd));
    for (std::size_t t = 0; t < T; ++t) {
      kernels::matvec(lw.q, h[t], q[t]);
      kernels::matvec(pw.k, hp[t], k[t]);
      kernels::matvec(pw.v, hp[t], v[t]);
      kernels::rope_rotate_heads(q[t], c.head_dim, static_cast<std::int64_t>(t), c.rope_theta);
      kernels::rope_rotate_heads(k[t], c.head_dim, static_cast<std::int64_t>(t), c.rope_theta);
    }

    std::vector<std::vector<char>> mask(T, std::vector<char>(T, 0));
    for (std::size_t i = 0; i < T; ++i) {
      for (std::size_t j = 0; j <= i; ++j) {
        mask[i][j] = producer.kind == AttentionKind::kStandard ||
                     i - j < static_cast<std::size_t>(*producer.window);
      }
    }

    for (std::size_t i = 0; i < T; ++i) {
      std::vector<float> attn(nq * hd, 0.0f);
      for (std::size_t head = 0; head < nq; ++head) {
        const std::size_t kvh = head / group;
        std::vector<float> s(T, -INFINITY);
        float m = -INFINITY;
        for (std::size_t j = 0; j < T; ++j) {
          if (!mask[i][j]) continue;
          float acc = 0.0f;
          for (std::size_t e = 0; e < hd; ++e) acc += q[i][head * hd + e] * k[j][kvh * hd + e];
          s[j] = acc * scale;
          m = std::max(m, s[j]);
        }
        float z = 0.0f;
        for (std::size_t j = 0; j < T; ++j) {
          s[j] = mask[i][j] ? std::exp(s[j] - m) : 0.0f;
          z += s[j];
        }
        for (std::size_t j = 0; j < T; ++j) {
          if (!mask[i][j]) continue;
          for (std::size_t e = 0; e < hd; ++e) {
            attn[head * hd + e] += s[j] / z * v[j][kvh * hd + e];
          }
        }
      }
      kernels::matvec(lw.out, attn, proj);
      for (std::size_t e = 0; e < d; ++e) x[i][e] += proj[e];
      std::vector<float> hn(d);
      kernels::rmsnorm(x[i], lw.ffn_norm, kNormEps, hn);
      model.ffn(l.index, hn, proj);
      for (std::size_t e = 0; e < d; ++e) x[i][e] += proj[e];
    }
  }

  std::vector<std::vector<float>> logits(T, std::vector<float>(static_cast<std::size_t>(c.vocab_size)));
  std::vector<float> hn(d);
  for (std::size_t t = 0; t < T; ++t) {
    kernels::rmsnorm(x[t], model.final_norm(), kNormEps, hn);
    kernels::matvec(model.unembedding(), hn, logits[t]);
  }
  return logits;
}

}  // namespace mixattn
