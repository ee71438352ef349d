// Copyright 2026 The MixAttn Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

// Brute-force reference computations used only by tests. Nothing here calls
// into the code paths it is used to check.

#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "mixattn/config.hpp"
#include "mixattn/rng.hpp"

namespace mixattn::testing {

/// Layers are given directly (kind/window/share_from) so the oracle does not
/// depend on cache_groups.
inline bool visible(const ModelConfig& c, int producer, std::int64_t i, std::int64_t j) {
  const LayerSpec& p = c.layer(producer);
  if (j > i) return false;
  return p.kind == AttentionKind::kStandard || i - j < *p.window;
}

/// Lowest layer-0 position reachable from the output of layer `layer` at
/// position T-1, by explicit search of the attention graph.
///
/// Node (l, i) is the residual stream after layer l at position i. It
/// depends on (l-1, i), and on (p-1, j) for every key j its producer p
/// lets it see.
inline std::int64_t bfs_min_position(const ModelConfig& c, int layer, std::int64_t T) {
  const auto L = static_cast<std::size_t>(c.n_layers);
  std::vector<std::vector<char>> seen(L + 1, std::vector<char>(static_cast<std::size_t>(T), 0));
  std::vector<std::pair<int, std::int64_t>> stack{{layer, T - 1}};
  seen[static_cast<std::size_t>(layer)][static_cast<std::size_t>(T - 1)] = 1;
  std::int64_t lowest = T - 1;
  auto push = [&](int l, std::int64_t i) {
    auto& s = seen[static_cast<std::size_t>(l)][static_cast<std::size_t>(i)];
    if (!s) {
      s = 1;
      stack.emplace_back(l, i);
    }
  };
  while (!stack.empty()) {
    auto [l, i] = stack.back();
    stack.pop_back();
    if (l == 0) {
      lowest = std::min(lowest, i);
      continue;
    }
    push(l - 1, i);
    const LayerSpec& spec = c.layer(l);
    const int producer = spec.share_from.value_or(l);
    for (std::int64_t j = 0; j <= i; ++j) {
      if (visible(c, producer, i, j)) push(producer - 1, j);
    }
  }
  return lowest;
}

/// Cache bytes after T tokens, summed layer by layer over self-computing
/// layers.
inline std::int64_t naive_footprint(const ModelConfig& c, std::int64_t T, std::int64_t element_bytes) {
  std::int64_t total = 0;
  for (const LayerSpec& l : c.layers) {
    if (l.share_from) continue;
    const std::int64_t entries =
        l.kind == AttentionKind::kStandard ? T : std::min<std::int64_t>(T, *l.window);
    total += entries * 2 * c.n_kv_heads * c.head_dim * element_bytes;
  }
  return total;
}

/// Largest T with naive_footprint(T) <= avail by bisection; nullopt when
/// even a huge T fits (no growing cache).
inline std::optional<std::int64_t> search_capacity(const ModelConfig& c, std::int64_t avail,
                                                   std::int64_t element_bytes) {
  std::int64_t hi = std::int64_t{1} << 40;
  if (naive_footprint(c, hi, element_bytes) <= avail) return std::nullopt;
  std::int64_t lo = 0;  // footprint(0) = 0 <= avail
  while (hi - lo > 1) {
    const std::int64_t mid = lo + (hi - lo) / 2;
    if (naive_footprint(c, mid, element_bytes) <= avail) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return lo;
}

/// Random valid layout: each layer picks a kind and either its own cache or
/// an earlier self-computing layer of the same kind and window.
inline ModelConfig random_layout(Rng& rng, int max_layers, int max_window) {
  ModelConfig c;
  c.n_layers = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(max_layers)));
  c.n_q_heads = 2;
  c.n_kv_heads = 1;
  c.head_dim = 4;
  c.d_model = 8;
  c.vocab_size = 16;
  c.max_seq_len = 256;
  c.window_default = 4;
  c.ffn = {FfnSpec::Type::kDense, 8, 0, 0};
  for (int i = 1; i <= c.n_layers; ++i) {
    LayerSpec l;
    l.index = i;
    std::vector<int> candidates;
    const bool try_share = i > 1 && rng.below(2) == 0;
    if (try_share) {
      for (int p = 1; p < i; ++p) {
        if (c.layer(p).self_compute()) candidates.push_back(p);
      }
    }
    if (!candidates.empty()) {
      const int p = candidates[rng.below(candidates.size())];
      l.kind = c.layer(p).kind;
      l.window = c.layer(p).window;
      l.share_from = p;
    } else {
      // Mostly sliding so bounded lookbacks get exercised.
      l.kind = rng.below(4) == 0 ? AttentionKind::kStandard : AttentionKind::kSliding;
      if (l.kind == AttentionKind::kSliding) {
        l.window = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(max_window)));
      }
    }
    c.layers.push_back(l);
  }
  return c;
}

}  // namespace mixattn::testing
