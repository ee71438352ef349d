// Copyright 2026 The MixAttn Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "mixattn/config.hpp"
#include "mixattn/error.hpp"

namespace mixattn {

// ---------------------------------------------------------------------------
// KV footprint

struct GroupFootprint {
  int group_id = 0;
  int producer = 0;
  AttentionKind kind = AttentionKind::kStandard;
  std::optional<int> window;
  std::int64_t entries = 0;
  std::int64_t bytes = 0;
};

struct FootprintReport {
  std::int64_t tokens = 0;
  std::int64_t element_bytes = 0;
  std::vector<GroupFootprint> groups;
  std::int64_t total_bytes = 0;
  /// Marginal bytes per extra token once every sliding group is full.
  std::int64_t steady_bytes_per_token = 0;
  /// Bytes held by sliding groups once saturated.
  std::int64_t sliding_saturated_bytes = 0;
};

inline std::int64_t bytes_per_entry(const ModelConfig& c, std::int64_t element_bytes) {
  if (element_bytes < 1) {
    throw ContractError("element_bytes must be >= 1");
  }
  return 2 * static_cast<std::int64_t>(c.kv_width()) * element_bytes;
}

/// Cache bytes after `tokens` tokens: standard groups hold every token,
/// sliding groups at most their window.
inline FootprintReport kv_footprint(const ModelConfig& c, std::int64_t tokens,
                                    std::int64_t element_bytes) {
  if (tokens < 0) {
    throw ContractError("kv_footprint: negative token count");
  }
  const CacheLayout layout = cache_groups(c);
  const std::int64_t per_entry = bytes_per_entry(c, element_bytes);
  FootprintReport r;
  r.tokens = tokens;
  r.element_bytes = element_bytes;
  for (const auto& g : layout.groups) {
    GroupFootprint f;
    f.group_id = g.id;
    f.producer = g.producer;
    f.kind = g.kind;
    f.window = g.window;
    if (g.kind == AttentionKind::kStandard) {
      f.entries = tokens;
      r.steady_bytes_per_token += per_entry;
    } else {
      f.entries = std::min<std::int64_t>(tokens, *g.window);
      r.sliding_saturated_bytes += static_cast<std::int64_t>(*g.window) * per_entry;
    }
    f.bytes = f.entries * per_entry;
    r.total_bytes += f.bytes;
    r.groups.push_back(f);
  }
  return r;
}

// ---------------------------------------------------------------------------
// Capacity

struct CapacityReport {
  std::int64_t budget_bytes = 0;
  std::int64_t reserved_bytes = 0;
  std::int64_t element_bytes = 0;
  std::int64_t steady_bytes_per_token = 0;
  /// Largest number of cached tokens whose footprint fits the budget.
  /// Meaningless when `unbounded`.
  std::int64_t max_total_tokens = 0;
  /// No standard groups and the saturated sliding caches fit.
  bool unbounded = false;
  std::string warning;
};

/// Closed form over the piecewise-linear footprint: between consecutive
/// sliding windows the footprint grows by (standard groups + unsaturated
/// sliding groups) x bytes per entry per token.
inline CapacityReport capacity(const ModelConfig& c, std::int64_t budget_bytes,
                               std::int64_t element_bytes, std::int64_t reserved_bytes = 0) {
  const CacheLayout layout = cache_groups(c);
  CapacityReport r;
  r.budget_bytes = budget_bytes;
  r.reserved_bytes = reserved_bytes;
  r.element_bytes = element_bytes;
  const std::int64_t per_entry = bytes_per_entry(c, element_bytes);

  std::int64_t n_standard = 0;
  std::vector<std::int64_t> windows;
  for (const auto& g : layout.groups) {
    if (g.kind == AttentionKind::kStandard) {
      ++n_standard;
    } else {
      windows.push_back(*g.window);
    }
  }
  std::sort(windows.begin(), windows.end());
  r.steady_bytes_per_token = n_standard * per_entry;

  if (budget_bytes <= reserved_bytes) {
    r.warning = "budget does not exceed reserved bytes; no room for cache";
    return r;
  }
  const std::int64_t avail = budget_bytes - reserved_bytes;
  const auto n = static_cast<std::int64_t>(windows.size());
  std::int64_t prefix = 0;  // sum of saturated windows
  for (std::int64_t i = 0; i <= n; ++i) {
    const std::int64_t slope = r.steady_bytes_per_token + (n - i) * per_entry;
    const std::int64_t base = prefix * per_entry;
    if (i < n) {
      const std::int64_t upper = windows[static_cast<std::size_t>(i)];
      if (slope * upper + base <= avail) {
        prefix += upper;
        continue;
      }
    } else if (slope == 0) {
      r.unbounded = true;
      r.max_total_tokens = std::numeric_limits<std::int64_t>::max();
      return r;
    }
    r.max_total_tokens = (avail - base) / slope;
    return r;
  }
  return r;
}

// ---------------------------------------------------------------------------
// Receptive field

struct ReachabilityReport {
  std::int64_t tokens = 0;
  /// Farthest lookback after each layer at output position tokens - 1,
  /// capped at tokens - 1.
  std::vector<std::int64_t> layer_lookback;
  std::int64_t max_lookback = 0;
  bool unbounded = false;
};

/// Structural information-flow bound through the layer stack.
///
/// A layer's attention reads K/V computed from its producer's input, so
/// after layer l with producer p and window s the lookback is
/// max(lookback[l-1], lookback[p-1] + s - 1); any standard layer makes
/// position 0 reachable.
inline ReachabilityReport receptive_field(const ModelConfig& c, std::int64_t tokens) {
  require_valid(c);
  if (tokens < 1) {
    throw ContractError("receptive_field: need at least one token");
  }
  constexpr std::int64_t kInf = std::numeric_limits<std::int64_t>::max();
  std::vector<std::int64_t> raw(c.layers.size() + 1, 0);
  ReachabilityReport r;
  r.tokens = tokens;
  for (const LayerSpec& l : c.layers) {
    const LayerSpec& src = c.layer(l.share_from.value_or(l.index));
    const auto i = static_cast<std::size_t>(l.index);
    if (src.kind == AttentionKind::kStandard) {
      raw[i] = kInf;
      r.unbounded = true;
    } else {
      const std::int64_t via_kv = raw[static_cast<std::size_t>(src.index) - 1] == kInf
                                      ? kInf
                                      : raw[static_cast<std::size_t>(src.index) - 1] + *src.window - 1;
      raw[i] = std::max(raw[i - 1], via_kv);
    }
    r.layer_lookback.push_back(std::min(raw[i], tokens - 1));
  }
  r.max_lookback = r.layer_lookback.empty() ? 0 : r.layer_lookback.back();
  return r;
}

// ---------------------------------------------------------------------------
// Attention work

/// Attention FLOPs of decoding the token at `position` (0-based), counted
/// like the engine: 4 * head_dim per admitted (query head, key) pair.
inline std::int64_t decode_attention_flops(const ModelConfig& c, std::int64_t position) {
  require_valid(c);
  std::int64_t keys = 0;
  for (const LayerSpec& l : c.layers) {
    const LayerSpec& src = c.layer(l.share_from.value_or(l.index));
    keys += src.kind == AttentionKind::kStandard
                ? position + 1
                : std::min<std::int64_t>(position + 1, *src.window);
  }
  return keys * c.n_q_heads * 4 * c.head_dim;
}

// ---------------------------------------------------------------------------
// Layout comparison

struct LayoutRow {
  std::string name;
  std::int64_t footprint_bytes = 0;
  std::int64_t steady_bytes_per_token = 0;
  std::int64_t capacity_tokens = 0;
  bool capacity_unbounded = false;
  std::int64_t max_lookback = 0;
  bool unbounded_reach = false;
  std::int64_t cache_groups = 0;
};

struct LayoutComparison {
  std::int64_t tokens = 0;
  std::int64_t budget_bytes = 0;
  std::int64_t element_bytes = 0;
  std::int64_t reserved_bytes = 0;
  std::vector<LayoutRow> rows;
};

inline LayoutComparison compare_layouts(const std::vector<ModelConfig>& configs, std::int64_t tokens,
                                        std::int64_t budget_bytes, std::int64_t element_bytes,
                                        std::int64_t reserved_bytes = 0) {
  if (configs.size() < 2) {
    throw ContractError("compare_layouts: need at least two configs");
  }
  LayoutComparison cmp{tokens, budget_bytes, element_bytes, reserved_bytes, {}};
  for (std::size_t i = 0; i < configs.size(); ++i) {
    const ModelConfig& c = configs[i];
    const auto fp = kv_footprint(c, tokens, element_bytes);
    const auto cap = capacity(c, budget_bytes, element_bytes, reserved_bytes);
    const auto reach = receptive_field(c, tokens);
    LayoutRow row;
    row.name = c.name.empty() ? "config-" + std::to_string(i) : c.name;
    row.footprint_bytes = fp.total_bytes;
    row.steady_bytes_per_token = fp.steady_bytes_per_token;
    row.capacity_tokens = cap.max_total_tokens;
    row.capacity_unbounded = cap.unbounded;
    row.max_lookback = reach.max_lookback;
    row.unbounded_reach = reach.unbounded;
    row.cache_groups = static_cast<std::int64_t>(fp.groups.size());
    cmp.rows.push_back(std::move(row));
  }
  return cmp;
}

}  // namespace mixattn
