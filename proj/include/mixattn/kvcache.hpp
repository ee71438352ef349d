// Copyright 2026 The MixAttn Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mixattn/config.hpp"
#include "mixattn/error.hpp"
#include "mixattn/kernels.hpp"

namespace mixattn {

/// K/V storage for one cache group.
///
/// Standard groups grow without bound. Sliding groups are a ring of
/// `window` slots: once full, each append overwrites the slot holding the
/// lowest position. Keys are stored already rotated at their absolute
/// position.
class KVCacheGroup {
 public:
  KVCacheGroup(int group_id, AttentionKind kind, std::optional<int> window, int n_kv_heads,
               int head_dim)
      : id_(group_id),
        kind_(kind),
        window_(kind == AttentionKind::kSliding ? window.value_or(0) : 0),
        n_kv_heads_(n_kv_heads),
        head_dim_(head_dim) {
    if (kind_ == AttentionKind::kSliding) {
      if (window_ < 1) {
        throw ContractError("sliding cache group needs window >= 1");
      }
      const auto cap = static_cast<std::size_t>(window_);
      positions_.resize(cap);
      keys_.resize(cap * width());
      values_.resize(cap * width());
    }
  }

  int id() const { return id_; }
  AttentionKind kind() const { return kind_; }
  int window() const { return window_; }
  std::size_t width() const { return static_cast<std::size_t>(n_kv_heads_) * head_dim_; }

  /// Number of entries currently held.
  std::int64_t size() const { return size_; }
  std::int64_t appends() const { return appends_; }
  std::optional<std::int64_t> last_position() const {
    if (appends_ == 0) return std::nullopt;
    return last_pos_;
  }

  /// k and v are packed [n_kv_heads][head_dim].
  void append(std::int64_t position, std::span<const float> k, std::span<const float> v) {
    if (k.size() != width() || v.size() != width()) {
      throw ContractError("kv append: wrong K/V width");
    }
    if (appends_ > 0 && position <= last_pos_) {
      throw ContractError("kv append: position " + std::to_string(position) +
                          " does not follow " + std::to_string(last_pos_));
    }
    if (kind_ == AttentionKind::kStandard) {
      positions_.push_back(position);
      keys_.insert(keys_.end(), k.begin(), k.end());
      values_.insert(values_.end(), v.begin(), v.end());
      ++size_;
    } else {
      const std::size_t slot = cursor_;
      positions_[slot] = position;
      std::copy(k.begin(), k.end(), keys_.begin() + static_cast<std::ptrdiff_t>(slot * width()));
      std::copy(v.begin(), v.end(), values_.begin() + static_cast<std::ptrdiff_t>(slot * width()));
      cursor_ = (cursor_ + 1) % static_cast<std::size_t>(window_);
      size_ = std::min<std::int64_t>(size_ + 1, window_);
    }
    last_pos_ = position;
    ++appends_;
  }

  /// Entries in ascending position order. Valid until the next append.
  kernels::KVView view() const {
    kernels::KVView out;
    out.n_kv_heads = n_kv_heads_;
    out.head_dim = head_dim_;
    if (size_ == 0) {
      return out;
    }
    const std::size_t w = width();
    auto segment = [&](std::size_t first, std::size_t count) {
      return kernels::KVSegment{
          std::span<const std::int64_t>(positions_).subspan(first, count),
          std::span<const float>(keys_).subspan(first * w, count * w),
          std::span<const float>(values_).subspan(first * w, count * w)};
    };
    const auto n = static_cast<std::size_t>(size_);
    if (kind_ == AttentionKind::kStandard || n < static_cast<std::size_t>(window_)) {
      out.segments[0] = segment(0, n);
      out.n_segments = 1;
    } else {
      // Full ring: oldest entry sits at the write cursor.
      out.segments[0] = segment(cursor_, n - cursor_);
      out.n_segments = 1;
      if (cursor_ > 0) {
        out.segments[1] = segment(0, cursor_);
        out.n_segments = 2;
      }
    }
    return out;
  }

  /// Physical slot that will be written next (sliding groups).
  std::size_t write_cursor() const { return cursor_; }

 private:
  int id_;
  AttentionKind kind_;
  int window_;
  int n_kv_heads_;
  int head_dim_;
  std::vector<std::int64_t> positions_;
  std::vector<float> keys_;
  std::vector<float> values_;
  std::size_t cursor_ = 0;
  std::int64_t size_ = 0;
  std::int64_t appends_ = 0;
  std::int64_t last_pos_ = 0;
};

/// One KVCacheGroup per cache group of a layout.
inline std::vector<KVCacheGroup> make_cache_groups(const ModelConfig& config,
                                                   const CacheLayout& layout) {
  std::vector<KVCacheGroup> groups;
  groups.reserve(layout.groups.size());
  for (const auto& g : layout.groups) {
    groups.emplace_back(g.id, g.kind, g.window, config.n_kv_heads, config.head_dim);
  }
  return groups;
}

struct CacheStats {
  std::vector<std::int64_t> entries;  // per group
  std::int64_t total_elements = 0;
  std::int64_t total_bytes = 0;

  bool operator==(const CacheStats&) const = default;
};

/// Element count is entries x 2 (K and V) x kv width.
inline CacheStats stats(std::span<const KVCacheGroup> groups, std::int64_t element_bytes) {
  CacheStats s;
  for (const auto& g : groups) {
    s.entries.push_back(g.size());
    s.total_elements += g.size() * 2 * static_cast<std::int64_t>(g.width());
  }
  s.total_bytes = s.total_elements * element_bytes;
  return s;
}

}  // namespace mixattn
