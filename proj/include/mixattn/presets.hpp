// Copyright 2026 The MixAttn Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "mixattn/config.hpp"

namespace mixattn {

enum class PresetScale { kFull24, kToy8 };

inline std::string_view to_string(PresetScale s) {
  return s == PresetScale::kFull24 ? "full24" : "toy8";
}

inline PresetScale parse_scale(std::string_view s) {
  std::string lower(s);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
  if (lower == "full24") return PresetScale::kFull24;
  if (lower == "toy8") return PresetScale::kToy8;
  throw ConfigError(ConfigError::Code::kUnknownEnum, "unknown preset scale '" + std::string(s) + "'");
}

namespace detail {

// Layout strings: one token per layer, separated by spaces.
//   S     standard, computes its own K/V
//   W     sliding, computes its own K/V
//   S<p   standard, reuses the cache of layer p
//   W<p   sliding, reuses the cache of layer p
struct PresetLayout {
  std::string_view name;
  std::string_view summary;
  std::string_view full24;
  std::string_view toy8;
};

// The per-layer indices below are this project's fixed choices. Sliding
// layers reuse caches in consecutive runs of two or three, except in the
// SlideShare variants and the two baselines.
inline constexpr std::array<PresetLayout, 15> kPresetLayouts{{
    {"standard", "Every layer is standard attention with its own cache.",
     "S S S S S S S S S S S S S S S S S S S S S S S S",  //
     "S S S S S S S S"},
    {"pure-sliding", "Every layer is sliding-window attention with its own cache.",
     "W W W W W W W W W W W W W W W W W W W W W W W W",  //
     "W W W W W W W W"},
    {"MA",
     "One standard cache computed at layer 1 and reused by every other standard layer.",
     "S W W<2 W W<4 W<4 S<1 W W<8 W W<10 W<10 S<1 W W<14 W<14 W W<17 W W<19 W<19 W W<22 S<1",
     "S W S<1 W S<1 W W<6 S<1"},
    {"MA-EndSlide", "MA with the last layer turned into a sliding layer.",
     "S W W<2 W W<4 W<4 S<1 W W<8 W W<10 W<10 S<1 W W<14 W<14 W W<17 W W<19 W<19 W W<22 W<22",
     "S W S<1 W S<1 W W<6 W<6"},
    {"MA-Offset",
     "Like MA, but the single standard cache is computed at a later layer (7 of 24, 3 of 8).",
     "W W<1 W<1 W W<4 W<4 S W W<8 W W<10 W<10 S<7 W W<14 W<14 W W<17 W W<19 W<19 W W<22 S<7",
     "W W<1 S W S<3 W W<6 S<3"},
    {"MA-Pairs",
     "Two standard caches, computed at the first and middle layer, each reused by one later "
     "standard layer.",
     "S W W<2 W W<4 W<4 S<1 W W<8 W W<10 W<10 S W W<14 W<14 W W<17 W W<19 W<19 W W<22 S<13",
     "S W S<1 W S W W<6 S<5"},
    {"MA-Offset-SlideShare", "MA-Offset with longer cache-sharing runs among sliding layers.",
     "W W<1 W<1 W<1 W<1 W<1 S W W<8 W<8 W<8 W<8 S<7 W W<14 W<14 W<14 W<14 W W<19 W<19 W<19 W<19 "
     "S<7",
     "W W<1 S W<1 S<3 W<1 W<1 S<3"},
    {"MA-Pairs-SlideShare", "MA-Pairs with longer cache-sharing runs among sliding layers.",
     "S W W<2 W<2 W<2 W<2 S<1 W W<8 W<8 W<8 W<8 S W W<14 W<14 W<14 W<14 W W<19 W<19 W<19 W<19 "
     "S<13",
     "S W S<1 W<2 S W<2 W<2 S<5"},
    {"MA-Successive-1", "Two standard caches, each reused by the immediately following layer.",
     "S S<1 W W<3 W W<5 W<5 W W<8 W W<10 W<10 S S<13 W W<15 W W<17 W<17 W W<20 W W<22 W<22",
     "S S<1 W W<3 S S<5 W W<7"},
    {"MA-Successive-2", "Consecutive standard pairs at the first and last two layers.",
     "S S<1 W W<3 W W<5 W<5 W W<8 W W<10 W<10 W W<13 W W<15 W<15 W W<18 W W<20 W<20 S S<23",
     "S S<1 W W<3 W<3 W S S<7"},
    {"MA-Successive-3", "Consecutive standard pairs in the middle and at the last two layers.",
     "W W<1 W W<3 W<3 W W<6 W<6 W W<9 W<9 S S<12 W W<14 W W<16 W W<18 W<18 W W<21 S S<23",
     "W W<1 W<1 S S<4 W S S<7"},
    {"MA-Successive-4", "Consecutive standard pairs placed away from both ends.",
     "W W<1 W W<3 W<3 S S<6 W W<8 W W<10 W<10 W W<13 W W<15 W<15 S S<18 W W<20 W W<22 W<22",
     "W W<1 S S<3 W S S<6 W<5"},
    {"MA-NoShare-1", "A single standard layer at layer 1; no standard cache reuse.",
     "S W W<2 W W<4 W<4 W W<7 W W<9 W<9 W W<12 W W<14 W<14 W W<17 W W<19 W<19 W W<22 W<22",
     "S W W<2 W W<4 W W<6 W<6"},
    {"MA-NoShare-2", "MA's standard layers, each computing its own cache.",
     "S W W<2 W W<4 W<4 S W W<8 W W<10 W<10 S W W<14 W<14 W W<17 W W<19 W<19 W W<22 S",
     "S W S W S W W<6 S"},
    {"MA-NoShare-3", "MA-Offset's standard layers, each computing its own cache.",
     "W W<1 W<1 W W<4 W<4 S W W<8 W W<10 W<10 S W W<14 W<14 W W<17 W W<19 W<19 W W<22 S",
     "W W<1 S W S W W<6 S"},
}};

inline std::string lowercase(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
  return out;
}

inline std::vector<LayerSpec> parse_layout(std::string_view layout, int window) {
  std::vector<LayerSpec> layers;
  std::istringstream is{std::string(layout)};
  std::string tok;
  while (is >> tok) {
    LayerSpec l;
    l.index = static_cast<int>(layers.size()) + 1;
    l.kind = tok[0] == 'S' ? AttentionKind::kStandard : AttentionKind::kSliding;
    if (l.kind == AttentionKind::kSliding) {
      l.window = window;
    }
    if (tok.size() > 2 && tok[1] == '<') {
      l.share_from = std::stoi(tok.substr(2));
    }
    layers.push_back(l);
  }
  return layers;
}

}  // namespace detail

inline std::vector<std::string> preset_names() {
  std::vector<std::string> names;
  for (const auto& p : detail::kPresetLayouts) {
    names.emplace_back(p.name);
  }
  return names;
}

/// File stem used for shipped preset files, e.g. "ma-pairs" or
/// "ma-pairs-toy8".
inline std::string preset_file_stem(std::string_view name, PresetScale scale) {
  std::string stem = detail::lowercase(name);
  if (scale == PresetScale::kToy8) {
    stem += "-toy8";
  }
  return stem;
}

/// Dimensions shared by every preset at a given scale.
///
/// Full24: 24 layers, 12 query heads over 3 KV heads, window 1024, MoE FFN.
/// Toy8: 8 layers small enough for exhaustive correctness checks; window 8.
inline ModelConfig preset_skeleton(PresetScale scale) {
  ModelConfig c;
  if (scale == PresetScale::kFull24) {
    c.n_layers = 24;
    c.n_q_heads = 12;
    c.n_kv_heads = 3;
    c.head_dim = 128;
    c.window_default = 1024;
    c.rope_theta = 8.0e6;
    c.vocab_size = 50368;
    c.max_seq_len = 32768;
    c.ffn = {FfnSpec::Type::kMoE, 2048, 8, 2};
  } else {
    c.n_layers = 8;
    c.n_q_heads = 8;
    c.n_kv_heads = 2;
    c.head_dim = 8;
    c.window_default = 8;
    c.rope_theta = 10000.0;
    c.vocab_size = 128;
    c.max_seq_len = 8192;
    c.ffn = {FfnSpec::Type::kMoE, 96, 4, 2};
  }
  c.d_model = c.n_q_heads * c.head_dim;
  return c;
}

/// Returns a shipped layout by (case-insensitive) name.
inline ModelConfig preset(std::string_view name, PresetScale scale) {
  const std::string wanted = detail::lowercase(name);
  for (const auto& p : detail::kPresetLayouts) {
    if (detail::lowercase(p.name) != wanted) {
      continue;
    }
    ModelConfig c = preset_skeleton(scale);
    c.name = preset_file_stem(p.name, scale);
    c.description = std::string(p.summary) +
                    " Per-layer indices are a fixed choice of this project.";
    c.layers = detail::parse_layout(scale == PresetScale::kFull24 ? p.full24 : p.toy8,
                                    c.window_default);
    return c;
  }
  throw ConfigError(ConfigError::Code::kUnknownPreset, "unknown preset '" + std::string(name) + "'");
}

/// Rewrites every sliding window (and the default) to `window`.
inline ModelConfig with_window(ModelConfig c, int window) {
  c.window_default = window;
  for (auto& l : c.layers) {
    if (l.kind == AttentionKind::kSliding) {
      l.window = window;
    }
  }
  return c;
}

/// Rescales the model width, keeping the head counts.
inline ModelConfig with_d_model(ModelConfig c, int d_model) {
  c.head_dim = d_model / c.n_q_heads;
  c.d_model = c.head_dim * c.n_q_heads;
  return c;
}

}  // namespace mixattn
