// Copyright 2026 The MixAttn Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "mixattn/error.hpp"

namespace mixattn {

enum class AttentionKind { kStandard, kSliding };

inline std::string_view to_string(AttentionKind kind) {
  return kind == AttentionKind::kStandard ? "standard" : "sliding";
}

/// One transformer layer of an attention layout.
///
/// `index` is the 1-based layer ordinal. A layer either computes its own
/// K/V (`share_from` empty) or attends over the cache of an earlier
/// producer layer.
struct LayerSpec {
  int index = 0;
  AttentionKind kind = AttentionKind::kStandard;
  std::optional<int> window;
  std::optional<int> share_from;

  bool self_compute() const { return !share_from.has_value(); }
  bool operator==(const LayerSpec&) const = default;
};

struct FfnSpec {
  enum class Type { kDense, kMoE };

  Type type = Type::kDense;
  int hidden_dim = 0;
  int n_experts = 0;  // MoE only
  int top_k = 0;      // MoE only

  bool operator==(const FfnSpec&) const = default;
};

struct ModelConfig {
  // Free-form metadata carried through parse/serialize.
  std::string name;
  std::string description;

  int n_layers = 0;
  int d_model = 0;
  int n_q_heads = 0;
  int n_kv_heads = 0;
  int head_dim = 0;
  int window_default = 1024;
  double rope_theta = 10000.0;
  int vocab_size = 0;
  int max_seq_len = 0;
  FfnSpec ffn;
  std::vector<LayerSpec> layers;

  /// 1-based lookup.
  const LayerSpec& layer(int index) const { return layers.at(index - 1); }

  int q_width() const { return n_q_heads * head_dim; }
  int kv_width() const { return n_kv_heads * head_dim; }

  bool operator==(const ModelConfig&) const = default;
};

inline constexpr float kNormEps = 1e-5f;

// ---------------------------------------------------------------------------
// Validation

struct Violation {
  int layer = 0;  // 0 for model-level rules
  std::string rule;
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;

  bool ok() const { return violations.empty(); }

  bool has(std::string_view rule, int layer = -1) const {
    return std::any_of(violations.begin(), violations.end(), [&](const Violation& v) {
      return v.rule == rule && (layer < 0 || v.layer == layer);
    });
  }

  std::string to_string() const {
    std::ostringstream os;
    for (const auto& v : violations) {
      if (v.layer > 0) {
        os << "layer " << v.layer << ": ";
      }
      os << v.rule << ": " << v.message << "\n";
    }
    return os.str();
  }
};

/// Checks every structural rule of a layout. Never throws; each broken
/// rule becomes one report entry.
inline ValidationReport validate(const ModelConfig& c) {
  ValidationReport report;
  auto add = [&](int layer, std::string rule, std::string message) {
    report.violations.push_back({layer, std::move(rule), std::move(message)});
  };

  auto positive = [&](int value, const char* field) {
    if (value < 1) {
      add(0, "positive-dimension", std::string(field) + " must be >= 1");
    }
  };
  positive(c.n_layers, "n_layers");
  positive(c.d_model, "d_model");
  positive(c.n_q_heads, "n_q_heads");
  positive(c.n_kv_heads, "n_kv_heads");
  positive(c.head_dim, "head_dim");
  positive(c.vocab_size, "vocab_size");
  positive(c.max_seq_len, "max_seq_len");
  positive(c.ffn.hidden_dim, "ffn.hidden_dim");

  if (c.n_kv_heads > 0 && c.n_q_heads % c.n_kv_heads != 0) {
    add(0, "heads-divisible", "n_q_heads must be divisible by n_kv_heads");
  }
  if (c.d_model != c.n_q_heads * c.head_dim) {
    add(0, "d-model-mismatch", "d_model must equal n_q_heads * head_dim");
  }
  if (c.head_dim % 2 != 0) {
    add(0, "head-dim-odd", "rotary embedding needs an even head_dim");
  }
  if (!(c.rope_theta > 0.0)) {
    add(0, "rope-theta", "rope_theta must be positive");
  }
  if (c.window_default < 1) {
    add(0, "window-min", "window_default must be >= 1");
  }
  if (c.ffn.type == FfnSpec::Type::kMoE) {
    if (c.ffn.n_experts < 1) {
      add(0, "positive-dimension", "ffn.n_experts must be >= 1");
    }
    if (c.ffn.top_k < 1 || c.ffn.top_k > c.ffn.n_experts) {
      add(0, "moe-top-k", "ffn.top_k must be in [1, n_experts]");
    }
  }
  if (static_cast<int>(c.layers.size()) != c.n_layers) {
    add(0, "layer-count", "expected " + std::to_string(c.n_layers) + " layers, found " +
                              std::to_string(c.layers.size()));
  }

  for (std::size_t pos = 0; pos < c.layers.size(); ++pos) {
    const LayerSpec& l = c.layers[pos];
    const int expected = static_cast<int>(pos) + 1;
    if (l.index != expected) {
      add(expected, "layer-index", "layer ordinal is " + std::to_string(l.index) +
                                       ", expected " + std::to_string(expected));
    }
    if (l.kind == AttentionKind::kSliding) {
      if (!l.window) {
        add(expected, "missing-window", "sliding layer has no window");
      } else if (*l.window < 1) {
        add(expected, "window-min", "window must be >= 1");
      }
    } else if (l.window) {
      add(expected, "window-on-standard", "standard layer must not carry a window");
    }
    if (!l.share_from) {
      continue;
    }
    const int p = *l.share_from;
    if (p == expected) {
      add(expected, "self-reference", "layer shares from itself");
      continue;
    }
    if (p < 1) {
      add(expected, "producer-out-of-range", "share_from must be >= 1");
      continue;
    }
    if (p > expected) {
      add(expected, "producer-after-consumer",
          "share_from " + std::to_string(p) + " is not an earlier layer");
      continue;
    }
    const LayerSpec& producer = c.layers[p - 1];
    if (!producer.self_compute()) {
      add(expected, "producer-not-self-compute",
          "layer " + std::to_string(p) + " itself shares its cache");
    }
    if (producer.kind != l.kind) {
      add(expected, "kind-mismatch", std::string(to_string(l.kind)) + " layer shares from " +
                                         std::string(to_string(producer.kind)) + " layer " +
                                         std::to_string(p));
    } else if (l.kind == AttentionKind::kSliding && producer.window != l.window) {
      add(expected, "window-mismatch", "window differs from producer layer " + std::to_string(p));
    }
  }
  return report;
}

inline void require_valid(const ModelConfig& c) {
  const auto report = validate(c);
  if (!report.ok()) {
    throw ConfigError(ConfigError::Code::kInvalid, "invalid config:\n" + report.to_string());
  }
}

// ---------------------------------------------------------------------------
// Cache groups

struct CacheGroupSpec {
  int id = 0;
  int producer = 0;  // 1-based layer index, lowest member
  AttentionKind kind = AttentionKind::kStandard;
  std::optional<int> window;
  std::vector<int> members;  // ascending, includes producer

  bool operator==(const CacheGroupSpec&) const = default;
};

struct CacheLayout {
  std::vector<CacheGroupSpec> groups;
  std::vector<int> group_of;  // indexed by layer ordinal - 1

  int group_for_layer(int index) const { return group_of.at(index - 1); }
  const CacheGroupSpec& group(int id) const { return groups.at(id); }
};

/// Partitions layers into cache groups, one per self-computing layer.
/// Throws ConfigError if the config is invalid.
inline CacheLayout cache_groups(const ModelConfig& c) {
  require_valid(c);
  CacheLayout layout;
  layout.group_of.assign(c.layers.size(), -1);
  for (const LayerSpec& l : c.layers) {
    if (!l.self_compute()) {
      continue;
    }
    CacheGroupSpec g;
    g.id = static_cast<int>(layout.groups.size());
    g.producer = l.index;
    g.kind = l.kind;
    g.window = l.window;
    g.members.push_back(l.index);
    layout.group_of[l.index - 1] = g.id;
    layout.groups.push_back(std::move(g));
  }
  for (const LayerSpec& l : c.layers) {
    if (l.self_compute()) {
      continue;
    }
    const int id = layout.group_of[*l.share_from - 1];
    layout.group_of[l.index - 1] = id;
    layout.groups[id].members.push_back(l.index);
  }
  return layout;
}

// ---------------------------------------------------------------------------
// JSON document

namespace detail {

using nlohmann::json;

inline std::string line_col(std::string_view text, std::size_t byte) {
  std::size_t line = 1;
  std::size_t col = 1;
  const std::size_t end = std::min(byte > 0 ? byte - 1 : 0, text.size());
  for (std::size_t i = 0; i < end; ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

inline void reject_unknown(const json& obj, std::initializer_list<std::string_view> known,
                           const std::string& where) {
  for (const auto& [key, value] : obj.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw ConfigError(ConfigError::Code::kUnknownField,
                        "unknown field '" + key + "' in " + where);
    }
  }
}

inline const json& require(const json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) {
    throw ConfigError(ConfigError::Code::kMissingField,
                      "missing required field '" + std::string(key) + "' in " + where);
  }
  return *it;
}

inline int as_int(const json& v, const std::string& path) {
  if (!v.is_number_integer()) {
    throw ConfigError(ConfigError::Code::kBadType, path + " must be an integer");
  }
  const auto x = v.get<std::int64_t>();
  if (x < INT32_MIN || x > INT32_MAX) {
    throw ConfigError(ConfigError::Code::kBadType, path + " is out of range");
  }
  return static_cast<int>(x);
}

inline std::string as_string(const json& v, const std::string& path) {
  if (!v.is_string()) {
    throw ConfigError(ConfigError::Code::kBadType, path + " must be a string");
  }
  return v.get<std::string>();
}

}  // namespace detail

/// Parses a JSON layout document. Sliding layers without a window get
/// `window_default`; missing `share_from` means the layer computes its own
/// K/V. Structural rules beyond self-reference are left to validate().
inline ModelConfig parse_config(std::string_view text) {
  using detail::json;
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw ConfigError(ConfigError::Code::kSyntax,
                      "syntax error at " + detail::line_col(text, e.byte) + ": " + e.what());
  }
  if (!doc.is_object()) {
    throw ConfigError(ConfigError::Code::kBadType, "config document must be a JSON object");
  }
  detail::reject_unknown(doc,
                         {"name", "description", "n_layers", "d_model", "n_q_heads", "n_kv_heads",
                          "head_dim", "vocab_size", "rope_theta", "window_default", "max_seq_len",
                          "ffn", "layers"},
                         "config");

  ModelConfig c;
  const std::string top = "config";
  if (doc.contains("name")) c.name = detail::as_string(doc["name"], "name");
  if (doc.contains("description")) {
    c.description = detail::as_string(doc["description"], "description");
  }
  c.n_layers = detail::as_int(detail::require(doc, "n_layers", top), "n_layers");
  c.d_model = detail::as_int(detail::require(doc, "d_model", top), "d_model");
  c.n_q_heads = detail::as_int(detail::require(doc, "n_q_heads", top), "n_q_heads");
  c.n_kv_heads = detail::as_int(detail::require(doc, "n_kv_heads", top), "n_kv_heads");
  c.head_dim = detail::as_int(detail::require(doc, "head_dim", top), "head_dim");
  c.vocab_size = detail::as_int(detail::require(doc, "vocab_size", top), "vocab_size");
  c.max_seq_len = detail::as_int(detail::require(doc, "max_seq_len", top), "max_seq_len");
  const json& theta = detail::require(doc, "rope_theta", top);
  if (!theta.is_number()) {
    throw ConfigError(ConfigError::Code::kBadType, "rope_theta must be a number");
  }
  c.rope_theta = theta.get<double>();
  if (doc.contains("window_default")) {
    c.window_default = detail::as_int(doc["window_default"], "window_default");
  }

  const json& ffn = detail::require(doc, "ffn", top);
  if (!ffn.is_object()) {
    throw ConfigError(ConfigError::Code::kBadType, "ffn must be an object");
  }
  const std::string type = detail::as_string(detail::require(ffn, "type", "ffn"), "ffn.type");
  if (type == "dense") {
    detail::reject_unknown(ffn, {"type", "hidden_dim"}, "dense ffn");
    c.ffn.type = FfnSpec::Type::kDense;
  } else if (type == "moe") {
    detail::reject_unknown(ffn, {"type", "hidden_dim", "n_experts", "top_k"}, "moe ffn");
    c.ffn.type = FfnSpec::Type::kMoE;
    c.ffn.n_experts = detail::as_int(detail::require(ffn, "n_experts", "ffn"), "ffn.n_experts");
    c.ffn.top_k = detail::as_int(detail::require(ffn, "top_k", "ffn"), "ffn.top_k");
  } else {
    throw ConfigError(ConfigError::Code::kUnknownEnum, "unknown ffn.type '" + type + "'");
  }
  c.ffn.hidden_dim = detail::as_int(detail::require(ffn, "hidden_dim", "ffn"), "ffn.hidden_dim");

  const json& layers = detail::require(doc, "layers", top);
  if (!layers.is_array()) {
    throw ConfigError(ConfigError::Code::kBadType, "layers must be an array");
  }
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const std::string path = "layers[" + std::to_string(i) + "]";
    const json& obj = layers[i];
    if (!obj.is_object()) {
      throw ConfigError(ConfigError::Code::kBadType, path + " must be an object");
    }
    detail::reject_unknown(obj, {"kind", "window", "share_from"}, path);
    LayerSpec l;
    l.index = static_cast<int>(i) + 1;
    const std::string kind = detail::as_string(detail::require(obj, "kind", path), path + ".kind");
    if (kind == "standard") {
      l.kind = AttentionKind::kStandard;
    } else if (kind == "sliding") {
      l.kind = AttentionKind::kSliding;
    } else {
      throw ConfigError(ConfigError::Code::kUnknownEnum,
                        "unknown " + path + ".kind '" + kind + "'");
    }
    if (obj.contains("window")) {
      l.window = detail::as_int(obj["window"], path + ".window");
    } else if (l.kind == AttentionKind::kSliding) {
      l.window = c.window_default;
    }
    if (obj.contains("share_from")) {
      l.share_from = detail::as_int(obj["share_from"], path + ".share_from");
      if (*l.share_from == l.index) {
        throw ConfigError(ConfigError::Code::kSelfReference,
                          path + ": layer " + std::to_string(l.index) + " shares from itself");
      }
    }
    c.layers.push_back(l);
  }
  return c;
}

/// Serializes to the document format read by parse_config. Each layer is
/// written on one line; sliding windows are always explicit.
inline std::string serialize_config(const ModelConfig& c) {
  using detail::json;
  std::ostringstream os;
  auto field = [&](const char* key, const json& value, bool comma = true) {
    os << "  " << json(key).dump() << ": " << value.dump() << (comma ? ",\n" : "\n");
  };
  os << "{\n";
  if (!c.name.empty()) field("name", c.name);
  if (!c.description.empty()) field("description", c.description);
  field("n_layers", c.n_layers);
  field("d_model", c.d_model);
  field("n_q_heads", c.n_q_heads);
  field("n_kv_heads", c.n_kv_heads);
  field("head_dim", c.head_dim);
  field("vocab_size", c.vocab_size);
  field("rope_theta", c.rope_theta);
  field("window_default", c.window_default);
  field("max_seq_len", c.max_seq_len);
  nlohmann::ordered_json ffn;
  ffn["type"] = c.ffn.type == FfnSpec::Type::kDense ? "dense" : "moe";
  ffn["hidden_dim"] = c.ffn.hidden_dim;
  if (c.ffn.type == FfnSpec::Type::kMoE) {
    ffn["n_experts"] = c.ffn.n_experts;
    ffn["top_k"] = c.ffn.top_k;
  }
  os << "  \"ffn\": " << ffn.dump() << ",\n";
  os << "  \"layers\": [\n";
  for (std::size_t i = 0; i < c.layers.size(); ++i) {
    const LayerSpec& l = c.layers[i];
    nlohmann::ordered_json obj;
    obj["kind"] = std::string(to_string(l.kind));
    if (l.window) obj["window"] = *l.window;
    if (l.share_from) obj["share_from"] = *l.share_from;
    os << "    " << obj.dump() << (i + 1 < c.layers.size() ? ",\n" : "\n");
  }
  os << "  ]\n}\n";
  return os.str();
}

}  // namespace mixattn
