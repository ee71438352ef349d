// Copyright 2026 The MixAttn Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "mixattn/config.hpp"
#include "mixattn/error.hpp"
#include "mixattn/rng.hpp"

namespace mixattn {

struct Tensor {
  std::vector<std::int64_t> shape;
  std::vector<float> data;

  std::int64_t numel() const {
    std::int64_t n = 1;
    for (auto d : shape) n *= d;
    return n;
  }
  bool operator==(const Tensor&) const = default;
};

struct TensorSpec {
  std::string name;
  std::vector<std::int64_t> shape;
  bool is_gain = false;  // norm gain, initialized to ones
};

/// The exact tensor set a config implies, in canonical order. Layer
/// ordinals in names are 1-based. Layers that reuse another layer's cache
/// have no attn.k / attn.v.
inline std::vector<TensorSpec> expected_tensors(const ModelConfig& c) {
  const std::int64_t d = c.d_model;
  const std::int64_t h = c.ffn.hidden_dim;
  std::vector<TensorSpec> specs;
  specs.push_back({"embedding", {c.vocab_size, d}});
  for (const LayerSpec& l : c.layers) {
    const std::string p = "layers." + std::to_string(l.index) + ".";
    specs.push_back({p + "attn_norm", {d}, true});
    specs.push_back({p + "attn.q", {c.q_width(), d}});
    if (l.self_compute()) {
      specs.push_back({p + "attn.k", {c.kv_width(), d}});
      specs.push_back({p + "attn.v", {c.kv_width(), d}});
    }
    specs.push_back({p + "attn.out", {d, c.q_width()}});
    specs.push_back({p + "ffn_norm", {d}, true});
    auto swiglu = [&](const std::string& prefix) {
      specs.push_back({prefix + "gate", {h, d}});
      specs.push_back({prefix + "up", {h, d}});
      specs.push_back({prefix + "down", {d, h}});
    };
    if (c.ffn.type == FfnSpec::Type::kDense) {
      swiglu(p + "ffn.");
    } else {
      specs.push_back({p + "ffn.router", {c.ffn.n_experts, d}});
      for (int e = 0; e < c.ffn.n_experts; ++e) {
        swiglu(p + "ffn.experts." + std::to_string(e) + ".");
      }
    }
  }
  specs.push_back({"final_norm", {d}, true});
  specs.push_back({"unembedding", {c.vocab_size, d}});
  return specs;
}

struct ModelWeights {
  ModelConfig config;
  std::map<std::string, Tensor> tensors;

  const Tensor& at(const std::string& name) const {
    auto it = tensors.find(name);
    if (it == tensors.end()) {
      throw ContractError("missing tensor '" + name + "'");
    }
    return it->second;
  }
  bool contains(const std::string& name) const { return tensors.count(name) != 0; }

  std::int64_t total_bytes() const {
    std::int64_t n = 0;
    for (const auto& [name, t] : tensors) n += t.numel() * 4;
    return n;
  }

  bool operator==(const ModelWeights&) const = default;
};

/// Seeded uniform init in [-1/sqrt(fan_in), 1/sqrt(fan_in)], fan_in being
/// the last dimension. Norm gains start at one. Each tensor draws from its
/// own stream keyed by (seed, name).
inline ModelWeights init_random(const ModelConfig& config, std::uint64_t seed) {
  require_valid(config);
  ModelWeights w;
  w.config = config;
  for (const TensorSpec& spec : expected_tensors(config)) {
    Tensor t;
    t.shape = spec.shape;
    t.data.resize(static_cast<std::size_t>(t.numel()));
    if (spec.is_gain) {
      std::fill(t.data.begin(), t.data.end(), 1.0f);
    } else {
      Rng rng(seed ^ fnv1a64(spec.name));
      const float scale = 1.0f / std::sqrt(static_cast<float>(spec.shape.back()));
      for (float& x : t.data) {
        x = (2.0f * rng.uniform_float() - 1.0f) * scale;
      }
    }
    w.tensors.emplace(spec.name, std::move(t));
  }
  return w;
}

// ---------------------------------------------------------------------------
// File format, all integers little-endian:
//
//   "MXAT"  u32 version (=1)  u64 config_len  config JSON (UTF-8)
//   repeated until EOF:
//     u32 name_len  name  u32 rank  u64 dims[rank]  f32 data[prod(dims)]

class WeightsError : public Error {
 public:
  enum class Code {
    kIo,
    kBadMagic,
    kVersionMismatch,
    kTruncated,
    kBadConfig,
    kShapeMismatch,
    kMissingTensor,
    kUnexpectedTensor,
    kDuplicateTensor,
  };

  WeightsError(Code code, const std::string& what) : Error(what), code_(code) {}
  Code code() const noexcept { return code_; }

 private:
  Code code_;
};

inline constexpr std::uint32_t kWeightsVersion = 1;
inline constexpr char kWeightsMagic[4] = {'M', 'X', 'A', 'T'};

namespace detail {

template <typename T>
void put_le(std::string& out, T value) {
  using U = std::make_unsigned_t<T>;
  auto u = static_cast<U>(value);
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    out.push_back(static_cast<char>(u & 0xFF));
    u = static_cast<U>(u >> 8);
  }
}

class ByteReader {
 public:
  explicit ByteReader(std::string_view bytes) : bytes_(bytes) {}

  bool at_end() const { return pos_ == bytes_.size(); }

  template <typename U>
  U get(const char* what) {
    need(sizeof(U), what);
    U u = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) {
      u |= static_cast<U>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += sizeof(U);
    return u;
  }

  std::string_view take(std::uint64_t n, const char* what) {
    need(n, what);
    auto s = bytes_.substr(pos_, static_cast<std::size_t>(n));
    pos_ += static_cast<std::size_t>(n);
    return s;
  }

 private:
  void need(std::uint64_t n, const char* what) {
    if (n > bytes_.size() - pos_) {
      throw WeightsError(WeightsError::Code::kTruncated,
                         std::string("truncated weights file while reading ") + what);
    }
  }

  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace detail

/// Encodes weights to the version-1 byte layout, tensors in canonical order.
inline std::string encode_weights(const ModelWeights& w) {
  std::string out(kWeightsMagic, 4);
  detail::put_le<std::uint32_t>(out, kWeightsVersion);
  const std::string cfg = serialize_config(w.config);
  detail::put_le<std::uint64_t>(out, cfg.size());
  out += cfg;
  for (const TensorSpec& spec : expected_tensors(w.config)) {
    const Tensor& t = w.at(spec.name);
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(spec.name.size()));
    out += spec.name;
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.shape.size()));
    for (auto d : t.shape) detail::put_le<std::uint64_t>(out, static_cast<std::uint64_t>(d));
    for (float x : t.data) detail::put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(x));
  }
  return out;
}

/// Decodes and checks a weights file image: the tensor set and every shape
/// must match what the embedded config implies.
inline ModelWeights decode_weights(std::string_view bytes) {
  using Code = WeightsError::Code;
  detail::ByteReader in(bytes);
  if (in.take(4, "magic") != std::string_view(kWeightsMagic, 4)) {
    throw WeightsError(Code::kBadMagic, "not a weights file (bad magic)");
  }
  const auto version = in.get<std::uint32_t>("version");
  if (version != kWeightsVersion) {
    throw WeightsError(Code::kVersionMismatch,
                       "unsupported weights version " + std::to_string(version));
  }
  const auto cfg_len = in.get<std::uint64_t>("config length");
  const auto cfg_text = in.take(cfg_len, "config");

  ModelWeights w;
  try {
    w.config = parse_config(cfg_text);
    require_valid(w.config);
  } catch (const ConfigError& e) {
    throw WeightsError(Code::kBadConfig, std::string("embedded config: ") + e.what());
  }

  std::map<std::string, TensorSpec> expected;
  for (auto& spec : expected_tensors(w.config)) {
    expected.emplace(spec.name, spec);
  }

  while (!in.at_end()) {
    const auto name_len = in.get<std::uint32_t>("tensor name length");
    std::string name(in.take(name_len, "tensor name"));
    const auto rank = in.get<std::uint32_t>("tensor rank");
    Tensor t;
    std::uint64_t count = 1;
    for (std::uint32_t r = 0; r < rank; ++r) {
      const auto dim = in.get<std::uint64_t>("tensor dims");
      t.shape.push_back(static_cast<std::int64_t>(dim));
      count *= dim;
    }
    auto it = expected.find(name);
    if (it == expected.end()) {
      throw WeightsError(Code::kUnexpectedTensor, "unexpected tensor '" + name + "'");
    }
    if (w.tensors.count(name)) {
      throw WeightsError(Code::kDuplicateTensor, "duplicate tensor '" + name + "'");
    }
    if (t.shape != it->second.shape) {
      throw WeightsError(Code::kShapeMismatch, "shape mismatch for tensor '" + name + "'");
    }
    const auto raw = in.take(count * 4, "tensor data");
    t.data.resize(static_cast<std::size_t>(count));
    for (std::size_t i = 0; i < t.data.size(); ++i) {
      std::uint32_t u = 0;
      for (std::size_t b = 0; b < 4; ++b) {
        u |= static_cast<std::uint32_t>(static_cast<unsigned char>(raw[i * 4 + b])) << (8 * b);
      }
      t.data[i] = std::bit_cast<float>(u);
    }
    w.tensors.emplace(std::move(name), std::move(t));
  }
  for (const auto& [name, spec] : expected) {
    if (!w.tensors.count(name)) {
      throw WeightsError(Code::kMissingTensor, "missing tensor '" + name + "'");
    }
  }
  return w;
}

inline void save_weights(const ModelWeights& w, const std::filesystem::path& path) {
  const std::string bytes = encode_weights(w);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw WeightsError(WeightsError::Code::kIo, "cannot open '" + path.string() + "' for writing");
  }
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) {
    throw WeightsError(WeightsError::Code::kIo, "write failed for '" + path.string() + "'");
  }
}

inline ModelWeights load_weights(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw WeightsError(WeightsError::Code::kIo, "cannot open '" + path.string() + "'");
  }
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_weights(bytes);
}

}  // namespace mixattn
