// Copyright 2026 The MixAttn Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

// Acceptance suite: one line per criterion, non-zero exit if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "mixattn/mixattn.hpp"
#include "oracles.hpp"

namespace mixattn {
namespace {

struct Outcome {
  bool ok = true;
  std::string detail;

  void fail(const std::string& why) {
    if (ok) detail.clear();
    if (!detail.empty()) detail += "; ";
    detail += why;
    ok = false;
  }
};

std::vector<TokenId> seeded_tokens(int n, std::uint64_t seed, int vocab) {
  Rng rng(seed);
  std::vector<TokenId> t(static_cast<std::size_t>(n));
  for (auto& x : t) x = static_cast<TokenId>(rng.below(static_cast<std::uint64_t>(vocab)));
  return t;
}

bool is_ma_family(const std::string& name) { return name.rfind("MA", 0) == 0; }

// ---------------------------------------------------------------------------

Outcome cache_oracle_equivalence() {
  Outcome o;
  double worst = 0;
  int runs = 0;
  for (const auto& name : preset_names()) {
    const ModelConfig c = preset(name, PresetScale::kToy8);
    const Model model(init_random(c, 1000 + static_cast<std::uint64_t>(runs)));
    for (int T : {8, 32, 64}) {
      const auto seq = seeded_tokens(T, static_cast<std::uint64_t>(T) * 31 + runs, c.vocab_size);
      // Half the sequence through prefill, the rest one decode step at a time.
      const int split = T / 2;
      std::vector<std::vector<float>> got;
      PrefillResult pre = prefill(model, std::span(seq).first(static_cast<std::size_t>(split)), &got);
      for (int t = split; t < T; ++t) {
        got.push_back(decode_step(model, pre.session, seq[static_cast<std::size_t>(t)], t));
      }
      const auto want = oracle_logits(model, seq);
      for (int t = 0; t < T; ++t) {
        for (std::size_t v = 0; v < want[t].size(); ++v) {
          worst = std::max(worst, std::abs(static_cast<double>(got[t][v]) - want[t][v]));
        }
      }
      ++runs;
    }
    if (worst > 1e-4) o.fail(name + " deviates by " + std::to_string(worst));
  }
  if (o.ok) {
    std::ostringstream os;
    os << runs << " runs over " << preset_names().size() << " presets, max abs diff " << worst;
    o.detail = os.str();
  }
  return o;
}

ModelConfig uniform_sharing(int l) {
  ModelConfig c = preset("standard", PresetScale::kToy8);
  c.n_layers = 12;
  c.layers.clear();
  for (int i = 1; i <= 12; ++i) {
    LayerSpec spec{i, AttentionKind::kStandard, std::nullopt, std::nullopt};
    const int first = (i - 1) / l * l + 1;
    if (first != i) spec.share_from = first;
    c.layers.push_back(spec);
  }
  return c;
}

Outcome sharing_arithmetic() {
  Outcome o;
  const ModelConfig base = uniform_sharing(1);
  const Model base_model(init_random(base, 3));
  const auto seq = seeded_tokens(20, 4, base.vocab_size);
  for (int l : {2, 3, 4}) {
    const ModelConfig c = uniform_sharing(l);
    for (std::int64_t T : {1, 20, 4096}) {
      const auto shared = kv_footprint(c, T, 2).total_bytes;
      const auto unshared = kv_footprint(base, T, 2).total_bytes;
      if (shared * l != unshared) {
        o.fail("l=" + std::to_string(l) + " T=" + std::to_string(T) + ": " + std::to_string(shared) +
               " vs " + std::to_string(unshared));
      }
    }
    const auto per_token = kv_footprint(c, 1000, 2).steady_bytes_per_token;
    if (per_token * l != kv_footprint(base, 1000, 2).steady_bytes_per_token) o.fail("steady bytes/token at l=" + std::to_string(l));
    const Model model(init_random(c, 3));
    const auto run = prefill(model, seq);
    if (run.session.stats(2).total_bytes != kv_footprint(c, 20, 2).total_bytes) {
      o.fail("runtime stats disagree at l=" + std::to_string(l));
    }
    if (run.session.total_appends() != 20 * (12 / l)) o.fail("append count at l=" + std::to_string(l));
  }
  if (prefill(base_model, seq).session.stats(2).total_bytes != kv_footprint(base, 20, 2).total_bytes) {
    o.fail("runtime stats disagree for the unshared config");
  }
  if (o.ok) o.detail = "footprint and runtime stats are exactly 1/l for l in {2,3,4}";
  return o;
}

Outcome sliding_saturation() {
  Outcome o;
  const ModelConfig c = preset("pure-sliding", PresetScale::kToy8);
  const int s = c.window_default;
  const Model model(init_random(c, 5));
  for (int T : {1, s - 1, s, 10 * s}) {
    const auto run = prefill(model, seeded_tokens(T, static_cast<std::uint64_t>(T), c.vocab_size));
    const CacheStats st = run.session.stats(4);
    for (std::size_t g = 0; g < st.entries.size(); ++g) {
      if (st.entries[g] != std::min(T, s)) {
        o.fail("T=" + std::to_string(T) + " group " + std::to_string(g) + " holds " + std::to_string(st.entries[g]));
      }
    }
    for (const auto& g : kv_footprint(c, T, 4).groups) {
      if (g.entries != std::min(T, s)) o.fail("analytic entries at T=" + std::to_string(T));
    }
  }
  if (o.ok) o.detail = "s=" + std::to_string(s) + ", T in {1, s-1, s, 10s}";
  return o;
}

Outcome receptive_field_criterion() {
  Outcome o;
  Rng rng(77);
  for (int trial = 0; trial < 50; ++trial) {
    const ModelConfig c = testing::random_layout(rng, 6, 8);
    const std::int64_t T = 1 + static_cast<std::int64_t>(rng.below(64));
    const auto r = receptive_field(c, T);
    for (int l = 1; l <= c.n_layers; ++l) {
      const std::int64_t bfs = T - 1 - testing::bfs_min_position(c, l, T);
      if (r.layer_lookback[static_cast<std::size_t>(l - 1)] != bfs) {
        o.fail("random config " + std::to_string(trial) + " layer " + std::to_string(l));
      }
    }
  }
  ModelConfig three = preset("pure-sliding", PresetScale::kToy8);
  three.n_layers = 3;
  three.layers.resize(3);
  three = with_window(three, 4);
  const auto r = receptive_field(three, 100);
  if (r.max_lookback != 9 || r.unbounded) o.fail("pure-sliding L=3 s=4 gives " + std::to_string(r.max_lookback));
  if (100 - 1 - testing::bfs_min_position(three, 3, 100) != 9) o.fail("graph search disagrees on L=3 s=4");
  int with_standard = 0;
  for (const auto& name : preset_names()) {
    for (auto scale : {PresetScale::kFull24, PresetScale::kToy8}) {
      const ModelConfig c = preset(name, scale);
      const bool has_standard = std::any_of(c.layers.begin(), c.layers.end(),
                                            [](const LayerSpec& l) { return l.kind == AttentionKind::kStandard; });
      if (has_standard) {
        ++with_standard;
        if (!receptive_field(c, 32768).unbounded) o.fail(c.name + " is bounded");
      }
    }
  }
  if (o.ok) {
    o.detail = "50 random configs exact; L=3 s=4 -> 9; " + std::to_string(with_standard) +
               " presets with a standard layer unbounded";
  }
  return o;
}

Outcome capacity_ordering() {
  Outcome o;
  const std::int64_t budget = std::int64_t{16} << 30;
  std::vector<std::int64_t> caps;
  std::ostringstream os;
  for (const char* name : {"MA", "MA-Pairs", "standard"}) {
    const ModelConfig c = preset(name, PresetScale::kFull24);
    const auto r = capacity(c, budget, 2);
    const auto search = testing::search_capacity(c, budget, 2);
    if (r.unbounded || !search || *search != r.max_total_tokens) {
      o.fail(std::string(name) + ": closed form disagrees with integer search");
    }
    caps.push_back(r.max_total_tokens);
    os << name << "=" << r.max_total_tokens << " ";
  }
  if (!(caps[0] > caps[1] && caps[1] > caps[2])) o.fail("ordering violated: " + os.str());
  if (o.ok) o.detail = os.str() + "tokens";
  return o;
}

Outcome flop_ordering() {
  Outcome o;
  constexpr int kT = 4096;
  constexpr int kSteps = 4;
  std::vector<std::pair<std::string, std::int64_t>> per_token;
  for (const auto& name : preset_names()) {
    const ModelConfig c = preset(name, PresetScale::kToy8);
    const Model model(init_random(c, 9));
    GenerationRequest req;
    req.prompt = seeded_tokens(kT, 12, c.vocab_size);
    req.max_new_tokens = kSteps;
    const auto out = generate(model, req);
    std::int64_t analytic = 0;
    for (int p = kT; p < kT + kSteps; ++p) analytic += decode_attention_flops(c, p);
    if (out.decode_attention_flops != analytic) o.fail(name + ": engine counter disagrees with mask count");
    per_token.emplace_back(name, out.decode_attention_flops / kSteps);
  }
  std::int64_t sliding = 0, standard = 0;
  for (const auto& [name, f] : per_token) {
    if (name == "pure-sliding") sliding = f;
    if (name == "standard") standard = f;
  }
  int family = 0;
  for (const auto& [name, f] : per_token) {
    if (!is_ma_family(name)) continue;
    ++family;
    if (!(sliding < f && f < standard)) o.fail(name + " at " + std::to_string(f));
  }
  if (o.ok) {
    o.detail = "pure-sliding=" + std::to_string(sliding) + " < " + std::to_string(family) +
               " MA-family presets < standard=" + std::to_string(standard) + " FLOPs/token";
  }
  return o;
}

Outcome weight_format() {
  Outcome o;
  for (const auto& name : preset_names()) {
    const ModelWeights w = init_random(preset(name, PresetScale::kToy8), 21);
    const std::string bytes = encode_weights(w);
    const ModelWeights back = decode_weights(bytes);
    if (!(back == w) || encode_weights(back) != bytes) o.fail(name + " does not round-trip");
  }
  const ModelWeights w = init_random(preset("MA", PresetScale::kToy8), 21);
  const std::string good = encode_weights(w);
  auto expect = [&](std::string bytes, WeightsError::Code code, const char* label) {
    try {
      decode_weights(bytes);
      o.fail(std::string(label) + " accepted");
    } catch (const WeightsError& e) {
      if (e.code() != code) o.fail(std::string(label) + " gave the wrong error: " + e.what());
    }
  };
  std::string bad_magic = good;
  bad_magic.replace(0, 4, "XXXX");
  expect(bad_magic, WeightsError::Code::kBadMagic, "bad magic");
  std::string bad_version = good;
  bad_version[4] = 2;
  expect(bad_version, WeightsError::Code::kVersionMismatch, "version 2");
  expect(good.substr(0, good.size() - 3), WeightsError::Code::kTruncated, "truncated file");

  // Append one more record for a tensor the config does not define, and a
  // repeat of a tensor that is already present.
  auto record = [&](const std::string& name, const Tensor& t) {
    std::string r;
    auto le = [&](std::uint64_t v, int n) {
      for (int i = 0; i < n; ++i) r.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
    };
    le(name.size(), 4);
    r += name;
    le(t.shape.size(), 4);
    for (auto d : t.shape) le(static_cast<std::uint64_t>(d), 8);
    for (float x : t.data) le(std::bit_cast<std::uint32_t>(x), 4);
    return r;
  };
  expect(good + record("layers.3.attn.k", w.at("layers.1.attn.k")), WeightsError::Code::kUnexpectedTensor,
         "consumer key projection");
  expect(good + record("final_norm", w.at("final_norm")), WeightsError::Code::kDuplicateTensor, "duplicate tensor");

  ModelWeights reshaped = w;
  reshaped.tensors["final_norm"].shape = {1, w.config.d_model};
  const std::string header_and_config = good.substr(0, 16 + serialize_config(w.config).size());
  std::string shape_bad = header_and_config;
  for (const auto& spec : expected_tensors(w.config)) {
    shape_bad += record(spec.name, reshaped.at(spec.name));
  }
  expect(shape_bad, WeightsError::Code::kShapeMismatch, "shape mismatch");
  std::string missing = header_and_config;
  for (const auto& spec : expected_tensors(w.config)) {
    if (spec.name != "unembedding") missing += record(spec.name, w.at(spec.name));
  }
  expect(missing, WeightsError::Code::kMissingTensor, "missing tensor");
  if (o.ok) o.detail = "15 presets bit-identical; 7 malformed files rejected with distinct codes";
  return o;
}

Outcome taskgen_determinism() {
  Outcome o;
  std::vector<tasks::TaskInstance> first;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    if (seed % 3 == 0) {
      first.push_back(tasks::gen_vt(1 + static_cast<int>(seed % 4), 1 + static_cast<int>(seed % 5), 256, seed));
    } else if (seed % 3 == 1) {
      first.push_back(tasks::gen_niah(256, {static_cast<double>(seed % 10) / 10.0}, seed));
    } else {
      first.push_back(tasks::gen_niah(512, {0.1, 0.45, 0.8}, seed));
    }
  }
  std::ostringstream a, b;
  tasks::write_jsonl(a, first);
  std::vector<tasks::TaskInstance> again;
  for (const auto& t : first) {
    if (t.kind == tasks::TaskKind::kVariableTracking) {
      again.push_back(tasks::gen_vt(t.n_chains, t.chain_len, static_cast<std::int64_t>(t.context.size()), t.seed));
    } else {
      again.push_back(tasks::gen_niah(static_cast<std::int64_t>(t.context.size()), t.needle_depths, t.seed));
    }
  }
  tasks::write_jsonl(b, again);
  if (a.str() != b.str()) o.fail("regenerated task file differs");

  const tasks::TaskVocab v;
  int checked = 0;
  for (const auto& t : first) {
    std::vector<tasks::Token> found;
    if (t.kind == tasks::TaskKind::kVariableTracking) {
      tasks::Token want = t.query[1];
      for (bool more = true; more;) {
        more = false;
        for (std::size_t i = 0; i + 2 < t.context.size(); ++i) {
          if (v.is_var(t.context[i]) && t.context[i + 1] == v.assign && t.context[i + 2] == want) {
            found.push_back(want = t.context[i]);
            more = true;
            break;
          }
        }
      }
    } else {
      for (std::size_t i = 0; i + 2 < t.context.size(); ++i) {
        if (t.context[i] == t.query[1] && t.context[i + 1] == v.assign) {
          found.push_back(t.context[i + 2]);
          break;
        }
      }
    }
    if (found != t.answer) o.fail("instance seed " + std::to_string(t.seed) + " fails the scan check");
    ++checked;
  }
  if (o.ok) o.detail = std::to_string(checked) + " instances, byte-identical JSONL, scan oracle agrees";
  return o;
}

}  // namespace
}  // namespace mixattn

int main() {
  using namespace mixattn;
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"cache-oracle-equivalence", cache_oracle_equivalence},
      {"sharing-arithmetic", sharing_arithmetic},
      {"sliding-saturation", sliding_saturation},
      {"receptive-field", receptive_field_criterion},
      {"capacity-ordering", capacity_ordering},
      {"flop-ordering", flop_ordering},
      {"weight-format", weight_format},
      {"taskgen-determinism", taskgen_determinism},
  };
  int failed = 0;
  for (const auto& [name, run] : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o.fail(std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s %-26s %s (%.1fs)\n", o.ok ? "PASS" : "FAIL", name, o.detail.c_str(), secs);
    std::fflush(stdout);
    failed += !o.ok;
  }
  std::printf("%zu criteria, %d failed\n", criteria.size(), failed);
  return failed == 0 ? 0 : 1;
}
