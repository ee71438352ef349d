// Copyright 2026 The MixAttn Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <numeric>
#include <string>
#include <thread>
#include <vector>

#include "mixattn/analysis.hpp"
#include "mixattn/config.hpp"
#include "mixattn/engine.hpp"
#include "mixattn/report.hpp"
#include "mixattn/rng.hpp"
#include "mixattn/weights.hpp"

namespace mixattn {

struct BenchOptions {
  int n_prompts = 8;
  int input_len = 4096;
  int output_len = 128;
  int repeats = 3;
  std::uint64_t seed = 0;
  std::int64_t element_bytes = 4;
  std::int64_t budget_bytes = std::int64_t{16} << 30;
  std::int64_t reserved_bytes = 0;
  /// Refuse runs whose predicted cache plus weight bytes exceed this.
  std::int64_t max_bytes = std::int64_t{2} << 30;
  int workers = 1;
};

struct BenchReport {
  std::string config_name;
  int n_prompts = 0;
  int input_len = 0;
  int output_len = 0;
  int repeats = 0;
  double prefill_tokens_per_sec = 0.0;  // median over repeats
  double decode_tokens_per_sec = 0.0;   // median over repeats
  std::int64_t decode_attention_flops = 0;  // one prompt, all decode steps
  double attention_flops_per_decoded_token = 0.0;
  std::int64_t peak_cache_bytes = 0;
  std::int64_t capacity_tokens = 0;
  bool capacity_unbounded = false;
};

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

/// Seeded prompts of uniform random token ids.
inline std::vector<std::vector<TokenId>> bench_prompts(const ModelConfig& c, int n, int length,
                                                       std::uint64_t seed) {
  Rng rng(seed ^ 0x70726F6D707473ULL);
  std::vector<std::vector<TokenId>> prompts(static_cast<std::size_t>(n));
  for (auto& p : prompts) {
    p.resize(static_cast<std::size_t>(length));
    for (auto& t : p) t = static_cast<TokenId>(rng.below(static_cast<std::uint64_t>(c.vocab_size)));
  }
  return prompts;
}

/// Greedy generation over seeded random weights and prompts. Count columns
/// are exact and reproducible; throughput columns are wall-clock medians.
inline BenchReport bench_run(const ModelConfig& config, const BenchOptions& opt) {
  require_valid(config);
  if (opt.repeats < 3) throw Error("bench: repeats must be >= 3");
  if (opt.n_prompts < 1 || opt.input_len < 1 || opt.output_len < 0) {
    throw Error("bench: need n_prompts >= 1, input_len >= 1, output_len >= 0");
  }
  const std::int64_t total_len = std::int64_t{opt.input_len} + opt.output_len;
  if (total_len > config.max_seq_len) {
    throw Error("bench: input_len + output_len exceeds max_seq_len");
  }
  const int workers = std::clamp(opt.workers, 1, opt.n_prompts);
  // Engine caches hold 4-byte floats regardless of the reported element size.
  const std::int64_t predicted = kv_footprint(config, total_len, 4).total_bytes * workers;
  std::int64_t weight_bytes = 0;
  for (const auto& spec : expected_tensors(config)) {
    std::int64_t n = 4;
    for (auto d : spec.shape) n *= d;
    weight_bytes += n;
  }
  if (predicted + weight_bytes > opt.max_bytes) {
    throw Error("bench: predicted memory " + std::to_string(predicted + weight_bytes) +
                " bytes exceeds ceiling " + std::to_string(opt.max_bytes));
  }

  const Model model(init_random(config, opt.seed));
  const auto prompts = bench_prompts(config, opt.n_prompts, opt.input_len, opt.seed);

  BenchReport r;
  r.config_name = config.name;
  r.n_prompts = opt.n_prompts;
  r.input_len = opt.input_len;
  r.output_len = opt.output_len;
  r.repeats = opt.repeats;

  std::vector<double> prefill_tps;
  std::vector<double> decode_tps;
  for (int rep = 0; rep < opt.repeats; ++rep) {
    std::vector<GenerationOutput> outs(prompts.size());
    std::atomic<std::size_t> next{0};
    auto work = [&] {
      for (std::size_t i = next++; i < prompts.size(); i = next++) {
        GenerationRequest req;
        req.prompt = prompts[i];
        req.max_new_tokens = opt.output_len;
        outs[i] = generate(model, req);
      }
    };
    std::vector<std::thread> pool;
    for (int w = 1; w < workers; ++w) pool.emplace_back(work);
    work();
    for (auto& t : pool) t.join();

    double prefill_s = 0.0;
    double decode_s = 0.0;
    for (const auto& o : outs) {
      prefill_s += o.prefill_seconds;
      decode_s += std::accumulate(o.decode_seconds.begin(), o.decode_seconds.end(), 0.0);
    }
    prefill_tps.push_back(static_cast<double>(opt.n_prompts) * opt.input_len / std::max(prefill_s, 1e-12));
    decode_tps.push_back(static_cast<double>(opt.n_prompts) * opt.output_len / std::max(decode_s, 1e-12));

    if (rep == 0) {
      r.decode_attention_flops = outs[0].decode_attention_flops;
      r.attention_flops_per_decoded_token =
          opt.output_len > 0 ? static_cast<double>(r.decode_attention_flops) / opt.output_len : 0.0;
      for (const auto& o : outs) {
        r.peak_cache_bytes = std::max(r.peak_cache_bytes, o.final_stats.total_elements * opt.element_bytes);
      }
    }
  }
  r.prefill_tokens_per_sec = median(prefill_tps);
  r.decode_tokens_per_sec = median(decode_tps);
  const auto cap = capacity(config, opt.budget_bytes, opt.element_bytes, opt.reserved_bytes);
  r.capacity_tokens = cap.unbounded ? -1 : cap.max_total_tokens;
  r.capacity_unbounded = cap.unbounded;
  return r;
}

namespace report {

inline Table bench_table(const std::vector<BenchReport>& reports) {
  Table t;
  t.title = "bench";
  t.note = "throughput columns are wall-clock medians; all other columns are exact counts";
  t.columns = {"config",          "n_prompts",
               "input_len",       "output_len",
               "repeats",         "prefill_tokens_per_sec",
               "decode_tokens_per_sec", "decode_attention_flops",
               "attention_flops_per_decoded_token", "peak_cache_bytes",
               "capacity_tokens", "capacity_unbounded"};
  for (const auto& r : reports) {
    t.rows.push_back({r.config_name, std::int64_t{r.n_prompts}, std::int64_t{r.input_len},
                      std::int64_t{r.output_len}, std::int64_t{r.repeats}, r.prefill_tokens_per_sec,
                      r.decode_tokens_per_sec, r.decode_attention_flops,
                      r.attention_flops_per_decoded_token, r.peak_cache_bytes, r.capacity_tokens,
                      r.capacity_unbounded});
  }
  return t;
}

}  // namespace report
}  // namespace mixattn
