// Copyright 2026 The MixAttn Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"
#include "mixattn/error.hpp"
#include "mixattn/rng.hpp"

namespace mixattn::tasks {

using Token = std::int32_t;

/// Token-id ranges of the synthetic task vocabulary. Filler, keys, values
/// and variables are pairwise disjoint so a scan of the context is
/// unambiguous. The defaults fit a 128-token vocabulary.
struct TaskVocab {
  Token pad = 0;
  Token end = 1;
  Token query = 2;
  Token assign = 3;
  Token filler_begin = 8, filler_end = 40;
  Token key_begin = 40, key_end = 64;
  Token value_begin = 64, value_end = 96;
  Token var_begin = 96, var_end = 128;

  bool is_filler(Token t) const { return t >= filler_begin && t < filler_end; }
  bool is_key(Token t) const { return t >= key_begin && t < key_end; }
  bool is_value(Token t) const { return t >= value_begin && t < value_end; }
  bool is_var(Token t) const { return t >= var_begin && t < var_end; }
  Token size() const { return var_end; }
};

enum class TaskKind { kNiahSingle, kNiahMulti, kVariableTracking };

inline std::string to_string(TaskKind k) {
  switch (k) {
    case TaskKind::kNiahSingle: return "niah_single";
    case TaskKind::kNiahMulti: return "niah_multi";
    case TaskKind::kVariableTracking: return "vt";
  }
  return "?";
}

inline TaskKind parse_task_kind(const std::string& s) {
  if (s == "niah_single") return TaskKind::kNiahSingle;
  if (s == "niah_multi") return TaskKind::kNiahMulti;
  if (s == "vt") return TaskKind::kVariableTracking;
  throw Error("unknown task kind '" + s + "'");
}

struct TaskInstance {
  TaskKind kind = TaskKind::kNiahSingle;
  std::uint64_t seed = 0;
  int n_needles = 0;  // NIAH
  int n_chains = 0;   // VT
  int chain_len = 0;  // VT
  std::vector<Token> context;
  std::vector<Token> query;
  std::vector<Token> answer;
  std::vector<double> needle_depths;     // NIAH
  std::vector<std::int64_t> placements;  // first token of each needle / statement

  bool operator==(const TaskInstance&) const = default;
};

/// A needle is `key assign value`.
inline constexpr int kNeedleLen = 3;

/// Needle-in-a-haystack: filler context of exactly `length` tokens with
/// `depths.size()` key/value needles. Needle i starts at
/// floor(depth_i * (length - 3)). The query names needle `query_needle`
/// (seeded choice when negative).
inline TaskInstance gen_niah(std::int64_t length, const std::vector<double>& depths,
                             std::uint64_t seed, int query_needle = -1,
                             const TaskVocab& vocab = {}) {
  const int n = static_cast<int>(depths.size());
  if (n < 1) throw Error("gen_niah: need at least one needle");
  for (int i = 0; i < n; ++i) {
    if (depths[i] < 0.0 || depths[i] > 1.0 || (i > 0 && depths[i] <= depths[i - 1])) {
      throw Error("gen_niah: depths must be strictly increasing in [0, 1]");
    }
  }
  if (n > vocab.key_end - vocab.key_begin) throw Error("gen_niah: more needles than keys");
  if (length < static_cast<std::int64_t>(n) * kNeedleLen) {
    throw Error("gen_niah: length too small for needles");
  }
  TaskInstance inst;
  inst.kind = n == 1 ? TaskKind::kNiahSingle : TaskKind::kNiahMulti;
  inst.seed = seed;
  inst.n_needles = n;
  inst.needle_depths = depths;

  for (int i = 0; i < n; ++i) {
    inst.placements.push_back(
        static_cast<std::int64_t>(std::floor(depths[i] * static_cast<double>(length - kNeedleLen))));
    if (i > 0 && inst.placements[i] - inst.placements[i - 1] < kNeedleLen) {
      throw Error("gen_niah: needles overlap at this length; spread depths or lengthen context");
    }
  }

  Rng rng(seed);
  inst.context.resize(static_cast<std::size_t>(length));
  const auto n_filler = static_cast<std::uint64_t>(vocab.filler_end - vocab.filler_begin);
  for (auto& t : inst.context) {
    t = vocab.filler_begin + static_cast<Token>(rng.below(n_filler));
  }
  std::vector<Token> keys;
  for (Token k = vocab.key_begin; k < vocab.key_end; ++k) keys.push_back(k);
  rng.shuffle(keys.begin(), keys.end());
  const auto n_values = static_cast<std::uint64_t>(vocab.value_end - vocab.value_begin);
  std::vector<Token> values;
  for (int i = 0; i < n; ++i) {
    values.push_back(vocab.value_begin + static_cast<Token>(rng.below(n_values)));
    const auto at = static_cast<std::size_t>(inst.placements[i]);
    inst.context[at] = keys[i];
    inst.context[at + 1] = vocab.assign;
    inst.context[at + 2] = values[i];
  }
  const int q = query_needle >= 0 ? query_needle : static_cast<int>(rng.below(n));
  if (q >= n) throw Error("gen_niah: query_needle out of range");
  inst.query = {vocab.query, keys[q], vocab.assign};
  inst.answer = {values[q]};
  return inst;
}

/// Variable tracking: `n_chains` chains `X1 = v; X2 = X1; ...` of
/// `chain_len` statements each, interleaved at seeded positions in filler.
/// The query `query v` is answered by every variable of v's chain in
/// first-assignment order.
inline TaskInstance gen_vt(int n_chains, int chain_len, std::int64_t length, std::uint64_t seed,
                           int query_chain = -1, const TaskVocab& vocab = {}) {
  if (n_chains < 1 || chain_len < 1) throw Error("gen_vt: need at least one chain of length 1");
  const std::int64_t n_statements = static_cast<std::int64_t>(n_chains) * chain_len;
  if (n_statements > vocab.var_end - vocab.var_begin) throw Error("gen_vt: not enough variables");
  if (n_chains > vocab.value_end - vocab.value_begin) throw Error("gen_vt: not enough values");
  if (length < n_statements * kNeedleLen) throw Error("gen_vt: length too small for statements");

  TaskInstance inst;
  inst.kind = TaskKind::kVariableTracking;
  inst.seed = seed;
  inst.n_chains = n_chains;
  inst.chain_len = chain_len;

  Rng rng(seed);
  inst.context.resize(static_cast<std::size_t>(length));
  const auto n_filler = static_cast<std::uint64_t>(vocab.filler_end - vocab.filler_begin);
  for (auto& t : inst.context) {
    t = vocab.filler_begin + static_cast<Token>(rng.below(n_filler));
  }

  std::vector<Token> vars;
  for (Token v = vocab.var_begin; v < vocab.var_end; ++v) vars.push_back(v);
  rng.shuffle(vars.begin(), vars.end());
  std::vector<Token> values;
  for (Token v = vocab.value_begin; v < vocab.value_end; ++v) values.push_back(v);
  rng.shuffle(values.begin(), values.end());

  // Statement order: a shuffled multiset of chain labels; the k-th
  // occurrence of chain c emits its k-th statement.
  std::vector<int> order;
  for (int c = 0; c < n_chains; ++c) order.insert(order.end(), chain_len, c);
  rng.shuffle(order.begin(), order.end());

  // Start offsets: pick n distinct slots among length - 2n, then shift the
  // i-th by 2i so statements never overlap.
  const std::int64_t slots = length - 2 * n_statements;
  std::vector<std::int64_t> picks;
  {
    std::vector<std::int64_t> all(static_cast<std::size_t>(slots));
    for (std::int64_t i = 0; i < slots; ++i) all[static_cast<std::size_t>(i)] = i;
    for (std::int64_t i = 0; i < n_statements; ++i) {
      const auto j = i + static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(slots - i)));
      std::swap(all[static_cast<std::size_t>(i)], all[static_cast<std::size_t>(j)]);
    }
    picks.assign(all.begin(), all.begin() + n_statements);
    std::sort(picks.begin(), picks.end());
  }

  std::vector<int> emitted(static_cast<std::size_t>(n_chains), 0);
  for (std::int64_t s = 0; s < n_statements; ++s) {
    const int c = order[static_cast<std::size_t>(s)];
    const int k = emitted[static_cast<std::size_t>(c)]++;
    const Token lhs = vars[static_cast<std::size_t>(c * chain_len + k)];
    const Token rhs = k == 0 ? values[static_cast<std::size_t>(c)]
                             : vars[static_cast<std::size_t>(c * chain_len + k - 1)];
    const std::int64_t at = picks[static_cast<std::size_t>(s)] + 2 * s;
    inst.placements.push_back(at);
    inst.context[static_cast<std::size_t>(at)] = lhs;
    inst.context[static_cast<std::size_t>(at + 1)] = vocab.assign;
    inst.context[static_cast<std::size_t>(at + 2)] = rhs;
  }

  const int q = query_chain >= 0 ? query_chain : static_cast<int>(rng.below(n_chains));
  if (q >= n_chains) throw Error("gen_vt: query_chain out of range");
  inst.query = {vocab.query, values[static_cast<std::size_t>(q)]};
  for (int k = 0; k < chain_len; ++k) {
    inst.answer.push_back(vars[static_cast<std::size_t>(q * chain_len + k)]);
  }
  return inst;
}

// ---------------------------------------------------------------------------
// Scoring

struct EvalResult {
  std::vector<bool> matches;
  std::map<std::string, double> accuracy;  // per task kind
  double overall = 0.0;
};

/// Drops trailing pad/end markers.
inline std::vector<Token> trim(std::vector<Token> seq, const TaskVocab& vocab = {}) {
  while (!seq.empty() && (seq.back() == vocab.pad || seq.back() == vocab.end)) seq.pop_back();
  return seq;
}

inline EvalResult score(const std::vector<std::vector<Token>>& outputs,
                        const std::vector<TaskInstance>& instances, const TaskVocab& vocab = {}) {
  if (outputs.size() != instances.size()) {
    throw Error("score: " + std::to_string(outputs.size()) + " outputs for " +
                std::to_string(instances.size()) + " instances");
  }
  EvalResult r;
  std::map<std::string, std::pair<int, int>> tally;
  int hits = 0;
  for (std::size_t i = 0; i < outputs.size(); ++i) {
    const bool ok = trim(outputs[i], vocab) == trim(instances[i].answer, vocab);
    r.matches.push_back(ok);
    auto& [hit, total] = tally[to_string(instances[i].kind)];
    hit += ok;
    ++total;
    hits += ok;
  }
  for (const auto& [kind, ht] : tally) {
    r.accuracy[kind] = static_cast<double>(ht.first) / ht.second;
  }
  r.overall = outputs.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(outputs.size());
  return r;
}

// ---------------------------------------------------------------------------
// Line-delimited JSON, one instance per line.

inline nlohmann::ordered_json to_json(const TaskInstance& t) {
  nlohmann::ordered_json j;
  j["task"] = to_string(t.kind);
  j["seed"] = t.seed;
  if (t.kind == TaskKind::kVariableTracking) {
    j["n_chains"] = t.n_chains;
    j["chain_len"] = t.chain_len;
  } else {
    j["n_needles"] = t.n_needles;
    j["needle_depths"] = t.needle_depths;
  }
  j["placements"] = t.placements;
  j["context"] = t.context;
  j["query"] = t.query;
  j["answer"] = t.answer;
  return j;
}

inline TaskInstance from_json(const nlohmann::json& j) {
  TaskInstance t;
  t.kind = parse_task_kind(j.at("task").get<std::string>());
  t.seed = j.at("seed").get<std::uint64_t>();
  if (t.kind == TaskKind::kVariableTracking) {
    t.n_chains = j.at("n_chains").get<int>();
    t.chain_len = j.at("chain_len").get<int>();
  } else {
    t.n_needles = j.at("n_needles").get<int>();
    t.needle_depths = j.at("needle_depths").get<std::vector<double>>();
  }
  t.placements = j.at("placements").get<std::vector<std::int64_t>>();
  t.context = j.at("context").get<std::vector<Token>>();
  t.query = j.at("query").get<std::vector<Token>>();
  t.answer = j.at("answer").get<std::vector<Token>>();
  return t;
}

inline void write_jsonl(std::ostream& os, const std::vector<TaskInstance>& instances) {
  for (const auto& t : instances) os << to_json(t).dump() << "\n";
}

inline std::vector<TaskInstance> read_jsonl(std::istream& is) {
  std::vector<TaskInstance> out;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw Error("task file line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace mixattn::tasks
