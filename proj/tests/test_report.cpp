// Copyright 2026 The MixAttn Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <sstream>

#include "json.hpp"
#include "mixattn/bench.hpp"
#include "mixattn/presets.hpp"
#include "mixattn/report.hpp"

namespace mixattn {
namespace {

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cells;
    std::string cell;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      const char ch = line[i];
      if (quoted) {
        if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
          cell += '"';
          ++i;
        } else if (ch == '"') {
          quoted = false;
        } else {
          cell += ch;
        }
      } else if (ch == '"') {
        quoted = true;
      } else if (ch == ',') {
        cells.push_back(cell);
        cell.clear();
      } else {
        cell += ch;
      }
    }
    cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

// Every CSV cell equals the JSON value of the same row and column.
void expect_same_values(const report::Table& t) {
  const auto csv = parse_csv(report::render(t, report::Format::kCsv));
  const auto json = nlohmann::json::parse(report::render(t, report::Format::kJson));
  ASSERT_EQ(csv.size(), t.rows.size() + 1);
  EXPECT_EQ(csv[0], t.columns);
  ASSERT_EQ(json["rows"].size(), t.rows.size());
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    for (std::size_t c = 0; c < t.columns.size(); ++c) {
      const auto& v = json["rows"][r][t.columns[c]];
      const std::string want = v.is_string() ? v.get<std::string>() : v.dump();
      EXPECT_EQ(csv[r + 1][c], want) << t.title << " row " << r << " col " << t.columns[c];
    }
  }
}

TEST(Report, CsvAndJsonCarryIdenticalValues) {
  std::vector<ModelConfig> configs;
  for (const auto& n : preset_names()) configs.push_back(preset(n, PresetScale::kFull24));
  const auto cmp = compare_layouts(configs, 32000, std::int64_t{16} << 30, 2);
  expect_same_values(report::comparison_table(cmp));
  const ModelConfig ma = preset("MA", PresetScale::kToy8);
  expect_same_values(report::footprint_table(kv_footprint(ma, 77, 2)));
  expect_same_values(report::capacity_table("ma", capacity(ma, 123457, 2)));
  expect_same_values(report::reach_table("ma", receptive_field(ma, 50)));

  report::Table t;
  t.title = "odd";
  t.columns = {"a", "b", "c", "d"};
  t.rows.push_back({std::string("x,\"y\""), 0.1, std::int64_t{-3}, true});
  t.rows.push_back({std::string("plain"), 1e300, std::int64_t{1} << 62, false});
  expect_same_values(t);
}

TEST(Report, CapacityNoteStatesWhatIsCounted) {
  const auto text = report::render(report::capacity_table("x", capacity(preset("MA", PresetScale::kToy8), 1 << 20, 2)),
                                   report::Format::kCsv);
  EXPECT_EQ(text.rfind("# capacity counts cached tokens", 0), 0u) << text;
}

TEST(Report, UnboundedCapacityIsMinusOne) {
  const auto t = report::capacity_table("s", capacity(preset("pure-sliding", PresetScale::kToy8), 1 << 20, 2));
  const auto j = nlohmann::json::parse(report::render(t, report::Format::kJson));
  EXPECT_EQ(j["rows"][0]["max_total_tokens"], -1);
  EXPECT_EQ(j["rows"][0]["unbounded"], true);
}

TEST(Report, TextIsAligned) {
  report::Table t;
  t.columns = {"k", "value"};
  t.rows.push_back({std::string("long-name"), std::int64_t{1}});
  const std::string text = report::render(t, report::Format::kText);
  EXPECT_NE(text.find("k          value"), std::string::npos) << text;
  EXPECT_THROW(report::parse_format("yaml"), Error);
}

// ---------------------------------------------------------------------------

BenchOptions small_bench() {
  BenchOptions o;
  o.n_prompts = 3;
  o.input_len = 40;
  o.output_len = 6;
  o.repeats = 3;
  o.seed = 5;
  o.workers = 2;
  return o;
}

TEST(Bench, CountColumnsAreReproducible) {
  const ModelConfig c = preset("MA-Pairs", PresetScale::kToy8);
  const auto a = bench_run(c, small_bench());
  const auto b = bench_run(c, small_bench());
  EXPECT_EQ(a.decode_attention_flops, b.decode_attention_flops);
  EXPECT_EQ(a.peak_cache_bytes, b.peak_cache_bytes);
  EXPECT_EQ(a.capacity_tokens, b.capacity_tokens);
  EXPECT_EQ(a.peak_cache_bytes, kv_footprint(c, 46, 4).total_bytes);
  std::int64_t flops = 0;
  for (int p = 40; p < 46; ++p) flops += decode_attention_flops(c, p);
  EXPECT_EQ(a.decode_attention_flops, flops);
  EXPECT_GT(a.decode_tokens_per_sec, 0.0);
}

TEST(Bench, MixedLayoutDoesLessAttentionWork) {
  BenchOptions o = small_bench();
  o.input_len = 64;
  const auto ma = bench_run(preset("MA", PresetScale::kToy8), o);
  const auto st = bench_run(preset("standard", PresetScale::kToy8), o);
  EXPECT_LT(ma.attention_flops_per_decoded_token, st.attention_flops_per_decoded_token);
  const auto t = report::bench_table({ma, st});
  EXPECT_EQ(t.rows.size(), 2u);
  expect_same_values(t);
}

TEST(Bench, Guards) {
  const ModelConfig c = preset("MA", PresetScale::kToy8);
  BenchOptions o = small_bench();
  o.repeats = 2;
  EXPECT_THROW(bench_run(c, o), Error);
  o = small_bench();
  o.max_bytes = 1000;
  EXPECT_THROW(bench_run(c, o), Error);
  o = small_bench();
  o.input_len = c.max_seq_len;
  EXPECT_THROW(bench_run(c, o), Error);
}

TEST(Bench, Median) {
  EXPECT_DOUBLE_EQ(median({3, 1, 2}), 2.0);
  EXPECT_DOUBLE_EQ(median({4, 1, 2, 3}), 2.5);
}

}  // namespace
}  // namespace mixattn
