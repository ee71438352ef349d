// Copyright 2026 The MixAttn Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

// Command-line front end: layout validation and analysis, generation,
// task evaluation and benchmarks.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mixattn/mixattn.hpp"

namespace fs = std::filesystem;
using namespace mixattn;

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// A config argument is a file path, or a preset file stem such as
/// "ma-pairs" / "ma-pairs-toy8".
ModelConfig resolve_config(const std::string& arg) {
  if (fs::exists(arg)) {
    ModelConfig c = parse_config(read_file(arg));
    if (c.name.empty()) c.name = fs::path(arg).stem().string();
    return c;
  }
  std::string name = arg;
  PresetScale scale = PresetScale::kFull24;
  constexpr std::string_view kToy = "-toy8";
  if (name.size() > kToy.size() && detail::lowercase(name).ends_with(kToy)) {
    name.resize(name.size() - kToy.size());
    scale = PresetScale::kToy8;
  }
  return preset(name, scale);
}

struct Output {
  std::string format = "text";
  std::string path;

  void write(const report::Table& t) const { write(report::render(t, report::parse_format(format))); }

  void write(const std::string& text) const {
    if (path.empty()) {
      std::cout << text;
      return;
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write '" + path + "'");
    out << text;
  }
};

void add_output_flags(CLI::App* cmd, Output& out) {
  cmd->add_option("--format", out.format, "Output format")
      ->check(CLI::IsMember({"text", "csv", "json"}));
  cmd->add_option("--out", out.path, "Write output to this path instead of stdout");
}

std::vector<TokenId> parse_tokens(const std::string& csv) {
  std::vector<TokenId> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(static_cast<TokenId>(std::stol(item)));
  }
  return out;
}

Model load_or_init(const ModelConfig& config, const std::string& weights_path, std::uint64_t seed) {
  if (!weights_path.empty()) {
    ModelWeights w = load_weights(weights_path);
    if (!(w.config.layers == config.layers) || w.config.d_model != config.d_model) {
      throw Error("weights file '" + weights_path + "' was built for a different layout");
    }
    return Model(std::move(w));
  }
  return Model(init_random(config, seed));
}

int run_validate(const std::string& arg, const Output& out) {
  const ModelConfig c = resolve_config(arg);
  const ValidationReport rep = validate(c);
  report::Table t;
  t.title = "validate " + (c.name.empty() ? arg : c.name);
  t.note = rep.ok() ? "ok" : std::to_string(rep.violations.size()) + " violation(s)";
  t.columns = {"layer", "rule", "message"};
  for (const auto& v : rep.violations) t.rows.push_back({std::int64_t{v.layer}, v.rule, v.message});
  out.write(t);
  return rep.ok() ? 0 : 1;
}

int run_presets(const std::string& scale_arg, const std::string& write_dir, const Output& out) {
  std::vector<PresetScale> scales;
  if (scale_arg == "all") {
    scales = {PresetScale::kFull24, PresetScale::kToy8};
  } else {
    scales = {parse_scale(scale_arg)};
  }
  report::Table t;
  t.title = "presets";
  t.columns = {"name", "scale", "file", "layers", "cache_groups", "standard_groups", "sliding_groups"};
  for (const auto& name : preset_names()) {
    for (PresetScale s : scales) {
      const ModelConfig c = preset(name, s);
      const CacheLayout layout = cache_groups(c);
      std::int64_t n_std = 0;
      for (const auto& g : layout.groups) n_std += g.kind == AttentionKind::kStandard;
      const std::string file = preset_file_stem(name, s) + ".json";
      if (!write_dir.empty()) {
        fs::create_directories(write_dir);
        std::ofstream f(fs::path(write_dir) / file, std::ios::binary | std::ios::trunc);
        f << serialize_config(c);
        if (!f) throw Error("cannot write preset file " + file);
      }
      t.rows.push_back({name, std::string(to_string(s)), file, std::int64_t{c.n_layers},
                        static_cast<std::int64_t>(layout.groups.size()), n_std,
                        static_cast<std::int64_t>(layout.groups.size()) - n_std});
    }
  }
  out.write(t);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mixattn: attention-layout engine, cache analyzer and benchmark"};
  app.require_subcommand(1);

  Output out;
  std::string config_arg;
  std::vector<std::string> config_args;
  std::int64_t tokens = 4096;
  std::int64_t element_bytes = 2;
  std::int64_t budget_bytes = std::int64_t{16} << 30;
  std::int64_t reserved_bytes = 0;
  std::uint64_t seed = 0;

  auto* validate_cmd = app.add_subcommand("validate", "Check a layout against every structural rule");
  validate_cmd->add_option("config", config_arg, "Config file or preset name")->required();
  add_output_flags(validate_cmd, out);

  std::string scale_arg = "all";
  std::string write_dir;
  auto* presets_cmd = app.add_subcommand("presets", "List shipped layouts (optionally write them)");
  presets_cmd->add_option("--scale", scale_arg, "full24, toy8 or all");
  presets_cmd->add_option("--write", write_dir, "Directory to write preset JSON files into");
  add_output_flags(presets_cmd, out);

  auto* footprint_cmd = app.add_subcommand("footprint", "KV cache bytes per group at T tokens");
  footprint_cmd->add_option("config", config_arg)->required();
  footprint_cmd->add_option("--T", tokens, "Cached tokens");
  footprint_cmd->add_option("--element-bytes", element_bytes, "Bytes per cached element");
  add_output_flags(footprint_cmd, out);

  auto* capacity_cmd = app.add_subcommand("capacity", "Largest cached-token count under a budget");
  capacity_cmd->add_option("config", config_arg)->required();
  capacity_cmd->add_option("--budget-bytes", budget_bytes);
  capacity_cmd->add_option("--element-bytes", element_bytes);
  capacity_cmd->add_option("--reserved-bytes", reserved_bytes, "Weights and fixed overhead");
  add_output_flags(capacity_cmd, out);

  auto* reach_cmd = app.add_subcommand("reach", "Receptive field through the layer stack");
  reach_cmd->add_option("config", config_arg)->required();
  reach_cmd->add_option("--T", tokens);
  add_output_flags(reach_cmd, out);

  auto* compare_cmd = app.add_subcommand("compare", "Side-by-side memory and reach of layouts");
  compare_cmd->add_option("configs", config_args)->required()->expected(2, -1);
  compare_cmd->add_option("--T", tokens);
  compare_cmd->add_option("--budget-bytes", budget_bytes);
  compare_cmd->add_option("--element-bytes", element_bytes);
  compare_cmd->add_option("--reserved-bytes", reserved_bytes);
  add_output_flags(compare_cmd, out);

  std::string weights_path;
  std::string prompt_arg;
  int max_new = 16;
  float temperature = 0.0f;
  auto* generate_cmd = app.add_subcommand("generate", "Generate tokens from a prompt");
  generate_cmd->add_option("config", config_arg)->required();
  generate_cmd->add_option("--weights", weights_path, "Weights file (default: seeded random)");
  generate_cmd->add_option("--prompt", prompt_arg, "Comma-separated token ids")->required();
  generate_cmd->add_option("--max-new", max_new);
  generate_cmd->add_option("--temperature", temperature, "0 selects greedy decoding");
  generate_cmd->add_option("--seed", seed);
  add_output_flags(generate_cmd, out);

  auto* init_cmd = app.add_subcommand("init-weights", "Write seeded random weights for a layout");
  init_cmd->add_option("config", config_arg)->required();
  init_cmd->add_option("--seed", seed);
  std::string weights_out;
  init_cmd->add_option("--out", weights_out)->required();

  std::string task_kind = "niah";
  int task_count = 10;
  std::int64_t task_len = 256;
  int n_needles = 1;
  int n_chains = 2;
  int chain_len = 3;
  std::string tasks_out;
  auto* tasks_cmd = app.add_subcommand("tasks", "Write a synthetic task file (JSON lines)");
  tasks_cmd->add_option("--kind", task_kind)->check(CLI::IsMember({"niah", "vt"}));
  tasks_cmd->add_option("--count", task_count);
  tasks_cmd->add_option("--length", task_len);
  tasks_cmd->add_option("--needles", n_needles);
  tasks_cmd->add_option("--chains", n_chains);
  tasks_cmd->add_option("--chain-len", chain_len);
  tasks_cmd->add_option("--seed", seed);
  tasks_cmd->add_option("--out", tasks_out, "Output path (default stdout)");

  std::string tasks_path;
  auto* eval_cmd = app.add_subcommand("eval", "Exact-match accuracy on a task file");
  eval_cmd->add_option("config", config_arg)->required();
  eval_cmd->add_option("--tasks", tasks_path)->required();
  eval_cmd->add_option("--weights", weights_path);
  eval_cmd->add_option("--seed", seed);
  add_output_flags(eval_cmd, out);

  BenchOptions bench;
  bench.element_bytes = 4;
  int window_override = 0;
  int d_model_override = 0;
  auto* bench_cmd = app.add_subcommand("bench", "Throughput, attention work and cache bytes");
  bench_cmd->add_option("configs", config_args)->required()->expected(1, -1);
  bench_cmd->add_option("--prompts", bench.n_prompts);
  bench_cmd->add_option("--input-len", bench.input_len);
  bench_cmd->add_option("--output-len", bench.output_len);
  bench_cmd->add_option("--repeats", bench.repeats);
  bench_cmd->add_option("--seed", bench.seed);
  bench_cmd->add_option("--workers", bench.workers);
  bench_cmd->add_option("--element-bytes", bench.element_bytes);
  bench_cmd->add_option("--budget-bytes", bench.budget_bytes);
  bench_cmd->add_option("--reserved-bytes", bench.reserved_bytes);
  bench_cmd->add_option("--max-bytes", bench.max_bytes, "Refuse runs predicted to exceed this");
  bench_cmd->add_option("--window", window_override, "Override every sliding window");
  bench_cmd->add_option("--d-model", d_model_override, "Override model width");
  add_output_flags(bench_cmd, out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    if (*validate_cmd) return run_validate(config_arg, out);
    if (*presets_cmd) return run_presets(scale_arg, write_dir, out);
    if (*footprint_cmd) {
      out.write(report::footprint_table(kv_footprint(resolve_config(config_arg), tokens, element_bytes)));
      return 0;
    }
    if (*capacity_cmd) {
      const ModelConfig c = resolve_config(config_arg);
      out.write(report::capacity_table(c.name, capacity(c, budget_bytes, element_bytes, reserved_bytes)));
      return 0;
    }
    if (*reach_cmd) {
      const ModelConfig c = resolve_config(config_arg);
      out.write(report::reach_table(c.name, receptive_field(c, tokens)));
      return 0;
    }
    if (*compare_cmd) {
      std::vector<ModelConfig> configs;
      for (const auto& a : config_args) configs.push_back(resolve_config(a));
      out.write(report::comparison_table(
          compare_layouts(configs, tokens, budget_bytes, element_bytes, reserved_bytes)));
      return 0;
    }
    if (*generate_cmd) {
      const ModelConfig c = resolve_config(config_arg);
      const Model model = load_or_init(c, weights_path, seed);
      GenerationRequest req;
      req.prompt = parse_tokens(prompt_arg);
      req.max_new_tokens = max_new;
      req.sampling = temperature > 0.0f ? Sampling::with_temperature(temperature, seed)
                                        : Sampling::greedy();
      const GenerationOutput g = generate(model, req);
      report::Table t;
      t.title = "generate";
      t.note = "prefill_seconds=" + std::to_string(g.prefill_seconds) +
               " cache_bytes=" + std::to_string(g.final_stats.total_bytes);
      t.columns = {"step", "token"};
      for (std::size_t i = 0; i < g.tokens.size(); ++i) {
        t.rows.push_back({static_cast<std::int64_t>(i), std::int64_t{g.tokens[i]}});
      }
      out.write(t);
      return 0;
    }
    if (*init_cmd) {
      save_weights(init_random(resolve_config(config_arg), seed), weights_out);
      return 0;
    }
    if (*tasks_cmd) {
      std::vector<tasks::TaskInstance> instances;
      for (int i = 0; i < task_count; ++i) {
        const std::uint64_t s = seed + static_cast<std::uint64_t>(i);
        if (task_kind == "niah") {
          // One needle lands at a seeded depth; several are spread evenly.
          std::vector<double> depths;
          if (n_needles == 1) {
            depths = {Rng(s).uniform_double()};
          } else {
            for (int k = 0; k < n_needles; ++k) depths.push_back(double(k) / (n_needles - 1));
          }
          instances.push_back(tasks::gen_niah(task_len, depths, s));
        } else {
          instances.push_back(tasks::gen_vt(n_chains, chain_len, task_len, s));
        }
      }
      std::ostringstream os;
      tasks::write_jsonl(os, instances);
      Output{"text", tasks_out}.write(os.str());
      return 0;
    }
    if (*eval_cmd) {
      const ModelConfig c = resolve_config(config_arg);
      if (c.vocab_size < tasks::TaskVocab{}.size()) {
        throw Error("eval: vocab_size must be at least " + std::to_string(tasks::TaskVocab{}.size()));
      }
      std::ifstream in(tasks_path);
      if (!in) throw Error("cannot read '" + tasks_path + "'");
      const auto instances = tasks::read_jsonl(in);
      const Model model = load_or_init(c, weights_path, seed);
      std::vector<std::vector<tasks::Token>> outputs;
      for (const auto& inst : instances) {
        GenerationRequest req;
        req.prompt = inst.context;
        req.prompt.insert(req.prompt.end(), inst.query.begin(), inst.query.end());
        req.max_new_tokens = static_cast<int>(inst.answer.size());
        outputs.push_back(generate(model, req).tokens);
      }
      const auto result = tasks::score(outputs, instances);
      report::Table t;
      t.title = "eval";
      t.note = "overall=" + std::to_string(result.overall);
      t.columns = {"task", "accuracy"};
      for (const auto& [kind, acc] : result.accuracy) t.rows.push_back({kind, acc});
      out.write(t);
      return 0;
    }
    if (*bench_cmd) {
      std::vector<BenchReport> reports;
      for (const auto& a : config_args) {
        ModelConfig c = resolve_config(a);
        if (window_override > 0) c = with_window(c, window_override);
        if (d_model_override > 0) c = with_d_model(c, d_model_override);
        reports.push_back(bench_run(c, bench));
      }
      out.write(report::bench_table(reports));
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
