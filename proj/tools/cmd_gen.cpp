#include <cstdio>
#include <fstream>
#include <iostream>

#include <json.hpp>

#include "commands.hpp"
#include "kcache/perf_model.hpp"
#include "kcache/report.hpp"

using namespace kcache;

namespace {

void check_conflicts(const GenOptions& opt) {
  if (opt.mode == "baseline") {
    if (opt.top_n_given) {
      throw UsageError("--topn only applies to --mode kcache");
    }
    if (opt.resident_given) {
      throw UsageError("--resident-layers only applies to --mode kcache");
    }
    if (opt.renormalize_given) {
      throw UsageError("--renormalize only applies to --mode kcache");
    }
  }
  if (opt.model_given && opt.preset_given) {
    throw UsageError("--model and --preset are mutually exclusive");
  }
  if (opt.preset == "7b-shape" && !opt.model_given) {
    throw UsageError("preset 7b-shape is shape-only; gen needs toy or --model");
  }
}

}  // namespace

int run_gen(const GenOptions& opt) {
  check_conflicts(opt);

  ModelWeights weights;
  std::string weight_source;
  if (opt.model_given) {
    weights = load_weights(opt.model_file);
    weight_source = "file:" + opt.model_file;
  } else {
    weights = generate_weights(resolve_preset(opt.preset), opt.weight_seed);
    weight_source = "seed:" + std::to_string(opt.weight_seed);
  }

  TokenMatrix prompt;
  std::string prompt_source;
  EngineConfig config;
  config.mode = opt.mode == "kcache" ? CacheMode::kcache : CacheMode::baseline;
  config.top_n = opt.top_n;
  config.resident_layers = opt.resident_layers;
  config.renormalize = opt.renormalize;
  config.topn_on_resident = opt.topn_on_resident;
  config.prompt_seed = opt.prompt_seed;
  config.gen_len = opt.gen_len;
  config.bytes_per_element = opt.bytes;
  if (opt.fast_capacity > 0) {
    config.fast_capacity = opt.fast_capacity;
  }

  if (!opt.prompt_file.empty()) {
    prompt = load_prompt_file(opt.prompt_file, weights.config.vocab);
    if (opt.batch_given && prompt.size() != opt.batch) {
      throw UsageError("--batch disagrees with the prompt file row count");
    }
    if (opt.prompt_len_given && prompt[0].size() != opt.prompt_len) {
      throw UsageError("--prompt-len disagrees with the prompt file");
    }
    config.batch = prompt.size();
    config.prompt_len = prompt[0].size();
    prompt_source = "file:" + opt.prompt_file;
  } else {
    config.batch = opt.batch;
    config.prompt_len = opt.prompt_len;
    prompt = random_prompt(weights.config, config.batch, config.prompt_len, opt.prompt_seed);
    prompt_source = "seed:" + std::to_string(opt.prompt_seed);
  }

  config.validate(weights.config);
  const GenerationReport report = generate(weights, config, prompt, weight_source, prompt_source);

  // Report file, with the cost-model projection attached when a profile was
  // requested.
  nlohmann::json j = nlohmann::json::parse(report_to_json(report));
  if (!opt.profile.empty()) {
    const HardwareProfile profile = resolve_profile(opt.profile);
    const ProjectShape shape{
        {config.batch, config.prompt_len + config.gen_len, weights.config.d_model,
         weights.config.n_heads, weights.config.head_dim, config.bytes_per_element},
        weights.config.n_layers,
        weights.config.ffn_hidden};
    const RunProjection proj =
        project_run(shape, config.top_n, config.resident_layers, profile);
    j["projection"] = {
        {"profile", profile.name},
        {"baseline_tokens_per_s", proj.baseline_tokens_per_s},
        {"kcache_tokens_per_s", proj.kcache_tokens_per_s},
        {"speedup", proj.speedup},
    };
    if (!profile.notes.empty()) {
      j["projection"]["notes"] = profile.notes;
    }
  } else {
    j["projection"] = nullptr;
  }
  {
    std::ofstream out(opt.report_path, std::ios::trunc);
    if (!out) {
      throw std::runtime_error("cannot open report path " + opt.report_path);
    }
    out << j.dump(2) << "\n";
  }

  if (!opt.ledger_path.empty()) {
    std::ofstream out(opt.ledger_path, std::ios::trunc);
    if (!out) {
      throw std::runtime_error("cannot open ledger path " + opt.ledger_path);
    }
    report.ledger.write_jsonl(out);
  }

  if (!opt.steps_csv_path.empty()) {
    std::ofstream out(opt.steps_csv_path, std::ios::trunc);
    if (!out) {
      throw std::runtime_error("cannot open steps csv path " + opt.steps_csv_path);
    }
    write_steps_csv(report, out);
  }

  // Console summary.
  std::printf("mode=%s batch=%zu prompt_len=%zu gen_len=%zu", to_string(config.mode),
              config.batch, config.prompt_len, config.gen_len);
  if (config.mode == CacheMode::kcache) {
    std::printf(" topn=%zu resident_layers=%zu renormalize=%d", config.top_n,
                config.resident_layers, config.renormalize ? 1 : 0);
  }
  std::printf("\nweights=%s prompt=%s\n", weight_source.c_str(), prompt_source.c_str());
  for (std::size_t b = 0; b < report.tokens.size(); ++b) {
    std::printf("tokens[%zu]:", b);
    for (TokenId id : report.tokens[b]) {
      std::printf(" %u", id);
    }
    std::printf("\n");
  }
  double dropped = 0.0;
  for (const StepStats& s : report.steps) {
    dropped += s.mean_dropped_mass;
  }
  if (!report.steps.empty()) {
    dropped /= static_cast<double>(report.steps.size());
  }
  std::printf("mean dropped mass: %s\n", float9(dropped).c_str());
  std::printf("ledger: D2H %llu bytes, H2D %llu bytes\n",
              static_cast<unsigned long long>(report.d2h_bytes_total),
              static_cast<unsigned long long>(report.h2d_bytes_total));
  std::printf("footprint: fast %llu, slow %llu, weights %llu bytes\n",
              static_cast<unsigned long long>(report.footprint.fast_bytes),
              static_cast<unsigned long long>(report.footprint.slow_bytes),
              static_cast<unsigned long long>(report.footprint.weight_bytes));
  std::printf("report written to %s\n", opt.report_path.c_str());
  return kExitOk;
}
