#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "commands.hpp"
#include "kcache/perf_model.hpp"
#include "kcache/report.hpp"

using namespace kcache;

namespace {

void print_breakdown(const char* title, const CostBreakdown& cost, const HardwareProfile& p) {
  std::printf("%s\n", title);
  std::printf("  %-14s %16s %16s %10s %14s\n", "submodule", "flops", "io_bytes", "AI",
              "est_time_s");
  for (const SubmoduleCost& s : cost.submodules) {
    std::printf("  %-14s %16llu %16llu %10s %14s\n", s.name.c_str(),
                static_cast<unsigned long long>(s.flops),
                static_cast<unsigned long long>(s.io_bytes),
                float9(s.arithmetic_intensity()).c_str(), float9(s.est_time(p)).c_str());
  }
  if (cost.h2d_transfer_bytes > 0) {
    std::printf("  %-14s %16s %16llu %10s %14s\n", "v_gather(H2D)", "-",
                static_cast<unsigned long long>(cost.h2d_transfer_bytes), "-",
                float9(cost.transfer_time(p)).c_str());
  }
}

nlohmann::json breakdown_json(const CostBreakdown& cost, const HardwareProfile& p) {
  nlohmann::json rows = nlohmann::json::array();
  for (const SubmoduleCost& s : cost.submodules) {
    rows.push_back({{"name", s.name},
                    {"flops", s.flops},
                    {"io_bytes", s.io_bytes},
                    {"arithmetic_intensity", s.arithmetic_intensity()},
                    {"est_time_s", s.est_time(p)}});
  }
  return rows;
}

}  // namespace

int run_perf(const PerfOptions& opt) {
  const HardwareProfile profile = resolve_profile(opt.profile);

  ModelConfig config = resolve_preset(opt.preset);
  if (opt.d_model > 0) {
    config.d_model = opt.d_model;
  }
  if (opt.n_heads > 0) {
    config.n_heads = opt.n_heads;
  }
  if (opt.n_layers > 0) {
    config.n_layers = opt.n_layers;
  }
  config.ffn_hidden =
      opt.ffn_hidden > 0 ? opt.ffn_hidden : ModelConfig::default_ffn_hidden(config.d_model);
  if (config.d_model % config.n_heads != 0) {
    throw UsageError("--d must be divisible by --n");
  }
  config.head_dim = config.d_model / config.n_heads;
  config.max_seq = std::max(config.max_seq, opt.seq_len);

  const std::size_t b = opt.batch, s = opt.seq_len, L = opt.resident_layers;
  if (L > config.n_layers) {
    throw UsageError("--resident-layers must be <= --l");
  }
  const std::size_t top_n = std::min(opt.top_n, s);

  const std::uint64_t kv_bytes =
      kv_cache_bytes(b, s, config.d_model, config.n_layers, opt.bytes);
  const FootprintBytes base_fp =
      memory_footprint(config, b, s, CacheMode::baseline, 0, opt.bytes);
  const FootprintBytes kc_fp = memory_footprint(config, b, s, CacheMode::kcache, L, opt.bytes);

  const DecodeShape shape{b, s, config.d_model, config.n_heads, config.head_dim, opt.bytes};
  const CostBreakdown baseline_cost = decode_mha_cost(shape, CacheMode::baseline);
  const CostBreakdown kcache_cost = decode_mha_cost(shape, CacheMode::kcache, top_n);
  const SubmoduleCost ffn =
      decode_ffn_cost(b, config.d_model, config.ffn_hidden, opt.bytes);
  const OverlapCheck overlap = prefill_overlap_check(s, config.d_model, b, opt.bytes, profile);
  const TransferCheck transfer = decode_transfer_check(s, top_n, profile);
  const ProjectShape pshape{shape, config.n_layers, config.ffn_hidden};
  const RunProjection proj = project_run(pshape, top_n, L, profile, opt.overlap_h2d);

  std::printf("profile %s: flops=%s bw_gpu=%s bw_h2d=%s bw_d2h=%s capacity=%s\n",
              profile.name.c_str(), float9(profile.flops).c_str(),
              float9(profile.bw_gpu).c_str(), float9(profile.bw_h2d).c_str(),
              float9(profile.bw_d2h).c_str(), float9(profile.fast_capacity).c_str());
  if (!profile.notes.empty()) {
    std::printf("  note: %s\n", profile.notes.c_str());
  }
  std::printf("shape: b=%zu s=%zu d=%zu n=%zu h=%zu l=%zu ffn=%zu bytes=%zu topn=%zu L=%zu\n", b,
              s, config.d_model, config.n_heads, config.head_dim, config.n_layers,
              config.ffn_hidden, opt.bytes, top_n, L);

  std::printf("\nmemory\n");
  std::printf("  KV cache (baseline, 2*bytes*b*s*d*l): %llu bytes (%s)\n",
              static_cast<unsigned long long>(kv_bytes), human_bytes(kv_bytes).c_str());
  std::printf("  weights: %llu bytes (%s)\n",
              static_cast<unsigned long long>(base_fp.weight_bytes),
              human_bytes(base_fp.weight_bytes).c_str());
  const auto fits = [&](const FootprintBytes& fp) {
    return static_cast<double>(fp.fast_bytes + fp.weight_bytes) <= profile.fast_capacity;
  };
  std::printf("  baseline fast tier: %llu bytes (%s) -> %s\n",
              static_cast<unsigned long long>(base_fp.fast_bytes),
              human_bytes(base_fp.fast_bytes).c_str(),
              fits(base_fp) ? "fits" : "exceeds capacity (OOM)");
  std::printf("  kcache   fast tier: %llu bytes (%s), slow tier: %llu bytes (%s) -> %s\n",
              static_cast<unsigned long long>(kc_fp.fast_bytes),
              human_bytes(kc_fp.fast_bytes).c_str(),
              static_cast<unsigned long long>(kc_fp.slow_bytes),
              human_bytes(kc_fp.slow_bytes).c_str(),
              fits(kc_fp) ? "fits" : "exceeds capacity (OOM)");

  std::printf("\ndecode MHA per layer per step\n");
  print_breakdown("baseline:", baseline_cost, profile);
  print_breakdown("kcache:", kcache_cost, profile);
  std::printf("ffn:\n");
  std::printf("  %-14s %16llu %16llu %10s %14s\n", ffn.name.c_str(),
              static_cast<unsigned long long>(ffn.flops),
              static_cast<unsigned long long>(ffn.io_bytes),
              float9(ffn.arithmetic_intensity()).c_str(), float9(ffn.est_time(profile)).c_str());

  std::printf("\nprefill overlap: %s (lhs %s %s rhs %s)\n", overlap.holds ? "holds" : "fails",
              float9(overlap.lhs).c_str(), overlap.holds ? ">" : "<=",
              float9(overlap.rhs).c_str());
  std::printf("transfer beneficial: %s (s/N = %s %s threshold %s)\n",
              transfer.beneficial ? "true" : "false", float9(transfer.ratio).c_str(),
              transfer.beneficial ? ">" : "<=", float9(transfer.threshold).c_str());

  std::printf("\nprojected decode throughput\n");
  std::printf("  baseline: %s tokens/s (step %s s)\n", float9(proj.baseline_tokens_per_s).c_str(),
              float9(proj.baseline_step_time).c_str());
  std::printf("  kcache:   %s tokens/s (step %s s, H2D per offloaded layer %s s)\n",
              float9(proj.kcache_tokens_per_s).c_str(), float9(proj.kcache_step_time).c_str(),
              float9(proj.h2d_time_per_offloaded_layer).c_str());
  std::printf("  kcache/baseline ratio: %s\n", float9(proj.speedup).c_str());

  if (!opt.report_path.empty()) {
    nlohmann::json j;
    j["schema"] = "kcache-perf-v1";
    j["profile"] = {{"name", profile.name},     {"flops", profile.flops},
                    {"bw_gpu", profile.bw_gpu}, {"bw_h2d", profile.bw_h2d},
                    {"bw_d2h", profile.bw_d2h}, {"fast_capacity", profile.fast_capacity},
                    {"notes", profile.notes}};
    j["shape"] = {{"batch", b},
                  {"seq_len", s},
                  {"d_model", config.d_model},
                  {"n_heads", config.n_heads},
                  {"head_dim", config.head_dim},
                  {"n_layers", config.n_layers},
                  {"ffn_hidden", config.ffn_hidden},
                  {"bytes", opt.bytes},
                  {"top_n", top_n},
                  {"resident_layers", L}};
    j["memory"] = {{"kv_cache_bytes", kv_bytes},
                   {"weight_bytes", base_fp.weight_bytes},
                   {"baseline_fast_bytes", base_fp.fast_bytes},
                   {"kcache_fast_bytes", kc_fp.fast_bytes},
                   {"kcache_slow_bytes", kc_fp.slow_bytes}};
    j["baseline_mha"] = breakdown_json(baseline_cost, profile);
    j["kcache_mha"] = breakdown_json(kcache_cost, profile);
    j["kcache_h2d_transfer_bytes"] = kcache_cost.h2d_transfer_bytes;
    j["overlap"] = {{"holds", overlap.holds},
                    {"lhs", overlap.lhs},
                    {"rhs", overlap.rhs},
                    {"compute_time", overlap.compute_time},
                    {"transfer_time", overlap.transfer_time}};
    j["transfer"] = {{"beneficial", transfer.beneficial},
                     {"ratio", transfer.ratio},
                     {"threshold", transfer.threshold}};
    j["projection"] = {{"baseline_tokens_per_s", proj.baseline_tokens_per_s},
                       {"kcache_tokens_per_s", proj.kcache_tokens_per_s},
                       {"speedup", proj.speedup}};
    std::ofstream out(opt.report_path, std::ios::trunc);
    if (!out) {
      throw std::runtime_error("cannot open report path " + opt.report_path);
    }
    out << j.dump(2) << "\n";
  }
  return kExitOk;
}
