#include <cstdio>
#include <exception>

#include <CLI11.hpp>

#include "commands.hpp"
#include "kcache/errors.hpp"

int main(int argc, char** argv) {
  CLI::App app{"kcache: tiered KV-cache inference runtime and cost model"};
  app.require_subcommand(1);

  GenOptions gen;
  CLI::App* gen_cmd = app.add_subcommand("gen", "run generation and write a JSON report");
  auto* gen_preset = gen_cmd->add_option("--preset", gen.preset, "model preset (toy, 7b-shape)");
  auto* gen_model = gen_cmd->add_option("--model", gen.model_file, "weight file (KCW1)");
  gen_cmd->add_option("--weight-seed", gen.weight_seed, "seed for generated weights");
  gen_cmd->add_option("--seed", gen.prompt_seed, "seed for the random prompt");
  gen_cmd->add_option("--prompt", gen.prompt_file,
                      "token-id file, one space-separated line per batch row");
  gen_cmd->add_option("--mode", gen.mode, "baseline or kcache")
      ->check(CLI::IsMember({"baseline", "kcache"}));
  auto* gen_topn = gen_cmd->add_option("--topn", gen.top_n, "N for TopN selection");
  auto* gen_resident =
      gen_cmd->add_option("--resident-layers", gen.resident_layers, "L leading resident layers");
  auto* gen_renorm = gen_cmd->add_flag("--renormalize", gen.renormalize,
                                       "rescale retained weights to sum to 1");
  gen_cmd->add_flag("--topn-on-resident", gen.topn_on_resident,
                    "apply TopN to resident layers too");
  auto* gen_plen = gen_cmd->add_option("--prompt-len", gen.prompt_len, "random prompt length");
  gen_cmd->add_option("--gen-len", gen.gen_len, "tokens to generate");
  auto* gen_batch = gen_cmd->add_option("--batch", gen.batch, "batch rows");
  gen_cmd->add_option("--bytes", gen.bytes, "accounting bytes per element");
  gen_cmd->add_option("--fast-capacity", gen.fast_capacity,
                      "fast-tier byte budget (0 = unlimited)");
  gen_cmd->add_option("--report", gen.report_path, "report JSON path");
  gen_cmd->add_option("--ledger", gen.ledger_path, "transfer ledger JSONL path");
  gen_cmd->add_option("--steps-csv", gen.steps_csv_path, "per-step CSV path");
  gen_cmd->add_option("--profile", gen.profile, "attach a cost projection for this profile");

  PerfOptions perf;
  CLI::App* perf_cmd = app.add_subcommand("perf", "analytic cost report for a shape");
  perf_cmd->add_option("--profile", perf.profile, "hardware profile name or JSON file");
  perf_cmd->add_option("--preset", perf.preset, "shape preset (toy, 7b-shape)");
  perf_cmd->add_option("--b", perf.batch, "batch size");
  perf_cmd->add_option("--s", perf.seq_len, "sequence length");
  perf_cmd->add_option("--d", perf.d_model, "model width");
  perf_cmd->add_option("--n", perf.n_heads, "attention heads");
  perf_cmd->add_option("--l", perf.n_layers, "layers");
  perf_cmd->add_option("--ffn-hidden", perf.ffn_hidden, "FFN width (default (8/3)d rounded)");
  perf_cmd->add_option("--topn", perf.top_n, "N for TopN selection");
  perf_cmd->add_option("--resident-layers", perf.resident_layers, "L leading resident layers");
  perf_cmd->add_option("--bytes", perf.bytes, "bytes per element");
  perf_cmd->add_flag("--overlap-h2d", perf.overlap_h2d,
                     "model gathers as fully overlapped with compute");
  perf_cmd->add_option("--report", perf.report_path, "machine-readable JSON path");

  SweepOptions sweep;
  CLI::App* sweep_cmd = app.add_subcommand("sweep", "grid sweep into a CSV");
  sweep_cmd->add_option("--preset", sweep.preset, "model preset");
  sweep_cmd->add_option("--weight-seed", sweep.weight_seed, "seed for generated weights");
  sweep_cmd->add_option("--seed", sweep.prompt_seed, "seed for random prompts");
  sweep_cmd->add_option("--sweep-n", sweep.topn_axis, "TopN axis (comma separated)")
      ->delimiter(',');
  sweep_cmd->add_option("--sweep-l", sweep.resident_axis, "resident-layer axis")->delimiter(',');
  sweep_cmd->add_option("--sweep-s", sweep.seq_axis, "total sequence length axis")
      ->delimiter(',');
  sweep_cmd->add_option("--sweep-b", sweep.batch_axis, "batch axis")->delimiter(',');
  sweep_cmd->add_option("--gen-len", sweep.gen_len, "decode steps per measured run");
  sweep_cmd->add_option("--bytes", sweep.bytes, "bytes per element");
  sweep_cmd->add_flag("--measure", sweep.measure,
                      "run the toy model per cell for agreement/dropped-mass columns");
  sweep_cmd->add_option("--profile", sweep.profile, "profile for projected throughput");
  sweep_cmd->add_option("--out", sweep.out_path, "output CSV path");

  VerifyOptions verify;
  CLI::App* verify_cmd = app.add_subcommand("verify", "run the invariant suite");
  verify_cmd->add_option("--seed", verify.seed, "suite seed");
  verify_cmd->add_option("--inject-fault", verify.inject_fault,
                         "negative control (unsorted-gather)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*gen_cmd) {
      gen.top_n_given = gen_topn->count() > 0;
      gen.resident_given = gen_resident->count() > 0;
      gen.renormalize_given = gen_renorm->count() > 0;
      gen.model_given = gen_model->count() > 0;
      gen.preset_given = gen_preset->count() > 0;
      gen.prompt_len_given = gen_plen->count() > 0;
      gen.batch_given = gen_batch->count() > 0;
      return run_gen(gen);
    }
    if (*perf_cmd) {
      return run_perf(perf);
    }
    if (*sweep_cmd) {
      // Unset axes collapse to the single default value.
      if (sweep.topn_axis.empty()) {
        sweep.topn_axis = {128};
      }
      if (sweep.resident_axis.empty()) {
        sweep.resident_axis = {0};
      }
      if (sweep.seq_axis.empty()) {
        sweep.seq_axis = {256};
      }
      if (sweep.batch_axis.empty()) {
        sweep.batch_axis = {1};
      }
      return run_sweep(sweep);
    }
    if (*verify_cmd) {
      return run_verify(verify);
    }
  } catch (const UsageError& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    // bad values that survived parsing (unknown profile, zero N, ...)
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return kExitUsage;
  } catch (const kcache::CapacityError& e) {
    std::fprintf(stderr, "capacity error: %s\n", e.what());
    return kExitCapacity;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return kExitUsage;
}
