#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "kcache/engine.hpp"
#include "kcache/model.hpp"

// Exit codes: 0 success, 2 usage error, 3 capacity error, 4 verification
// failure, 1 anything else.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitCapacity = 3;
inline constexpr int kExitVerification = 4;

// Flag combinations the parser cannot reject on its own.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GenOptions {
  std::string preset = "toy";
  std::string model_file;
  std::uint64_t weight_seed = 1;
  std::uint64_t prompt_seed = 0;
  std::string prompt_file;
  std::string mode = "baseline";
  std::size_t top_n = 128;
  std::size_t resident_layers = 0;
  bool renormalize = false;
  bool topn_on_resident = false;
  std::size_t prompt_len = 64;
  std::size_t gen_len = 64;
  std::size_t batch = 1;
  std::size_t bytes = 2;
  std::uint64_t fast_capacity = 0;  // 0 = unlimited
  std::string report_path = "report.json";
  std::string ledger_path;
  std::string steps_csv_path;
  std::string profile;

  // set by main() from CLI11 counts; needed for conflict detection
  bool top_n_given = false;
  bool resident_given = false;
  bool renormalize_given = false;
  bool model_given = false;
  bool preset_given = false;
  bool prompt_len_given = false;
  bool batch_given = false;
};

struct PerfOptions {
  std::string profile = "a100-80g";
  std::string preset = "7b-shape";
  std::size_t batch = 1;
  std::size_t seq_len = 1024;
  std::size_t d_model = 0;   // 0 = from preset
  std::size_t n_heads = 0;
  std::size_t n_layers = 0;
  std::size_t ffn_hidden = 0;
  std::size_t top_n = 128;
  std::size_t resident_layers = 0;
  std::size_t bytes = 2;
  bool overlap_h2d = false;
  std::string report_path;
};

struct SweepOptions {
  std::string preset = "toy";
  std::uint64_t weight_seed = 1;
  std::uint64_t prompt_seed = 0;
  std::vector<std::size_t> topn_axis;
  std::vector<std::size_t> resident_axis;
  std::vector<std::size_t> seq_axis;
  std::vector<std::size_t> batch_axis;
  std::size_t gen_len = 16;
  std::size_t bytes = 2;
  bool measure = false;
  std::string profile = "a100-80g";
  std::string out_path = "sweep.csv";
};

struct VerifyOptions {
  std::uint64_t seed = 0;
  std::string inject_fault;
};

int run_gen(const GenOptions& opt);
int run_perf(const PerfOptions& opt);
int run_sweep(const SweepOptions& opt);
int run_verify(const VerifyOptions& opt);

// Shared helpers (cli_util.cpp).
kcache::ModelConfig resolve_preset(const std::string& name);
kcache::TokenMatrix load_prompt_file(const std::string& path, std::size_t vocab);
std::string human_bytes(std::uint64_t bytes);
std::size_t sweep_thread_budget(std::size_t cells);
