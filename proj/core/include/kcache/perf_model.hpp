#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "kcache/kv_cache.hpp"

namespace kcache {

struct HardwareProfile {
  std::string name;
  double flops = 0;          // FLOP/s at model precision
  double bw_gpu = 0;         // device memory bytes/s
  double bw_h2d = 0;         // host-to-device bytes/s
  double bw_d2h = 0;         // device-to-host bytes/s
  double fast_capacity = 0;  // bytes
  std::string notes;         // e.g. assumed values
};

// "a100-80g" and "paper-eval-gpu"; throws std::invalid_argument otherwise.
HardwareProfile builtin_profile(std::string_view name);
std::vector<std::string> builtin_profile_names();

// JSON file {"name","flops","bw_gpu","bw_h2d","bw_d2h","fast_capacity"}.
HardwareProfile load_profile(const std::filesystem::path& path);

// Builtin name first, then a file path.
HardwareProfile resolve_profile(const std::string& name_or_path);

struct DecodeShape {
  std::size_t batch = 1;
  std::size_t seq_len = 1;
  std::size_t d_model = 0;
  std::size_t n_heads = 0;
  std::size_t head_dim = 0;
  std::size_t bytes_per_element = 2;
};

struct SubmoduleCost {
  std::string name;
  std::uint64_t flops = 0;
  std::uint64_t io_bytes = 0;

  double arithmetic_intensity() const;
  // Roofline rule: max(compute time, memory time).
  double est_time(const HardwareProfile& p) const;
};

struct CostBreakdown {
  std::vector<SubmoduleCost> submodules;
  // Gathered-V traffic per decode step for one offloaded layer
  // (bytes * b * n * min(N, s) * h); zero for the baseline.
  std::uint64_t h2d_transfer_bytes = 0;

  const SubmoduleCost& operator[](std::string_view name) const;
  std::uint64_t total_flops() const;
  std::uint64_t total_io_bytes() const;
  double est_time(const HardwareProfile& p) const;  // sum of submodule est times
  double transfer_time(const HardwareProfile& p) const;
};

// Per-step decode MHA cost of one layer. Baseline rows:
//   qkv          (6bd^2,  12bd + 6d^2)
//   scores       (2bsd,   2bnh + 2bnhs + 2bns)
//   weighted_sum (2bsd,   2bns + 2bsd + 2bd)
//   out_proj     (2bd^2,  4bd + 2d^2)
// kcache rows swap the scores IO tail for 2bnN and the weighted_sum row for
// (2bNd, 2bnN + 2bNd + 2bd), N clamped to s. IO scales linearly with
// bytes_per_element (listed values are bytes = 2).
CostBreakdown decode_mha_cost(const DecodeShape& shape, CacheMode mode, std::size_t top_n = 0);

// SwiGLU FFN, same accounting style: 6*b*d*f FLOPs, bytes*(3bd + 3df + 3bf) IO.
SubmoduleCost decode_ffn_cost(std::size_t batch, std::size_t d_model, std::size_t ffn_hidden,
                              std::size_t bytes_per_element);

struct OverlapCheck {
  bool holds = false;       // strict: per-block compute time > per-block D2H time
  double lhs = 0;           // reduced form: (22d + 4s) / bytes
  double rhs = 0;           // reduced form: flops / bw_d2h
  double compute_time = 0;  // (22bsd^2 + 4bs^2d) / flops
  double transfer_time = 0; // bytes*b*s*d / bw_d2h
};

// Can each layer's prefill compute hide the previous layer's V offload?
OverlapCheck prefill_overlap_check(std::size_t s, std::size_t d, std::size_t b,
                                   std::size_t bytes_per_element, const HardwareProfile& p);

struct TransferCheck {
  bool beneficial = false;
  double ratio = 0;      // s / N
  double threshold = 0;  // bw_gpu / bw_h2d
};

// Reduced decode transfer-benefit condition: s/N > bw_gpu/bw_h2d.
TransferCheck decode_transfer_check(std::size_t s, std::size_t top_n, const HardwareProfile& p);

struct TransferCheckExact {
  bool beneficial = false;
  double h2d_time = 0;           // bytes*b*n*N*h / bw_h2d
  double saved_memory_time = 0;  // (baseline - kcache weighted_sum IO) / bw_gpu
};

// Unreduced form with all weighted_sum IO terms kept, for cross-checking the
// reduced condition.
TransferCheckExact decode_transfer_check_exact(const DecodeShape& shape, std::size_t top_n,
                                               const HardwareProfile& p);

// 2 * bytes * b * s * d * l, overflow-guarded.
std::uint64_t kv_cache_bytes(std::size_t b, std::size_t s, std::size_t d, std::size_t l,
                             std::size_t bytes_per_element);

struct ProjectShape {
  DecodeShape decode;
  std::size_t n_layers = 0;
  std::size_t ffn_hidden = 0;
};

struct RunProjection {
  double baseline_step_time = 0;
  double kcache_step_time = 0;
  double baseline_tokens_per_s = 0;
  double kcache_tokens_per_s = 0;
  double speedup = 0;  // kcache_tokens_per_s / baseline_tokens_per_s
  double h2d_time_per_offloaded_layer = 0;
};

// Per-decode-step time projection for both modes: per layer, the sum of MHA
// and FFN roofline times; offloaded kcache layers add the gather transfer
// time, overlap-free unless overlap_h2d.
RunProjection project_run(const ProjectShape& shape, std::size_t top_n,
                          std::size_t resident_layers, const HardwareProfile& p,
                          bool overlap_h2d = false);

}  // namespace kcache
