#include "kcache/perf_model.hpp"

#include <algorithm>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "kcache/checked.hpp"
#include "kcache/errors.hpp"

namespace kcache {

HardwareProfile builtin_profile(std::string_view name) {
  if (name == "a100-80g") {
    // Memory bandwidths as published for the device; FLOP rate is the public
    // fp16 tensor spec, overridable via a profile file.
    return {"a100-80g", 312e12, 2039e9, 32e9, 32e9, 80e9, ""};
  }
  if (name == "paper-eval-gpu") {
    return {"paper-eval-gpu", 180e12, 1e12, 32e9, 32e9, 64e9,
            "H2D/D2H bandwidth unreported for this device; defaulted to 32e9 "
            "bytes/s, projections approximate"};
  }
  throw std::invalid_argument("unknown builtin profile: " + std::string(name));
}

std::vector<std::string> builtin_profile_names() { return {"a100-80g", "paper-eval-gpu"}; }

HardwareProfile load_profile(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("load_profile: cannot open " + path.string());
  }
  nlohmann::json j = nlohmann::json::parse(in);
  HardwareProfile p;
  p.name = j.at("name").get<std::string>();
  p.flops = j.at("flops").get<double>();
  p.bw_gpu = j.at("bw_gpu").get<double>();
  p.bw_h2d = j.at("bw_h2d").get<double>();
  p.bw_d2h = j.at("bw_d2h").get<double>();
  p.fast_capacity = j.at("fast_capacity").get<double>();
  p.notes = j.value("notes", "");
  if (p.flops <= 0 || p.bw_gpu <= 0 || p.bw_h2d <= 0 || p.bw_d2h <= 0) {
    throw std::invalid_argument("load_profile: all rates must be positive");
  }
  return p;
}

HardwareProfile resolve_profile(const std::string& name_or_path) {
  for (const auto& name : builtin_profile_names()) {
    if (name == name_or_path) {
      return builtin_profile(name);
    }
  }
  if (std::filesystem::exists(name_or_path)) {
    return load_profile(name_or_path);
  }
  throw std::invalid_argument("profile is neither a builtin name nor a file: " + name_or_path);
}

double SubmoduleCost::arithmetic_intensity() const {
  return static_cast<double>(flops) / static_cast<double>(io_bytes);
}

double SubmoduleCost::est_time(const HardwareProfile& p) const {
  return std::max(static_cast<double>(flops) / p.flops, static_cast<double>(io_bytes) / p.bw_gpu);
}

const SubmoduleCost& CostBreakdown::operator[](std::string_view name) const {
  for (const auto& s : submodules) {
    if (s.name == name) {
      return s;
    }
  }
  throw std::invalid_argument("CostBreakdown: no submodule named " + std::string(name));
}

std::uint64_t CostBreakdown::total_flops() const {
  std::uint64_t acc = 0;
  for (const auto& s : submodules) {
    acc += s.flops;
  }
  return acc;
}

std::uint64_t CostBreakdown::total_io_bytes() const {
  std::uint64_t acc = 0;
  for (const auto& s : submodules) {
    acc += s.io_bytes;
  }
  return acc;
}

double CostBreakdown::est_time(const HardwareProfile& p) const {
  double acc = 0;
  for (const auto& s : submodules) {
    acc += s.est_time(p);
  }
  return acc;
}

double CostBreakdown::transfer_time(const HardwareProfile& p) const {
  return static_cast<double>(h2d_transfer_bytes) / p.bw_h2d;
}

CostBreakdown decode_mha_cost(const DecodeShape& shape, CacheMode mode, std::size_t top_n) {
  const std::uint64_t b = shape.batch, s = shape.seq_len, d = shape.d_model, n = shape.n_heads,
                      h = shape.head_dim, bytes = shape.bytes_per_element;
  if (d != n * h) {
    throw ShapeError("decode_mha_cost: d_model must equal n_heads * head_dim");
  }
  if (b == 0 || s == 0 || bytes == 0) {
    throw ShapeError("decode_mha_cost: zero-sized shape");
  }
  if (mode == CacheMode::kcache && top_n == 0) {
    throw std::invalid_argument("decode_mha_cost: kcache mode requires top_n >= 1");
  }
  const std::uint64_t N = std::min<std::uint64_t>(top_n, s);

  CostBreakdown cost;
  cost.submodules.push_back(
      {"qkv", checked_mul({6, b, d, d}), checked_mul({bytes, 6 * b * d + 3 * d * d})});
  if (mode == CacheMode::baseline) {
    cost.submodules.push_back({"scores", checked_mul({2, b, s, d}),
                               checked_mul({bytes, b * n * h + b * n * h * s + b * n * s})});
    cost.submodules.push_back({"weighted_sum", checked_mul({2, b, s, d}),
                               checked_mul({bytes, b * n * s + b * s * d + b * d})});
  } else {
    cost.submodules.push_back({"scores", checked_mul({2, b, s, d}),
                               checked_mul({bytes, b * n * h + b * n * h * s + b * n * N})});
    cost.submodules.push_back({"weighted_sum", checked_mul({2, b, N, d}),
                               checked_mul({bytes, b * n * N + b * N * d + b * d})});
    cost.h2d_transfer_bytes = checked_mul({bytes, b, n, N, h});
  }
  cost.submodules.push_back(
      {"out_proj", checked_mul({2, b, d, d}), checked_mul({bytes, 2 * b * d + d * d})});
  return cost;
}

SubmoduleCost decode_ffn_cost(std::size_t batch, std::size_t d_model, std::size_t ffn_hidden,
                              std::size_t bytes_per_element) {
  const std::uint64_t b = batch, d = d_model, f = ffn_hidden, bytes = bytes_per_element;
  return {"ffn", checked_mul({6, b, d, f}),
          checked_mul({bytes, 3 * b * d + 3 * d * f + 3 * b * f})};
}

OverlapCheck prefill_overlap_check(std::size_t s, std::size_t d, std::size_t b,
                                   std::size_t bytes_per_element, const HardwareProfile& p) {
  const double bd = static_cast<double>(b);
  const double sd = static_cast<double>(s);
  const double dd = static_cast<double>(d);
  const double bytes = static_cast<double>(bytes_per_element);

  OverlapCheck check;
  check.compute_time = (22.0 * bd * sd * dd * dd + 4.0 * bd * sd * sd * dd) / p.flops;
  check.transfer_time = bytes * bd * sd * dd / p.bw_d2h;
  check.holds = check.compute_time > check.transfer_time;
  // Reduced form; equals 11d + 2s at bytes = 2.
  check.lhs = (22.0 * dd + 4.0 * sd) / bytes;
  check.rhs = p.flops / p.bw_d2h;
  return check;
}

TransferCheck decode_transfer_check(std::size_t s, std::size_t top_n, const HardwareProfile& p) {
  if (s == 0 || top_n == 0) {
    throw std::invalid_argument("decode_transfer_check: s and top_n must be >= 1");
  }
  TransferCheck check;
  check.ratio = static_cast<double>(s) / static_cast<double>(top_n);
  check.threshold = p.bw_gpu / p.bw_h2d;
  check.beneficial = check.ratio > check.threshold;
  return check;
}

TransferCheckExact decode_transfer_check_exact(const DecodeShape& shape, std::size_t top_n,
                                               const HardwareProfile& p) {
  const CostBreakdown baseline = decode_mha_cost(shape, CacheMode::baseline);
  const CostBreakdown kc = decode_mha_cost(shape, CacheMode::kcache, top_n);
  TransferCheckExact check;
  check.h2d_time = static_cast<double>(kc.h2d_transfer_bytes) / p.bw_h2d;
  check.saved_memory_time = (static_cast<double>(baseline["weighted_sum"].io_bytes) -
                             static_cast<double>(kc["weighted_sum"].io_bytes)) /
                            p.bw_gpu;
  check.beneficial = check.h2d_time < check.saved_memory_time;
  return check;
}

std::uint64_t kv_cache_bytes(std::size_t b, std::size_t s, std::size_t d, std::size_t l,
                             std::size_t bytes_per_element) {
  return checked_mul({2, bytes_per_element, b, s, d, l});
}

RunProjection project_run(const ProjectShape& shape, std::size_t top_n,
                          std::size_t resident_layers, const HardwareProfile& p,
                          bool overlap_h2d) {
  if (resident_layers > shape.n_layers) {
    throw ShapeError("project_run: resident_layers > n_layers");
  }
  const SubmoduleCost ffn = decode_ffn_cost(shape.decode.batch, shape.decode.d_model,
                                            shape.ffn_hidden, shape.decode.bytes_per_element);
  const CostBreakdown baseline = decode_mha_cost(shape.decode, CacheMode::baseline);
  const CostBreakdown kc = decode_mha_cost(shape.decode, CacheMode::kcache, top_n);

  const double baseline_layer = baseline.est_time(p) + ffn.est_time(p);
  const double kc_transfer = overlap_h2d ? 0.0 : kc.transfer_time(p);
  const double kc_layer = kc.est_time(p) + ffn.est_time(p) + kc_transfer;

  const double l = static_cast<double>(shape.n_layers);
  const double resident = static_cast<double>(resident_layers);

  RunProjection proj;
  proj.baseline_step_time = l * baseline_layer;
  proj.kcache_step_time = resident * baseline_layer + (l - resident) * kc_layer;
  proj.baseline_tokens_per_s = static_cast<double>(shape.decode.batch) / proj.baseline_step_time;
  proj.kcache_tokens_per_s = static_cast<double>(shape.decode.batch) / proj.kcache_step_time;
  proj.speedup = proj.kcache_tokens_per_s / proj.baseline_tokens_per_s;
  proj.h2d_time_per_offloaded_layer = kc_transfer;
  return proj;
}

}  // namespace kcache
