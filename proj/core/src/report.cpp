#include "kcache/report.hpp"

#include <cstdio>
#include <fstream>

#include <json.hpp>

namespace kcache {

std::string float9(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

namespace {

nlohmann::json config_json(const GenerationReport& r) {
  const EngineConfig& c = r.config;
  nlohmann::json j{
      {"mode", to_string(c.mode)},
      {"renormalize", c.renormalize},
      {"topn_on_resident", c.topn_on_resident},
      {"prompt_seed", c.prompt_seed},
      {"prompt_len", c.prompt_len},
      {"gen_len", c.gen_len},
      {"batch", c.batch},
      {"bytes_per_element", c.bytes_per_element},
  };
  if (c.mode == CacheMode::kcache) {
    j["top_n"] = c.top_n;
    j["resident_layers"] = c.resident_layers;
  }
  if (c.fast_capacity) {
    j["fast_capacity"] = *c.fast_capacity;
  }
  return j;
}

}  // namespace

std::string report_to_json(const GenerationReport& r) {
  nlohmann::json j;
  j["schema"] = "kcache-report-v1";
  j["model"] = {
      {"n_layers", r.model.n_layers},   {"d_model", r.model.d_model},
      {"n_heads", r.model.n_heads},     {"head_dim", r.model.head_dim},
      {"ffn_hidden", r.model.ffn_hidden}, {"vocab", r.model.vocab},
      {"max_seq", r.model.max_seq},
  };
  j["engine"] = config_json(r);
  j["weight_source"] = r.weight_source;
  j["prompt_source"] = r.prompt_source;
  j["init_range"] = r.init_range;
  j["tokens"] = r.tokens;

  nlohmann::json steps = nlohmann::json::array();
  for (std::size_t i = 0; i < r.steps.size(); ++i) {
    const StepStats& s = r.steps[i];
    steps.push_back({
        {"step", i},
        {"h2d_bytes", s.h2d_bytes},
        {"d2h_bytes", s.d2h_bytes},
        {"mean_dropped_mass", s.mean_dropped_mass},
        {"position_histogram", s.position_histogram},
    });
  }
  j["steps"] = steps;

  nlohmann::json per_layer = nlohmann::json::array();
  for (const LayerTransferTotals& t : r.per_layer) {
    per_layer.push_back(
        {{"layer", t.layer}, {"d2h_bytes", t.d2h_bytes}, {"h2d_bytes", t.h2d_bytes}});
  }
  j["per_layer"] = per_layer;

  j["ledger_totals"] = {{"d2h_bytes", r.d2h_bytes_total}, {"h2d_bytes", r.h2d_bytes_total}};
  j["footprint"] = {{"fast_bytes", r.footprint.fast_bytes},
                    {"slow_bytes", r.footprint.slow_bytes},
                    {"weight_bytes", r.footprint.weight_bytes}};
  return j.dump(2) + "\n";
}

void write_report_json(const GenerationReport& report, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) {
    throw std::runtime_error("write_report_json: cannot open " + path.string());
  }
  out << report_to_json(report);
}

void write_steps_csv(const GenerationReport& report, std::ostream& out) {
  out << "step,h2d_bytes,d2h_bytes,mean_dropped_mass";
  for (std::size_t b = 0; b < kPositionHistogramBins; ++b) {
    out << ",hist" << b;
  }
  out << "\n";
  for (std::size_t i = 0; i < report.steps.size(); ++i) {
    const StepStats& s = report.steps[i];
    out << i << "," << s.h2d_bytes << "," << s.d2h_bytes << ","
        << float9(s.mean_dropped_mass);
    for (std::uint64_t h : s.position_histogram) {
      out << "," << h;
    }
    out << "\n";
  }
}

}  // namespace kcache
