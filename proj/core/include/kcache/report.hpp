#pragma once

#include <filesystem>
#include <ostream>
#include <string>

#include "kcache/engine.hpp"

namespace kcache {

// Floating-point fields in CSV/console output use 9 significant digits.
std::string float9(double v);

// Deterministic JSON document for a generation run (schema in README).
std::string report_to_json(const GenerationReport& report);
void write_report_json(const GenerationReport& report, const std::filesystem::path& path);

// Optional per-step CSV: step,h2d_bytes,d2h_bytes,mean_dropped_mass,hist0..7.
void write_steps_csv(const GenerationReport& report, std::ostream& out);

}  // namespace kcache
