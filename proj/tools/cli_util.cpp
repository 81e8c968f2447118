#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include "commands.hpp"

kcache::ModelConfig resolve_preset(const std::string& name) {
  if (name == "toy") {
    return kcache::ModelConfig::toy();
  }
  if (name == "7b-shape") {
    return kcache::ModelConfig::shape_7b();
  }
  throw UsageError("unknown preset: " + name + " (expected toy or 7b-shape)");
}

kcache::TokenMatrix load_prompt_file(const std::string& path, std::size_t vocab) {
  std::ifstream in(path);
  if (!in) {
    throw UsageError("cannot open prompt file " + path);
  }
  kcache::TokenMatrix prompt;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) {
      continue;
    }
    std::istringstream parts(line);
    std::vector<kcache::TokenId> row;
    long long id;
    while (parts >> id) {
      if (id < 0 || static_cast<std::size_t>(id) >= vocab) {
        throw UsageError("prompt token id " + std::to_string(id) + " outside [0, " +
                         std::to_string(vocab) + ")");
      }
      row.push_back(static_cast<kcache::TokenId>(id));
    }
    if (row.empty()) {
      throw UsageError("prompt file has a line with no token ids");
    }
    prompt.push_back(std::move(row));
  }
  if (prompt.empty()) {
    throw UsageError("prompt file is empty");
  }
  for (const auto& row : prompt) {
    if (row.size() != prompt[0].size()) {
      throw UsageError("all prompt rows must share one length");
    }
  }
  return prompt;
}

std::string human_bytes(std::uint64_t bytes) {
  char buf[64];
  if (bytes >= (1ull << 30)) {
    std::snprintf(buf, sizeof(buf), "%.2f GiB", static_cast<double>(bytes) / (1ull << 30));
  } else if (bytes >= (1ull << 20)) {
    std::snprintf(buf, sizeof(buf), "%.2f MiB", static_cast<double>(bytes) / (1ull << 20));
  } else {
    std::snprintf(buf, sizeof(buf), "%llu B", static_cast<unsigned long long>(bytes));
  }
  return buf;
}

std::size_t sweep_thread_budget(std::size_t cells) {
  std::size_t budget = std::max<std::size_t>(1, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("KCACHE_THREADS")) {
    const long parsed = std::strtol(env, nullptr, 10);
    if (parsed >= 1) {
      budget = std::min<std::size_t>(budget, static_cast<std::size_t>(parsed));
    }
  }
  return std::max<std::size_t>(1, std::min(budget, cells));
}
