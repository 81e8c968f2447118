#include <algorithm>
#include <atomic>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

#include "commands.hpp"
#include "kcache/perf_model.hpp"
#include "kcache/report.hpp"

using namespace kcache;

namespace {

struct Cell {
  std::size_t index;
  std::size_t seq_len;
  std::size_t batch;
  std::size_t resident_layers;
  std::size_t top_n;
};

// Decode-time dropped mass accumulated along the baseline trajectory, so the
// column stays comparable across N (the kcache runs would diverge token-wise
// and measure different attention states).
struct ShadowStats {
  std::vector<std::vector<double>> dropped_sum;  // [layer][n_axis_index]
  std::vector<std::uint64_t> selections;         // [layer]
};

struct GroupResult {
  TokenMatrix baseline_tokens;
  ShadowStats shadow;
};

std::uint64_t analytic_d2h(const ModelConfig& c, const Cell& cell, std::size_t bytes) {
  // every position's V row of an offloaded layer crosses D2H exactly once
  return bytes * cell.batch * c.d_model * (c.n_layers - cell.resident_layers) * cell.seq_len;
}

std::uint64_t analytic_h2d(const ModelConfig& c, const Cell& cell, std::size_t gen_len,
                           std::size_t bytes) {
  const std::uint64_t offloaded = c.n_layers - cell.resident_layers;
  const std::size_t prompt_len = cell.seq_len - gen_len;
  std::uint64_t total = 0;
  for (std::size_t step = 0; step < gen_len; ++step) {
    const std::uint64_t len = prompt_len + step + 1;
    total += offloaded * bytes * cell.batch * c.n_heads *
             std::min<std::uint64_t>(cell.top_n, len) * c.head_dim;
  }
  return total;
}

}  // namespace

int run_sweep(const SweepOptions& opt) {
  if (opt.topn_axis.empty() || opt.resident_axis.empty() || opt.seq_axis.empty() ||
      opt.batch_axis.empty()) {
    throw UsageError("every sweep axis needs at least one value");
  }
  const std::size_t cells_total = opt.topn_axis.size() * opt.resident_axis.size() *
                                  opt.seq_axis.size() * opt.batch_axis.size();
  if (cells_total > 10000) {
    throw UsageError("sweep would produce " + std::to_string(cells_total) +
                     " cells; the guard allows at most 10000");
  }
  const ModelConfig config = resolve_preset(opt.preset);
  const HardwareProfile profile = resolve_profile(opt.profile);
  for (std::size_t n : opt.topn_axis) {
    if (n == 0) {
      throw UsageError("TopN axis values must be >= 1");
    }
  }
  for (std::size_t b : opt.batch_axis) {
    if (b == 0) {
      throw UsageError("batch axis values must be >= 1");
    }
  }
  for (std::size_t s : opt.seq_axis) {
    if (s <= opt.gen_len) {
      throw UsageError("seq axis value " + std::to_string(s) +
                       " must exceed gen-len (prompt would be empty)");
    }
    if (s > config.max_seq) {
      throw UsageError("seq axis value exceeds the preset max_seq");
    }
  }
  for (std::size_t resident : opt.resident_axis) {
    if (resident > config.n_layers) {
      throw UsageError("resident axis value exceeds the preset layer count");
    }
  }
  if (opt.measure && opt.preset != "toy") {
    throw UsageError("--measure instantiates weights; use the toy preset");
  }

  // Cell order (documented): seq outer, then batch, resident layers, topn.
  std::vector<Cell> cells;
  cells.reserve(cells_total);
  for (std::size_t s : opt.seq_axis) {
    for (std::size_t b : opt.batch_axis) {
      for (std::size_t resident : opt.resident_axis) {
        for (std::size_t top_n : opt.topn_axis) {
          cells.push_back({cells.size(), s, b, resident, top_n});
        }
      }
    }
  }

  // Measured columns: one baseline run per (seq, batch) group provides the
  // reference tokens and the shadow dropped-mass table.
  std::map<std::pair<std::size_t, std::size_t>, GroupResult> groups;
  ModelWeights weights;
  if (opt.measure) {
    weights = generate_weights(config, opt.weight_seed);
    for (std::size_t s : opt.seq_axis) {
      for (std::size_t b : opt.batch_axis) {
        EngineConfig ec;
        ec.mode = CacheMode::baseline;
        ec.prompt_len = s - opt.gen_len;
        ec.gen_len = opt.gen_len;
        ec.batch = b;
        ec.bytes_per_element = opt.bytes;
        const TokenMatrix prompt = random_prompt(config, b, ec.prompt_len, opt.prompt_seed);

        GroupResult group;
        group.shadow.dropped_sum.assign(config.n_layers,
                                        std::vector<double>(opt.topn_axis.size(), 0.0));
        group.shadow.selections.assign(config.n_layers, 0);

        Engine engine(weights, ec);
        std::vector<float> sorted;
        engine.set_score_observer([&](std::size_t layer, std::size_t, std::size_t,
                                      std::span<const float> w) {
          sorted.assign(w.begin(), w.end());
          std::sort(sorted.begin(), sorted.end(), std::greater<float>());
          for (std::size_t ni = 0; ni < opt.topn_axis.size(); ++ni) {
            const std::size_t take = std::min(opt.topn_axis[ni], sorted.size());
            double mass = 0.0;
            for (std::size_t i = 0; i < take; ++i) {
              mass += sorted[i];
            }
            group.shadow.dropped_sum[layer][ni] += 1.0 - mass;
          }
          group.shadow.selections[layer] += 1;
        });

        Matrix logits = engine.prefill(prompt);
        std::vector<TokenId> next = argmax_rows(logits);
        group.baseline_tokens.assign(b, {});
        for (std::size_t step = 0; step < ec.gen_len; ++step) {
          for (std::size_t row = 0; row < b; ++row) {
            group.baseline_tokens[row].push_back(next[row]);
          }
          next = engine.decode_step(next).next_tokens;
        }
        groups.emplace(std::make_pair(s, b), std::move(group));
      }
    }
  }

  struct RowData {
    std::uint64_t d2h = 0, h2d = 0;
    FootprintBytes footprint;
    RunProjection projection;
    double agreement = 0.0;
    double dropped_mass = 0.0;
  };
  std::vector<RowData> rows(cells.size());

  auto compute_cell = [&](const Cell& cell) {
    RowData row;
    row.d2h = analytic_d2h(config, cell, opt.bytes);
    row.h2d = analytic_h2d(config, cell, opt.gen_len, opt.bytes);
    row.footprint = memory_footprint(config, cell.batch, cell.seq_len, CacheMode::kcache,
                                     cell.resident_layers, opt.bytes);
    const ProjectShape shape{
        {cell.batch, cell.seq_len, config.d_model, config.n_heads, config.head_dim, opt.bytes},
        config.n_layers,
        config.ffn_hidden};
    row.projection = project_run(shape, cell.top_n, cell.resident_layers, profile);

    if (opt.measure) {
      const GroupResult& group = groups.at({cell.seq_len, cell.batch});
      EngineConfig ec;
      ec.mode = CacheMode::kcache;
      ec.top_n = cell.top_n;
      ec.resident_layers = cell.resident_layers;
      ec.prompt_len = cell.seq_len - opt.gen_len;
      ec.gen_len = opt.gen_len;
      ec.batch = cell.batch;
      ec.bytes_per_element = opt.bytes;
      const TokenMatrix prompt =
          random_prompt(config, cell.batch, ec.prompt_len, opt.prompt_seed);
      const GenerationReport report = generate(weights, ec, prompt);

      std::size_t matches = 0;
      for (std::size_t b = 0; b < cell.batch; ++b) {
        for (std::size_t step = 0; step < opt.gen_len; ++step) {
          if (report.tokens[b][step] == group.baseline_tokens[b][step]) {
            ++matches;
          }
        }
      }
      row.agreement =
          static_cast<double>(matches) / static_cast<double>(cell.batch * opt.gen_len);

      const std::size_t ni =
          std::find(opt.topn_axis.begin(), opt.topn_axis.end(), cell.top_n) -
          opt.topn_axis.begin();
      double dropped = 0.0;
      std::uint64_t selections = 0;
      for (std::size_t layer = cell.resident_layers; layer < config.n_layers; ++layer) {
        dropped += group.shadow.dropped_sum[layer][ni];
        selections += group.shadow.selections[layer];
      }
      row.dropped_mass = selections > 0 ? dropped / static_cast<double>(selections) : 0.0;
    }
    return row;
  };

  if (opt.measure) {
    const std::size_t workers = sweep_thread_budget(cells.size());
    std::atomic<std::size_t> cursor{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        while (true) {
          const std::size_t i = cursor.fetch_add(1);
          if (i >= cells.size()) {
            return;
          }
          rows[i] = compute_cell(cells[i]);
        }
      });
    }
    for (auto& t : pool) {
      t.join();
    }
  } else {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      rows[i] = compute_cell(cells[i]);
    }
  }

  std::ostringstream csv;
  csv << "cell,seq_len,batch,topn,resident_layers,gen_len,fast_bytes,slow_bytes,weight_bytes,"
         "d2h_bytes,h2d_bytes,baseline_tps,kcache_tps,tps_ratio,agreement_top1,"
         "mean_dropped_mass\n";
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const Cell& c = cells[i];
    const RowData& r = rows[i];
    csv << c.index << "," << c.seq_len << "," << c.batch << "," << c.top_n << ","
        << c.resident_layers << "," << opt.gen_len << "," << r.footprint.fast_bytes << ","
        << r.footprint.slow_bytes << "," << r.footprint.weight_bytes << "," << r.d2h << ","
        << r.h2d << "," << float9(r.projection.baseline_tokens_per_s) << ","
        << float9(r.projection.kcache_tokens_per_s) << "," << float9(r.projection.speedup);
    if (opt.measure) {
      csv << "," << float9(r.agreement) << "," << float9(r.dropped_mass);
    } else {
      csv << ",,";
    }
    csv << "\n";
  }

  std::ofstream out(opt.out_path, std::ios::trunc);
  if (!out) {
    throw std::runtime_error("cannot open sweep output " + opt.out_path);
  }
  out << csv.str();
  std::printf("%zu cells written to %s\n", cells.size(), opt.out_path.c_str());
  return kExitOk;
}
