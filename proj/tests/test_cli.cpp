// Drives the built `kcache` binary end to end. The binary path comes from
// the KCACHE_CLI environment variable (set by CTest).
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace {

struct RunResult {
  int exit_code = -1;
  std::string output;
};

std::string cli_path() {
  const char* env = std::getenv("KCACHE_CLI");
  REQUIRE_MESSAGE(env != nullptr, "KCACHE_CLI must point at the built binary");
  return env;
}

RunResult run_raw(const std::string& cmd_line) {
  const std::string cmd = cmd_line + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  RunResult res;
  std::array<char, 4096> buf{};
  while (std::fgets(buf.data(), buf.size(), pipe)) {
    res.output += buf.data();
  }
  const int status = pclose(pipe);
  res.exit_code = WEXITSTATUS(status);
  return res;
}

RunResult run(const std::string& args) { return run_raw(cli_path() + " " + args); }

std::filesystem::path work_dir() {
  const auto dir = std::filesystem::temp_directory_path() / "kcache_cli_test";
  std::filesystem::create_directories(dir);
  return dir;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("gen runs are byte-stable") {
  const auto dir = work_dir();
  const auto r1 = dir / "gen1.json";
  const auto r2 = dir / "gen2.json";
  const std::string flags =
      "gen --preset toy --seed 1 --mode baseline --prompt-len 64 --gen-len 32 --report ";
  CHECK(run(flags + r1.string()).exit_code == 0);
  CHECK(run(flags + r2.string()).exit_code == 0);
  const std::string a = slurp(r1);
  CHECK_FALSE(a.empty());
  CHECK(a == slurp(r2));
}

TEST_CASE("gen kcache with full coverage reproduces baseline tokens") {
  const auto dir = work_dir();
  const auto base = dir / "base.json";
  const auto kc = dir / "kc.json";
  CHECK(run("gen --preset toy --seed 9 --mode baseline --prompt-len 48 --gen-len 24 --report " +
            base.string())
            .exit_code == 0);
  CHECK(run("gen --preset toy --seed 9 --mode kcache --topn 4096 --resident-layers 0 "
            "--prompt-len 48 --gen-len 24 --report " +
            kc.string())
            .exit_code == 0);
  // token arrays are embedded verbatim in the reports
  const std::string a = slurp(base);
  const std::string b = slurp(kc);
  const auto tokens_of = [](const std::string& s) {
    const auto pos = s.find("\"tokens\"");
    const auto end = s.find(']', s.find('[', pos));
    return s.substr(pos, end - pos);
  };
  CHECK(tokens_of(a) == tokens_of(b));
}

TEST_CASE("gen exit codes") {
  SUBCASE("flag conflict is a usage error") {
    const RunResult r = run("gen --preset toy --mode baseline --topn 8");
    CHECK(r.exit_code == 2);
  }
  SUBCASE("capacity breach maps to exit 3") {
    const RunResult r =
        run("gen --preset toy --prompt-len 8 --gen-len 4 --fast-capacity 1000");
    CHECK(r.exit_code == 3);
  }
  SUBCASE("unknown flag is a usage error") {
    CHECK(run("gen --preset toy --frobnicate").exit_code == 2);
  }
  SUBCASE("shape-only preset cannot generate") {
    CHECK(run("gen --preset 7b-shape --prompt-len 8 --gen-len 2").exit_code == 2);
  }
}

TEST_CASE("gen accepts a prompt file and writes a ledger") {
  const auto dir = work_dir();
  const auto prompt = dir / "prompt.txt";
  {
    std::ofstream out(prompt);
    out << "1 2 3 4 5 6 7 8\n9 10 11 12 13 14 15 16\n";
  }
  const auto ledger = dir / "ledger.jsonl";
  const RunResult r = run("gen --preset toy --mode kcache --topn 4 --prompt " + prompt.string() +
                          " --gen-len 4 --report " + (dir / "p.json").string() + " --ledger " +
                          ledger.string());
  CHECK(r.exit_code == 0);
  const std::string lines = slurp(ledger);
  CHECK(lines.find("\"phase\":\"prefill\"") != std::string::npos);
  CHECK(lines.find("\"dir\":\"H2D\"") != std::string::npos);

  // row count disagreement with --batch
  CHECK(run("gen --preset toy --prompt " + prompt.string() + " --batch 3 --gen-len 2")
            .exit_code == 2);
}

TEST_CASE("perf prints the paper-shape memory line and verdicts") {
  const RunResult r = run("perf --profile a100-80g --b 8 --s 32768 --d 4096 --l 32 --bytes 2");
  CHECK(r.exit_code == 0);
  CHECK(r.output.find("137438953472 bytes") != std::string::npos);
  CHECK(r.output.find("prefill overlap: holds") != std::string::npos);

  const RunResult t = run("perf --profile a100-80g --s 8192 --topn 128");
  CHECK(t.exit_code == 0);
  CHECK(t.output.find("transfer beneficial: true") != std::string::npos);
  CHECK(t.output.find("63.71875") != std::string::npos);

  CHECK(run("perf --profile no-such-gpu").exit_code == 2);
}

TEST_CASE("perf accepts a custom profile file") {
  const auto dir = work_dir();
  const auto profile = dir / "flat.json";
  {
    std::ofstream out(profile);
    out << R"({"name":"flat","flops":1e12,"bw_gpu":5e9,"bw_h2d":5e9,"bw_d2h":5e9,)"
        << R"("fast_capacity":1e9})";
  }
  const RunResult r = run("perf --profile " + profile.string() + " --s 1024 --topn 16");
  CHECK(r.exit_code == 0);
  CHECK(r.output.find("threshold 1") != std::string::npos);
}

TEST_CASE("sweep produces deterministic monotone columns") {
  const auto dir = work_dir();
  const auto csv1 = dir / "sweep1.csv";
  const auto csv2 = dir / "sweep2.csv";
  const std::string flags =
      "sweep --preset toy --sweep-n 32,64,128 --sweep-s 256 --gen-len 16 --measure --out ";
  CHECK(run(flags + csv1.string()).exit_code == 0);
  CHECK(run(flags + csv2.string()).exit_code == 0);
  const std::string a = slurp(csv1);
  CHECK(a == slurp(csv2));

  // parse the mean_dropped_mass column (last) and check monotone decrease
  std::istringstream lines(a);
  std::string line;
  std::getline(lines, line);  // header
  double prev = 2.0;
  int rows = 0;
  while (std::getline(lines, line)) {
    const auto pos = line.rfind(',');
    const double dropped = std::stod(line.substr(pos + 1));
    CHECK(dropped <= prev + 1e-12);
    prev = dropped;
    ++rows;
  }
  CHECK(rows == 3);
}

TEST_CASE("sweep output is identical across thread budgets") {
  const auto dir = work_dir();
  const auto serial = dir / "serial.csv";
  const auto parallel = dir / "parallel.csv";
  const std::string flags =
      "sweep --preset toy --sweep-n 8,32 --sweep-l 0,2 --sweep-s 128 --gen-len 8 --measure"
      " --out ";
  CHECK(run_raw("env KCACHE_THREADS=1 " + cli_path() + " " + flags + serial.string())
            .exit_code == 0);
  CHECK(run_raw("env KCACHE_THREADS=8 " + cli_path() + " " + flags + parallel.string())
            .exit_code == 0);
  const std::string a = slurp(serial);
  CHECK_FALSE(a.empty());
  CHECK(a == slurp(parallel));
}

TEST_CASE("sweep guards") {
  CHECK(run("sweep --preset toy --sweep-n \"\" --out /dev/null").exit_code == 2);
  CHECK(run("sweep --preset toy --sweep-s 8 --gen-len 16 --out /dev/null").exit_code == 2);
  // cell-count guard: 21*21*24 > 10^4
  std::string big_n, big_l;
  for (int i = 1; i <= 21; ++i) {
    big_n += std::to_string(i) + (i < 21 ? "," : "");
  }
  std::string axis_s;
  for (int i = 0; i < 24; ++i) {
    axis_s += std::to_string(64 + i) + (i < 23 ? "," : "");
  }
  CHECK(run("sweep --preset toy --sweep-n " + big_n + " --sweep-l " + big_n + " --sweep-s " +
            axis_s + " --out /dev/null")
            .exit_code == 2);
}

TEST_CASE("verify passes clean and fails under an injected fault") {
  const RunResult ok = run("verify --seed 0");
  CHECK(ok.exit_code == 0);
  CHECK(ok.output.find("FAIL") == std::string::npos);

  const RunResult bad = run("verify --seed 0 --inject-fault unsorted-gather");
  CHECK(bad.exit_code == 4);
  CHECK(bad.output.find("FAIL exact-equivalence") != std::string::npos);

  CHECK(run("verify --inject-fault nonsense").exit_code == 2);
}
