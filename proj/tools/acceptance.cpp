// Runs every acceptance criterion once and prints one PASS/FAIL line each.
// Criteria 1-8 come from one `run all`; criterion 9 repeats the run with the
// same config and with 8 workers and compares every CSV byte for byte.

#include "pathhjb/experiment.hpp"

#include <CLI11.hpp>

#include <cstdio>

using namespace pathhjb;

namespace {

struct Criterion {
  int id;
  const char* title;
  const char* suite;
  double limit_s;
};

const Criterion kCriteria[] = {
    {1, "Gelfand conformance", "verify-gelfand", 1.0},
    {2, "Picard contraction", "solve", 10.0},
    {3, "a priori estimate suite", "estimates", 60.0},
    {4, "dynamic programming on trees", "dpp", 30.0},
    {5, "value regularity", "value", 60.0},
    {6, "Ito-Kunita residuals", "calculus", 120.0},
    {7, "finite-dimensional convergence", "approx-study", 120.0},
    {8, "sandwich bounds", "sandwich", 300.0},
};

const SuiteOutput* find_suite(const RunResult& r, const std::string& name) {
  for (const auto& s : r.suites)
    if (s.suite == name) return &s;
  return nullptr;
}

// Names of CSVs whose hashes differ (or exist in only one run).
std::vector<std::string> csv_diff(const RunResult& a, const RunResult& b) {
  std::vector<std::string> out;
  for (const auto& [name, h] : a.files) {
    const auto it = b.files.find(name);
    if (it == b.files.end() || it->second != h) out.push_back(name);
  }
  for (const auto& [name, h] : b.files)
    if (!a.files.count(name)) out.push_back(name);
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  std::string config_path, out_dir = "acceptance_out";
  app.add_option("--config", config_path, "config file (defaults when omitted)");
  app.add_option("--out", out_dir, "scratch output directory");
  CLI11_PARSE(app, argc, argv);

  try {
    RunConfig cfg = config_path.empty() ? RunConfig::defaults() : RunConfig::load(config_path);
    cfg.set("run.workers", "1");
    const std::filesystem::path out(out_dir);

    const RunResult r1 = run_command("all", cfg, out / "run1");
    bool all_ok = true;
    for (const Criterion& c : kCriteria) {
      const SuiteOutput* s = find_suite(r1, c.suite);
      bool ok = s && s->passed() && s->seconds < c.limit_s;
      std::string detail;
      if (s) {
        for (const auto& ch : s->checks) {
          if (!ch.passed) {
            char buf[256];
            std::snprintf(buf, sizeof buf, "; failed %s: %.6g %s %.6g", ch.name.c_str(), ch.measured,
                          ch.relation.c_str(), ch.bound);
            detail += buf;
          }
        }
      }
      std::printf("%s  criterion %d (%s): %zu checks, runtime %.2f s (limit %.0f s)%s\n", ok ? "PASS" : "FAIL", c.id,
                  c.title, s ? s->checks.size() : 0, s ? s->seconds : 0.0, c.limit_s, detail.c_str());
      all_ok = all_ok && ok;
    }

    const RunResult r2 = run_command("all", cfg, out / "run2");
    RunConfig cfg8 = cfg;
    cfg8.set("run.workers", "8");
    const RunResult r8 = run_command("all", cfg8, out / "run8");
    const auto d12 = csv_diff(r1, r2);
    const auto d18 = csv_diff(r1, r8);
    const bool ok9 = d12.empty() && d18.empty() && !r1.files.empty();
    std::string detail;
    for (const auto& n : d12) detail += "; rerun differs: " + n;
    for (const auto& n : d18) detail += "; 8 workers differ: " + n;
    std::printf("%s  criterion 9 (determinism): %zu CSV files identical across reruns and worker counts%s\n",
                ok9 ? "PASS" : "FAIL", r1.files.size(), detail.c_str());
    all_ok = all_ok && ok9;

    std::printf("%s\n", all_ok ? "ALL ACCEPTANCE CRITERIA PASSED" : "ACCEPTANCE FAILED");
    return all_ok ? 0 : 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "acceptance: %s\n", e.what());
    return 2;
  }
}
