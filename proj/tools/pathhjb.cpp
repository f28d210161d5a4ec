#include "pathhjb/experiment.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

using namespace pathhjb;

namespace {

void print_result(const RunResult& r, const std::filesystem::path& out) {
  for (const auto& s : r.suites) {
    for (const auto& c : s.checks) {
      std::printf("%s  %s/%s  %.6g %s %.6g\n", c.passed ? "PASS" : "FAIL", c.suite.c_str(), c.name.c_str(), c.measured,
                  c.relation.c_str(), c.bound);
    }
    std::printf("      %s: %.2f s\n", s.suite.c_str(), s.seconds);
  }
  std::printf("%zu files written to %s; %s\n", r.files.size(), out.string().c_str(),
              r.passed() ? "all checks passed" : "SOME CHECKS FAILED");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pathhjb: path-dependent control experiments"};
  app.require_subcommand(1);

  std::string command, config_path, out_dir = "results";
  std::uint64_t seed = 0;
  std::size_t workers = 0;
  auto* run = app.add_subcommand("run", "run a command and write CSV results and manifest.json");
  run->add_option("command", command, "verify-gelfand | solve | value | dpp | estimates | calculus | approx-study | sandwich | all")
      ->required()
      ->check(CLI::IsMember(command_names()));
  run->add_option("--config", config_path, "config file (key = value) or a manifest.json to rerun");
  run->add_option("--out", out_dir, "output directory");
  auto* seed_opt = run->add_option("--seed", seed, "master seed override");
  auto* workers_opt = run->add_option("--workers", workers, "worker threads override")->check(CLI::PositiveNumber);

  std::string csv_in, csv_out, x_col;
  auto* plot = app.add_subcommand("plotdata", "convert a study CSV to long (x, y, series) format");
  plot->add_option("csv", csv_in, "study CSV")->required()->check(CLI::ExistingFile);
  plot->add_option("--out", csv_out, "output file (default: stdout)");
  plot->add_option("--x", x_col, "x column (default: 'x' or the first column)");

  auto* schema = app.add_subcommand("schema", "print the configuration schema");
  auto* show = app.add_subcommand("config", "print the effective configuration");
  show->add_option("--config", config_path, "config file");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*schema) {
      std::cout << schema_text();
      return 0;
    }
    if (*plot) {
      const Table t = plotdata(read_csv(csv_in), x_col);
      if (csv_out.empty()) std::cout << to_csv(t);
      else write_csv(csv_out, t);
      return 0;
    }
    RunConfig cfg = config_path.empty() ? RunConfig::defaults() : RunConfig::load(config_path);
    if (*show) {
      std::cout << cfg.dump();
      return 0;
    }
    if (*seed_opt) cfg.set("run.seed", std::to_string(seed));
    if (*workers_opt) cfg.set("run.workers", std::to_string(workers));
    const RunResult r = run_command(command, cfg, out_dir);
    print_result(r, out_dir);
    return r.passed() ? 0 : 1;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "%s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
}
