#include "doctest.h"

#include "pathhjb/experiment.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

using namespace pathhjb;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::filesystem::path scratch(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("pathhjb_test_" + name);
  std::filesystem::remove_all(p);
  return p;
}

// Small sizes so that `all` finishes in a few seconds.
RunConfig tiny() {
  return RunConfig::parse(R"(
basis.D = 8
gelfand.samples = 50
picard.problems = 3
picard.D = 8
estimates.draws = 6
value.probes = 4
[calculus]
D = 8
probes = 5
instances = delay
ito_D = 8
paths = 400
steps = 8, 16, 32
[approx]
E = 16
batches = 4
n_steps = 64
N_list = 2, 4
M_list = 1, 2
d_list = 1, 2, 8
k_list = 1, 2
proj_d_list = 1, 4, 8
N = 4
M = 2
[sandwich]
E = 8
probes = 2
n_steps = 48
)");
}

}  // namespace

TEST_CASE("config defaults, sections and typed access") {
  const RunConfig d = RunConfig::defaults();
  CHECK(d.uint("basis.D") == 64);
  CHECK(d.reals("control.U") == std::vector<double>{-1.0, 0.0, 1.0});
  CHECK_NOTHROW(d.validate());

  const RunConfig c = RunConfig::parse("# comment\n[approx]\nN = 16   # inline\nd_list = 1, 2 ,3\n\nrun.seed = 7\n");
  CHECK(c.uint("approx.N") == 16);
  CHECK(c.uints("approx.d_list") == std::vector<std::size_t>{1, 2, 3});
  CHECK(c.str("approx.d_list") == "1,2,3");
  CHECK(c.uint("run.seed") == 7);
  CHECK(c.uint("approx.M") == 3);
}

TEST_CASE("config errors name the field path") {
  auto msg = [](const std::string& text) {
    try {
      RunConfig::parse(text).validate();
    } catch (const ConfigError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  CHECK(msg("approx.N = abc").find("approx.N: expected uint") != std::string::npos);
  CHECK(msg("approx.bogus = 1").find("approx.bogus: unknown key") != std::string::npos);
  CHECK(msg("just text").find("expected key = value") != std::string::npos);
  CHECK(msg("approx.N = 3").find("approx.n_steps") != std::string::npos);
  CHECK(msg("approx.d = 65").find("approx.d:") != std::string::npos);
  CHECK(msg("instance.name = nope").find("instance.name: unknown instance") != std::string::npos);
  CHECK(msg("sandwich.levels = 2, 3").find("sandwich.levels") != std::string::npos);
  CHECK(msg("grid.T = -1").find("grid.T") != std::string::npos);
  // Several failures are reported together.
  const std::string both = msg("approx.d = 65\ngrid.T = -1");
  CHECK(both.find("approx.d") != std::string::npos);
  CHECK(both.find("grid.T") != std::string::npos);
}

TEST_CASE("shipped schema file matches the key table") {
  const std::string shipped = slurp(std::filesystem::path(PATHHJB_SOURCE_DIR) / "config" / "schema.cfg");
  CHECK(shipped == schema_text());
  // The schema file is itself a valid config reproducing the defaults.
  CHECK(RunConfig::parse(shipped).values() == RunConfig::defaults().values());
  const std::string defaults = slurp(std::filesystem::path(PATHHJB_SOURCE_DIR) / "config" / "defaults.cfg");
  CHECK(RunConfig::parse(defaults).values() == RunConfig::defaults().values());
}

TEST_CASE("number formatting round-trips") {
  for (double x : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.0, 1e-17, 0.7393481183564022}) {
    CHECK(std::strtod(fmt_real(x).c_str(), nullptr) == x);
  }
  CHECK(fmt_real(0.1) == "0.10000000000000001");
}

TEST_CASE("sha256 known vectors") {
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("csv round trip and malformed input") {
  Table t({"a", "b"});
  t.add({"x", fmt_real(0.1)});
  t.add({"y", fmt_real(-3.0)});
  const Table back = parse_csv(to_csv(t));
  CHECK(back.header == t.header);
  CHECK(back.rows == t.rows);
  CHECK_THROWS(parse_csv("a,b\n1,2,3\n"));
  CHECK_THROWS(parse_csv(""));
  CHECK_THROWS(t.add({"only one"}));
}

TEST_CASE("plotdata") {
  SUBCASE("empty study gives a header-only table") {
    const Table p = plotdata(Table({"x", "err"}));
    CHECK(p.header == std::vector<std::string>{"x", "y", "series"});
    CHECK(p.rows.empty());
    CHECK(to_csv(p) == "x,y,series\n");
  }
  SUBCASE("five rows per series over an M sweep, exact parse-back") {
    Table s({"sweep", "x", "f_agg", "beta_agg"});
    std::vector<double> f, b;
    for (int M = 1; M <= 5; ++M) {
      f.push_back(1.0 / (3.0 * M));
      b.push_back(std::exp(-0.7 * M));
      s.add({"M", fmt_real(M), fmt_real(f.back()), fmt_real(b.back())});
    }
    s.add({"N", "4", "0.5", "0.25"});
    const Table p = plotdata(s);
    std::map<std::string, std::vector<double>> ys;
    const Table back = parse_csv(to_csv(p));
    for (const auto& r : back.rows) ys[r[2]].push_back(std::strtod(r[1].c_str(), nullptr));
    CHECK(ys["M/f_agg"].size() == 5);
    CHECK(ys["M/beta_agg"].size() == 5);
    CHECK(ys["N/f_agg"].size() == 1);
    CHECK(ys["M/f_agg"] == f);
    CHECK(ys["M/beta_agg"] == b);
    CHECK(back.rows[0][0] == "1");
  }
  SUBCASE("x column selection") {
    Table s({"t", "v"});
    s.add({"0.5", "2"});
    const Table p = plotdata(s);
    CHECK(p.rows.size() == 1);
    CHECK(p.rows[0] == std::vector<std::string>{"0.5", "2", "v"});
    CHECK_THROWS(plotdata(s, "missing"));
  }
}

TEST_CASE("commands") {
  CHECK(command_suites("all").size() == 8);
  CHECK(command_suites("dpp") == std::vector<std::string>{"dpp"});
  CHECK_THROWS_AS(command_suites("nope"), ConfigError);
}

TEST_CASE("dpp with equal times has zero gaps") {
  const auto out = scratch("dpp");
  const RunResult r = run_command("dpp", tiny(), out);
  CHECK(r.passed());
  const Table t = read_csv(out / "dpp.csv");
  std::size_t diag = 0;
  for (const auto& row : t.rows) {
    if (row[0] == row[1]) {
      ++diag;
      CHECK(row[4] == "0");
    }
  }
  CHECK(diag == 4);
}

TEST_CASE("run all is deterministic across reruns and worker counts, and the manifest reproduces it") {
  RunConfig cfg = tiny();
  const auto a = scratch("a"), b = scratch("b"), c = scratch("c"), m = scratch("m");
  const RunResult ra = run_command("all", cfg, a);
  for (const auto& s : ra.suites) {
    INFO(s.suite);
    for (const auto& ch : s.checks) {
      INFO(ch.name << " " << ch.measured << " " << ch.relation << " " << ch.bound);
      CHECK(ch.passed);
    }
  }
  const RunResult rb = run_command("all", cfg, b);
  cfg.set("run.workers", "4");
  const RunResult rc = run_command("all", cfg, c);
  CHECK(ra.files.size() == 19);
  CHECK(ra.files == rb.files);
  CHECK(ra.files == rc.files);
  for (const auto& [name, hash] : ra.files) CHECK(sha256_hex(slurp(a / name)) == hash);

  // Manifest: sorted config echo that reruns to the same files.
  const RunConfig fromm = RunConfig::load(a / "manifest.json");
  CHECK(fromm.uint("basis.D") == 8);
  const RunResult rm = run_command("all", fromm, m);
  CHECK(rm.files == ra.files);
  const std::string man = slurp(a / "manifest.json");
  CHECK(man.find("\"artifact\"") < man.find("\"checks\""));
  CHECK(man.find("\"checks\"") < man.find("\"command\""));
}
