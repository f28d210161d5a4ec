#include "pathhjb/experiment.hpp"

#include "pathhjb/approx.hpp"
#include "pathhjb/calculus.hpp"
#include "pathhjb/dynamics.hpp"
#include "pathhjb/parallel.hpp"

#include <json.hpp>
#include <openssl/evp.h>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

namespace pathhjb {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

bool parse_double(const std::string& s, double& out) {
  const std::string t = trim(s);
  if (t.empty()) return false;
  const char* b = t.data();
  const char* e = b + t.size();
  auto r = std::from_chars(b, e, out);
  return r.ec == std::errc() && r.ptr == e;
}

bool parse_uint(const std::string& s, std::size_t& out) {
  const std::string t = trim(s);
  if (t.empty()) return false;
  const char* b = t.data();
  const char* e = b + t.size();
  auto r = std::from_chars(b, e, out);
  return r.ec == std::errc() && r.ptr == e;
}

const char* type_name(KeyType t) {
  switch (t) {
    case KeyType::Uint: return "uint";
    case KeyType::Real: return "real";
    case KeyType::String: return "string";
    case KeyType::Reals: return "real list";
    case KeyType::Uints: return "uint list";
    case KeyType::Strings: return "string list";
  }
  return "?";
}

const ConfigKey* find_key(const std::string& key) {
  for (const ConfigKey& k : config_schema())
    if (k.key == key) return &k;
  return nullptr;
}

// Empty string when the value fits the type.
std::string type_error(const ConfigKey& k, const std::string& value) {
  const std::string bad = k.key + ": expected " + type_name(k.type) + ", got '" + value + "'";
  double d;
  std::size_t u;
  switch (k.type) {
    case KeyType::Uint: return parse_uint(value, u) ? "" : bad;
    case KeyType::Real: return parse_double(value, d) && std::isfinite(d) ? "" : bad;
    case KeyType::String: return trim(value).empty() ? bad : "";
    case KeyType::Reals:
      for (const auto& p : split(value, ','))
        if (!parse_double(p, d) || !std::isfinite(d)) return bad;
      return "";
    case KeyType::Uints:
      for (const auto& p : split(value, ','))
        if (!parse_uint(p, u)) return bad;
      return "";
    case KeyType::Strings:
      for (const auto& p : split(value, ','))
        if (trim(p).empty()) return bad;
      return "";
  }
  return bad;
}

}  // namespace

const std::vector<ConfigKey>& config_schema() {
  static const std::vector<ConfigKey> keys = {
      {"run.seed", KeyType::Uint, "20260101", "master seed; sub-seeds are derived from (seed, suite tag, index)"},
      {"run.workers", KeyType::Uint, "1", "worker threads (results do not depend on it)"},
      {"basis.D", KeyType::Uint, "64", "number of retained eigenmodes"},
      {"instance.name", KeyType::String, "delay", "built-in instance for solve and value (deterministic)"},
      {"instance.L", KeyType::Real, "1", "declared bound and Lipschitz constant of the coefficients"},
      {"instance.m", KeyType::Uint, "1", "Wiener components of random instances"},
      {"grid.T", KeyType::Real, "1", "horizon"},
      {"grid.n_steps", KeyType::Uint, "48", "fine steps over [0, T] for solve and value"},
      {"control.U", KeyType::Reals, "-1,0,1", "control values"},
      {"control.N_c", KeyType::Uint, "3", "open-loop control intervals"},
      {"gelfand.samples", KeyType::Uint, "1000", "random vectors for the triple identities"},
      {"solve.x0", KeyType::Reals, "0.4,-0.3", "leading coefficients of the constant initial history"},
      {"solve.control", KeyType::Uint, "1", "control label used for the trajectory dump"},
      {"picard.problems", KeyType::Uint, "20", "random problems for the contraction check"},
      {"picard.window", KeyType::Real, "0.3", "Picard window T0"},
      {"picard.L", KeyType::Real, "1", "Lipschitz constant of the random problems"},
      {"picard.D", KeyType::Uint, "32", "modes of the random problems"},
      {"picard.n_steps", KeyType::Uint, "120", "fine steps of the random problems"},
      {"tree.depth", KeyType::Uint, "3", "scenario tree levels"},
      {"tree.m", KeyType::Uint, "1", "Wiener components on the tree"},
      {"tree.n_steps", KeyType::Uint, "24", "fine steps over [0, T] on the tree"},
      {"dpp.instance", KeyType::String, "example21", "instance for the dynamic programming checks"},
      {"dpp.D", KeyType::Uint, "16", "modes for the tree checks"},
      {"dpp.control_weight", KeyType::Real, "0.3", "weight of the noise-dependent running cost (0 disables)"},
      {"value.probes", KeyType::Uint, "50", "probe pairs for the bound and Lipschitz checks"},
      {"estimates.draws", KeyType::Uint, "100", "random (instance, history, control) draws"},
      {"estimates.n_steps", KeyType::Uint, "128", "fine steps for the estimate suite"},
      {"estimates.controls", KeyType::Uint, "5", "control processes for the independence check"},
      {"calculus.D", KeyType::Uint, "32", "modes for the probe checks"},
      {"calculus.probes", KeyType::Uint, "1000", "probes per (instance, functional)"},
      {"calculus.instances", KeyType::Strings, "steer-1,delay,example21", "instances for the probe checks"},
      {"calculus.ito_instance", KeyType::String, "example21", "instance for the residual study"},
      {"calculus.ito_D", KeyType::Uint, "64", "modes for the residual study"},
      {"calculus.functionals", KeyType::Strings, "quad-w1-z1,trig-w1-z1,w1-plus-z1", "functionals of the residual study"},
      {"calculus.paths", KeyType::Uint, "10000", "Wiener paths per step size"},
      {"calculus.steps", KeyType::Uints, "32,64,128,256,512", "fine steps over [0, T] (step sizes T / n)"},
      {"calculus.x0", KeyType::Reals, "0.4,-0.3", "leading coefficients of the initial state"},
      {"calculus.control", KeyType::Uint, "1", "constant control label"},
      {"approx.instance", KeyType::String, "delay", "instance for the convergence study"},
      {"approx.N", KeyType::Uint, "8", "time partition count"},
      {"approx.M", KeyType::Uint, "3", "dyadic path-sampling level"},
      {"approx.d", KeyType::Uint, "4", "projection dimension"},
      {"approx.k", KeyType::Real, "1", "path-class drift bound"},
      {"approx.E", KeyType::Uint, "256", "ensemble size"},
      {"approx.batches", KeyType::Uint, "8", "sub-ensembles for the 3 sigma bands"},
      {"approx.n_steps", KeyType::Uint, "512", "fine steps over [0, T]"},
      {"approx.x0", KeyType::Reals, "0.4,-0.3", "leading coefficients of the anchor state"},
      {"approx.N_list", KeyType::Uints, "4,8,16,32", "N sweep"},
      {"approx.M_list", KeyType::Uints, "1,2,3,4,5", "M sweep"},
      {"approx.d_list", KeyType::Uints, "1,2,4,8,16,32,64", "d sweep"},
      {"approx.k_list", KeyType::Reals, "1,2,4,8", "k sweep"},
      {"approx.proj_d_list", KeyType::Uints, "1,2,4,8,16,32,64", "projection table dimensions"},
      {"sandwich.instance", KeyType::String, "steer-1", "instance for the sandwich bounds"},
      {"sandwich.N", KeyType::Uint, "4", "time partition count"},
      {"sandwich.M", KeyType::Uint, "2", "dyadic path-sampling level"},
      {"sandwich.d", KeyType::Uint, "1", "projection dimension"},
      {"sandwich.k", KeyType::Real, "1", "path-class drift bound of probes and ensemble"},
      {"sandwich.E", KeyType::Uint, "256", "class ensemble size"},
      {"sandwich.depth", KeyType::Uint, "3", "tree levels"},
      {"sandwich.n_steps", KeyType::Uint, "96", "fine steps over [0, T]"},
      {"sandwich.probes", KeyType::Uint, "20", "probe points"},
      {"sandwich.levels", KeyType::Uints, "1,2", "lowest and highest probe level"},
      {"sandwich.deltas", KeyType::Reals, "0.2,0.1,0.05", "jump sizes, decreasing"},
      {"sandwich.x0", KeyType::Reals, "0.4,-0.3", "leading coefficients of the anchor state"},
  };
  return keys;
}

std::string schema_text() {
  std::ostringstream os;
  os << "# Configuration keys for pathhjb (flat key = value, dotted sections).\n"
     << "# A line \"[section]\" prefixes the undotted keys that follow it; dotted keys are absolute.\n"
     << "# Lists are comma separated.\n"
     << "# Format: key = default    # type: description\n";
  std::string section;
  for (const ConfigKey& k : config_schema()) {
    const std::string sec = k.key.substr(0, k.key.find('.'));
    if (sec != section) {
      os << "\n";
      section = sec;
    }
    os << k.key << " = " << k.def << "    # " << type_name(k.type) << ": " << k.doc << "\n";
  }
  return os.str();
}

RunConfig RunConfig::defaults() {
  RunConfig c;
  for (const ConfigKey& k : config_schema()) c.v_[k.key] = k.def;
  return c;
}

RunConfig RunConfig::parse(const std::string& text, const std::string& origin) {
  RunConfig c = defaults();
  std::istringstream is(text);
  std::string line, section;
  std::vector<std::string> errors;
  for (std::size_t ln = 1; std::getline(is, line); ++ln) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = origin + ":" + std::to_string(ln) + ": ";
    if (line.front() == '[') {
      if (line.back() != ']') {
        errors.push_back(where + "unterminated section header");
        continue;
      }
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      errors.push_back(where + "expected key = value");
      continue;
    }
    std::string key = trim(line.substr(0, eq));
    if (!section.empty() && key.find('.') == std::string::npos) key = section + "." + key;
    try {
      c.set(key, trim(line.substr(eq + 1)));
    } catch (const ConfigError& e) {
      errors.push_back(where + e.what());
    }
  }
  if (!errors.empty()) {
    std::string msg = "invalid configuration:";
    for (const auto& e : errors) msg += "\n  " + e;
    throw ConfigError(msg);
  }
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  if (path.extension() == ".json") {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(ss.str());
    } catch (const std::exception& e) {
      throw ConfigError(path.string() + ": " + e.what());
    }
    if (!j.contains("config") || !j["config"].is_object()) throw ConfigError(path.string() + ": no config echo");
    RunConfig c = defaults();
    for (auto it = j["config"].begin(); it != j["config"].end(); ++it) c.set(it.key(), it.value().get<std::string>());
    return c;
  }
  return parse(ss.str(), path.string());
}

void RunConfig::set(const std::string& key, const std::string& value) {
  const ConfigKey* k = find_key(key);
  if (!k) throw ConfigError(key + ": unknown key");
  std::string v = trim(value);
  if (k->type == KeyType::Reals || k->type == KeyType::Uints || k->type == KeyType::Strings) {
    std::string joined;
    for (const auto& p : split(v, ',')) joined += (joined.empty() ? "" : ",") + trim(p);
    v = joined;
  }
  const std::string err = type_error(*k, v);
  if (!err.empty()) throw ConfigError(err);
  v_[key] = v;
}

const std::string& RunConfig::str(const std::string& key) const {
  const auto it = v_.find(key);
  if (it == v_.end()) throw ConfigError(key + ": unknown key");
  return it->second;
}

double RunConfig::real(const std::string& key) const {
  double d = 0.0;
  parse_double(str(key), d);
  return d;
}

std::size_t RunConfig::uint(const std::string& key) const {
  std::size_t u = 0;
  parse_uint(str(key), u);
  return u;
}

std::vector<double> RunConfig::reals(const std::string& key) const {
  std::vector<double> out;
  for (const auto& p : split(str(key), ',')) {
    double d = 0.0;
    parse_double(p, d);
    out.push_back(d);
  }
  return out;
}

std::vector<std::size_t> RunConfig::uints(const std::string& key) const {
  std::vector<std::size_t> out;
  for (const auto& p : split(str(key), ',')) {
    std::size_t u = 0;
    parse_uint(p, u);
    out.push_back(u);
  }
  return out;
}

std::vector<std::string> RunConfig::strings(const std::string& key) const {
  std::vector<std::string> out;
  for (const auto& p : split(str(key), ',')) out.push_back(trim(p));
  return out;
}

std::string RunConfig::dump() const {
  std::string s;
  for (const auto& [k, v] : v_) s += k + " = " + v + "\n";
  return s;
}

void RunConfig::validate() const {
  std::vector<std::string> e;
  auto need = [&](bool ok, const std::string& key, const std::string& msg) {
    if (!ok) e.push_back(key + ": " + msg + " (value '" + str(key) + "')");
  };
  const auto names = builtin_names();
  auto is_instance = [&](const std::string& n) { return std::find(names.begin(), names.end(), n) != names.end(); };
  const std::size_t D = uint("basis.D");
  const double T = real("grid.T");

  need(uint("run.workers") >= 1, "run.workers", "must be at least 1");
  need(D >= 1 && D <= 512, "basis.D", "must lie in [1, 512]");
  need(T > 0.0, "grid.T", "must be positive");
  need(real("instance.L") > 0.0, "instance.L", "must be positive");
  need(uint("instance.m") >= 1 && uint("instance.m") <= 4, "instance.m", "must lie in [1, 4]");
  need(is_instance(str("instance.name")), "instance.name", "unknown instance");
  if (is_instance(str("instance.name"))) {
    need(str("instance.name") != "example21", "instance.name", "solve and value need a deterministic instance");
  }
  need(reals("control.U").size() >= 1 && reals("control.U").size() <= 3, "control.U", "needs 1 to 3 controls");
  need(uint("control.N_c") >= 1 && uint("grid.n_steps") % std::max<std::size_t>(1, uint("control.N_c")) == 0,
       "control.N_c", "must divide grid.n_steps");
  need(uint("tree.depth") >= 1 && uint("tree.depth") <= 3, "tree.depth", "must lie in [1, 3]");
  need(uint("grid.n_steps") % std::max<std::size_t>(1, uint("tree.depth")) == 0, "grid.n_steps",
       "must be a multiple of tree.depth");
  need(uint("tree.n_steps") % std::max<std::size_t>(1, uint("tree.depth")) == 0, "tree.n_steps",
       "must be a multiple of tree.depth");
  need(uint("tree.m") <= 2, "tree.m", "must be at most 2");
  need(reals("solve.x0").size() <= D, "solve.x0", "longer than basis.D");
  need(uint("solve.control") < reals("control.U").size(), "solve.control", "not a control label");
  need(real("picard.window") > 0.0 && real("picard.window") <= T, "picard.window", "must lie in (0, T]");
  need(real("picard.L") > 0.0, "picard.L", "must be positive");
  if (real("picard.window") > 0.0) {
    const double q = real("picard.window") / (T / static_cast<double>(std::max<std::size_t>(1, uint("picard.n_steps"))));
    need(std::abs(q - std::round(q)) < 1e-9, "picard.window", "must be a multiple of the grid step");
  }
  need(is_instance(str("dpp.instance")), "dpp.instance", "unknown instance");
  need(real("dpp.control_weight") >= 0.0, "dpp.control_weight", "must be nonnegative");
  need(uint("value.probes") >= 1, "value.probes", "must be positive");
  need(uint("estimates.draws") >= 1, "estimates.draws", "must be positive");
  need(uint("estimates.controls") >= 2, "estimates.controls", "needs at least 2 controls");
  for (const auto& n : strings("calculus.instances")) need(is_instance(n), "calculus.instances", "unknown instance " + n);
  need(is_instance(str("calculus.ito_instance")), "calculus.ito_instance", "unknown instance");
  const auto cat = catalog_names();
  for (const auto& n : strings("calculus.functionals")) {
    const std::string base = n.substr(0, n.find(':'));
    need(std::find(cat.begin(), cat.end(), base) != cat.end(), "calculus.functionals", "unknown functional " + n);
  }
  need(uints("calculus.steps").size() >= 2, "calculus.steps", "needs at least two step counts");
  need(uint("calculus.paths") >= 2, "calculus.paths", "needs at least two paths");
  need(uint("calculus.control") < reals("control.U").size(), "calculus.control", "not a control label");
  need(reals("calculus.x0").size() <= uint("calculus.ito_D"), "calculus.x0", "longer than calculus.ito_D");

  need(is_instance(str("approx.instance")), "approx.instance", "unknown instance");
  const std::size_t n = uint("approx.n_steps");
  auto cells_ok = [&](std::size_t N, std::size_t M) {
    if (N == 0) return false;
    const std::size_t cells = (M >= 63 || (std::size_t{1} << M) >= n) ? N : N << M;
    return n > 0 && n % cells == 0;
  };
  need(cells_ok(uint("approx.N"), uint("approx.M")), "approx.n_steps", "must be a multiple of N 2^M");
  for (std::size_t N : uints("approx.N_list"))
    need(cells_ok(N, uint("approx.M")), "approx.N_list", "n_steps not a multiple of N 2^M for N = " + std::to_string(N));
  for (std::size_t M : uints("approx.M_list"))
    need(cells_ok(uint("approx.N"), M), "approx.M_list", "n_steps not a multiple of N 2^M for M = " + std::to_string(M));
  auto d_ok = [&](std::size_t d) { return d >= 1 && d <= D; };
  need(d_ok(uint("approx.d")), "approx.d", "must lie in [1, basis.D]");
  for (std::size_t d : uints("approx.d_list")) need(d_ok(d), "approx.d_list", "entry outside [1, basis.D]");
  for (std::size_t d : uints("approx.proj_d_list")) need(d_ok(d), "approx.proj_d_list", "entry outside [1, basis.D]");
  for (double k : reals("approx.k_list")) need(k > 0.0, "approx.k_list", "entries must be positive");
  need(real("approx.k") >= 0.0, "approx.k", "must be nonnegative");
  need(uint("approx.batches") >= 2 && uint("approx.E") % std::max<std::size_t>(1, uint("approx.batches")) == 0,
       "approx.E", "must be a multiple of approx.batches (>= 2)");
  need(reals("approx.x0").size() <= D, "approx.x0", "longer than basis.D");

  need(is_instance(str("sandwich.instance")), "sandwich.instance", "unknown instance");
  if (is_instance(str("sandwich.instance"))) {
    need(str("sandwich.instance") != "example21", "sandwich.instance", "needs a deterministic instance");
  }
  const std::size_t sd = uint("sandwich.depth");
  const std::size_t sn = uint("sandwich.n_steps");
  need(sd >= 1 && sd <= 4, "sandwich.depth", "must lie in [1, 4]");
  need(sd > 0 && sn % sd == 0, "sandwich.n_steps", "must be a multiple of sandwich.depth");
  need(uint("sandwich.N") > 0 && sn % (uint("sandwich.N") << std::min<std::size_t>(uint("sandwich.M"), 20)) == 0,
       "sandwich.n_steps", "must be a multiple of N 2^M");
  need(uint("sandwich.d") >= 1 && uint("sandwich.d") <= std::min<std::size_t>(D, 3), "sandwich.d",
       "must lie in [1, min(3, basis.D)]");
  const auto lv = uints("sandwich.levels");
  need(lv.size() == 2 && lv[0] <= lv[1] && lv[1] < sd, "sandwich.levels", "needs lo,hi with lo <= hi < depth");
  need(uint("sandwich.E") >= 2 && uint("sandwich.E") % 2 == 0, "sandwich.E", "must be even");
  for (double d : reals("sandwich.deltas")) need(d >= 0.0, "sandwich.deltas", "entries must be nonnegative");
  need(reals("sandwich.x0").size() <= D, "sandwich.x0", "longer than basis.D");

  if (!e.empty()) {
    std::string msg = "configuration check failed:";
    for (const auto& s : e) msg += "\n  " + s;
    throw ConfigError(msg);
  }
}

void Table::add(std::vector<std::string> row) {
  if (row.size() != header.size()) throw std::invalid_argument("Table: row width does not match the header");
  rows.push_back(std::move(row));
}

std::string fmt_real(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string fmt_uint(std::size_t x) { return std::to_string(x); }

std::string to_csv(const Table& t) {
  std::string s;
  auto line = [&](const std::vector<std::string>& r) {
    for (std::size_t i = 0; i < r.size(); ++i) {
      if (r[i].find_first_of(",\n\"") != std::string::npos) throw std::invalid_argument("csv: cell needs quoting");
      s += (i ? "," : "") + r[i];
    }
    s += "\n";
  };
  line(t.header);
  for (const auto& r : t.rows) line(r);
  return s;
}

void write_csv(const std::filesystem::path& path, const Table& t) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << to_csv(t);
}

Table parse_csv(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  Table t;
  std::size_t ln = 0;
  while (std::getline(is, line)) {
    ++ln;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cells = split(line, ',');
    if (t.header.empty()) {
      t.header = std::move(cells);
      continue;
    }
    if (cells.size() != t.header.size()) {
      throw std::runtime_error("csv line " + std::to_string(ln) + ": expected " + std::to_string(t.header.size()) +
                               " fields, got " + std::to_string(cells.size()));
    }
    t.rows.push_back(std::move(cells));
  }
  if (t.header.empty()) throw std::runtime_error("csv: missing header");
  return t;
}

Table read_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_csv(ss.str());
}

Table plotdata(const Table& study, const std::string& x_col) {
  const auto& h = study.header;
  std::size_t xi = 0;
  const std::string want = !x_col.empty() ? x_col : (std::find(h.begin(), h.end(), "x") != h.end() ? "x" : "");
  if (!want.empty()) {
    const auto it = std::find(h.begin(), h.end(), want);
    if (it == h.end()) throw std::runtime_error("plotdata: no column '" + want + "'");
    xi = static_cast<std::size_t>(it - h.begin());
  }
  std::vector<bool> numeric(h.size(), true);
  for (const auto& r : study.rows)
    for (std::size_t c = 0; c < h.size(); ++c) {
      double d;
      if (!parse_double(r[c], d)) numeric[c] = false;
    }
  Table out({"x", "y", "series"});
  for (const auto& r : study.rows) {
    std::string group;
    for (std::size_t c = 0; c < h.size(); ++c)
      if (c != xi && !numeric[c]) group += (group.empty() ? "" : "/") + r[c];
    for (std::size_t c = 0; c < h.size(); ++c) {
      if (c == xi || !numeric[c]) continue;
      out.add({r[xi], r[c], group.empty() ? h[c] : group + "/" + h[c]});
    }
  }
  return out;
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("sha256 failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string s;
  for (unsigned int i = 0; i < len; ++i) {
    s.push_back(hex[md[i] >> 4]);
    s.push_back(hex[md[i] & 15]);
  }
  return s;
}

std::string artifact_version() { return "1.0.0"; }

bool SuiteOutput::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed; });
}

bool RunResult::passed() const {
  return std::all_of(suites.begin(), suites.end(), [](const SuiteOutput& s) { return s.passed(); });
}

std::vector<std::string> command_names() {
  return {"verify-gelfand", "solve", "value", "dpp", "estimates", "calculus", "approx-study", "sandwich", "all"};
}

std::vector<std::string> command_suites(const std::string& command) {
  const auto names = command_names();
  if (command == "all") return {names.begin(), names.end() - 1};
  if (std::find(names.begin(), names.end(), command) == names.end()) {
    throw ConfigError("unknown command '" + command + "'");
  }
  return {command};
}

namespace {

void check(SuiteOutput& o, const std::string& name, double measured, const std::string& rel, double bound) {
  bool ok = false;
  if (rel == "<=") ok = measured <= bound;
  else if (rel == "<") ok = measured < bound;
  else if (rel == ">=") ok = measured >= bound;
  else if (rel == "==") ok = measured == bound;
  o.checks.push_back({o.suite, name, measured, bound, rel, ok});
}

HVector leading(std::size_t D, const std::vector<double>& v) {
  HVector h(D);
  for (std::size_t i = 0; i < v.size() && i < D; ++i) h[i] = v[i];
  return h;
}

ProblemInstance instance(const RunConfig& cfg, const std::string& name, std::size_t D, std::size_t n_steps) {
  InstanceOptions o;
  o.D = D;
  o.T = cfg.real("grid.T");
  o.n_steps = n_steps;
  o.m = cfg.uint("instance.m");
  o.L = cfg.real("instance.L");
  ProblemInstance p = builtin_instance(name, o);
  p.U = ControlSet::from_values(cfg.reals("control.U"));
  p.validate();
  return p;
}

std::uint64_t suite_seed(const RunConfig& cfg, const std::string& tag) { return derive_seed(cfg.uint("run.seed"), tag, 0); }

SuiteOutput suite_gelfand(const RunConfig& cfg) {
  SuiteOutput o{"verify-gelfand", {}, {}, 0.0};
  const auto r = verify_gelfand(SpectralBasis(cfg.uint("basis.D")), cfg.uint("gelfand.samples"),
                                suite_seed(cfg, "gelfand"));
  check(o, "coercivity", r.max_coercivity_residual, "<=", 1e-12);
  check(o, "boundedness", r.max_boundedness_violation, "<=", 1e-12);
  check(o, "embedding", r.max_embedding_violation, "<=", 1e-12);
  Table t({"quantity", "measured", "bound"});
  t.add({"samples", fmt_uint(r.n_samples), fmt_uint(cfg.uint("gelfand.samples"))});
  t.add({"coercivity_residual", fmt_real(r.max_coercivity_residual), fmt_real(1e-12)});
  t.add({"boundedness_violation", fmt_real(r.max_boundedness_violation), fmt_real(1e-12)});
  t.add({"embedding_violation", fmt_real(r.max_embedding_violation), fmt_real(1e-12)});
  t.add({"boundedness_ratio", fmt_real(r.max_boundedness_ratio), fmt_real(1.0)});
  o.tables["gelfand.csv"] = t;
  return o;
}

SuiteOutput suite_solve(const RunConfig& cfg) {
  SuiteOutput o{"solve", {}, {}, 0.0};
  const std::size_t workers = cfg.uint("run.workers");
  const std::uint64_t seed = suite_seed(cfg, "solve");

  const ProblemInstance inst = instance(cfg, cfg.str("instance.name"), cfg.uint("basis.D"), cfg.uint("grid.n_steps"));
  const Path xi = Path::constant(TimeGrid::with_step(0.0, inst.dt(), 0), leading(inst.D, cfg.reals("solve.x0")));
  const StateSolution s =
      solve_state(inst, xi, ControlSchedule::constant(cfg.uint("solve.control"), 0.0, inst.T), inst.make_noise(seed));
  Table tp({"t", "norm_H", "norm_V", "x1", "x2"});
  const PathView v = s.path.view();
  for (std::size_t k = 0; k <= v.last_index(); ++k) {
    const HVector& h = v.node(k);
    tp.add({fmt_real(s.path.grid().node(k)), fmt_real(norm(h, Space::H)), fmt_real(norm(h, Space::V)), fmt_real(h[0]),
            fmt_real(inst.D > 1 ? h[1] : 0.0)});
  }
  o.tables["solve_path.csv"] = tp;

  // Picard contraction on random problems.
  const double L = cfg.real("picard.L");
  const double T0 = cfg.real("picard.window");
  const GelfandConstants gc = laplacian_constants();
  const double bound = std::sqrt(picard_factor(L, gc, T0));
  struct Res {
    double ratio, dist, tol;
    std::size_t iters, windows;
  };
  const auto res = parallel_map(cfg.uint("picard.problems"), workers, [&](std::size_t i) {
    Rng rng = make_rng(seed, "picard", i);
    InstanceOptions op;
    op.D = cfg.uint("picard.D");
    op.T = cfg.real("grid.T");
    op.n_steps = cfg.uint("picard.n_steps");
    op.L = L;
    const ProblemInstance p = random_instance(rng, op);
    const double scale = std::pow(10.0, std::uniform_real_distribution<double>(-1.0, 0.5)(rng));
    const Path x0 = random_probe_path(p, 0, scale, rng);
    const ControlSchedule th = random_schedule(p.U.size(), 4, 0.0, p.T, rng);
    const NoiseState w = p.make_noise(derive_seed(seed, "picard-noise", i));
    SolverConfig sc;
    sc.window = T0;
    const StateSolution a = picard_solve(p, x0, th, w, gc, sc);
    const StateSolution b = solve_state(p, x0, th, w);
    return Res{a.picard.max_ratio(), sup_distance(a.path.view(), b.path.view(), Space::H), sc.picard_tol,
               a.picard.iterations, a.picard.windows};
  });
  Table t({"problem", "max_ratio", "ratio_bound", "distance_to_direct", "distance_bound", "iterations", "windows"});
  double max_ratio = 0.0, max_excess = -1e300;
  for (std::size_t i = 0; i < res.size(); ++i) {
    t.add({fmt_uint(i), fmt_real(res[i].ratio), fmt_real(bound), fmt_real(res[i].dist), fmt_real(10.0 * res[i].tol),
           fmt_uint(res[i].iters), fmt_uint(res[i].windows)});
    max_ratio = std::max(max_ratio, res[i].ratio);
    max_excess = std::max(max_excess, res[i].dist / (10.0 * res[i].tol));
  }
  o.tables["picard.csv"] = t;
  check(o, "picard_ratio", max_ratio, "<=", bound);
  check(o, "picard_vs_direct_over_10tol", max_excess, "<=", 1.0);
  return o;
}

SuiteOutput suite_value(const RunConfig& cfg) {
  SuiteOutput o{"value", {}, {}, 0.0};
  const std::size_t workers = cfg.uint("run.workers");
  const std::uint64_t seed = suite_seed(cfg, "value");
  const ProblemInstance inst = instance(cfg, cfg.str("instance.name"), cfg.uint("basis.D"), cfg.uint("grid.n_steps"));
  const Path xi = Path::constant(TimeGrid::with_step(0.0, inst.dt(), 0), leading(inst.D, cfg.reals("solve.x0")));

  // Deterministic: the tree with N_c levels equals open-loop enumeration on N_c intervals.
  TreeConfig tc;
  tc.depth = cfg.uint("control.N_c");
  tc.m = 0;
  tc.n_steps = inst.n_steps;
  const double vt = value_adapted_tree(inst, tc, xi, 0).value;
  const OpenLoopResult ol = value_open_loop(inst, xi, cfg.uint("control.N_c"), workers);
  Table tv({"method", "value"});
  tv.add({"adapted-tree", fmt_real(vt)});
  tv.add({"open-loop", fmt_real(ol.value.value)});
  o.tables["values.csv"] = tv;
  check(o, "tree_vs_open_loop", std::abs(vt - ol.value.value), "<=", 1e-12);

  const RegularityReport r = check_value_regularity(inst, cfg.uint("value.probes"), cfg.uint("tree.depth"), seed, workers);
  Table tr({"quantity", "measured", "bound"});
  tr.add({"max_abs_value", fmt_real(r.max_abs_value), fmt_real(r.bound)});
  tr.add({"bound_violations", fmt_uint(r.bound_violations), "0"});
  tr.add({"lipschitz_ratio", fmt_real(r.max_lipschitz_ratio), fmt_real(r.candidate_LV)});
  tr.add({"pairs", fmt_uint(r.pairs), fmt_uint(cfg.uint("value.probes"))});
  o.tables["regularity.csv"] = tr;
  check(o, "value_bound_violations", static_cast<double>(r.bound_violations), "==", 0.0);
  check(o, "max_abs_value", r.max_abs_value, "<=", r.bound);
  check(o, "lipschitz_ratio", r.max_lipschitz_ratio, "<=", r.candidate_LV);

  // Supermartingale property along the optimal and a fixed policy on the random tree instance.
  ProblemInstance e = instance(cfg, cfg.str("dpp.instance"), cfg.uint("dpp.D"), cfg.uint("tree.n_steps"));
  if (cfg.real("dpp.control_weight") > 0.0) {
    e.coeffs.f_control = ControlCost::Noise;
    e.coeffs.f_control_weight = cfg.real("dpp.control_weight");
  }
  TreeConfig te;
  te.depth = cfg.uint("tree.depth");
  te.m = e.is_random() ? cfg.uint("tree.m") : 0;
  te.n_steps = e.n_steps;
  const Path xe = Path::constant(TimeGrid::with_step(0.0, e.dt(), 0), leading(e.D, cfg.reals("solve.x0")));
  std::vector<std::size_t> pol;
  value_adapted_tree(e, te, xe, 0, &pol);
  TreeSolver ts(e, te, xe, 0);
  const auto opt = ts.supermartingale(pol);
  std::vector<std::size_t> fixed(pol.size(), 0);
  const auto sub = ts.supermartingale(fixed);
  Table tm({"policy", "nodes", "max_violation", "max_drift", "min_drift"});
  tm.add({"optimal", fmt_uint(opt.nodes), fmt_real(opt.max_violation), fmt_real(opt.max_drift), fmt_real(opt.min_drift)});
  tm.add({"constant-0", fmt_uint(sub.nodes), fmt_real(sub.max_violation), fmt_real(sub.max_drift),
          fmt_real(sub.min_drift)});
  o.tables["supermartingale.csv"] = tm;
  check(o, "supermartingale_violation_optimal", opt.max_violation, "<=", 1e-12);
  check(o, "supermartingale_violation_fixed", sub.max_violation, "<=", 1e-12);
  check(o, "martingale_drift_optimal", std::max(std::abs(opt.max_drift), std::abs(opt.min_drift)), "<=", 1e-12);
  return o;
}

SuiteOutput suite_dpp(const RunConfig& cfg) {
  SuiteOutput o{"dpp", {}, {}, 0.0};
  const std::uint64_t seed = suite_seed(cfg, "dpp");
  ProblemInstance e = instance(cfg, cfg.str("dpp.instance"), cfg.uint("dpp.D"), cfg.uint("tree.n_steps"));
  if (cfg.real("dpp.control_weight") > 0.0) {
    e.coeffs.f_control = ControlCost::Noise;
    e.coeffs.f_control_weight = cfg.real("dpp.control_weight");
  }
  TreeConfig tc;
  tc.depth = cfg.uint("tree.depth");
  tc.m = e.is_random() ? cfg.uint("tree.m") : 0;
  tc.n_steps = e.n_steps;
  const std::size_t sub = tc.n_steps / tc.depth;
  Table t({"t_level", "that_level", "t", "that", "gap"});
  double worst = 0.0;
  for (std::size_t a = 0; a <= tc.depth; ++a) {
    Rng rng = make_rng(seed, "dpp-history", a);
    const Path xa = random_probe_path(e, a * sub, 0.5, rng);
    for (std::size_t b = a; b <= tc.depth; ++b) {
      const double gap = check_dpp(e, tc, xa, a, b);
      worst = std::max(worst, gap);
      t.add({fmt_uint(a), fmt_uint(b), fmt_real(e.dt() * static_cast<double>(a * sub)),
             fmt_real(e.dt() * static_cast<double>(b * sub)), fmt_real(gap)});
    }
  }
  o.tables["dpp.csv"] = t;
  check(o, "dpp_gap", worst, "<=", 1e-12);

  // Brute-force enumeration of adapted strategies on trees with at most 3 internal nodes.
  Table tb({"depth", "m", "adapted", "brute_force", "difference"});
  double worst_b = 0.0;
  for (std::size_t depth = 1; depth <= 2; ++depth) {
    TreeConfig c2 = tc;
    c2.depth = depth;
    if (c2.n_steps % depth != 0) continue;
    const TreeShape shape(depth, std::size_t{1} << (c2.m + c2.b_dims), c2.node_budget);
    if (shape.internal_nodes() > 3) continue;
    Rng rng = make_rng(seed, "dpp-brute", depth);
    const Path x0 = random_probe_path(e, 0, 0.5, rng);
    const double va = value_adapted_tree(e, c2, x0, 0).value;
    const double vb = brute_force_tree(e, c2, x0, 0, 3);
    worst_b = std::max(worst_b, std::abs(va - vb));
    tb.add({fmt_uint(depth), fmt_uint(c2.m), fmt_real(va), fmt_real(vb), fmt_real(std::abs(va - vb))});
  }
  o.tables["dpp_brute_force.csv"] = tb;
  check(o, "adapted_vs_brute_force", worst_b, "<=", 1e-12);
  check(o, "brute_force_cases", static_cast<double>(tb.rows.size()), ">=", 1.0);
  return o;
}

SuiteOutput suite_estimates(const RunConfig& cfg) {
  SuiteOutput o{"estimates", {}, {}, 0.0};
  EstimateSuiteConfig ec;
  ec.draws = cfg.uint("estimates.draws");
  ec.D = cfg.uint("basis.D");
  ec.T = cfg.real("grid.T");
  ec.n_steps = cfg.uint("estimates.n_steps");
  ec.L = cfg.real("instance.L");
  ec.vi_controls = cfg.uint("estimates.controls");
  const EstimateReport r = estimate_suite(ec, suite_seed(cfg, "estimates"), cfg.uint("run.workers"));
  Table t({"estimate", "constant", "checks", "violations", "max_ratio"});
  auto row = [&](const char* name, double K, const EstimateCheck& c) {
    t.add({name, fmt_real(K), fmt_uint(c.n), fmt_uint(c.violations), fmt_real(c.max_ratio)});
    check(o, std::string(name) + "_violations", static_cast<double>(c.violations), "==", 0.0);
    check(o, std::string(name) + "_checks", static_cast<double>(c.n), ">=", static_cast<double>(ec.draws));
  };
  row("ii", r.constants.K2_ii, r.ii);
  row("iii", r.constants.Kbar_iii, r.iii);
  row("iv", r.constants.K_iv, r.iv);
  row("v", r.constants.Ktilde_v, r.v);
  t.add({"vi_spread", fmt_real(0.01), fmt_uint(r.vi_controls), "0", fmt_real(r.vi_spread)});
  o.tables["estimates.csv"] = t;
  check(o, "vi_spread", r.vi_spread, "<", 0.01);
  return o;
}

SuiteOutput suite_calculus(const RunConfig& cfg) {
  SuiteOutput o{"calculus", {}, {}, 0.0};
  const std::uint64_t seed = suite_seed(cfg, "calculus");
  const std::size_t workers = cfg.uint("run.workers");

  Table tp({"instance", "functional", "probes", "gateaux_rel", "grad_norm", "rho", "holder_ratio", "remark_ratio",
            "consistency"});
  double g = 0.0, grad_excess = -1e300, hold = 0.0, rem = 0.0, cons = 0.0;
  std::size_t idx = 0;
  for (const auto& iname : cfg.strings("calculus.instances")) {
    const ProblemInstance inst = instance(cfg, iname, cfg.uint("calculus.D"), cfg.uint("grid.n_steps"));
    for (const auto& fname : catalog_names()) {
      const auto u = catalog_functional(fname, inst.D, inst.T, inst.m);
      const auto r = probe_functional(u, inst, cfg.uint("calculus.probes"), derive_seed(seed, "probe", idx++));
      tp.add({iname, fname, fmt_uint(r.probes), fmt_real(r.max_gateaux_rel), fmt_real(r.max_grad_norm), fmt_real(r.rho),
              fmt_real(r.max_holder_ratio), fmt_real(r.max_remark_ratio), fmt_real(r.max_consistency)});
      g = std::max(g, r.max_gateaux_rel);
      grad_excess = std::max(grad_excess, r.max_grad_norm - r.rho);
      hold = std::max(hold, r.max_holder_ratio);
      rem = std::max(rem, r.max_remark_ratio);
      cons = std::max(cons, r.max_consistency);
    }
  }
  o.tables["calculus_probes.csv"] = tp;
  check(o, "gateaux_rel", g, "<=", 1e-5);
  check(o, "grad_norm_minus_rho", grad_excess, "<=", 0.0);
  check(o, "holder_ratio", hold, "<=", 1.0);
  check(o, "hamiltonian_bound_ratio", rem, "<=", 1.0);
  check(o, "generator_consistency", cons, "<=", 1e-12);

  // Residual study.
  ProblemInstance p = instance(cfg, cfg.str("calculus.ito_instance"), cfg.uint("calculus.ito_D"), 32);
  std::vector<CylindricalFunctional> us;
  for (const auto& n : cfg.strings("calculus.functionals")) us.push_back(catalog_functional(n, p.D, p.T, p.m));
  const HVector x0 = leading(p.D, cfg.reals("calculus.x0"));
  const ControlSchedule th = ControlSchedule::constant(cfg.uint("calculus.control"), 0.0, p.T);
  Table ti({"functional", "x", "n_steps", "paths", "mean_abs", "stderr_abs", "mart_mean", "mart_stderr"});
  std::vector<double> dts;
  std::vector<std::vector<double>> res(us.size());
  std::vector<double> worst_z(us.size(), 0.0);
  for (std::size_t n : cfg.uints("calculus.steps")) {
    p.n_steps = n;
    const auto st = ito_kunita_residuals(us, p, th, 0.0, p.T, x0, cfg.uint("calculus.paths"), derive_seed(seed, "ito", n),
                                         workers);
    dts.push_back(p.dt());
    for (std::size_t q = 0; q < us.size(); ++q) {
      ti.add({st[q].functional, fmt_real(st[q].dt), fmt_uint(n), fmt_uint(st[q].n), fmt_real(st[q].mean_abs),
              fmt_real(st[q].stderr_abs), fmt_real(st[q].mart_mean), fmt_real(st[q].mart_stderr)});
      res[q].push_back(st[q].mean_abs);
      const double z = st[q].mart_stderr > 0.0 ? std::abs(st[q].mart_mean) / st[q].mart_stderr
                                               : (st[q].mart_mean == 0.0 ? 0.0 : 1e300);
      worst_z[q] = std::max(worst_z[q], z);
    }
  }
  o.tables["ito.csv"] = ti;
  o.tables["ito_long.csv"] = plotdata(ti, "x");
  Table ts({"functional", "slope", "max_mart_z"});
  for (std::size_t q = 0; q < us.size(); ++q) {
    const double slope = loglog_slope(dts, res[q]);
    ts.add({us[q].name(), fmt_real(slope), fmt_real(worst_z[q])});
    check(o, us[q].name() + "_slope_lo", slope, ">=", 0.8);
    check(o, us[q].name() + "_slope_hi", slope, "<=", 1.2);
    check(o, us[q].name() + "_martingale_z", worst_z[q], "<=", 3.0);
  }
  o.tables["ito_slopes.csv"] = ts;
  return o;
}

SuiteOutput suite_approx(const RunConfig& cfg) {
  SuiteOutput o{"approx-study", {}, {}, 0.0};
  const std::uint64_t seed = suite_seed(cfg, "approx");
  const std::size_t D = cfg.uint("basis.D");
  const ProblemInstance inst = instance(cfg, cfg.str("approx.instance"), D, cfg.uint("approx.n_steps"));
  ApproxStudyConfig sc;
  sc.base.N = cfg.uint("approx.N");
  sc.base.M = static_cast<unsigned>(cfg.uint("approx.M"));
  sc.base.d = cfg.uint("approx.d");
  sc.base.k = cfg.real("approx.k");
  sc.base.E = cfg.uint("approx.E");
  sc.base.batches = cfg.uint("approx.batches");
  sc.base.n_steps = cfg.uint("approx.n_steps");
  sc.base.x0 = leading(D, cfg.reals("approx.x0"));
  sc.N_list = cfg.uints("approx.N_list");
  sc.M_list.clear();
  for (std::size_t M : cfg.uints("approx.M_list")) sc.M_list.push_back(static_cast<unsigned>(M));
  sc.d_list = cfg.uints("approx.d_list");
  sc.k_list = cfg.reals("approx.k_list");
  sc.proj_d_list = cfg.uints("approx.proj_d_list");
  const ApproxStudy st = approx_study(inst, sc, seed, cfg.uint("run.workers"));

  Table t({"sweep", "x", "N", "M", "d", "k", "f_agg", "beta_agg", "G_agg", "f_sigma", "beta_sigma", "G_sigma",
           "freeze_gap", "freeze_bound", "budget_ratio"});
  for (const auto& r : st.rows) {
    double x = r.k;
    if (r.sweep == "N") x = static_cast<double>(r.N);
    if (r.sweep == "M") x = r.M;
    if (r.sweep == "d") x = static_cast<double>(r.d);
    const auto& e = r.report;
    t.add({r.sweep, fmt_real(x), fmt_uint(r.N), fmt_uint(r.M), fmt_uint(r.d), fmt_real(r.k), fmt_real(e.f_agg),
           fmt_real(e.beta_agg), fmt_real(e.G_agg), fmt_real(e.f_sigma), fmt_real(e.beta_sigma), fmt_real(e.G_sigma),
           fmt_real(e.freeze_gap), fmt_real(e.freeze_bound), fmt_real(e.budget_ratio)});
  }
  o.tables["approx_errors.csv"] = t;
  o.tables["approx_errors_long.csv"] = plotdata(t, "x");

  Table tp({"d", "ensemble_sup", "witness", "witness_bound"});
  for (const auto& r : st.projection)
    tp.add({fmt_uint(r.d), fmt_real(r.ensemble_sup), fmt_real(r.witness), fmt_real(r.witness_bound)});
  o.tables["approx_projection.csv"] = tp;

  check(o, "freeze_violations", static_cast<double>(st.freeze_violations), "==", 0.0);
  check(o, "monotone_N", st.monotone_N ? 1.0 : 0.0, "==", 1.0);
  check(o, "monotone_M", st.monotone_M ? 1.0 : 0.0, "==", 1.0);
  check(o, "monotone_d", st.monotone_d ? 1.0 : 0.0, "==", 1.0);
  check(o, "projection_strictly_decreasing", st.projection_strict ? 1.0 : 0.0, "==", 1.0);
  check(o, "k_slope", st.k_slope, "<=", 1.1);
  for (const auto& r : st.projection) {
    if (r.d != 4 || D < 8) continue;
    double tail = 0.0;
    for (int i = 5; i <= 8; ++i) tail += 1.0 / (i * i * (1.0 + std::numbers::pi * std::numbers::pi * i * i));
    check(o, "witness_d4_vs_tail_sum", std::abs(r.witness - std::sqrt(tail)), "<=", 1e-6);
  }
  return o;
}

SuiteOutput suite_sandwich(const RunConfig& cfg) {
  SuiteOutput o{"sandwich", {}, {}, 0.0};
  const std::size_t D = cfg.uint("basis.D");
  const ProblemInstance inst = instance(cfg, cfg.str("sandwich.instance"), D, cfg.uint("sandwich.n_steps"));
  SandwichConfig sc;
  sc.approx.N = cfg.uint("sandwich.N");
  sc.approx.M = static_cast<unsigned>(cfg.uint("sandwich.M"));
  sc.approx.d = cfg.uint("sandwich.d");
  sc.approx.k = cfg.real("sandwich.k");
  sc.approx.E = cfg.uint("sandwich.E");
  sc.approx.batches = 2;
  sc.approx.n_steps = cfg.uint("sandwich.n_steps");
  sc.approx.x0 = leading(D, cfg.reals("sandwich.x0"));
  sc.depth = cfg.uint("sandwich.depth");
  sc.deltas = cfg.reals("sandwich.deltas");
  sc.n_probes = cfg.uint("sandwich.probes");
  const auto lv = cfg.uints("sandwich.levels");
  sc.probe_level_min = lv[0];
  sc.probe_level_max = lv[1];
  const SandwichReport r = sandwich_check(inst, sc, suite_seed(cfg, "sandwich"), cfg.uint("run.workers"));

  Table t({"delta", "probe", "t", "V", "V_eps", "Y", "y", "lower", "upper", "gap", "ordered"});
  for (const auto& w : r.rows)
    t.add({fmt_real(w.delta), fmt_uint(w.probe), fmt_real(w.t), fmt_real(w.V), fmt_real(w.V_eps), fmt_real(w.Y),
           fmt_real(w.y), fmt_real(w.lower), fmt_real(w.upper), fmt_real(w.gap), w.ordered ? "1" : "0"});
  o.tables["sandwich.csv"] = t;
  Table ts({"x", "mean_gap", "L_tilde"});
  for (std::size_t j = 0; j < sc.deltas.size(); ++j)
    ts.add({fmt_real(sc.deltas[j]), fmt_real(r.mean_gap[j]), fmt_real(r.L_tilde_by_delta[j])});
  o.tables["sandwich_gap.csv"] = ts;
  Table tc({"quantity", "value"});
  tc.add({"L_c", fmt_real(r.L_c)});
  tc.add({"L_tilde", fmt_real(r.L_tilde)});
  tc.add({"C1", fmt_real(r.C1)});
  tc.add({"C2", fmt_real(r.C2)});
  tc.add({"grad_spread", fmt_real(r.grad_spread)});
  tc.add({"error_f_l2", fmt_real(r.errors.f_l2())});
  tc.add({"error_beta_l2", fmt_real(r.errors.beta_l2())});
  tc.add({"error_G", fmt_real(r.errors.G)});
  tc.add({"required_inflation", fmt_real(r.required_inflation)});
  tc.add({"degenerate_gap", fmt_real(r.degenerate_gap)});
  tc.add({"degenerate_error", fmt_real(r.degenerate_error)});
  o.tables["sandwich_constants.csv"] = tc;

  check(o, "ordering_violations", static_cast<double>(r.violations), "==", 0.0);
  check(o, "probes", static_cast<double>(r.rows.size()), "==", static_cast<double>(sc.n_probes * sc.deltas.size()));
  check(o, "gap_nonincreasing", r.gap_nonincreasing ? 1.0 : 0.0, "==", 1.0);
  check(o, "degenerate_gap", r.degenerate_gap, "<=", 1e-12);
  check(o, "degenerate_value_error", r.degenerate_error, "<=", 1e-12);
  return o;
}

}  // namespace

SuiteOutput run_suite(const std::string& suite, const RunConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  SuiteOutput o;
  if (suite == "verify-gelfand") o = suite_gelfand(cfg);
  else if (suite == "solve") o = suite_solve(cfg);
  else if (suite == "value") o = suite_value(cfg);
  else if (suite == "dpp") o = suite_dpp(cfg);
  else if (suite == "estimates") o = suite_estimates(cfg);
  else if (suite == "calculus") o = suite_calculus(cfg);
  else if (suite == "approx-study") o = suite_approx(cfg);
  else if (suite == "sandwich") o = suite_sandwich(cfg);
  else throw ConfigError("unknown suite '" + suite + "'");
  o.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return o;
}

RunResult run_command(const std::string& command, const RunConfig& cfg, const std::filesystem::path& out) {
  const auto suites = command_suites(command);
  cfg.validate();
  std::filesystem::create_directories(out);
  RunResult rr;
  rr.command = command;
  std::set<std::string> written;
  for (const auto& s : suites) {
    rr.suites.push_back(run_suite(s, cfg));
    for (const auto& [name, table] : rr.suites.back().tables) {
      if (!written.insert(name).second) throw std::logic_error("duplicate output file " + name);
      const std::string text = to_csv(table);
      std::ofstream f(out / name, std::ios::binary);
      if (!f) throw std::runtime_error("cannot write " + (out / name).string());
      f << text;
      rr.files[name] = sha256_hex(text);
    }
  }

  nlohmann::json j;
  j["artifact"] = "pathhjb";
  j["version"] = artifact_version();
  j["command"] = command;
  j["config"] = cfg.values();
  j["files"] = rr.files;
  j["passed"] = rr.passed();
  nlohmann::json checks = nlohmann::json::array();
  nlohmann::json secs = nlohmann::json::object();
  for (const auto& s : rr.suites) {
    secs[s.suite] = s.seconds;
    for (const auto& c : s.checks) {
      checks.push_back({{"suite", c.suite},
                        {"name", c.name},
                        {"measured", c.measured},
                        {"relation", c.relation},
                        {"bound", c.bound},
                        {"passed", c.passed}});
    }
  }
  j["checks"] = checks;
  j["wall_clock_seconds"] = secs;
  std::ofstream mf(out / "manifest.json", std::ios::binary);
  mf << j.dump(2) << "\n";
  return rr;
}

}  // namespace pathhjb
