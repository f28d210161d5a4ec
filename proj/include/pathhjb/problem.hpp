#pragma once

// Problem data: controls, Wiener noise (sampled and on scenario trees),
// catalog coefficients (beta, f, G) and the built-in instances.

#include "pathhjb/path.hpp"
#include "pathhjb/seeding.hpp"
#include "pathhjb/spectral.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace pathhjb {

struct ControlSet {
  std::vector<double> values;
  std::vector<std::string> labels;

  std::size_t size() const { return values.size(); }
  double operator[](std::size_t k) const { return values[k]; }
  double max_abs() const;

  static ControlSet from_values(std::vector<double> v);
};

/// {-1, 0, +1}.
ControlSet default_controls();

/// Noise history on a uniform grid: W per node and component, plus the optional
/// Ornstein-Uhlenbeck shift used by the shifted instance. Lookups are càdlàg.
struct NoiseState {
  double t0 = 0.0;
  double dt = 1.0;
  std::size_t m = 1;
  std::size_t nodes = 0;
  std::vector<double> W;     // nodes * m, row-major
  std::vector<HVector> eta;  // empty unless the instance needs it

  NoiseState() = default;
  NoiseState(const TimeGrid& grid, std::size_t m_);

  std::size_t n_nodes() const { return nodes; }
  std::size_t index(double s) const;
  double w(std::size_t node, std::size_t j) const { return W[node * m + j]; }
  double& w(std::size_t node, std::size_t j) { return W[node * m + j]; }
  double at(double s, std::size_t j) const;
  double increment(std::size_t step, std::size_t j) const { return w(step + 1, j) - w(step, j); }
};

using WienerPath = NoiseState;

NoiseState zero_noise(const TimeGrid& grid, std::size_t m);

/// Gaussian increments N(0, dt) per step and component; W(t0) = 0.
NoiseState sample_wiener(const TimeGrid& grid, std::size_t m, std::uint64_t seed);

/// Binomial scenario tree: 2^m children per node with per-component increments +-sqrt(h).
/// m = 0 gives a single-scenario chain. Nodes are numbered level by level.
class NoiseTree {
 public:
  NoiseTree(std::size_t depth, std::size_t m, double horizon, std::size_t node_budget = std::size_t{1} << 22);

  std::size_t depth() const { return depth_; }
  std::size_t m() const { return m_; }
  double horizon() const { return horizon_; }
  double h() const { return horizon_ / static_cast<double>(depth_); }
  std::size_t branching() const { return std::size_t{1} << m_; }
  std::size_t n_nodes() const { return offsets_.back(); }
  std::size_t level_offset(std::size_t level) const { return offsets_[level]; }
  std::size_t level_size(std::size_t level) const { return offsets_[level + 1] - offsets_[level]; }
  std::size_t level_of(std::size_t node) const;
  std::size_t child(std::size_t node, std::size_t c) const;
  std::size_t parent(std::size_t node) const;
  double probability(std::size_t node) const;
  double time(std::size_t level) const { return h() * static_cast<double>(level); }

  double W(std::size_t node, std::size_t j) const { return values_[node * m_ + j]; }
  /// Increment of component j on the edge into child slot c.
  double step(std::size_t c, std::size_t j) const;

 private:
  std::size_t depth_;
  std::size_t m_;
  double horizon_;
  std::vector<std::size_t> offsets_;
  std::vector<double> values_;
};

NoiseTree build_noise_tree(std::size_t depth, std::size_t m, double horizon, std::size_t node_budget);

enum class FKind { Zero, Const, Linear, CappedNorm, Delay };
enum class ControlCost { None, Square, Noise };

const char* to_string(FKind k);
FKind fkind_from_string(const std::string& s);
const char* to_string(ControlCost k);
ControlCost control_cost_from_string(const std::string& s);

/// Coefficients from the fixed catalog.
///   beta(t,x,v) = v b + gain (L/2) clamp(<y(lag t), p>, -1, 1) q
///   f(t,x,v)    = clamp(state part at y(t) or y(t/2) + control part, -L, L)
///   G(x)        = clamp(state part at y(T) or y(T/2) + g_noise W_1(T), -L, L)
/// with y = x + eta (eta = 0 unless the OU shift is enabled).
struct CoefficientSet {
  std::string name = "custom";
  double L = 1.0;
  Space lipschitz_space = Space::H;

  HVector beta_drive;      // b
  double beta_gain = 0.0;
  double beta_lag = 1.0;
  HVector beta_probe;      // p, |p|_V <= 1
  HVector beta_dir;        // q, |q|_H = 1

  FKind f_kind = FKind::Zero;
  double f_const = 0.0;
  HVector f_vec;           // linear functional
  Space f_space = Space::H;
  ControlCost f_control = ControlCost::None;
  double f_control_weight = 0.0;

  FKind g_kind = FKind::Zero;
  double g_const = 0.0;
  HVector g_vec;
  Space g_space = Space::H;
  double g_noise = 0.0;

  std::size_t eta_modes = 0;
  double eta_rate = 1.0;
  double eta_vol = 0.0;

  double horizon = 1.0;

  bool is_random() const;
  bool uses_eta() const { return eta_modes > 0; }

  /// Throws when the catalog parameters cannot meet the declared bound or Lipschitz constant.
  void validate(const ControlSet& U) const;

  HVector beta(double t, const PathView& x, double v, const NoiseState& w) const;
  double f(double t, const PathView& x, double v, const NoiseState& w) const;
  double G(const PathView& x, const NoiseState& w) const;

  /// Fills eta on nodes (from, to] from W; no-op when the shift is disabled.
  void advance_noise(NoiseState& w, std::size_t from, std::size_t to) const;

 private:
  HVector lookup(const PathView& x, double s, const NoiseState& w) const;
  double state_term(FKind kind, double c, const HVector& p, Space sp, const PathView& x, double t,
                    const NoiseState& w) const;
};

/// What the solvers need from a (possibly frozen) control problem.
class Model {
 public:
  virtual ~Model() = default;
  virtual std::size_t dim() const = 0;
  virtual double horizon() const = 0;
  virtual const ControlSet& controls() const = 0;
  virtual bool is_random() const = 0;
  virtual HVector beta(double t, const PathView& x, std::size_t k, const NoiseState& w) const = 0;
  virtual double f(double t, const PathView& x, std::size_t k, const NoiseState& w) const = 0;
  virtual double G(const PathView& x, const NoiseState& w) const = 0;
  virtual void advance_noise(NoiseState& w, std::size_t from, std::size_t to) const = 0;
  /// Declared bound and Lipschitz constant.
  virtual double L() const = 0;
};

struct ProblemInstance : Model {
  std::string name;
  std::size_t D = 64;
  GelfandConstants constants = laplacian_constants();
  CoefficientSet coeffs;
  ControlSet U = default_controls();
  double T = 1.0;
  std::size_t m = 1;
  std::size_t n_steps = 256;

  TimeGrid grid() const { return TimeGrid(0.0, T, n_steps); }
  double dt() const { return T / static_cast<double>(n_steps); }

  std::size_t dim() const override { return D; }
  double horizon() const override { return T; }
  const ControlSet& controls() const override { return U; }
  bool is_random() const override { return coeffs.is_random(); }
  HVector beta(double t, const PathView& x, std::size_t k, const NoiseState& w) const override;
  double f(double t, const PathView& x, std::size_t k, const NoiseState& w) const override;
  double G(const PathView& x, const NoiseState& w) const override;
  void advance_noise(NoiseState& w, std::size_t from, std::size_t to) const override {
    coeffs.advance_noise(w, from, to);
  }
  double L() const override { return coeffs.L; }

  /// Noise for a run: Wiener sample when random, zeros otherwise; eta attached.
  NoiseState make_noise(std::uint64_t seed) const;
  NoiseState make_zero_noise() const;

  void validate() const;
};

struct InstanceOptions {
  std::size_t D = 64;
  double T = 1.0;
  std::size_t n_steps = 256;
  std::size_t m = 1;
  double L = 1.0;
};

/// Built-ins: null, steer-1, steer-1-g, delay, delay-vstar, example21.
ProblemInstance builtin_instance(const std::string& name, const InstanceOptions& opt = {});
std::vector<std::string> builtin_names();

/// Shifted instance X = X~ - eta with eta an OU process in the first eta_modes directions.
ProblemInstance example21_instance(std::size_t eta_modes, double eta_rate, double eta_vol,
                                   const InstanceOptions& opt = {});

/// Random catalog instance with bound and Lipschitz constant L (used by estimate suites).
ProblemInstance random_instance(Rng& rng, const InstanceOptions& opt);

struct LipschitzReport {
  double beta = 0.0;
  double f = 0.0;
  double G = 0.0;
  double max() const { return std::max({beta, f, G}); }
};

/// Largest measured ratio |delta coefficient| / |delta path|_{0,space} over random path pairs.
LipschitzReport lipschitz_probe(const ProblemInstance& inst, std::size_t n_pairs, Space space, std::uint64_t seed);

struct BoundReport {
  double beta = 0.0;
  double f = 0.0;
  double G = 0.0;
};

/// Largest |f|, |G|, |beta|_H over random probes.
BoundReport bound_probe(const ProblemInstance& inst, std::size_t n_probes, std::uint64_t seed);

/// Random low-mode path on the instance grid up to node k (used for probes).
Path random_probe_path(const ProblemInstance& inst, std::size_t k, double scale, Rng& rng);

}  // namespace pathhjb
