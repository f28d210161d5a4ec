#pragma once

// Cost and value functionals, the Hamiltonian, and exact backward induction
// on binomial scenario trees (dynamic programming and supermartingale checks).

#include "pathhjb/dynamics.hpp"
#include "pathhjb/exponential.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace pathhjb {

enum class ValueMode { ExactTree, Exhaustive, MonteCarlo, Exact };
const char* to_string(ValueMode m);

struct ValueEstimate {
  double value = 0.0;
  double stderr_ = 0.0;
  ValueMode mode = ValueMode::Exact;
  std::size_t n_samples = 1;
};

/// J(t, xi; theta). Deterministic instances use one solve; random ones average
/// n_mc Wiener samples and report the standard error.
ValueEstimate cost_J(const ProblemInstance& inst, const Path& xi, const ControlSchedule& theta, std::size_t n_mc,
                     std::uint64_t seed);

/// Cost of one run with a given noise path.
double cost_with_noise(const Model& model, const Path& xi, const ControlSchedule& theta, const NoiseState& w);

struct OpenLoopResult {
  ValueEstimate value;
  ControlSchedule argmin;
  std::size_t candidates = 0;
};

/// Exhaustive min over piecewise-constant open-loop controls with N_c intervals on [t, T].
OpenLoopResult value_open_loop(const Model& model, const Path& xi, std::size_t N_c, std::size_t workers = 1,
                               std::size_t budget = 1u << 20);

struct HamiltonianResult {
  double value = 0.0;
  std::size_t argmin = 0;
};

/// min_v <Ax(t), p> + <beta(t,x_t,v), p> + f(t,x_t,v), lowest index on ties.
HamiltonianResult hamiltonian(const Model& model, double t, const PathView& x, const HVector& p, const NoiseState& w);

/// Joint tree: m Wiener components and d auxiliary components B (children = 2^{m+d}).
/// B starts at zero at the root level and shifts the first d state modes by delta * dB
/// at every tree time after the root.
struct TreeConfig {
  std::size_t depth = 3;     // tree levels over [0, T]
  std::size_t m = 1;
  std::size_t b_dims = 0;
  double delta = 0.0;
  std::size_t n_steps = 0;   // fine steps over [0, T]; 0 uses 8 per level
  std::size_t node_budget = std::size_t{1} << 22;
};

/// Node numbering below the root: level-order with branching 2^{m+d}.
struct TreeShape {
  std::size_t levels = 0;
  std::size_t branching = 1;
  std::vector<std::size_t> offsets;  // offsets[l] = first node at relative level l

  TreeShape() = default;
  TreeShape(std::size_t levels_, std::size_t branching_, std::size_t budget);
  std::size_t n_nodes() const { return offsets.back(); }
  std::size_t internal_nodes() const { return offsets[levels]; }
  std::size_t child(std::size_t node, std::size_t c) const;
  std::size_t level_of(std::size_t node) const;
};

using LeafCallback = std::function<void(const PathView& x, const NoiseState& w)>;

/// Depth-first exact backward induction started at tree level `start_level`
/// from the history xi (on the fine grid, ending at that level's time).
class TreeSolver {
 public:
  TreeSolver(const Model& model, const TreeConfig& cfg, const Path& xi, std::size_t start_level,
             const NoiseState* noise_prefix = nullptr);

  const TreeShape& shape() const { return shape_; }
  std::size_t start_level() const { return start_; }
  std::size_t sub() const { return sub_; }
  double level_time(std::size_t level) const;

  /// Value at the root (min over controls at every node).
  double value();

  /// Value plus optimal policy and node values along it; policy entries are
  /// labels, indexed by relative node id; unreachable entries hold SIZE_MAX.
  double solve_policy(std::vector<std::size_t>& policy, std::vector<double>& node_value);

  /// Expected cost of a fixed adapted policy (labels by node id).
  double evaluate(const std::vector<std::size_t>& policy);

  /// Expected cost of an open-loop schedule.
  double evaluate(const ControlSchedule& theta);

  /// Two-stage recursion: min over controls up to relative level `stop`, then a
  /// fresh solver from each reached (state history, noise history).
  double two_stage(std::size_t stop);

  /// Walks the tree under `policy`, recomputing V with fresh solvers at every
  /// reached node. max_violation = max [V - E V(child) - cost]^+, max_drift = max [E V(child) + cost - V].
  struct MartingaleReport {
    double max_violation = 0.0;
    double max_drift = 0.0;
    double min_drift = 0.0;
    std::size_t nodes = 0;
  };
  MartingaleReport supermartingale(const std::vector<std::size_t>& policy);

  void set_leaf_callback(LeafCallback cb) { leaf_cb_ = std::move(cb); }

 private:
  enum class Mode { Min, Policy, Eval, Schedule, TwoStage, Martingale };

  double recurse(std::size_t level, std::size_t node, Mode mode);
  double integrate_cell(std::size_t level, std::size_t label, const ControlSchedule* sched);
  void set_child(std::size_t level, std::size_t c, const HVector& xend);
  void fill_cell_noise(std::size_t level);
  double fresh_value(std::size_t level);

  const Model& model_;
  TreeConfig cfg_;
  std::size_t start_;
  std::size_t sub_;
  double dt_;
  double h_;
  TreeShape shape_;
  ExpStepper stepper_;
  std::vector<HVector> x_;
  NoiseState w_;
  std::vector<std::vector<double>> wlev_;  // W at each absolute level (m values)
  std::vector<std::vector<double>> blev_;  // B at each absolute level (d values)
  LeafCallback leaf_cb_;

  // mode-specific state
  const std::vector<std::size_t>* policy_in_ = nullptr;
  std::vector<std::size_t>* policy_out_ = nullptr;
  std::vector<double>* value_out_ = nullptr;
  const ControlSchedule* sched_ = nullptr;
  std::size_t stop_ = 0;
  MartingaleReport* mreport_ = nullptr;
};

ValueEstimate value_adapted_tree(const Model& model, const TreeConfig& cfg, const Path& xi, std::size_t start_level,
                                 std::vector<std::size_t>* policy = nullptr);

/// |V(t, xi) - min_theta E[sum f dt + V(t_hat, X_{t_hat})]| for tree levels t <= t_hat.
double check_dpp(const Model& model, const TreeConfig& cfg, const Path& xi, std::size_t t_level,
                 std::size_t that_level);

/// Brute-force min over all adapted strategies (|U|^{internal nodes} maps).
double brute_force_tree(const Model& model, const TreeConfig& cfg, const Path& xi, std::size_t start_level,
                        std::size_t max_internal = 3);

/// Deterministic instance on the tree time grid with m = 0.
struct RegularityReport {
  std::size_t probes = 0;
  double max_abs_value = 0.0;
  double bound = 0.0;          // L (T + 1)
  std::size_t bound_violations = 0;
  double max_lipschitz_ratio = 0.0;
  double candidate_LV = 0.0;   // K_iv * L * (1 + T)
  std::size_t pairs = 0;
  bool passed() const { return bound_violations == 0 && max_lipschitz_ratio <= candidate_LV; }
};

RegularityReport check_value_regularity(const ProblemInstance& inst, std::size_t n_probes, std::size_t depth,
                                        std::uint64_t seed, std::size_t workers = 1);

}  // namespace pathhjb
