#pragma once

// Finite-dimensional approximation: frozen coefficients, ensemble-sup error
// processes, projection errors, the delta-regularised tree value and the
// sandwich bounds built from the correction processes.

#include "pathhjb/control.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace pathhjb {

struct ApproxConfig {
  std::size_t N = 8;          // time partition count
  unsigned M = 3;             // dyadic path-sampling level (2^M >= n_steps disables freezing)
  std::size_t d = 4;          // projection dimension
  double k = 1.0;             // path-class drift bound
  HVector x0;                 // anchor initial state (empty: zero)
  std::size_t E = 256;        // ensemble size
  std::size_t n_steps = 512;  // fine grid over [0, T]
  std::size_t batches = 8;    // sub-ensembles for the 3 sigma bands

  void validate(const Model& model) const;
};

/// f^N(t, x) = f(a(t), P^M x_{a(t)}), beta^N = ^dP beta(a(t), P^M x_{a(t)}), G^N = G(P^M x_T),
/// with a(t) the partition node at or before t.
class FrozenModel : public Model {
 public:
  FrozenModel(const Model& base, std::size_t N, unsigned M, std::size_t d, std::size_t n_steps);

  std::size_t dim() const override { return base_.dim(); }
  double horizon() const override { return base_.horizon(); }
  const ControlSet& controls() const override { return base_.controls(); }
  bool is_random() const override { return base_.is_random(); }
  HVector beta(double t, const PathView& x, std::size_t k, const NoiseState& w) const override;
  double f(double t, const PathView& x, std::size_t k, const NoiseState& w) const override;
  double G(const PathView& x, const NoiseState& w) const override;
  void advance_noise(NoiseState& w, std::size_t from, std::size_t to) const override {
    base_.advance_noise(w, from, to);
  }
  double L() const override { return base_.L(); }

  std::size_t N() const { return N_; }
  unsigned M() const { return M_; }
  std::size_t d() const { return d_; }
  /// Fine index of a(t).
  std::size_t anchor_index(double t) const;
  double anchor_time(double t) const;
  /// P^M applied to the prefix of x up to node `idx`.
  PathView frozen_prefix(const PathView& x, std::size_t idx) const;

 private:
  void check_grid(const PathView& x) const;

  const Model& base_;
  std::size_t N_;
  unsigned M_;
  std::size_t d_;
  std::size_t n_;
  double dt_;
};

/// Per-node ensemble sups of |f^N - f|, |^dP beta^N - beta|_{V*} (over controls) and |G^N - G|.
struct ErrorProcesses {
  double dt = 0.0;
  std::vector<double> f;     // nodes 0..n-1
  std::vector<double> beta;  // nodes 0..n-1
  double G = 0.0;

  ErrorProcesses() = default;
  ErrorProcesses(std::size_t n, double dt_) : dt(dt_), f(n, 0.0), beta(n, 0.0) {}
  void merge(const ErrorProcesses& o);
  double f_l2() const;
  double beta_l2() const;
  double total() const { return f_l2() + beta_l2() + G; }
};

/// Adds the errors along one full path on [0, T] to `out`.
void accumulate_errors(const Model& base, const FrozenModel& frozen, const PathView& x, const NoiseState& w,
                       ErrorProcesses& out);

struct ApproxErrorReport {
  ErrorProcesses errors;
  double f_agg = 0.0, beta_agg = 0.0, G_agg = 0.0;
  double f_sigma = 0.0, beta_sigma = 0.0, G_sigma = 0.0;  // standard error of the batch aggregates
  double budget_ratio = 0.0;  // (f_agg + beta_agg + G_agg) / ((1 + k)(1 + |x0|_H))
  double freeze_gap = 0.0;    // sup over the ensemble of |x - P^M x|_{0,V*}
  double freeze_bound = 0.0;  // Kbar (1 + |x0|_H) (T / 2^M)^{1/2}
  double coeff_bound = 0.0;   // (L + 1) freeze_bound
  std::size_t freeze_violations = 0;
};

/// Ensemble of E class paths on [0, T] anchored at x0 (sample i seeded by (seed, "approx-ensemble", i)).
std::vector<Path> class_ensemble(const ApproxConfig& cfg, double T, std::size_t D, std::uint64_t seed);

ApproxErrorReport measure_errors(const ProblemInstance& inst, const ApproxConfig& cfg, const std::vector<Path>& ensemble,
                                 std::uint64_t seed, std::size_t workers = 1);

struct ProjectionRow {
  std::size_t d = 0;
  double ensemble_sup = 0.0;  // sup |(^dP - I) beta|_{V*} over ensemble outputs
  double witness = 0.0;       // |(^dP - I) h|_{V*} for h_i = 1/i, i <= 8
  double witness_bound = 0.0; // |h|_H / sqrt(1 + lambda_{d+1})
};

std::vector<ProjectionRow> projection_error_sup(const ProblemInstance& inst, const std::vector<std::size_t>& d_list,
                                                const std::vector<Path>& ensemble, std::uint64_t seed);

/// Y(s_k) = G^eps + sum_{j >= k} dt (f^eps(j) + C1 beta^eps(j)); Z = 0. Entry n is Y(T).
std::vector<double> correction_process(const ErrorProcesses& e, double C1);

/// y at tree level `level`: E[|B_T|_0 + sum over fine nodes s_k >= t of dt |B_{s_k}|_0] for the
/// d-dimensional binomial B restarted at zero, |B_r|_0 = max_{u <= r} |B(u)|.
double b_correction(std::size_t depth, std::size_t level, std::size_t d, std::size_t n_steps, double T);

struct RegularizedValue {
  double value = 0.0;
  double grad_V = 0.0;  // |grad V^eps|_V from central differences in the d retained coordinates
};

/// V^eps at (t, ^dP x_t) on the (W x B) tree of the frozen problem.
RegularizedValue regularized_value(const FrozenModel& frozen, const TreeConfig& tree, const Path& x,
                                   std::size_t level, double fd_step = 1e-4);

struct SandwichConfig {
  ApproxConfig approx;
  std::size_t depth = 3;
  std::vector<double> deltas{0.2, 0.1, 0.05};
  std::size_t n_probes = 20;
  std::size_t probe_level_min = 1;
  std::size_t probe_level_max = 2;
};

struct SandwichRow {
  double delta = 0.0;
  std::size_t probe = 0;
  double t = 0.0;
  double V = 0.0;
  double V_eps = 0.0;
  double Y = 0.0;
  double y = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  double gap = 0.0;
  bool ordered = true;
};

struct SandwichReport {
  double L_c = 0.0;
  double L_tilde = 0.0;
  double C1 = 0.0;
  double C2 = 0.0;
  double grad_spread = 0.0;  // (max - min) / max of the per-delta L_tilde
  std::vector<double> L_tilde_by_delta;
  ErrorProcesses errors;
  std::vector<SandwichRow> rows;
  std::vector<double> mean_gap;  // per delta
  std::size_t violations = 0;
  double required_inflation = 0.0;  // factor on Y that would restore ordering (<= 1 when ordered)
  bool gap_nonincreasing = true;
  double degenerate_gap = 0.0;    // errors 0, delta 0
  double degenerate_error = 0.0;  // max |V^eps - V| in that case
  bool passed() const {
    return violations == 0 && gap_nonincreasing && degenerate_gap <= 1e-12 && degenerate_error <= 1e-12;
  }
};

/// Probes at tree levels in [probe_level_min, probe_level_max] with class histories; V from the
/// unfrozen tree, bounds from V^eps +- (Y + delta C2 y). The error ensemble includes every
/// controlled trajectory of the unfrozen tree from every probe.
SandwichReport sandwich_check(const ProblemInstance& inst, const SandwichConfig& cfg, std::uint64_t seed,
                              std::size_t workers = 1);

/// Convergence study over N, M, d and k (one parameter varied at a time from cfg).
struct ApproxStudyRow {
  std::string sweep;
  std::size_t N = 0;
  unsigned M = 0;
  std::size_t d = 0;
  double k = 0.0;
  ApproxErrorReport report;
};

struct ApproxStudyConfig {
  ApproxConfig base;
  std::vector<std::size_t> N_list{4, 8, 16, 32};
  std::vector<unsigned> M_list{1, 2, 3, 4, 5};
  std::vector<std::size_t> d_list{1, 2, 4, 8, 16};
  std::vector<double> k_list{1, 2, 4, 8};
  std::vector<std::size_t> proj_d_list{1, 2, 4, 8, 16, 32, 64};
};

struct ApproxStudy {
  std::vector<ApproxStudyRow> rows;
  std::vector<ProjectionRow> projection;
  bool monotone_N = true, monotone_M = true, monotone_d = true;
  bool projection_strict = true;
  double k_slope = 0.0;
  std::size_t freeze_violations = 0;
  bool passed() const {
    return monotone_N && monotone_M && monotone_d && projection_strict && k_slope <= 1.1 && freeze_violations == 0;
  }
};

ApproxStudy approx_study(const ProblemInstance& inst, const ApproxStudyConfig& cfg, std::uint64_t seed,
                         std::size_t workers = 1);

/// a_next <= a_prev + 3 sqrt(s_prev^2 + s_next^2).
bool nonincreasing_3sigma(const std::vector<double>& a, const std::vector<double>& s);

}  // namespace pathhjb
