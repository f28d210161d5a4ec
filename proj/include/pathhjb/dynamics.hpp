#pragma once

// Controlled state equation dX = (AX + beta(t, X_t, theta)) dt solved by
// exponential stepping with beta frozen at the left node of each step.

#include "pathhjb/path.hpp"
#include "pathhjb/problem.hpp"

#include <cstdint>
#include <vector>

namespace pathhjb {

/// Open-loop control: one label per interval of a uniform partition of [t_start, T].
struct ControlSchedule {
  double t_start = 0.0;
  double T = 1.0;
  std::vector<std::size_t> labels;

  std::size_t at(double s) const;
  static ControlSchedule constant(std::size_t label, double t_start, double T);
};

enum class Method { Exponential, SemiImplicit };

struct SolverConfig {
  Method method = Method::Exponential;
  double picard_tol = 1e-12;
  std::size_t picard_max_iter = 500;
  double window = 0.0;  // Picard window T0; 0 picks the largest contracting dyadic fraction
};

struct PicardTrace {
  double window = 0.0;
  double factor = 0.0;  // squared-norm contraction factor L^2 T0 / c2hat * e^{T0 c1+}
  std::size_t windows = 0;
  std::size_t iterations = 0;
  std::vector<double> distances;  // sup-H distance between successive iterates
  std::vector<double> ratios;     // distances[i+1] / distances[i] while above tolerance
  double max_ratio() const;
};

struct StateSolution {
  Path path;                  // history on [t0, r] followed by the solution on [r, T]
  std::size_t start_index = 0;
  std::vector<HVector> drift;  // beta used on each step from start_index on
  double v_energy = 0.0;       // int_r^T |X|_V^2 ds
  double h_max = 0.0;          // max over nodes in [r, T] of |X|_H
  PicardTrace picard;
};

/// Solves on [r, T] where r is the end of xi; the grid step is xi's.
StateSolution solve_state(const Model& model, const Path& xi, const ControlSchedule& theta, const NoiseState& w,
                          const SolverConfig& cfg = {});

/// Picard iteration of the frozen-path solution map on windows of length T0.
StateSolution picard_solve(const Model& model, const Path& xi, const ControlSchedule& theta, const NoiseState& w,
                           const GelfandConstants& gc, const SolverConfig& cfg = {});

/// Largest dyadic fraction of T with contraction factor below one.
double picard_window(double L, const GelfandConstants& gc, double T);
double picard_factor(double L, const GelfandConstants& gc, double T0);

/// sup over grid nodes in [t, T] of |X^{r,xi}(s) - X^{t, X_t}(s)|_H.
/// Off-grid t restarts on a refined grid holding t as a node.
double flow_check(const Model& model, const Path& xi, double t, const ControlSchedule& theta, const NoiseState& w,
                  const SolverConfig& cfg = {});

/// Left-rectangle running cost over [r, T] plus the terminal cost.
double path_cost(const Model& model, const StateSolution& sol, const ControlSchedule& theta, const NoiseState& w);

/// Constants of the a priori estimates.
struct EstimateConstants {
  double K2_ii = 0.0;      // K^2 = max{2, 2LT} e^{2(L + c1+)T}
  double Kbar_iii = 0.0;   // 1 + (2T c^2 L^2 + 2 c3^2 K^2 / c2)^{1/2}
  double K_iv = 0.0;       // sqrt(3) e^{(3/2) T (2L^2/c2 + c1+)}
  double Ktilde_v = 0.0;   // max{8L^2, 8}

  static EstimateConstants compute(double L, double T, const GelfandConstants& gc);
};

struct EstimateCheck {
  std::size_t n = 0;
  std::size_t violations = 0;
  double max_ratio = 0.0;  // lhs / rhs
  void add(double lhs, double rhs);
};

struct EstimateReport {
  EstimateConstants constants;
  EstimateCheck ii, iii, iv, v;
  double vi_spread = 0.0;  // relative spread of the (iv) ratio over control processes
  std::size_t vi_controls = 0;
  bool passed() const;
};

struct EstimateSuiteConfig {
  std::size_t draws = 100;
  std::size_t D = 64;
  double T = 1.0;
  std::size_t n_steps = 128;
  double L = 1.0;
  std::size_t vi_controls = 5;
  std::size_t control_intervals = 8;
};

/// Random (instance, xi, theta) draws checked against every estimate.
EstimateReport estimate_suite(const EstimateSuiteConfig& cfg, std::uint64_t seed, std::size_t workers = 1);

/// Single-draw checks, exposed for tests.
void check_ii(const ProblemInstance& inst, const Path& xi, const ControlSchedule& th, const NoiseState& w,
              const EstimateConstants& k, EstimateCheck& out);
void check_iii(const ProblemInstance& inst, const Path& xi, const ControlSchedule& th, const NoiseState& w,
               const EstimateConstants& k, EstimateCheck& out);
double check_iv(const ProblemInstance& inst, const Path& xi, const Path& xi_hat, const ControlSchedule& th,
                const NoiseState& w, const EstimateConstants& k, EstimateCheck& out);
void check_v(const ProblemInstance& inst, const Path& xi, const ControlSchedule& th, const NoiseState& w,
             const EstimateConstants& k, EstimateCheck& out);

ControlSchedule random_schedule(std::size_t n_labels, std::size_t intervals, double t_start, double T, Rng& rng);

}  // namespace pathhjb
