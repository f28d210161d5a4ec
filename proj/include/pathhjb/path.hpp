#pragma once

// Càdlàg paths valued in the truncated triple, sampled on uniform grids.
// Between nodes a path holds the value of the left node; the value at the
// final time may be overridden to carry a vertical perturbation.

#include "pathhjb/seeding.hpp"
#include "pathhjb/spectral.hpp"

#include <optional>
#include <span>
#include <vector>

namespace pathhjb {

struct TimeGrid {
  double t0 = 0.0;
  double t1 = 1.0;
  std::size_t n_steps = 1;

  TimeGrid() = default;
  TimeGrid(double t0_, double t1_, std::size_t n_steps_);

  /// Grid on [t0, t0 + n_steps * dt]; n_steps = 0 gives the single-node grid {t0}.
  static TimeGrid with_step(double t0, double dt, std::size_t n_steps);

  double dt() const { return h_; }
  double node(std::size_t k) const;
  std::size_t n_nodes() const { return n_steps + 1; }

  /// Index of the last node <= t (clamped to the grid).
  std::size_t floor_index(double t) const;
  /// Index of the node equal to t; throws if t is not a node.
  std::size_t index_of(double t) const;
  bool is_node(double t) const;

 private:
  double h_ = 1.0;
};

/// Non-owning view of a path restricted to [t0, node(last)].
class PathView {
 public:
  PathView(double t0, double dt, std::span<const HVector> values, const HVector* terminal_override = nullptr);

  double t0() const { return t0_; }
  double dt() const { return dt_; }
  std::size_t last_index() const { return values_.size() - 1; }
  double end_time() const { return t0_ + dt_ * static_cast<double>(last_index()); }
  std::size_t dim() const { return values_.front().dim(); }

  /// Càdlàg evaluation; times beyond the end return the terminal value.
  const HVector& at(double s) const;
  /// Value at node k; the last node returns the terminal override when present.
  const HVector& node(std::size_t k) const;
  const HVector& terminal() const { return node(last_index()); }
  bool has_override() const { return override_ != nullptr; }

  std::size_t floor_index(double s) const;

  /// Restriction to nodes 0..k (no override unless k is the last node).
  PathView prefix(std::size_t k) const;
  /// Piecewise freezing: node k < last reads node (k / stride) * stride.
  PathView with_stride(std::size_t stride) const;

 private:
  double t0_;
  double dt_;
  std::span<const HVector> values_;
  const HVector* override_;
  std::size_t stride_ = 1;
};

class Path {
 public:
  Path() = default;
  Path(TimeGrid grid, std::vector<HVector> values, std::optional<HVector> terminal_override = std::nullopt);

  static Path constant(const TimeGrid& grid, const HVector& h);
  template <class Fn>
  static Path from_function(const TimeGrid& grid, Fn&& fn) {
    std::vector<HVector> v;
    v.reserve(grid.n_nodes());
    for (std::size_t k = 0; k < grid.n_nodes(); ++k) v.push_back(fn(grid.node(k)));
    return Path(grid, std::move(v));
  }

  const TimeGrid& grid() const { return grid_; }
  const std::vector<HVector>& values() const { return values_; }
  const std::optional<HVector>& terminal_override() const { return override_; }
  std::size_t dim() const { return values_.front().dim(); }
  double end_time() const { return grid_.t1; }

  PathView view() const;
  /// View of the restriction to [t0, node(k)]; drops the override unless k is the last node.
  PathView view_until(std::size_t k) const;

  const HVector& at(double s) const { return view().at(s); }
  const HVector& terminal() const { return view().terminal(); }

  /// Owning restriction to [t0, node(k)].
  Path truncated(std::size_t k) const;

 private:
  TimeGrid grid_;
  std::vector<HVector> values_;
  std::optional<HVector> override_;
};

/// Max over nodes (and the terminal override) of the chosen norm.
double sup_norm(const PathView& x, Space space);
inline double sup_norm(const Path& x, Space space) { return sup_norm(x.view(), space); }

/// Sup-norm distance between two paths on a common grid (pointwise difference).
double sup_distance(const PathView& x, const PathView& y, Space space);

/// d_{0,B}(x_r, y_t): sqrt|t - r| plus the sup distance with the shorter path frozen at its end.
double path_dist(const PathView& x, const PathView& y, Space space);
inline double path_dist(const Path& x, const Path& y, Space space) { return path_dist(x.view(), y.view(), space); }

/// x_{t,delta}(s) = x(s ∧ t); delta must be a multiple of the grid step.
Path horizontal_extend(const Path& x, double delta);

/// Shifts only the endpoint value: x^h(t) = x(t) + h.
Path vertical_perturb(const Path& x, const HVector& h);

/// Dyadic freezing P^M: value x((n-1) t/2^M) on the n-th cell, x(t) at t.
Path stepwise_project(const Path& x, unsigned M);

/// Projection ^dP applied at every node.
Path project_path(const Path& x, std::size_t d);

/// Càdlàg resampling onto another grid.
Path resample(const PathView& x, const TimeGrid& grid);

/// Class of paths x' = Ax + g, |g|_H <= k, anchored to xi on [0, tau].
struct PathClassSpec {
  double k = 1.0;
  Path anchor;
  double horizon = 1.0;
  std::size_t active_modes = 8;
};

struct PathClassSample {
  Path path;
  std::vector<HVector> drift;  // one per step after the anchor
};

/// Exact integration of the class ODE from the anchor's endpoint with the given per-step drift.
Path extend_with_drift(const Path& anchor, std::span<const HVector> drift);

PathClassSample sample_path_class(const PathClassSpec& spec, Rng& rng);

/// Drift recovered step by step from the exact integrator relation.
std::vector<HVector> recover_drift(const Path& x, std::size_t from_index);

bool is_in_path_class(const Path& x, const PathClassSpec& spec, double tol);

/// sup over node pairs s > t >= from of |x(s) - x(t)|_{space} / sqrt(s - t).
double holder_half_modulus(const PathView& x, Space space, std::size_t from_index = 0);

}  // namespace pathhjb
