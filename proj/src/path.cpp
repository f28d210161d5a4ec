#include "pathhjb/path.hpp"

#include "pathhjb/exponential.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

namespace pathhjb {

namespace {

constexpr double kNodeTol = 1e-9;

std::size_t floor_index_impl(double t0, double dt, std::size_t last, double s) {
  const double u = (s - t0) / dt;
  if (u <= 0.0) return 0;
  const double f = std::floor(u + kNodeTol);
  if (f >= static_cast<double>(last)) return last;
  return static_cast<std::size_t>(f);
}

}  // namespace

TimeGrid::TimeGrid(double t0_, double t1_, std::size_t n_steps_) : t0(t0_), t1(t1_), n_steps(n_steps_) {
  if (n_steps == 0) throw std::invalid_argument("TimeGrid: n_steps must be positive");
  if (!(t1 > t0)) throw std::invalid_argument("TimeGrid: t1 must exceed t0");
  h_ = (t1 - t0) / static_cast<double>(n_steps);
}

TimeGrid TimeGrid::with_step(double t0, double dt, std::size_t n_steps) {
  if (!(dt > 0.0)) throw std::invalid_argument("TimeGrid: dt must be positive");
  TimeGrid g;
  g.t0 = t0;
  g.t1 = t0 + dt * static_cast<double>(n_steps);
  g.n_steps = n_steps;
  g.h_ = dt;
  return g;
}

double TimeGrid::node(std::size_t k) const {
  if (k == n_steps) return t1;
  return t0 + dt() * static_cast<double>(k);
}

std::size_t TimeGrid::floor_index(double t) const { return floor_index_impl(t0, dt(), n_steps, t); }

bool TimeGrid::is_node(double t) const {
  const double u = (t - t0) / dt();
  return std::abs(u - std::round(u)) <= kNodeTol && u > -kNodeTol && u < static_cast<double>(n_steps) + kNodeTol;
}

std::size_t TimeGrid::index_of(double t) const {
  if (!is_node(t)) throw std::invalid_argument("time " + std::to_string(t) + " is not a grid node");
  return static_cast<std::size_t>(std::llround((t - t0) / dt()));
}

PathView::PathView(double t0, double dt, std::span<const HVector> values, const HVector* terminal_override)
    : t0_(t0), dt_(dt), values_(values), override_(terminal_override) {
  if (values.empty()) throw std::invalid_argument("PathView: empty path");
}

std::size_t PathView::floor_index(double s) const { return floor_index_impl(t0_, dt_, last_index(), s); }

const HVector& PathView::node(std::size_t k) const {
  if (k >= last_index()) return override_ ? *override_ : values_.back();
  return values_[stride_ == 1 ? k : (k / stride_) * stride_];
}

PathView PathView::prefix(std::size_t k) const {
  if (k >= last_index()) return *this;
  PathView v(t0_, dt_, values_.first(k + 1), nullptr);
  v.stride_ = stride_;
  return v;
}

PathView PathView::with_stride(std::size_t stride) const {
  if (stride == 0) throw std::invalid_argument("PathView: stride must be positive");
  PathView v = *this;
  v.stride_ = stride;
  return v;
}

const HVector& PathView::at(double s) const { return node(floor_index(s)); }

Path::Path(TimeGrid grid, std::vector<HVector> values, std::optional<HVector> terminal_override)
    : grid_(grid), values_(std::move(values)), override_(std::move(terminal_override)) {
  if (values_.size() != grid_.n_nodes()) {
    throw std::invalid_argument("Path: expected " + std::to_string(grid_.n_nodes()) + " values, got " +
                                std::to_string(values_.size()));
  }
}

Path Path::constant(const TimeGrid& grid, const HVector& h) {
  return Path(grid, std::vector<HVector>(grid.n_nodes(), h));
}

PathView Path::view() const {
  return PathView(grid_.t0, grid_.dt(), std::span<const HVector>(values_), override_ ? &*override_ : nullptr);
}

PathView Path::view_until(std::size_t k) const {
  if (k >= grid_.n_steps) return view();
  return PathView(grid_.t0, grid_.dt(), std::span<const HVector>(values_.data(), k + 1));
}

Path Path::truncated(std::size_t k) const {
  if (k >= grid_.n_steps) return *this;
  std::vector<HVector> v(values_.begin(), values_.begin() + static_cast<std::ptrdiff_t>(k + 1));
  return Path(TimeGrid::with_step(grid_.t0, grid_.dt(), k), std::move(v));
}

double sup_norm(const PathView& x, Space space) {
  double m = 0.0;
  for (std::size_t k = 0; k <= x.last_index(); ++k) m = std::max(m, norm(x.node(k), space));
  return m;
}

double sup_distance(const PathView& x, const PathView& y, Space space) {
  if (x.last_index() != y.last_index()) throw std::invalid_argument("sup_distance: paths on different grids");
  double m = 0.0;
  for (std::size_t k = 0; k <= x.last_index(); ++k) m = std::max(m, norm(x.node(k) - y.node(k), space));
  return m;
}

double path_dist(const PathView& a, const PathView& b, Space space) {
  // x is the shorter path (ending at r), y the longer one (ending at t).
  const bool swap = a.end_time() > b.end_time();
  const PathView& x = swap ? b : a;
  const PathView& y = swap ? a : b;
  const double r = x.end_time();
  const double t = y.end_time();

  std::vector<double> times;
  times.reserve(x.last_index() + y.last_index() + 2);
  for (std::size_t k = 0; k <= x.last_index(); ++k) times.push_back(x.t0() + x.dt() * static_cast<double>(k));
  for (std::size_t k = 0; k <= y.last_index(); ++k) times.push_back(y.t0() + y.dt() * static_cast<double>(k));
  times.push_back(r);
  times.push_back(t);
  std::sort(times.begin(), times.end());

  const double scale = std::max(x.dt(), y.dt());
  double sup = 0.0;
  double prev = -1e300;
  for (double s : times) {
    if (s - prev <= kNodeTol * scale) continue;
    prev = s;
    const bool before_r = s < r - kNodeTol * scale;
    const HVector& xs = before_r ? x.at(s) : x.terminal();
    sup = std::max(sup, norm(xs - y.at(s), space));
  }
  return std::sqrt(std::abs(t - r)) + sup;
}

Path horizontal_extend(const Path& x, double delta) {
  if (delta < 0.0) throw std::invalid_argument("horizontal_extend: delta must be nonnegative");
  const double dt = x.grid().dt();
  const double q = delta / dt;
  const long long extra = std::llround(q);
  if (std::abs(q - static_cast<double>(extra)) > 1e-9) {
    throw std::invalid_argument("horizontal_extend: delta must be a multiple of the grid step");
  }
  if (extra == 0) return x;
  std::vector<HVector> v(x.values());
  const HVector end = x.terminal();
  v.back() = end;
  for (long long i = 0; i < extra; ++i) v.push_back(end);
  return Path(TimeGrid::with_step(x.grid().t0, dt, x.grid().n_steps + static_cast<std::size_t>(extra)),
              std::move(v));
}

Path vertical_perturb(const Path& x, const HVector& h) {
  return Path(x.grid(), x.values(), x.terminal() + h);
}

Path stepwise_project(const Path& x, unsigned M) {
  const std::size_t n = x.grid().n_steps;
  const std::size_t cells = std::size_t{1} << M;
  std::vector<HVector> v;
  v.reserve(n + 1);
  const PathView xv = x.view();
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t src;
    if (n % cells == 0) {
      const std::size_t w = n / cells;
      src = (k / w) * w;
    } else {
      // Cell start (c-1) t/2^M falls between nodes; take the càdlàg value there.
      const double frac = static_cast<double>(k) / static_cast<double>(n) * static_cast<double>(cells);
      const double cell = std::floor(frac + 1e-12);
      const double start = cell / static_cast<double>(cells) * static_cast<double>(n);
      src = static_cast<std::size_t>(std::floor(start + 1e-9));
    }
    v.push_back(xv.node(src));
  }
  v.push_back(x.values().back());
  return Path(x.grid(), std::move(v), x.terminal_override());
}

Path project_path(const Path& x, std::size_t d) {
  std::vector<HVector> v;
  v.reserve(x.values().size());
  for (const auto& h : x.values()) v.push_back(project(h, d));
  std::optional<HVector> ov;
  if (x.terminal_override()) ov = project(*x.terminal_override(), d);
  return Path(x.grid(), std::move(v), std::move(ov));
}

Path resample(const PathView& x, const TimeGrid& grid) {
  std::vector<HVector> v;
  v.reserve(grid.n_nodes());
  for (std::size_t k = 0; k < grid.n_nodes(); ++k) v.push_back(x.at(grid.node(k)));
  return Path(grid, std::move(v));
}

Path extend_with_drift(const Path& anchor, std::span<const HVector> drift) {
  const double dt = anchor.grid().dt();
  const std::size_t n0 = anchor.grid().n_steps;
  ExpStepper stepper(anchor.dim(), dt);
  std::vector<HVector> v(anchor.values());
  v.back() = anchor.terminal();
  v.reserve(n0 + drift.size() + 1);
  for (const auto& g : drift) v.push_back(stepper.step(v.back(), g));
  return Path(TimeGrid::with_step(anchor.grid().t0, dt, n0 + drift.size()), std::move(v));
}

PathClassSample sample_path_class(const PathClassSpec& spec, Rng& rng) {
  const TimeGrid& ag = spec.anchor.grid();
  const double dt = ag.dt();
  const double q = (spec.horizon - ag.t1) / dt;
  const long long steps = std::llround(q);
  if (steps < 0 || std::abs(q - static_cast<double>(steps)) > 1e-9) {
    throw std::invalid_argument("sample_path_class: horizon must be a grid node beyond the anchor");
  }
  const std::size_t dim = spec.anchor.dim();
  const std::size_t active = std::min(spec.active_modes, dim);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  PathClassSample out;
  out.drift.reserve(static_cast<std::size_t>(steps));
  for (long long s = 0; s < steps; ++s) {
    HVector g(dim);
    double n2 = 0.0;
    for (std::size_t i = 0; i < active; ++i) {
      g[i] = gauss(rng);
      n2 += g[i] * g[i];
    }
    const double mag = spec.k * unif(rng);
    if (n2 > 0.0) g *= mag / std::sqrt(n2);
    out.drift.push_back(std::move(g));
  }
  out.path = extend_with_drift(spec.anchor, out.drift);
  return out;
}

std::vector<HVector> recover_drift(const Path& x, std::size_t from_index) {
  ExpStepper stepper(x.dim(), x.grid().dt());
  const PathView v = x.view();
  std::vector<HVector> g;
  for (std::size_t k = from_index; k < v.last_index(); ++k) g.push_back(stepper.recover_drift(v.node(k), v.node(k + 1)));
  return g;
}

bool is_in_path_class(const Path& x, const PathClassSpec& spec, double tol) {
  const TimeGrid& ag = spec.anchor.grid();
  if (std::abs(x.grid().dt() - ag.dt()) > 1e-12 * ag.dt() || std::abs(x.grid().t0 - ag.t0) > 1e-12) {
    throw std::invalid_argument("is_in_path_class: grid mismatch, resample first");
  }
  const std::size_t na = ag.n_steps;
  if (x.grid().n_steps < na) return false;
  const PathView xv = x.view();
  const PathView av = spec.anchor.view();
  for (std::size_t k = 0; k <= na; ++k) {
    if (norm(xv.node(k) - av.node(k), Space::H) > tol) return false;
  }
  for (const auto& g : recover_drift(x, na)) {
    if (norm(g, Space::H) > spec.k + tol) return false;
  }
  return true;
}

double holder_half_modulus(const PathView& x, Space space, std::size_t from_index) {
  double m = 0.0;
  const std::size_t n = x.last_index();
  for (std::size_t i = from_index; i < n; ++i) {
    for (std::size_t j = i + 1; j <= n; ++j) {
      const double ds = x.dt() * static_cast<double>(j - i);
      m = std::max(m, norm(x.node(j) - x.node(i), space) / std::sqrt(ds));
    }
  }
  return m;
}

}  // namespace pathhjb
