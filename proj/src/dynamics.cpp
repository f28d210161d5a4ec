#include "pathhjb/dynamics.hpp"

#include "pathhjb/exponential.hpp"
#include "pathhjb/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace pathhjb {

namespace {

constexpr double kTimeTol = 1e-9;

std::size_t steps_between(double a, double b, double dt) {
  const double u = (b - a) / dt;
  if (u < -kTimeTol || std::abs(u - std::round(u)) > 1e-7) {
    throw std::invalid_argument("horizon " + std::to_string(b) + " is not a grid node from " + std::to_string(a));
  }
  return static_cast<std::size_t>(std::llround(u));
}

// One step of either integrator; accumulates the V-energy of the step.
struct Stepper {
  Method method;
  ExpStepper exp;
  double dt;

  Stepper(Method m, std::size_t dim, double h) : method(m), exp(dim, h), dt(h) {}

  void step(const HVector& a, const HVector& b, HVector& out, double& energy) const {
    if (method == Method::Exponential) {
      exp.step_into(a, b, out);
      energy += exp.v_energy(a, b);
      return;
    }
    if (out.dim() != a.dim()) out = HVector(a.dim());
    for (std::size_t k = 0; k < a.dim(); ++k) out[k] = (a[k] + dt * b[k]) / (1.0 + eigenvalue(k) * dt);
    energy += 0.5 * dt * (norm_squared(a, Space::V) + norm_squared(out, Space::V));
  }
};

std::vector<HVector> initial_values(const Path& xi, std::size_t total_nodes) {
  std::vector<HVector> v;
  v.reserve(total_nodes);
  v.insert(v.end(), xi.values().begin(), xi.values().end());
  if (xi.terminal_override()) v.back() = *xi.terminal_override();
  return v;
}

}  // namespace

std::size_t ControlSchedule::at(double s) const {
  if (labels.empty()) return 0;
  const double span = T - t_start;
  if (!(span > 0.0)) return labels.back();
  const double u = (s - t_start) / span * static_cast<double>(labels.size());
  if (u <= 0.0) return labels.front();
  const auto k = static_cast<std::size_t>(std::floor(u + kTimeTol));
  return labels[std::min(k, labels.size() - 1)];
}

ControlSchedule ControlSchedule::constant(std::size_t label, double t_start, double T) {
  return ControlSchedule{t_start, T, {label}};
}

double PicardTrace::max_ratio() const {
  double m = 0.0;
  for (double r : ratios) m = std::max(m, r);
  return m;
}

StateSolution solve_state(const Model& model, const Path& xi, const ControlSchedule& theta, const NoiseState& w,
                          const SolverConfig& cfg) {
  const double dt = xi.grid().dt();
  const double t0 = xi.grid().t0;
  const std::size_t ri = xi.grid().n_steps;
  const std::size_t n = steps_between(xi.end_time(), model.horizon(), dt);
  if (xi.dim() != model.dim()) throw std::invalid_argument("solve_state: xi dimension differs from the model");

  StateSolution sol;
  sol.start_index = ri;
  std::vector<HVector> v = initial_values(xi, ri + n + 1);
  v.resize(ri + n + 1, HVector(model.dim()));
  sol.drift.reserve(n);
  sol.h_max = norm(v[ri], Space::H);

  const Stepper st(cfg.method, model.dim(), dt);
  for (std::size_t j = ri; j < ri + n; ++j) {
    const double s = t0 + dt * static_cast<double>(j);
    const PathView hist(t0, dt, std::span<const HVector>(v.data(), j + 1));
    HVector b = model.beta(s, hist, theta.at(s), w);
    st.step(v[j], b, v[j + 1], sol.v_energy);
    sol.h_max = std::max(sol.h_max, norm(v[j + 1], Space::H));
    sol.drift.push_back(std::move(b));
  }
  sol.path = Path(TimeGrid::with_step(t0, dt, ri + n), std::move(v));
  return sol;
}

double picard_factor(double L, const GelfandConstants& gc, double T0) {
  const double c2hat = gc.c2 / 2.0;
  return L * L * T0 / c2hat * std::exp(T0 * gc.c1_plus());
}

double picard_window(double L, const GelfandConstants& gc, double T) {
  double T0 = T;
  for (int j = 0; j < 60 && picard_factor(L, gc, T0) >= 1.0; ++j) T0 *= 0.5;
  return T0;
}

StateSolution picard_solve(const Model& model, const Path& xi, const ControlSchedule& theta, const NoiseState& w,
                           const GelfandConstants& gc, const SolverConfig& cfg) {
  const double dt = xi.grid().dt();
  const double t0 = xi.grid().t0;
  const std::size_t ri = xi.grid().n_steps;
  const std::size_t n = steps_between(xi.end_time(), model.horizon(), dt);
  const std::size_t total = ri + n + 1;

  StateSolution sol;
  sol.start_index = ri;
  PicardTrace& tr = sol.picard;
  tr.window = cfg.window > 0.0 ? cfg.window : picard_window(model.L(), gc, model.horizon());
  tr.factor = picard_factor(model.L(), gc, tr.window);
  const std::size_t wsteps = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(tr.window / dt + kTimeTol)));

  std::vector<HVector> x = initial_values(xi, total);
  x.resize(total, HVector(model.dim()));
  std::vector<HVector> y(x);  // iterate buffer
  sol.drift.assign(n, HVector(model.dim()));
  const Stepper st(cfg.method, model.dim(), dt);

  for (std::size_t a = ri; a < ri + n; a += wsteps) {
    const std::size_t b = std::min(a + wsteps, ri + n);
    ++tr.windows;
    // Start from the horizontal extension of the known path.
    for (std::size_t j = a + 1; j <= b; ++j) x[j] = x[a];
    double prev = -1.0;
    std::size_t bad = 0;
    bool converged = false;
    for (std::size_t it = 0; it < cfg.picard_max_iter; ++it) {
      ++tr.iterations;
      double energy = 0.0;
      y[a] = x[a];
      for (std::size_t j = a; j < b; ++j) {
        const double s = t0 + dt * static_cast<double>(j);
        const PathView hist(t0, dt, std::span<const HVector>(x.data(), j + 1));
        sol.drift[j - ri] = model.beta(s, hist, theta.at(s), w);
        st.step(y[j], sol.drift[j - ri], y[j + 1], energy);
      }
      double dist = 0.0;
      for (std::size_t j = a + 1; j <= b; ++j) dist = std::max(dist, norm(y[j] - x[j], Space::H));
      for (std::size_t j = a + 1; j <= b; ++j) x[j] = y[j];
      tr.distances.push_back(dist);
      if (prev >= cfg.picard_tol) {
        const double ratio = dist / prev;
        tr.ratios.push_back(ratio);
        bad = ratio >= 1.0 ? bad + 1 : 0;
        if (bad >= 3) throw std::runtime_error("picard_solve: no contraction over 3 iterations");
      }
      prev = dist;
      if (dist <= cfg.picard_tol) {
        converged = true;
        break;
      }
    }
    if (!converged) throw std::runtime_error("picard_solve: iteration limit reached");
  }

  // Energy and h_max of the converged path, recomputed with the final drifts.
  sol.h_max = norm(x[ri], Space::H);
  HVector tmp(model.dim());
  for (std::size_t j = ri; j < ri + n; ++j) {
    st.step(x[j], sol.drift[j - ri], tmp, sol.v_energy);
    sol.h_max = std::max(sol.h_max, norm(x[j + 1], Space::H));
  }
  sol.path = Path(TimeGrid::with_step(t0, dt, ri + n), std::move(x));
  return sol;
}

double flow_check(const Model& model, const Path& xi, double t, const ControlSchedule& theta, const NoiseState& w,
                  const SolverConfig& cfg) {
  const StateSolution ref = solve_state(model, xi, theta, w, cfg);
  const TimeGrid& g = ref.path.grid();
  const std::size_t last = g.n_steps;
  if (t < xi.end_time() - kTimeTol || t > model.horizon() + kTimeTol) {
    throw std::invalid_argument("flow_check: t must lie in [r, T]");
  }

  if (g.is_node(t)) {
    const std::size_t ti = g.index_of(t);
    const StateSolution re = solve_state(model, ref.path.truncated(ti), theta, w, cfg);
    double gap = 0.0;
    for (std::size_t j = ti; j <= last; ++j) {
      gap = std::max(gap, norm(ref.path.values()[j] - re.path.values()[j], Space::H));
    }
    return gap;
  }

  // Off-grid restart: refine dyadically until t is a node, resample the
  // computed history and the noise, and compare on the coarse nodes after t.
  std::size_t q = 2;
  for (; q <= (std::size_t{1} << 12); q *= 2) {
    if (TimeGrid::with_step(g.t0, g.dt() / static_cast<double>(q), last * q).is_node(t)) break;
  }
  if (q > (std::size_t{1} << 12)) throw std::invalid_argument("flow_check: t is not a dyadic refinement node");
  const double fdt = g.dt() / static_cast<double>(q);
  const TimeGrid fine_hist = TimeGrid::with_step(g.t0, fdt, steps_between(g.t0, t, fdt));
  const Path hist = resample(ref.path.view(), fine_hist);

  NoiseState fw(TimeGrid::with_step(w.t0, fdt, (w.n_nodes() - 1) * q), w.m);
  for (std::size_t k = 0; k < fw.n_nodes(); ++k) {
    for (std::size_t j = 0; j < w.m; ++j) fw.w(k, j) = w.at(fw.t0 + fdt * static_cast<double>(k), j);
  }
  if (!w.eta.empty()) model.advance_noise(fw, 0, fw.n_nodes() - 1);

  const StateSolution re = solve_state(model, hist, theta, fw, cfg);
  double gap = 0.0;
  for (std::size_t j = g.floor_index(t) + 1; j <= last; ++j) {
    const HVector& xr = ref.path.values()[j];
    const HVector& xf = re.path.at(g.node(j));
    gap = std::max(gap, norm(xr - xf, Space::H));
  }
  return gap;
}

double path_cost(const Model& model, const StateSolution& sol, const ControlSchedule& theta, const NoiseState& w) {
  const Path& p = sol.path;
  const double dt = p.grid().dt();
  const double t0 = p.grid().t0;
  double J = 0.0;
  for (std::size_t j = sol.start_index; j < p.grid().n_steps; ++j) {
    const double s = t0 + dt * static_cast<double>(j);
    J += dt * model.f(s, p.view_until(j), theta.at(s), w);
  }
  return J + model.G(p.view(), w);
}

EstimateConstants EstimateConstants::compute(double L, double T, const GelfandConstants& gc) {
  EstimateConstants k;
  const double c1p = gc.c1_plus();
  k.K2_ii = std::max(2.0, 2.0 * L * T) * std::exp(2.0 * (L + c1p) * T);
  k.Kbar_iii = 1.0 + std::sqrt(2.0 * T * gc.c * gc.c * L * L + 2.0 * gc.c3 * gc.c3 * k.K2_ii / gc.c2);
  k.K_iv = std::sqrt(3.0) * std::exp(1.5 * T * (2.0 * L * L / gc.c2 + c1p));
  k.Ktilde_v = std::max(8.0 * L * L, 8.0);
  return k;
}

void EstimateCheck::add(double lhs, double rhs) {
  ++n;
  if (lhs > rhs) ++violations;
  if (rhs > 0.0) max_ratio = std::max(max_ratio, lhs / rhs);
}

bool EstimateReport::passed() const {
  return ii.violations == 0 && iii.violations == 0 && iv.violations == 0 && v.violations == 0 && vi_spread < 0.01;
}

void check_ii(const ProblemInstance& inst, const Path& xi, const ControlSchedule& th, const NoiseState& w,
              const EstimateConstants& k, EstimateCheck& out) {
  const StateSolution s = solve_state(inst, xi, th, w);
  const double lhs = s.h_max * s.h_max + inst.constants.c2 * s.v_energy;
  const double xn = sup_norm(xi, Space::H);
  out.add(lhs, k.K2_ii * (1.0 + xn * xn));
}

void check_iii(const ProblemInstance& inst, const Path& xi, const ControlSchedule& th, const NoiseState& w,
               const EstimateConstants& k, EstimateCheck& out) {
  const StateSolution s = solve_state(inst, xi, th, w);
  const auto& v = s.path.values();
  const double dt = s.path.grid().dt();
  const double scale = k.Kbar_iii * (1.0 + sup_norm(xi, Space::H));
  // d_{0,V*}(X_s, X_t) = sqrt(s-t) + max_{tau in [t,s]} |X(tau) - X(t)|_{V*}.
  for (std::size_t a = s.start_index; a < v.size(); ++a) {
    double run = 0.0;
    for (std::size_t b = a + 1; b < v.size(); ++b) {
      run = std::max(run, norm(v[b] - v[a], Space::Vstar));
      const double gap = std::sqrt(dt * static_cast<double>(b - a));
      out.add(gap + run, scale * gap);
    }
  }
}

double check_iv(const ProblemInstance& inst, const Path& xi, const Path& xi_hat, const ControlSchedule& th,
                const NoiseState& w, const EstimateConstants& k, EstimateCheck& out) {
  const StateSolution a = solve_state(inst, xi, th, w);
  const StateSolution b = solve_state(inst, xi_hat, th, w);
  const std::size_t ri = a.start_index;
  const auto& va = a.path.values();
  const auto& vb = b.path.values();
  const double dt = a.path.grid().dt();
  const ExpStepper ex(inst.D, dt);
  double hmax = norm(va[ri] - vb[ri], Space::H);
  double energy = 0.0;
  for (std::size_t j = ri; j + 1 < va.size(); ++j) {
    // The difference solves the same linear equation with drift difference.
    energy += ex.v_energy(va[j] - vb[j], a.drift[j - ri] - b.drift[j - ri]);
    hmax = std::max(hmax, norm(va[j + 1] - vb[j + 1], Space::H));
  }
  const double lhs = hmax * hmax + inst.constants.c2 * energy;
  const double d = sup_distance(xi.view(), xi_hat.view(), Space::H);
  const double rhs = k.K_iv * k.K_iv * d * d;
  out.add(lhs, rhs);
  return rhs > 0.0 ? lhs / rhs : 0.0;
}

void check_v(const ProblemInstance& inst, const Path& xi, const ControlSchedule& th, const NoiseState& w,
             const EstimateConstants& k, EstimateCheck& out) {
  const StateSolution s = solve_state(inst, xi, th, w);
  const std::size_t ri = s.start_index;
  const HVector& x0 = s.path.values()[ri];
  const double dt = s.path.grid().dt();
  const ExpStepper ex(inst.D, dt);
  const double ax = norm(apply_A(x0), Space::H);
  const double T = inst.T;
  double hmax = 0.0;
  double energy = 0.0;
  const auto& v = s.path.values();
  for (std::size_t j = ri; j + 1 < v.size(); ++j) {
    energy += ex.v_energy(v[j], s.drift[j - ri], &x0);
    hmax = std::max(hmax, norm(v[j + 1] - x0, Space::H));
    const double len = dt * static_cast<double>(j + 1 - ri);
    const double lhs = hmax * hmax + inst.constants.c2 * energy;
    const double rhs = 2.0 * k.Ktilde_v * (1.0 + ax * ax) * len * len * std::exp(2.0 * inst.constants.c1_plus() * T);
    out.add(lhs, rhs);
  }
}

ControlSchedule random_schedule(std::size_t n_labels, std::size_t intervals, double t_start, double T, Rng& rng) {
  std::uniform_int_distribution<std::size_t> u(0, n_labels - 1);
  ControlSchedule c{t_start, T, {}};
  for (std::size_t i = 0; i < intervals; ++i) c.labels.push_back(u(rng));
  return c;
}

namespace {

struct DrawResult {
  EstimateCheck ii, iii, iv, v;
  double vi_spread = 0.0;
};

Path low_mode_constant(const ProblemInstance& inst, std::size_t k, Rng& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  HVector h(inst.D);
  for (std::size_t i = 0; i < std::min<std::size_t>(4, inst.D); ++i) h[i] = 0.5 * g(rng) / static_cast<double>(i + 1);
  return Path::constant(TimeGrid::with_step(0.0, inst.dt(), k), h);
}

}  // namespace

EstimateReport estimate_suite(const EstimateSuiteConfig& cfg, std::uint64_t seed, std::size_t workers) {
  EstimateReport rep;
  rep.constants = EstimateConstants::compute(cfg.L, cfg.T, laplacian_constants());
  rep.vi_controls = cfg.vi_controls;
  const EstimateConstants K = rep.constants;

  auto draws = parallel_map(cfg.draws, workers, [&](std::size_t i) {
    Rng rng = make_rng(seed, "estimates", i);
    InstanceOptions opt;
    opt.D = cfg.D;
    opt.T = cfg.T;
    opt.n_steps = cfg.n_steps;
    opt.L = cfg.L;
    const ProblemInstance inst = random_instance(rng, opt);
    const NoiseState w = inst.make_noise(derive_seed(seed, "estimates-noise", i));
    std::uniform_int_distribution<std::size_t> kd(0, cfg.n_steps / 2);
    const std::size_t k = kd(rng);
    const double r = inst.dt() * static_cast<double>(k);
    const double scale = std::pow(10.0, std::uniform_real_distribution<double>(-1.0, 0.5)(rng));
    const Path xi = random_probe_path(inst, k, scale, rng);
    const Path xi_hat = random_probe_path(inst, k, scale, rng);
    const ControlSchedule th = random_schedule(inst.U.size(), cfg.control_intervals, r, cfg.T, rng);

    DrawResult d;
    check_ii(inst, xi, th, w, K, d.ii);
    check_iii(inst, xi, th, w, K, d.iii);
    check_iv(inst, xi, xi_hat, th, w, K, d.iv);
    check_v(inst, low_mode_constant(inst, k, rng), th, w, K, d.v);

    // Control swap: small data keeps the feedback in its linear range, where the
    // (iv) ratio of the two trajectories cannot depend on the control.
    const Path sa = random_probe_path(inst, k, 0.05, rng);
    const Path sb = random_probe_path(inst, k, 0.05, rng);
    double lo = 0.0, hi = 0.0;
    for (std::size_t c = 0; c < cfg.vi_controls; ++c) {
      const ControlSchedule tc = random_schedule(inst.U.size(), cfg.control_intervals, r, cfg.T, rng);
      EstimateCheck tmp;
      const double ratio = check_iv(inst, sa, sb, tc, w, K, tmp);
      lo = c == 0 ? ratio : std::min(lo, ratio);
      hi = c == 0 ? ratio : std::max(hi, ratio);
    }
    d.vi_spread = hi > 0.0 ? (hi - lo) / hi : 0.0;
    return d;
  });

  auto merge = [](EstimateCheck& into, const EstimateCheck& from) {
    into.n += from.n;
    into.violations += from.violations;
    into.max_ratio = std::max(into.max_ratio, from.max_ratio);
  };
  for (const DrawResult& d : draws) {
    merge(rep.ii, d.ii);
    merge(rep.iii, d.iii);
    merge(rep.iv, d.iv);
    merge(rep.v, d.v);
    rep.vi_spread = std::max(rep.vi_spread, d.vi_spread);
  }
  return rep;
}

}  // namespace pathhjb
