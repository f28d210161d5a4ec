#include "pathhjb/approx.hpp"

#include "pathhjb/calculus.hpp"
#include "pathhjb/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace pathhjb {

namespace {

bool freezing_disabled(unsigned M, std::size_t n) { return M >= 63 || (std::size_t{1} << M) >= n; }

void check_partition(std::size_t N, unsigned M, std::size_t n) {
  if (N == 0 || n == 0) throw std::invalid_argument("approx: N and n_steps must be positive");
  const std::size_t cells = freezing_disabled(M, n) ? N : N * (std::size_t{1} << M);
  if (n % cells != 0) {
    throw std::invalid_argument("approx: n_steps = " + std::to_string(n) + " is not a multiple of N 2^M = " +
                                std::to_string(cells));
  }
}

Path constant_anchor(const HVector& x0, double dt) { return Path(TimeGrid::with_step(0.0, dt, 0), {x0}); }

double l2(const std::vector<double>& e, double dt) {
  double s = 0.0;
  for (double v : e) s += dt * v * v;
  return std::sqrt(s);
}

// Standard error of a mean over batch values.
double batch_sigma(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  double m = 0.0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  s /= static_cast<double>(v.size() - 1);
  return std::sqrt(s / static_cast<double>(v.size()));
}

}  // namespace

void ApproxConfig::validate(const Model& model) const {
  check_partition(N, M, n_steps);
  if (d == 0 || d > model.dim()) throw std::invalid_argument("approx: d must lie in [1, D]");
  if (E == 0 || batches == 0 || E % batches != 0) throw std::invalid_argument("approx: E must be a multiple of batches");
  if (x0.dim() != 0 && x0.dim() != model.dim()) throw std::invalid_argument("approx: x0 has the wrong dimension");
  if (k < 0.0) throw std::invalid_argument("approx: k must be nonnegative");
}

FrozenModel::FrozenModel(const Model& base, std::size_t N, unsigned M, std::size_t d, std::size_t n_steps)
    : base_(base), N_(N), M_(M), d_(d), n_(n_steps), dt_(base.horizon() / static_cast<double>(n_steps)) {
  check_partition(N, M, n_steps);
  if (d == 0 || d > base.dim()) throw std::invalid_argument("FrozenModel: d must lie in [1, D]");
}

std::size_t FrozenModel::anchor_index(double t) const {
  const double u = t / dt_;
  std::size_t k = static_cast<std::size_t>(std::floor(u + 1e-9));
  k = std::min(k, n_);
  const std::size_t cell = n_ / N_;
  return (k / cell) * cell;
}

double FrozenModel::anchor_time(double t) const {
  const std::size_t k = anchor_index(t);
  return k == n_ ? base_.horizon() : dt_ * static_cast<double>(k);
}

void FrozenModel::check_grid(const PathView& x) const {
  if (std::abs(x.dt() - dt_) > 1e-12 * dt_ || x.t0() != 0.0) {
    throw std::invalid_argument("FrozenModel: path is not on the model grid");
  }
}

PathView FrozenModel::frozen_prefix(const PathView& x, std::size_t idx) const {
  const PathView p = x.prefix(idx);
  if (freezing_disabled(M_, n_) || idx == 0) return p;
  return p.with_stride(std::max<std::size_t>(1, idx >> M_));
}

HVector FrozenModel::beta(double t, const PathView& x, std::size_t k, const NoiseState& w) const {
  check_grid(x);
  const std::size_t a = anchor_index(t);
  return project(base_.beta(anchor_time(t), frozen_prefix(x, a), k, w), d_);
}

double FrozenModel::f(double t, const PathView& x, std::size_t k, const NoiseState& w) const {
  check_grid(x);
  const std::size_t a = anchor_index(t);
  return base_.f(anchor_time(t), frozen_prefix(x, a), k, w);
}

double FrozenModel::G(const PathView& x, const NoiseState& w) const {
  check_grid(x);
  return base_.G(frozen_prefix(x, x.last_index()), w);
}

void ErrorProcesses::merge(const ErrorProcesses& o) {
  if (f.empty()) {
    *this = o;
    return;
  }
  if (o.f.size() != f.size()) throw std::invalid_argument("ErrorProcesses: size mismatch");
  for (std::size_t k = 0; k < f.size(); ++k) {
    f[k] = std::max(f[k], o.f[k]);
    beta[k] = std::max(beta[k], o.beta[k]);
  }
  G = std::max(G, o.G);
}

double ErrorProcesses::f_l2() const { return l2(f, dt); }
double ErrorProcesses::beta_l2() const { return l2(beta, dt); }

void accumulate_errors(const Model& base, const FrozenModel& frozen, const PathView& x, const NoiseState& w,
                       ErrorProcesses& out) {
  const std::size_t n = x.last_index();
  if (out.f.size() != n) throw std::invalid_argument("accumulate_errors: error arrays do not match the path");
  const std::size_t nu = base.controls().size();
  for (std::size_t k = 0; k < n; ++k) {
    const double t = x.dt() * static_cast<double>(k);
    const PathView v = x.prefix(k);
    for (std::size_t u = 0; u < nu; ++u) {
      out.f[k] = std::max(out.f[k], std::abs(frozen.f(t, v, u, w) - base.f(t, v, u, w)));
      out.beta[k] = std::max(out.beta[k], norm(frozen.beta(t, v, u, w) - base.beta(t, v, u, w), Space::Vstar));
    }
  }
  out.G = std::max(out.G, std::abs(frozen.G(x, w) - base.G(x, w)));
}

std::vector<Path> class_ensemble(const ApproxConfig& cfg, double T, std::size_t D, std::uint64_t seed) {
  const double dt = T / static_cast<double>(cfg.n_steps);
  const HVector x0 = cfg.x0.dim() == D ? cfg.x0 : HVector(D);
  PathClassSpec spec{cfg.k, constant_anchor(x0, dt), T, 8};
  std::vector<Path> out;
  out.reserve(cfg.E);
  for (std::size_t i = 0; i < cfg.E; ++i) {
    Rng rng = make_rng(seed, "approx-ensemble", i);
    out.push_back(sample_path_class(spec, rng).path);
  }
  return out;
}

ApproxErrorReport measure_errors(const ProblemInstance& inst, const ApproxConfig& cfg, const std::vector<Path>& ensemble,
                                 std::uint64_t seed, std::size_t workers) {
  cfg.validate(inst);
  if (ensemble.empty() || ensemble.size() % cfg.batches != 0) {
    throw std::invalid_argument("measure_errors: ensemble size must be a positive multiple of batches");
  }
  const std::size_t n = cfg.n_steps;
  const double dt = inst.T / static_cast<double>(n);
  const FrozenModel frozen(inst, cfg.N, cfg.M, cfg.d, n);
  const TimeGrid grid(0.0, inst.T, n);

  struct One {
    ErrorProcesses e;
    double gap = 0.0;
  };
  const auto per = parallel_map(ensemble.size(), workers, [&](std::size_t i) {
    const Path& x = ensemble[i];
    if (x.grid().n_steps != n) throw std::invalid_argument("measure_errors: ensemble path on the wrong grid");
    NoiseState w = inst.is_random() ? sample_wiener(grid, inst.m, derive_seed(seed, "approx-noise", i))
                                    : zero_noise(grid, inst.m);
    inst.advance_noise(w, 0, n);
    One o{ErrorProcesses(n, dt), 0.0};
    accumulate_errors(inst, frozen, x.view(), w, o.e);
    if (!freezing_disabled(cfg.M, n)) o.gap = sup_distance(x.view(), stepwise_project(x, cfg.M).view(), Space::Vstar);
    return o;
  });

  ApproxErrorReport r;
  r.errors = ErrorProcesses(n, dt);
  const std::size_t per_batch = ensemble.size() / cfg.batches;
  std::vector<double> bf, bb, bg;
  for (std::size_t b = 0; b < cfg.batches; ++b) {
    ErrorProcesses eb(n, dt);
    for (std::size_t i = b * per_batch; i < (b + 1) * per_batch; ++i) eb.merge(per[i].e);
    bf.push_back(eb.f_l2());
    bb.push_back(eb.beta_l2());
    bg.push_back(eb.G);
    r.errors.merge(eb);
  }
  for (const One& o : per) r.freeze_gap = std::max(r.freeze_gap, o.gap);
  r.f_agg = r.errors.f_l2();
  r.beta_agg = r.errors.beta_l2();
  r.G_agg = r.errors.G;
  r.f_sigma = batch_sigma(bf);
  r.beta_sigma = batch_sigma(bb);
  r.G_sigma = batch_sigma(bg);

  const HVector x0 = cfg.x0.dim() == inst.D ? cfg.x0 : HVector(inst.D);
  const double x0n = norm(x0, Space::H);
  r.budget_ratio = (r.f_agg + r.beta_agg + r.G_agg) / ((1.0 + cfg.k) * (1.0 + x0n));
  if (!freezing_disabled(cfg.M, n)) {
    const double Kbar = EstimateConstants::compute(cfg.k, inst.T, inst.constants).Kbar_iii;
    r.freeze_bound = Kbar * (1.0 + x0n) * std::sqrt(inst.T / std::ldexp(1.0, static_cast<int>(cfg.M)));
    for (const One& o : per) r.freeze_violations += o.gap > r.freeze_bound ? 1 : 0;
  }
  r.coeff_bound = (inst.L() + 1.0) * r.freeze_bound;
  return r;
}

std::vector<ProjectionRow> projection_error_sup(const ProblemInstance& inst, const std::vector<std::size_t>& d_list,
                                                const std::vector<Path>& ensemble, std::uint64_t seed) {
  const std::size_t D = inst.D;
  HVector h(D);
  for (std::size_t i = 0; i < std::min<std::size_t>(8, D); ++i) h[i] = 1.0 / static_cast<double>(i + 1);

  // Collect beta outputs along the ensemble (every fourth node, every control).
  std::vector<HVector> outs;
  for (std::size_t i = 0; i < ensemble.size(); ++i) {
    const Path& x = ensemble[i];
    const TimeGrid& g = x.grid();
    NoiseState w = inst.is_random() ? sample_wiener(g, inst.m, derive_seed(seed, "approx-noise", i))
                                    : zero_noise(g, inst.m);
    inst.advance_noise(w, 0, g.n_steps);
    for (std::size_t k = 0; k < g.n_steps; k += 4) {
      const PathView v = x.view_until(k);
      for (std::size_t u = 0; u < inst.U.size(); ++u) outs.push_back(inst.beta(g.node(k), v, u, w));
    }
  }

  std::vector<ProjectionRow> rows;
  for (std::size_t d : d_list) {
    if (d == 0 || d > D) throw std::invalid_argument("projection_error_sup: d out of range");
    ProjectionRow r;
    r.d = d;
    for (const HVector& b : outs) r.ensemble_sup = std::max(r.ensemble_sup, norm(project(b, d) - b, Space::Vstar));
    r.witness = norm(project(h, d) - h, Space::Vstar);
    r.witness_bound = d < D ? norm(h, Space::H) / std::sqrt(1.0 + eigenvalue(d)) : 0.0;
    rows.push_back(r);
  }
  return rows;
}

std::vector<double> correction_process(const ErrorProcesses& e, double C1) {
  const std::size_t n = e.f.size();
  std::vector<double> Y(n + 1);
  Y[n] = e.G;
  for (std::size_t k = n; k-- > 0;) Y[k] = Y[k + 1] + e.dt * (e.f[k] + C1 * e.beta[k]);
  return Y;
}

double b_correction(std::size_t depth, std::size_t level, std::size_t d, std::size_t n_steps, double T) {
  if (depth == 0 || level > depth || n_steps % depth != 0) throw std::invalid_argument("b_correction: bad tree shape");
  const std::size_t steps = depth - level;
  if (d * steps > 24) throw std::invalid_argument("b_correction: too many scenarios");
  const double h = T / static_cast<double>(depth);
  const double s = std::sqrt(h);
  const std::size_t n_sc = std::size_t{1} << (d * steps);
  double total = 0.0;
  std::vector<double> B(d);
  for (std::size_t sc = 0; sc < n_sc; ++sc) {
    std::fill(B.begin(), B.end(), 0.0);
    double runmax = 0.0;
    double acc = 0.0;
    for (std::size_t l = 0; l < steps; ++l) {
      acc += h * runmax;  // B is constant on the cell, jumps at its right end
      double n2 = 0.0;
      for (std::size_t i = 0; i < d; ++i) {
        B[i] += ((sc >> (l * d + i)) & 1u) ? s : -s;
        n2 += B[i] * B[i];
      }
      runmax = std::max(runmax, std::sqrt(n2));
    }
    total += runmax + acc;
  }
  return total / static_cast<double>(n_sc);
}

RegularizedValue regularized_value(const FrozenModel& frozen, const TreeConfig& tree, const Path& x,
                                   std::size_t level, double fd_step) {
  TreeConfig cfg = tree;
  cfg.b_dims = frozen.d();
  const Path xp = project_path(x, frozen.d());
  RegularizedValue r;
  r.value = TreeSolver(frozen, cfg, xp, level).value();
  HVector g(frozen.dim());
  for (std::size_t i = 0; i < frozen.d(); ++i) {
    const HVector e = HVector::unit(frozen.dim(), i) * fd_step;
    const double vp = TreeSolver(frozen, cfg, vertical_perturb(xp, e), level).value();
    const double vm = TreeSolver(frozen, cfg, vertical_perturb(xp, e * -1.0), level).value();
    g[i] = (vp - vm) / (2.0 * fd_step);
  }
  r.grad_V = norm(g, Space::V);
  return r;
}

SandwichReport sandwich_check(const ProblemInstance& inst, const SandwichConfig& cfg, std::uint64_t seed,
                              std::size_t workers) {
  const ApproxConfig& ac = cfg.approx;
  ac.validate(inst);
  const std::size_t n = ac.n_steps;
  if (n % cfg.depth != 0) throw std::invalid_argument("sandwich: n_steps must be a multiple of depth");
  if (cfg.probe_level_min > cfg.probe_level_max || cfg.probe_level_max >= cfg.depth) {
    throw std::invalid_argument("sandwich: probe levels must lie below the tree depth");
  }
  const std::size_t sub = n / cfg.depth;
  const double dt = inst.T / static_cast<double>(n);
  const HVector x0 = ac.x0.dim() == inst.D ? ac.x0 : HVector(inst.D);

  TreeConfig base;
  base.depth = cfg.depth;
  base.m = inst.is_random() ? inst.m : 0;
  base.n_steps = n;
  const FrozenModel frozen(inst, ac.N, ac.M, ac.d, n);

  // Probe histories from the path class.
  struct Probe {
    Path hist;
    std::size_t level;
  };
  std::vector<Probe> probes;
  const std::size_t span = cfg.probe_level_max - cfg.probe_level_min + 1;
  for (std::size_t i = 0; i < cfg.n_probes; ++i) {
    const std::size_t level = cfg.probe_level_min + i % span;
    Rng rng = make_rng(seed, "sandwich-probe", i);
    PathClassSpec spec{ac.k, constant_anchor(x0, dt), dt * static_cast<double>(level * sub), 8};
    probes.push_back({sample_path_class(spec, rng).path, level});
  }

  SandwichReport rep;
  rep.L_c = inst.L();

  // Unfrozen values; every controlled trajectory joins the error ensemble.
  ErrorProcesses errors = measure_errors(inst, ac, class_ensemble(ac, inst.T, inst.D, seed), seed, workers).errors;
  std::vector<double> V(probes.size());
  for (std::size_t i = 0; i < probes.size(); ++i) {
    TreeSolver ts(inst, base, probes[i].hist, probes[i].level);
    ts.set_leaf_callback([&](const PathView& x, const NoiseState& w) { accumulate_errors(inst, frozen, x, w, errors); });
    V[i] = ts.value();
  }
  rep.errors = errors;

  // V^eps and its gradient for every delta and probe.
  std::vector<std::vector<RegularizedValue>> reg(cfg.deltas.size());
  for (std::size_t j = 0; j < cfg.deltas.size(); ++j) {
    TreeConfig tc = base;
    tc.delta = cfg.deltas[j];
    reg[j] = parallel_map(probes.size(), workers, [&](std::size_t i) {
      return regularized_value(frozen, tc, probes[i].hist, probes[i].level);
    });
    double lt = 0.0;
    for (const auto& r : reg[j]) lt = std::max(lt, r.grad_V);
    rep.L_tilde_by_delta.push_back(lt);
  }
  rep.L_tilde = rep.L_tilde_by_delta.empty()
                    ? 0.0
                    : *std::max_element(rep.L_tilde_by_delta.begin(), rep.L_tilde_by_delta.end());
  if (rep.L_tilde > 0.0) {
    const double lo = *std::min_element(rep.L_tilde_by_delta.begin(), rep.L_tilde_by_delta.end());
    rep.grad_spread = (rep.L_tilde - lo) / rep.L_tilde;
  }
  rep.C1 = rep.L_tilde;
  rep.C2 = 4.0 * rep.L_c * (rep.L_tilde + 1.0);
  const std::vector<double> Y = correction_process(errors, rep.C1);

  for (std::size_t j = 0; j < cfg.deltas.size(); ++j) {
    const double delta = cfg.deltas[j];
    double gsum = 0.0;
    for (std::size_t i = 0; i < probes.size(); ++i) {
      SandwichRow row;
      row.delta = delta;
      row.probe = i;
      row.t = dt * static_cast<double>(probes[i].level * sub);
      row.V = V[i];
      row.V_eps = reg[j][i].value;
      row.Y = Y[probes[i].level * sub];
      row.y = b_correction(cfg.depth, probes[i].level, ac.d, n, inst.T);
      const double half = row.Y + delta * rep.C2 * row.y;
      row.lower = row.V_eps - half;
      row.upper = row.V_eps + half;
      row.gap = row.upper - row.lower;
      row.ordered = row.lower <= row.V && row.V <= row.upper;
      if (!row.ordered) ++rep.violations;
      const double need = std::abs(row.V - row.V_eps) - delta * rep.C2 * row.y;
      if (row.Y > 0.0) rep.required_inflation = std::max(rep.required_inflation, need / row.Y);
      else if (need > 0.0) rep.required_inflation = std::numeric_limits<double>::infinity();
      gsum += row.gap;
      rep.rows.push_back(row);
    }
    rep.mean_gap.push_back(gsum / static_cast<double>(probes.size()));
  }
  // Deltas are listed in decreasing order; the mean gap must not grow.
  for (std::size_t j = 1; j < rep.mean_gap.size(); ++j) {
    if (cfg.deltas[j] <= cfg.deltas[j - 1] && rep.mean_gap[j] > rep.mean_gap[j - 1] + 1e-12) {
      rep.gap_nonincreasing = false;
    }
  }

  // Degenerate case: no freezing, no projection, delta = 0.
  const FrozenModel identity(inst, n, 63, inst.D, n);
  ErrorProcesses e0(n, dt);
  for (std::size_t i = 0; i < probes.size(); ++i) {
    TreeSolver ts(identity, base, probes[i].hist, probes[i].level);
    ts.set_leaf_callback([&](const PathView& x, const NoiseState& w) { accumulate_errors(inst, identity, x, w, e0); });
    const double v0 = ts.value();
    rep.degenerate_error = std::max(rep.degenerate_error, std::abs(v0 - V[i]));
  }
  const std::vector<double> Y0 = correction_process(e0, rep.C1);
  for (const Probe& p : probes) rep.degenerate_gap = std::max(rep.degenerate_gap, 2.0 * Y0[p.level * sub]);
  return rep;
}

bool nonincreasing_3sigma(const std::vector<double>& a, const std::vector<double>& s) {
  for (std::size_t i = 1; i < a.size(); ++i) {
    if (a[i] > a[i - 1] + 3.0 * std::sqrt(s[i] * s[i] + s[i - 1] * s[i - 1]) + 1e-15) return false;
  }
  return true;
}

ApproxStudy approx_study(const ProblemInstance& inst, const ApproxStudyConfig& cfg, std::uint64_t seed,
                         std::size_t workers) {
  ApproxStudy st;
  const std::vector<Path> ens = class_ensemble(cfg.base, inst.T, inst.D, seed);

  auto run = [&](const std::string& sweep, ApproxConfig c, const std::vector<Path>& e) {
    ApproxStudyRow row{sweep, c.N, c.M, c.d, c.k, measure_errors(inst, c, e, seed, workers)};
    st.freeze_violations += row.report.freeze_violations;
    st.rows.push_back(row);
    return row.report;
  };
  auto agg = [](const ApproxErrorReport& r) { return r.f_agg + r.beta_agg + r.G_agg; };
  auto sig = [](const ApproxErrorReport& r) {
    return std::sqrt(r.f_sigma * r.f_sigma + r.beta_sigma * r.beta_sigma + r.G_sigma * r.G_sigma);
  };

  std::vector<double> a, s;
  for (std::size_t N : cfg.N_list) {
    ApproxConfig c = cfg.base;
    c.N = N;
    const auto r = run("N", c, ens);
    a.push_back(agg(r));
    s.push_back(sig(r));
  }
  st.monotone_N = nonincreasing_3sigma(a, s);

  // M enters through the frozen path; the sweep tracks the freezing gap next to the coefficient errors.
  a.clear();
  s.clear();
  for (unsigned M : cfg.M_list) {
    ApproxConfig c = cfg.base;
    c.M = M;
    const auto r = run("M", c, ens);
    a.push_back(agg(r) + r.freeze_gap);
    s.push_back(sig(r));
  }
  st.monotone_M = nonincreasing_3sigma(a, s);

  a.clear();
  s.clear();
  for (std::size_t d : cfg.d_list) {
    ApproxConfig c = cfg.base;
    c.d = d;
    const auto r = run("d", c, ens);
    a.push_back(agg(r));
    s.push_back(sig(r));
  }
  st.monotone_d = nonincreasing_3sigma(a, s);

  std::vector<double> ks, ak;
  for (double k : cfg.k_list) {
    ApproxConfig c = cfg.base;
    c.k = k;
    const auto r = run("k", c, class_ensemble(c, inst.T, inst.D, seed));
    ks.push_back(k);
    ak.push_back(agg(r));
  }
  if (ks.size() >= 2) st.k_slope = loglog_slope(ks, ak);

  st.projection = projection_error_sup(inst, cfg.proj_d_list, ens, seed);
  for (std::size_t i = 0; i < st.projection.size(); ++i) {
    const ProjectionRow& r = st.projection[i];
    if (i > 0 && !(r.ensemble_sup < st.projection[i - 1].ensemble_sup)) st.projection_strict = false;
    if (r.d == inst.D && r.ensemble_sup != 0.0) st.projection_strict = false;
    if (r.witness > r.witness_bound + 1e-15) st.projection_strict = false;
  }
  return st;
}

}  // namespace pathhjb
