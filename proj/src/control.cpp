#include "pathhjb/control.hpp"

#include "pathhjb/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace pathhjb {

namespace {

constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

std::size_t whole_steps(double span, double dt) {
  const double u = span / dt;
  const long long k = std::llround(u);
  if (k < 0 || std::abs(u - static_cast<double>(k)) > 1e-7) {
    throw std::invalid_argument("interval of length " + std::to_string(span) + " is not a whole number of steps");
  }
  return static_cast<std::size_t>(k);
}

// Zero Wiener path (with the shift process, if any) on the grid of xi extended to T.
NoiseState deterministic_noise(const Model& model, double dt) {
  NoiseState w(TimeGrid::with_step(0.0, dt, whole_steps(model.horizon(), dt)), 1);
  model.advance_noise(w, 0, w.n_nodes() - 1);
  return w;
}

}  // namespace

const char* to_string(ValueMode m) {
  switch (m) {
    case ValueMode::ExactTree: return "exact_tree";
    case ValueMode::Exhaustive: return "exhaustive";
    case ValueMode::MonteCarlo: return "monte_carlo";
    case ValueMode::Exact: return "exact";
  }
  return "?";
}

double cost_with_noise(const Model& model, const Path& xi, const ControlSchedule& theta, const NoiseState& w) {
  return path_cost(model, solve_state(model, xi, theta, w), theta, w);
}

ValueEstimate cost_J(const ProblemInstance& inst, const Path& xi, const ControlSchedule& theta, std::size_t n_mc,
                     std::uint64_t seed) {
  ValueEstimate e;
  if (!inst.is_random()) {
    e.value = cost_with_noise(inst, xi, theta, inst.make_zero_noise());
    e.mode = ValueMode::Exact;
    return e;
  }
  if (n_mc < 2) throw std::invalid_argument("cost_J: Monte Carlo needs at least 2 samples");
  double s = 0.0, s2 = 0.0;
  for (std::size_t i = 0; i < n_mc; ++i) {
    const double c = cost_with_noise(inst, xi, theta, inst.make_noise(derive_seed(seed, "cost", i)));
    s += c;
    s2 += c * c;
  }
  const double n = static_cast<double>(n_mc);
  e.value = s / n;
  const double var = std::max(0.0, (s2 - n * e.value * e.value) / (n - 1.0));
  e.stderr_ = std::sqrt(var / n);
  e.mode = ValueMode::MonteCarlo;
  e.n_samples = n_mc;
  return e;
}

OpenLoopResult value_open_loop(const Model& model, const Path& xi, std::size_t N_c, std::size_t workers,
                               std::size_t budget) {
  if (model.is_random()) throw std::invalid_argument("value_open_loop: instance must be deterministic");
  if (N_c == 0) throw std::invalid_argument("value_open_loop: N_c must be >= 1");
  const std::size_t nu = model.controls().size();
  std::size_t count = 1;
  for (std::size_t i = 0; i < N_c; ++i) {
    if (count > budget / nu) throw std::length_error("value_open_loop: search budget exceeded");
    count *= nu;
  }
  const NoiseState w = deterministic_noise(model, xi.grid().dt());
  const double r = xi.end_time();
  auto decode = [&](std::size_t idx) {
    ControlSchedule c{r, model.horizon(), std::vector<std::size_t>(N_c)};
    for (std::size_t i = N_c; i-- > 0;) {
      c.labels[i] = idx % nu;
      idx /= nu;
    }
    return c;
  };
  const std::vector<double> costs =
      parallel_map(count, workers, [&](std::size_t i) { return cost_with_noise(model, xi, decode(i), w); });
  OpenLoopResult out;
  std::size_t best = 0;
  for (std::size_t i = 1; i < count; ++i) {
    if (costs[i] < costs[best]) best = i;
  }
  out.value.value = costs[best];
  out.value.mode = ValueMode::Exhaustive;
  out.value.n_samples = count;
  out.argmin = decode(best);
  out.candidates = count;
  return out;
}

HamiltonianResult hamiltonian(const Model& model, double t, const PathView& x, const HVector& p, const NoiseState& w) {
  const double ax = pairing(apply_A(x.terminal()), p);
  HamiltonianResult r;
  for (std::size_t k = 0; k < model.controls().size(); ++k) {
    const double v = ax + pairing(model.beta(t, x, k, w), p) + model.f(t, x, k, w);
    if (k == 0 || v < r.value) {
      r.value = v;
      r.argmin = k;
    }
  }
  return r;
}

TreeShape::TreeShape(std::size_t levels_, std::size_t branching_, std::size_t budget)
    : levels(levels_), branching(branching_) {
  offsets.push_back(0);
  std::size_t width = 1;
  for (std::size_t l = 0; l <= levels; ++l) {
    if (offsets.back() + width > budget) {
      throw std::length_error("tree node budget exceeded (" + std::to_string(budget) + ")");
    }
    offsets.push_back(offsets.back() + width);
    width *= branching;
  }
}

std::size_t TreeShape::level_of(std::size_t node) const {
  for (std::size_t l = 0; l <= levels; ++l) {
    if (node < offsets[l + 1]) return l;
  }
  throw std::out_of_range("tree node out of range");
}

std::size_t TreeShape::child(std::size_t node, std::size_t c) const {
  const std::size_t l = level_of(node);
  return offsets[l + 1] + (node - offsets[l]) * branching + c;
}

TreeSolver::TreeSolver(const Model& model, const TreeConfig& cfg, const Path& xi, std::size_t start_level,
                       const NoiseState* noise_prefix)
    : model_(model),
      cfg_(cfg),
      start_(start_level),
      sub_(0),
      dt_(0),
      h_(0),
      stepper_(model.dim(), cfg.n_steps ? model.horizon() / static_cast<double>(cfg.n_steps)
                                        : model.horizon() / static_cast<double>(8 * std::max<std::size_t>(cfg.depth, 1))) {
  if (cfg_.depth == 0) throw std::invalid_argument("TreeSolver: depth must be >= 1");
  if (cfg_.n_steps == 0) cfg_.n_steps = 8 * cfg_.depth;
  if (cfg_.n_steps % cfg_.depth != 0) throw std::invalid_argument("TreeSolver: n_steps must be a multiple of depth");
  if (start_ > cfg_.depth) throw std::invalid_argument("TreeSolver: start level beyond depth");
  if (cfg_.b_dims > model.dim()) throw std::invalid_argument("TreeSolver: b_dims exceeds the state dimension");
  if (cfg_.m + cfg_.b_dims > 16) throw std::invalid_argument("TreeSolver: too many tree components");
  sub_ = cfg_.n_steps / cfg_.depth;
  dt_ = model.horizon() / static_cast<double>(cfg_.n_steps);
  h_ = model.horizon() / static_cast<double>(cfg_.depth);
  shape_ = TreeShape(cfg_.depth - start_, std::size_t{1} << (cfg_.m + cfg_.b_dims), cfg_.node_budget);

  const std::size_t k0 = start_ * sub_;
  if (xi.grid().n_steps != k0 || std::abs(xi.grid().dt() - dt_) > 1e-12 * dt_ || xi.grid().t0 != 0.0) {
    throw std::invalid_argument("TreeSolver: history must live on the fine grid [0, t_start]");
  }
  x_.assign(cfg_.n_steps + 1, HVector(model.dim()));
  for (std::size_t k = 0; k <= k0; ++k) x_[k] = xi.values()[k];
  if (xi.terminal_override()) x_[k0] = *xi.terminal_override();

  w_ = NoiseState(TimeGrid(0.0, model.horizon(), cfg_.n_steps), cfg_.m);
  if (noise_prefix && cfg_.m > 0) {
    if (noise_prefix->m < cfg_.m || noise_prefix->n_nodes() <= k0) {
      throw std::invalid_argument("TreeSolver: noise prefix too short");
    }
    for (std::size_t k = 0; k <= k0; ++k) {
      for (std::size_t j = 0; j < cfg_.m; ++j) w_.w(k, j) = noise_prefix->w(k, j);
    }
  }
  for (std::size_t k = k0 + 1; k < w_.n_nodes(); ++k) {
    for (std::size_t j = 0; j < cfg_.m; ++j) w_.w(k, j) = w_.w(k0, j);
  }
  model_.advance_noise(w_, 0, w_.n_nodes() - 1);

  wlev_.assign(cfg_.depth + 1, std::vector<double>(cfg_.m, 0.0));
  blev_.assign(cfg_.depth + 1, std::vector<double>(cfg_.b_dims, 0.0));
  for (std::size_t j = 0; j < cfg_.m; ++j) wlev_[start_][j] = w_.w(k0, j);
}

double TreeSolver::level_time(std::size_t level) const { return h_ * static_cast<double>(level); }

void TreeSolver::fill_cell_noise(std::size_t level) {
  const std::size_t a = level * sub_;
  for (std::size_t k = a + 1; k < a + sub_; ++k) {
    for (std::size_t j = 0; j < cfg_.m; ++j) w_.w(k, j) = wlev_[level][j];
  }
  if (sub_ > 1) model_.advance_noise(w_, a, a + sub_ - 1);
}

void TreeSolver::set_child(std::size_t level, std::size_t c, const HVector& xend) {
  const double s = std::sqrt(h_);
  const std::size_t k = (level + 1) * sub_;
  for (std::size_t j = 0; j < cfg_.m; ++j) {
    wlev_[level + 1][j] = wlev_[level][j] + (((c >> j) & 1u) ? s : -s);
    w_.w(k, j) = wlev_[level + 1][j];
  }
  model_.advance_noise(w_, k - 1, k);
  x_[k] = xend;
  for (std::size_t i = 0; i < cfg_.b_dims; ++i) {
    const double db = ((c >> (cfg_.m + i)) & 1u) ? s : -s;
    blev_[level + 1][i] = blev_[level][i] + db;
    x_[k][i] += cfg_.delta * db;
  }
}

double TreeSolver::integrate_cell(std::size_t level, std::size_t label, const ControlSchedule* sched) {
  double cost = 0.0;
  const std::size_t a = level * sub_;
  for (std::size_t k = a; k < a + sub_; ++k) {
    const double s = dt_ * static_cast<double>(k);
    const PathView view(0.0, dt_, std::span<const HVector>(x_.data(), k + 1));
    const std::size_t u = sched ? sched->at(s) : label;
    cost += dt_ * model_.f(s, view, u, w_);
    stepper_.step_into(x_[k], model_.beta(s, view, u, w_), x_[k + 1]);
  }
  return cost;
}

double TreeSolver::fresh_value(std::size_t level) {
  const std::size_t k = level * sub_;
  std::vector<HVector> hist(x_.begin(), x_.begin() + static_cast<std::ptrdiff_t>(k + 1));
  const Path xi(TimeGrid::with_step(0.0, dt_, k), std::move(hist));
  TreeSolver inner(model_, cfg_, xi, level, &w_);
  return inner.value();
}

double TreeSolver::recurse(std::size_t level, std::size_t node, Mode mode) {
  if (level == cfg_.depth) {
    const PathView full(0.0, dt_, std::span<const HVector>(x_));
    if (leaf_cb_ && mode != Mode::Policy) leaf_cb_(full, w_);
    const double g = model_.G(full, w_);
    if (mode == Mode::Policy && value_out_) (*value_out_)[node] = g;
    return g;
  }
  if (mode == Mode::TwoStage && level == stop_) return fresh_value(level);

  std::size_t next = kNone;
  double vnow = 0.0;
  if (mode == Mode::Martingale) vnow = fresh_value(level);

  fill_cell_noise(level);
  const std::size_t nb = shape_.branching;
  const std::size_t nu = model_.controls().size();
  const std::size_t kend = (level + 1) * sub_;

  auto run = [&](std::size_t label, const ControlSchedule* sched, Mode child_mode) {
    const double c = integrate_cell(level, label, sched);
    const HVector xend = x_[kend];
    double acc = 0.0;
    for (std::size_t ch = 0; ch < nb; ++ch) {
      set_child(level, ch, xend);
      acc += recurse(level + 1, shape_.child(node, ch), child_mode);
    }
    return c + acc / static_cast<double>(nb);
  };

  switch (mode) {
    case Mode::Min:
    case Mode::TwoStage:
    case Mode::Policy: {
      const Mode cm = mode == Mode::Policy ? Mode::Min : mode;
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t u = 0; u < nu; ++u) {
        const double v = run(u, nullptr, cm);
        if (v < best) {
          best = v;
          next = u;
        }
      }
      if (mode == Mode::Policy) {
        (*policy_out_)[node] = next;
        if (value_out_) (*value_out_)[node] = best;
        run(next, nullptr, Mode::Policy);
      }
      return best;
    }
    case Mode::Eval: return run((*policy_in_)[node], nullptr, Mode::Eval);
    case Mode::Schedule: return run(0, sched_, Mode::Schedule);
    case Mode::Martingale: {
      // Child values come back from the recursion; the drift compares them with V here.
      const double c = integrate_cell(level, (*policy_in_)[node], nullptr);
      const HVector xend = x_[kend];
      double acc = 0.0;
      for (std::size_t ch = 0; ch < nb; ++ch) {
        set_child(level, ch, xend);
        acc += recurse(level + 1, shape_.child(node, ch), Mode::Martingale);
      }
      const double drift = c + acc / static_cast<double>(nb) - vnow;
      MartingaleReport& r = *mreport_;
      r.max_violation = std::max(r.max_violation, -drift);
      r.max_drift = r.nodes == 0 ? drift : std::max(r.max_drift, drift);
      r.min_drift = r.nodes == 0 ? drift : std::min(r.min_drift, drift);
      ++r.nodes;
      return vnow;
    }
  }
  return 0.0;
}

double TreeSolver::value() { return recurse(start_, 0, Mode::Min); }

double TreeSolver::solve_policy(std::vector<std::size_t>& policy, std::vector<double>& node_value) {
  policy.assign(shape_.n_nodes(), kNone);
  node_value.assign(shape_.n_nodes(), std::numeric_limits<double>::quiet_NaN());
  policy_out_ = &policy;
  value_out_ = &node_value;
  const double v = recurse(start_, 0, Mode::Policy);
  policy_out_ = nullptr;
  value_out_ = nullptr;
  return v;
}

double TreeSolver::evaluate(const std::vector<std::size_t>& policy) {
  if (policy.size() < shape_.internal_nodes()) throw std::invalid_argument("TreeSolver: policy too short");
  policy_in_ = &policy;
  const double v = recurse(start_, 0, Mode::Eval);
  policy_in_ = nullptr;
  return v;
}

double TreeSolver::evaluate(const ControlSchedule& theta) {
  sched_ = &theta;
  const double v = recurse(start_, 0, Mode::Schedule);
  sched_ = nullptr;
  return v;
}

double TreeSolver::two_stage(std::size_t stop) {
  if (start_ + stop > cfg_.depth) throw std::invalid_argument("two_stage: stop level beyond depth");
  stop_ = start_ + stop;
  return recurse(start_, 0, Mode::TwoStage);
}

TreeSolver::MartingaleReport TreeSolver::supermartingale(const std::vector<std::size_t>& policy) {
  MartingaleReport r;
  policy_in_ = &policy;
  mreport_ = &r;
  recurse(start_, 0, Mode::Martingale);
  policy_in_ = nullptr;
  mreport_ = nullptr;
  r.max_violation = std::max(0.0, r.max_violation);
  return r;
}

ValueEstimate value_adapted_tree(const Model& model, const TreeConfig& cfg, const Path& xi, std::size_t start_level,
                                 std::vector<std::size_t>* policy) {
  TreeSolver s(model, cfg, xi, start_level);
  ValueEstimate e;
  e.mode = ValueMode::ExactTree;
  if (policy) {
    std::vector<double> vals;
    e.value = s.solve_policy(*policy, vals);
  } else {
    e.value = s.value();
  }
  e.n_samples = s.shape().n_nodes() - s.shape().internal_nodes();
  return e;
}

double check_dpp(const Model& model, const TreeConfig& cfg, const Path& xi, std::size_t t_level,
                 std::size_t that_level) {
  if (that_level < t_level || that_level > cfg.depth) throw std::invalid_argument("check_dpp: need t <= t_hat <= T");
  TreeSolver a(model, cfg, xi, t_level);
  const double v = a.value();
  TreeSolver b(model, cfg, xi, t_level);
  return std::abs(v - b.two_stage(that_level - t_level));
}

double brute_force_tree(const Model& model, const TreeConfig& cfg, const Path& xi, std::size_t start_level,
                        std::size_t max_internal) {
  TreeSolver s(model, cfg, xi, start_level);
  const std::size_t internal = s.shape().internal_nodes();
  if (internal > max_internal) throw std::length_error("brute_force_tree: too many internal nodes");
  const std::size_t nu = model.controls().size();
  std::size_t count = 1;
  for (std::size_t i = 0; i < internal; ++i) count *= nu;
  std::vector<std::size_t> pol(s.shape().n_nodes(), 0);
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t idx = 0; idx < count; ++idx) {
    std::size_t r = idx;
    for (std::size_t n = 0; n < internal; ++n) {
      pol[n] = r % nu;
      r /= nu;
    }
    best = std::min(best, s.evaluate(pol));
  }
  return best;
}

RegularityReport check_value_regularity(const ProblemInstance& inst, std::size_t n_probes, std::size_t depth,
                                        std::uint64_t seed, std::size_t workers) {
  if (inst.is_random()) throw std::invalid_argument("check_value_regularity: instance must be deterministic");
  RegularityReport rep;
  rep.bound = inst.L() * (inst.T + 1.0);
  rep.candidate_LV = EstimateConstants::compute(inst.L(), inst.T, inst.constants).K_iv * inst.L() * (1.0 + inst.T);
  TreeConfig cfg;
  cfg.depth = depth;
  cfg.m = 0;
  cfg.n_steps = inst.n_steps;
  const std::size_t sub = inst.n_steps / depth;

  struct Probe {
    double v = 0.0, v_pert = 0.0, dist = 0.0;
  };
  const auto res = parallel_map(n_probes, workers, [&](std::size_t i) {
    Rng rng = make_rng(seed, "regularity", i);
    const std::size_t level = std::uniform_int_distribution<std::size_t>(0, depth - 1)(rng);
    const double scale = std::pow(10.0, std::uniform_real_distribution<double>(-1.0, 0.5)(rng));
    const Path x = random_probe_path(inst, level * sub, scale, rng);
    const Path dx = random_probe_path(inst, level * sub, 0.05 * scale, rng);
    std::vector<HVector> yv;
    for (std::size_t k = 0; k < x.values().size(); ++k) yv.push_back(x.values()[k] + dx.values()[k]);
    const Path y(x.grid(), std::move(yv));
    Probe p;
    p.v = value_adapted_tree(inst, cfg, x, level).value;
    p.v_pert = value_adapted_tree(inst, cfg, y, level).value;
    p.dist = sup_distance(x.view(), y.view(), Space::H);
    return p;
  });
  for (const Probe& p : res) {
    rep.probes += 2;
    for (double v : {p.v, p.v_pert}) {
      rep.max_abs_value = std::max(rep.max_abs_value, std::abs(v));
      if (std::abs(v) > rep.bound) ++rep.bound_violations;
    }
    if (p.dist > 0.0) {
      ++rep.pairs;
      rep.max_lipschitz_ratio = std::max(rep.max_lipschitz_ratio, std::abs(p.v - p.v_pert) / p.dist);
    }
  }
  return rep;
}

}  // namespace pathhjb
