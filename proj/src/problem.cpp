#include "pathhjb/problem.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <stdexcept>

namespace pathhjb {

namespace {

constexpr double kBoundTol = 1e-12;

double clamp_abs(double x, double L) { return std::clamp(x, -L, L); }

HVector decaying_vector(std::size_t D, double h_norm) {
  HVector b(D);
  for (std::size_t i = 0; i < D; ++i) b[i] = 1.0 / static_cast<double>(i + 1);
  b *= h_norm / norm(b, Space::H);
  return b;
}

// Dual norm of a linear functional <p, .> with respect to the given path space.
double functional_norm(const HVector& p, Space sp) {
  return sp == Space::Vstar ? norm(p, Space::V) : norm(p, Space::H);
}

HVector random_direction(std::size_t D, std::size_t active, Rng& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  HVector v(D);
  for (std::size_t i = 0; i < std::min(active, D); ++i) v[i] = g(rng);
  const double n = norm(v, Space::H);
  if (n > 0.0) v *= 1.0 / n;
  return v;
}

}  // namespace

double ControlSet::max_abs() const {
  double m = 0.0;
  for (double v : values) m = std::max(m, std::abs(v));
  return m;
}

ControlSet ControlSet::from_values(std::vector<double> v) {
  if (v.empty()) throw std::invalid_argument("ControlSet: U must be nonempty");
  ControlSet u;
  u.values = std::move(v);
  for (double x : u.values) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", x);
    u.labels.emplace_back(buf);
  }
  return u;
}

ControlSet default_controls() { return ControlSet::from_values({-1.0, 0.0, 1.0}); }

NoiseState::NoiseState(const TimeGrid& grid, std::size_t m_)
    : t0(grid.t0), dt(grid.dt()), m(m_), nodes(grid.n_nodes()) {
  W.assign(grid.n_nodes() * m, 0.0);
}

std::size_t NoiseState::index(double s) const {
  const std::size_t n = n_nodes();
  if (n == 0) return 0;
  const double u = (s - t0) / dt;
  if (u <= 0.0) return 0;
  const std::size_t k = static_cast<std::size_t>(std::floor(u + 1e-9));
  return std::min(k, n - 1);
}

double NoiseState::at(double s, std::size_t j) const {
  if (j >= m) throw std::out_of_range("NoiseState: component index beyond m");
  return w(index(s), j);
}

NoiseState zero_noise(const TimeGrid& grid, std::size_t m) { return NoiseState(grid, m); }

NoiseState sample_wiener(const TimeGrid& grid, std::size_t m, std::uint64_t seed) {
  if (m == 0) throw std::invalid_argument("sample_wiener: m must be >= 1");
  NoiseState w(grid, m);
  Rng rng = make_rng(seed, "wiener", 0);
  std::normal_distribution<double> gauss(0.0, std::sqrt(grid.dt()));
  for (std::size_t k = 0; k < grid.n_steps; ++k) {
    for (std::size_t j = 0; j < m; ++j) w.w(k + 1, j) = w.w(k, j) + gauss(rng);
  }
  return w;
}

NoiseTree::NoiseTree(std::size_t depth, std::size_t m, double horizon, std::size_t node_budget)
    : depth_(depth), m_(m), horizon_(horizon) {
  if (depth == 0) throw std::invalid_argument("NoiseTree: depth must be >= 1");
  if (m > 16) throw std::invalid_argument("NoiseTree: m too large");
  const std::size_t b = branching();
  offsets_.push_back(0);
  std::size_t level_nodes = 1;
  for (std::size_t l = 0; l <= depth; ++l) {
    if (offsets_.back() + level_nodes > node_budget) {
      throw std::length_error("NoiseTree: node budget exceeded (" + std::to_string(node_budget) + ")");
    }
    offsets_.push_back(offsets_.back() + level_nodes);
    level_nodes *= b;
  }
  values_.assign(n_nodes() * m_, 0.0);
  for (std::size_t l = 0; l < depth; ++l) {
    for (std::size_t i = 0; i < level_size(l); ++i) {
      const std::size_t node = offsets_[l] + i;
      for (std::size_t c = 0; c < b; ++c) {
        const std::size_t ch = child(node, c);
        for (std::size_t j = 0; j < m_; ++j) values_[ch * m_ + j] = values_[node * m_ + j] + step(c, j);
      }
    }
  }
}

std::size_t NoiseTree::level_of(std::size_t node) const {
  for (std::size_t l = 0; l <= depth_; ++l) {
    if (node < offsets_[l + 1]) return l;
  }
  throw std::out_of_range("NoiseTree: node index out of range");
}

std::size_t NoiseTree::child(std::size_t node, std::size_t c) const {
  const std::size_t l = level_of(node);
  if (l >= depth_) throw std::out_of_range("NoiseTree: leaf has no children");
  return offsets_[l + 1] + (node - offsets_[l]) * branching() + c;
}

std::size_t NoiseTree::parent(std::size_t node) const {
  const std::size_t l = level_of(node);
  if (l == 0) throw std::out_of_range("NoiseTree: root has no parent");
  return offsets_[l - 1] + (node - offsets_[l]) / branching();
}

double NoiseTree::probability(std::size_t node) const {
  return std::ldexp(1.0, -static_cast<int>(m_ * level_of(node)));
}

double NoiseTree::step(std::size_t c, std::size_t j) const {
  const double s = std::sqrt(h());
  return ((c >> j) & 1U) ? s : -s;
}

NoiseTree build_noise_tree(std::size_t depth, std::size_t m, double horizon, std::size_t node_budget) {
  return NoiseTree(depth, m, horizon, node_budget);
}

const char* to_string(FKind k) {
  switch (k) {
    case FKind::Zero: return "zero";
    case FKind::Const: return "const";
    case FKind::Linear: return "linear";
    case FKind::CappedNorm: return "capped-norm";
    case FKind::Delay: return "delay";
  }
  return "?";
}

FKind fkind_from_string(const std::string& s) {
  if (s == "zero") return FKind::Zero;
  if (s == "const") return FKind::Const;
  if (s == "linear") return FKind::Linear;
  if (s == "capped-norm") return FKind::CappedNorm;
  if (s == "delay") return FKind::Delay;
  throw std::invalid_argument("unknown functional type '" + s + "'");
}

const char* to_string(ControlCost k) {
  switch (k) {
    case ControlCost::None: return "none";
    case ControlCost::Square: return "square";
    case ControlCost::Noise: return "noise";
  }
  return "?";
}

ControlCost control_cost_from_string(const std::string& s) {
  if (s == "none") return ControlCost::None;
  if (s == "square") return ControlCost::Square;
  if (s == "noise") return ControlCost::Noise;
  throw std::invalid_argument("unknown control cost '" + s + "'");
}

bool CoefficientSet::is_random() const {
  return f_control == ControlCost::Noise || g_noise != 0.0 || (eta_modes > 0 && eta_vol > 0.0);
}

void CoefficientSet::validate(const ControlSet& U) const {
  const std::size_t D = beta_drive.dim();
  auto fail = [&](const std::string& msg) { throw std::invalid_argument(name + ": " + msg); };
  if (!(L > 0.0)) fail("L must be positive");
  if (beta_probe.dim() != D || beta_dir.dim() != D || f_vec.dim() != D || g_vec.dim() != D) {
    fail("coefficient vectors must have the ambient dimension");
  }
  const double beta_bound = U.max_abs() * norm(beta_drive, Space::H) + beta_gain * 0.5 * L * norm(beta_dir, Space::H);
  if (beta_bound > L * (1.0 + kBoundTol)) fail("beta bound " + std::to_string(beta_bound) + " exceeds L");
  if (beta_gain < 0.0 || beta_gain > 1.0) fail("beta gain must lie in [0,1]");
  if (beta_gain > 0.0 && norm(beta_probe, Space::V) > 1.0 + kBoundTol) fail("beta probe must have |p|_V <= 1");
  if (beta_lag < 0.0 || beta_lag > 1.0) fail("beta lag must lie in [0,1]");

  auto check_state = [&](FKind kind, double c, const HVector& p, Space sp, const char* which) {
    switch (kind) {
      case FKind::Zero: break;
      case FKind::Const:
        if (std::abs(c) > L) fail(std::string(which) + " constant exceeds L");
        break;
      case FKind::Linear:
        if (functional_norm(p, lipschitz_space) > L * (1.0 + kBoundTol)) {
          fail(std::string(which) + " linear functional is not L-Lipschitz in the declared space");
        }
        break;
      case FKind::CappedNorm:
      case FKind::Delay:
        if (L < 1.0) fail(std::string(which) + " norm functional needs L >= 1");
        if (lipschitz_space == Space::Vstar && sp != Space::Vstar) {
          fail(std::string(which) + " norm must be taken in Vstar for a Vstar-Lipschitz instance");
        }
        break;
    }
  };
  check_state(f_kind, f_const, f_vec, f_space, "f");
  check_state(g_kind, g_const, g_vec, g_space, "G");
  if (eta_modes > D) fail("eta_modes exceeds D");
}

HVector CoefficientSet::lookup(const PathView& x, double s, const NoiseState& w) const {
  if (!uses_eta()) return x.at(s);
  if (w.eta.empty()) throw std::logic_error(name + ": OU shift requested but noise has no eta");
  return x.at(s) + w.eta[w.index(s)];
}

double CoefficientSet::state_term(FKind kind, double c, const HVector& p, Space sp, const PathView& x, double t,
                                  const NoiseState& w) const {
  switch (kind) {
    case FKind::Zero: return 0.0;
    case FKind::Const: return c;
    case FKind::Linear: return pairing(p, lookup(x, t, w));
    case FKind::CappedNorm: return std::min(L, norm(lookup(x, t, w), sp));
    case FKind::Delay: return std::min(L, norm(lookup(x, 0.5 * t, w), sp));
  }
  return 0.0;
}

HVector CoefficientSet::beta(double t, const PathView& x, double v, const NoiseState& w) const {
  HVector b = beta_drive * v;
  if (beta_gain > 0.0) {
    const double z = std::clamp(pairing(beta_probe, lookup(x, beta_lag * t, w)), -1.0, 1.0);
    b += beta_dir * (beta_gain * 0.5 * L * z);
  }
  return b;
}

double CoefficientSet::f(double t, const PathView& x, double v, const NoiseState& w) const {
  double s = state_term(f_kind, f_const, f_vec, f_space, x, t, w);
  switch (f_control) {
    case ControlCost::None: break;
    case ControlCost::Square: s += f_control_weight * v * v; break;
    case ControlCost::Noise: s += f_control_weight * v * w.at(t, 0); break;
  }
  return clamp_abs(s, L);
}

double CoefficientSet::G(const PathView& x, const NoiseState& w) const {
  const double T = x.end_time();
  double s = state_term(g_kind, g_const, g_vec, g_space, x, T, w);
  if (g_noise != 0.0) s += g_noise * w.at(T, 0);
  return clamp_abs(s, L);
}

void CoefficientSet::advance_noise(NoiseState& w, std::size_t from, std::size_t to) const {
  if (!uses_eta()) return;
  const std::size_t n = w.n_nodes();
  const std::size_t D = beta_drive.dim();
  if (w.eta.size() != n) w.eta.assign(n, HVector(D));
  const double decay = std::exp(-eta_rate * w.dt);
  for (std::size_t k = from + 1; k <= std::min(to, n - 1); ++k) {
    HVector e = w.eta[k - 1] * decay;
    if (w.m > 0) {
      for (std::size_t i = 0; i < eta_modes; ++i) e[i] += eta_vol * w.increment(k - 1, i % w.m);
    }
    w.eta[k] = std::move(e);
  }
}

HVector ProblemInstance::beta(double t, const PathView& x, std::size_t k, const NoiseState& w) const {
  HVector b = coeffs.beta(t, x, U[k], w);
  if (norm(b, Space::H) > coeffs.L * (1.0 + kBoundTol)) {
    throw std::runtime_error(name + ": |beta|_H exceeds the declared bound");
  }
  return b;
}

double ProblemInstance::f(double t, const PathView& x, std::size_t k, const NoiseState& w) const {
  return coeffs.f(t, x, U[k], w);
}

double ProblemInstance::G(const PathView& x, const NoiseState& w) const { return coeffs.G(x, w); }

NoiseState ProblemInstance::make_noise(std::uint64_t seed) const {
  NoiseState w = is_random() ? sample_wiener(grid(), std::max<std::size_t>(m, 1), seed) : zero_noise(grid(), m);
  coeffs.advance_noise(w, 0, w.n_nodes() - 1);
  return w;
}

NoiseState ProblemInstance::make_zero_noise() const {
  NoiseState w = zero_noise(grid(), m);
  coeffs.advance_noise(w, 0, w.n_nodes() - 1);
  return w;
}

void ProblemInstance::validate() const {
  if (coeffs.beta_drive.dim() != D) throw std::invalid_argument(name + ": coefficient dimension differs from D");
  if (!(T > 0.0)) throw std::invalid_argument(name + ": T must be positive");
  if (n_steps == 0) throw std::invalid_argument(name + ": n_steps must be positive");
  if (U.size() == 0) throw std::invalid_argument(name + ": U must be nonempty");
  if (coeffs.is_random() && m == 0) throw std::invalid_argument(name + ": random coefficients need m >= 1");
  coeffs.validate(U);
}

namespace {

ProblemInstance base_instance(const std::string& name, const InstanceOptions& opt) {
  ProblemInstance p;
  p.name = name;
  p.D = opt.D;
  p.T = opt.T;
  p.n_steps = opt.n_steps;
  p.m = opt.m;
  CoefficientSet& c = p.coeffs;
  c.name = name;
  c.L = opt.L;
  c.horizon = opt.T;
  c.beta_drive = HVector(opt.D);
  c.beta_probe = HVector(opt.D);
  c.beta_dir = HVector(opt.D);
  c.f_vec = HVector(opt.D);
  c.g_vec = HVector(opt.D);
  return p;
}

void delay_feedback(CoefficientSet& c, std::size_t D, double lag) {
  c.beta_drive = decaying_vector(D, 0.5 * c.L);
  c.beta_gain = 1.0;
  c.beta_lag = lag;
  c.beta_probe = HVector::unit(D, 0) * (1.0 / std::sqrt(1.0 + eigenvalue(0)));
  c.beta_dir = HVector::unit(D, 0);
}

}  // namespace

std::vector<std::string> builtin_names() {
  return {"null", "steer-1", "steer-1-g", "delay", "delay-vstar", "example21"};
}

ProblemInstance builtin_instance(const std::string& name, const InstanceOptions& opt) {
  ProblemInstance p = base_instance(name, opt);
  CoefficientSet& c = p.coeffs;
  const std::size_t D = opt.D;
  if (name == "null") {
    c.f_kind = FKind::Const;
    c.f_const = std::min(1.0, c.L);
  } else if (name == "steer-1" || name == "steer-1-g") {
    c.beta_drive = HVector::unit(D, 0) * std::min(1.0, c.L);
    c.g_kind = FKind::Linear;
    c.g_vec = HVector::unit(D, 0);
    if (name == "steer-1") {
      c.f_kind = FKind::Linear;
      c.f_vec = HVector::unit(D, 0);
    }
  } else if (name == "delay" || name == "delay-vstar") {
    delay_feedback(c, D, 0.5);
    c.f_kind = FKind::Delay;
    c.g_kind = FKind::Delay;
    if (name == "delay-vstar") {
      c.lipschitz_space = Space::Vstar;
      c.f_space = Space::Vstar;
      c.g_space = Space::Vstar;
    }
  } else if (name == "example21") {
    return example21_instance(4, 1.0, 0.5, opt);
  } else {
    throw std::invalid_argument("unknown instance '" + name + "'");
  }
  p.validate();
  return p;
}

ProblemInstance example21_instance(std::size_t eta_modes, double eta_rate, double eta_vol, const InstanceOptions& opt) {
  ProblemInstance p = base_instance("example21", opt);
  CoefficientSet& c = p.coeffs;
  delay_feedback(c, opt.D, 1.0);
  c.f_kind = FKind::CappedNorm;
  c.g_kind = FKind::CappedNorm;
  c.eta_modes = eta_modes;
  c.eta_rate = eta_rate;
  c.eta_vol = eta_vol;
  if (p.m == 0) p.m = 1;
  p.validate();
  return p;
}

ProblemInstance random_instance(Rng& rng, const InstanceOptions& opt) {
  ProblemInstance p = base_instance("random", opt);
  CoefficientSet& c = p.coeffs;
  const std::size_t D = opt.D;
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  c.beta_drive = random_direction(D, 4, rng) * (0.5 * c.L * u01(rng));
  c.beta_gain = u01(rng);
  c.beta_lag = u01(rng) < 0.5 ? 1.0 : 0.5;
  HVector probe = random_direction(D, 4, rng);
  c.beta_probe = probe * (1.0 / norm(probe, Space::V));
  c.beta_dir = random_direction(D, 4, rng);
  const FKind fk[] = {FKind::Const, FKind::Linear, FKind::CappedNorm, FKind::Delay};
  c.f_kind = fk[static_cast<std::size_t>(u01(rng) * 4.0) % 4];
  c.f_const = c.L * (2.0 * u01(rng) - 1.0);
  c.f_vec = random_direction(D, 4, rng) * (c.L * u01(rng));
  if (u01(rng) < 0.5) {
    c.f_control = ControlCost::Square;
    c.f_control_weight = 0.5 * u01(rng);
  }
  const FKind gk[] = {FKind::Linear, FKind::CappedNorm, FKind::Delay};
  c.g_kind = gk[static_cast<std::size_t>(u01(rng) * 3.0) % 3];
  c.g_vec = random_direction(D, 4, rng) * (c.L * u01(rng));
  p.validate();
  return p;
}

Path random_probe_path(const ProblemInstance& inst, std::size_t k, double scale, Rng& rng) {
  // Smooth random low-mode path: a few sinusoids in time per mode.
  std::normal_distribution<double> g(0.0, 1.0);
  const std::size_t modes = std::min<std::size_t>(8, inst.D);
  std::vector<double> a0(modes), a1(modes), fr(modes), ph(modes);
  for (std::size_t i = 0; i < modes; ++i) {
    a0[i] = g(rng) / static_cast<double>(i + 1);
    a1[i] = g(rng) / static_cast<double>(i + 1);
    fr[i] = 1.0 + 3.0 * std::abs(g(rng));
    ph[i] = g(rng);
  }
  const TimeGrid grid = TimeGrid::with_step(0.0, inst.dt(), k);
  return Path::from_function(grid, [&](double t) {
    HVector h(inst.D);
    for (std::size_t i = 0; i < modes; ++i) h[i] = scale * (a0[i] + a1[i] * std::sin(fr[i] * t + ph[i]));
    return h;
  });
}

LipschitzReport lipschitz_probe(const ProblemInstance& inst, std::size_t n_pairs, Space space, std::uint64_t seed) {
  if (n_pairs == 0) throw std::invalid_argument("lipschitz_probe: n_pairs must be >= 1");
  LipschitzReport r;
  const std::size_t n = inst.n_steps;
  for (std::size_t i = 0; i < n_pairs; ++i) {
    Rng rng = make_rng(seed, "lipschitz", i);
    std::uniform_int_distribution<std::size_t> kdist(1, n);
    const std::size_t k = kdist(rng);
    const double pert = std::pow(10.0, -3.0 * std::uniform_real_distribution<double>(0.0, 1.0)(rng));
    const Path x = random_probe_path(inst, k, 1.0, rng);
    const Path dx = random_probe_path(inst, k, pert, rng);
    std::vector<HVector> yv;
    for (std::size_t j = 0; j <= k; ++j) yv.push_back(x.values()[j] + dx.values()[j]);
    const Path y(x.grid(), std::move(yv));
    const NoiseState w = inst.make_noise(derive_seed(seed, "lipschitz-noise", i));
    const double d = sup_distance(x.view(), y.view(), space);
    if (d <= 0.0) continue;
    const double t = x.grid().t1;
    for (std::size_t u = 0; u < inst.U.size(); ++u) {
      const HVector db = inst.beta(t, x.view(), u, w) - inst.beta(t, y.view(), u, w);
      r.beta = std::max(r.beta, norm(db, space) / d);
      r.f = std::max(r.f, std::abs(inst.f(t, x.view(), u, w) - inst.f(t, y.view(), u, w)) / d);
    }
    if (k == n) r.G = std::max(r.G, std::abs(inst.G(x.view(), w) - inst.G(y.view(), w)) / d);
  }
  return r;
}

BoundReport bound_probe(const ProblemInstance& inst, std::size_t n_probes, std::uint64_t seed) {
  BoundReport r;
  const std::size_t n = inst.n_steps;
  for (std::size_t i = 0; i < n_probes; ++i) {
    Rng rng = make_rng(seed, "bound", i);
    std::uniform_int_distribution<std::size_t> kdist(1, n);
    const std::size_t k = (i % 4 == 0) ? n : kdist(rng);
    const double scale = std::pow(10.0, std::uniform_real_distribution<double>(-1.0, 1.0)(rng));
    const Path x = random_probe_path(inst, k, scale, rng);
    const NoiseState w = inst.make_noise(derive_seed(seed, "bound-noise", i));
    const double t = x.grid().t1;
    for (std::size_t u = 0; u < inst.U.size(); ++u) {
      r.beta = std::max(r.beta, norm(inst.coeffs.beta(t, x.view(), inst.U[u], w), Space::H));
      r.f = std::max(r.f, std::abs(inst.f(t, x.view(), u, w)));
    }
    if (k == n) r.G = std::max(r.G, std::abs(inst.G(x.view(), w)));
  }
  return r;
}

}  // namespace pathhjb
