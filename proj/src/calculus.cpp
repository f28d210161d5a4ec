#include "pathhjb/calculus.hpp"

#include "pathhjb/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace pathhjb {

struct Expr::Node {
  Op op = Op::Const;
  double c = 0.0;
  std::size_t j = 0;
  int n = 0;
  std::shared_ptr<const Node> a, b;
};

namespace {

using NodeP = std::shared_ptr<const Expr::Node>;

bool is_const(const NodeP& n, double v) { return n->op == Expr::Op::Const && n->c == v; }

Interval imul(const Interval& x, const Interval& y) {
  const double p[4] = {x.lo * y.lo, x.lo * y.hi, x.hi * y.lo, x.hi * y.hi};
  return {*std::min_element(p, p + 4), *std::max_element(p, p + 4)};
}

// Range of sin over [lo, hi].
Interval isin(const Interval& x) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  if (x.hi - x.lo >= two_pi) return {-1.0, 1.0};
  double lo = std::min(std::sin(x.lo), std::sin(x.hi));
  double hi = std::max(std::sin(x.lo), std::sin(x.hi));
  // peaks at pi/2 + 2k pi, troughs at -pi/2 + 2k pi
  const double kp = std::ceil((x.lo - std::numbers::pi / 2) / two_pi);
  if (std::numbers::pi / 2 + kp * two_pi <= x.hi) hi = 1.0;
  const double kt = std::ceil((x.lo + std::numbers::pi / 2) / two_pi);
  if (-std::numbers::pi / 2 + kt * two_pi <= x.hi) lo = -1.0;
  return {lo, hi};
}

}  // namespace

Expr Expr::constant(double c) {
  auto n = std::make_shared<Node>();
  n->op = Op::Const;
  n->c = c;
  return Expr(n);
}

Expr Expr::time() {
  auto n = std::make_shared<Node>();
  n->op = Op::Time;
  return Expr(n);
}

Expr Expr::w(std::size_t j) {
  auto n = std::make_shared<Node>();
  n->op = Op::W;
  n->j = j;
  return Expr(n);
}

Expr Expr::z(std::size_t j) {
  auto n = std::make_shared<Node>();
  n->op = Op::Z;
  n->j = j;
  return Expr(n);
}

Expr operator+(const Expr& a, const Expr& b) {
  if (is_const(a.n_, 0.0)) return b;
  if (is_const(b.n_, 0.0)) return a;
  if (a.n_->op == Expr::Op::Const && b.n_->op == Expr::Op::Const) return Expr::constant(a.n_->c + b.n_->c);
  auto n = std::make_shared<Expr::Node>();
  n->op = Expr::Op::Add;
  n->a = a.n_;
  n->b = b.n_;
  return Expr(n);
}

Expr operator*(const Expr& a, const Expr& b) {
  if (is_const(a.n_, 0.0) || is_const(b.n_, 0.0)) return Expr::constant(0.0);
  if (is_const(a.n_, 1.0)) return b;
  if (is_const(b.n_, 1.0)) return a;
  if (a.n_->op == Expr::Op::Const && b.n_->op == Expr::Op::Const) return Expr::constant(a.n_->c * b.n_->c);
  auto n = std::make_shared<Expr::Node>();
  n->op = Expr::Op::Mul;
  n->a = a.n_;
  n->b = b.n_;
  return Expr(n);
}

Expr operator-(const Expr& a, const Expr& b) { return a + Expr::constant(-1.0) * b; }

Expr sin(const Expr& a) {
  if (a.n_->op == Expr::Op::Const) return Expr::constant(std::sin(a.n_->c));
  auto n = std::make_shared<Expr::Node>();
  n->op = Expr::Op::Sin;
  n->a = a.n_;
  return Expr(n);
}

Expr cos(const Expr& a) {
  if (a.n_->op == Expr::Op::Const) return Expr::constant(std::cos(a.n_->c));
  auto n = std::make_shared<Expr::Node>();
  n->op = Expr::Op::Cos;
  n->a = a.n_;
  return Expr(n);
}

Expr pow(const Expr& a, int k) {
  if (k < 0 || k > 3) throw std::invalid_argument("pow: exponent must be 0..3");
  if (k == 0) return Expr::constant(1.0);
  if (k == 1) return a;
  if (a.n_->op == Expr::Op::Const) return Expr::constant(std::pow(a.n_->c, k));
  auto n = std::make_shared<Expr::Node>();
  n->op = Expr::Op::Pow;
  n->a = a.n_;
  n->n = k;
  return Expr(n);
}

double Expr::eval(double t, const std::vector<double>& w, const std::vector<double>& z) const {
  const Node& n = *n_;
  switch (n.op) {
    case Op::Const: return n.c;
    case Op::Time: return t;
    case Op::W: return w.at(n.j);
    case Op::Z: return z.at(n.j);
    case Op::Add: return Expr(n.a).eval(t, w, z) + Expr(n.b).eval(t, w, z);
    case Op::Mul: return Expr(n.a).eval(t, w, z) * Expr(n.b).eval(t, w, z);
    case Op::Sin: return std::sin(Expr(n.a).eval(t, w, z));
    case Op::Cos: return std::cos(Expr(n.a).eval(t, w, z));
    case Op::Pow: {
      const double x = Expr(n.a).eval(t, w, z);
      return n.n == 2 ? x * x : x * x * x;
    }
  }
  return 0.0;
}

Interval Expr::bound(const Interval& t, const Interval& w, const Interval& z) const {
  const Node& n = *n_;
  switch (n.op) {
    case Op::Const: return {n.c, n.c};
    case Op::Time: return t;
    case Op::W: return w;
    case Op::Z: return z;
    case Op::Add: {
      const Interval a = Expr(n.a).bound(t, w, z), b = Expr(n.b).bound(t, w, z);
      return {a.lo + b.lo, a.hi + b.hi};
    }
    case Op::Mul: return imul(Expr(n.a).bound(t, w, z), Expr(n.b).bound(t, w, z));
    case Op::Sin: return isin(Expr(n.a).bound(t, w, z));
    case Op::Cos: {
      const Interval a = Expr(n.a).bound(t, w, z);
      return isin({a.lo + std::numbers::pi / 2, a.hi + std::numbers::pi / 2});
    }
    case Op::Pow: {
      const Interval a = Expr(n.a).bound(t, w, z);
      if (n.n == 3) return {a.lo * a.lo * a.lo, a.hi * a.hi * a.hi};
      const double m2 = std::max(a.lo * a.lo, a.hi * a.hi);
      if (a.lo <= 0.0 && a.hi >= 0.0) return {0.0, m2};
      return {std::min(a.lo * a.lo, a.hi * a.hi), m2};
    }
  }
  return {};
}

Expr Expr::diff(Op var, std::size_t j) const {
  const Node& n = *n_;
  switch (n.op) {
    case Op::Const: return constant(0.0);
    case Op::Time: return constant(var == Op::Time ? 1.0 : 0.0);
    case Op::W:
    case Op::Z: return constant(n.op == var && n.j == j ? 1.0 : 0.0);
    case Op::Add: return Expr(n.a).diff(var, j) + Expr(n.b).diff(var, j);
    case Op::Mul: return Expr(n.a).diff(var, j) * Expr(n.b) + Expr(n.a) * Expr(n.b).diff(var, j);
    case Op::Sin: return cos(Expr(n.a)) * Expr(n.a).diff(var, j);
    case Op::Cos: return constant(-1.0) * sin(Expr(n.a)) * Expr(n.a).diff(var, j);
    case Op::Pow:
      return constant(static_cast<double>(n.n)) * pow(Expr(n.a), n.n - 1) * Expr(n.a).diff(var, j);
  }
  return constant(0.0);
}

Expr Expr::dt() const { return diff(Op::Time, 0); }
Expr Expr::dw(std::size_t j) const { return diff(Op::W, j); }
Expr Expr::dz(std::size_t j) const { return diff(Op::Z, j); }

bool Expr::is_zero() const { return is_const(n_, 0.0); }

std::string Expr::str() const {
  const Node& n = *n_;
  std::ostringstream os;
  switch (n.op) {
    case Op::Const: os << n.c; break;
    case Op::Time: os << "t"; break;
    case Op::W: os << "w" << n.j + 1; break;
    case Op::Z: os << "z" << n.j + 1; break;
    case Op::Add: os << "(" << Expr(n.a).str() << " + " << Expr(n.b).str() << ")"; break;
    case Op::Mul: os << Expr(n.a).str() << "*" << Expr(n.b).str(); break;
    case Op::Sin: os << "sin(" << Expr(n.a).str() << ")"; break;
    case Op::Cos: os << "cos(" << Expr(n.a).str() << ")"; break;
    case Op::Pow: os << Expr(n.a).str() << "^" << n.n; break;
  }
  return os.str();
}

CylindricalFunctional::CylindricalFunctional(std::string name, Expr g, std::vector<WAnchor> w, std::vector<ZAnchor> z,
                                             double T, std::size_t m, double zmax, double wmax)
    : name_(std::move(name)),
      g_(std::move(g)),
      w_(std::move(w)),
      z_(std::move(z)),
      T_(T),
      m_(std::max<std::size_t>(m, 1)),
      zmax_(zmax),
      wmax_(wmax),
      g_t_(g_.dt()) {
  for (const auto& a : w_) {
    if (a.t < 0.0 || a.t > T_) throw std::invalid_argument(name_ + ": w-anchor outside [0, T]");
    if (a.comp >= m_) throw std::invalid_argument(name_ + ": w-anchor component out of range");
  }
  for (const auto& a : z_) {
    if (a.s < 0.0 || a.s > T_) throw std::invalid_argument(name_ + ": z-anchor outside [0, T]");
  }
  for (std::size_t j = 0; j < w_.size(); ++j) g_w_.push_back(g_.dw(j));
  for (std::size_t k = 0; k < z_.size(); ++k) g_z_.push_back(g_.dz(k));
  g_ww_.resize(w_.size());
  for (std::size_t j = 0; j < w_.size(); ++j) {
    for (std::size_t k = 0; k < w_.size(); ++k) g_ww_[j].push_back(g_w_[j].dw(k));
  }
}

void CylindricalFunctional::args(double t, const PathView& x, const NoiseState& w, std::vector<double>& wv,
                                 std::vector<double>& zv) const {
  wv.resize(w_.size());
  zv.resize(z_.size());
  for (std::size_t j = 0; j < w_.size(); ++j) wv[j] = w.at(std::min(w_[j].t, t), w_[j].comp);
  for (std::size_t k = 0; k < z_.size(); ++k) {
    const HVector& xs = z_active(k, t) ? x.terminal() : x.at(z_[k].s);
    zv[k] = pairing(z_[k].p, xs);
  }
}

double CylindricalFunctional::value(double t, const PathView& x, const NoiseState& w) const {
  std::vector<double> wv, zv;
  args(t, x, w, wv, zv);
  return g_.eval(t, wv, zv);
}

HVector CylindricalFunctional::gradient(double t, const PathView& x, const NoiseState& w) const {
  std::vector<double> wv, zv;
  args(t, x, w, wv, zv);
  HVector g(x.dim());
  for (std::size_t k = 0; k < z_.size(); ++k) {
    if (!z_active(k, t)) continue;
    g += z_[k].p * g_z_[k].eval(t, wv, zv);
  }
  return g;
}

Parts CylindricalFunctional::parts(double t, const PathView& x, const NoiseState& w) const {
  std::vector<double> wv, zv;
  args(t, x, w, wv, zv);
  Parts p;
  p.domega.assign(m_, 0.0);
  p.dt = g_t_.eval(t, wv, zv);
  double qv = 0.0;
  for (std::size_t j = 0; j < w_.size(); ++j) {
    if (!w_active(j, t)) continue;
    p.domega[w_[j].comp] += g_w_[j].eval(t, wv, zv);
    for (std::size_t k = 0; k < w_.size(); ++k) {
      if (w_active(k, t) && w_[k].comp == w_[j].comp) qv += g_ww_[j][k].eval(t, wv, zv);
    }
  }
  p.dt += 0.5 * qv;
  return p;
}

std::vector<double> CylindricalFunctional::partition() const {
  std::vector<double> p{0.0, T_};
  for (const auto& a : w_) p.push_back(a.t);
  for (const auto& a : z_) p.push_back(a.s);
  std::sort(p.begin(), p.end());
  p.erase(std::unique(p.begin(), p.end(), [](double a, double b) { return std::abs(a - b) < 1e-12; }), p.end());
  return p;
}

double CylindricalFunctional::rho() const {
  const Interval ti{0.0, T_}, wi{-wmax_, wmax_}, zi{-zmax_, zmax_};
  double r = 0.0;
  for (std::size_t k = 0; k < z_.size(); ++k) r += g_z_[k].bound(ti, wi, zi).mag() * norm(z_[k].p, Space::V);
  return r;
}

double CylindricalFunctional::dt_bound() const {
  const Interval ti{0.0, T_}, wi{-wmax_, wmax_}, zi{-zmax_, zmax_};
  double b = g_t_.bound(ti, wi, zi).mag();
  for (const auto& row : g_ww_) {
    for (const auto& e : row) b += 0.5 * e.bound(ti, wi, zi).mag();
  }
  return b;
}

double CylindricalFunctional::lipschitz() const {
  // Each z_k moves by at most |p_k|_V |x - y|_{0,V*}; sum the sup of every
  // z-derivative of u, grad u and both parts over the box.
  const Interval ti{0.0, T_}, wi{-wmax_, wmax_}, zi{-zmax_, zmax_};
  double lip = 0.0;
  for (std::size_t l = 0; l < z_.size(); ++l) {
    const double Pl = norm(z_[l].p, Space::V);
    double c = g_z_[l].bound(ti, wi, zi).mag();
    for (std::size_t k = 0; k < z_.size(); ++k) {
      c += norm(z_[k].p, Space::V) * g_z_[k].dz(l).bound(ti, wi, zi).mag();
    }
    c += g_t_.dz(l).bound(ti, wi, zi).mag();
    for (std::size_t j = 0; j < w_.size(); ++j) {
      c += g_w_[j].dz(l).bound(ti, wi, zi).mag();
      for (std::size_t k = 0; k < w_.size(); ++k) c += 0.5 * g_ww_[j][k].dz(l).bound(ti, wi, zi).mag();
    }
    lip += c * Pl;
  }
  return lip;
}

namespace {

struct CatalogSpec {
  std::string base;
  std::size_t mode = 1;
};

CatalogSpec parse_catalog(const std::string& name) {
  CatalogSpec s;
  const auto colon = name.find(':');
  s.base = name.substr(0, colon);
  if (colon == std::string::npos) return s;
  const std::string opt = name.substr(colon + 1);
  const std::string pre = "p=modes(";
  if (opt.rfind(pre, 0) != 0 || opt.back() != ')') throw std::invalid_argument("unknown functional option: " + opt);
  s.mode = std::stoul(opt.substr(pre.size(), opt.size() - pre.size() - 1));
  return s;
}

}  // namespace

std::vector<std::string> catalog_names() {
  return {"const", "linear-z1", "frozen-z1", "quad-z1", "cubic-z1", "quad-w1-z1", "trig-z1", "w1", "w1sq", "w1-split",
          "trig-w1-z1", "w1-plus-z1"};
}

CylindricalFunctional catalog_functional(const std::string& name, std::size_t D, double T, std::size_t m) {
  const CatalogSpec spec = parse_catalog(name);
  std::string base = spec.base;
  if (base == "linear") base = "linear-z1";
  if (spec.mode == 0 || spec.mode > D) throw std::invalid_argument(name + ": mode out of range");
  // p = e_k scaled to unit V-norm
  HVector p = HVector::unit(D, spec.mode - 1) * (1.0 / std::sqrt(1.0 + eigenvalue(spec.mode - 1)));
  const Expr t = Expr::time(), w0 = Expr::w(0), w1 = Expr::w(1), w2 = Expr::w(2), z0 = Expr::z(0);
  const std::vector<ZAnchor> zT{{T, p}};
  const std::vector<WAnchor> wT{{T, 0}};
  if (base == "const") return {name, Expr::constant(1.0), {}, {}, T, m};
  if (base == "linear-z1") return {name, z0, {}, zT, T, m};
  if (base == "frozen-z1") return {name, z0, {}, {{0.5 * T, p}}, T, m};
  if (base == "quad-z1") return {name, pow(z0, 2), {}, zT, T, m};
  if (base == "cubic-z1") return {name, pow(z0, 3) + t * z0, {}, zT, T, m};
  if (base == "quad-w1-z1") return {name, w0 * z0, wT, zT, T, m};
  if (base == "trig-z1") return {name, sin(z0) * cos(t), {}, zT, T, m};
  if (base == "trig-w1-z1") return {name, w0 * cos(t) + sin(z0), wT, zT, T, m};
  if (base == "w1-plus-z1") return {name, w0 + z0, wT, zT, T, m};
  if (base == "w1") return {name, w0, wT, {}, T, m};
  if (base == "w1sq") return {name, pow(w0, 2), wT, {}, T, m};
  if (base == "w1-split") return {name, w0 + w1 - w2, {{0.5 * T, 0}, {T, 0}, {0.5 * T, 0}}, {}, T, m};
  throw std::invalid_argument("unknown catalog functional: " + name);
}

double generator_Lv(const CylindricalFunctional& u, double t, const PathView& x, std::size_t v, const Model& model,
                    const NoiseState& w) {
  const HVector g = u.gradient(t, x, w);
  return u.parts(t, x, w).dt + pairing(apply_A(x.terminal()), g) + pairing(model.beta(t, x, v, w), g);
}

double gateaux_quotient(const CylindricalFunctional& u, double t, const Path& x, const HVector& h, const NoiseState& w,
                        double lambda) {
  const Path xp = vertical_perturb(x, h * lambda);
  return (u.value(t, xp.view(), w) - u.value(t, x.view(), w)) / lambda;
}

namespace {

Path scaled_to(const Path& x, double target) {
  const double s = sup_norm(x, Space::Vstar);
  if (s <= 0.0) return x;
  std::vector<HVector> v;
  for (const auto& h : x.values()) v.push_back(h * (target / s));
  return Path(x.grid(), std::move(v));
}

// Wiener sample clamped into the functional's box, with the OU shift rebuilt.
NoiseState probe_noise(const ProblemInstance& inst, double wmax, std::uint64_t seed) {
  NoiseState w = sample_wiener(inst.grid(), std::max<std::size_t>(inst.m, 1), seed);
  for (auto& v : w.W) v = std::clamp(v, -wmax, wmax);
  inst.advance_noise(w, 0, w.n_nodes() - 1);
  return w;
}

}  // namespace

CalculusProbeReport probe_functional(const CylindricalFunctional& u, const ProblemInstance& inst,
                                     std::size_t n_probes, std::uint64_t seed) {
  CalculusProbeReport r;
  r.rho = u.rho();
  const double lip = u.lipschitz();
  // probe paths have sup V*-norm below 1, so pair distances stay below 2
  const double L_alpha = lip * std::sqrt(2.0);
  const double zeta = u.dt_bound() + inst.constants.c * inst.L() * r.rho + inst.L();
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (std::size_t i = 0; i < n_probes; ++i) {
    Rng rng = make_rng(seed, "calculus-probe", i);
    std::uniform_int_distribution<std::size_t> kdist(1, inst.n_steps);
    const std::size_t k = kdist(rng);
    const double t = inst.grid().node(k);
    const Path x = scaled_to(random_probe_path(inst, k, 1.0, rng), 0.1 + 0.8 * unif(rng));
    const Path dx = scaled_to(random_probe_path(inst, k, 1.0, rng), 0.1 * std::pow(10.0, -3.0 * unif(rng)));
    std::vector<HVector> yv;
    for (std::size_t j = 0; j <= k; ++j) yv.push_back(x.values()[j] + dx.values()[j]);
    const Path y(x.grid(), std::move(yv));
    const NoiseState w = probe_noise(inst, u.wmax(), derive_seed(seed, "calculus-noise", i));
    const PathView xv = x.view(), yview = y.view();

    // Gateaux quotient along a random direction of unit V*-norm
    HVector h(inst.D);
    for (std::size_t q = 0; q < inst.D; ++q) h[q] = gauss(rng) / static_cast<double>(q + 1);
    h *= 1.0 / norm(h, Space::Vstar);
    const HVector grad = u.gradient(t, xv, w);
    const double exact = pairing(grad, h);
    const double quot = gateaux_quotient(u, t, x, h, w);
    // mixed relative/absolute: the forward quotient carries an O(lambda) curvature term
    // that a pure relative error would blow up near critical points
    r.max_gateaux_rel = std::max(r.max_gateaux_rel, std::abs(quot - exact) / std::max(1.0, std::abs(exact)));
    r.max_grad_norm = std::max(r.max_grad_norm, norm(grad, Space::V));

    // Lipschitz part, compared against the 1/2-Hölder modulus
    const double d = sup_distance(xv, yview, Space::Vstar);
    if (d > 0.0 && lip > 0.0) {
      const Parts px = u.parts(t, xv, w), py = u.parts(t, yview, w);
      double diff = std::abs(u.value(t, xv, w) - u.value(t, yview, w)) +
                    norm(grad - u.gradient(t, yview, w), Space::V) + std::abs(px.dt - py.dt);
      for (std::size_t c = 0; c < px.domega.size(); ++c) diff += std::abs(px.domega[c] - py.domega[c]);
      r.max_holder_ratio = std::max(r.max_holder_ratio, diff / (L_alpha * std::sqrt(d)));
    } else if (d > 0.0) {
      const double diff = std::abs(u.value(t, xv, w) - u.value(t, yview, w));
      if (diff > 0.0) r.max_holder_ratio = std::numeric_limits<double>::infinity();
    }

    // Hamiltonian consistency and the a priori bound on -d_t u - H
    const double dtu = u.parts(t, xv, w).dt;
    const HamiltonianResult H = hamiltonian(inst, t, xv, grad, w);
    double minv = 0.0, supv = 0.0;
    for (std::size_t v = 0; v < inst.U.size(); ++v) {
      const double lv = generator_Lv(u, t, xv, v, inst, w) + inst.f(t, xv, v, w);
      minv = v == 0 ? lv : std::min(minv, lv);
      supv = std::max(supv, std::abs(lv));
    }
    r.max_consistency =
        std::max(r.max_consistency, std::abs(minv - (dtu + H.value)) / std::max(1.0, std::abs(minv)));
    const double lhs = std::abs(-dtu - H.value);
    const double bound = zeta + inst.constants.c3 * r.rho * norm(x.terminal(), Space::V);
    r.max_remark_ratio = std::max(r.max_remark_ratio, std::max(lhs, supv) / bound);
    ++r.probes;
  }
  return r;
}

double compare_representations(const CylindricalFunctional& a, const CylindricalFunctional& b,
                               const ProblemInstance& inst, std::size_t n_probes, std::uint64_t seed) {
  double worst = 0.0;
  for (std::size_t i = 0; i < n_probes; ++i) {
    Rng rng = make_rng(seed, "representation", i);
    std::uniform_int_distribution<std::size_t> kdist(0, inst.n_steps);
    const std::size_t k = kdist(rng);
    const double t = inst.grid().node(k);
    const Path x = random_probe_path(inst, k, 1.0, rng);
    const NoiseState w = sample_wiener(inst.grid(), std::max<std::size_t>(inst.m, 1),
                                       derive_seed(seed, "representation-noise", i));
    const Parts pa = a.parts(t, x.view(), w), pb = b.parts(t, x.view(), w);
    double d = std::abs(pa.dt - pb.dt) + std::abs(a.value(t, x.view(), w) - b.value(t, x.view(), w));
    for (std::size_t c = 0; c < std::min(pa.domega.size(), pb.domega.size()); ++c) {
      d += std::abs(pa.domega[c] - pb.domega[c]);
    }
    worst = std::max(worst, d);
  }
  return worst;
}

namespace {

struct Moments {
  double s = 0.0, s2 = 0.0;
  std::size_t n = 0;
  void add(double x) {
    s += x;
    s2 += x * x;
    ++n;
  }
  double mean() const { return n ? s / static_cast<double>(n) : 0.0; }
  double stderr_() const {
    if (n < 2) return 0.0;
    const double m = mean();
    const double var = std::max(0.0, (s2 - static_cast<double>(n) * m * m) / static_cast<double>(n - 1));
    return std::sqrt(var / static_cast<double>(n));
  }
};

void check_cell(const CylindricalFunctional& u, double a, double b) {
  for (double p : u.partition()) {
    if (p > a + 1e-12 && p < b - 1e-12) {
      throw std::invalid_argument(u.name() + ": [rho, tau] crosses a partition point");
    }
  }
}

}  // namespace

std::vector<ItoStats> ito_kunita_residuals(const std::vector<CylindricalFunctional>& us, const ProblemInstance& inst,
                                           const ControlSchedule& theta, double rho_time, double tau_time,
                                           const HVector& x0, std::size_t n_mc, std::uint64_t seed,
                                           std::size_t workers) {
  if (n_mc == 0) throw std::invalid_argument("ito_kunita_residuals: n_mc must be >= 1");
  if (!(rho_time < tau_time)) throw std::invalid_argument("ito_kunita_residuals: need rho < tau");
  for (const auto& u : us) check_cell(u, rho_time, tau_time);
  const TimeGrid grid = inst.grid();
  const std::size_t i_rho = grid.index_of(rho_time), i_tau = grid.index_of(tau_time);
  const double dt = grid.dt();
  const Path xi = Path::constant(TimeGrid::with_step(0.0, dt, i_rho), x0);
  const std::size_t nu = us.size();

  // per path: residual and martingale part for every functional
  auto per_path = [&](std::size_t i) {
    NoiseState w = sample_wiener(grid, std::max<std::size_t>(inst.m, 1), derive_seed(seed, "ito", i));
    inst.advance_noise(w, 0, w.n_nodes() - 1);
    const StateSolution sol = solve_state(inst, xi, theta, w);
    std::vector<double> out(2 * nu, 0.0);
    for (std::size_t q = 0; q < nu; ++q) {
      const auto& u = us[q];
      double drift = 0.0, mart = 0.0;
      for (std::size_t k = i_rho; k < i_tau; ++k) {
        const double t = grid.node(k);
        const PathView xv = sol.path.view_until(k);
        const HVector g = u.gradient(t, xv, w);
        const Parts p = u.parts(t, xv, w);
        drift += dt * (p.dt + pairing(apply_A(xv.terminal()), g) + pairing(sol.drift[k - sol.start_index], g));
        for (std::size_t c = 0; c < p.domega.size(); ++c) mart += p.domega[c] * w.increment(k, c);
      }
      const double lhs = u.value(tau_time, sol.path.view_until(i_tau), w) - u.value(rho_time, xi.view(), w);
      out[2 * q] = lhs - drift - mart;
      out[2 * q + 1] = mart;
    }
    return out;
  };
  const auto rows = parallel_map(n_mc, workers, per_path);

  std::vector<ItoStats> stats(nu);
  for (std::size_t q = 0; q < nu; ++q) {
    Moments res, mart;
    for (const auto& row : rows) {
      res.add(std::abs(row[2 * q]));
      mart.add(row[2 * q + 1]);
    }
    stats[q].functional = us[q].name();
    stats[q].dt = dt;
    stats[q].n = n_mc;
    stats[q].mean_abs = res.mean();
    stats[q].stderr_abs = res.stderr_();
    stats[q].mart_mean = mart.mean();
    stats[q].mart_stderr = mart.stderr_();
  }
  return stats;
}

HorizontalResidual horizontal_residual(const CylindricalFunctional& u, const Path& x, double tau, std::size_t m,
                                       std::size_t n_mc, std::uint64_t seed) {
  const double r = x.end_time();
  const double dt = x.grid().dt();
  const double span = tau - r;
  const auto steps = static_cast<std::size_t>(std::llround(span / dt));
  if (std::abs(static_cast<double>(steps) * dt - span) > 1e-9 * std::max(1.0, span)) {
    throw std::invalid_argument("horizontal_residual: tau - r must be a multiple of the step");
  }
  check_cell(u, r, tau);
  const Path ext = horizontal_extend(x, span);
  const std::size_t i_r = x.grid().n_steps;
  const TimeGrid grid = ext.grid();
  Moments ms;
  for (std::size_t i = 0; i < n_mc; ++i) {
    const NoiseState w = sample_wiener(grid, std::max<std::size_t>(m, 1), derive_seed(seed, "horizontal", i));
    double sum = 0.0;
    for (std::size_t k = i_r; k < i_r + steps; ++k) {
      const Parts p = u.parts(grid.node(k), ext.view_until(k), w);
      sum += p.dt * dt;
      for (std::size_t c = 0; c < p.domega.size(); ++c) sum += p.domega[c] * w.increment(k, c);
    }
    const double res = u.value(tau, ext.view(), w) - u.value(r, x.view(), w) - sum;
    ms.add(res * res);
  }
  return {ms.mean(), ms.stderr_(), dt, n_mc};
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("loglog_slope: need two or more points");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace pathhjb
