#include "doctest.h"
#include "pathhjb/control.hpp"

#include <cmath>
#include <numbers>

using namespace pathhjb;

namespace {
constexpr double pi = std::numbers::pi;

InstanceOptions opts(std::size_t n = 48, std::size_t D = 16) {
  InstanceOptions o;
  o.D = D;
  o.n_steps = n;
  return o;
}

Path start(const ProblemInstance& p, std::size_t k = 0, HVector h = {}) {
  if (h.dim() == 0) h = HVector(p.D);
  return Path::constant(TimeGrid::with_step(0, p.dt(), k), h);
}
}  // namespace

TEST_CASE("cost oracles") {
  const ProblemInstance null = builtin_instance("null", opts());
  CHECK(cost_J(null, start(null), ControlSchedule::constant(1, 0, 1), 0, 1).value == doctest::Approx(1.0).epsilon(1e-14));

  ProblemInstance zero = builtin_instance("null", opts());
  zero.coeffs.f_kind = FKind::Zero;
  for (std::size_t u = 0; u < 3; ++u) CHECK(cost_J(zero, start(zero), ControlSchedule::constant(u, 0, 1), 0, 1).value == 0.0);

  const ProblemInstance s = builtin_instance("steer-1-g", opts(64));
  const double j = (1 - std::exp(-pi * pi)) / (pi * pi);
  CHECK(cost_J(s, start(s), ControlSchedule::constant(2, 0, 1), 0, 1).value == doctest::Approx(j).epsilon(1e-12));
  CHECK(cost_J(s, start(s), ControlSchedule::constant(0, 0, 1), 0, 1).value == doctest::Approx(-j).epsilon(1e-12));
}

TEST_CASE("monte carlo cost reports a standard error") {
  const ProblemInstance e = builtin_instance("example21", opts(32));
  const ValueEstimate v = cost_J(e, start(e), ControlSchedule::constant(1, 0, 1), 200, 4);
  CHECK(v.mode == ValueMode::MonteCarlo);
  CHECK(v.stderr_ > 0.0);
  CHECK(v.n_samples == 200);
  CHECK(std::abs(v.value) <= e.L() * 2);
}

TEST_CASE("open-loop value") {
  ProblemInstance q = builtin_instance("null", opts(16));
  q.coeffs.f_kind = FKind::Zero;
  q.coeffs.f_control = ControlCost::Square;
  q.coeffs.f_control_weight = 1.0;
  const OpenLoopResult r = value_open_loop(q, start(q), 2);
  CHECK(r.value.value == 0.0);
  CHECK(r.argmin.labels == std::vector<std::size_t>{1, 1});

  const ProblemInstance s = builtin_instance("steer-1-g", opts(64));
  const double j = (1 - std::exp(-pi * pi)) / (pi * pi);
  for (std::size_t nc : {1, 2, 4}) {
    const OpenLoopResult o = value_open_loop(s, start(s), nc);
    CHECK(o.value.value == doctest::Approx(-j).epsilon(1e-12));
    CHECK(o.value.value == doctest::Approx(-0.101270).epsilon(1e-3));
    for (auto l : o.argmin.labels) CHECK(l == 0);
  }

  const ProblemInstance d = builtin_instance("delay", opts(64));
  const Path x0 = start(d, 0, HVector(16, {0.6, -0.3}));
  const double v1 = value_open_loop(d, x0, 1).value.value;
  const double v2 = value_open_loop(d, x0, 2).value.value;
  const double v4 = value_open_loop(d, x0, 4, 2).value.value;
  CHECK(v4 <= v2);
  CHECK(v2 <= v1);
  CHECK_THROWS(value_open_loop(d, x0, 30));
}

TEST_CASE("hamiltonian") {
  const ProblemInstance s = builtin_instance("steer-1-g", opts());
  const NoiseState w = s.make_zero_noise();
  const Path x = start(s, 4, HVector::unit(16, 0));
  const HamiltonianResult h = hamiltonian(s, x.end_time(), x.view(), HVector::unit(16, 0), w);
  CHECK(h.value == doctest::Approx(-pi * pi - 1).epsilon(1e-14));
  CHECK(h.value == doctest::Approx(-10.8696).epsilon(1e-5));
  CHECK(h.argmin == 0);
  CHECK(hamiltonian(s, x.end_time(), x.view(), HVector(16), w).value == 0.0);

  const ProblemInstance d = builtin_instance("delay", opts());
  const Path y = start(d, 8, HVector(16, {0.3, 0.1, -0.2}));
  const HVector p(16, {1.0, -0.5, 0.25});
  const HamiltonianResult hd = hamiltonian(d, y.end_time(), y.view(), p, w);
  for (std::size_t k = 0; k < 3; ++k) {
    const double c = pairing(apply_A(y.terminal()), p) + pairing(d.beta(y.end_time(), y.view(), k, w), p) +
                     d.f(y.end_time(), y.view(), k, w);
    CHECK(hd.value <= c);
  }
}

TEST_CASE("tree shape") {
  const TreeShape t(2, 2, 1000);
  CHECK(t.n_nodes() == 7);
  CHECK(t.internal_nodes() == 3);
  CHECK(t.child(0, 1) == 2);
  CHECK(t.child(2, 0) == 5);
  CHECK(t.level_of(6) == 2);
  CHECK_THROWS(TreeShape(30, 4, 1000));
}

TEST_CASE("deterministic tree equals open-loop enumeration") {
  for (const char* name : {"steer-1", "delay", "delay-vstar"}) {
    const ProblemInstance p = builtin_instance(name, opts(48));
    TreeConfig cfg;
    cfg.depth = 3;
    cfg.m = 0;
    cfg.n_steps = 48;
    const Path x0 = start(p, 0, HVector(16, {0.4, 0.2}));
    const double tree = value_adapted_tree(p, cfg, x0, 0).value;
    const double ol = value_open_loop(p, x0, 3).value.value;
    CHECK(std::abs(tree - ol) <= 1e-12);
    const Path x1 = start(p, 16, HVector(16, {0.4, 0.2}));
    CHECK(std::abs(value_adapted_tree(p, cfg, x1, 1).value - value_open_loop(p, x1, 2).value.value) <= 1e-12);
  }
}

TEST_CASE("adapted tree value against brute force and open loop") {
  ProblemInstance e = builtin_instance("example21", opts(32));
  e.U = ControlSet::from_values({-1.0, 1.0});
  e.coeffs.f_control = ControlCost::Noise;
  e.coeffs.f_control_weight = 0.5;
  TreeConfig cfg;
  cfg.depth = 2;
  cfg.m = 1;
  cfg.n_steps = 32;
  const Path x0 = start(e, 0, HVector(16, {0.5}));
  std::vector<std::size_t> pol;
  const double v = value_adapted_tree(e, cfg, x0, 0, &pol).value;
  CHECK(std::abs(v - brute_force_tree(e, cfg, x0, 0)) <= 1e-12);
  TreeSolver s(e, cfg, x0, 0);
  CHECK(std::abs(s.evaluate(pol) - v) <= 1e-12);
  for (std::size_t a = 0; a < 2; ++a) {
    for (std::size_t b = 0; b < 2; ++b) CHECK(v <= s.evaluate(ControlSchedule{0, 1, {a, b}}) + 1e-15);
  }
  // Adaptedness is worth something here.
  double best_ol = 1e300;
  for (std::size_t a = 0; a < 2; ++a)
    for (std::size_t b = 0; b < 2; ++b) best_ol = std::min(best_ol, s.evaluate(ControlSchedule{0, 1, {a, b}}));
  CHECK(v < best_ol);
}

TEST_CASE("dynamic programming principle on trees") {
  ProblemInstance e = builtin_instance("example21", opts(24));
  e.coeffs.f_control = ControlCost::Noise;
  e.coeffs.f_control_weight = 0.3;
  TreeConfig cfg;
  cfg.depth = 3;
  cfg.m = 1;
  cfg.n_steps = 24;
  const Path x0 = start(e, 0, HVector(16, {0.5, 0.1}));
  for (std::size_t a = 0; a <= 3; ++a) {
    const Path xa = a == 0 ? x0 : Path::constant(TimeGrid::with_step(0, e.dt(), a * 8), HVector(16, {0.5, 0.1}));
    for (std::size_t b = a; b <= 3; ++b) CHECK(check_dpp(e, cfg, xa, a, b) <= 1e-12);
  }
}

TEST_CASE("relabelled controls give the same value") {
  ProblemInstance e = builtin_instance("example21", opts(24));
  TreeConfig cfg;
  cfg.depth = 3;
  cfg.n_steps = 24;
  const Path x0 = start(e, 0, HVector(16, {0.5}));
  const double v = value_adapted_tree(e, cfg, x0, 0).value;
  e.U = ControlSet::from_values({1.0, -1.0, 0.0});
  CHECK(std::abs(value_adapted_tree(e, cfg, x0, 0).value - v) <= 1e-12);
}

TEST_CASE("supermartingale property") {
  ProblemInstance e = builtin_instance("example21", opts(24));
  e.coeffs.f_control = ControlCost::Noise;
  e.coeffs.f_control_weight = 0.3;
  TreeConfig cfg;
  cfg.depth = 3;
  cfg.n_steps = 24;
  const Path x0 = start(e, 0, HVector(16, {0.5}));
  std::vector<std::size_t> pol;
  value_adapted_tree(e, cfg, x0, 0, &pol);
  TreeSolver s(e, cfg, x0, 0);
  const auto opt = s.supermartingale(pol);
  CHECK(opt.nodes == 7);
  CHECK(opt.max_violation <= 1e-12);
  CHECK(std::abs(opt.max_drift) <= 1e-12);
  CHECK(std::abs(opt.min_drift) <= 1e-12);

  std::vector<std::size_t> bad(pol.size(), 2);
  const auto sub = s.supermartingale(bad);
  CHECK(sub.max_violation <= 1e-12);
  CHECK(sub.max_drift > 1e-6);

  ProblemInstance z = builtin_instance("null", opts(24));
  z.coeffs.f_kind = FKind::Zero;
  TreeSolver sz(z, cfg, start(z), 0);
  const auto zr = sz.supermartingale(bad);
  CHECK(zr.max_violation == 0.0);
  CHECK(zr.max_drift == 0.0);
}

TEST_CASE("value regularity") {
  const ProblemInstance d = builtin_instance("delay", opts(48));
  const RegularityReport r = check_value_regularity(d, 25, 3, 5);
  CHECK(r.bound == 2.0);
  CHECK(r.bound_violations == 0);
  CHECK(r.max_lipschitz_ratio > 0.0);
  CHECK(r.max_lipschitz_ratio <= r.candidate_LV);
  CHECK(r.passed());

  ProblemInstance n = builtin_instance("null", opts(48));
  const RegularityReport rn = check_value_regularity(n, 10, 3, 5);
  CHECK(rn.max_lipschitz_ratio == 0.0);
}

TEST_CASE("open-loop search is worker independent") {
  const ProblemInstance d = builtin_instance("delay", opts(48));
  const Path x0 = start(d, 0, HVector(16, {0.6}));
  const OpenLoopResult a = value_open_loop(d, x0, 4, 1);
  const OpenLoopResult b = value_open_loop(d, x0, 4, 8);
  CHECK(a.value.value == b.value.value);
  CHECK(a.argmin.labels == b.argmin.labels);
}
