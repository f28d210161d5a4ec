#include "doctest.h"
#include "pathhjb/calculus.hpp"

#include <cmath>
#include <numbers>

using namespace pathhjb;

namespace {

InstanceOptions opts(std::size_t n = 64, std::size_t D = 16) {
  InstanceOptions o;
  o.D = D;
  o.n_steps = n;
  return o;
}

Path low_path(const ProblemInstance& p, std::size_t k, std::uint64_t seed) {
  Rng rng(seed);
  return random_probe_path(p, k, 0.3, rng);
}

HVector unit_V(std::size_t D, std::size_t k) { return HVector::unit(D, k) * (1.0 / std::sqrt(1.0 + eigenvalue(k))); }

}  // namespace

TEST_CASE("symbolic derivatives match central differences") {
  const Expr t = Expr::time(), w = Expr::w(0), z = Expr::z(0), z2 = Expr::z(1);
  const Expr g = w * z + sin(z) * cos(t) + pow(z2, 3) - pow(w, 2) * z2;
  const std::vector<double> wv{0.7}, zv{-0.4, 1.3};
  const double tt = 0.35, h = 1e-6;
  auto at = [&](double dtt, double dw, double dz0, double dz1) {
    return g.eval(tt + dtt, {wv[0] + dw}, {zv[0] + dz0, zv[1] + dz1});
  };
  CHECK(g.dt().eval(tt, wv, zv) == doctest::Approx((at(h, 0, 0, 0) - at(-h, 0, 0, 0)) / (2 * h)).epsilon(1e-8));
  CHECK(g.dw(0).eval(tt, wv, zv) == doctest::Approx((at(0, h, 0, 0) - at(0, -h, 0, 0)) / (2 * h)).epsilon(1e-8));
  CHECK(g.dz(0).eval(tt, wv, zv) == doctest::Approx((at(0, 0, h, 0) - at(0, 0, -h, 0)) / (2 * h)).epsilon(1e-8));
  CHECK(g.dz(1).eval(tt, wv, zv) == doctest::Approx((at(0, 0, 0, h) - at(0, 0, 0, -h)) / (2 * h)).epsilon(1e-8));
  // d2/dw2 of -w^2 z2 is -2 z2
  CHECK(g.dw(0).dw(0).eval(tt, wv, zv) == doctest::Approx(-2 * zv[1]).epsilon(1e-14));
  CHECK(Expr::z(0).dw(0).is_zero());
  CHECK(Expr::constant(3.0).dt().is_zero());
}

TEST_CASE("interval bounds contain sampled values") {
  const Expr t = Expr::time(), w = Expr::w(0), z = Expr::z(0);
  const std::vector<Expr> es{w * z, sin(z) * cos(t), pow(z, 2) - w, pow(z, 3) + t * z, cos(w * z)};
  const Interval ti{0, 1}, wi{-4, 4}, zi{-2, 2};
  Rng rng(7);
  std::uniform_real_distribution<double> U(0, 1);
  for (const auto& e : es) {
    const Interval b = e.bound(ti, wi, zi);
    for (int i = 0; i < 2000; ++i) {
      const double v = e.eval(U(rng), {-4 + 8 * U(rng)}, {-2 + 4 * U(rng)});
      CHECK(v >= b.lo - 1e-12);
      CHECK(v <= b.hi + 1e-12);
    }
  }
  const Interval s = sin(Expr::z(0)).bound(ti, wi, {0.1, 0.2});
  CHECK(s.lo == doctest::Approx(std::sin(0.1)));
  CHECK(s.hi == doctest::Approx(std::sin(0.2)));
}

TEST_CASE("vertical gradient examples") {
  const ProblemInstance p = builtin_instance("steer-1", opts());
  const NoiseState w = p.make_zero_noise();
  const Path x = low_path(p, 40, 3);
  const double t = p.grid().node(40);

  const auto lin = catalog_functional("linear-z1", p.D, p.T);
  const HVector e1 = unit_V(p.D, 0);
  CHECK(norm(lin.gradient(t, x.view(), w) - e1, Space::H) == 0.0);

  const auto lin3 = catalog_functional("linear:p=modes(3)", p.D, p.T);
  CHECK(norm(lin3.gradient(t, x.view(), w) - unit_V(p.D, 2), Space::H) == 0.0);

  const auto q = catalog_functional("quad-z1", p.D, p.T);
  const Path zero = Path::constant(TimeGrid::with_step(0, p.dt(), 40), HVector(p.D));
  CHECK(norm(q.gradient(t, zero.view(), w), Space::V) == 0.0);
  const double z1 = pairing(e1, x.terminal());
  CHECK(norm(q.gradient(t, x.view(), w) - e1 * (2 * z1), Space::H) < 1e-15);

  // anchor at T/2 < t: frozen history, no vertical dependence
  const auto fr = catalog_functional("frozen-z1", p.D, p.T);
  CHECK(norm(fr.gradient(t, x.view(), w), Space::V) == 0.0);
  HVector h(p.D);
  for (std::size_t k = 0; k < p.D; ++k) h[k] = 1.0 / (k + 1.0);
  CHECK(std::abs(gateaux_quotient(fr, t, x, h, w)) <= 1e-5);
  // before the anchor it is active again
  const Path xe = low_path(p, 16, 4);
  CHECK(norm(fr.gradient(p.grid().node(16), xe.view(), w) - e1, Space::H) == 0.0);
}

TEST_CASE("semimartingale parts examples") {
  const ProblemInstance p = builtin_instance("steer-1", opts());
  const NoiseState w = sample_wiener(p.grid(), 1, 11);
  const Path x = low_path(p, 20, 5);
  const double t = p.grid().node(20);

  const auto sq = catalog_functional("w1sq", p.D, p.T);
  const Parts ps = sq.parts(t, x.view(), w);
  CHECK(ps.dt == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(ps.domega[0] == doctest::Approx(2 * w.at(t, 0)).epsilon(1e-15));

  // at the anchor the w-argument is frozen
  const Path xT = low_path(p, p.n_steps, 5);
  const Parts pT = sq.parts(p.T, xT.view(), w);
  CHECK(pT.dt == 0.0);
  CHECK(pT.domega[0] == 0.0);

  const auto lin = catalog_functional("linear-z1", p.D, p.T);
  const Parts pl = lin.parts(t, x.view(), w);
  CHECK(pl.dt == 0.0);
  CHECK(pl.domega[0] == 0.0);

  const auto trig = catalog_functional("trig-z1", p.D, p.T);
  const double z1 = pairing(unit_V(p.D, 0), x.terminal());
  CHECK(trig.parts(t, x.view(), w).dt == doctest::Approx(-std::sin(z1) * std::sin(t)).epsilon(1e-14));
}

TEST_CASE("two representations of W(t) agree") {
  const ProblemInstance p = builtin_instance("steer-1", opts());
  const auto a = catalog_functional("w1", p.D, p.T);
  const auto b = catalog_functional("w1-split", p.D, p.T);
  CHECK(b.partition().size() == 3);
  CHECK(compare_representations(a, b, p, 200, 9) <= 1e-10);
  // a genuinely different functional is detected
  CHECK(compare_representations(a, catalog_functional("w1sq", p.D, p.T), p, 50, 9) > 1e-3);
}

TEST_CASE("generator examples") {
  const ProblemInstance null = builtin_instance("null", opts());
  const NoiseState w = null.make_zero_noise();
  const Path x = low_path(null, 30, 8);
  const double t = null.grid().node(30);
  const auto lin = catalog_functional("linear-z1", null.D, null.T);
  const HVector e1 = unit_V(null.D, 0);
  for (std::size_t v = 0; v < 3; ++v) {
    CHECK(generator_Lv(lin, t, x.view(), v, null, w) ==
          doctest::Approx(pairing(apply_A(x.terminal()), e1)).epsilon(1e-14));
  }
}

TEST_CASE("catalog functionals satisfy their declared constants") {
  for (const std::string inst : {"steer-1", "delay", "example21"}) {
    const ProblemInstance p = builtin_instance(inst, opts(64, 32));
    for (const auto& name : catalog_names()) {
      CAPTURE(inst);
      CAPTURE(name);
      const auto u = catalog_functional(name, p.D, p.T);
      const CalculusProbeReport r = probe_functional(u, p, 1000, 21);
      CHECK(r.probes == 1000);
      CHECK(r.max_gateaux_rel <= 1e-5);
      CHECK(r.max_grad_norm <= r.rho);
      CHECK(r.max_holder_ratio <= 1.0);
      CHECK(r.max_remark_ratio <= 1.0);
      CHECK(r.max_consistency <= 1e-12);
      CHECK(r.passed());
    }
  }
}

TEST_CASE("declared constants by hand") {
  const auto u = catalog_functional("quad-w1-z1", 16, 1.0);
  // |dg/dz| = |w| <= wmax, |p|_V = 1
  CHECK(u.rho() == doctest::Approx(4.0));
  CHECK(u.dt_bound() == 0.0);
  const auto s = catalog_functional("w1sq", 16, 1.0);
  CHECK(s.dt_bound() == doctest::Approx(1.0));
  CHECK(s.rho() == 0.0);
}

TEST_CASE("ito-kunita residual: trivial and linear cases") {
  ProblemInstance p = builtin_instance("steer-1", opts(64));
  const ControlSchedule th = ControlSchedule::constant(2, 0, 1);
  HVector x0(p.D);
  x0[0] = 0.5;
  x0[1] = -0.2;
  const std::vector<CylindricalFunctional> us{catalog_functional("const", p.D, p.T),
                                              catalog_functional("linear-z1", p.D, p.T)};
  std::vector<double> dts, res;
  for (std::size_t n : {32, 64, 128, 256}) {
    p.n_steps = n;
    const auto st = ito_kunita_residuals(us, p, th, 0.25, 1.0, x0, 4, 1);
    CHECK(st[0].mean_abs == 0.0);
    CHECK(st[0].mart_mean == 0.0);
    dts.push_back(p.dt());
    res.push_back(st[1].mean_abs);
    CHECK(st[1].mean_abs <= 1.0 * p.dt());
  }
  CHECK(loglog_slope(dts, res) == doctest::Approx(1.0).epsilon(0.1));
  // a crossing of the partition is refused
  const std::vector<CylindricalFunctional> fz{catalog_functional("frozen-z1", p.D, p.T)};
  CHECK_THROWS(ito_kunita_residuals(fz, p, th, 0.25, 1.0, x0, 2, 1));
}

TEST_CASE("ito-kunita residual: mixed functional converges at first order") {
  ProblemInstance p = builtin_instance("example21", opts(32, 16));
  const ControlSchedule th = ControlSchedule::constant(1, 0, 1);
  HVector x0(p.D);
  x0[0] = 0.4;
  const std::vector<CylindricalFunctional> us{catalog_functional("quad-w1-z1", p.D, p.T)};
  std::vector<double> dts, res;
  for (std::size_t n : {32, 64, 128, 256}) {
    p.n_steps = n;
    const auto st = ito_kunita_residuals(us, p, th, 0.0, 1.0, x0, 400, 5, 4);
    dts.push_back(p.dt());
    res.push_back(st[0].mean_abs);
    CHECK(std::abs(st[0].mart_mean) <= 3.5 * st[0].mart_stderr);
  }
  const double slope = loglog_slope(dts, res);
  CHECK(slope >= 0.8);
  CHECK(slope <= 1.2);
}

TEST_CASE("ito-kunita residual is worker invariant") {
  ProblemInstance p = builtin_instance("example21", opts(32, 16));
  const ControlSchedule th = ControlSchedule::constant(0, 0, 1);
  const std::vector<CylindricalFunctional> us{catalog_functional("trig-z1", p.D, p.T)};
  const auto a = ito_kunita_residuals(us, p, th, 0.0, 1.0, HVector(p.D), 64, 3, 1);
  const auto b = ito_kunita_residuals(us, p, th, 0.0, 1.0, HVector(p.D), 64, 3, 8);
  CHECK(a[0].mean_abs == b[0].mean_abs);
  CHECK(a[0].mart_mean == b[0].mart_mean);
}

TEST_CASE("decomposition along horizontal extensions") {
  ProblemInstance p = builtin_instance("steer-1", opts());
  const auto sq = catalog_functional("w1sq", p.D, p.T);
  const auto mix = catalog_functional("quad-w1-z1", p.D, p.T);
  for (std::size_t n : {32, 128}) {
    p.n_steps = n;
    const Path x = low_path(p, n / 4, 2);
    // E|sum (dW^2 - dt)|^2 = 2 dt (tau - r)
    const HorizontalResidual r = horizontal_residual(sq, x, 1.0, 1, 4000, 6);
    CHECK(r.mean_square / p.dt() == doctest::Approx(2 * 0.75).epsilon(0.1));
    // z is frozen along the extension, so w1 z1 is a pure martingale with no residual
    CHECK(horizontal_residual(mix, x, 1.0, 1, 200, 6).mean_square <= 1e-28);
  }
}
