#include "doctest.h"
#include "pathhjb/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

using namespace pathhjb;

namespace {
constexpr double pi = std::numbers::pi;

// beta = b0 + gain * <x(t - lag), e1> e2 (smooth, path dependent when gain != 0)
struct TestModel : Model {
  std::size_t D = 16;
  double T = 1.0;
  HVector b0 = HVector(16);
  double gain = 0.0;
  double lag = 0.0;
  ControlSet U = default_controls();

  std::size_t dim() const override { return D; }
  double horizon() const override { return T; }
  const ControlSet& controls() const override { return U; }
  bool is_random() const override { return false; }
  HVector beta(double t, const PathView& x, std::size_t k, const NoiseState&) const override {
    HVector b = b0 * (1.0 + 0.0 * static_cast<double>(k));
    if (gain != 0.0) b[1] += gain * std::sin(x.at(t - lag)[0] + t);
    return b;
  }
  double f(double, const PathView& x, std::size_t, const NoiseState&) const override { return x.terminal()[0]; }
  double G(const PathView& x, const NoiseState&) const override { return x.terminal()[0]; }
  void advance_noise(NoiseState&, std::size_t, std::size_t) const override {}
  double L() const override { return 1.0; }
};

Path point(double dt, std::size_t k, const HVector& h) { return Path::constant(TimeGrid::with_step(0, dt, k), h); }
}  // namespace

TEST_CASE("schedule lookup") {
  ControlSchedule c{0.5, 1.0, {0, 1, 2, 1}};
  CHECK(c.at(0.5) == 0);
  CHECK(c.at(0.625) == 1);
  CHECK(c.at(0.7) == 1);
  CHECK(c.at(0.875) == 1);
  CHECK(c.at(1.0) == 1);
  CHECK(ControlSchedule::constant(2, 0, 1).at(0.3) == 2);
}

TEST_CASE("closed-form solutions") {
  TestModel m;
  const NoiseState w = zero_noise(TimeGrid(0, 1, 100), 1);
  m.T = 0.1;
  StateSolution s = solve_state(m, point(1e-3, 0, HVector::unit(16, 0)), ControlSchedule::constant(0, 0, 0.1), w);
  CHECK(s.path.terminal()[0] == doctest::Approx(0.37273).epsilon(1e-4));
  CHECK(s.path.terminal()[0] == doctest::Approx(std::exp(-0.1 * pi * pi)).epsilon(1e-13));

  m.T = 1.0;
  m.b0 = HVector::unit(16, 0);
  s = solve_state(m, point(1.0 / 64, 0, HVector(16)), ControlSchedule::constant(1, 0, 1), w);
  CHECK(s.path.terminal()[0] == doctest::Approx(0.101270).epsilon(1e-3));
  CHECK(s.path.terminal()[0] == doctest::Approx((1 - std::exp(-pi * pi)) / (pi * pi)).epsilon(1e-13));
  // Exact V-energy of the scalar solution x(t) = (1 - e^{-l t}) / l.
  const double l = pi * pi;
  const double ex = (1 + l) / (l * l) * (1 - 2 * (1 - std::exp(-l)) / l + (1 - std::exp(-2 * l)) / (2 * l));
  CHECK(s.v_energy == doctest::Approx(ex).epsilon(1e-12));

  m.b0 = HVector(16);
  s = solve_state(m, point(0.01, 30, HVector(16)), ControlSchedule{0.3, 1, {0, 2, 1}}, w);
  CHECK(sup_norm(s.path, Space::H) == 0.0);
  CHECK(s.start_index == 30);
  CHECK(s.path.grid().n_steps == 100);
}

TEST_CASE("history is kept and the override starts the solution") {
  TestModel m;
  const NoiseState w = zero_noise(TimeGrid(0, 1, 10), 1);
  const Path xi = Path::from_function(TimeGrid(0, 0.5, 5), [](double t) { return HVector::unit(16, 0) * t; });
  const Path xp = vertical_perturb(xi, HVector::unit(16, 1));
  const StateSolution s = solve_state(m, xp, ControlSchedule::constant(0, 0.5, 1), w);
  for (std::size_t k = 0; k < 5; ++k) CHECK(s.path.values()[k] == xi.values()[k]);
  CHECK(s.path.values()[5][1] == 1.0);
}

TEST_CASE("semi-implicit agrees to first order") {
  TestModel m;
  m.b0 = HVector(16, {1.0, 0.5});
  const NoiseState w = zero_noise(TimeGrid(0, 1, 8), 1);
  SolverConfig si;
  si.method = Method::SemiImplicit;
  double prev = 0.0;
  for (std::size_t n : {64, 128, 256, 512}) {
    const Path xi = point(1.0 / static_cast<double>(n), 0, HVector(16, {0.2, -0.1, 0.3}));
    const StateSolution a = solve_state(m, xi, ControlSchedule::constant(0, 0, 1), w);
    const StateSolution b = solve_state(m, xi, ControlSchedule::constant(0, 0, 1), w, si);
    const double gap = norm(a.path.terminal() - b.path.terminal(), Space::H);
    if (prev > 0.0) CHECK(gap < prev * 0.6);
    prev = gap;
  }
}

TEST_CASE("integrator order for a path-dependent drift") {
  TestModel m;
  m.b0 = HVector(16, {1.0});
  m.gain = 1.0;
  m.lag = 0.25;
  const NoiseState w = zero_noise(TimeGrid(0, 1, 8), 1);
  const HVector x0(16, {0.5, 0.2});
  std::vector<double> h, e;
  for (std::size_t n : {128, 256, 512, 1024, 2048}) {
    const auto run = [&](std::size_t k) {
      return solve_state(m, point(1.0 / static_cast<double>(k), 0, x0), ControlSchedule::constant(0, 0, 1), w);
    };
    const StateSolution a = run(n), b = run(2 * n);
    double err = 0.0;
    for (std::size_t j = 0; j <= n; ++j) err = std::max(err, norm(a.path.values()[j] - b.path.values()[2 * j], Space::H));
    h.push_back(std::log(1.0 / static_cast<double>(n)));
    e.push_back(std::log(err));
  }
  double mh = 0, me = 0;
  for (std::size_t i = 0; i < h.size(); ++i) mh += h[i], me += e[i];
  mh /= static_cast<double>(h.size());
  me /= static_cast<double>(h.size());
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < h.size(); ++i) sxy += (h[i] - mh) * (e[i] - me), sxx += (h[i] - mh) * (h[i] - mh);
  const double slope = sxy / sxx;
  CHECK(slope >= 0.9);
  CHECK(slope <= 1.1);
}

TEST_CASE("picard iteration") {
  const GelfandConstants gc = laplacian_constants();
  CHECK(picard_factor(1.0, gc, 0.3) == doctest::Approx(0.3 * std::exp(0.6)).epsilon(1e-15));
  CHECK(std::sqrt(picard_factor(1.0, gc, 0.3)) == doctest::Approx(0.7393).epsilon(1e-4));
  CHECK(picard_factor(1.0, gc, picard_window(1.0, gc, 1.0)) < 1.0);

  TestModel m;
  m.b0 = HVector(16, {1.0});
  const NoiseState w = zero_noise(TimeGrid(0, 1, 8), 1);
  SolverConfig cfg;
  cfg.window = 0.3;
  const Path xi = point(0.01, 0, HVector(16, {0.1}));
  const StateSolution p = picard_solve(m, xi, ControlSchedule::constant(0, 0, 1), w, gc, cfg);
  // Path-independent drift: the second iterate already reproduces the first.
  CHECK(p.picard.windows == 4);
  CHECK(p.picard.iterations == 8);

  InstanceOptions o;
  o.D = 32;
  o.n_steps = 120;
  const ProblemInstance d = builtin_instance("delay", o);
  const Path xd = Path::constant(TimeGrid::with_step(0, d.dt(), 0), HVector(32, {0.8, 0.3}));
  const ControlSchedule th{0, 1, {2, 0, 1, 2}};
  const NoiseState wz = d.make_zero_noise();
  const StateSolution a = picard_solve(d, xd, th, wz, gc, cfg);
  const StateSolution b = solve_state(d, xd, th, wz);
  CHECK(sup_distance(a.path.view(), b.path.view(), Space::H) <= 10 * cfg.picard_tol);
  CHECK(a.v_energy == doctest::Approx(b.v_energy).epsilon(1e-10));
  CHECK(a.picard.max_ratio() <= std::sqrt(a.picard.factor));
}

TEST_CASE("flow property") {
  InstanceOptions o;
  o.D = 32;
  o.n_steps = 64;
  const ProblemInstance d = builtin_instance("delay", o);
  const NoiseState w = d.make_zero_noise();
  const Path xi = Path::constant(TimeGrid::with_step(0, d.dt(), 8), HVector(32, {0.5, -0.2}));
  const ControlSchedule th{0.125, 1, {0, 2, 1}};
  CHECK(flow_check(d, xi, 0.125, th, w) == 0.0);
  for (const std::string& name : builtin_names()) {
    const ProblemInstance p = builtin_instance(name, o);
    CHECK(flow_check(p, xi, 0.5, th, p.make_noise(3)) <= 1e-12);
  }
  // Off-grid restart: gap <= C dt with C fitted over a refinement sweep.
  std::vector<double> c;
  for (std::size_t n : {32, 64, 128, 256}) {
    InstanceOptions on = o;
    on.n_steps = n;
    const ProblemInstance p = builtin_instance("delay", on);
    const Path x0 = Path::constant(TimeGrid::with_step(0, p.dt(), 0), HVector(32, {0.5, -0.2}));
    const double gap = flow_check(p, x0, 341.0 / 1024.0, ControlSchedule{0, 1, {0, 2, 1}}, p.make_zero_noise());
    CHECK(gap > 0.0);
    c.push_back(gap / p.dt());
  }
  const double cmax = *std::max_element(c.begin(), c.end());
  const double cmin = *std::min_element(c.begin(), c.end());
  CHECK(cmax <= 1.0);
  CHECK(cmax <= 3.0 * cmin);
}

TEST_CASE("estimate constants") {
  const EstimateConstants k = EstimateConstants::compute(1.0, 1.0, laplacian_constants());
  CHECK(k.K2_ii == doctest::Approx(2.0 * std::exp(6.0)).epsilon(1e-15));
  CHECK(k.Kbar_iii == doctest::Approx(1.0 + std::sqrt(2.0 + 2.0 * 2.0 * std::exp(6.0) / 2.0)).epsilon(1e-15));
  CHECK(k.K_iv == doctest::Approx(std::sqrt(3.0) * std::exp(1.5 * 3.0)).epsilon(1e-15));
  CHECK(k.Ktilde_v == 8.0);
  CHECK(EstimateConstants::compute(2.0, 1.0, laplacian_constants()).Ktilde_v == 32.0);
}

TEST_CASE("estimate suite on a few draws") {
  EstimateSuiteConfig c;
  c.draws = 8;
  c.D = 32;
  c.n_steps = 64;
  const EstimateReport r = estimate_suite(c, 17, 1);
  CHECK(r.ii.violations == 0);
  CHECK(r.iii.violations == 0);
  CHECK(r.iv.violations == 0);
  CHECK(r.v.violations == 0);
  CHECK(r.vi_spread < 0.01);
  CHECK(r.ii.n == 8);
  const EstimateReport r2 = estimate_suite(c, 17, 3);
  CHECK(r2.ii.max_ratio == r.ii.max_ratio);
  CHECK(r2.v.max_ratio == r.v.max_ratio);
}
