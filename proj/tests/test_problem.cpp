#include "doctest.h"
#include "pathhjb/problem.hpp"

#include <cmath>

using namespace pathhjb;

namespace {
InstanceOptions small(std::size_t n = 16) {
  InstanceOptions o;
  o.D = 16;
  o.n_steps = n;
  return o;
}

Path ramp(const ProblemInstance& p) {
  return Path::from_function(p.grid(), [&](double s) { return HVector::unit(p.D, 0) * s; });
}
}  // namespace

TEST_CASE("null instance") {
  const ProblemInstance p = builtin_instance("null", small());
  const NoiseState w = p.make_zero_noise();
  const Path x = ramp(p);
  for (std::size_t k = 0; k < p.U.size(); ++k) {
    CHECK(norm(p.beta(1.0, x.view(), k, w), Space::H) == 0.0);
    CHECK(p.f(1.0, x.view(), k, w) == 1.0);
  }
  CHECK(p.G(x.view(), w) == 0.0);
  const LipschitzReport r = lipschitz_probe(p, 20, Space::H, 1);
  CHECK(r.max() == 0.0);
}

TEST_CASE("steer-1") {
  const ProblemInstance p = builtin_instance("steer-1", small());
  const NoiseState w = p.make_zero_noise();
  const Path x = ramp(p);
  const HVector b = p.beta(0.5, x.view(), 0, w);
  CHECK(b == HVector::unit(p.D, 0) * -1.0);
  CHECK(p.f(1.0, x.view(), 1, w) == doctest::Approx(1.0));
  const LipschitzReport r = lipschitz_probe(p, 50, Space::H, 2);
  CHECK(r.beta == 0.0);
  CHECK(r.f <= 1.0 + 1e-12);
  CHECK(r.G <= 1.0 + 1e-12);
  CHECK_FALSE(p.is_random());
}

TEST_CASE("delay instance") {
  const ProblemInstance p = builtin_instance("delay", small());
  const NoiseState w = p.make_zero_noise();
  CHECK(p.f(1.0, ramp(p).view(), 1, w) == doctest::Approx(0.5).epsilon(1e-14));
  const LipschitzReport r = lipschitz_probe(p, 100, Space::H, 3);
  CHECK(r.max() <= 1.0 + 1e-12);
  const BoundReport b = bound_probe(p, 100, 4);
  CHECK(b.beta <= p.L() + 1e-12);
  CHECK(b.f <= p.L());
  CHECK(b.G <= p.L());
}

TEST_CASE("delay-vstar is Lipschitz in V*") {
  const ProblemInstance p = builtin_instance("delay-vstar", small());
  const LipschitzReport r = lipschitz_probe(p, 100, Space::Vstar, 5);
  CHECK(r.max() <= 1.0 + 1e-12);
}

TEST_CASE("random instances honour their declared constants") {
  for (std::uint64_t s = 0; s < 10; ++s) {
    Rng rng = make_rng(11, "inst", s);
    const ProblemInstance p = random_instance(rng, small(32));
    const LipschitzReport r = lipschitz_probe(p, 30, Space::H, s);
    CHECK(r.max() <= p.L() * (1 + 1e-12));
    const BoundReport b = bound_probe(p, 30, s);
    CHECK(b.beta <= p.L() * (1 + 1e-12));
    CHECK(b.f <= p.L());
    CHECK(b.G <= p.L());
  }
}

TEST_CASE("example 2.1 shift") {
  const ProblemInstance q = example21_instance(4, 1.0, 0.0, small());
  CHECK_FALSE(q.is_random());
  const NoiseState w = q.make_noise(9);
  for (const auto& e : w.eta) CHECK(norm(e, Space::H) == 0.0);
  CHECK(q.f(1.0, ramp(q).view(), 1, w) == doctest::Approx(1.0));
  const ProblemInstance r = example21_instance(4, 1.0, 0.5, small());
  CHECK(r.is_random());
  const NoiseState wr = r.make_noise(9);
  double m = 0.0;
  for (const auto& e : wr.eta) m = std::max(m, norm(e, Space::H));
  CHECK(m > 0.0);
  // Shifted evaluation equals the unshifted core at x + eta.
  const ProblemInstance core = example21_instance(4, 1.0, 0.0, small());
  const Path x = ramp(r);
  std::vector<HVector> shifted;
  for (std::size_t k = 0; k <= r.n_steps; ++k) shifted.push_back(x.values()[k] + wr.eta[k]);
  const Path xs(x.grid(), shifted);
  const NoiseState w0 = core.make_zero_noise();
  CHECK(r.f(1.0, x.view(), 2, wr) == doctest::Approx(core.f(1.0, xs.view(), 2, w0)).epsilon(1e-14));
  CHECK(r.G(x.view(), wr) == doctest::Approx(core.G(xs.view(), w0)).epsilon(1e-14));
}

TEST_CASE("wiener sampling") {
  const TimeGrid g(0, 1, 16);
  const NoiseState a = sample_wiener(g, 2, 5), b = sample_wiener(g, 2, 5);
  CHECK(a.W == b.W);
  CHECK(a.w(0, 0) == 0.0);
  double s2 = 0.0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    const NoiseState w = sample_wiener(g, 1, 1000 + static_cast<std::uint64_t>(i));
    s2 += w.w(16, 0) * w.w(16, 0);
  }
  CHECK(s2 / n == doctest::Approx(1.0).epsilon(0.05));
  // Increment scale follows sqrt(dt).
  double c = 0.0, f = 0.0;
  for (int i = 0; i < 2000; ++i) {
    const NoiseState wc = sample_wiener(TimeGrid(0, 1, 4), 1, 50000 + static_cast<std::uint64_t>(i));
    const NoiseState wf = sample_wiener(TimeGrid(0, 1, 64), 1, 90000 + static_cast<std::uint64_t>(i));
    c += wc.increment(0, 0) * wc.increment(0, 0);
    f += wf.increment(0, 0) * wf.increment(0, 0);
  }
  CHECK(std::sqrt(c / f) == doctest::Approx(4.0).epsilon(0.1));
}

TEST_CASE("noise trees") {
  const NoiseTree t1(1, 1, 1.0);
  CHECK(t1.level_size(1) == 2);
  CHECK(t1.W(t1.child(0, 0), 0) == doctest::Approx(-1.0).epsilon(1e-15));
  CHECK(t1.W(t1.child(0, 1), 0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(t1.probability(t1.child(0, 1)) == 0.5);

  const NoiseTree t2(2, 1, 1.0);
  std::vector<double> leaves;
  double e2 = 0.0, ptot = 0.0;
  for (std::size_t i = 0; i < t2.level_size(2); ++i) {
    const std::size_t n = t2.level_offset(2) + i;
    leaves.push_back(t2.W(n, 0));
    e2 += t2.probability(n) * t2.W(n, 0) * t2.W(n, 0);
    ptot += t2.probability(n);
  }
  std::sort(leaves.begin(), leaves.end());
  const double s = std::sqrt(0.5);
  CHECK(leaves[0] == doctest::Approx(-2 * s));
  CHECK(leaves[1] == doctest::Approx(0.0));
  CHECK(leaves[2] == doctest::Approx(0.0));
  CHECK(leaves[3] == doctest::Approx(2 * s));
  CHECK(e2 == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(ptot == doctest::Approx(1.0).epsilon(1e-15));

  const NoiseTree t3(3, 2, 0.6);
  double mean = 0.0, var = 0.0;
  for (std::size_t i = 0; i < t3.level_size(3); ++i) {
    const std::size_t n = t3.level_offset(3) + i;
    mean += t3.probability(n) * t3.W(n, 1);
    var += t3.probability(n) * t3.W(n, 1) * t3.W(n, 1);
    CHECK(t3.parent(n) < t3.level_offset(3));
  }
  CHECK(std::abs(mean) <= 1e-15);
  CHECK(var == doctest::Approx(0.6).epsilon(1e-14));
  CHECK_THROWS(NoiseTree(10, 3, 1.0, 1000));
}

TEST_CASE("invalid coefficient sets are rejected") {
  ProblemInstance p = builtin_instance("steer-1", small());
  p.coeffs.beta_drive *= 3.0;
  CHECK_THROWS(p.validate());
  ProblemInstance q = builtin_instance("delay", small());
  q.coeffs.beta_probe *= 2.0;
  CHECK_THROWS(q.validate());
  CHECK_THROWS(builtin_instance("nope", small()));
}
