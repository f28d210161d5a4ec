#include "doctest.h"
#include "pathhjb/path.hpp"

#include <cmath>
#include <numbers>

using namespace pathhjb;

namespace {
constexpr double pi = std::numbers::pi;
constexpr std::size_t D = 16;

Path ramp(std::size_t n, double t1 = 1.0) {
  return Path::from_function(TimeGrid(0.0, t1, n), [](double s) { return HVector::unit(D, 0) * s; });
}
}  // namespace

TEST_CASE("grid nodes and floor index") {
  TimeGrid g(0.0, 1.0, 8);
  CHECK(g.dt() == 0.125);
  CHECK(g.node(8) == 1.0);
  CHECK(g.floor_index(0.3) == 2);
  CHECK(g.floor_index(0.375) == 3);
  CHECK(g.is_node(0.625));
  CHECK_FALSE(g.is_node(0.6));
  CHECK_THROWS(g.index_of(0.6));
  CHECK(TimeGrid::with_step(0.5, 0.1, 0).n_nodes() == 1);
}

TEST_CASE("cadlag evaluation and override") {
  const Path x = ramp(4);
  CHECK(x.at(0.3)[0] == 0.25);
  CHECK(x.at(0.5)[0] == 0.5);
  const Path y = vertical_perturb(x, HVector::unit(D, 1));
  CHECK(y.terminal()[1] == 1.0);
  CHECK(y.at(0.99)[1] == 0.0);
  CHECK(y.view().prefix(2).terminal()[1] == 0.0);
}

TEST_CASE("sup_norm") {
  CHECK(sup_norm(Path::constant(TimeGrid(0, 1, 5), HVector::unit(D, 0)), Space::H) == 1.0);
  CHECK(sup_norm(Path::constant(TimeGrid(0, 1, 5), HVector(D)), Space::V) == 0.0);
  CHECK(sup_norm(ramp(9), Space::H) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("path_dist") {
  const Path x = ramp(8);
  CHECK(path_dist(x, x, Space::H) == 0.0);
  const HVector h(D, {0.2, -0.4});
  const Path a = Path::constant(TimeGrid(0, 0.25, 2), h);
  const Path b = Path::constant(TimeGrid(0, 1.0, 8), h);
  CHECK(path_dist(a, b, Space::H) == doctest::Approx(std::sqrt(0.75)).epsilon(1e-14));
  CHECK(path_dist(b, a, Space::H) == doctest::Approx(0.86603).epsilon(1e-5));
  const Path z = Path::constant(TimeGrid(0, 1, 8), HVector(D));
  const Path e = Path::constant(TimeGrid(0, 1, 8), HVector::unit(D, 0));
  CHECK(path_dist(z, e, Space::Vstar) == doctest::Approx(1.0 / std::sqrt(1 + pi * pi)).epsilon(1e-14));
  CHECK(path_dist(z, e, Space::Vstar) == doctest::Approx(0.30331).epsilon(1e-4));
}

TEST_CASE("path_dist is symmetric and satisfies the triangle inequality on samples") {
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    PathClassSpec s;
    s.anchor = Path::constant(TimeGrid::with_step(0, 1.0 / 16, 2), HVector(D));
    s.horizon = 1.0;
    const Path p = sample_path_class(s, rng).path;
    const Path q = sample_path_class(s, rng).path.truncated(9);
    const Path r = sample_path_class(s, rng).path.truncated(5);
    const double pq = path_dist(p, q, Space::H), qp = path_dist(q, p, Space::H);
    CHECK(pq == doctest::Approx(qp).epsilon(1e-14));
    CHECK(path_dist(p, r, Space::H) <= pq + path_dist(q, r, Space::H) + 1e-14);
  }
}

TEST_CASE("horizontal extension") {
  const Path x = ramp(4);
  CHECK(horizontal_extend(x, 0.0).values() == x.values());
  const Path c = Path::constant(TimeGrid(0, 1, 4), HVector::unit(D, 2));
  const Path ce = horizontal_extend(c, 0.5);
  CHECK(ce.grid().n_steps == 6);
  for (const auto& v : ce.values()) CHECK(v == HVector::unit(D, 2));
  const Path xe = horizontal_extend(x, 1.0);
  CHECK(xe.end_time() == doctest::Approx(2.0));
  CHECK(xe.at(1.5)[0] == 1.0);
  CHECK(path_dist(x, xe, Space::H) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK_THROWS(horizontal_extend(x, 0.1));
}

TEST_CASE("vertical perturbation") {
  const Path z = Path::constant(TimeGrid(0, 1, 4), HVector(D));
  const Path p0 = vertical_perturb(z, HVector(D));
  CHECK(p0.terminal() == z.terminal());
  const Path p = vertical_perturb(z, HVector::unit(D, 0));
  CHECK(p.terminal() == HVector::unit(D, 0));
  for (std::size_t k = 0; k < 4; ++k) CHECK(p.view().node(k) == HVector(D));
  const HVector h(D, {0.5, 1.0, -2.0});
  const Path x = ramp(4);
  const Path xp = vertical_perturb(x, h);
  double sup = 0.0;
  for (std::size_t k = 0; k <= 4; ++k) sup = std::max(sup, norm(xp.view().node(k) - x.view().node(k), Space::Vstar));
  CHECK(sup == doctest::Approx(norm(h, Space::Vstar)).epsilon(1e-14));
}

TEST_CASE("stepwise projection") {
  const Path x = ramp(10);
  const Path p = stepwise_project(x, 1);
  CHECK(p.at(0.3)[0] == 0.0);
  CHECK(p.at(0.49)[0] == 0.0);
  CHECK(p.at(0.5)[0] == doctest::Approx(0.5));
  CHECK(p.at(0.9)[0] == doctest::Approx(0.5));
  CHECK(p.terminal()[0] == 1.0);
  const Path y = ramp(8);
  CHECK(stepwise_project(y, 3).values() == y.values());
}

TEST_CASE("stepwise projection through a strided view matches the owning path") {
  const Path x = ramp(16);
  const Path p = stepwise_project(x, 2);
  const PathView v = x.view().with_stride(4);
  for (std::size_t k = 0; k <= 16; ++k) CHECK(v.node(k) == p.view().node(k));
}

TEST_CASE("path class samples") {
  PathClassSpec s;
  s.anchor = Path::constant(TimeGrid::with_step(0, 1.0 / 64, 0), HVector(D));
  s.horizon = 1.0;
  s.k = 0.0;
  Rng rng(1);
  const Path z = sample_path_class(s, rng).path;
  CHECK(sup_norm(z, Space::H) == 0.0);
  CHECK(is_in_path_class(z, s, 1e-12));

  std::vector<HVector> g(64, HVector::unit(D, 0));
  const Path x = extend_with_drift(s.anchor, g);
  CHECK(x.terminal()[0] == doctest::Approx((1 - std::exp(-pi * pi)) / (pi * pi)).epsilon(1e-12));
  CHECK(x.terminal()[0] == doctest::Approx(0.101270).epsilon(1e-3));
  s.k = 1.0;
  CHECK(is_in_path_class(x, s, 1e-9));
  s.k = 0.5;
  CHECK_FALSE(is_in_path_class(x, s, 1e-9));

  s.k = 1.0;
  for (int i = 0; i < 10; ++i) CHECK(is_in_path_class(sample_path_class(s, rng).path, s, 1e-9));

  std::vector<HVector> jv(x.values());
  jv[30] += HVector::unit(D, 0) * 0.1;
  CHECK_FALSE(is_in_path_class(Path(x.grid(), jv), s, 1e-8));
}

TEST_CASE("resample keeps left values") {
  const Path x = ramp(4);
  const Path r = resample(x.view(), TimeGrid(0, 1, 8));
  CHECK(r.values()[1][0] == 0.0);
  CHECK(r.values()[2][0] == 0.25);
  CHECK(r.values()[3][0] == 0.25);
}
