#include "doctest.h"
#include "pathhjb/spectral.hpp"

#include <cmath>
#include <numbers>
#include <random>

using namespace pathhjb;

namespace {
constexpr double pi = std::numbers::pi;
}

TEST_CASE("norms of e1") {
  const HVector e1 = HVector::unit(64, 0);
  CHECK(norm(e1, Space::H) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(norm(e1, Space::V) == doctest::Approx(3.29691).epsilon(1e-5));
  CHECK(norm(e1, Space::V) == doctest::Approx(std::sqrt(1.0 + pi * pi)).epsilon(1e-14));
  CHECK(norm(HVector(64), Space::Vstar) == 0.0);
}

TEST_CASE("eigenvalues increase from pi^2") {
  SpectralBasis b(64);
  CHECK(b.eigenvalues()[0] == doctest::Approx(pi * pi).epsilon(1e-15));
  for (std::size_t k = 1; k < b.dim(); ++k) {
    CHECK(b.eigenvalues()[k] > b.eigenvalues()[k - 1]);
    CHECK(b.multipliers()[k] <= 0.0);
  }
}

TEST_CASE("pairing and A") {
  const HVector e1 = HVector::unit(64, 0), e2 = HVector::unit(64, 1);
  CHECK(pairing(e1, e1) == 1.0);
  CHECK(pairing(e1, e2) == 0.0);
  CHECK(pairing(apply_A(e1), e1) == doctest::Approx(-pi * pi).epsilon(1e-14));
  CHECK(apply_A(HVector(64)) == HVector(64));
  HVector v(64, {1.0, 1.0});
  const double lhs = 2.0 * pairing(apply_A(v), v);
  const double rhs = 2.0 * norm_squared(v, Space::H) - 2.0 * norm_squared(v, Space::V);
  CHECK(std::abs(lhs - rhs) <= 1e-12 * std::abs(rhs));
}

TEST_CASE("projection") {
  HVector a(8, {1.0, 2.0, 3.0});
  const HVector p = project(a, 2);
  CHECK(p[0] == 1.0);
  CHECK(p[1] == 2.0);
  CHECK(p[2] == 0.0);
  CHECK(project(p, 2) == p);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  HVector h(16);
  for (std::size_t k = 0; k < 16; ++k) h[k] = g(rng);
  CHECK(project(apply_A(h), 3) == apply_A(project(h, 3)));
}

TEST_CASE("semigroup step") {
  const HVector e1 = HVector::unit(64, 0);
  CHECK(semigroup_step(e1, 0.1)[0] == doctest::Approx(0.37273).epsilon(1e-4));
  CHECK(semigroup_step(e1, 0.1)[0] == doctest::Approx(std::exp(-0.1 * pi * pi)).epsilon(1e-15));
  HVector h(64, {1.0, 0.5});
  CHECK(norm(semigroup_step(h, 1e-12) - h, Space::H) <= 1e-10);
  CHECK(semigroup_step(HVector(64), 0.5) == HVector(64));
}

TEST_CASE("gelfand report") {
  const HVector e1 = HVector::unit(64, 0);
  CHECK(norm(apply_A(e1), Space::Vstar) == doctest::Approx(pi * pi / std::sqrt(1 + pi * pi)).epsilon(1e-14));
  CHECK(norm(apply_A(e1), Space::Vstar) == doctest::Approx(2.99362).epsilon(1e-5));
  CHECK(check_gelfand_vector(e1, laplacian_constants()).passed());
  CHECK(check_gelfand_vector(HVector(64), laplacian_constants()).passed());
  const GelfandReport r = verify_gelfand(SpectralBasis(64), 100, 42);
  CHECK(r.n_samples == 100);
  CHECK(r.passed());
}

TEST_CASE("space names round trip") {
  for (Space s : {Space::H, Space::V, Space::Vstar}) CHECK(space_from_string(to_string(s)) == s);
  CHECK_THROWS(space_from_string("L2"));
}
