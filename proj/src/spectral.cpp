#include "pathhjb/spectral.hpp"

#include "pathhjb/seeding.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace pathhjb {

const char* to_string(Space s) {
  switch (s) {
    case Space::H: return "H";
    case Space::V: return "V";
    case Space::Vstar: return "Vstar";
  }
  return "?";
}

Space space_from_string(const std::string& name) {
  if (name == "H") return Space::H;
  if (name == "V") return Space::V;
  if (name == "Vstar" || name == "V*") return Space::Vstar;
  throw std::invalid_argument("unknown space '" + name + "'");
}

double eigenvalue(std::size_t k) {
  const double i = static_cast<double>(k + 1);
  return i * i * std::numbers::pi * std::numbers::pi;
}

HVector::HVector(std::size_t dim, std::initializer_list<double> leading) : HVector(dim) {
  if (leading.size() > dim) throw std::invalid_argument("HVector: more coefficients than dimension");
  std::size_t k = 0;
  for (double v : leading) a_[static_cast<Eigen::Index>(k++)] = v;
}

HVector HVector::unit(std::size_t dim, std::size_t k) {
  if (k >= dim) throw std::out_of_range("HVector::unit: index beyond dimension");
  HVector e(dim);
  e[k] = 1.0;
  return e;
}

SpectralBasis::SpectralBasis(std::size_t ambient_dim) {
  if (ambient_dim == 0) throw std::invalid_argument("SpectralBasis: ambient dimension must be positive");
  eigenvalues_.resize(ambient_dim);
  multipliers_.resize(ambient_dim);
  for (std::size_t k = 0; k < ambient_dim; ++k) {
    eigenvalues_[k] = eigenvalue(k);
    multipliers_[k] = -eigenvalues_[k];
  }
}

GelfandConstants laplacian_constants() { return GelfandConstants{2.0, 2.0, 1.0, 1.0}; }

double norm_squared(const HVector& h, Space space) {
  double s = 0.0;
  const std::size_t n = h.dim();
  switch (space) {
    case Space::H:
      for (std::size_t k = 0; k < n; ++k) s += h[k] * h[k];
      break;
    case Space::V:
      for (std::size_t k = 0; k < n; ++k) s += (1.0 + eigenvalue(k)) * h[k] * h[k];
      break;
    case Space::Vstar:
      for (std::size_t k = 0; k < n; ++k) s += h[k] * h[k] / (1.0 + eigenvalue(k));
      break;
  }
  return s;
}

double norm(const HVector& h, Space space) { return std::sqrt(norm_squared(h, space)); }

double pairing(const HVector& hstar, const HVector& h) {
  if (hstar.dim() != h.dim()) throw std::invalid_argument("pairing: dimension mismatch");
  double s = 0.0;
  for (std::size_t k = 0; k < h.dim(); ++k) s += hstar[k] * h[k];
  return s;
}

HVector apply_A(const HVector& h) {
  HVector out(h.dim());
  for (std::size_t k = 0; k < h.dim(); ++k) out[k] = -eigenvalue(k) * h[k];
  return out;
}

HVector project(const HVector& h, std::size_t d) {
  if (d > h.dim()) {
    throw std::invalid_argument("project: d = " + std::to_string(d) + " exceeds ambient dimension " +
                                std::to_string(h.dim()));
  }
  HVector out = h;
  for (std::size_t k = d; k < h.dim(); ++k) out[k] = 0.0;
  return out;
}

HVector semigroup_step(const HVector& h, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("semigroup_step: dt must be positive");
  HVector out(h.dim());
  for (std::size_t k = 0; k < h.dim(); ++k) out[k] = std::exp(-eigenvalue(k) * dt) * h[k];
  return out;
}

double tail_mass(const HVector& h) {
  double s = 0.0;
  for (std::size_t k = h.dim() / 2; k < h.dim(); ++k) s += h[k] * h[k];
  return s;
}

GelfandReport check_gelfand_vector(const HVector& v, const GelfandConstants& c) {
  GelfandReport r;
  r.n_samples = 1;
  const double h2 = norm_squared(v, Space::H);
  const double v2 = norm_squared(v, Space::V);
  const double vs2 = norm_squared(v, Space::Vstar);
  const HVector av = apply_A(v);

  const double lhs = 2.0 * pairing(av, v);
  const double rhs = c.c1 * h2 - c.c2 * v2;
  const double scale = std::max({std::abs(lhs), std::abs(rhs), 1e-300});
  r.max_coercivity_residual = v2 > 0.0 ? std::abs(lhs - rhs) / scale : std::abs(lhs - rhs);

  const double av_norm = norm(av, Space::Vstar);
  const double v_norm = std::sqrt(v2);
  r.max_boundedness_ratio = v_norm > 0.0 ? av_norm / v_norm : 0.0;
  const double bound = c.c3 * v_norm;
  r.max_boundedness_violation = v_norm > 0.0 ? std::max(0.0, av_norm - bound) / bound : std::max(0.0, av_norm);

  const double vs = std::sqrt(vs2), hn = std::sqrt(h2);
  double emb = 0.0;
  if (hn > 0.0) emb = std::max(emb, std::max(0.0, vs - c.c * hn) / hn);
  if (v_norm > 0.0) emb = std::max(emb, std::max(0.0, hn - c.c * v_norm) / v_norm);
  r.max_embedding_violation = emb;
  return r;
}

GelfandReport verify_gelfand(const SpectralBasis& basis, std::size_t n_samples, std::uint64_t seed) {
  if (n_samples == 0) throw std::invalid_argument("verify_gelfand: n_samples must be >= 1");
  const GelfandConstants c = laplacian_constants();
  GelfandReport total;
  for (std::size_t s = 0; s < n_samples; ++s) {
    Rng rng = make_rng(seed, "gelfand", s);
    std::normal_distribution<double> gauss(0.0, 1.0);
    HVector v = basis.zero();
    for (std::size_t k = 0; k < basis.dim(); ++k) v[k] = gauss(rng);
    v *= 1.0 / norm(v, Space::H);
    const GelfandReport r = check_gelfand_vector(v, c);
    total.max_coercivity_residual = std::max(total.max_coercivity_residual, r.max_coercivity_residual);
    total.max_boundedness_violation = std::max(total.max_boundedness_violation, r.max_boundedness_violation);
    total.max_embedding_violation = std::max(total.max_embedding_violation, r.max_embedding_violation);
    total.max_boundedness_ratio = std::max(total.max_boundedness_ratio, r.max_boundedness_ratio);
  }
  total.n_samples = n_samples;
  return total;
}

}  // namespace pathhjb
