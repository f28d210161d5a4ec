#include "pathhjb/exponential.hpp"

#include <cmath>
#include <stdexcept>

namespace pathhjb {

namespace {

// int_0^dt (P e^{mu tau} + R)^2 dtau, mu <= 0.
double squared_exponential_integral(double P, double R, double mu, double dt) {
  if (mu == 0.0) {
    const double y = P + R;
    return y * y * dt;
  }
  const double e1 = std::expm1(mu * dt) / mu;
  const double e2 = std::expm1(2.0 * mu * dt) / (2.0 * mu);
  return P * P * e2 + 2.0 * P * R * e1 + R * R * dt;
}

}  // namespace

ExpStepper::ExpStepper(std::size_t dim, double dt) : dt_(dt), mu_(dim), decay_(dim), phi_(dim) {
  if (!(dt > 0.0)) throw std::invalid_argument("ExpStepper: dt must be positive");
  for (std::size_t k = 0; k < dim; ++k) {
    mu_[k] = -eigenvalue(k);
    decay_[k] = std::exp(mu_[k] * dt);
    phi_[k] = mu_[k] == 0.0 ? dt : std::expm1(mu_[k] * dt) / mu_[k];
  }
}

HVector ExpStepper::step(const HVector& a, const HVector& b) const {
  HVector out(a.dim());
  step_into(a, b, out);
  return out;
}

void ExpStepper::step_into(const HVector& a, const HVector& b, HVector& out) const {
  const std::size_t n = decay_.size();
  if (a.dim() != n || b.dim() != n) throw std::invalid_argument("ExpStepper: dimension mismatch");
  if (out.dim() != n) out = HVector(n);
  for (std::size_t k = 0; k < n; ++k) out[k] = decay_[k] * a[k] + phi_[k] * b[k];
}

HVector ExpStepper::recover_drift(const HVector& a, const HVector& a_next) const {
  HVector b(a.dim());
  for (std::size_t k = 0; k < decay_.size(); ++k) b[k] = (a_next[k] - decay_[k] * a[k]) / phi_[k];
  return b;
}

double ExpStepper::v_energy(const HVector& a, const HVector& b, const HVector* shift) const {
  double total = 0.0;
  for (std::size_t k = 0; k < decay_.size(); ++k) {
    const double mu = mu_[k];
    const double c = shift ? (*shift)[k] : 0.0;
    double P, R;
    if (mu == 0.0) {
      // Linear growth a + b tau: integrate directly.
      const double a0 = a[k] - c;
      const double seg = a0 * a0 * dt_ + a0 * b[k] * dt_ * dt_ + b[k] * b[k] * dt_ * dt_ * dt_ / 3.0;
      total += (1.0 + eigenvalue(k)) * seg;
      continue;
    }
    P = a[k] + b[k] / mu;
    R = -b[k] / mu - c;
    total += (1.0 + eigenvalue(k)) * squared_exponential_integral(P, R, mu, dt_);
  }
  return total;
}

}  // namespace pathhjb
