#pragma once

#include "pathhjb/spectral.hpp"

#include <vector>

namespace pathhjb {

/// Exact step of dX/dt = AX + b with b frozen over the step:
///   a_i(s + dt) = e^{mu_i dt} a_i(s) + ((e^{mu_i dt} - 1) / mu_i) b_i.
class ExpStepper {
 public:
  ExpStepper(std::size_t dim, double dt);

  double dt() const { return dt_; }
  std::size_t dim() const { return decay_.size(); }

  HVector step(const HVector& a, const HVector& b) const;
  void step_into(const HVector& a, const HVector& b, HVector& out) const;

  /// Inverts the step relation for b; used for drift recovery of class paths.
  HVector recover_drift(const HVector& a, const HVector& a_next) const;

  /// Exact integral over one step of |X(tau) - c|_V^2 for X started at a with frozen drift b.
  double v_energy(const HVector& a, const HVector& b, const HVector* shift = nullptr) const;

 private:
  double dt_;
  std::vector<double> mu_;
  std::vector<double> decay_;
  std::vector<double> phi_;
};

}  // namespace pathhjb
