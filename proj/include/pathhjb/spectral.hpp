#pragma once

// Spectral Gelfand triple V ⊂ H ⊂ V* built on the Dirichlet-Laplacian
// eigenbasis of (0,1). Elements are stored as coefficient vectors in the
// orthonormal H-basis e_i(x) = sqrt(2) sin(i pi x), i = 1..D.

#include <Eigen/Dense>

#include <cstdint>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

namespace pathhjb {

enum class Space { H, V, Vstar };

const char* to_string(Space s);
Space space_from_string(const std::string& name);

/// Eigenvalue lambda_i = (i pi)^2 for the zero-based coefficient index k = i-1.
double eigenvalue(std::size_t k);

/// Coefficient vector of an element of the truncated triple.
class HVector {
 public:
  HVector() = default;
  explicit HVector(std::size_t dim) : a_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim))) {}
  explicit HVector(Eigen::VectorXd coeffs) : a_(std::move(coeffs)) {}
  HVector(std::size_t dim, std::initializer_list<double> leading);

  static HVector unit(std::size_t dim, std::size_t k);

  std::size_t dim() const { return static_cast<std::size_t>(a_.size()); }
  double operator[](std::size_t k) const { return a_[static_cast<Eigen::Index>(k)]; }
  double& operator[](std::size_t k) { return a_[static_cast<Eigen::Index>(k)]; }
  const Eigen::VectorXd& coeffs() const { return a_; }
  Eigen::VectorXd& coeffs() { return a_; }

  HVector& operator+=(const HVector& o) { a_ += o.a_; return *this; }
  HVector& operator-=(const HVector& o) { a_ -= o.a_; return *this; }
  HVector& operator*=(double s) { a_ *= s; return *this; }

  friend HVector operator+(HVector a, const HVector& b) { return a += b; }
  friend HVector operator-(HVector a, const HVector& b) { return a -= b; }
  friend HVector operator*(HVector a, double s) { return a *= s; }
  friend HVector operator*(double s, HVector a) { return a *= s; }
  friend bool operator==(const HVector& a, const HVector& b) { return a.a_ == b.a_; }

 private:
  Eigen::VectorXd a_;
};

/// Truncated eigenbasis with cached eigenvalues and multipliers mu_i = -lambda_i.
class SpectralBasis {
 public:
  explicit SpectralBasis(std::size_t ambient_dim);

  std::size_t dim() const { return eigenvalues_.size(); }
  const std::vector<double>& eigenvalues() const { return eigenvalues_; }
  const std::vector<double>& multipliers() const { return multipliers_; }

  HVector zero() const { return HVector(dim()); }
  HVector unit(std::size_t k) const { return HVector::unit(dim(), k); }

 private:
  std::vector<double> eigenvalues_;
  std::vector<double> multipliers_;
};

/// Constants of the coercivity and boundedness conditions on A.
struct GelfandConstants {
  double c1 = 2.0;
  double c2 = 2.0;
  double c3 = 1.0;
  double c = 1.0;

  double c1_plus() const { return c1 > 0.0 ? c1 : 0.0; }
};

/// Constants realised exactly by the Laplacian with the chosen V-norm.
GelfandConstants laplacian_constants();

double norm(const HVector& h, Space space);
double norm_squared(const HVector& h, Space space);

/// Duality pairing <h*, h>; equals the H inner product on H.
double pairing(const HVector& hstar, const HVector& h);

HVector apply_A(const HVector& h);

/// Orthogonal projection onto the first d modes.
HVector project(const HVector& h, std::size_t d);

/// Exact flow of dX/dt = AX over dt.
HVector semigroup_step(const HVector& h, double dt);

/// Mass of the coefficients with index above D/2 (truncation monitor).
double tail_mass(const HVector& h);

struct GelfandReport {
  std::size_t n_samples = 0;
  double max_coercivity_residual = 0.0;   // relative, identity 2<Av,v> = 2|v|_H^2 - 2|v|_V^2
  double max_boundedness_violation = 0.0; // relative, |Av|_V* <= c3 |v|_V
  double max_embedding_violation = 0.0;   // relative, |v|_V* <= |v|_H <= |v|_V
  double max_boundedness_ratio = 0.0;

  bool passed(double tol = 1e-12) const {
    return max_coercivity_residual <= tol && max_boundedness_violation <= tol &&
           max_embedding_violation <= tol;
  }
};

GelfandReport verify_gelfand(const SpectralBasis& basis, std::size_t n_samples, std::uint64_t seed);

/// Per-vector contribution to the report, exposed for tests.
GelfandReport check_gelfand_vector(const HVector& v, const GelfandConstants& k);

}  // namespace pathhjb
