#pragma once

// Cylindrical test functionals u(t, x_t) = g(t, W(t_j ∧ t), <x(s_k ∧ t), p_k>)
// with symbolic derivatives, the operator L^v and the Itô-Kunita residual study.

#include "pathhjb/control.hpp"

#include <memory>
#include <string>
#include <vector>

namespace pathhjb {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  double mag() const { return std::max(std::abs(lo), std::abs(hi)); }
};

/// Scalar expression in t, w_0..w_{q-1}, z_0..z_{p-1}.
class Expr {
 public:
  enum class Op { Const, Time, W, Z, Add, Mul, Sin, Cos, Pow };

  static Expr constant(double c);
  static Expr time();
  static Expr w(std::size_t j);
  static Expr z(std::size_t j);

  friend Expr operator+(const Expr& a, const Expr& b);
  friend Expr operator-(const Expr& a, const Expr& b);
  friend Expr operator*(const Expr& a, const Expr& b);
  friend Expr sin(const Expr& a);
  friend Expr cos(const Expr& a);
  friend Expr pow(const Expr& a, int n);  // n in {2, 3}

  double eval(double t, const std::vector<double>& w, const std::vector<double>& z) const;
  Interval bound(const Interval& t, const Interval& w, const Interval& z) const;

  Expr dt() const;
  Expr dw(std::size_t j) const;
  Expr dz(std::size_t j) const;

  bool is_zero() const;
  std::string str() const;

 struct Node;

 private:
  explicit Expr(std::shared_ptr<const Node> n) : n_(std::move(n)) {}
  Expr diff(Op var, std::size_t j) const;
  std::shared_ptr<const Node> n_;
};

struct WAnchor {
  double t = 1.0;
  std::size_t comp = 0;
};

struct ZAnchor {
  double s = 1.0;
  HVector p;
};

struct Parts {
  double dt = 0.0;              // drift part
  std::vector<double> domega;   // martingale integrand, one per Wiener component
};

class CylindricalFunctional {
 public:
  CylindricalFunctional(std::string name, Expr g, std::vector<WAnchor> w, std::vector<ZAnchor> z, double T,
                        std::size_t m, double zmax = 2.0, double wmax = 4.0);

  const std::string& name() const { return name_; }
  const Expr& g() const { return g_; }
  std::size_t m() const { return m_; }
  double zmax() const { return zmax_; }
  double wmax() const { return wmax_; }

  double value(double t, const PathView& x, const NoiseState& w) const;
  /// Sum over anchors with s_k >= t of dg/dz_k p_k.
  HVector gradient(double t, const PathView& x, const NoiseState& w) const;
  /// dt-part dg/dt + 1/2 sum d2g/dw_j dw_k over active anchors on a common component; omega-part dg/dw.
  Parts parts(double t, const PathView& x, const NoiseState& w) const;

  /// Anchor times inside (0, T) together with 0 and T.
  std::vector<double> partition() const;

  /// Declared constants over the box |z| <= zmax, |w| <= wmax, t in [0, T].
  double rho() const;             // bound on |grad u|_V
  double lipschitz() const;       // u, grad u, parts are Lipschitz in |.|_{0,V*} with this modulus
  double dt_bound() const;        // sup |d_t u|

 private:
  void args(double t, const PathView& x, const NoiseState& w, std::vector<double>& wv, std::vector<double>& zv) const;
  bool z_active(std::size_t k, double t) const { return z_[k].s >= t - 1e-12; }
  bool w_active(std::size_t j, double t) const { return t < w_[j].t - 1e-12; }

  std::string name_;
  Expr g_;
  std::vector<WAnchor> w_;
  std::vector<ZAnchor> z_;
  double T_;
  std::size_t m_;
  double zmax_, wmax_;
  Expr g_t_;
  std::vector<Expr> g_w_, g_z_;
  std::vector<std::vector<Expr>> g_ww_;
};

/// Catalog: const, linear-z1, quad-z1, quad-w1-z1, trig-z1, w1sq, w1-split (same functional as w1
/// with three anchors), w1, trig-w1-z1, w1-plus-z1.
CylindricalFunctional catalog_functional(const std::string& name, std::size_t D, double T, std::size_t m = 1);
std::vector<std::string> catalog_names();

/// L^v u = d_t u + <Ax(t), grad u> + <beta(t, x_t, v), grad u>.
double generator_Lv(const CylindricalFunctional& u, double t, const PathView& x, std::size_t v, const Model& model,
                    const NoiseState& w);

/// Gateaux quotient (u(x^{lambda h}) - u(x)) / lambda.
double gateaux_quotient(const CylindricalFunctional& u, double t, const Path& x, const HVector& h, const NoiseState& w,
                        double lambda = 1e-6);

struct CalculusProbeReport {
  std::size_t probes = 0;
  double max_gateaux_rel = 0.0;   // |quotient - <grad u, h>| / max(1, |<grad u, h>|)
  double max_grad_norm = 0.0;
  double rho = 0.0;
  double max_holder_ratio = 0.0;   // measured / L_alpha, alpha = 1/2
  double max_remark_ratio = 0.0;   // |-d_t u - H| / (zeta + c3 rho |x(t)|_V)
  double max_consistency = 0.0;    // |min_v [L^v u + f] - (d_t u + H)|
  bool passed() const {
    return max_gateaux_rel <= 1e-5 && max_grad_norm <= rho && max_holder_ratio <= 1.0 && max_remark_ratio <= 1.0 &&
           max_consistency <= 1e-12;
  }
};

/// Probe checks of the gradient bound, the Hoelder moduli, the Gateaux derivative and the Hamiltonian bounds.
CalculusProbeReport probe_functional(const CylindricalFunctional& u, const ProblemInstance& inst,
                                     std::size_t n_probes, std::uint64_t seed);

struct ItoStats {
  std::string functional;
  double dt = 0.0;
  std::size_t n = 0;
  double mean_abs = 0.0;
  double stderr_abs = 0.0;
  double mart_mean = 0.0;
  double mart_stderr = 0.0;
};

/// Simulates u(tau, X_tau) - u(rho, x_rho) - sum L^theta u dt - sum d_omega u dW on
/// n_mc Wiener paths for every functional in `us`. X starts from the constant history x0.
std::vector<ItoStats> ito_kunita_residuals(const std::vector<CylindricalFunctional>& us, const ProblemInstance& inst,
                                           const ControlSchedule& theta, double rho_time, double tau_time,
                                           const HVector& x0, std::size_t n_mc, std::uint64_t seed,
                                           std::size_t workers = 1);

/// max |value| + |d_t| + |d_omega| difference between two representations on random probes.
double compare_representations(const CylindricalFunctional& a, const CylindricalFunctional& b,
                               const ProblemInstance& inst, std::size_t n_probes, std::uint64_t seed);

struct HorizontalResidual {
  double mean_square = 0.0;
  double stderr_ = 0.0;
  double dt = 0.0;
  std::size_t n = 0;
};

/// E|u(tau, x_{r,tau-r}) - u(r, x_r) - sum d_t u dt - sum d_omega u dW|^2 along the
/// horizontal extension of x (ending at r), on x's grid step.
HorizontalResidual horizontal_residual(const CylindricalFunctional& u, const Path& x, double tau, std::size_t m,
                                       std::size_t n_mc, std::uint64_t seed);

/// Least-squares slope of log y against log x.
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace pathhjb
