#pragma once

// Special functions entering the homodyne kernels.
//
// Conventions: hermite() is the physicists' H_n; re_pcf_even(nu, u) is
// Re D_{-(2nu+2)}(-iu) for the parabolic cylinder function D_p.

#include <span>
#include <vector>

namespace nctomo::specfun {

/// ln C(k, n). Throws DomainError when n > k.
double log_binomial(long k, long n);

/// ln n!
double log_factorial(long n);

/// L_0(z) .. L_{out.size()-1}(z) by the three-term recurrence.
void laguerre_all(double z, std::span<double> out);

/// H_0(y) .. H_{out.size()-1}(y) by the three-term recurrence.
void hermite_all(double y, std::span<double> out);

/// Gauss-Legendre rule on [-1, 1].
struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// 20-point Gauss-Legendre rule (the panel rule used by the kernel tables).
const QuadratureRule& gauss_legendre_20();

/// Value of Re D_{-(2nu+2)}(-iu) together with an estimate of its relative
/// rounding error.
struct PcfValue {
  double value = 0.0;
  double relative_error = 0.0;
};

/// Tables sized for photon numbers up to max_order.
///
/// Holds log-factorials up to 2*max_order+2 and the per-order coefficients
/// (-1)^nu C(n,nu) (2nu+1)!/nu! of the photon-number kernel in log form.
/// All members are read-only after construction and may be shared between
/// threads.
class KernelTables {
 public:
  explicit KernelTables(int max_order, double precision_threshold = 1e-6);

  int max_order() const { return max_order_; }
  double precision_threshold() const { return precision_threshold_; }

  /// H_n(y), n <= 2*max_order + 2.
  double hermite(int n, double y) const;

  /// Re D_{-(2nu+2)}(-iu), nu <= max_order. Throws PrecisionLoss when the
  /// rounding estimate exceeds precision_threshold().
  double re_pcf_even(int nu, double u) const;

  /// Same as re_pcf_even() but never throws on precision; the caller gets
  /// the rounding estimate.
  PcfValue re_pcf_even_checked(int nu, double u) const;

  /// Re D_{-(2nu+2)}(-iu) for nu = 0 .. out.size()-1 in one sweep.
  void re_pcf_even_all(double u, std::span<PcfValue> out) const;

  /// ln|(2nu+1)! C(n,nu) / nu!|; the sign of the coefficient is (-1)^nu.
  double log_kernel_coefficient(int n, int nu) const;

  double log_factorial(int n) const;

 private:
  int max_order_;
  double precision_threshold_;
  std::vector<double> log_factorial_;
  std::vector<double> log_kernel_coeff_;  // row-major (n, nu)
};

}  // namespace nctomo::specfun
