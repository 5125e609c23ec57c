#include "nctomo/specfun.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <boost/math/quadrature/gauss.hpp>

#include "nctomo/error.hpp"

namespace nctomo::specfun {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();
constexpr double kLn2 = 0.69314718055994530942;

// Largest Kummer-series condition number accepted before switching to the
// recurrence in nu.
constexpr double kSeriesConditionLimit = 30.0;

template <class T>
struct SeriesResult {
  T value;
  T condition;
};

// M(nu+1, 1/2, -y) = e^{-y} M(-nu-1/2, 1/2, y). The transformed series has a
// single-signed tail, so it is well conditioned once y is not small compared
// with nu. Terms are carried in log form to survive e^{+-y} for large y.
template <class T>
SeriesResult<T> kummer_series(int nu, T y) {
  using std::abs;
  using std::exp;
  using std::log;
  if (y == 0) return {T(1), T(1)};
  const T a = -T(nu) - T(0.5);
  const T b = T(0.5);
  const T log_y = log(y);
  const T tiny = std::numeric_limits<T>::epsilon() / 16;
  T log_term = 0;
  T sign = 1;
  T sum = 0;
  T abs_sum = 0;
  for (long k = 0; k < 200000; ++k) {
    const T term = sign * exp(log_term - y);
    sum += term;
    abs_sum += abs(term);
    if (k > nu + 1 && k > y && abs(term) <= tiny * abs(sum)) break;
    const T num = a + T(k);
    log_term += log(abs(num)) - log(b + T(k)) - log(T(k + 1)) + log_y;
    if (num < 0) sign = -sign;
  }
  const T cond = sum != 0 ? abs_sum / abs(sum) : std::numeric_limits<T>::infinity();
  return {sum, cond};
}

// M_nu = M(nu+1, 1/2, -y), nu = 0..count-1: Kummer series while well
// conditioned, then the three-term recurrence in nu. `switch_at` < 0 picks
// the switch point from the series condition; otherwise it is imposed so two
// precisions follow the same path.
template <class T>
int kummer_sequence(int count, T y, std::vector<T>& m, int switch_at) {
  m.assign(static_cast<std::size_t>(count), T(0));
  const T b = T(0.5);
  int nu = 0;
  for (; nu < count; ++nu) {
    if (switch_at >= 0 && nu >= switch_at) break;
    const auto s = kummer_series<T>(nu, y);
    if (switch_at < 0 && nu >= 2 && !(s.condition <= T(kSeriesConditionLimit))) break;
    m[nu] = s.value;
  }
  const int first_recurrence = nu;
  for (; nu < count; ++nu) {
    // DLMF 13.3.1 with a = nu: a M(a+1) = (b-a) M(a-1) + (2a-b+z) M(a), z=-y.
    const T a = T(nu);
    m[nu] = ((b - a) * m[nu - 2] + (T(2) * a - b - y) * m[nu - 1]) / a;
  }
  return first_recurrence;
}

}  // namespace

double log_factorial(long n) {
  if (n < 0) throw DomainError("log_factorial: negative argument");
  return std::lgamma(static_cast<double>(n) + 1.0);
}

double log_binomial(long k, long n) {
  if (n < 0 || k < 0 || n > k) {
    throw DomainError("log_binomial: need 0 <= n <= k, got k=" + std::to_string(k) +
                      " n=" + std::to_string(n));
  }
  const long m = std::min(n, k - n);
  if (m == 0) return 0.0;
  if (k <= 1000) {
    // Multiplicative form; C(1000, 500) ~ 1e299 still fits a double.
    double c = 1.0;
    for (long i = 1; i <= m; ++i) c = c * static_cast<double>(k - m + i) / static_cast<double>(i);
    return std::log(c);
  }
  return std::lgamma(k + 1.0) - std::lgamma(n + 1.0) - std::lgamma(static_cast<double>(k - n) + 1.0);
}

void laguerre_all(double z, std::span<double> out) {
  if (out.empty()) return;
  out[0] = 1.0;
  if (out.size() == 1) return;
  out[1] = 1.0 - z;
  for (std::size_t k = 1; k + 1 < out.size(); ++k) {
    const double kk = static_cast<double>(k);
    out[k + 1] = ((2.0 * kk + 1.0 - z) * out[k] - kk * out[k - 1]) / (kk + 1.0);
  }
}

void hermite_all(double y, std::span<double> out) {
  if (out.empty()) return;
  out[0] = 1.0;
  if (out.size() == 1) return;
  out[1] = 2.0 * y;
  for (std::size_t k = 1; k + 1 < out.size(); ++k) {
    out[k + 1] = 2.0 * y * out[k] - 2.0 * static_cast<double>(k) * out[k - 1];
  }
}

const QuadratureRule& gauss_legendre_20() {
  static const QuadratureRule rule = [] {
    using Gauss = boost::math::quadrature::gauss<double, 20>;
    QuadratureRule r;
    const auto& x = Gauss::abscissa();
    const auto& w = Gauss::weights();
    for (std::size_t i = x.size(); i-- > 0;) {
      r.nodes.push_back(-x[i]);
      r.weights.push_back(w[i]);
    }
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (x[i] == 0.0) continue;
      r.nodes.push_back(x[i]);
      r.weights.push_back(w[i]);
    }
    return r;
  }();
  return rule;
}

KernelTables::KernelTables(int max_order, double precision_threshold)
    : max_order_(max_order), precision_threshold_(precision_threshold) {
  if (max_order < 0) throw DomainError("KernelTables: max_order must be >= 0");
  const int nf = 2 * max_order + 3;
  log_factorial_.resize(static_cast<std::size_t>(nf) + 1);
  log_factorial_[0] = 0.0;
  for (int i = 1; i <= nf; ++i) log_factorial_[i] = log_factorial_[i - 1] + std::log(static_cast<double>(i));

  const auto width = static_cast<std::size_t>(max_order) + 1;
  log_kernel_coeff_.assign(width * width, -std::numeric_limits<double>::infinity());
  for (int n = 0; n <= max_order; ++n) {
    for (int nu = 0; nu <= n; ++nu) {
      log_kernel_coeff_[static_cast<std::size_t>(n) * width + nu] =
          log_factorial_[2 * nu + 1] + log_binomial(n, nu) - log_factorial_[nu];
    }
  }
}

double KernelTables::log_factorial(int n) const {
  if (n < 0 || static_cast<std::size_t>(n) >= log_factorial_.size()) {
    throw OrderOutOfRange("KernelTables::log_factorial: " + std::to_string(n) + " outside table");
  }
  return log_factorial_[n];
}

double KernelTables::log_kernel_coefficient(int n, int nu) const {
  if (n < 0 || n > max_order_ || nu < 0 || nu > n) {
    throw OrderOutOfRange("KernelTables::log_kernel_coefficient: (n, nu) outside table");
  }
  return log_kernel_coeff_[static_cast<std::size_t>(n) * (max_order_ + 1) + nu];
}

double KernelTables::hermite(int n, double y) const {
  if (n < 0 || n > 2 * max_order_ + 2) {
    throw OrderOutOfRange("hermite: order " + std::to_string(n) + " exceeds 2*max_order+2 = " +
                          std::to_string(2 * max_order_ + 2));
  }
  std::vector<double> h(static_cast<std::size_t>(n) + 1);
  hermite_all(y, h);
  return h.back();
}

void KernelTables::re_pcf_even_all(double u, std::span<PcfValue> out) const {
  if (out.empty()) return;
  const int count = static_cast<int>(out.size());
  if (count - 1 > max_order_) {
    throw OrderOutOfRange("re_pcf_even: order " + std::to_string(count - 1) + " exceeds max_order " +
                          std::to_string(max_order_));
  }
  // The sequence is computed in double and in long double along the same
  // path; the long double values are returned and the difference, scaled by
  // the ratio of unit roundoffs, serves as their rounding estimate.
  std::vector<double> md;
  std::vector<long double> ml;
  const int path = kummer_sequence<double>(count, 0.5 * u * u, md, -1);
  kummer_sequence<long double>(count, 0.5L * u * u, ml, path);
  constexpr double kRoundoffRatio =
      static_cast<double>(std::numeric_limits<long double>::epsilon()) / kEps;

  // Re D_{-(2nu+2)}(-iu) = e^{u^2/4} 2^nu nu! / (2nu+1)! * M_nu.
  for (int nu = 0; nu < count; ++nu) {
    const double log_scale = 0.25 * u * u + nu * kLn2 + log_factorial_[nu] - log_factorial_[2 * nu + 1];
    const long double mag = std::abs(ml[nu]);
    double value = 0.0;
    if (mag > 0.0L) value = std::copysign(std::exp(log_scale + static_cast<double>(std::log(mag))), static_cast<double>(ml[nu]));
    out[nu].value = value;
    if (mag > 0.0L) {
      const double diff = static_cast<double>(std::abs(static_cast<long double>(md[nu]) - ml[nu]) / mag);
      out[nu].relative_error = std::max(kEps, diff * kRoundoffRatio);
    } else {
      out[nu].relative_error = std::numeric_limits<double>::infinity();
    }
  }
}

PcfValue KernelTables::re_pcf_even_checked(int nu, double u) const {
  if (nu < 0 || nu > max_order_) {
    throw OrderOutOfRange("re_pcf_even: order " + std::to_string(nu) + " outside [0, " +
                          std::to_string(max_order_) + "]");
  }
  std::vector<PcfValue> all(static_cast<std::size_t>(nu) + 1);
  re_pcf_even_all(u, all);
  return all.back();
}

double KernelTables::re_pcf_even(int nu, double u) const {
  const auto v = re_pcf_even_checked(nu, u);
  if (!(v.relative_error <= precision_threshold_)) {
    throw PrecisionLoss("re_pcf_even(" + std::to_string(nu) + ", " + std::to_string(u) +
                        "): estimated relative error " + std::to_string(v.relative_error) +
                        " exceeds threshold");
  }
  return v.value;
}

}  // namespace nctomo::specfun
