#pragma once

// Homodyne estimators: the photon-number kernel, Richter moment kernels and
// block-wise sample averaging.

#include <array>
#include <complex>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "nctomo/sampler.hpp"
#include "nctomo/specfun.hpp"
#include "nctomo/states.hpp"

namespace nctomo::tomo {

/// Largest photon number the number kernel is evaluated for.
inline constexpr int kMaxKernelOrder = 40;
inline constexpr int kDefaultBlocks = 50;

enum class Mode { true_state, noisy_state };

std::string to_string(Mode mode);
/// Accepts "true_state" / "noisy_state"; throws ConfigError otherwise.
Mode mode_from_string(const std::string& text);

/// kappa^2 = eta / (2 eta - 1); throws DomainError for eta <= 0.5.
double kappa_squared(double eta);

/// Photon-number kernels K^(n)_eta for n = 0..n_max.
///
/// Evaluated through the integral form
///   K^(n)_eta(x) = 2 int_0^inf s exp(-s^2 / (2 kappa^2)) L_n(s^2) cos(2 x s) ds,
/// tabulated on |x| <= 16 as piecewise Chebyshev series; larger |x| fall back
/// to direct quadrature. Construction throws PrecisionLoss when the
/// quadrature's absolute rounding bound exceeds 1e-6 (eta close to 1/2 with
/// large n).
class NumberKernel {
 public:
  NumberKernel(double eta, int n_max);

  /// Shared instance per (eta, n_max).
  static std::shared_ptr<const NumberKernel> cached(double eta, int n_max);

  double eta() const { return eta_; }
  int n_max() const { return n_max_; }
  /// Estimated absolute rounding error of any kernel value.
  double error_bound() const { return error_bound_; }

  /// out[n] = K^(n)(x) for n < out.size() <= n_max + 1.
  void evaluate(double x, std::span<double> out) const;
  double operator()(int n, double x) const;

  /// Same values by quadrature alone (no table).
  void evaluate_direct(double x, std::span<double> out) const;

 private:
  double eta_;
  int n_max_;
  double kappa2_;
  double error_bound_ = 0.0;
  // Quadrature for |x| <= table range: weights already include 2 s e^{-s^2/2k^2}.
  std::vector<double> nodes_;
  std::vector<double> weights_;
  std::vector<double> laguerre_;  // node-major: [q * (n_max+1) + n]
  // Chebyshev tables, layout [interval][k][n].
  double width_ = 0.0;
  int intervals_ = 0;
  std::vector<double> coeffs_;
};

/// K^(n)_eta(x). Requires eta > 0.5 and n <= kMaxKernelOrder.
double number_kernel(int n, double eta, double x);

/// The same kernel through the finite sum over Re D_{-(2nu+2)}(-2i kappa x).
/// Loses relative accuracy like (1 + 2kappa^2)^n / (2kappa^2 - 1)^n and
/// overflows for kappa |x| beyond ~13; used as an independent check.
double number_kernel_series(int n, double eta, double x, const specfun::KernelTables& tables);

/// Richter kernel of a^dag^n a^m:
/// e^{i(m-n)phi} H_{n+m}(sqrt(2 eta) x) / (sqrt((2 eta)^{n+m}) C(n+m, n)).
std::complex<double> richter_kernel(int n, int m, double eta, double x, double phi);

/// Real fast path of richter_kernel(n, n, eta, x, .).
double richter_kernel_diag(int n, double eta, double x);

struct NumberDistEstimate {
  std::vector<double> probs;
  std::vector<double> std_err;
  /// Per-block sample means, block-major; empty for exact inputs.
  std::vector<std::vector<double>> block_means;
  std::vector<std::size_t> block_sizes;
  std::size_t n_samples = 0;
  double kernel_eta = 1.0;
  double data_eta = 1.0;
  Mode mode = Mode::noisy_state;
  bool exact = false;
  std::string state_label;
  std::uint64_t seed = 0;

  int n_max() const { return static_cast<int>(probs.size()) - 1; }

  /// Wraps an exact distribution (zero uncertainty).
  static NumberDistEstimate from_exact(const states::PhotonDist& dist, int n_max, double eta = 1.0);
};

enum class Moment { n1 = 0, n2, n1_sq, n2_sq, n1n2 };
inline constexpr std::array<const char*, 5> kMomentNames = {"n1", "n2", "n1^2", "n2^2", "n1n2"};

struct MomentEstimate {
  std::array<double, 5> values{};
  std::array<double, 5> std_err{};
  std::vector<std::array<double, 5>> block_means;
  std::vector<std::size_t> block_sizes;
  std::size_t n_samples = 0;
  double kernel_eta = 1.0;
  double data_eta = 1.0;
  bool exact = false;
  std::string state_label;
  std::uint64_t seed = 0;

  double value(Moment m) const { return values[static_cast<std::size_t>(m)]; }
  double error(Moment m) const { return std_err[static_cast<std::size_t>(m)]; }

  static MomentEstimate from_exact(const std::array<double, 5>& moments, double eta = 1.0);
};

/// Sample means of K^(n) over the dataset in n_blocks contiguous blocks.
/// true_state applies K_eta to x and needs data.eta > 0.5 (EstimatorRefusal
/// otherwise); noisy_state applies K_1 to sqrt(data.eta) x and so estimates
/// the Bernoulli-convolved distribution at any efficiency.
NumberDistEstimate estimate_photon_dist(const sampler::HomodyneDataset& data, Mode mode, int n_max,
                                        int n_blocks = kDefaultBlocks);

/// Same result, bit for bit, as estimate_photon_dist(sample_single(state, eta,
/// count, seed, policy, chunk_size), ...) without holding the samples.
NumberDistEstimate estimate_photon_dist_streaming(const states::StateModel& state, double eta, std::size_t count,
                                                  std::uint64_t seed, Mode mode, int n_max,
                                                  int n_blocks = kDefaultBlocks,
                                                  sampler::PhasePolicy policy = sampler::PhasePolicy::fluctuating(),
                                                  std::size_t chunk_size = sampler::kDefaultChunkSize);

/// <n1>, <n2>, <n1^2>, <n2^2>, <n1 n2> of the detected (lossy) twin state from
/// eta = 1 Richter kernels applied to sqrt(data.eta) x_i.
MomentEstimate estimate_two_mode_moments(const sampler::HomodyneDataset& data, int n_blocks = kDefaultBlocks);

nlohmann::json to_json(const NumberDistEstimate& est, bool include_blocks = false);
nlohmann::json to_json(const MomentEstimate& est, bool include_blocks = false);
/// Columns n, p, stderr.
void write_csv(const NumberDistEstimate& est, const std::filesystem::path& path);

}  // namespace nctomo::tomo
