#pragma once

// Nonclassicality criteria with first-order error propagation.
//
// B(n) = (n+2) p(n) p(n+2) - (n+1) p(n+1)^2 and the two-mode
// C = <(n1-n2)^2> - <n1-n2>^2 - <n1+n2>; negative values certify a
// nonclassical state. Values always come from the full-data estimates; the
// errors use the covariance of the block means.

#include <complex>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "nctomo/sampler.hpp"
#include "nctomo/tomo.hpp"

namespace nctomo::nctest {

inline constexpr double kDefaultSigmaThreshold = 3.0;

enum class CriterionKind { single_mode_B, two_mode_C };
std::string to_string(CriterionKind kind);

struct ReportMetadata {
  std::string state_label;
  double eta = 1.0;
  std::size_t n_samples = 0;
  std::uint64_t seed = 0;
  std::string mode;
};

struct CriterionReport {
  CriterionKind kind = CriterionKind::single_mode_B;
  std::vector<double> values;
  std::vector<double> std_err;
  /// values / std_err; +-inf for a nonzero value with zero error, 0 for
  /// an exact zero. Exact inputs carry their rounding error as std_err.
  std::vector<double> significance;
  double k_sigma = kDefaultSigmaThreshold;
  bool nonclassical = false;
  ReportMetadata metadata;

  /// True when any value < -k * stderr.
  static bool verdict(const std::vector<double>& values, const std::vector<double>& std_err, double k_sigma);
};

/// Block covariance of the means: sum_b (m_b - m)(m_b - m)^T / (B (B - 1)),
/// row-major dim x dim, for the selected columns.
std::vector<double> block_covariance(const std::vector<std::vector<double>>& block_means,
                                     const std::vector<double>& full_means, const std::vector<int>& columns);

/// B(n), n = 0 .. n_max-2. Refuses (EstimatorRefusal) sampled estimates with
/// fewer than 3 blocks.
CriterionReport compute_B(const tomo::NumberDistEstimate& est, double k_sigma = kDefaultSigmaThreshold);

/// Single-entry report holding C.
CriterionReport compute_C(const tomo::MomentEstimate& est, double k_sigma = kDefaultSigmaThreshold);

/// One fresh twin-beam dataset per eta (seed derive_seed(seed, index)),
/// reported in the order given.
std::vector<CriterionReport> sweep_C_vs_eta(std::complex<double> lambda, const std::vector<double>& etas,
                                            std::size_t count_per_eta, std::uint64_t seed,
                                            int n_blocks = tomo::kDefaultBlocks,
                                            double k_sigma = kDefaultSigmaThreshold);

nlohmann::json to_json(const CriterionReport& report);
/// Columns n, B, stderr, significance (single mode) or C, stderr, significance.
void write_csv(const CriterionReport& report, const std::filesystem::path& path);

}  // namespace nctomo::nctest
