#include "nctomo/nctest.hpp"

#include <cmath>
#include <limits>

#include "nctomo/error.hpp"
#include "nctomo/rng.hpp"
#include "textio.hpp"

namespace nctomo::nctest {

namespace {

constexpr int kMinCovarianceBlocks = 3;

// Error bar of an exact input: rounding of probabilities or moments computed
// in double (lgamma, exp, long sums) and of the final combination, taken as
// 64 units of roundoff on the sum of the magnitudes of the terms.
constexpr double kRoundingUnits = 64.0 * std::numeric_limits<double>::epsilon();

double quadratic_form(const std::vector<double>& g, const std::vector<double>& cov) {
  const std::size_t d = g.size();
  double s = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d; ++j) s += g[i] * cov[i * d + j] * g[j];
  }
  return std::max(0.0, s);
}

double significance_of(double value, double err) {
  if (err > 0.0) return value / err;
  if (value == 0.0) return 0.0;
  return value > 0.0 ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
}

void finish(CriterionReport& r) {
  r.significance.resize(r.values.size());
  for (std::size_t i = 0; i < r.values.size(); ++i) r.significance[i] = significance_of(r.values[i], r.std_err[i]);
  r.nonclassical = CriterionReport::verdict(r.values, r.std_err, r.k_sigma);
}

void check_k(double k_sigma) {
  if (!(k_sigma > 0.0) || !std::isfinite(k_sigma)) throw DomainError("criterion: k_sigma must be positive");
}

}  // namespace

std::string to_string(CriterionKind kind) { return kind == CriterionKind::single_mode_B ? "single_mode_B" : "two_mode_C"; }

bool CriterionReport::verdict(const std::vector<double>& values, const std::vector<double>& std_err, double k_sigma) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i] < -k_sigma * std_err[i]) return true;
  }
  return false;
}

std::vector<double> block_covariance(const std::vector<std::vector<double>>& block_means,
                                     const std::vector<double>& full_means, const std::vector<int>& columns) {
  const std::size_t d = columns.size();
  const std::size_t nb = block_means.size();
  std::vector<double> cov(d * d, 0.0);
  if (nb < 2) return cov;
  for (const auto& m : block_means) {
    for (std::size_t i = 0; i < d; ++i) {
      const double di = m[columns[i]] - full_means[columns[i]];
      for (std::size_t j = 0; j < d; ++j) cov[i * d + j] += di * (m[columns[j]] - full_means[columns[j]]);
    }
  }
  const double norm = static_cast<double>(nb) * static_cast<double>(nb - 1);
  for (double& c : cov) c /= norm;
  return cov;
}

CriterionReport compute_B(const tomo::NumberDistEstimate& est, double k_sigma) {
  check_k(k_sigma);
  if (est.probs.size() < 3) throw DomainError("compute_B: need p(n) for at least n = 0, 1, 2");
  if (!est.exact && est.block_means.size() < static_cast<std::size_t>(kMinCovarianceBlocks)) {
    throw EstimatorRefusal("compute_B: " + std::to_string(est.block_means.size()) +
                           " blocks give a degenerate 3x3 covariance; need at least 3");
  }
  CriterionReport r;
  r.kind = CriterionKind::single_mode_B;
  r.k_sigma = k_sigma;
  r.metadata = {est.state_label, est.data_eta, est.n_samples, est.seed, tomo::to_string(est.mode)};
  const auto& p = est.probs;
  const int last = static_cast<int>(p.size()) - 3;
  for (int n = 0; n <= last; ++n) {
    const double a = p[n];
    const double b = p[n + 1];
    const double c = p[n + 2];
    r.values.push_back((n + 2.0) * a * c - (n + 1.0) * b * b);
    if (est.exact) {
      r.std_err.push_back(kRoundingUnits * ((n + 2.0) * std::abs(a * c) + (n + 1.0) * b * b));
      continue;
    }
    const auto cov = block_covariance(est.block_means, p, {n, n + 1, n + 2});
    const std::vector<double> g = {(n + 2.0) * c, -2.0 * (n + 1.0) * b, (n + 2.0) * a};
    r.std_err.push_back(std::sqrt(quadratic_form(g, cov)));
  }
  finish(r);
  return r;
}

CriterionReport compute_C(const tomo::MomentEstimate& est, double k_sigma) {
  check_k(k_sigma);
  for (double v : est.values) {
    if (!std::isfinite(v)) throw DomainError("compute_C: missing or non-finite moment");
  }
  if (!est.exact && est.block_means.size() < static_cast<std::size_t>(kMinCovarianceBlocks)) {
    throw EstimatorRefusal("compute_C: " + std::to_string(est.block_means.size()) +
                           " blocks give a degenerate 5x5 covariance; need at least 3");
  }
  using tomo::Moment;
  const double m1 = est.value(Moment::n1);
  const double m2 = est.value(Moment::n2);
  CriterionReport r;
  r.kind = CriterionKind::two_mode_C;
  r.k_sigma = k_sigma;
  r.metadata = {est.state_label, est.data_eta, est.n_samples, est.seed, "noisy_state"};
  const double diff = m1 - m2;
  r.values.push_back(est.value(Moment::n1_sq) + est.value(Moment::n2_sq) - 2.0 * est.value(Moment::n1n2) -
                     diff * diff - (m1 + m2));
  if (est.exact) {
    double magnitude = std::abs(m1 + m2) + diff * diff + 2.0 * std::abs(est.value(Moment::n1n2));
    magnitude += std::abs(est.value(Moment::n1_sq)) + std::abs(est.value(Moment::n2_sq));
    r.std_err.push_back(kRoundingUnits * magnitude);
  } else {
    std::vector<std::vector<double>> blocks;
    blocks.reserve(est.block_means.size());
    for (const auto& b : est.block_means) blocks.emplace_back(b.begin(), b.end());
    const std::vector<double> full(est.values.begin(), est.values.end());
    const auto cov = block_covariance(blocks, full, {0, 1, 2, 3, 4});
    const std::vector<double> g = {-2.0 * diff - 1.0, 2.0 * diff - 1.0, 1.0, 1.0, -2.0};
    r.std_err.push_back(std::sqrt(quadratic_form(g, cov)));
  }
  finish(r);
  return r;
}

std::vector<CriterionReport> sweep_C_vs_eta(std::complex<double> lambda, const std::vector<double>& etas,
                                            std::size_t count_per_eta, std::uint64_t seed, int n_blocks,
                                            double k_sigma) {
  for (double eta : etas) {
    if (!(eta > 0.0 && eta <= 1.0)) throw DomainError("sweep_C_vs_eta: every eta must lie in (0, 1]");
  }
  if (!(std::abs(lambda) < 1.0)) throw DomainError("sweep_C_vs_eta: need |lambda| < 1");
  std::vector<CriterionReport> out;
  out.reserve(etas.size());
  for (std::size_t i = 0; i < etas.size(); ++i) {
    const auto data = sampler::sample_twin(lambda, etas[i], count_per_eta, derive_seed(seed, i));
    out.push_back(compute_C(tomo::estimate_two_mode_moments(data, n_blocks), k_sigma));
  }
  return out;
}

nlohmann::json to_json(const CriterionReport& report) {
  nlohmann::json sig = nlohmann::json::array();
  for (double s : report.significance) sig.push_back(detail::number_or_null(s));
  return {
      {"kind", to_string(report.kind)},
      {"values", report.values},
      {"stderr", report.std_err},
      {"significance", sig},
      {"k_sigma", report.k_sigma},
      {"nonclassical", report.nonclassical},
      {"metadata",
       {{"state_label", report.metadata.state_label},
        {"eta", report.metadata.eta},
        {"n_samples", report.metadata.n_samples},
        {"seed", report.metadata.seed},
        {"mode", report.metadata.mode}}},
  };
}

void write_csv(const CriterionReport& report, const std::filesystem::path& path) {
  auto os = detail::open_for_write(path);
  if (report.kind == CriterionKind::single_mode_B) {
    os << "n,B,stderr,significance\n";
    for (std::size_t n = 0; n < report.values.size(); ++n) {
      os << n << ',' << detail::fmt(report.values[n]) << ',' << detail::fmt(report.std_err[n]) << ','
         << detail::fmt(report.significance[n]) << '\n';
    }
  } else {
    os << "C,stderr,significance\n";
    os << detail::fmt(report.values[0]) << ',' << detail::fmt(report.std_err[0]) << ','
       << detail::fmt(report.significance[0]) << '\n';
  }
  detail::finish_write(os, path);
}

}  // namespace nctomo::nctest
