// Acceptance run: one PASS/FAIL line per criterion at the pinned tolerances.
//
//   acceptance            run everything
//   acceptance --only 5a  run one criterion (ids: 1 2 3 4 5a 5b 6a 6b 6c 7 8)
//
// Exit status is nonzero when any selected criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "kernel_identity.hpp"
#include "nctomo/expcli.hpp"
#include "nctomo/nctest.hpp"
#include "nctomo/parallel.hpp"
#include "nctomo/states.hpp"
#include "nctomo/tomo.hpp"
#include "oracles.hpp"

using namespace nctomo;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

// 1: kernel identities, ideal and deconvolved, for the coherent and squeezed fixtures.
Outcome kernel_identities() {
  constexpr double kTol = 1e-6;
  double worst = 0.0;
  for (const auto& state : {states::fixtures::coherent_unit(), states::fixtures::phase_squeezed()}) {
    const auto p = states::photon_dist(state).probs;
    for (double eta : {1.0, 0.8}) {
      const auto avg = identity::kernel_average(state, eta, eta, 1.0, 10);
      for (int n = 0; n <= 10; ++n) worst = std::max(worst, std::abs(avg[n] - p[n]));
    }
  }
  return {worst <= kTol, "max |int p K - p(n)| = " + sci(worst) + " (tol 1e-6; coherent, squeezed; eta 1, 0.8; n <= 10)"};
}

// 2: the eta = 1 kernel on lossy data gives the Bernoulli-convolved distribution.
Outcome noisy_consistency() {
  constexpr double kTol = 1e-6;
  double worst = 0.0;
  for (const auto& state : {states::fixtures::coherent_unit(), states::fixtures::phase_squeezed(),
                            states::fixtures::even_cat(5.0)}) {
    const auto p = states::photon_dist(state).probs;
    for (double eta : {0.8, 0.4}) {
      const auto ref = oracle::bernoulli(p, eta);
      const auto avg = identity::kernel_average(state, eta, 1.0, std::sqrt(eta), 8);
      for (int n = 0; n <= 8; ++n) worst = std::max(worst, std::abs(avg[n] - ref[n]));
    }
  }
  return {worst <= kTol, "max |int p_eta K_1 - p_eta(n)| = " + sci(worst) + " (tol 1e-6; eta 0.8, 0.4; n <= 8)"};
}

// 3: coherent null test.
Outcome coherent_null() {
  const auto est = tomo::estimate_photon_dist_streaming(states::fixtures::coherent_unit(), 0.8, 1'000'000, 2024,
                                                        tomo::Mode::noisy_state, 12);
  const auto b = nctest::compute_B(est);
  double worst = 0.0;
  for (int n = 0; n <= 10; ++n) worst = std::max(worst, std::abs(b.significance[n]));
  return {worst < 4.0, "max |B/stderr| = " + sci(worst) + " over n <= 10 (need < 4; 1e6 samples, eta 0.8, seed 2024)"};
}

// 4: even cat at desk scale.
Outcome fig4_desk() {
  const auto c = expcli::find_preset("fig4", true).config;
  const auto est = tomo::estimate_photon_dist_streaming(c.state, c.eta, c.samples, c.seed, c.mode, c.n_max,
                                                        c.n_blocks);
  const auto b = nctest::compute_B(est);
  double worst = 0.0;
  double min_sig = std::numeric_limits<double>::infinity();
  for (int n = 0; n <= 8; ++n) {
    worst = std::max(worst, std::abs(b.values[n] - states::theoretical_B(c.state, c.eta, n)) / b.std_err[n]);
  }
  for (double s : b.significance) min_sig = std::min(min_sig, s);
  return {worst < 4.0 && min_sig <= -3.0,
          "max |B - theory|/stderr = " + sci(worst) + " (n <= 8, need < 4); min significance " + sci(min_sig) +
              " (need <= -3); " + std::to_string(c.samples) + " samples, seed " + std::to_string(c.seed)};
}

nctest::CriterionReport fig7_run(bool desk) {
  const auto c = expcli::find_preset("fig7", desk).config;
  const auto est = tomo::estimate_photon_dist_streaming(c.state, c.eta, c.samples, c.seed, c.mode, c.n_max,
                                                        c.n_blocks);
  return nctest::compute_B(est);
}

// 5a: squeezed state at eta = 0.4, full scale.
Outcome fig7_full() {
  const auto b = fig7_run(false);
  const double theory = states::theoretical_B(expcli::find_preset("fig7", false).config.state, 0.4, 0);
  return {b.values[0] < 0.0 && b.significance[0] < -5.0,
          "B(0) = " + sci(b.values[0]) + " +- " + sci(b.std_err[0]) + ", significance " + sci(b.significance[0]) +
              " (need < -5); theory " + sci(theory) + "; 5e7 samples"};
}

// 5b: desk scale, agreement with the oracle only.
Outcome fig7_desk() {
  const auto b = fig7_run(true);
  const double theory = states::theoretical_B(expcli::find_preset("fig7", true).config.state, 0.4, 0);
  const double dev = std::abs(b.values[0] - theory) / b.std_err[0];
  return {dev < 3.0, "|B(0) - theory|/stderr = " + sci(dev) + " (need < 3); B(0) = " + sci(b.values[0]) + " +- " +
                         sci(b.std_err[0]) + ", theory " + sci(theory) + "; 5e6 samples"};
}

struct SweepResult {
  std::vector<double> etas;
  std::vector<nctest::CriterionReport> reports;
};

const SweepResult& fig9_sweep() {
  static const SweepResult result = [] {
    const auto c = expcli::find_preset("fig9", false).config;
    const auto lambda = std::get<states::TwinBeam>(c.state.kind()).lambda;
    return SweepResult{*c.sweep, nctest::sweep_C_vs_eta(lambda, *c.sweep, c.samples, c.seed, c.n_blocks, c.k_sigma)};
  }();
  return result;
}

// 6a: every point of the sweep agrees with -2 eta^2.
Outcome fig9_agreement() {
  const auto& s = fig9_sweep();
  double worst = 0.0;
  double worst_eta = 0.0;
  for (std::size_t i = 0; i < s.etas.size(); ++i) {
    const double dev =
        std::abs(s.reports[i].values[0] - states::theoretical_C_intensity(0.5, s.etas[i])) / s.reports[i].std_err[0];
    if (dev > worst) {
      worst = dev;
      worst_eta = s.etas[i];
    }
  }
  return {worst < 4.0, "max |C - (-2 eta^2)|/stderr = " + sci(worst) + " at eta " + sci(worst_eta) +
                           " (need < 4; 15 points, 4e5 samples each)"};
}

// 6b: still nonclassical at eta = 0.3.
Outcome fig9_lowest() {
  const auto& s = fig9_sweep();
  const auto& r = s.reports.back();
  return {s.etas.back() == 0.3 && r.values[0] < -3.0 * r.std_err[0],
          "C(0.3) = " + sci(r.values[0]) + " +- " + sci(r.std_err[0]) + ", significance " + sci(r.significance[0]) +
              " (need <= -3)"};
}

// Standard deviation of the single-sample influence function of C at
// efficiency eta, from the exact joint density averaged over the phase sum.
double c_single_sample_sd(double lambda_squared, double eta) {
  const std::complex<double> lambda(std::sqrt(lambda_squared), 0.0);
  const auto m = states::twin_beam_moments(lambda, eta);
  const double d = m[0] - m[1];
  const double g[5] = {-2.0 * d - 1.0, 2.0 * d - 1.0, 1.0, 1.0, -2.0};
  std::vector<double> xs, ws;
  oracle::composite_rule(-9.0, 9.0, 24, xs, ws);
  const double s = std::sqrt(eta);
  constexpr int kPhases = 32;
  double second = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double k1 = tomo::richter_kernel_diag(1, 1.0, s * xs[i]);
    const double q1 = tomo::richter_kernel_diag(2, 1.0, s * xs[i]) + k1;
    for (std::size_t j = 0; j < xs.size(); ++j) {
      const double k2 = tomo::richter_kernel_diag(1, 1.0, s * xs[j]);
      const double q2 = tomo::richter_kernel_diag(2, 1.0, s * xs[j]) + k2;
      double density = 0.0;
      for (int p = 0; p < kPhases; ++p) {
        density += states::twin_joint_pdf(lambda, eta, xs[i], xs[j], 2.0 * M_PI * p / kPhases, 0.0);
      }
      density /= kPhases;
      const double f = g[0] * k1 + g[1] * k2 + g[2] * q1 + g[3] * q2 + g[4] * k1 * k2;
      second += ws[i] * ws[j] * density * f * f;
    }
  }
  double mean = 0.0;
  for (int k = 0; k < 5; ++k) mean += g[k] * m[k];
  return std::sqrt(second - mean * mean);
}

// 6c: error bars roughly constant across the grid.
Outcome fig9_flat_errors() {
  const auto& s = fig9_sweep();
  double lo = std::numeric_limits<double>::infinity();
  double hi = 0.0;
  for (const auto& r : s.reports) {
    lo = std::min(lo, r.std_err[0]);
    hi = std::max(hi, r.std_err[0]);
  }
  const double predicted = c_single_sample_sd(0.5, s.etas.front()) / c_single_sample_sd(0.5, s.etas.back());
  return {hi / lo < 2.0, "stderr max/min = " + sci(hi / lo) + " (need < 2); stderr " + sci(s.reports.front().std_err[0]) +
                             " at eta 1, " + sci(s.reports.back().std_err[0]) +
                             " at eta 0.3; exact single-sample variance predicts " + sci(predicted)};
}

// 7: closed-form cross-checks.
Outcome oracle_checks() {
  const double c = states::theoretical_C_intensity(0.5, 1.0);
  double coherent_worst = 0.0;
  for (const auto alpha : {std::complex<double>(1.0, 0.0), std::complex<double>(0.3, -1.7), std::complex<double>(2.5, 0.5)}) {
    const auto state = states::StateModel::coherent(alpha);
    for (double eta : {1.0, 0.8, 0.4}) {
      const auto p = states::bernoulli_convolve(states::photon_dist(state), eta).probs;
      for (int n = 0; n <= 30; ++n) {
        const double scale = (n + 2.0) * p[n] * p[n + 2];
        if (scale == 0.0) continue;
        coherent_worst =
            std::max(coherent_worst, std::abs(states::theoretical_B(state, eta, n)) / scale / std::numeric_limits<double>::epsilon());
      }
    }
  }
  const auto cat = states::fixtures::even_cat(5.0);
  const auto pc = states::photon_dist(cat).probs;
  double cat_worst = 0.0;
  for (int n = 1; n <= 39; n += 2) {
    const double expected = -(n + 1.0) * pc[n + 1] * pc[n + 1];
    cat_worst = std::max(cat_worst, std::abs(states::theoretical_B(cat, 1.0, n) - expected) / std::abs(expected));
  }
  const bool pass = c == -2.0 && coherent_worst <= 16.0 && cat_worst <= 1e-15;
  return {pass, "C(0.5, 1) = " + sci(c) + " (need -2 exactly); coherent |B| <= " + sci(coherent_worst) +
                    " ulp of (n+2)p(n)p(n+2) (need <= 16); cat odd-n rel. dev. " + sci(cat_worst) + " (need <= 1e-15)"};
}

// 8: byte-identical reruns and worker-count independence.
Outcome determinism() {
  const auto root = fs::temp_directory_path() / "nctomo_acceptance_det";
  fs::remove_all(root);
  auto c = expcli::find_preset("fig9", true).config;
  c.seed = 42;
  auto csv_of = [&](const std::string& sub, int workers) {
    set_worker_count(workers);
    c.out_dir = root / sub;
    const auto r = expcli::run(c);
    std::ifstream is(r.csv, std::ios::binary);
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
  };
  const auto first = csv_of("a", 0);
  const auto second = csv_of("b", 0);
  const auto one = csv_of("c", 1);
  const auto three = csv_of("d", 3);
  set_worker_count(0);
  fs::remove_all(root);
  const bool pass = !first.empty() && first == second && first == one && first == three;
  return {pass, std::string("fig9 desk seed 42: rerun ") + (first == second ? "identical" : "differs") + ", 1 vs 3 workers " +
                    (one == three && one == first ? "identical" : "differ") + " (" + std::to_string(first.size()) +
                    " bytes)"};
}

struct Criterion {
  std::string id;
  std::string title;
  std::function<Outcome()> check;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::optional<std::string> only;
  app.add_option("--only", only, "Run a single criterion");
  CLI11_PARSE(app, argc, argv);

  const std::vector<Criterion> criteria = {
      {"1", "kernel identities", kernel_identities},
      {"2", "noisy-state consistency", noisy_consistency},
      {"3", "coherent null test", coherent_null},
      {"4", "even cat, desk scale", fig4_desk},
      {"5a", "squeezed eta=0.4, full scale", fig7_full},
      {"5b", "squeezed eta=0.4, desk scale", fig7_desk},
      {"6a", "twin-beam sweep agreement", fig9_agreement},
      {"6b", "twin beam nonclassical at eta=0.3", fig9_lowest},
      {"6c", "twin-beam error bars flat", fig9_flat_errors},
      {"7", "oracle cross-checks", oracle_checks},
      {"8", "determinism", determinism},
  };
  if (only && std::none_of(criteria.begin(), criteria.end(), [&](const auto& c) { return c.id == *only; })) {
    std::fprintf(stderr, "unknown criterion \"%s\"\n", only->c_str());
    return 2;
  }

  int failures = 0;
  for (const auto& c : criteria) {
    if (only && c.id != *only) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.check();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("%s %-3s %-34s %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", c.id.c_str(), c.title.c_str(), o.detail.c_str(),
                secs);
    std::fflush(stdout);
    if (!o.pass) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
