#pragma once

// Analytic source-state models: photon statistics, quadrature densities,
// loss (Bernoulli) convolution and closed-form nonclassicality values.
//
// Quadrature convention: x_phi = (a e^{-i phi} + a^dag e^{i phi}) / 2, so the
// vacuum has variance 1/4. Squeezing is S(r) = exp(r (a^dag^2 - a^2) / 2);
// r > 0 stretches the phi = 0 quadrature.

#include <array>
#include <complex>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

namespace nctomo::states {

using complex = std::complex<double>;

struct Coherent {
  complex alpha;
  bool operator==(const Coherent&) const = default;
};
struct Squeezed {
  complex alpha;
  double r = 0.0;
  bool operator==(const Squeezed&) const = default;
};
struct EvenCat {
  complex alpha;
  bool operator==(const EvenCat&) const = default;
};
struct TwinBeam {
  complex lambda;
  bool operator==(const TwinBeam&) const = default;
};

using StateKind = std::variant<Coherent, Squeezed, EvenCat, TwinBeam>;

/// Default tail-mass tolerance for the Fock truncation.
inline constexpr double kTailMass = 1e-12;
inline constexpr int kMinFockCutoff = 64;

class StateModel {
 public:
  /// fock_cutoff == 0 selects the smallest N with tail mass < 1e-12 (at
  /// least 64). An explicit cutoff is kept as given and checked when a
  /// photon distribution is requested.
  explicit StateModel(StateKind kind, int fock_cutoff = 0);

  static StateModel coherent(complex alpha, int fock_cutoff = 0);
  static StateModel squeezed(complex alpha, double r, int fock_cutoff = 0);
  static StateModel even_cat(complex alpha, int fock_cutoff = 0);
  static StateModel twin_beam(complex lambda, int fock_cutoff = 0);

  const StateKind& kind() const { return kind_; }
  int fock_cutoff() const { return fock_cutoff_; }
  bool explicit_cutoff() const { return explicit_cutoff_; }
  bool single_mode() const { return !std::holds_alternative<TwinBeam>(kind_); }

  /// Short human-readable description, e.g. "squeezed(alpha=0+1.414i, r=1.317)".
  std::string label() const;

  /// Mean photon number (per mode for the twin beam).
  double mean_photons() const;

  bool operator==(const StateModel& other) const;

 private:
  StateKind kind_;
  int fock_cutoff_;
  bool explicit_cutoff_;
};

struct PhotonDist {
  std::vector<double> probs;
  std::string label;
  /// 1 - sum(probs); positive when mass lies beyond the cutoff.
  double deficit = 0.0;

  double mean() const;
  double total() const;
};

/// Fock amplitudes <n|psi>, n = 0..fock_cutoff, of a single-mode state.
std::vector<complex> fock_amplitudes(const StateModel& state);

/// p(n) = |<n|psi>|^2 for single-mode states. Throws DomainError for the
/// twin beam and CutoffTooSmall when the deficit exceeds 1e-12.
PhotonDist photon_dist(const StateModel& state);

/// Marginal (= joint diagonal) photon distribution of the twin beam:
/// (1-|lambda|^2) |lambda|^{2n}.
PhotonDist twin_photon_dist(const StateModel& twin);

/// Bernoulli (binomial loss) convolution with efficiency eta in (0, 1].
PhotonDist bernoulli_convolve(const PhotonDist& p, double eta);

/// Variance (1-eta)/(4 eta) of the Gaussian noise equivalent to efficiency
/// eta in the rescaled homodyne convention.
double noise_variance(double eta);

/// Ideal (eta = 1) homodyne density of x at local-oscillator phase phi.
double quadrature_pdf(const StateModel& state, double phi, double x);

/// Homodyne density at efficiency eta: quadrature_pdf convolved with a
/// centred Gaussian of variance noise_variance(eta).
double quadrature_pdf_noisy(const StateModel& state, double eta, double phi, double x);

/// Density averaged uniformly over phi in [0, 2pi) with an n_phase-point
/// trapezoid rule (spectrally accurate for these periodic integrands).
double phase_averaged_pdf(const StateModel& state, double eta, double x, int n_phase = 256);

/// <x_phi^2> from the Fock amplitudes: (2<a^dag a> + 1 + 2 Re(<a^2> e^{-2i phi})) / 4.
double fock_second_moment(const StateModel& state, double phi);

/// Joint homodyne density of the twin beam at efficiency eta.
double twin_joint_pdf(complex lambda, double eta, double x1, double x2, double phi1, double phi2);

/// Exact <n1>, <n2>, <n1^2>, <n2^2>, <n1 n2> of the lossy twin beam.
std::array<double, 5> twin_beam_moments(complex lambda, double eta);

/// (n+2) p(n) p(n+2) - (n+1) p(n+1)^2. Requires n+2 < p.size().
double three_point_b(const std::vector<double>& p, int n);

/// B_eta(n) of the exact state (B(n) at eta = 1).
double theoretical_B(const StateModel& state, double eta, int n);

/// -2 eta^2 |lambda|^2 / (1 - |lambda|^2).
double theoretical_C(complex lambda, double eta);
/// Same, from |lambda|^2 directly (exact for |lambda|^2 = 0.5).
double theoretical_C_intensity(double lambda_squared, double eta);

/// |alpha|^2 of the even cat with the given mean photon number, i.e. the
/// root of a tanh(a) = nbar.
double even_cat_intensity_for_mean(double nbar);

/// Fixtures used by the presets.
namespace fixtures {
/// |alpha|^2 = 1.
StateModel coherent_unit();
StateModel even_cat(double nbar);
/// Mean photon number 5 with sinh^2 r = 3; r > 0, coherent amplitude i*sqrt(2).
StateModel phase_squeezed();
/// As phase_squeezed() with r < 0.
StateModel amplitude_squeezed();
StateModel twin_beam(double lambda_squared);
}  // namespace fixtures

nlohmann::json state_to_json(const StateModel& state);
/// Throws ConfigError with a pointer to the offending field.
StateModel state_from_json(const nlohmann::json& j);

}  // namespace nctomo::states
