#include "nctomo/states.hpp"

#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>

#include "nctomo/error.hpp"
#include "nctomo/specfun.hpp"

namespace nctomo::states {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr int kHardCutoff = 200000;

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

void check_eta(double eta, const char* where) {
  if (!(eta > 0.0 && eta <= 1.0)) {
    throw DomainError(std::string(where) + ": eta must lie in (0, 1], got " + std::to_string(eta));
  }
}

void check_lambda(complex lambda, const char* where) {
  if (!(std::abs(lambda) < 1.0)) {
    throw DomainError(std::string(where) + ": twin beam needs |lambda| < 1");
  }
}

// Generates Fock amplitudes one at a time. The squeezed case uses the
// annihilator of D(alpha) S(r)|0>:
//   b = (a - alpha) cosh r - (a^dag - conj(alpha)) sinh r,  b|psi> = 0,
// which gives c_{n+1} = [(alpha - conj(alpha) t) c_n + t sqrt(n) c_{n-1}] / sqrt(n+1)
// with t = tanh r.
class AmplitudeStream {
 public:
  explicit AmplitudeStream(const StateKind& kind) : kind_(kind) {}

  complex next() {
    const long n = n_++;
    return std::visit(
        overloaded{
            [&](const Coherent& s) { return coherent_amp(s.alpha, n); },
            [&](const EvenCat& s) {
              if (n % 2 != 0) return complex{};
              const double a2 = std::norm(s.alpha);
              const double norm = std::sqrt(2.0 * (1.0 + std::exp(-2.0 * a2)));
              return 2.0 * coherent_amp(s.alpha, n) / norm;
            },
            [&](const Squeezed& s) {
              const double t = std::tanh(s.r);
              complex c;
              if (n == 0) {
                c = std::exp(-0.5 * std::norm(s.alpha) + 0.5 * t * std::conj(s.alpha) * std::conj(s.alpha)) /
                    std::sqrt(std::cosh(s.r));
              } else {
                const double nn = static_cast<double>(n - 1);
                c = ((s.alpha - std::conj(s.alpha) * t) * prev_ + t * std::sqrt(nn) * prev2_) / std::sqrt(nn + 1.0);
              }
              prev2_ = prev_;
              prev_ = c;
              return c;
            },
            [&](const TwinBeam&) -> complex { throw DomainError("fock amplitudes: twin beam is two-mode"); },
        },
        kind_);
  }

 private:
  static complex coherent_amp(complex alpha, long n) {
    const double a = std::abs(alpha);
    if (a == 0.0) return n == 0 ? complex{1.0} : complex{};
    // The exponent reaches tens for moderate n; long double keeps the
    // magnitude correctly rounded instead of losing |log_mag| ulp.
    const long double la = a;
    const long double log_mag = -0.5L * la * la + n * std::log(la) - 0.5L * std::lgamma(n + 1.0L);
    return std::polar(static_cast<double>(std::exp(log_mag)), n * std::arg(alpha));
  }

  StateKind kind_;
  long n_ = 0;
  complex prev_{};
  complex prev2_{};
};

int auto_cutoff(const StateKind& kind) {
  if (const auto* tw = std::get_if<TwinBeam>(&kind)) {
    const double l2 = std::norm(tw->lambda);
    if (l2 == 0.0) return kMinFockCutoff;
    // tail beyond N is |lambda|^{2(N+1)}
    const double n = std::ceil(std::log(kTailMass) / std::log(l2));
    return std::max(kMinFockCutoff, static_cast<int>(n));
  }
  AmplitudeStream stream(kind);
  double mass = 0.0;
  for (int n = 0; n < kHardCutoff; ++n) {
    mass += std::norm(stream.next());
    if (1.0 - mass < kTailMass) return std::max(kMinFockCutoff, n);
  }
  throw CutoffTooSmall("automatic Fock cutoff exceeded " + std::to_string(kHardCutoff));
}

std::string format_complex(complex z) {
  std::ostringstream os;
  os.precision(6);
  os << z.real() << (z.imag() < 0 ? "-" : "+") << std::abs(z.imag()) << "i";
  return os.str();
}

double gaussian(double x, double mean, double var) {
  const double d = x - mean;
  return std::exp(-0.5 * d * d / var) / std::sqrt(2.0 * kPi * var);
}

}  // namespace

StateModel::StateModel(StateKind kind, int fock_cutoff)
    : kind_(kind), fock_cutoff_(fock_cutoff), explicit_cutoff_(fock_cutoff > 0) {
  std::visit(overloaded{
                 [](const Coherent&) {},
                 [](const EvenCat&) {},
                 [](const Squeezed& s) {
                   if (!std::isfinite(s.r)) throw DomainError("squeezed state: r must be finite");
                 },
                 [](const TwinBeam& t) { check_lambda(t.lambda, "StateModel"); },
             },
             kind_);
  if (fock_cutoff < 0) throw DomainError("StateModel: fock_cutoff must be >= 0");
  if (!explicit_cutoff_) fock_cutoff_ = auto_cutoff(kind_);
}

StateModel StateModel::coherent(complex alpha, int fock_cutoff) { return StateModel(Coherent{alpha}, fock_cutoff); }
StateModel StateModel::squeezed(complex alpha, double r, int fock_cutoff) {
  return StateModel(Squeezed{alpha, r}, fock_cutoff);
}
StateModel StateModel::even_cat(complex alpha, int fock_cutoff) { return StateModel(EvenCat{alpha}, fock_cutoff); }
StateModel StateModel::twin_beam(complex lambda, int fock_cutoff) {
  return StateModel(TwinBeam{lambda}, fock_cutoff);
}

bool StateModel::operator==(const StateModel& other) const {
  return kind_ == other.kind_ && explicit_cutoff_ == other.explicit_cutoff_ &&
         (!explicit_cutoff_ || fock_cutoff_ == other.fock_cutoff_);
}

std::string StateModel::label() const {
  std::ostringstream os;
  os.precision(6);
  std::visit(overloaded{
                 [&](const Coherent& s) { os << "coherent(alpha=" << format_complex(s.alpha) << ")"; },
                 [&](const Squeezed& s) {
                   os << "squeezed(alpha=" << format_complex(s.alpha) << ", r=" << s.r << ")";
                 },
                 [&](const EvenCat& s) { os << "even_cat(alpha=" << format_complex(s.alpha) << ")"; },
                 [&](const TwinBeam& s) { os << "twin_beam(lambda=" << format_complex(s.lambda) << ")"; },
             },
             kind_);
  return os.str();
}

double StateModel::mean_photons() const {
  return std::visit(overloaded{
                        [](const Coherent& s) { return std::norm(s.alpha); },
                        [](const Squeezed& s) { return std::norm(s.alpha) + std::sinh(s.r) * std::sinh(s.r); },
                        [](const EvenCat& s) {
                          const double a2 = std::norm(s.alpha);
                          return a2 * std::tanh(a2);
                        },
                        [](const TwinBeam& s) {
                          const double l2 = std::norm(s.lambda);
                          return l2 / (1.0 - l2);
                        },
                    },
                    kind_);
}

double PhotonDist::total() const {
  double s = 0.0;
  for (double p : probs) s += p;
  return s;
}

double PhotonDist::mean() const {
  double m = 0.0;
  for (std::size_t n = 0; n < probs.size(); ++n) m += static_cast<double>(n) * probs[n];
  return m;
}

std::vector<complex> fock_amplitudes(const StateModel& state) {
  if (!state.single_mode()) throw DomainError("fock_amplitudes: twin beam is two-mode");
  AmplitudeStream stream(state.kind());
  std::vector<complex> c(static_cast<std::size_t>(state.fock_cutoff()) + 1);
  for (auto& v : c) v = stream.next();
  return c;
}

PhotonDist photon_dist(const StateModel& state) {
  if (!state.single_mode()) {
    throw DomainError("photon_dist: twin beam is two-mode, use twin_photon_dist");
  }
  const auto amps = fock_amplitudes(state);
  PhotonDist d;
  d.label = state.label();
  d.probs.reserve(amps.size());
  for (const auto& c : amps) d.probs.push_back(std::norm(c));
  d.deficit = 1.0 - d.total();
  if (d.deficit > kTailMass) {
    throw CutoffTooSmall("photon_dist: cutoff " + std::to_string(state.fock_cutoff()) + " leaves mass " +
                         std::to_string(d.deficit) + " for " + d.label);
  }
  return d;
}

PhotonDist twin_photon_dist(const StateModel& twin) {
  const auto* tw = std::get_if<TwinBeam>(&twin.kind());
  if (tw == nullptr) throw DomainError("twin_photon_dist: state is not a twin beam");
  const double l2 = std::norm(tw->lambda);
  PhotonDist d;
  d.label = twin.label();
  d.probs.resize(static_cast<std::size_t>(twin.fock_cutoff()) + 1);
  double p = 1.0 - l2;
  for (auto& v : d.probs) {
    v = p;
    p *= l2;
  }
  d.deficit = 1.0 - d.total();
  if (d.deficit > kTailMass) throw CutoffTooSmall("twin_photon_dist: cutoff too small for " + d.label);
  return d;
}

PhotonDist bernoulli_convolve(const PhotonDist& p, double eta) {
  check_eta(eta, "bernoulli_convolve");
  if (p.deficit > kTailMass) throw CutoffTooSmall("bernoulli_convolve: input mass deficit exceeds 1e-12");
  PhotonDist out;
  std::ostringstream os;
  os << p.label << " @eta=" << eta;
  out.label = os.str();
  if (eta == 1.0) {
    out.probs = p.probs;
    out.deficit = p.deficit;
    return out;
  }
  const std::size_t size = p.probs.size();
  out.probs.assign(size, 0.0);
  // Weights and sums in long double, as for the coherent amplitudes.
  const long double log_eta = std::log(static_cast<long double>(eta));
  const long double log_loss = std::log1p(-static_cast<long double>(eta));
  std::vector<long double> log_fact(size + 1);
  for (std::size_t k = 0; k <= size; ++k) log_fact[k] = std::lgamma(static_cast<long double>(k) + 1.0L);
  for (std::size_t n = 0; n < size; ++n) {
    long double acc = 0.0L;
    for (std::size_t k = n; k < size; ++k) {
      if (p.probs[k] == 0.0) continue;
      const long double lw = log_fact[k] - log_fact[n] - log_fact[k - n] + static_cast<long double>(n) * log_eta +
                             static_cast<long double>(k - n) * log_loss;
      acc += std::exp(lw) * p.probs[k];
    }
    out.probs[n] = static_cast<double>(acc);
  }
  out.deficit = 1.0 - out.total();
  return out;
}

double noise_variance(double eta) {
  check_eta(eta, "noise_variance");
  return (1.0 - eta) / (4.0 * eta);
}

double quadrature_pdf(const StateModel& state, double phi, double x) { return quadrature_pdf_noisy(state, 1.0, phi, x); }

double quadrature_pdf_noisy(const StateModel& state, double eta, double phi, double x) {
  const double s2 = noise_variance(eta);
  return std::visit(
      overloaded{
          [&](const Coherent& s) { return gaussian(x, (s.alpha * std::polar(1.0, -phi)).real(), 0.25 + s2); },
          [&](const Squeezed& s) {
            const double c = std::cos(phi);
            const double sn = std::sin(phi);
            const double var = 0.25 * (std::exp(2.0 * s.r) * c * c + std::exp(-2.0 * s.r) * sn * sn);
            return gaussian(x, (s.alpha * std::polar(1.0, -phi)).real(), var + s2);
          },
          [&](const EvenCat& s) {
            // |psi(x)|^2 of |beta> + |-beta>, beta = alpha e^{-i phi}, with the
            // interference term convolved analytically.
            const complex beta = s.alpha * std::polar(1.0, -phi);
            const double x0 = beta.real();
            const double p0 = beta.imag();
            const double norm = 2.0 * (1.0 + std::exp(-2.0 * std::norm(s.alpha)));
            const double direct = gaussian(x, x0, 0.25 + s2) + gaussian(x, -x0, 0.25 + s2);
            const double spread = 1.0 + 4.0 * s2;
            const complex shifted = complex(x, -p0);
            const double cross = 2.0 * std::sqrt(2.0 / kPi) * std::exp(-2.0 * (x0 * x0 + p0 * p0)) /
                                 std::sqrt(spread) * std::exp(-2.0 * shifted * shifted / spread).real();
            return (direct + cross) / norm;
          },
          [&](const TwinBeam&) -> double { throw DomainError("quadrature_pdf: twin beam is two-mode"); },
      },
      state.kind());
}

double phase_averaged_pdf(const StateModel& state, double eta, double x, int n_phase) {
  if (n_phase < 1) throw DomainError("phase_averaged_pdf: n_phase must be positive");
  double acc = 0.0;
  for (int j = 0; j < n_phase; ++j) acc += quadrature_pdf_noisy(state, eta, 2.0 * kPi * j / n_phase, x);
  return acc / n_phase;
}

double fock_second_moment(const StateModel& state, double phi) {
  const auto c = fock_amplitudes(state);
  double number = 0.0;
  complex a2{};
  for (std::size_t n = 0; n < c.size(); ++n) {
    number += static_cast<double>(n) * std::norm(c[n]);
    if (n + 2 < c.size()) {
      a2 += std::conj(c[n]) * c[n + 2] * std::sqrt(static_cast<double>((n + 1) * (n + 2)));
    }
  }
  return 0.25 * (2.0 * number + 1.0 + 2.0 * (a2 * std::polar(1.0, -2.0 * phi)).real());
}

double twin_joint_pdf(complex lambda, double eta, double x1, double x2, double phi1, double phi2) {
  check_lambda(lambda, "twin_joint_pdf");
  const double four_delta2 = 4.0 * noise_variance(eta);
  const complex z = std::polar(1.0, -(phi1 + phi2)) * lambda;
  const double denom = 1.0 - std::norm(z);
  const double sum_width = std::norm(1.0 + z) / denom + four_delta2;
  const double diff_width = std::norm(1.0 - z) / denom + four_delta2;
  const double u = x1 + x2;
  const double v = x1 - x2;
  return 2.0 * std::exp(-u * u / sum_width - v * v / diff_width) / (kPi * std::sqrt(sum_width * diff_width));
}

std::array<double, 5> twin_beam_moments(complex lambda, double eta) {
  check_lambda(lambda, "twin_beam_moments");
  check_eta(eta, "twin_beam_moments");
  const double l2 = std::norm(lambda);
  const double nbar = l2 / (1.0 - l2);
  const double mu = eta * nbar;
  // Thinned thermal marginals stay thermal; n1 and n2 are thinned
  // independently from the same n.
  const double second = 2.0 * mu * mu + mu;
  const double cross = eta * eta * (2.0 * nbar * nbar + nbar);
  return {mu, mu, second, second, cross};
}

double three_point_b(const std::vector<double>& p, int n) {
  if (n < 0 || static_cast<std::size_t>(n) + 2 >= p.size()) {
    throw DomainError("three_point_b: n+2 beyond distribution length");
  }
  return (n + 2.0) * p[n] * p[n + 2] - (n + 1.0) * p[n + 1] * p[n + 1];
}

double theoretical_B(const StateModel& state, double eta, int n) {
  check_eta(eta, "theoretical_B");
  if (n < 0 || n + 2 > state.fock_cutoff()) {
    throw DomainError("theoretical_B: n+2 = " + std::to_string(n + 2) + " beyond cutoff " +
                      std::to_string(state.fock_cutoff()));
  }
  return three_point_b(bernoulli_convolve(photon_dist(state), eta).probs, n);
}

double theoretical_C(complex lambda, double eta) {
  check_lambda(lambda, "theoretical_C");
  check_eta(eta, "theoretical_C");
  return theoretical_C_intensity(std::norm(lambda), eta);
}

double theoretical_C_intensity(double lambda_squared, double eta) {
  if (!(lambda_squared >= 0.0 && lambda_squared < 1.0)) {
    throw DomainError("theoretical_C: need 0 <= |lambda|^2 < 1");
  }
  check_eta(eta, "theoretical_C");
  return -2.0 * eta * eta * lambda_squared / (1.0 - lambda_squared);
}

double even_cat_intensity_for_mean(double nbar) {
  if (!(nbar >= 0.0)) throw DomainError("even_cat_intensity_for_mean: nbar must be >= 0");
  if (nbar == 0.0) return 0.0;
  // a tanh(a) is increasing on a > 0; Newton from above converges monotonically.
  double a = std::max(nbar, std::sqrt(nbar)) + 1.0;
  for (int it = 0; it < 200; ++it) {
    const double th = std::tanh(a);
    const double f = a * th - nbar;
    const double df = th + a * (1.0 - th * th);
    const double step = f / df;
    a -= step;
    if (std::abs(step) <= 1e-15 * a) break;
  }
  return a;
}

namespace fixtures {

StateModel coherent_unit() { return StateModel::coherent({1.0, 0.0}); }

StateModel even_cat(double nbar) { return StateModel::even_cat({std::sqrt(even_cat_intensity_for_mean(nbar)), 0.0}); }

StateModel phase_squeezed() { return StateModel::squeezed({0.0, std::sqrt(2.0)}, std::asinh(std::sqrt(3.0))); }

StateModel amplitude_squeezed() { return StateModel::squeezed({0.0, std::sqrt(2.0)}, -std::asinh(std::sqrt(3.0))); }

StateModel twin_beam(double lambda_squared) { return StateModel::twin_beam({std::sqrt(lambda_squared), 0.0}); }

}  // namespace fixtures

// ---------------------------------------------------------------------------
// JSON

namespace {

nlohmann::json complex_to_json(complex z) { return nlohmann::json::array({z.real(), z.imag()}); }

complex complex_from_json(const nlohmann::json& j, const std::string& field) {
  if (j.is_number()) return {j.get<double>(), 0.0};
  if (j.is_array() && j.size() == 2 && j[0].is_number() && j[1].is_number()) {
    return {j[0].get<double>(), j[1].get<double>()};
  }
  throw ConfigError("state." + field + ": expected a number or [re, im]");
}

double number_field(const nlohmann::json& j, const char* field) {
  if (!j.contains(field)) throw ConfigError(std::string("state.") + field + ": missing");
  if (!j.at(field).is_number()) throw ConfigError(std::string("state.") + field + ": expected a number");
  return j.at(field).get<double>();
}

}  // namespace

nlohmann::json state_to_json(const StateModel& state) {
  nlohmann::json j;
  std::visit(overloaded{
                 [&](const Coherent& s) {
                   j["kind"] = "coherent";
                   j["alpha"] = complex_to_json(s.alpha);
                 },
                 [&](const Squeezed& s) {
                   j["kind"] = "squeezed";
                   j["alpha"] = complex_to_json(s.alpha);
                   j["r"] = s.r;
                 },
                 [&](const EvenCat& s) {
                   j["kind"] = "even_cat";
                   j["alpha"] = complex_to_json(s.alpha);
                 },
                 [&](const TwinBeam& s) {
                   j["kind"] = "twin_beam";
                   j["lambda"] = complex_to_json(s.lambda);
                 },
             },
             state.kind());
  if (state.explicit_cutoff()) j["fock_cutoff"] = state.fock_cutoff();
  return j;
}

StateModel state_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("state: expected an object");
  if (!j.contains("kind") || !j.at("kind").is_string()) throw ConfigError("state.kind: missing or not a string");
  const auto kind = j.at("kind").get<std::string>();
  int cutoff = 0;
  if (j.contains("fock_cutoff")) {
    if (!j.at("fock_cutoff").is_number_integer() || j.at("fock_cutoff").get<int>() < 0) {
      throw ConfigError("state.fock_cutoff: expected a nonnegative integer");
    }
    cutoff = j.at("fock_cutoff").get<int>();
  }
  try {
    if (kind == "coherent") {
      if (!j.contains("alpha")) throw ConfigError("state.alpha: missing");
      return StateModel::coherent(complex_from_json(j.at("alpha"), "alpha"), cutoff);
    }
    if (kind == "squeezed") {
      if (!j.contains("alpha")) throw ConfigError("state.alpha: missing");
      return StateModel::squeezed(complex_from_json(j.at("alpha"), "alpha"), number_field(j, "r"), cutoff);
    }
    if (kind == "even_cat") {
      if (j.contains("alpha")) return StateModel::even_cat(complex_from_json(j.at("alpha"), "alpha"), cutoff);
      if (j.contains("mean_photons")) {
        const double a2 = even_cat_intensity_for_mean(number_field(j, "mean_photons"));
        return StateModel::even_cat({std::sqrt(a2), 0.0}, cutoff);
      }
      throw ConfigError("state: even_cat needs alpha or mean_photons");
    }
    if (kind == "twin_beam") {
      if (j.contains("lambda")) return StateModel::twin_beam(complex_from_json(j.at("lambda"), "lambda"), cutoff);
      if (j.contains("lambda_squared")) {
        const double l2 = number_field(j, "lambda_squared");
        if (!(l2 >= 0.0 && l2 < 1.0)) throw ConfigError("state.lambda_squared: must lie in [0, 1)");
        return StateModel::twin_beam({std::sqrt(l2), 0.0}, cutoff);
      }
      throw ConfigError("state: twin_beam needs lambda or lambda_squared");
    }
  } catch (const DomainError& e) {
    throw ConfigError(std::string("state: ") + e.what());
  }
  throw ConfigError("state.kind: unknown kind '" + kind + "' (coherent, squeezed, even_cat, twin_beam)");
}

}  // namespace nctomo::states
