#include <doctest.h>

#include <cmath>
#include <numbers>

#include "nctomo/error.hpp"
#include "nctomo/states.hpp"
#include "oracles.hpp"

using namespace nctomo;
using namespace nctomo::states;

namespace {

double integrate_density(const std::function<double(double)>& f, double lo = -25.0, double hi = 25.0) {
  return oracle::integrate(f, lo, hi, 500);
}

}  // namespace

TEST_CASE("coherent photon distribution is Poisson") {
  const auto p = photon_dist(fixtures::coherent_unit());
  CHECK(p.probs[0] == doctest::Approx(std::exp(-1.0)).epsilon(1e-14));
  const auto ref = oracle::poisson(1.0, 30);
  for (int n = 0; n <= 30; ++n) CHECK(std::abs(p.probs[n] - ref[n]) <= 1e-15);
  CHECK(std::abs(p.deficit) < 1e-12);
  const auto phased = photon_dist(StateModel::coherent(std::polar(1.3, 0.7)));
  const auto ref2 = oracle::poisson(1.69, 20);
  for (int n = 0; n <= 20; ++n) CHECK(std::abs(phased.probs[n] - ref2[n]) <= 1e-15);
}

TEST_CASE("even cat: odd photon numbers vanish and even ones follow the closed form") {
  const auto cat = fixtures::even_cat(5.0);
  const double a2 = std::norm(std::get<EvenCat>(cat.kind()).alpha);
  CHECK(a2 == doctest::Approx(5.000453608).epsilon(1e-9));
  CHECK(a2 * std::tanh(a2) == doctest::Approx(5.0).epsilon(1e-14));
  const auto p = photon_dist(cat);
  const auto ref = oracle::even_cat(a2, 60);
  for (int n = 0; n <= 60; ++n) {
    if (n % 2 == 1) CHECK(p.probs[n] == 0.0);
    CHECK(std::abs(p.probs[n] - ref[n]) <= 1e-14);
  }
  CHECK(p.mean() == doctest::Approx(5.0).epsilon(1e-12));
  const auto other = photon_dist(StateModel::even_cat({0.4, -1.1}));
  for (std::size_t n = 1; n < other.probs.size(); n += 2) CHECK(other.probs[n] == 0.0);
}

TEST_CASE("squeezed fixtures: mean photon number 5 and Fock overlaps") {
  for (const auto& s : {fixtures::phase_squeezed(), fixtures::amplitude_squeezed()}) {
    const auto p = photon_dist(s);
    CHECK(p.mean() == doctest::Approx(5.0).epsilon(1e-10));
    CHECK(std::abs(p.deficit) < 1e-12);
    const auto& sq = std::get<Squeezed>(s.kind());
    CHECK(std::sinh(sq.r) * std::sinh(sq.r) == doctest::Approx(3.0));
    CHECK(std::norm(sq.alpha) == doctest::Approx(2.0));
    const auto ref = oracle::squeezed_by_overlap(sq.alpha, sq.r, 40);
    for (int n = 0; n <= 40; ++n) CHECK(std::abs(p.probs[n] - ref[n]) <= 1e-12);
  }
  // Real displacement as well, both signs of r.
  for (double r : {0.8, -0.5}) {
    const auto s = StateModel::squeezed({1.2, 0.3}, r);
    const auto p = photon_dist(s);
    const auto ref = oracle::squeezed_by_overlap({1.2, 0.3}, r, 30);
    for (int n = 0; n <= 30; ++n) CHECK(std::abs(p.probs[n] - ref[n]) <= 1e-12);
  }
}

TEST_CASE("automatic cutoff and explicit cutoff checks") {
  const auto s = fixtures::phase_squeezed();
  CHECK(s.fock_cutoff() >= kMinFockCutoff);
  CHECK_FALSE(s.explicit_cutoff());
  CHECK(fixtures::coherent_unit().fock_cutoff() == kMinFockCutoff);
  CHECK_THROWS_AS(photon_dist(StateModel::squeezed({0, 1.4}, 1.3, 30)), CutoffTooSmall);
  CHECK_NOTHROW(photon_dist(StateModel::coherent({1.0, 0.0}, 40)));
  CHECK_THROWS_AS(photon_dist(fixtures::twin_beam(0.5)), DomainError);
  CHECK_THROWS_AS(StateModel::twin_beam({1.0, 0.0}), DomainError);
  CHECK_THROWS_AS(StateModel::coherent({1.0, 0.0}, -3), DomainError);
}

TEST_CASE("twin beam marginal photon statistics") {
  const auto tw = fixtures::twin_beam(0.5);
  const auto p = twin_photon_dist(tw);
  CHECK(p.mean() == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(tw.mean_photons() == doctest::Approx(1.0).epsilon(1e-15));
  const auto m = twin_beam_moments({std::sqrt(0.5), 0.0}, 1.0);
  CHECK(m[0] == doctest::Approx(1.0));
  CHECK(m[4] == doctest::Approx(3.0));
  // Loss: thinned thermal moments against a Fock-sum over the joint diagonal.
  const double eta = 0.8;
  const auto lossy = twin_beam_moments({std::sqrt(0.5), 0.0}, eta);
  double n1 = 0, n1sq = 0, n12 = 0;
  for (std::size_t n = 0; n < p.probs.size(); ++n) {
    const double dn = static_cast<double>(n);
    n1 += p.probs[n] * eta * dn;
    n1sq += p.probs[n] * (eta * eta * dn * dn + eta * (1 - eta) * dn);
    n12 += p.probs[n] * eta * eta * dn * dn;
  }
  CHECK(lossy[0] == doctest::Approx(n1).epsilon(1e-10));
  CHECK(lossy[2] == doctest::Approx(n1sq).epsilon(1e-10));
  CHECK(lossy[4] == doctest::Approx(n12).epsilon(1e-10));
}

TEST_CASE("bernoulli convolution") {
  PhotonDist one{{0.0, 1.0}, "fock1", 0.0};
  const auto half = bernoulli_convolve(one, 0.5);
  CHECK(half.probs[0] == doctest::Approx(0.5));
  CHECK(half.probs[1] == doctest::Approx(0.5));

  const auto coh = photon_dist(StateModel::coherent({1.7, 0.0}));
  for (double eta : {0.9, 0.5, 0.2}) {
    const auto thinned = bernoulli_convolve(coh, eta);
    const auto ref = oracle::poisson(eta * 1.7 * 1.7, static_cast<int>(thinned.probs.size()) - 1);
    const auto direct = oracle::bernoulli(coh.probs, eta);
    for (std::size_t n = 0; n < thinned.probs.size(); ++n) {
      CHECK(std::abs(thinned.probs[n] - ref[n]) <= 1e-12);
      CHECK(std::abs(thinned.probs[n] - direct[n]) <= 1e-12);
      CHECK(thinned.probs[n] >= 0.0);
    }
    CHECK(std::abs(thinned.total() - coh.total()) <= 1e-12);
  }
  const auto same = bernoulli_convolve(coh, 1.0);
  CHECK(same.probs == coh.probs);
  CHECK_THROWS_AS(bernoulli_convolve(coh, 0.0), DomainError);
  CHECK_THROWS_AS(bernoulli_convolve(coh, 1.2), DomainError);
  PhotonDist leaky{{0.5, 0.4}, "leaky", 0.1};
  CHECK_THROWS_AS(bernoulli_convolve(leaky, 0.5), CutoffTooSmall);
}

TEST_CASE("quadrature densities") {
  const auto vac = StateModel::coherent({0.0, 0.0});
  for (double phi : {0.0, 1.0, 2.5}) {
    CHECK(quadrature_pdf(vac, phi, 0.3) ==
          doctest::Approx(std::sqrt(2.0 / std::numbers::pi) * std::exp(-2 * 0.09)).epsilon(1e-14));
  }
  const double r = 0.6;
  const auto sq = StateModel::squeezed({0.0, 0.0}, r);
  const double var = integrate_density([&](double x) { return x * x * quadrature_pdf(sq, 0.0, x); });
  CHECK(var == doctest::Approx(std::exp(2 * r) / 4).epsilon(1e-12));
  CHECK(fock_second_moment(sq, 0.0) == doctest::Approx(std::exp(2 * r) / 4).epsilon(1e-10));

  const auto cat = fixtures::even_cat(5.0);
  for (double phi : {0.0, std::numbers::pi / 4, std::numbers::pi / 2}) {
    const double norm = integrate_density([&](double x) { return quadrature_pdf(cat, phi, x); });
    CHECK(std::abs(norm - 1.0) <= 1e-10);
    const double noisy = integrate_density([&](double x) { return quadrature_pdf_noisy(cat, 0.6, phi, x); });
    CHECK(std::abs(noisy - 1.0) <= 1e-10);
  }
}

TEST_CASE("second moments agree with the Fock basis") {
  for (const auto& s : {fixtures::coherent_unit(), StateModel::coherent(std::polar(1.5, 0.4)), fixtures::even_cat(5.0),
                        StateModel::even_cat({1.0, 0.8}), fixtures::phase_squeezed(), fixtures::amplitude_squeezed(),
                        StateModel::squeezed({0.7, -0.4}, 0.5)}) {
    for (double phi = 0.0; phi < std::numbers::pi; phi += 0.35) {
      const double m2 = integrate_density([&](double x) { return x * x * quadrature_pdf(s, phi, x); }, -40, 40);
      INFO(s.label() << " phi=" << phi);
      CHECK(std::abs(m2 - fock_second_moment(s, phi)) <= 1e-8);
    }
  }
}

TEST_CASE("noisy density adds the efficiency variance") {
  const auto s = fixtures::phase_squeezed();
  const double eta = 0.7;
  for (double phi : {0.0, 0.9}) {
    const double mean = integrate_density([&](double x) { return x * quadrature_pdf_noisy(s, eta, phi, x); }, -40, 40);
    const double m2 = integrate_density([&](double x) { return x * x * quadrature_pdf_noisy(s, eta, phi, x); }, -40, 40);
    const double m2_ideal = fock_second_moment(s, phi);
    CHECK(m2 - m2_ideal == doctest::Approx(noise_variance(eta)).epsilon(1e-9));
    CHECK(mean == doctest::Approx((std::get<Squeezed>(s.kind()).alpha * std::polar(1.0, -phi)).real()).epsilon(1e-10));
  }
  CHECK(noise_variance(1.0) == 0.0);
  CHECK(noise_variance(0.5) == doctest::Approx(0.25));
  CHECK_THROWS_AS(noise_variance(0.0), DomainError);
}

TEST_CASE("twin-beam joint density") {
  const double lambda = std::sqrt(0.5);
  // lambda = 0: product of vacuum densities.
  const double v = twin_joint_pdf({0, 0}, 1.0, 0.2, -0.4, 0.3, 1.1);
  CHECK(v == doctest::Approx(quadrature_pdf(StateModel::coherent({0, 0}), 0, 0.2) *
                             quadrature_pdf(StateModel::coherent({0, 0}), 0, -0.4))
                 .epsilon(1e-14));

  // Var(x1+x2) at pinned zero phases from a 2-D integral.
  std::vector<double> xs, ws;
  oracle::composite_rule(-12, 12, 120, xs, ws);
  double var = 0.0, norm = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    for (std::size_t j = 0; j < xs.size(); ++j) {
      const double p = ws[i] * ws[j] * twin_joint_pdf({lambda, 0}, 1.0, xs[i], xs[j], 0.0, 0.0);
      norm += p;
      var += p * (xs[i] + xs[j]) * (xs[i] + xs[j]);
    }
  }
  CHECK(norm == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(var == doctest::Approx((1 + lambda) / (2 * (1 - lambda))).epsilon(1e-10));

  for (auto [p1, p2] : {std::pair{0.3, 2.2}, std::pair{1.9, 0.4}}) {
    double total = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      for (std::size_t j = 0; j < xs.size(); ++j) total += ws[i] * ws[j] * twin_joint_pdf({lambda, 0}, 0.8, xs[i], xs[j], p1, p2);
    }
    CHECK(std::abs(total - 1.0) <= 1e-10);
  }
  CHECK_THROWS_AS(twin_joint_pdf({1.0, 0}, 1.0, 0, 0, 0, 0), DomainError);
}

TEST_CASE("theoretical B and C") {
  for (double eta : {1.0, 0.8, 0.3}) {
    const auto coh = StateModel::coherent(std::polar(1.4, 0.2));
    for (int n = 0; n < 30; ++n) CHECK(std::abs(theoretical_B(coh, eta, n)) <= 1e-16);
  }
  const auto cat = fixtures::even_cat(5.0);
  const auto p = photon_dist(cat).probs;
  for (int n = 1; n < 30; n += 2) {
    const double expect = -(n + 1.0) * p[n + 1] * p[n + 1];
    CHECK(theoretical_B(cat, 1.0, n) < 0.0);
    CHECK(std::abs(theoretical_B(cat, 1.0, n) - expect) <= 1e-15 * std::abs(expect));
  }
  // Loss keeps nonclassicality visible for these fixtures.
  for (const auto& s : {cat, fixtures::phase_squeezed()}) {
    for (double eta : {1.0, 0.8, 0.4}) {
      double lowest = 0.0;
      for (int n = 0; n <= 20; ++n) lowest = std::min(lowest, theoretical_B(s, eta, n));
      INFO(s.label() << " eta=" << eta);
      CHECK(lowest < 0.0);
    }
  }
  CHECK(theoretical_B(fixtures::phase_squeezed(), 0.4, 0) == doctest::Approx(-0.01267).epsilon(1e-3));
  CHECK_THROWS_AS(theoretical_B(StateModel::coherent({1, 0}, 10), 1.0, 9), DomainError);

  CHECK(theoretical_C({std::sqrt(0.5), 0}, 1.0) == doctest::Approx(-2.0).epsilon(1e-15));
  CHECK(theoretical_C({std::sqrt(0.5), 0}, 0.8) == doctest::Approx(-1.28).epsilon(1e-14));
  CHECK(theoretical_C({0, 0}, 0.6) == 0.0);
  CHECK_THROWS_AS(theoretical_C({0.6, 0.8}, 1.0), DomainError);
  // C from the exact lossy moments.
  const auto m = twin_beam_moments({std::sqrt(0.5), 0}, 0.8);
  CHECK(m[2] + m[3] - 2 * m[4] - (m[0] - m[1]) * (m[0] - m[1]) - (m[0] + m[1]) == doctest::Approx(-1.28));
}

TEST_CASE("state JSON round trip") {
  for (const auto& s : {fixtures::coherent_unit(), fixtures::even_cat(5.0), fixtures::phase_squeezed(),
                        fixtures::amplitude_squeezed(), fixtures::twin_beam(0.5), StateModel::coherent({0.1, 2}, 80)}) {
    CHECK(state_from_json(state_to_json(s)) == s);
  }
  const auto cat = state_from_json(nlohmann::json::parse(R"({"kind":"even_cat","mean_photons":5})"));
  CHECK(cat == fixtures::even_cat(5.0));
  const auto tw = state_from_json(nlohmann::json::parse(R"({"kind":"twin_beam","lambda_squared":0.5})"));
  CHECK(tw == fixtures::twin_beam(0.5));
  CHECK_THROWS_AS(state_from_json(nlohmann::json::parse(R"({"kind":"thermal"})")), ConfigError);
  CHECK_THROWS_AS(state_from_json(nlohmann::json::parse(R"({"kind":"squeezed","alpha":1})")), ConfigError);
  CHECK_THROWS_AS(state_from_json(nlohmann::json::parse(R"({"kind":"twin_beam","lambda":[1,0]})")), ConfigError);
  CHECK_THROWS_AS(state_from_json(nlohmann::json::parse(R"({"kind":"coherent","alpha":"x"})")), ConfigError);
}
