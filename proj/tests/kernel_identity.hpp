#pragma once

// Deterministic kernel identities: phase-averaged homodyne densities
// integrated against the number kernel.

#include <cmath>
#include <vector>

#include "nctomo/states.hpp"
#include "nctomo/tomo.hpp"
#include "oracles.hpp"

namespace identity {

/// int pbar_eta(x) K^(n)_{kernel_eta}(scale x) dx, n = 0..n_max, where pbar_eta
/// is the phase-averaged density of homodyne data taken at efficiency
/// data_eta (rescaled convention).
inline std::vector<double> kernel_average(const nctomo::states::StateModel& state, double data_eta, double kernel_eta,
                                          double scale, int n_max) {
  const auto& kernel = *nctomo::tomo::NumberKernel::cached(kernel_eta, n_max);
  std::vector<double> xs, ws;
  oracle::composite_rule(-16.0 / std::max(scale, 1.0), 16.0 / std::max(scale, 1.0), 640, xs, ws);
  std::vector<double> out(static_cast<std::size_t>(n_max) + 1, 0.0);
  std::vector<double> k(out.size());
  for (std::size_t q = 0; q < xs.size(); ++q) {
    const double density = nctomo::states::phase_averaged_pdf(state, data_eta, xs[q], 256);
    kernel.evaluate(scale * xs[q], k);
    for (std::size_t n = 0; n < out.size(); ++n) out[n] += ws[q] * density * k[n];
  }
  return out;
}

}  // namespace identity
