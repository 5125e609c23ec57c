#include "nctomo/tomo.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <mutex>
#include <numbers>

#include "nctomo/error.hpp"
#include "nctomo/parallel.hpp"
#include "nctomo/summation.hpp"
#include "textio.hpp"

namespace nctomo::tomo {

namespace {

constexpr double kTableRange = 16.0;
constexpr int kChebDegree = 24;
constexpr double kPanelWidth = 0.1;
constexpr double kMaxAbsError = 1e-6;
constexpr double kEps = std::numeric_limits<double>::epsilon();

double cutoff_radius(double kappa2, int n_max) {
  const double kappa = std::sqrt(kappa2);
  return std::max(std::sqrt(kappa2 * (2.0 * n_max + 1.0)), std::sqrt(4.0 * n_max + 2.0)) + 10.0 * kappa;
}

// Composite Gauss-Legendre nodes on [0, s_max] with panels no wider than h.
// Weights absorb the measure 2 s exp(-s^2 / (2 kappa^2)).
void build_rule(double kappa2, double s_max, double h, std::vector<double>& nodes, std::vector<double>& weights) {
  const auto& rule = specfun::gauss_legendre_20();
  const int panels = static_cast<int>(std::ceil(s_max / h));
  const double width = s_max / panels;
  nodes.clear();
  weights.clear();
  nodes.reserve(static_cast<std::size_t>(panels) * rule.nodes.size());
  weights.reserve(nodes.capacity());
  for (int p = 0; p < panels; ++p) {
    const double mid = (p + 0.5) * width;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
      const double s = mid + 0.5 * width * rule.nodes[i];
      nodes.push_back(s);
      weights.push_back(0.5 * width * rule.weights[i] * 2.0 * s * std::exp(-0.5 * s * s / kappa2));
    }
  }
}

void check_order(int n, const char* where) {
  if (n < 0 || n > kMaxKernelOrder) {
    throw OrderOutOfRange(std::string(where) + ": order " + std::to_string(n) + " outside [0, " +
                          std::to_string(kMaxKernelOrder) + "]");
  }
}

struct BlockRange {
  std::size_t begin;
  std::size_t end;
};

std::vector<BlockRange> make_blocks(std::size_t count, int n_blocks) {
  if (count == 0) throw DomainError("estimator: empty dataset");
  if (n_blocks < 2) throw DomainError("estimator: n_blocks must be >= 2");
  if (static_cast<std::size_t>(n_blocks) > count) throw DomainError("estimator: more blocks than samples");
  std::vector<BlockRange> blocks(static_cast<std::size_t>(n_blocks));
  const auto b = static_cast<std::size_t>(n_blocks);
  for (std::size_t i = 0; i < b; ++i) blocks[i] = {i * count / b, (i + 1) * count / b};
  return blocks;
}

double standard_error(double sum, double sum_sq, std::size_t n) {
  if (n < 2) return 0.0;
  const double nn = static_cast<double>(n);
  const double mean = sum / nn;
  const double var = std::max(0.0, (sum_sq / nn - mean * mean) * nn / (nn - 1.0));
  return std::sqrt(var / nn);
}

}  // namespace

std::string to_string(Mode mode) { return mode == Mode::true_state ? "true_state" : "noisy_state"; }

Mode mode_from_string(const std::string& text) {
  if (text == "true_state") return Mode::true_state;
  if (text == "noisy_state") return Mode::noisy_state;
  throw ConfigError("mode: expected \"true_state\" or \"noisy_state\", got \"" + text + "\"");
}

double kappa_squared(double eta) {
  if (!(eta > 0.5 && eta <= 1.0)) {
    throw DomainError("number kernel: eta must lie in (0.5, 1], got " + std::to_string(eta));
  }
  return eta / (2.0 * eta - 1.0);
}

NumberKernel::NumberKernel(double eta, int n_max) : eta_(eta), n_max_(n_max), kappa2_(kappa_squared(eta)) {
  check_order(n_max, "NumberKernel");
  const auto width = static_cast<std::size_t>(n_max) + 1;
  const double s_max = cutoff_radius(kappa2_, n_max);
  build_rule(kappa2_, s_max, kPanelWidth, nodes_, weights_);

  laguerre_.resize(nodes_.size() * width);
  std::vector<double> abs_sum(width, 0.0);
  for (std::size_t q = 0; q < nodes_.size(); ++q) {
    std::span<double> row(laguerre_.data() + q * width, width);
    specfun::laguerre_all(nodes_[q] * nodes_[q], row);
    for (std::size_t n = 0; n < width; ++n) abs_sum[n] += std::abs(weights_[q] * row[n]);
  }
  error_bound_ = 4.0 * kEps * std::sqrt(static_cast<double>(nodes_.size())) *
                 *std::max_element(abs_sum.begin(), abs_sum.end());
  if (error_bound_ > kMaxAbsError) {
    throw PrecisionLoss("number kernel at eta=" + std::to_string(eta) + ", n_max=" + std::to_string(n_max) +
                        ": rounding bound " + std::to_string(error_bound_) + " exceeds " +
                        std::to_string(kMaxAbsError));
  }

  // Keep 2 s_max * width / 2 <= 3 so the degree-24 fits are converged.
  intervals_ = static_cast<int>(std::ceil(kTableRange / std::min(0.125, 3.0 / s_max)));
  width_ = kTableRange / intervals_;
  constexpr int points = kChebDegree + 1;
  coeffs_.assign(static_cast<std::size_t>(intervals_) * points * width, 0.0);
  parallel_for(static_cast<std::size_t>(intervals_), [&](std::size_t j) {
    std::vector<double> values(static_cast<std::size_t>(points) * width);
    for (int i = 0; i < points; ++i) {
      const double t = std::cos(std::numbers::pi * (i + 0.5) / points);
      const double x = (static_cast<double>(j) + 0.5 * (t + 1.0)) * width_;
      evaluate_direct(x, std::span<double>(values.data() + static_cast<std::size_t>(i) * width, width));
    }
    double* c = coeffs_.data() + j * points * width;
    for (int k = 0; k < points; ++k) {
      const double scale = (k == 0 ? 1.0 : 2.0) / points;
      for (int i = 0; i < points; ++i) {
        const double basis = std::cos(std::numbers::pi * k * (i + 0.5) / points) * scale;
        for (std::size_t n = 0; n < width; ++n) c[k * width + n] += basis * values[i * width + n];
      }
    }
  });
}

std::shared_ptr<const NumberKernel> NumberKernel::cached(double eta, int n_max) {
  static std::mutex mutex;
  static std::map<std::pair<double, int>, std::shared_ptr<const NumberKernel>> cache;
  std::lock_guard lock(mutex);
  auto& slot = cache[{eta, n_max}];
  if (!slot) slot = std::make_shared<const NumberKernel>(eta, n_max);
  return slot;
}

void NumberKernel::evaluate_direct(double x, std::span<double> out) const {
  const std::size_t count = std::min(out.size(), static_cast<std::size_t>(n_max_) + 1);
  std::fill(out.begin(), out.end(), 0.0);
  const double ax = std::abs(x);
  if (ax <= kTableRange) {
    const auto width = static_cast<std::size_t>(n_max_) + 1;
    for (std::size_t q = 0; q < nodes_.size(); ++q) {
      const double w = weights_[q] * std::cos(2.0 * ax * nodes_[q]);
      const double* l = laguerre_.data() + q * width;
      for (std::size_t n = 0; n < count; ++n) out[n] += w * l[n];
    }
    return;
  }
  // Far tail: panels shrink with the oscillation period of cos(2 x s).
  std::vector<double> nodes, weights;
  build_rule(kappa2_, cutoff_radius(kappa2_, n_max_), std::min(kPanelWidth, 1.6 / ax), nodes, weights);
  std::vector<double> l(count);
  for (std::size_t q = 0; q < nodes.size(); ++q) {
    specfun::laguerre_all(nodes[q] * nodes[q], l);
    const double w = weights[q] * std::cos(2.0 * ax * nodes[q]);
    for (std::size_t n = 0; n < count; ++n) out[n] += w * l[n];
  }
}

void NumberKernel::evaluate(double x, std::span<double> out) const {
  if (out.size() > static_cast<std::size_t>(n_max_) + 1) {
    throw OrderOutOfRange("NumberKernel::evaluate: requested " + std::to_string(out.size() - 1) +
                          " orders, table holds " + std::to_string(n_max_));
  }
  const double ax = std::abs(x);
  if (!(ax < kTableRange)) {
    if (!std::isfinite(ax)) throw DomainError("NumberKernel::evaluate: non-finite x");
    evaluate_direct(ax, out);
    return;
  }
  const int j = std::min(static_cast<int>(ax / width_), intervals_ - 1);
  const double t = 2.0 * (ax - j * width_) / width_ - 1.0;
  const double two_t = 2.0 * t;
  const std::size_t count = out.size();
  const auto width = static_cast<std::size_t>(n_max_) + 1;
  const double* c = coeffs_.data() + static_cast<std::size_t>(j) * (kChebDegree + 1) * width;
  std::array<double, kMaxKernelOrder + 1> b1{};
  std::array<double, kMaxKernelOrder + 1> b2{};
  for (int k = kChebDegree; k >= 1; --k) {
    const double* ck = c + static_cast<std::size_t>(k) * width;
    for (std::size_t n = 0; n < count; ++n) {
      const double b0 = ck[n] + two_t * b1[n] - b2[n];
      b2[n] = b1[n];
      b1[n] = b0;
    }
  }
  for (std::size_t n = 0; n < count; ++n) out[n] = c[n] + t * b1[n] - b2[n];
}

double NumberKernel::operator()(int n, double x) const {
  if (n < 0 || n > n_max_) throw OrderOutOfRange("NumberKernel: order outside table");
  std::array<double, kMaxKernelOrder + 1> buf{};
  evaluate(x, std::span<double>(buf.data(), static_cast<std::size_t>(n) + 1));
  return buf[static_cast<std::size_t>(n)];
}

double number_kernel(int n, double eta, double x) {
  check_order(n, "number_kernel");
  kappa_squared(eta);
  return (*NumberKernel::cached(eta, n <= 20 ? 20 : kMaxKernelOrder))(n, x);
}

double number_kernel_series(int n, double eta, double x, const specfun::KernelTables& tables) {
  check_order(n, "number_kernel_series");
  const double k2 = kappa_squared(eta);
  std::vector<specfun::PcfValue> d(static_cast<std::size_t>(n) + 1);
  tables.re_pcf_even_all(2.0 * std::sqrt(k2) * x, d);
  const double log_k2 = std::log(k2);
  double sum = 0.0;
  for (int nu = 0; nu <= n; ++nu) {
    const double coeff = std::exp(tables.log_kernel_coefficient(n, nu) + nu * log_k2);
    sum += (nu % 2 == 0 ? coeff : -coeff) * d[static_cast<std::size_t>(nu)].value;
  }
  return 2.0 * k2 * std::exp(-k2 * x * x) * sum;
}

double richter_kernel_diag(int n, double eta, double x) {
  if (n < 0 || 2 * n > 2 * kMaxKernelOrder) throw OrderOutOfRange("richter_kernel: invalid order");
  if (!(eta > 0.0 && eta <= 1.0)) throw DomainError("richter_kernel: eta must lie in (0, 1]");
  const int order = 2 * n;
  std::array<double, 2 * kMaxKernelOrder + 1> h{};
  specfun::hermite_all(std::sqrt(2.0 * eta) * x, std::span<double>(h.data(), static_cast<std::size_t>(order) + 1));
  const double log_norm = 0.5 * order * std::log(2.0 * eta) + specfun::log_binomial(order, n);
  return h[static_cast<std::size_t>(order)] * std::exp(-log_norm);
}

std::complex<double> richter_kernel(int n, int m, double eta, double x, double phi) {
  if (n < 0 || m < 0 || n + m > 2 * kMaxKernelOrder) {
    throw OrderOutOfRange("richter_kernel: need n, m >= 0 and n + m <= " + std::to_string(2 * kMaxKernelOrder));
  }
  if (n == m) return richter_kernel_diag(n, eta, x);
  if (!(eta > 0.5 && eta <= 1.0)) throw DomainError("richter_kernel: off-diagonal orders need eta in (0.5, 1]");
  const int order = n + m;
  std::array<double, 2 * kMaxKernelOrder + 1> h{};
  specfun::hermite_all(std::sqrt(2.0 * eta) * x, std::span<double>(h.data(), static_cast<std::size_t>(order) + 1));
  const double log_norm = 0.5 * order * std::log(2.0 * eta) + specfun::log_binomial(order, n);
  return std::polar(h[static_cast<std::size_t>(order)] * std::exp(-log_norm), (m - n) * phi);
}

NumberDistEstimate NumberDistEstimate::from_exact(const states::PhotonDist& dist, int n_max, double eta) {
  if (n_max < 0) throw DomainError("NumberDistEstimate::from_exact: n_max must be >= 0");
  NumberDistEstimate e;
  e.probs.assign(static_cast<std::size_t>(n_max) + 1, 0.0);
  std::copy_n(dist.probs.begin(), std::min(dist.probs.size(), e.probs.size()), e.probs.begin());
  e.std_err.assign(e.probs.size(), 0.0);
  e.kernel_eta = 1.0;
  e.data_eta = eta;
  e.exact = true;
  e.state_label = dist.label;
  return e;
}

MomentEstimate MomentEstimate::from_exact(const std::array<double, 5>& moments, double eta) {
  MomentEstimate e;
  e.values = moments;
  e.data_eta = eta;
  e.exact = true;
  return e;
}

namespace {

// Sums of kernel values over one chunk, split at block boundaries.
struct Segment {
  std::size_t block;
  std::vector<NeumaierSum> sum;
  std::vector<NeumaierSum> sum_sq;
};

using ChunkSource = std::function<void(std::size_t chunk, std::vector<double>& x)>;

// Shared by the in-memory and streaming estimators so both fold the same
// partial sums in the same order: per (chunk, block) segment, then per block
// in chunk order, then over blocks.
NumberDistEstimate accumulate_number_kernels(std::size_t count, std::size_t chunk_size, int n_blocks, Mode mode,
                                             double data_eta, int n_max, const ChunkSource& source) {
  check_order(n_max, "estimate_photon_dist");
  if (!(data_eta > 0.0 && data_eta <= 1.0)) throw DomainError("estimate_photon_dist: eta must lie in (0, 1]");
  if (mode == Mode::true_state && !(data_eta > 0.5)) {
    throw EstimatorRefusal("true-state reconstruction needs eta > 0.5 (data eta = " + std::to_string(data_eta) +
                           "); use noisy_state");
  }
  if (chunk_size == 0) throw DomainError("estimate_photon_dist: chunk_size must be >= 1");
  const auto blocks = make_blocks(count, n_blocks);
  const double kernel_eta = mode == Mode::true_state ? data_eta : 1.0;
  const double scale = mode == Mode::true_state ? 1.0 : std::sqrt(data_eta);
  const auto kernel = NumberKernel::cached(kernel_eta, n_max);
  const auto width = static_cast<std::size_t>(n_max) + 1;
  const std::size_t n_chunks = (count + chunk_size - 1) / chunk_size;

  std::vector<std::vector<Segment>> partial(n_chunks);
  parallel_for(n_chunks, [&](std::size_t c) {
    const std::size_t begin = c * chunk_size;
    const std::size_t end = std::min(count, begin + chunk_size);
    std::vector<double> x;
    source(c, x);
    std::array<double, kMaxKernelOrder + 1> k{};
    const std::span<double> out(k.data(), width);
    // First block containing `begin`.
    std::size_t b = static_cast<std::size_t>(
        std::upper_bound(blocks.begin(), blocks.end(), begin, [](std::size_t v, const BlockRange& r) { return v < r.end; }) -
        blocks.begin());
    for (std::size_t i = begin; i < end;) {
      const std::size_t stop = std::min(end, blocks[b].end);
      Segment seg{b, std::vector<NeumaierSum>(width), std::vector<NeumaierSum>(width)};
      for (; i < stop; ++i) {
        kernel->evaluate(scale * x[i - begin], out);
        for (std::size_t n = 0; n < width; ++n) {
          seg.sum[n].add(k[n]);
          seg.sum_sq[n].add(k[n] * k[n]);
        }
      }
      partial[c].push_back(std::move(seg));
      ++b;
    }
  });

  std::vector<std::vector<NeumaierSum>> sums(blocks.size(), std::vector<NeumaierSum>(width));
  std::vector<std::vector<NeumaierSum>> squares(blocks.size(), std::vector<NeumaierSum>(width));
  for (const auto& chunk : partial) {
    for (const auto& seg : chunk) {
      for (std::size_t n = 0; n < width; ++n) {
        sums[seg.block][n].merge(seg.sum[n]);
        squares[seg.block][n].merge(seg.sum_sq[n]);
      }
    }
  }

  NumberDistEstimate e;
  e.n_samples = count;
  e.kernel_eta = kernel_eta;
  e.data_eta = data_eta;
  e.mode = mode;
  e.probs.resize(width);
  e.std_err.resize(width);
  e.block_means.assign(blocks.size(), std::vector<double>(width));
  e.block_sizes.resize(blocks.size());
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    e.block_sizes[b] = blocks[b].end - blocks[b].begin;
    for (std::size_t n = 0; n < width; ++n) e.block_means[b][n] = sums[b][n].value() / e.block_sizes[b];
  }
  for (std::size_t n = 0; n < width; ++n) {
    NeumaierSum total, total_sq;
    for (std::size_t b = 0; b < blocks.size(); ++b) {
      total.merge(sums[b][n]);
      total_sq.merge(squares[b][n]);
    }
    e.probs[n] = total.value() / static_cast<double>(count);
    e.std_err[n] = standard_error(total.value(), total_sq.value(), count);
  }
  return e;
}

}  // namespace

NumberDistEstimate estimate_photon_dist(const sampler::HomodyneDataset& data, Mode mode, int n_max, int n_blocks) {
  if (data.mode_count != 1) throw DomainError("estimate_photon_dist: dataset is two-mode");
  const std::size_t chunk = data.chunk_size;
  auto e = accumulate_number_kernels(data.size(), chunk, n_blocks, mode, data.eta, n_max,
                                     [&](std::size_t c, std::vector<double>& x) {
                                       const std::size_t begin = c * chunk;
                                       const std::size_t end = std::min(data.size(), begin + chunk);
                                       x.assign(data.x1.begin() + static_cast<std::ptrdiff_t>(begin),
                                                data.x1.begin() + static_cast<std::ptrdiff_t>(end));
                                     });
  e.state_label = data.state_label;
  e.seed = data.seed;
  return e;
}

NumberDistEstimate estimate_photon_dist_streaming(const states::StateModel& state, double eta, std::size_t count,
                                                  std::uint64_t seed, Mode mode, int n_max, int n_blocks,
                                                  sampler::PhasePolicy policy, std::size_t chunk_size) {
  if (!state.single_mode()) throw DomainError("estimate_photon_dist: twin beam is two-mode");
  auto e = accumulate_number_kernels(count, chunk_size, n_blocks, mode, eta, n_max,
                                     [&](std::size_t c, std::vector<double>& x) {
                                       x = sampler::sample_single_chunk(state, eta, count, seed, c, policy, chunk_size).x1;
                                     });
  e.state_label = state.label();
  e.seed = seed;
  return e;
}

MomentEstimate estimate_two_mode_moments(const sampler::HomodyneDataset& data, int n_blocks) {
  if (data.mode_count != 2) throw DomainError("estimate_two_mode_moments: dataset is single-mode");
  const auto blocks = make_blocks(data.size(), n_blocks);
  const double scale = std::sqrt(data.eta);

  using Acc = std::array<NeumaierSum, 5>;
  std::vector<Acc> sums(blocks.size());
  std::vector<Acc> squares(blocks.size());
  parallel_for(blocks.size(), [&](std::size_t b) {
    for (std::size_t i = blocks[b].begin; i < blocks[b].end; ++i) {
      const double y1 = scale * data.x1[i];
      const double y2 = scale * data.x2[i];
      const double n1 = richter_kernel_diag(1, 1.0, y1);
      const double n2 = richter_kernel_diag(1, 1.0, y2);
      // n^2 = a^dag^2 a^2 + n
      const std::array<double, 5> v = {n1, n2, richter_kernel_diag(2, 1.0, y1) + n1,
                                       richter_kernel_diag(2, 1.0, y2) + n2, n1 * n2};
      for (std::size_t m = 0; m < 5; ++m) {
        sums[b][m].add(v[m]);
        squares[b][m].add(v[m] * v[m]);
      }
    }
  });

  MomentEstimate e;
  e.n_samples = data.size();
  e.kernel_eta = 1.0;
  e.data_eta = data.eta;
  e.state_label = data.state_label;
  e.seed = data.seed;
  e.block_means.resize(blocks.size());
  e.block_sizes.resize(blocks.size());
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    e.block_sizes[b] = blocks[b].end - blocks[b].begin;
    for (std::size_t m = 0; m < 5; ++m) e.block_means[b][m] = sums[b][m].value() / e.block_sizes[b];
  }
  for (std::size_t m = 0; m < 5; ++m) {
    NeumaierSum total, total_sq;
    for (std::size_t b = 0; b < blocks.size(); ++b) {
      total.merge(sums[b][m]);
      total_sq.merge(squares[b][m]);
    }
    e.values[m] = total.value() / static_cast<double>(e.n_samples);
    e.std_err[m] = standard_error(total.value(), total_sq.value(), e.n_samples);
  }
  return e;
}

nlohmann::json to_json(const NumberDistEstimate& est, bool include_blocks) {
  nlohmann::json j = {
      {"probs", est.probs},         {"stderr", est.std_err},         {"n_samples", est.n_samples},
      {"kernel_eta", est.kernel_eta}, {"data_eta", est.data_eta},    {"mode", to_string(est.mode)},
      {"exact", est.exact},         {"state_label", est.state_label}, {"seed", est.seed},
      {"n_blocks", est.block_means.size()},
  };
  if (include_blocks) {
    j["block_means"] = est.block_means;
    j["block_sizes"] = est.block_sizes;
  }
  return j;
}

nlohmann::json to_json(const MomentEstimate& est, bool include_blocks) {
  nlohmann::json moments = nlohmann::json::object();
  for (std::size_t m = 0; m < 5; ++m) moments[kMomentNames[m]] = {{"value", est.values[m]}, {"stderr", est.std_err[m]}};
  nlohmann::json j = {
      {"moments", moments},         {"n_samples", est.n_samples}, {"kernel_eta", est.kernel_eta},
      {"data_eta", est.data_eta},   {"exact", est.exact},         {"state_label", est.state_label},
      {"seed", est.seed},           {"n_blocks", est.block_means.size()},
  };
  if (include_blocks) {
    j["block_means"] = est.block_means;
    j["block_sizes"] = est.block_sizes;
  }
  return j;
}

void write_csv(const NumberDistEstimate& est, const std::filesystem::path& path) {
  auto os = detail::open_for_write(path);
  os << "n,p,stderr\n";
  for (std::size_t n = 0; n < est.probs.size(); ++n) {
    os << n << ',' << detail::fmt(est.probs[n]) << ',' << detail::fmt(est.std_err[n]) << '\n';
  }
  detail::finish_write(os, path);
}

}  // namespace nctomo::tomo
