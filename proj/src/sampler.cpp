#include "nctomo/sampler.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>

#include <json.hpp>

#include "nctomo/error.hpp"
#include "nctomo/parallel.hpp"
#include "nctomo/rng.hpp"

namespace nctomo::sampler {

namespace {

using states::complex;
constexpr double kPi = std::numbers::pi;
constexpr char kMagic[8] = {'N', 'C', 'T', 'O', 'M', 'O', 'D', '1'};

void check_common(double eta, std::size_t count, std::size_t chunk_size) {
  if (!(eta > 0.0 && eta <= 1.0)) throw DomainError("sampler: eta must lie in (0, 1]");
  if (count == 0) throw DomainError("sampler: count must be >= 1");
  if (chunk_size == 0) throw DomainError("sampler: chunk_size must be >= 1");
}

double draw_phase(CounterRng& rng, const PhasePolicy& policy, double pinned) {
  return policy.pinned ? pinned : kPi * rng.uniform();
}

// Ideal quadrature at phase phi.
double draw_ideal(const states::StateKind& kind, double phi, CounterRng& rng) {
  if (const auto* s = std::get_if<states::Coherent>(&kind)) {
    return (s->alpha * std::polar(1.0, -phi)).real() + 0.5 * rng.normal();
  }
  if (const auto* s = std::get_if<states::Squeezed>(&kind)) {
    const double c = std::cos(phi);
    const double sn = std::sin(phi);
    const double var = 0.25 * (std::exp(2.0 * s->r) * c * c + std::exp(-2.0 * s->r) * sn * sn);
    return (s->alpha * std::polar(1.0, -phi)).real() + std::sqrt(var) * rng.normal();
  }
  if (const auto* s = std::get_if<states::EvenCat>(&kind)) {
    // Rejection from the equal mixture of the two coherent components; the
    // target never exceeds twice the mixture density.
    const complex beta = s->alpha * std::polar(1.0, -phi);
    const double x0 = beta.real();
    const double p0 = beta.imag();
    for (;;) {
      const double sign = rng.uniform() < 0.5 ? 1.0 : -1.0;
      const double x = sign * x0 + 0.5 * rng.normal();
      const double gp = std::exp(-2.0 * (x - x0) * (x - x0));
      const double gm = std::exp(-2.0 * (x + x0) * (x + x0));
      const double envelope = 2.0 * (gp + gm);
      const double target = gp + gm + 2.0 * std::exp(-2.0 * (x * x + x0 * x0)) * std::cos(4.0 * p0 * x);
      if (envelope > 0.0 && rng.uniform() * envelope < target) return x;
    }
  }
  throw DomainError("sample_single: twin beam is two-mode, use sample_twin");
}

void fill_single_chunk(const states::StateModel& state, double eta, std::size_t begin, std::size_t end,
                       std::uint64_t seed, std::size_t chunk_index, const PhasePolicy& policy, double* x,
                       double* phi) {
  CounterRng rng(seed, chunk_index);
  const double noise = std::sqrt(states::noise_variance(eta));
  for (std::size_t i = begin; i < end; ++i) {
    const double ph = draw_phase(rng, policy, policy.phi1);
    double v = draw_ideal(state.kind(), ph, rng);
    if (eta < 1.0) v += noise * rng.normal();
    x[i - begin] = v;
    phi[i - begin] = ph;
  }
}

HomodyneDataset empty_like(int modes, double eta, std::uint64_t seed, std::size_t chunk_size, std::string label) {
  HomodyneDataset d;
  d.mode_count = modes;
  d.eta = eta;
  d.seed = seed;
  d.chunk_size = chunk_size;
  d.state_label = std::move(label);
  return d;
}

std::uint64_t swap_bytes(std::uint64_t v) {
  std::uint64_t r = 0;
  for (int i = 0; i < 8; ++i) r |= ((v >> (8 * i)) & 0xFFu) << (8 * (7 - i));
  return r;
}

std::size_t chunk_count(std::size_t count, std::size_t chunk_size) { return (count + chunk_size - 1) / chunk_size; }

void write_le_doubles(std::ostream& os, const std::vector<double>& v) {
  if constexpr (std::endian::native == std::endian::little) {
    os.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
  } else {
    for (double d : v) {
      auto bits = swap_bytes(std::bit_cast<std::uint64_t>(d));
      os.write(reinterpret_cast<const char*>(&bits), sizeof bits);
    }
  }
}

void read_le_doubles(std::istream& is, std::vector<double>& v, std::size_t count) {
  v.resize(count);
  is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(count * sizeof(double)));
  if constexpr (std::endian::native != std::endian::little) {
    for (double& d : v) d = std::bit_cast<double>(swap_bytes(std::bit_cast<std::uint64_t>(d)));
  }
}

void write_u64_le(std::ostream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

std::uint64_t read_u64_le(std::istream& is) {
  unsigned char b[8] = {};
  is.read(reinterpret_cast<char*>(b), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

}  // namespace

HomodyneDataset sample_single_chunk(const states::StateModel& state, double eta, std::size_t count,
                                    std::uint64_t seed, std::size_t chunk_index, PhasePolicy policy,
                                    std::size_t chunk_size) {
  check_common(eta, count, chunk_size);
  if (!state.single_mode()) throw DomainError("sample_single: twin beam is two-mode, use sample_twin");
  if (chunk_index >= chunk_count(count, chunk_size)) throw DomainError("sample_single_chunk: chunk index out of range");
  const std::size_t begin = chunk_index * chunk_size;
  const std::size_t end = std::min(count, begin + chunk_size);
  auto d = empty_like(1, eta, seed, chunk_size, state.label());
  d.x1.resize(end - begin);
  d.phi1.resize(end - begin);
  fill_single_chunk(state, eta, begin, end, seed, chunk_index, policy, d.x1.data(), d.phi1.data());
  return d;
}

HomodyneDataset sample_single(const states::StateModel& state, double eta, std::size_t count, std::uint64_t seed,
                              PhasePolicy policy, std::size_t chunk_size) {
  check_common(eta, count, chunk_size);
  if (!state.single_mode()) throw DomainError("sample_single: twin beam is two-mode, use sample_twin");
  auto d = empty_like(1, eta, seed, chunk_size, state.label());
  d.x1.resize(count);
  d.phi1.resize(count);
  parallel_for(chunk_count(count, chunk_size), [&](std::size_t c) {
    const std::size_t begin = c * chunk_size;
    const std::size_t end = std::min(count, begin + chunk_size);
    fill_single_chunk(state, eta, begin, end, seed, c, policy, d.x1.data() + begin, d.phi1.data() + begin);
  });
  return d;
}

HomodyneDataset sample_twin(std::complex<double> lambda, double eta, std::size_t count, std::uint64_t seed,
                            PhasePolicy policy, std::size_t chunk_size) {
  check_common(eta, count, chunk_size);
  if (!(std::abs(lambda) < 1.0)) throw DomainError("sample_twin: need |lambda| < 1");
  const auto label = states::StateModel::twin_beam(lambda).label();
  auto d = empty_like(2, eta, seed, chunk_size, label);
  d.x1.resize(count);
  d.x2.resize(count);
  d.phi1.resize(count);
  d.phi2.resize(count);
  const double four_delta2 = 4.0 * states::noise_variance(eta);
  parallel_for(chunk_count(count, chunk_size), [&](std::size_t c) {
    CounterRng rng(seed, c);
    const std::size_t begin = c * chunk_size;
    const std::size_t end = std::min(count, begin + chunk_size);
    for (std::size_t i = begin; i < end; ++i) {
      const double p1 = draw_phase(rng, policy, policy.phi1);
      const double p2 = draw_phase(rng, policy, policy.phi2);
      const complex z = std::polar(1.0, -(p1 + p2)) * lambda;
      const double denom = 1.0 - std::norm(z);
      const double sum_var = 0.5 * (std::norm(1.0 + z) / denom + four_delta2);
      const double diff_var = 0.5 * (std::norm(1.0 - z) / denom + four_delta2);
      const double u = std::sqrt(sum_var) * rng.normal();
      const double v = std::sqrt(diff_var) * rng.normal();
      d.x1[i] = 0.5 * (u + v);
      d.x2[i] = 0.5 * (u - v);
      d.phi1[i] = p1;
      d.phi2[i] = p2;
    }
  });
  return d;
}

void write_dataset(const HomodyneDataset& data, const std::filesystem::path& path) {
  nlohmann::json header = {
      {"format_version", kFormatVersion}, {"state_label", data.state_label}, {"eta", data.eta},
      {"seed", data.seed},                {"count", data.size()},           {"mode_count", data.mode_count},
      {"chunk_size", data.chunk_size},
  };
  const std::string text = header.dump();
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os.write(kMagic, sizeof kMagic);
  write_u64_le(os, text.size());
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (data.mode_count == 1) {
    write_le_doubles(os, data.x1);
    write_le_doubles(os, data.phi1);
  } else {
    write_le_doubles(os, data.x1);
    write_le_doubles(os, data.x2);
    write_le_doubles(os, data.phi1);
    write_le_doubles(os, data.phi2);
  }
  if (!os) throw IoError("write failed: " + path.string());
}

HomodyneDataset read_dataset(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  char magic[8] = {};
  is.read(magic, sizeof magic);
  if (!is || std::memcmp(magic, kMagic, sizeof kMagic) != 0) throw IoError(path.string() + ": not a dataset file");
  const auto header_len = read_u64_le(is);
  if (!is || header_len > (1u << 20)) throw IoError(path.string() + ": corrupt header length");
  std::string text(header_len, '\0');
  is.read(text.data(), static_cast<std::streamsize>(header_len));
  HomodyneDataset d;
  std::size_t count = 0;
  try {
    const auto header = nlohmann::json::parse(text);
    if (header.at("format_version").get<int>() != kFormatVersion) throw IoError(path.string() + ": unsupported version");
    d.state_label = header.at("state_label").get<std::string>();
    d.eta = header.at("eta").get<double>();
    d.seed = header.at("seed").get<std::uint64_t>();
    d.mode_count = header.at("mode_count").get<int>();
    d.chunk_size = header.at("chunk_size").get<std::size_t>();
    count = header.at("count").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path.string() + ": bad header: " + e.what());
  }
  if (d.mode_count != 1 && d.mode_count != 2) throw IoError(path.string() + ": mode_count must be 1 or 2");
  if (d.mode_count == 1) {
    read_le_doubles(is, d.x1, count);
    read_le_doubles(is, d.phi1, count);
  } else {
    read_le_doubles(is, d.x1, count);
    read_le_doubles(is, d.x2, count);
    read_le_doubles(is, d.phi1, count);
    read_le_doubles(is, d.phi2, count);
  }
  if (!is) throw IoError(path.string() + ": truncated data");
  return d;
}

void write_dataset_csv(const HomodyneDataset& data, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  char buf[128];
  if (data.mode_count == 1) {
    os << "x,phi\n";
    for (std::size_t i = 0; i < data.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", data.x1[i], data.phi1[i]);
      os << buf;
    }
  } else {
    os << "x1,x2,phi1,phi2\n";
    for (std::size_t i = 0; i < data.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g\n", data.x1[i], data.x2[i], data.phi1[i], data.phi2[i]);
      os << buf;
    }
  }
  if (!os) throw IoError("write failed: " + path.string());
}

}  // namespace nctomo::sampler
