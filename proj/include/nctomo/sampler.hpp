#pragma once

// Seeded Monte-Carlo homodyne data.
//
// Data use the rescaled convention: at efficiency eta a sample is the ideal
// quadrature plus Gaussian noise of variance (1-eta)/(4 eta).

#include <complex>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "nctomo/states.hpp"

namespace nctomo::sampler {

inline constexpr std::size_t kDefaultChunkSize = std::size_t{1} << 16;
inline constexpr int kFormatVersion = 1;

/// Column-oriented homodyne samples. Single-mode sets fill x1/phi1 only.
struct HomodyneDataset {
  int mode_count = 1;
  std::vector<double> x1;
  std::vector<double> phi1;
  std::vector<double> x2;
  std::vector<double> phi2;
  double eta = 1.0;
  std::uint64_t seed = 0;
  std::size_t chunk_size = kDefaultChunkSize;
  std::string state_label;

  std::size_t size() const { return x1.size(); }
  bool operator==(const HomodyneDataset&) const = default;
};

struct PhasePolicy {
  bool pinned = false;
  double phi1 = 0.0;
  double phi2 = 0.0;

  static PhasePolicy fluctuating() { return {}; }
  static PhasePolicy pin(double phi1, double phi2) { return {true, phi1, phi2}; }
};

/// Single-mode data: phi uniform on [0, pi) (or pinned), x drawn from the
/// state's quadrature density plus efficiency noise.
HomodyneDataset sample_single(const states::StateModel& state, double eta, std::size_t count, std::uint64_t seed,
                              PhasePolicy policy = PhasePolicy::fluctuating(),
                              std::size_t chunk_size = kDefaultChunkSize);

/// Chunk `chunk_index` of sample_single(...) alone; concatenating all chunks
/// reproduces the full dataset.
HomodyneDataset sample_single_chunk(const states::StateModel& state, double eta, std::size_t count,
                                    std::uint64_t seed, std::size_t chunk_index, PhasePolicy policy,
                                    std::size_t chunk_size = kDefaultChunkSize);

/// Twin-beam data drawn from the exact joint homodyne density.
HomodyneDataset sample_twin(std::complex<double> lambda, double eta, std::size_t count, std::uint64_t seed,
                            PhasePolicy policy = PhasePolicy::fluctuating(),
                            std::size_t chunk_size = kDefaultChunkSize);

/// Binary file: 8-byte magic "NCTOMOD1", uint64 LE header length, JSON
/// header, then each column as count little-endian doubles in the order
/// (x, phi) or (x1, x2, phi1, phi2).
void write_dataset(const HomodyneDataset& data, const std::filesystem::path& path);
HomodyneDataset read_dataset(const std::filesystem::path& path);

/// Plain CSV with a header row.
void write_dataset_csv(const HomodyneDataset& data, const std::filesystem::path& path);

}  // namespace nctomo::sampler
