#pragma once

// Synthetic toy distributions used as training data.

#include <cstdint>
#include <string>
#include <string_view>

#include "ikl/common.hpp"
#include "ikl/rng.hpp"

namespace ikl {

enum class DatasetKind { gaussian, gaussian_mixture_ring, two_moons, checkerboard };

std::string to_string(DatasetKind kind);
DatasetKind dataset_kind_from_string(std::string_view name);

/// Parameters are interpreted per kind:
///   gaussian: N(mean * 1, std^2 I) in `dim` dimensions.
///   gaussian_mixture_ring: `components` equal-weight N(., std^2 I) on a circle of `radius`.
///   two_moons: interleaved half circles of radius `radius`, isotropic jitter `std`.
///   checkerboard: uniform on the dark cells of a 4x4 board of side 2 * radius, jitter `std`.
struct ToyDataset {
  DatasetKind kind = DatasetKind::gaussian;
  std::size_t dim = 1;
  std::size_t components = 8;
  double radius = 2.0;
  double std = 1.0;
  double mean = 0.0;

  void validate() const;
  std::size_t data_dim() const;
  /// Row-major (n x data_dim) sample.
  Vec sample(std::size_t n, Rng& rng) const;
};

ToyDataset gaussian_dataset(std::size_t dim, double mean, double std);
ToyDataset ring_dataset(std::size_t components, double radius, double std);

/// Deterministic stream of batches from a dataset, independent of any
/// training randomness.
class DataSampler {
 public:
  DataSampler(ToyDataset dataset, std::uint64_t seed);
  Vec next(std::size_t n);
  const ToyDataset& dataset() const { return dataset_; }

 private:
  ToyDataset dataset_;
  Rng rng_;
};

}  // namespace ikl
