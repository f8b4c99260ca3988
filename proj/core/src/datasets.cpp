#include "ikl/datasets.hpp"

#include <cmath>
#include <numbers>
#include <utility>

namespace ikl {

std::string to_string(DatasetKind kind) {
  switch (kind) {
    case DatasetKind::gaussian: return "gaussian";
    case DatasetKind::gaussian_mixture_ring: return "gaussian_mixture_ring";
    case DatasetKind::two_moons: return "two_moons";
    case DatasetKind::checkerboard: return "checkerboard";
  }
  return "unknown";
}

DatasetKind dataset_kind_from_string(std::string_view name) {
  if (name == "gaussian") return DatasetKind::gaussian;
  if (name == "gaussian_mixture_ring") return DatasetKind::gaussian_mixture_ring;
  if (name == "two_moons") return DatasetKind::two_moons;
  if (name == "checkerboard") return DatasetKind::checkerboard;
  throw ConfigError("unknown dataset kind '" + std::string(name) + "'");
}

void ToyDataset::validate() const {
  if (!(std >= 0.0) || !std::isfinite(std)) throw ConfigError("dataset std must be finite and >= 0");
  if (!std::isfinite(mean)) throw ConfigError("dataset mean must be finite");
  switch (kind) {
    case DatasetKind::gaussian:
      if (dim == 0) throw ConfigError("gaussian dataset needs dim >= 1");
      break;
    case DatasetKind::gaussian_mixture_ring:
      if (components == 0) throw ConfigError("ring dataset needs at least one component");
      [[fallthrough]];
    case DatasetKind::two_moons:
    case DatasetKind::checkerboard:
      if (!(radius > 0.0) || !std::isfinite(radius)) throw ConfigError("dataset radius must be > 0");
      break;
  }
}

std::size_t ToyDataset::data_dim() const {
  return kind == DatasetKind::gaussian ? dim : 2;
}

Vec ToyDataset::sample(std::size_t n, Rng& rng) const {
  validate();
  const std::size_t d = data_dim();
  Vec out(n * d);
  constexpr double pi = std::numbers::pi;
  for (std::size_t i = 0; i < n; ++i) {
    double* row = out.data() + i * d;
    switch (kind) {
      case DatasetKind::gaussian:
        for (std::size_t j = 0; j < d; ++j) row[j] = mean + std * rng.normal();
        break;
      case DatasetKind::gaussian_mixture_ring: {
        auto k = static_cast<std::size_t>(rng.uniform() * static_cast<double>(components));
        if (k >= components) k = components - 1;
        const double angle = 2.0 * pi * static_cast<double>(k) / static_cast<double>(components);
        row[0] = radius * std::cos(angle) + std * rng.normal();
        row[1] = radius * std::sin(angle) + std * rng.normal();
        break;
      }
      case DatasetKind::two_moons: {
        const bool lower = rng.uniform() < 0.5;
        const double a = pi * rng.uniform();
        if (lower) {
          row[0] = radius * (1.0 - std::cos(a)) - 0.5 * radius;
          row[1] = -radius * std::sin(a) + 0.25 * radius;
        } else {
          row[0] = radius * std::cos(a) - 0.5 * radius;
          row[1] = radius * std::sin(a) - 0.25 * radius;
        }
        row[0] += std * rng.normal();
        row[1] += std * rng.normal();
        break;
      }
      case DatasetKind::checkerboard: {
        // Cell (i, j) of the 4x4 board is dark when i + j is even.
        const double cell = 0.5 * radius;
        auto ci = static_cast<int>(rng.uniform() * 4.0);
        auto cj = static_cast<int>(rng.uniform() * 2.0) * 2 + (ci % 2);
        ci = ci > 3 ? 3 : ci;
        cj = cj > 3 ? 3 : cj;
        row[0] = (static_cast<double>(ci) + rng.uniform()) * cell - radius;
        row[1] = (static_cast<double>(cj) + rng.uniform()) * cell - radius;
        row[0] += std * rng.normal();
        row[1] += std * rng.normal();
        break;
      }
    }
  }
  return out;
}

ToyDataset gaussian_dataset(std::size_t dim, double mean, double std) {
  ToyDataset ds;
  ds.kind = DatasetKind::gaussian;
  ds.dim = dim;
  ds.mean = mean;
  ds.std = std;
  ds.validate();
  return ds;
}

ToyDataset ring_dataset(std::size_t components, double radius, double std) {
  ToyDataset ds;
  ds.kind = DatasetKind::gaussian_mixture_ring;
  ds.components = components;
  ds.radius = radius;
  ds.std = std;
  ds.validate();
  return ds;
}

DataSampler::DataSampler(ToyDataset dataset, std::uint64_t seed)
    : dataset_(std::move(dataset)), rng_(seed, Rng::kDataStream) {
  dataset_.validate();
}

Vec DataSampler::next(std::size_t n) { return dataset_.sample(n, rng_); }

}  // namespace ikl
