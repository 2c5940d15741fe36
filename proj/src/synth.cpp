#include "geoprobe/synth.hpp"

#include <array>
#include <cmath>
#include <cstdio>

#include "geoprobe/csv.hpp"
#include "geoprobe/error.hpp"

namespace geoprobe {

namespace {

// Standard deviation of a uniform draw on [-90, 90] and [-180, 180].
const double kLatScale = 90.0 / std::sqrt(3.0);
const double kLonScale = 180.0 / std::sqrt(3.0);

constexpr double kSouthAcceptance = 0.35;
constexpr double kSouthNoiseGain = 3.0;

std::string synthetic_country(double lat, double lon) {
  const int i = std::min(5, static_cast<int>((lat + 90.0) / 30.0));
  const int j = std::min(11, static_cast<int>((lon + 180.0) / 30.0));
  std::array<char, 32> buf{};
  std::snprintf(buf.data(), buf.size(), "Land %d-%02d", i, j);
  return buf.data();
}

}  // namespace

SkewProfile parse_skew_profile(std::string_view name) {
  if (name == "none") return SkewProfile::None;
  if (name == "south") return SkewProfile::South;
  throw ValidationError("unknown skew profile '" + std::string(name) + "' (expected none or south)");
}

std::string synthetic_continent(double lat, double lon) {
  if (lat < -60.0) return "Antarctica";
  if (lon < -30.0) return lat >= 12.0 ? "North America" : "South America";
  if (lon < 60.0) {
    if (lat >= 36.0) return "Europe";
    return "Africa";
  }
  if (lat < -10.0 && lon >= 110.0) return "Oceania";
  return "Asia";
}

double expected_r2_percent(double sigma) { return 100.0 / (1.0 + sigma * sigma); }

double sigma_for_r2_percent(double r2_percent) {
  if (!(r2_percent > 0.0 && r2_percent <= 100.0)) {
    throw ValidationError("target R2 must be in (0, 100]");
  }
  return std::sqrt(100.0 / r2_percent - 1.0);
}

SynthData gen_synthetic(const SynthConfig& config) {
  if (config.n < 10) throw ValidationError("synthetic data needs n >= 10");
  if (config.d < 2) throw ValidationError("synthetic data needs d >= 2");
  if (!(config.sigma >= 0.0) || !std::isfinite(config.sigma)) {
    throw ValidationError("sigma must be finite and non-negative");
  }
  SplitMix64 rng(config.seed);

  // Two orthonormal rows.
  const std::size_t d = config.d;
  std::array<std::vector<double>, 2> basis;
  for (auto& row : basis) {
    row.resize(d);
    for (auto& v : row) v = rng.next_gaussian();
  }
  const auto dot = [&](const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t k = 0; k < d; ++k) s += a[k] * b[k];
    return s;
  };
  const double proj = dot(basis[1], basis[0]) / dot(basis[0], basis[0]);
  for (std::size_t k = 0; k < d; ++k) basis[1][k] -= proj * basis[0][k];
  for (auto& row : basis) {
    const double norm = std::sqrt(dot(row, row));
    for (auto& v : row) v /= norm;
  }

  std::vector<LocationRecord> records;
  records.reserve(config.n);
  while (records.size() < config.n) {
    const double lat = -90.0 + 180.0 * rng.next_unit();
    const double lon = -180.0 + 360.0 * rng.next_unit();
    if (config.skew == SkewProfile::South && lat < 0.0 && rng.next_unit() >= kSouthAcceptance) {
      continue;
    }
    LocationRecord rec;
    rec.row_index = records.size();
    std::array<char, 32> name{};
    std::snprintf(name.data(), name.size(), "loc%06zu", records.size());
    rec.name = name.data();
    rec.latitude = std::round(lat * 1e4) / 1e4;
    rec.longitude = std::round(lon * 1e4) / 1e4;
    rec.country = synthetic_country(rec.latitude, rec.longitude);
    rec.continent = synthetic_continent(rec.latitude, rec.longitude);
    if (rng.next_unit() < 0.9) {
      rec.population = static_cast<std::uint64_t>(std::pow(10.0, 2.0 + 5.0 * rng.next_unit()));
    }
    records.push_back(std::move(rec));
  }

  SynthData out;
  out.locations_csv = format_locations(records);
  out.locations = parse_locations(out.locations_csv);

  EmbeddingMatrix& m = out.embeddings;
  m.model_id = config.model_id;
  m.layer = config.layer;
  m.rows = config.n;
  m.cols = d;
  m.locations_digest = out.locations.source_digest;
  m.data.resize(config.n * d);
  for (std::size_t r = 0; r < config.n; ++r) {
    const auto& rec = out.locations.records[r];
    const double z_lat = rec.latitude / kLatScale;
    const double z_lon = rec.longitude / kLonScale;
    double noise = config.sigma;
    if (config.skew == SkewProfile::South && rec.latitude < 0.0) {
      noise *= 1.0 + kSouthNoiseGain * (-rec.latitude / 90.0);
    }
    for (std::size_t k = 0; k < d; ++k) {
      const double signal = z_lat * basis[0][k] + z_lon * basis[1][k];
      m.data[r * d + k] = static_cast<float>(signal + noise * rng.next_gaussian());
    }
  }
  return out;
}

}  // namespace geoprobe
