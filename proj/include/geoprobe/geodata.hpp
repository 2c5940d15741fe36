#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace geoprobe {

struct LocationRecord {
  std::size_t row_index = 0;
  std::string name;
  std::string country;
  std::string continent;
  double latitude = 0.0;
  double longitude = 0.0;
  std::optional<std::uint64_t> population;
};

// Records in source-file order. No deduplication.
struct Dataset {
  std::vector<LocationRecord> records;
  std::uint64_t source_digest = 0;

  std::size_t size() const { return records.size(); }
};

// Parses the locations table. Columns are matched by header name, so extra
// columns and any column order are accepted. Throws ValidationError naming
// the offending line or record.
Dataset parse_locations(std::string_view csv_bytes);
Dataset load_locations(const std::filesystem::path& path);

// Inverse of parse_locations, used by the synthetic generator.
std::string format_locations(std::span<const LocationRecord> records);

// SplitMix64 (Steele, Lea and Flood). Fully specified, so index permutations
// are identical on every platform.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next();
  // Uniform in [0, 1) with 53 random bits.
  double next_unit();
  // Standard normal via Box-Muller; deterministic across platforms.
  double next_gaussian();

 private:
  std::uint64_t state_;
  std::optional<double> spare_;
};

// Fisher-Yates permutation of 0..n-1. For i = n-1 down to 1 the swap partner
// is next() % (i + 1).
std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed);

struct SplitIndices {
  std::uint64_t seed = 0;
  double test_fraction = 0.0;
  std::vector<std::size_t> test_rows;
  std::vector<std::size_t> train_rows;

  std::size_t total() const { return test_rows.size() + train_rows.size(); }
};

// ceil(test_fraction * n) rows go to the test set.
std::size_t test_set_size(std::size_t n, double test_fraction);
SplitIndices make_split(std::size_t n, double test_fraction, std::uint64_t seed);

std::string split_to_json(const SplitIndices& split);
SplitIndices split_from_json(std::string_view text);

// One (model, layer) dump of representations, row-aligned with a Dataset.
struct EmbeddingMatrix {
  std::string model_id;
  std::uint32_t layer = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<float> data;  // row-major
  std::uint64_t locations_digest = 0;

  float at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::span<const float> row(std::size_t r) const {
    return {data.data() + r * cols, cols};
  }
};

// Throws ValidationError when shape or data are inconsistent or non-finite.
void validate(const EmbeddingMatrix& m);

// Throws ValidationError unless m pairs with the dataset (row count and digest).
void check_alignment(const EmbeddingMatrix& m, const Dataset& locations);

// GEOEMB1, little-endian:
//   "GEOEMB1\0" | u32 rows | u32 cols | u32 layer | u32 dtype (0 = f32)
//   | u64 locations_digest | u16 id_len | id bytes | rows*cols f32
std::string encode_embeddings(const EmbeddingMatrix& m);
EmbeddingMatrix decode_embeddings(std::string_view bytes);

void write_embeddings(const EmbeddingMatrix& m, const std::filesystem::path& path);
EmbeddingMatrix read_embeddings(const std::filesystem::path& path);

// [X | X]: columns d..2d-1 repeat columns 0..d-1.
EmbeddingMatrix concat_duplicate_features(const EmbeddingMatrix& m);

}  // namespace geoprobe
