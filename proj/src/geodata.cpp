#include "geoprobe/geodata.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <map>
#include <numeric>

#include <json.hpp>

#include "geoprobe/csv.hpp"
#include "geoprobe/error.hpp"

namespace geoprobe {

namespace {

constexpr std::array<std::string_view, 6> kColumns = {
    "name", "country", "continent", "latitude", "longitude", "population"};

std::optional<std::uint64_t> parse_population(std::string_view text, std::size_t line_no) {
  if (text.empty() || text.find_first_not_of(" \t\r") == std::string_view::npos) {
    return std::nullopt;
  }
  const double v = parse_double(text, "population on line " + std::to_string(line_no));
  if (!std::isfinite(v) || v < 0.0) {
    throw ValidationError("line " + std::to_string(line_no) + ": population must be non-negative");
  }
  return static_cast<std::uint64_t>(std::llround(v));
}

}  // namespace

Dataset parse_locations(std::string_view csv_bytes) {
  Dataset ds;
  ds.source_digest = fnv1a64(csv_bytes);

  std::string_view rest = csv_bytes;
  if (rest.substr(0, 3) == "\xEF\xBB\xBF") rest.remove_prefix(3);

  std::array<std::size_t, kColumns.size()> column_of{};
  bool have_header = false;
  std::size_t line_no = 0;
  while (!rest.empty()) {
    const std::size_t nl = rest.find('\n');
    std::string_view line = rest.substr(0, nl);
    rest = nl == std::string_view::npos ? std::string_view{} : rest.substr(nl + 1);
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;

    std::vector<std::string> fields;
    try {
      fields = split_csv_line(line);
    } catch (const ValidationError& e) {
      throw ValidationError("line " + std::to_string(line_no) + ": " + e.what());
    }

    if (!have_header) {
      for (std::size_t k = 0; k < kColumns.size(); ++k) {
        auto it = std::find(fields.begin(), fields.end(), kColumns[k]);
        if (it == fields.end()) {
          throw ValidationError("header is missing column '" + std::string(kColumns[k]) + "'");
        }
        column_of[k] = static_cast<std::size_t>(it - fields.begin());
      }
      have_header = true;
      continue;
    }

    const std::size_t needed = *std::max_element(column_of.begin(), column_of.end()) + 1;
    if (fields.size() < needed) {
      throw ValidationError("line " + std::to_string(line_no) + ": expected at least " +
                            std::to_string(needed) + " fields, found " +
                            std::to_string(fields.size()));
    }

    LocationRecord rec;
    rec.row_index = ds.records.size();
    rec.name = fields[column_of[0]];
    rec.country = fields[column_of[1]];
    rec.continent = fields[column_of[2]];
    if (rec.name.empty()) {
      throw ValidationError("line " + std::to_string(line_no) + ": empty name");
    }
    const std::string where = " on line " + std::to_string(line_no);
    rec.latitude = parse_double(fields[column_of[3]], "latitude" + where);
    rec.longitude = parse_double(fields[column_of[4]], "longitude" + where);
    if (!(rec.latitude >= -90.0 && rec.latitude <= 90.0)) {
      throw ValidationError("latitude out of range for '" + rec.name + "'" + where);
    }
    if (!(rec.longitude >= -180.0 && rec.longitude <= 180.0)) {
      throw ValidationError("longitude out of range for '" + rec.name + "'" + where);
    }
    rec.population = parse_population(fields[column_of[5]], line_no);
    ds.records.push_back(std::move(rec));
  }
  if (!have_header) {
    throw ValidationError("locations file has no header");
  }
  return ds;
}

Dataset load_locations(const std::filesystem::path& path) {
  return parse_locations(read_file(path));
}

std::string format_locations(std::span<const LocationRecord> records) {
  std::string out = "name,country,continent,latitude,longitude,population\n";
  for (const auto& r : records) {
    out += csv_escape(r.name);
    out += ',';
    out += csv_escape(r.country);
    out += ',';
    out += csv_escape(r.continent);
    out += ',';
    out += format_double(r.latitude);
    out += ',';
    out += format_double(r.longitude);
    out += ',';
    if (r.population) out += std::to_string(*r.population);
    out += '\n';
  }
  return out;
}

std::uint64_t SplitMix64::next() {
  std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

double SplitMix64::next_unit() {
  return static_cast<double>(next() >> 11) * 0x1.0p-53;
}

double SplitMix64::next_gaussian() {
  if (spare_) {
    const double v = *spare_;
    spare_.reset();
    return v;
  }
  // 1 - u keeps the log argument in (0, 1].
  const double u1 = 1.0 - next_unit();
  const double u2 = next_unit();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * 3.14159265358979323846 * u2;
  spare_ = radius * std::sin(angle);
  return radius * std::cos(angle);
}

std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  SplitMix64 rng(seed);
  for (std::size_t i = n; i-- > 1;) {
    const auto j = static_cast<std::size_t>(rng.next() % (static_cast<std::uint64_t>(i) + 1));
    std::swap(perm[i], perm[j]);
  }
  return perm;
}

std::size_t test_set_size(std::size_t n, double test_fraction) {
  // The small slack keeps products like 0.3 * 10 = 3.0000000000000004 at 3.
  const double exact = test_fraction * static_cast<double>(n);
  return static_cast<std::size_t>(std::ceil(exact - 1e-9 * std::max(1.0, exact)));
}

SplitIndices make_split(std::size_t n, double test_fraction, std::uint64_t seed) {
  if (n < 2) {
    throw ValidationError("split needs at least 2 rows, got " + std::to_string(n));
  }
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw ValidationError("test fraction must lie in (0, 1)");
  }
  const std::size_t n_test = test_set_size(n, test_fraction);
  if (n_test == 0 || n_test >= n) {
    throw ValidationError("test fraction " + format_double(test_fraction) + " on " +
                          std::to_string(n) + " rows leaves an empty train or test set");
  }
  const auto perm = seeded_permutation(n, seed);
  SplitIndices s;
  s.seed = seed;
  s.test_fraction = test_fraction;
  s.test_rows.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_test));
  s.train_rows.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_test), perm.end());
  std::sort(s.test_rows.begin(), s.test_rows.end());
  std::sort(s.train_rows.begin(), s.train_rows.end());
  return s;
}

std::string split_to_json(const SplitIndices& split) {
  nlohmann::ordered_json j;
  j["seed"] = split.seed;
  j["test_fraction"] = split.test_fraction;
  j["test_rows"] = split.test_rows;
  j["train_rows"] = split.train_rows;
  return j.dump() + "\n";
}

SplitIndices split_from_json(std::string_view text) {
  SplitIndices s;
  try {
    const auto j = nlohmann::json::parse(text);
    s.seed = j.at("seed").get<std::uint64_t>();
    s.test_fraction = j.at("test_fraction").get<double>();
    s.test_rows = j.at("test_rows").get<std::vector<std::size_t>>();
    s.train_rows = j.at("train_rows").get<std::vector<std::size_t>>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed split file: ") + e.what());
  }
  std::vector<std::size_t> all = s.test_rows;
  all.insert(all.end(), s.train_rows.begin(), s.train_rows.end());
  std::sort(all.begin(), all.end());
  for (std::size_t i = 0; i < all.size(); ++i) {
    if (all[i] != i) {
      throw ValidationError("split rows do not partition 0..N-1");
    }
  }
  return s;
}

void validate(const EmbeddingMatrix& m) {
  if (m.data.size() != m.rows * m.cols) {
    throw ValidationError("embedding data size does not match rows x cols");
  }
  for (std::size_t i = 0; i < m.data.size(); ++i) {
    if (!std::isfinite(m.data[i])) {
      throw ValidationError("non-finite embedding value at row " + std::to_string(i / m.cols) +
                            ", column " + std::to_string(i % m.cols));
    }
  }
}

void check_alignment(const EmbeddingMatrix& m, const Dataset& locations) {
  if (m.rows != locations.size()) {
    throw ValidationError("row mismatch: embeddings have " + std::to_string(m.rows) +
                          " rows, locations have " + std::to_string(locations.size()));
  }
  if (m.locations_digest != locations.source_digest) {
    throw ValidationError("digest mismatch: embeddings were built for locations " +
                          digest_hex(m.locations_digest) + ", got " +
                          digest_hex(locations.source_digest));
  }
}

namespace {

constexpr std::string_view kMagic{"GEOEMB1\0", 8};

template <typename T>
void put_le(std::string& out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<char>((static_cast<std::uint64_t>(value) >> (8 * i)) & 0xFF));
  }
}

template <typename T>
T get_le(std::string_view bytes, std::size_t& pos) {
  if (bytes.size() - pos < sizeof(T)) {
    throw ValidationError("truncated header");
  }
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[pos + i])) << (8 * i);
  }
  pos += sizeof(T);
  return static_cast<T>(v);
}

}  // namespace

std::string encode_embeddings(const EmbeddingMatrix& m) {
  validate(m);
  if (m.model_id.size() > 0xFFFF) {
    throw ValidationError("model_id longer than 65535 bytes");
  }
  if (m.rows > 0xFFFFFFFFULL || m.cols > 0xFFFFFFFFULL) {
    throw ValidationError("matrix dimensions exceed 32-bit range");
  }
  std::string out;
  out.reserve(8 + 26 + m.model_id.size() + m.data.size() * 4);
  out.append(kMagic);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(m.rows));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(m.cols));
  put_le<std::uint32_t>(out, m.layer);
  put_le<std::uint32_t>(out, 0);
  put_le<std::uint64_t>(out, m.locations_digest);
  put_le<std::uint16_t>(out, static_cast<std::uint16_t>(m.model_id.size()));
  out.append(m.model_id);
  for (float f : m.data) {
    put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(f));
  }
  return out;
}

EmbeddingMatrix decode_embeddings(std::string_view bytes) {
  if (bytes.size() < kMagic.size() || bytes.substr(0, kMagic.size()) != kMagic) {
    throw ValidationError("bad magic: not a GEOEMB1 file");
  }
  std::size_t pos = kMagic.size();
  EmbeddingMatrix m;
  m.rows = get_le<std::uint32_t>(bytes, pos);
  m.cols = get_le<std::uint32_t>(bytes, pos);
  m.layer = get_le<std::uint32_t>(bytes, pos);
  const auto dtype = get_le<std::uint32_t>(bytes, pos);
  m.locations_digest = get_le<std::uint64_t>(bytes, pos);
  const auto id_len = get_le<std::uint16_t>(bytes, pos);
  if (dtype != 0) {
    throw ValidationError("unsupported dtype tag " + std::to_string(dtype) +
                          " (only 0 = 32-bit real)");
  }
  if (bytes.size() - pos < id_len) {
    throw ValidationError("truncated header");
  }
  m.model_id = std::string(bytes.substr(pos, id_len));
  pos += id_len;

  const std::uint64_t count = static_cast<std::uint64_t>(m.rows) * m.cols;
  const std::uint64_t available = bytes.size() - pos;
  if (available < count * 4) {
    throw ValidationError("truncated payload: expected " + std::to_string(count * 4) +
                          " bytes, found " + std::to_string(available));
  }
  if (available > count * 4) {
    throw ValidationError("trailing bytes after payload");
  }
  m.data.resize(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    m.data[i] = std::bit_cast<float>(get_le<std::uint32_t>(bytes, pos));
  }
  validate(m);
  return m;
}

void write_embeddings(const EmbeddingMatrix& m, const std::filesystem::path& path) {
  write_file(path, encode_embeddings(m));
}

EmbeddingMatrix read_embeddings(const std::filesystem::path& path) {
  try {
    return decode_embeddings(read_file(path));
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

EmbeddingMatrix concat_duplicate_features(const EmbeddingMatrix& m) {
  validate(m);
  EmbeddingMatrix out;
  out.model_id = m.model_id + "+dup";
  out.layer = m.layer;
  out.rows = m.rows;
  out.cols = 2 * m.cols;
  out.locations_digest = m.locations_digest;
  out.data.reserve(out.rows * out.cols);
  for (std::size_t r = 0; r < m.rows; ++r) {
    const auto src = m.row(r);
    out.data.insert(out.data.end(), src.begin(), src.end());
    out.data.insert(out.data.end(), src.begin(), src.end());
  }
  return out;
}

}  // namespace geoprobe
