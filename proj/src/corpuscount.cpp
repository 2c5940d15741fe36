#include "geoprobe/corpuscount.hpp"

#include <algorithm>
#include <atomic>
#include <deque>
#include <exception>
#include <limits>
#include <set>
#include <thread>

#include <json.hpp>
#include <zlib.h>

#include "geoprobe/csv.hpp"
#include "geoprobe/error.hpp"

namespace geoprobe {

namespace {

constexpr std::uint32_t kNoState = std::numeric_limits<std::uint32_t>::max();

inline bool is_ascii_alnum(unsigned char c) {
  return (c >= '0' && c <= '9') || ((c | 0x20) >= 'a' && (c | 0x20) <= 'z');
}

}  // namespace

PatternSet PatternSet::build(std::vector<std::string> names) {
  if (names.empty()) {
    throw ValidationError("pattern list is empty");
  }
  std::set<std::string_view> seen;
  for (const auto& n : names) {
    if (n.empty()) {
      throw ValidationError("empty pattern name");
    }
    if (!seen.insert(n).second) {
      throw ValidationError("duplicate pattern name '" + n + "'");
    }
  }

  PatternSet ps;
  ps.names_ = std::move(names);

  // Bytes that never occur in a pattern share class 0.
  ps.byte_class_.assign(256, 0);
  std::uint16_t next_class = 1;
  for (const auto& n : ps.names_) {
    for (unsigned char c : n) {
      if (ps.byte_class_[c] == 0) ps.byte_class_[c] = next_class++;
    }
  }
  ps.classes_ = next_class;
  const std::size_t k = ps.classes_;

  // Trie.
  std::vector<std::vector<std::uint32_t>> own_outputs(1);
  ps.delta_.assign(k, kNoState);
  for (std::uint32_t id = 0; id < ps.names_.size(); ++id) {
    const auto& n = ps.names_[id];
    ps.lengths_.push_back(static_cast<std::uint32_t>(n.size()));
    std::uint32_t s = 0;
    for (unsigned char c : n) {
      std::uint32_t& t = ps.delta_[s * k + ps.byte_class_[c]];
      if (t == kNoState) {
        t = static_cast<std::uint32_t>(own_outputs.size());
        own_outputs.emplace_back();
        ps.delta_.resize(ps.delta_.size() + k, kNoState);
      }
      s = ps.delta_[s * k + ps.byte_class_[c]];
    }
    own_outputs[s].push_back(id);
  }
  ps.state_count_ = own_outputs.size();

  // Failure links in BFS order; missing transitions are filled from the
  // failure state, which is shallower and therefore already complete.
  std::vector<std::uint32_t> fail(ps.state_count_, 0);
  std::vector<std::vector<std::uint32_t>> outputs(ps.state_count_);
  std::deque<std::uint32_t> queue;
  for (std::size_t a = 0; a < k; ++a) {
    std::uint32_t& t = ps.delta_[a];
    if (t == kNoState) {
      t = 0;
    } else {
      fail[t] = 0;
      outputs[t] = own_outputs[t];
      queue.push_back(t);
    }
  }
  while (!queue.empty()) {
    const std::uint32_t s = queue.front();
    queue.pop_front();
    for (std::size_t a = 0; a < k; ++a) {
      std::uint32_t& t = ps.delta_[s * k + a];
      const std::uint32_t via_fail = ps.delta_[fail[s] * k + a];
      if (t == kNoState) {
        t = via_fail;
      } else {
        fail[t] = via_fail;
        outputs[t] = own_outputs[t];
        outputs[t].insert(outputs[t].end(), outputs[via_fail].begin(), outputs[via_fail].end());
        queue.push_back(t);
      }
    }
  }

  ps.out_begin_.reserve(ps.state_count_ + 1);
  ps.out_begin_.push_back(0);
  for (const auto& o : outputs) {
    ps.out_ids_.insert(ps.out_ids_.end(), o.begin(), o.end());
    ps.out_begin_.push_back(static_cast<std::uint32_t>(ps.out_ids_.size()));
  }
  return ps;
}

void PatternSet::scan(std::string_view text, bool boundary,
                      std::vector<std::uint64_t>& counts) const {
  if (counts.size() != names_.size()) counts.assign(names_.size(), 0);
  const auto* bytes = reinterpret_cast<const unsigned char*>(text.data());
  const std::size_t n = text.size();
  const std::uint32_t* delta = delta_.data();
  const std::uint16_t* cls = byte_class_.data();
  const std::size_t k = classes_;

  // End (exclusive) of the last counted occurrence per pattern.
  std::vector<std::size_t> last_end;
  std::uint32_t s = 0;
  for (std::size_t i = 0; i < n; ++i) {
    s = delta[s * k + cls[bytes[i]]];
    const std::uint32_t b = out_begin_[s];
    const std::uint32_t e = out_begin_[s + 1];
    if (b == e) continue;
    if (last_end.empty()) last_end.assign(names_.size(), 0);
    const std::size_t end = i + 1;
    for (std::uint32_t o = b; o < e; ++o) {
      const std::uint32_t id = out_ids_[o];
      const std::size_t start = end - lengths_[id];
      if (start < last_end[id]) continue;
      if (boundary) {
        if (start > 0 && is_ascii_alnum(bytes[start - 1])) continue;
        if (end < n && is_ascii_alnum(bytes[end])) continue;
      }
      ++counts[id];
      last_end[id] = end;
    }
  }
}

std::vector<std::uint64_t> count_document(const PatternSet& patterns, std::string_view text,
                                          bool boundary) {
  std::vector<std::uint64_t> counts(patterns.size(), 0);
  patterns.scan(text, boundary, counts);
  return counts;
}

CountTable CountTable::empty_for(const PatternSet& patterns, std::string corpus_id) {
  CountTable t;
  t.names = patterns.names();
  t.counts.assign(patterns.size(), 0);
  t.corpus_id = std::move(corpus_id);
  return t;
}

std::uint64_t CountTable::total_matches() const {
  std::uint64_t total = 0;
  for (auto c : counts) total += c;
  return total;
}

double CountTable::covered_fraction() const {
  if (counts.empty()) return 0.0;
  const auto covered = std::count_if(counts.begin(), counts.end(), [](auto c) { return c > 0; });
  return static_cast<double>(covered) / static_cast<double>(counts.size());
}

std::optional<std::uint64_t> CountTable::count_for(std::string_view name) const {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return counts[i];
  }
  return std::nullopt;
}

CountTable merge_counts(const CountTable& a, const CountTable& b) {
  if (a.names != b.names) {
    throw ValidationError("cannot merge count tables over different pattern lists");
  }
  CountTable out = a;
  for (std::size_t i = 0; i < out.counts.size(); ++i) out.counts[i] += b.counts[i];
  out.docs_scanned += b.docs_scanned;
  out.docs_skipped += b.docs_skipped;
  out.bytes_scanned += b.bytes_scanned;
  if (out.corpus_id.empty()) {
    out.corpus_id = b.corpus_id;
  } else if (!b.corpus_id.empty() && b.corpus_id != a.corpus_id) {
    out.corpus_id += "+" + b.corpus_id;
  }
  return out;
}

std::vector<std::filesystem::path> list_shards(const std::filesystem::path& dir, bool plain) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) {
    throw IoError("corpus directory not found: " + dir.string());
  }
  std::vector<fs::path> shards;
  for (fs::recursive_directory_iterator it(dir, ec), end; it != end; it.increment(ec)) {
    if (ec) break;
    if (!it->is_regular_file()) continue;
    const std::string name = it->path().filename().string();
    const auto ends_with = [&](std::string_view suffix) {
      return name.size() >= suffix.size() &&
             name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0;
    };
    if (plain || ends_with(".jsonl") || ends_with(".jsonl.gz")) {
      shards.push_back(it->path());
    }
  }
  if (ec) {
    throw IoError("cannot list corpus directory " + dir.string() + ": " + ec.message());
  }
  std::sort(shards.begin(), shards.end());
  return shards;
}

namespace {

class GzReader {
 public:
  explicit GzReader(const std::filesystem::path& path) : path_(path) {
    file_ = gzopen(path.string().c_str(), "rb");
    if (!file_) {
      throw IoError("cannot open corpus shard " + path.string());
    }
    gzbuffer(file_, 1 << 20);
  }
  GzReader(const GzReader&) = delete;
  GzReader& operator=(const GzReader&) = delete;
  ~GzReader() { gzclose(file_); }

  // Appends up to max bytes; returns the number read, 0 at end of file.
  std::size_t read_into(std::string& buf, std::size_t max) {
    const std::size_t old = buf.size();
    buf.resize(old + max);
    const int got = gzread(file_, buf.data() + old, static_cast<unsigned>(max));
    if (got < 0) {
      int errnum = 0;
      const char* msg = gzerror(file_, &errnum);
      throw IoError("read failed on corpus shard " + path_.string() + ": " + msg);
    }
    buf.resize(old + static_cast<std::size_t>(got));
    return static_cast<std::size_t>(got);
  }

 private:
  std::filesystem::path path_;
  gzFile file_ = nullptr;
};

void count_jsonl_line(const PatternSet& patterns, std::string_view line,
                      const CountOptions& options, CountTable& table) {
  if (line.find_first_not_of(" \t\r") == std::string_view::npos) return;
  const auto doc = nlohmann::json::parse(line, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) {
    ++table.docs_skipped;
    return;
  }
  const auto it = doc.find(options.field);
  if (it == doc.end() || !it->is_string()) {
    ++table.docs_skipped;
    return;
  }
  const auto& text = it->get_ref<const std::string&>();
  patterns.scan(text, options.boundary, table.counts);
  ++table.docs_scanned;
  table.bytes_scanned += text.size();
}

}  // namespace

CountTable count_shard(const PatternSet& patterns, const std::filesystem::path& shard,
                       const CountOptions& options) {
  CountTable table = CountTable::empty_for(patterns, shard.filename().string());
  GzReader reader(shard);
  constexpr std::size_t kChunk = 1 << 20;
  std::string buf;

  if (options.plain) {
    while (reader.read_into(buf, kChunk) > 0) {
    }
    patterns.scan(buf, options.boundary, table.counts);
    ++table.docs_scanned;
    table.bytes_scanned += buf.size();
    return table;
  }

  std::size_t consumed = 0;
  for (;;) {
    const std::size_t got = reader.read_into(buf, kChunk);
    std::size_t nl;
    while ((nl = buf.find('\n', consumed)) != std::string::npos) {
      count_jsonl_line(patterns, std::string_view(buf).substr(consumed, nl - consumed), options,
                       table);
      consumed = nl + 1;
    }
    if (got == 0) break;
    buf.erase(0, consumed);
    consumed = 0;
  }
  if (consumed < buf.size()) {
    count_jsonl_line(patterns, std::string_view(buf).substr(consumed), options, table);
  }
  return table;
}

CountTable count_corpus(const PatternSet& patterns, const std::filesystem::path& dir,
                        const CountOptions& options) {
  const auto shards = list_shards(dir, options.plain);
  std::vector<CountTable> partial(shards.size());
  std::vector<std::exception_ptr> failures(shards.size());
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    for (std::size_t i = next++; i < shards.size(); i = next++) {
      try {
        partial[i] = count_shard(patterns, shards[i], options);
      } catch (...) {
        failures[i] = std::current_exception();
      }
    }
  };

  const std::size_t n_workers = std::clamp<std::size_t>(options.workers, 1, std::max<std::size_t>(shards.size(), 1));
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(n_workers);
    for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
  }
  for (const auto& f : failures) {
    if (f) std::rethrow_exception(f);
  }

  CountTable total = CountTable::empty_for(patterns);
  for (auto& p : partial) {
    p.corpus_id.clear();
    total = merge_counts(total, p);
  }
  total.corpus_id = dir.string();
  return total;
}

std::string counts_to_csv(const CountTable& table) {
  std::string out = "country,count\n";
  for (std::size_t i = 0; i < table.names.size(); ++i) {
    out += csv_escape(table.names[i]);
    out += ',';
    out += std::to_string(table.counts[i]);
    out += '\n';
  }
  return out;
}

std::string counts_summary_json(const CountTable& table) {
  nlohmann::ordered_json j;
  j["corpus_id"] = table.corpus_id;
  j["docs_scanned"] = table.docs_scanned;
  j["docs_skipped"] = table.docs_skipped;
  j["bytes_scanned"] = table.bytes_scanned;
  j["total_matches"] = table.total_matches();
  j["patterns"] = table.names.size();
  j["countries_covered_fraction"] = table.covered_fraction();
  return j.dump(2) + "\n";
}

CountTable counts_from_csv(std::string_view text) {
  CountTable table;
  bool header = true;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const std::size_t nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (header) {
      if (fields.size() < 2 || fields[0] != "country" || fields[1] != "count") {
        throw ValidationError("counts file must start with header 'country,count'");
      }
      header = false;
      continue;
    }
    if (fields.size() < 2) {
      throw ValidationError("counts file line " + std::to_string(line_no) + ": expected 2 fields");
    }
    table.names.push_back(fields[0]);
    table.counts.push_back(parse_u64(fields[1], "count on line " + std::to_string(line_no)));
  }
  if (header) {
    throw ValidationError("counts file is empty");
  }
  return table;
}

}  // namespace geoprobe
