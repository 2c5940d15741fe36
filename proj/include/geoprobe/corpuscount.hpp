#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace geoprobe {

// Compiled multi-pattern matcher (Aho-Corasick, fully determinized over a
// reduced byte alphabet). Immutable after construction; share freely across
// threads.
class PatternSet {
 public:
  // Throws ValidationError on an empty list, an empty name or a duplicate.
  static PatternSet build(std::vector<std::string> names);

  std::size_t size() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }
  std::size_t state_count() const { return state_count_; }

  // Adds the occurrences in text to counts (indexed like names()).
  // With boundary checking, an occurrence only counts when the bytes just
  // before and after it are absent or not ASCII letters/digits. Occurrences
  // of different patterns are independent; occurrences of the same pattern
  // are taken leftmost first and never overlap.
  void scan(std::string_view text, bool boundary, std::vector<std::uint64_t>& counts) const;

 private:
  std::vector<std::string> names_;
  std::vector<std::uint32_t> lengths_;
  std::size_t state_count_ = 0;
  std::size_t classes_ = 0;
  std::vector<std::uint16_t> byte_class_;   // 256 entries
  std::vector<std::uint32_t> delta_;        // state_count_ x classes_
  std::vector<std::uint32_t> out_begin_;    // state_count_ + 1, CSR offsets
  std::vector<std::uint32_t> out_ids_;
};

inline PatternSet build_patterns(std::vector<std::string> names) {
  return PatternSet::build(std::move(names));
}

std::vector<std::uint64_t> count_document(const PatternSet& patterns, std::string_view text,
                                          bool boundary = true);

struct CountTable {
  std::vector<std::string> names;
  std::vector<std::uint64_t> counts;
  std::uint64_t docs_scanned = 0;
  std::uint64_t docs_skipped = 0;
  std::uint64_t bytes_scanned = 0;
  std::string corpus_id;

  static CountTable empty_for(const PatternSet& patterns, std::string corpus_id = {});

  std::uint64_t total_matches() const;
  double covered_fraction() const;
  std::optional<std::uint64_t> count_for(std::string_view name) const;
};

// Entrywise sum. Throws ValidationError when the pattern lists differ.
CountTable merge_counts(const CountTable& a, const CountTable& b);

struct CountOptions {
  bool plain = false;          // each regular file is one document
  std::string field = "text";  // JSONL field holding the document
  bool boundary = true;
  std::size_t workers = 1;
};

// Files a corpus scan will visit, sorted by path. JSONL mode picks *.jsonl
// and *.jsonl.gz; plain mode picks every regular file.
std::vector<std::filesystem::path> list_shards(const std::filesystem::path& dir, bool plain);

// Counts one shard. gzip input is decompressed transparently.
CountTable count_shard(const PatternSet& patterns, const std::filesystem::path& shard,
                       const CountOptions& options);

// Scans every shard on a pool of workers and reduces in shard order, so the
// result does not depend on the worker count.
CountTable count_corpus(const PatternSet& patterns, const std::filesystem::path& dir,
                        const CountOptions& options);

std::string counts_to_csv(const CountTable& table);
std::string counts_summary_json(const CountTable& table);
CountTable counts_from_csv(std::string_view text);

}  // namespace geoprobe
