#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace geoprobe {

// RFC 4180 style: fields may be double-quoted, "" escapes a quote inside.
std::vector<std::string> split_csv_line(std::string_view line);

// Quotes the field only when it contains a comma, quote or newline.
std::string csv_escape(std::string_view field);

// Shortest decimal text that round-trips to the same double.
std::string format_double(double value);

double parse_double(std::string_view text, std::string_view what);
std::uint64_t parse_u64(std::string_view text, std::string_view what);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

// 64-bit FNV-1a over raw bytes. Used as the row-alignment digest.
std::uint64_t fnv1a64(std::string_view bytes);
std::string digest_hex(std::uint64_t digest);

}  // namespace geoprobe
