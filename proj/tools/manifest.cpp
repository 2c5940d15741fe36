#include "manifest.hpp"

#include <chrono>
#include <ctime>

#include <json.hpp>

#include "geoprobe/csv.hpp"

namespace geoprobe::cli {

namespace {

std::string utc_now() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string input_digest(const std::filesystem::path& path) {
  if (std::filesystem::is_directory(path)) return "directory";
  return digest_hex(fnv1a64(read_file(path)));
}

}  // namespace

std::string RunManifest::to_json() const {
  nlohmann::ordered_json j;
  j["subcommand"] = subcommand;
  nlohmann::ordered_json in = nlohmann::ordered_json::object();
  for (const auto& [flag, path] : inputs) {
    in[flag] = {{"path", path.string()}, {"fnv1a64", input_digest(path)}};
  }
  j["inputs"] = std::move(in);
  j["seed"] = seed ? nlohmann::ordered_json(*seed) : nlohmann::ordered_json();
  j["lambda_policy"] = lambda_policy.empty() ? nlohmann::ordered_json() : nlohmann::ordered_json(lambda_policy);
  nlohmann::ordered_json params = nlohmann::ordered_json::object();
  for (const auto& [k, v] : parameters) params[k] = v;
  j["parameters"] = std::move(params);
  j["tool_version"] = kToolVersion;
  j["wall_clock"] = utc_now();
  return j.dump(2) + "\n";
}

void RunManifest::write_beside(const std::filesystem::path& output) const {
  write_file(output.string() + ".manifest.json", to_json());
}

}  // namespace geoprobe::cli
