#include <cmath>

#include <json.hpp>

#include "geoprobe/csv.hpp"
#include "geoprobe/error.hpp"
#include "geoprobe/metrics.hpp"

namespace geoprobe {

namespace {

using ojson = nlohmann::ordered_json;

// NaN has no JSON spelling; failed correlations serialize it as null.
ojson number_or_null(double v) { return std::isfinite(v) ? ojson(v) : ojson(); }

std::string csv_number(double v) { return std::isfinite(v) ? format_double(v) : std::string(); }

}  // namespace

std::string report_to_json(const EvalReport& report) {
  ojson j;
  j["model_id"] = report.model_id;
  j["layer"] = report.layer;
  j["n"] = report.per_location.size();
  j["r2_lat"] = report.r2_lat;
  j["r2_lon"] = report.r2_lon;
  j["r2_mean"] = report.r2_mean;
  j["mse_overall"] = report.mse_overall;
  ojson rows = ojson::array();
  for (const auto& e : report.per_location) {
    ojson r;
    r["row_index"] = e.row_index;
    r["predicted_lat"] = e.predicted_lat;
    r["predicted_lon"] = e.predicted_lon;
    r["true_lat"] = e.true_lat;
    r["true_lon"] = e.true_lon;
    r["squared_error"] = e.squared_error;
    rows.push_back(std::move(r));
  }
  j["per_location"] = std::move(rows);
  return j.dump(1) + "\n";
}

std::string report_to_csv(const EvalReport& report) {
  std::string out = "row_index,predicted_lat,predicted_lon,true_lat,true_lon,squared_error\n";
  for (const auto& e : report.per_location) {
    out += std::to_string(e.row_index) + ',' + format_double(e.predicted_lat) + ',' +
           format_double(e.predicted_lon) + ',' + format_double(e.true_lat) + ',' +
           format_double(e.true_lon) + ',' + format_double(e.squared_error) + '\n';
  }
  return out;
}

EvalReport report_from_json(std::string_view text) {
  EvalReport rep;
  try {
    const auto j = nlohmann::json::parse(text);
    rep.model_id = j.at("model_id").get<std::string>();
    rep.layer = j.at("layer").get<std::uint32_t>();
    rep.r2_lat = j.at("r2_lat").get<double>();
    rep.r2_lon = j.at("r2_lon").get<double>();
    rep.r2_mean = j.at("r2_mean").get<double>();
    rep.mse_overall = j.at("mse_overall").get<double>();
    for (const auto& r : j.at("per_location")) {
      LocationError e;
      e.row_index = r.at("row_index").get<std::size_t>();
      e.predicted_lat = r.at("predicted_lat").get<double>();
      e.predicted_lon = r.at("predicted_lon").get<double>();
      e.true_lat = r.at("true_lat").get<double>();
      e.true_lon = r.at("true_lon").get<double>();
      e.squared_error = r.at("squared_error").get<double>();
      if (!(e.squared_error >= 0.0)) {
        throw ValidationError("report row " + std::to_string(e.row_index) +
                              " has a negative squared error");
      }
      rep.per_location.push_back(e);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed report file: ") + e.what());
  }
  return rep;
}

std::string groups_to_json(const std::vector<GroupStats>& groups, GroupBy by, double gini_value) {
  ojson j;
  j["by"] = std::string(to_string(by));
  j["gini_mean_mse"] = number_or_null(gini_value);
  ojson arr = ojson::array();
  for (const auto& g : groups) {
    ojson o;
    o["group"] = g.group_key;
    o["n"] = g.n;
    o["mean_mse"] = g.mean_mse;
    o["mean_log_mse"] = g.mean_log_mse;
    arr.push_back(std::move(o));
  }
  j["groups"] = std::move(arr);
  return j.dump(2) + "\n";
}

std::string groups_to_csv(const std::vector<GroupStats>& groups) {
  std::string out = "group,n,mean_mse,mean_log_mse\n";
  for (const auto& g : groups) {
    out += csv_escape(g.group_key) + ',' + std::to_string(g.n) + ',' + format_double(g.mean_mse) +
           ',' + format_double(g.mean_log_mse) + '\n';
  }
  return out;
}

namespace {

ojson correlation_json(const CorrelationResult& c) {
  ojson o;
  o["covariate"] = c.covariate;
  o["n"] = c.n;
  o["r"] = number_or_null(c.r);
  o["p_value"] = number_or_null(c.p_value);
  o["significant"] = c.significant();
  o["error"] = c.error ? ojson(*c.error) : ojson();
  return o;
}

void append_correlation_rows(std::string& out, std::string_view level,
                             const std::vector<CorrelationResult>& rows) {
  for (const auto& c : rows) {
    out += std::string(level) + ',' + csv_escape(c.covariate) + ',' + std::to_string(c.n) + ',' +
           csv_number(c.r) + ',' + csv_number(c.p_value) + ',' +
           (c.significant() ? "1" : "0") + ',' + csv_escape(c.error.value_or("")) + '\n';
  }
}

}  // namespace

std::string correlations_to_json(const std::vector<CorrelationResult>& location_level,
                                 const std::vector<CorrelationResult>& country_level) {
  ojson j;
  ojson loc = ojson::array();
  for (const auto& c : location_level) loc.push_back(correlation_json(c));
  j["location_level"] = std::move(loc);
  ojson ctry = ojson::array();
  for (const auto& c : country_level) ctry.push_back(correlation_json(c));
  j["country_level"] = std::move(ctry);
  return j.dump(2) + "\n";
}

std::string correlations_to_csv(const std::vector<CorrelationResult>& location_level,
                                const std::vector<CorrelationResult>& country_level) {
  std::string out = "level,covariate,n,r,p_value,significant,error\n";
  append_correlation_rows(out, "location", location_level);
  append_correlation_rows(out, "country", country_level);
  return out;
}

std::string grid_to_json(const HeatmapGrid& grid) {
  ojson j;
  j["cell_degrees"] = grid.cell_degrees;
  j["lat_bands"] = grid.lat_bands;
  j["lon_bands"] = grid.lon_bands;
  ojson cells = ojson::array();
  for (const auto& [key, c] : grid.cells) {
    ojson o;
    o["lat_band"] = key.first;
    o["lon_band"] = key.second;
    o["lat_min"] = -90.0 + static_cast<double>(key.first) * grid.cell_degrees;
    o["lon_min"] = -180.0 + static_cast<double>(key.second) * grid.cell_degrees;
    o["n"] = c.n;
    o["mean_log_mse"] = c.mean_log_mse;
    cells.push_back(std::move(o));
  }
  j["cells"] = std::move(cells);
  const auto profile = [&](const std::map<std::size_t, CellStats>& p, double lower) {
    ojson arr = ojson::array();
    for (const auto& [band, c] : p) {
      ojson o;
      o["band"] = band;
      o["min"] = lower + static_cast<double>(band) * grid.cell_degrees;
      o["n"] = c.n;
      o["mean_log_mse"] = c.mean_log_mse;
      arr.push_back(std::move(o));
    }
    return arr;
  };
  j["lat_profile"] = profile(grid.lat_profile, -90.0);
  j["lon_profile"] = profile(grid.lon_profile, -180.0);
  return j.dump(2) + "\n";
}

std::string grid_to_csv(const HeatmapGrid& grid) {
  std::string out = "lat_band,lon_band,lat_min,lon_min,n,mean_log_mse\n";
  for (const auto& [key, c] : grid.cells) {
    out += std::to_string(key.first) + ',' + std::to_string(key.second) + ',' +
           format_double(-90.0 + static_cast<double>(key.first) * grid.cell_degrees) + ',' +
           format_double(-180.0 + static_cast<double>(key.second) * grid.cell_degrees) + ',' +
           std::to_string(c.n) + ',' + format_double(c.mean_log_mse) + '\n';
  }
  return out;
}

}  // namespace geoprobe
