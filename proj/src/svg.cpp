#include "geoprobe/svg.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>

#include "geoprobe/error.hpp"

namespace geoprobe {

namespace {

constexpr double kPxPerDegree = 2.0;
constexpr double kMapWidth = 360.0 * kPxPerDegree;
constexpr double kMapHeight = 180.0 * kPxPerDegree;

struct Rgb {
  double r, g, b;
};
constexpr Rgb kLow{33, 102, 172};
constexpr Rgb kMid{247, 247, 247};
constexpr Rgb kHigh{178, 24, 43};

std::string fmt(double v) {
  std::array<char, 32> buf{};
  std::snprintf(buf.data(), buf.size(), "%.2f", v);
  std::string s = buf.data();
  if (s == "-0.00") s = "0.00";
  return s;
}

std::string xml_escape(std::string_view text) {
  std::string out;
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

std::string hex_color(const Rgb& c) {
  std::array<char, 8> buf{};
  std::snprintf(buf.data(), buf.size(), "#%02x%02x%02x",
                static_cast<int>(std::lround(c.r)), static_cast<int>(std::lround(c.g)),
                static_cast<int>(std::lround(c.b)));
  return buf.data();
}

Rgb lerp(const Rgb& a, const Rgb& b, double t) {
  return {a.r + (b.r - a.r) * t, a.g + (b.g - a.g) * t, a.b + (b.b - a.b) * t};
}

}  // namespace

std::string_view continent_color(std::string_view continent) {
  static const std::map<std::string_view, std::string_view> kPalette = {
      {"Africa", "#e6194b"},        {"Antarctica", "#42d4f4"}, {"Asia", "#f58231"},
      {"Europe", "#4363d8"},        {"North America", "#3cb44b"},
      {"Oceania", "#911eb4"},       {"South America", "#d4a017"},
  };
  const auto it = kPalette.find(continent);
  return it == kPalette.end() ? std::string_view{"#808080"} : it->second;
}

std::string diverging_color(double t) {
  t = std::clamp(t, 0.0, 1.0);
  if (t <= 0.5) return hex_color(lerp(kLow, kMid, t * 2.0));
  return hex_color(lerp(kMid, kHigh, (t - 0.5) * 2.0));
}

std::string emit_scatter_map(const EvalReport& report, const Dataset& locations) {
  if (report.per_location.empty()) {
    throw ValidationError("cannot draw a map from an empty report");
  }
  std::string out;
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt(kMapWidth) + "\" height=\"" +
         fmt(kMapHeight) + "\" viewBox=\"0 0 " + fmt(kMapWidth) + " " + fmt(kMapHeight) +
         "\">\n";
  const std::string title = report.model_id + " layer " + std::to_string(report.layer) +
                            " (R\xC2\xB2 = " + fmt(report.r2_mean) + ")";
  out += "<title>" + xml_escape(title) + "</title>\n";
  out += "<rect class=\"background\" x=\"0\" y=\"0\" width=\"" + fmt(kMapWidth) + "\" height=\"" +
         fmt(kMapHeight) + "\" fill=\"#ffffff\" stroke=\"#cccccc\"/>\n";
  out += "<line class=\"equator\" x1=\"0\" y1=\"" + fmt(kMapHeight / 2) + "\" x2=\"" +
         fmt(kMapWidth) + "\" y2=\"" + fmt(kMapHeight / 2) + "\" stroke=\"#dddddd\"/>\n";
  out += "<line class=\"meridian\" x1=\"" + fmt(kMapWidth / 2) + "\" y1=\"0\" x2=\"" +
         fmt(kMapWidth / 2) + "\" y2=\"" + fmt(kMapHeight) + "\" stroke=\"#dddddd\"/>\n";

  std::set<std::string> continents;
  out += "<g class=\"dots\">\n";
  for (const auto& e : report.per_location) {
    if (e.row_index >= locations.size()) {
      throw ValidationError("report row " + std::to_string(e.row_index) +
                            " is not in the locations file");
    }
    const auto& continent = locations.records[e.row_index].continent;
    continents.insert(continent);
    const double x = (e.predicted_lon + 180.0) * kPxPerDegree;
    const double y = (90.0 - e.predicted_lat) * kPxPerDegree;
    out += "<circle class=\"dot\" cx=\"" + fmt(x) + "\" cy=\"" + fmt(y) + "\" r=\"1.50\" fill=\"" +
           std::string(continent_color(continent)) + "\"/>\n";
  }
  out += "</g>\n";

  out += "<text class=\"title\" x=\"8.00\" y=\"16.00\" font-family=\"sans-serif\" "
         "font-size=\"13\">" + xml_escape(title) + "</text>\n";
  out += "<g class=\"legend\" font-family=\"sans-serif\" font-size=\"10\">\n";
  double y = kMapHeight - 8.0 - 12.0 * static_cast<double>(continents.size() - 1);
  for (const auto& c : continents) {
    out += "<rect class=\"swatch\" x=\"8.00\" y=\"" + fmt(y - 7.0) +
           "\" width=\"8.00\" height=\"8.00\" fill=\"" + std::string(continent_color(c)) +
           "\"/>\n";
    out += "<text x=\"20.00\" y=\"" + fmt(y) + "\">" + xml_escape(c.empty() ? "(none)" : c) +
           "</text>\n";
    y += 12.0;
  }
  out += "</g>\n</svg>\n";
  return out;
}

std::string emit_heatmap_svg(const HeatmapGrid& grid) {
  if (grid.cells.empty()) {
    throw ValidationError("cannot draw an empty heatmap grid");
  }
  double lo = grid.cells.begin()->second.mean_log_mse;
  double hi = lo;
  for (const auto& [key, c] : grid.cells) {
    lo = std::min(lo, c.mean_log_mse);
    hi = std::max(hi, c.mean_log_mse);
  }
  // A flat range maps everything to the top endpoint.
  const auto scale = [&](double v) { return hi > lo ? (v - lo) / (hi - lo) : 1.0; };

  const double cell_px = grid.cell_degrees * kPxPerDegree;
  const double strip = 20.0;
  const double gap = 10.0;
  const double width = kMapWidth + gap + strip;
  const double height = kMapHeight + gap + strip + 24.0;

  std::string out;
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt(width) + "\" height=\"" +
         fmt(height) + "\" viewBox=\"0 0 " + fmt(width) + " " + fmt(height) + "\">\n";
  out += "<title>mean log10 MSE per " + fmt(grid.cell_degrees) + " degree cell</title>\n";
  out += "<rect class=\"background\" x=\"0\" y=\"0\" width=\"" + fmt(kMapWidth) + "\" height=\"" +
         fmt(kMapHeight) + "\" fill=\"#ffffff\" stroke=\"#cccccc\"/>\n";
  out += "<g class=\"cells\">\n";
  for (const auto& [key, c] : grid.cells) {
    const double x = static_cast<double>(key.second) * cell_px;
    const double y = static_cast<double>(grid.lat_bands - 1 - key.first) * cell_px;
    out += "<rect class=\"cell\" x=\"" + fmt(x) + "\" y=\"" + fmt(y) + "\" width=\"" +
           fmt(cell_px) + "\" height=\"" + fmt(cell_px) + "\" fill=\"" +
           diverging_color(scale(c.mean_log_mse)) + "\"><title>n=" + std::to_string(c.n) +
           " mean_log_mse=" + fmt(c.mean_log_mse) + "</title></rect>\n";
  }
  out += "</g>\n<g class=\"lat-profile\">\n";
  for (const auto& [band, c] : grid.lat_profile) {
    const double y = static_cast<double>(grid.lat_bands - 1 - band) * cell_px;
    out += "<rect class=\"lat-band\" x=\"" + fmt(kMapWidth + gap) + "\" y=\"" + fmt(y) +
           "\" width=\"" + fmt(strip) + "\" height=\"" + fmt(cell_px) + "\" fill=\"" +
           diverging_color(scale(c.mean_log_mse)) + "\"/>\n";
  }
  out += "</g>\n<g class=\"lon-profile\">\n";
  for (const auto& [band, c] : grid.lon_profile) {
    const double x = static_cast<double>(band) * cell_px;
    out += "<rect class=\"lon-band\" x=\"" + fmt(x) + "\" y=\"" + fmt(kMapHeight + gap) +
           "\" width=\"" + fmt(cell_px) + "\" height=\"" + fmt(strip) + "\" fill=\"" +
           diverging_color(scale(c.mean_log_mse)) + "\"/>\n";
  }
  out += "</g>\n";
  const double label_y = kMapHeight + gap + strip + 16.0;
  out += "<g class=\"scale\" font-family=\"sans-serif\" font-size=\"10\">\n";
  out += "<rect x=\"0.00\" y=\"" + fmt(label_y - 8.0) + "\" width=\"8.00\" height=\"8.00\" fill=\"" +
         diverging_color(0.0) + "\"/>\n";
  out += "<text x=\"12.00\" y=\"" + fmt(label_y) + "\">" + fmt(lo) + "</text>\n";
  out += "<rect x=\"80.00\" y=\"" + fmt(label_y - 8.0) +
         "\" width=\"8.00\" height=\"8.00\" fill=\"" + diverging_color(1.0) + "\"/>\n";
  out += "<text x=\"92.00\" y=\"" + fmt(label_y) + "\">" + fmt(hi) + "</text>\n";
  out += "</g>\n</svg>\n";
  return out;
}

}  // namespace geoprobe
