#include <doctest.h>

#include <functional>
#include <map>
#include <sstream>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

#include "geoprobe/csv.hpp"
#include "geoprobe/error.hpp"
#include "geoprobe/metrics.hpp"
#include "geoprobe/probe.hpp"
#include "geoprobe/svg.hpp"
#include "geoprobe/synth.hpp"

using namespace geoprobe;
namespace pt = boost::property_tree;

namespace {

struct Element {
  std::string tag;
  std::map<std::string, std::string> attrs;
};

// Parses the document with an XML parser and lists every element.
std::vector<Element> parse_svg(const std::string& svg) {
  std::istringstream in(svg);
  pt::ptree tree;
  pt::read_xml(in, tree);
  std::vector<Element> out;
  std::function<void(const std::string&, const pt::ptree&)> walk = [&](const std::string& tag,
                                                                       const pt::ptree& node) {
    if (tag == "<xmlattr>" || tag == "<xmlcomment>") return;
    Element e{tag, {}};
    if (const auto attrs = node.get_child_optional("<xmlattr>")) {
      for (const auto& [k, v] : *attrs) e.attrs[k] = v.data();
    }
    out.push_back(e);
    for (const auto& [child_tag, child] : node) walk(child_tag, child);
  };
  for (const auto& [tag, node] : tree) walk(tag, node);
  return out;
}

std::vector<Element> with_class(const std::vector<Element>& els, const std::string& cls) {
  std::vector<Element> out;
  for (const auto& e : els) {
    const auto it = e.attrs.find("class");
    if (it != e.attrs.end() && it->second == cls) out.push_back(e);
  }
  return out;
}

Dataset one_location(double lat, double lon, std::string continent) {
  Dataset d;
  LocationRecord r;
  r.name = "p";
  r.country = "c";
  r.continent = std::move(continent);
  r.latitude = lat;
  r.longitude = lon;
  d.records.push_back(r);
  return d;
}

EvalReport one_prediction(double lat, double lon) {
  EvalReport r;
  r.model_id = "m";
  r.r2_mean = 55.5;
  LocationError e;
  e.predicted_lat = lat;
  e.predicted_lon = lon;
  e.squared_error = 4.0;
  r.per_location.push_back(e);
  return r;
}

double probe_r2(const SynthData& data, double lambda) {
  const SplitIndices split = make_split(data.locations.size(), 0.2, 42);
  const RidgeProbe p =
      fit_probe(data.embeddings, data.locations, split, LambdaPolicy{lambda, {}, 5, 42}).probe;
  return evaluate(p, data.embeddings, data.locations, split).r2_mean;
}

}  // namespace

TEST_CASE("scatter map: a prediction at (0,0) sits at the canvas centre") {
  const std::string svg = emit_scatter_map(one_prediction(0.0, 0.0), one_location(5, 5, "Asia"));
  const auto els = parse_svg(svg);
  const auto dots = with_class(els, "dot");
  REQUIRE(dots.size() == 1);
  CHECK(dots[0].tag == "circle");
  CHECK(dots[0].attrs.at("cx") == "360.00");
  CHECK(dots[0].attrs.at("cy") == "180.00");
  CHECK(dots[0].attrs.at("fill") == std::string(continent_color("Asia")));
  CHECK(svg.find("55.50") != std::string::npos);

  const auto corner = with_class(parse_svg(emit_scatter_map(one_prediction(90, -180),
                                                            one_location(0, 0, "Europe"))),
                                 "dot");
  CHECK(corner[0].attrs.at("cx") == "0.00");
  CHECK(corner[0].attrs.at("cy") == "0.00");
}

TEST_CASE("scatter map: 100 synthetic points give 100 dots and stable bytes") {
  SynthConfig cfg;
  cfg.n = 500;
  cfg.d = 8;
  cfg.sigma = 0.3;
  cfg.seed = 3;
  const SynthData data = gen_synthetic(cfg);
  const SplitIndices split = make_split(cfg.n, 0.2, 1);
  const RidgeProbe p = fit_probe(data.embeddings, data.locations, split, LambdaPolicy{1.0, {}, 5, 42}).probe;
  const EvalReport report = evaluate(p, data.embeddings, data.locations, split);
  REQUIRE(report.per_location.size() == 100);
  const std::string svg = emit_scatter_map(report, data.locations);
  CHECK(with_class(parse_svg(svg), "dot").size() == 100);
  CHECK(emit_scatter_map(report, data.locations) == svg);

  CHECK_THROWS_AS(emit_scatter_map(EvalReport{}, data.locations), ValidationError);
  EvalReport bad = one_prediction(0, 0);
  bad.per_location[0].row_index = 10000;
  CHECK_THROWS_AS(emit_scatter_map(bad, data.locations), ValidationError);
}

TEST_CASE("continent colours") {
  CHECK(continent_color("Europe") != continent_color("Asia"));
  CHECK(continent_color("Atlantis") == "#808080");
  CHECK(diverging_color(0.0) == "#2166ac");
  CHECK(diverging_color(0.5) == "#f7f7f7");
  CHECK(diverging_color(1.0) == "#b2182b");
  CHECK(diverging_color(7.0) == "#b2182b");
}

TEST_CASE("heatmap SVG") {
  HeatmapGrid grid;
  grid.cell_degrees = 10.0;
  grid.lat_bands = 18;
  grid.lon_bands = 36;
  grid.cells[{9, 18}] = {3, 1.5};
  grid.lat_profile[9] = {3, 1.5};
  grid.lon_profile[18] = {3, 1.5};
  const auto els = parse_svg(emit_heatmap_svg(grid));
  const auto cells = with_class(els, "cell");
  REQUIRE(cells.size() == 1);
  CHECK(cells[0].attrs.at("x") == "360.00");
  CHECK(cells[0].attrs.at("y") == "160.00");
  CHECK(cells[0].attrs.at("width") == "20.00");
  CHECK(cells[0].attrs.at("height") == "20.00");
  CHECK(with_class(els, "lat-band").size() == 1);
  CHECK(with_class(els, "lon-band").size() == 1);

  grid.cells[{0, 0}] = {1, 1.5};
  grid.cells[{17, 35}] = {2, -3.0};
  grid.cells[{4, 4}] = {2, 4.0};
  const auto many = with_class(parse_svg(emit_heatmap_svg(grid)), "cell");
  REQUIRE(many.size() == 4);
  std::map<std::pair<std::string, std::string>, std::string> fill;
  for (const auto& c : many) fill[{c.attrs.at("x"), c.attrs.at("y")}] = c.attrs.at("fill");
  // Equal values share a colour; the extremes hit the scale endpoints.
  CHECK(fill.at({"360.00", "160.00"}) == fill.at({"0.00", "340.00"}));
  CHECK(fill.at({"80.00", "260.00"}) == "#b2182b");
  CHECK(fill.at({"700.00", "0.00"}) == "#2166ac");

  CHECK_THROWS_AS(emit_heatmap_svg(HeatmapGrid{}), ValidationError);
}

TEST_CASE("gen_synthetic shape, determinism and errors") {
  SynthConfig cfg;
  cfg.n = 300;
  cfg.d = 6;
  cfg.sigma = 0.5;
  cfg.seed = 9;
  const SynthData a = gen_synthetic(cfg);
  const SynthData b = gen_synthetic(cfg);
  CHECK(a.locations.size() == 300);
  CHECK(a.embeddings.rows == 300);
  CHECK(a.embeddings.cols == 6);
  CHECK(a.locations_csv == b.locations_csv);
  CHECK(encode_embeddings(a.embeddings) == encode_embeddings(b.embeddings));
  CHECK(a.embeddings.locations_digest == fnv1a64(a.locations_csv));
  CHECK_NOTHROW(check_alignment(a.embeddings, parse_locations(a.locations_csv)));

  std::size_t with_pop = 0;
  for (const auto& r : a.locations.records) {
    CHECK(r.latitude >= -90.0);
    CHECK(r.latitude <= 90.0);
    CHECK(r.longitude >= -180.0);
    CHECK(r.longitude <= 180.0);
    CHECK(r.country.rfind("Land ", 0) == 0);
    if (r.population) ++with_pop;
  }
  CHECK(with_pop > 240);
  CHECK(with_pop < 300);

  cfg.seed = 10;
  CHECK(gen_synthetic(cfg).locations_csv != a.locations_csv);

  SynthConfig bad = cfg;
  bad.n = 2;
  CHECK_THROWS_AS(gen_synthetic(bad), ValidationError);
  bad = cfg;
  bad.d = 1;
  CHECK_THROWS_AS(gen_synthetic(bad), ValidationError);
  bad = cfg;
  bad.sigma = -1.0;
  CHECK_THROWS_AS(gen_synthetic(bad), ValidationError);
  CHECK_THROWS_AS(parse_skew_profile("north"), ValidationError);
  CHECK(parse_skew_profile("south") == SkewProfile::South);
}

TEST_CASE("analytic R2 for the synthetic generator") {
  CHECK(expected_r2_percent(0.0) == 100.0);
  CHECK(expected_r2_percent(1.0) == doctest::Approx(50.0));
  CHECK(sigma_for_r2_percent(75.0) == doctest::Approx(std::sqrt(1.0 / 3.0)));
  CHECK(expected_r2_percent(sigma_for_r2_percent(75.0)) == doctest::Approx(75.0));

  SynthConfig cfg;
  cfg.n = 2000;
  cfg.d = 16;
  cfg.sigma = 0.0;
  cfg.seed = 4;
  CHECK(probe_r2(gen_synthetic(cfg), 1e-6) > 99.9);

  cfg.sigma = sigma_for_r2_percent(75.0);
  const double r2 = probe_r2(gen_synthetic(cfg), 1.0);
  CHECK(r2 > 70.0);
  CHECK(r2 < 80.0);
}

TEST_CASE("synthetic continents come from coarse boxes") {
  CHECK(synthetic_continent(48.0, 2.0) == "Europe");
  CHECK(synthetic_continent(-82.0, 10.0) == "Antarctica");
  CHECK(synthetic_continent(40.0, -100.0) == "North America");
  CHECK(synthetic_continent(-15.0, -60.0) == "South America");
}
