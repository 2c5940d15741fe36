#pragma once

#include <string>
#include <string_view>

#include "geoprobe/geodata.hpp"
#include "geoprobe/metrics.hpp"

namespace geoprobe {

// Fixed palette for the seven continents; anything else is grey.
std::string_view continent_color(std::string_view continent);

// Equirectangular scatter of predicted coordinates, one circle per report row,
// coloured by the row's continent. The map spans the whole canvas, so (0, 0)
// lands on its centre.
std::string emit_scatter_map(const EvalReport& report, const Dataset& locations);

// One rectangle per populated cell on a blue-white-red scale spanning the
// cell mean log-MSE range, with latitude and longitude profiles as strips on
// the right and bottom.
std::string emit_heatmap_svg(const HeatmapGrid& grid);

// Colour of value t in [0, 1] on the diverging scale, as #rrggbb.
std::string diverging_color(double t);

}  // namespace geoprobe
