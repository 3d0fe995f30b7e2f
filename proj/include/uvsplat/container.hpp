#pragma once

#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "uvsplat/gaussian_model.hpp"
#include "uvsplat/image.hpp"
#include "uvsplat/uv_raster.hpp"

namespace uvsplat {

// On-disk map bundle: a directory with manifest.json plus, per map, a JSON
// header and a raw little-endian float32 buffer. Round-trips bit-exactly.
struct MapContainer {
  std::string format_version = "1";
  double offset_step = 0.0;
  int scaffold_count = 0;
  std::vector<std::string> order;  // map names, manifest order
  std::map<std::string, ImageF> maps;
  std::map<std::string, std::string> semantics;
  nlohmann::json meta = nlohmann::json::object();

  void add(const std::string& name, ImageF map, const std::string& sem);
  bool has(const std::string& name) const { return maps.count(name) != 0; }
  const ImageF& get(const std::string& name) const;

  void save(const std::string& dir) const;
  static MapContainer load(const std::string& dir);
};

// ---- conversions between containers and in-memory structures ----

MapContainer geometry_to_container(const UvGeometryMaps& geo);
UvGeometryMaps geometry_from_container(const MapContainer& c);

// Adds per-level color and observed maps (from aggregation) to a container.
void add_color_maps(MapContainer& c, const std::vector<AggregatedColorMap>& colors);

MapContainer param_maps_to_container(const ParamMapSet& maps);
ParamMapSet param_maps_from_container(const MapContainer& c);

}  // namespace uvsplat
