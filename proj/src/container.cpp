#include "uvsplat/container.hpp"

#include <bit>
#include <filesystem>
#include <fstream>

namespace uvsplat {

static_assert(std::endian::native == std::endian::little,
              "container buffers are little-endian; big-endian hosts need a swap pass");

namespace fs = std::filesystem;

void MapContainer::add(const std::string& name, ImageF map, const std::string& sem) {
  require(!name.empty() && maps.count(name) == 0, ErrorCode::invalid_config,
          "duplicate or empty map name: " + name);
  order.push_back(name);
  semantics[name] = sem;
  maps.emplace(name, std::move(map));
}

const ImageF& MapContainer::get(const std::string& name) const {
  auto it = maps.find(name);
  require(it != maps.end(), ErrorCode::incomplete_maps, "container lacks map: " + name);
  return it->second;
}

void MapContainer::save(const std::string& dir) const {
  std::error_code ec;
  fs::create_directories(fs::path(dir) / "maps", ec);
  require(!ec, ErrorCode::io_error, "cannot create container directory: " + dir);

  for (const auto& name : order) {
    const ImageF& img = maps.at(name);
    nlohmann::json header;
    header["name"] = name;
    header["height"] = img.height;
    header["width"] = img.width;
    header["channels"] = img.channels;
    header["dtype"] = "f32";
    header["byte_order"] = "little";
    header["semantics"] = semantics.at(name);
    {
      std::ofstream hout(fs::path(dir) / "maps" / (name + ".json"));
      require(hout.good(), ErrorCode::io_error, "cannot write map header: " + name);
      hout << header.dump(2) << "\n";
    }
    {
      std::ofstream bout(fs::path(dir) / "maps" / (name + ".bin"), std::ios::binary);
      require(bout.good(), ErrorCode::io_error, "cannot write map buffer: " + name);
      bout.write(reinterpret_cast<const char*>(img.data.data()),
                 std::streamsize(img.data.size() * sizeof(float)));
      require(bout.good(), ErrorCode::io_error, "short write for map: " + name);
    }
  }

  nlohmann::json manifest;
  manifest["format_version"] = format_version;
  manifest["offset_step"] = offset_step;
  manifest["scaffold_count"] = scaffold_count;
  manifest["uv_mask"] = "uv_mask";
  manifest["maps"] = order;
  manifest["meta"] = meta;
  std::ofstream mout(fs::path(dir) / "manifest.json");
  require(mout.good(), ErrorCode::io_error, "cannot write manifest in " + dir);
  mout << manifest.dump(2) << "\n";
}

MapContainer MapContainer::load(const std::string& dir) {
  std::ifstream min(fs::path(dir) / "manifest.json");
  require(min.good(), ErrorCode::missing_input, "cannot open container manifest in " + dir);
  nlohmann::json manifest;
  try {
    min >> manifest;
  } catch (const std::exception& e) {
    fail(ErrorCode::parse_error, std::string("manifest parse error: ") + e.what());
  }

  MapContainer c;
  try {
    c.format_version = manifest.at("format_version").get<std::string>();
    require(c.format_version == "1", ErrorCode::parse_error,
            "unsupported container format version: " + c.format_version);
    c.offset_step = manifest.at("offset_step").get<double>();
    c.scaffold_count = manifest.at("scaffold_count").get<int>();
    c.meta = manifest.value("meta", nlohmann::json::object());
    const auto names = manifest.at("maps").get<std::vector<std::string>>();
    for (const auto& name : names) {
      std::ifstream hin(fs::path(dir) / "maps" / (name + ".json"));
      require(hin.good(), ErrorCode::missing_input, "missing map header: " + name);
      nlohmann::json header;
      hin >> header;
      require(header.at("dtype").get<std::string>() == "f32", ErrorCode::parse_error,
              "map " + name + ": only f32 buffers are supported");
      require(header.at("byte_order").get<std::string>() == "little", ErrorCode::parse_error,
              "map " + name + ": only little-endian buffers are supported");
      ImageF img(header.at("height").get<int>(), header.at("width").get<int>(),
                 header.at("channels").get<int>());

      std::ifstream bin(fs::path(dir) / "maps" / (name + ".bin"),
                        std::ios::binary | std::ios::ate);
      require(bin.good(), ErrorCode::missing_input, "missing map buffer: " + name);
      const auto bytes = size_t(bin.tellg());
      require(bytes == img.data.size() * sizeof(float), ErrorCode::parse_error,
              "map " + name + ": buffer size does not match header dimensions");
      bin.seekg(0);
      bin.read(reinterpret_cast<char*>(img.data.data()), std::streamsize(bytes));
      require(bin.good(), ErrorCode::io_error, "short read for map: " + name);
      c.add(name, std::move(img), header.at("semantics").get<std::string>());
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::parse_error, std::string("container field error: ") + e.what());
  }
  require(c.has("uv_mask"), ErrorCode::incomplete_maps, "container lacks uv_mask");
  return c;
}

// ---- conversions ----

namespace {

std::string level_name(const char* base, int level) {
  return std::string(base) + "_" + std::to_string(level);
}

}  // namespace

MapContainer geometry_to_container(const UvGeometryMaps& geo) {
  MapContainer c;
  c.offset_step = geo.offset_step;
  c.scaffold_count = geo.scaffold_count;
  c.add("uv_mask", geo.uv_mask, "uv foreground mask");
  c.add("normal", geo.normal_map, "interpolated unit normals, level 0");
  for (int i = 0; i <= geo.scaffold_count; ++i)
    c.add(level_name("position", i), geo.position_maps[i], "scaffold positions, meters");
  for (int i = 0; i < geo.scaffold_count; ++i)
    c.add(level_name("offset", i + 1), geo.offset_maps[i], "scaffold offset, meters");
  return c;
}

UvGeometryMaps geometry_from_container(const MapContainer& c) {
  UvGeometryMaps geo;
  geo.scaffold_count = c.scaffold_count;
  geo.offset_step = c.offset_step;
  geo.uv_mask = c.get("uv_mask");
  geo.normal_map = c.get("normal");
  for (int i = 0; i <= c.scaffold_count; ++i)
    geo.position_maps.push_back(c.get(level_name("position", i)));
  for (int i = 0; i < c.scaffold_count; ++i)
    geo.offset_maps.push_back(c.get(level_name("offset", i + 1)));
  for (int r = 0; r < geo.uv_mask.height; ++r)
    for (int col = 0; col < geo.uv_mask.width; ++col)
      if (geo.uv_mask.at(r, col) != 0.0f) geo.foreground.emplace_back(r, col);
  return geo;
}

void add_color_maps(MapContainer& c, const std::vector<AggregatedColorMap>& colors) {
  nlohmann::json unobserved = nlohmann::json::array();
  for (const auto& cm : colors) {
    c.add(level_name("color", cm.level), cm.color, "aggregated RGB");
    c.add(level_name("observed", cm.level), cm.observed, "texel observed by any camera");
    unobserved.push_back(cm.unobserved_texels);
  }
  c.meta["unobserved_texels"] = unobserved;
}

MapContainer param_maps_to_container(const ParamMapSet& maps) {
  maps.validate();
  MapContainer c;
  c.offset_step = maps.scale_limit;
  c.scaffold_count = maps.scaffold_count;
  c.add("uv_mask", maps.uv_mask, "uv foreground mask");
  for (int i = 0; i <= maps.scaffold_count; ++i) {
    const auto& L = maps.levels[i];
    c.add(level_name("position", i), L.position, "scaffold positions, meters");
    c.add(level_name("color", i), L.color, "aggregated RGB");
    c.add(level_name("color_residual", i), L.color_residual, "learnable RGB residual");
    c.add(level_name("quat_raw", i), L.quat_raw, "raw rotation quaternion (w,x,y,z)");
    c.add(level_name("scale_raw", i), L.scale_raw, "raw scale, pre-softplus");
    c.add(level_name("opacity_raw", i), L.opacity_raw, "raw opacity, pre-sigmoid");
    c.add(level_name("observed", i), L.observed, "texel observed by any camera");
  }
  return c;
}

ParamMapSet param_maps_from_container(const MapContainer& c) {
  ParamMapSet maps;
  maps.scaffold_count = c.scaffold_count;
  maps.scale_limit = c.offset_step;
  maps.uv_mask = c.get("uv_mask");
  maps.levels.resize(c.scaffold_count + 1);
  for (int i = 0; i <= c.scaffold_count; ++i) {
    auto& L = maps.levels[i];
    L.position = c.get(level_name("position", i));
    L.color = c.get(level_name("color", i));
    L.color_residual = c.get(level_name("color_residual", i));
    L.quat_raw = c.get(level_name("quat_raw", i));
    L.scale_raw = c.get(level_name("scale_raw", i));
    L.opacity_raw = c.get(level_name("opacity_raw", i));
    L.observed = c.get(level_name("observed", i));
  }
  maps.validate();
  return maps;
}

}  // namespace uvsplat
