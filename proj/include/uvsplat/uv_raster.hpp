#pragma once

#include <utility>

#include "uvsplat/image.hpp"
#include "uvsplat/scaffold.hpp"

namespace uvsplat {

// Per-texel geometry rasterized into the template UV atlas.
// Background texels hold 0 in every map and -1 in triangle_map.
struct UvGeometryMaps {
  int scaffold_count = 0;     // S
  double offset_step = 0.0;   // d
  std::vector<ImageF> position_maps;  // S+1 maps, HxWx3 (meters)
  std::vector<ImageF> offset_maps;    // S maps, HxWx3; [i] = position[i+1]-position[i]
  ImageF normal_map;                  // HxWx3, unit, interpolated from level-0 normals
  ImageF uv_mask;                     // HxWx1, 1 on foreground texels
  ImageI32 triangle_map;              // HxWx1, claiming face index
  ImageF bary_map;                    // HxWx3, barycentric coords in face corner order
  std::vector<std::pair<int, int>> foreground;  // (row, col) list, row-major

  int height() const { return uv_mask.height; }
  int width() const { return uv_mask.width; }
};

// Rasterizes every scaffold level into UV space. A texel belongs to the UV
// triangle containing its center; shared edges are resolved with a top-left
// rule. Two triangles strictly claiming one texel is an overlapping-charts
// error.
UvGeometryMaps rasterize_uv_geometry(const ScaffoldSet& scaffolds, int height, int width);

}  // namespace uvsplat
