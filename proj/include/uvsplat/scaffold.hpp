#pragma once

#include "uvsplat/mesh.hpp"

namespace uvsplat {

// S+1 vertex shells sharing the template topology. Level 0 is the template,
// level i sits i*offset_step along the outward vertex normals.
struct ScaffoldSet {
  std::vector<std::vector<Vec3>> levels;
  std::vector<std::array<int, 3>> faces;
  std::vector<std::array<Vec2, 3>> uv_faces;
  std::vector<Vec3> vertex_normals;
  double offset_step = 0.0;  // d, meters
  int level_count = 0;       // S (outer shells, levels.size() == S+1)
};

ScaffoldSet build_scaffolds(const TemplateMesh& mesh, double offset_step, int outer_count);

}  // namespace uvsplat
