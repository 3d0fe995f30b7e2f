#include "uvsplat/scaffold.hpp"

namespace uvsplat {

ScaffoldSet build_scaffolds(const TemplateMesh& mesh, double offset_step, int outer_count) {
  require(offset_step > 0.0, ErrorCode::invalid_config, "scaffold offset step must be > 0");
  require(outer_count >= 0, ErrorCode::invalid_config, "outer scaffold count must be >= 0");
  require(mesh.vertex_normals.size() == mesh.vertices.size(), ErrorCode::invalid_config,
          "vertex normals not computed");

  ScaffoldSet set;
  set.faces = mesh.faces;
  set.uv_faces = mesh.uv_faces;
  set.vertex_normals = mesh.vertex_normals;
  set.offset_step = offset_step;
  set.level_count = outer_count;
  set.levels.resize(outer_count + 1);
  set.levels[0] = mesh.vertices;
  for (int i = 1; i <= outer_count; ++i) {
    auto& level = set.levels[i];
    level.resize(mesh.vertices.size());
    const double off = double(i) * offset_step;
    for (size_t j = 0; j < mesh.vertices.size(); ++j)
      level[j] = mesh.vertices[j] + off * mesh.vertex_normals[j];
  }
  return set;
}

}  // namespace uvsplat
