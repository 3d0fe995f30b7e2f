#pragma once

#include <array>
#include <string>
#include <vector>

#include "uvsplat/image.hpp"
#include "uvsplat/math.hpp"

namespace uvsplat {

// Triangle mesh with per-corner UVs. The geometry prior everything hangs off.
struct TemplateMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> faces;
  std::vector<std::array<Vec2, 3>> uv_faces;  // one UV per face corner
  std::vector<Vec3> vertex_normals;           // computed, unit length

  size_t vertex_count() const { return vertices.size(); }
  size_t face_count() const { return faces.size(); }
};

// Scan-style mesh that carries its own texture image (RGB in [0,1]).
struct TexturedMesh {
  TemplateMesh mesh;
  ImageF texture;
};

// Area-weighted vertex normals: sum of incident face cross products, normalized.
// Throws zero_normal when the accumulated vector at a vertex is degenerate.
std::vector<Vec3> compute_vertex_normals(const TemplateMesh& mesh);

// Validates index ranges, UV range, non-degenerate faces. Throws invalid_mesh.
void validate_mesh(const TemplateMesh& mesh);

// Wavefront OBJ with `v`, `vt`, `f v/vt` records. `vn` records are ignored and
// normals recomputed. Polygon faces are fan-triangulated.
TemplateMesh load_obj(const std::string& path);
void save_obj(const TemplateMesh& mesh, const std::string& path);

}  // namespace uvsplat
