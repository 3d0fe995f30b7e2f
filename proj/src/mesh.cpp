#include "uvsplat/mesh.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace uvsplat {

std::vector<Vec3> compute_vertex_normals(const TemplateMesh& mesh) {
  std::vector<Vec3> accum(mesh.vertices.size(), Vec3{});
  for (const auto& f : mesh.faces) {
    const Vec3& a = mesh.vertices[f[0]];
    const Vec3& b = mesh.vertices[f[1]];
    const Vec3& c = mesh.vertices[f[2]];
    // cross product magnitude is twice the face area, so summing raw cross
    // products is exactly area weighting
    const Vec3 fn = cross(b - a, c - a);
    accum[f[0]] += fn;
    accum[f[1]] += fn;
    accum[f[2]] += fn;
  }
  std::vector<Vec3> normals(accum.size());
  for (size_t i = 0; i < accum.size(); ++i) {
    const double len = norm(accum[i]);
    require(len >= 1e-12, ErrorCode::zero_normal,
            "degenerate normal at vertex " + std::to_string(i));
    normals[i] = accum[i] / len;
  }
  return normals;
}

void validate_mesh(const TemplateMesh& mesh) {
  require(!mesh.faces.empty(), ErrorCode::invalid_mesh, "mesh has no faces");
  require(mesh.uv_faces.size() == mesh.faces.size(), ErrorCode::invalid_mesh,
          "uv_faces count does not match face count");
  const int n = int(mesh.vertices.size());
  for (size_t fi = 0; fi < mesh.faces.size(); ++fi) {
    const auto& f = mesh.faces[fi];
    for (int k = 0; k < 3; ++k) {
      require(f[k] >= 0 && f[k] < n, ErrorCode::invalid_mesh,
              "face " + std::to_string(fi) + " references vertex " + std::to_string(f[k]));
      const Vec2& uv = mesh.uv_faces[fi][k];
      require(uv.x >= 0.0 && uv.x <= 1.0 && uv.y >= 0.0 && uv.y <= 1.0,
              ErrorCode::invalid_mesh, "face " + std::to_string(fi) + " has UV outside [0,1]^2");
    }
    const Vec3 e1 = mesh.vertices[f[1]] - mesh.vertices[f[0]];
    const Vec3 e2 = mesh.vertices[f[2]] - mesh.vertices[f[0]];
    require(norm(cross(e1, e2)) > 1e-14, ErrorCode::invalid_mesh,
            "face " + std::to_string(fi) + " is degenerate (zero area)");
  }
}

TemplateMesh load_obj(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::missing_input, "cannot open OBJ file: " + path);

  TemplateMesh mesh;
  std::vector<Vec2> uvs;
  std::string line;
  size_t line_no = 0;

  auto parse_corner = [&](const std::string& tok) -> std::pair<int, int> {
    // v, v/vt, v/vt/vn, v//vn
    int v = 0, vt = 0;
    const size_t s1 = tok.find('/');
    if (s1 == std::string::npos) {
      v = std::stoi(tok);
    } else {
      v = std::stoi(tok.substr(0, s1));
      const size_t s2 = tok.find('/', s1 + 1);
      const std::string mid =
          s2 == std::string::npos ? tok.substr(s1 + 1) : tok.substr(s1 + 1, s2 - s1 - 1);
      if (!mid.empty()) vt = std::stoi(mid);
    }
    require(vt != 0, ErrorCode::parse_error,
            path + ":" + std::to_string(line_no) + ": face corner lacks a vt index");
    // OBJ indices are 1-based; negative indices count from the end
    const int vi = v > 0 ? v - 1 : int(mesh.vertices.size()) + v;
    const int ti = vt > 0 ? vt - 1 : int(uvs.size()) + vt;
    return {vi, ti};
  };

  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ss(line);
    std::string tag;
    if (!(ss >> tag) || tag.empty() || tag[0] == '#') continue;
    if (tag == "v") {
      Vec3 p;
      require(bool(ss >> p.x >> p.y >> p.z), ErrorCode::parse_error,
              path + ":" + std::to_string(line_no) + ": bad vertex record");
      mesh.vertices.push_back(p);
    } else if (tag == "vt") {
      Vec2 uv;
      require(bool(ss >> uv.x >> uv.y), ErrorCode::parse_error,
              path + ":" + std::to_string(line_no) + ": bad vt record");
      uvs.push_back(uv);
    } else if (tag == "f") {
      std::vector<std::pair<int, int>> corners;
      std::string tok;
      while (ss >> tok) corners.push_back(parse_corner(tok));
      require(corners.size() >= 3, ErrorCode::parse_error,
              path + ":" + std::to_string(line_no) + ": face with <3 corners");
      for (size_t k = 2; k < corners.size(); ++k) {
        const std::array<std::pair<int, int>, 3> tri = {corners[0], corners[k - 1], corners[k]};
        std::array<int, 3> fv;
        std::array<Vec2, 3> fuv;
        for (int j = 0; j < 3; ++j) {
          const auto [vi, ti] = tri[j];
          require(ti >= 0 && ti < int(uvs.size()), ErrorCode::parse_error,
                  path + ":" + std::to_string(line_no) + ": vt index out of range");
          fv[j] = vi;
          fuv[j] = uvs[ti];
        }
        mesh.faces.push_back(fv);
        mesh.uv_faces.push_back(fuv);
      }
    }
    // vn and everything else: ignored
  }

  validate_mesh(mesh);
  mesh.vertex_normals = compute_vertex_normals(mesh);
  return mesh;
}

void save_obj(const TemplateMesh& mesh, const std::string& path) {
  std::ofstream out(path);
  require(out.good(), ErrorCode::io_error, "cannot write OBJ file: " + path);
  char buf[160];
  for (const auto& v : mesh.vertices) {
    std::snprintf(buf, sizeof(buf), "v %.17g %.17g %.17g\n", v.x, v.y, v.z);
    out << buf;
  }
  // one vt per face corner; simple and lossless
  for (const auto& fuv : mesh.uv_faces) {
    for (const auto& uv : fuv) {
      std::snprintf(buf, sizeof(buf), "vt %.17g %.17g\n", uv.x, uv.y);
      out << buf;
    }
  }
  for (size_t fi = 0; fi < mesh.faces.size(); ++fi) {
    const auto& f = mesh.faces[fi];
    std::snprintf(buf, sizeof(buf), "f %d/%zu %d/%zu %d/%zu\n", f[0] + 1, fi * 3 + 1, f[1] + 1,
                  fi * 3 + 2, f[2] + 1, fi * 3 + 3);
    out << buf;
  }
  require(out.good(), ErrorCode::io_error, "write failed: " + path);
}

}  // namespace uvsplat
