#include "uvsplat/uv_raster.hpp"

#include <algorithm>
#include <cmath>

namespace uvsplat {

namespace {

inline double cross2(double ax, double ay, double bx, double by) { return ax * by - ay * bx; }

// Shared-edge tie break in y-down texel space: keep edges pointing up, and
// horizontal edges pointing right. Adjacent triangles see the edge reversed,
// so exactly one of them accepts an on-edge texel.
inline bool edge_accepts_zero(double dx, double dy) { return dy < 0.0 || (dy == 0.0 && dx > 0.0); }

constexpr double kStrictInside = 1e-6;  // px^2; above float noise, below any real overlap

}  // namespace

UvGeometryMaps rasterize_uv_geometry(const ScaffoldSet& scaffolds, int height, int width) {
  require(height >= 1 && width >= 1, ErrorCode::invalid_config, "UV map resolution must be >= 1");
  require(!scaffolds.levels.empty(), ErrorCode::invalid_config, "empty scaffold set");

  const int level_total = int(scaffolds.levels.size());
  UvGeometryMaps maps;
  maps.scaffold_count = scaffolds.level_count;
  maps.offset_step = scaffolds.offset_step;
  maps.uv_mask = ImageF(height, width, 1, 0.0f);
  maps.normal_map = ImageF(height, width, 3, 0.0f);
  maps.triangle_map = ImageI32(height, width, 1, -1);
  maps.bary_map = ImageF(height, width, 3, 0.0f);
  maps.position_maps.assign(level_total, ImageF(height, width, 3, 0.0f));
  maps.offset_maps.assign(scaffolds.level_count, ImageF(height, width, 3, 0.0f));

  // min inside-margin per claimed texel, for the strict-overlap test
  ImageD margin(height, width, 1, 0.0);

  for (size_t fi = 0; fi < scaffolds.faces.size(); ++fi) {
    const auto& fuv = scaffolds.uv_faces[fi];
    // texel space: u*W right, v*H down, texel centers at half-integers
    const double ax = fuv[0].x * width, ay = fuv[0].y * height;
    const double bx = fuv[1].x * width, by = fuv[1].y * height;
    const double cx = fuv[2].x * width, cy = fuv[2].y * height;
    const double area2 = cross2(bx - ax, by - ay, cx - ax, cy - ay);
    if (area2 == 0.0) continue;  // degenerate UV footprint covers nothing
    const double sign = area2 > 0.0 ? 1.0 : -1.0;

    const int c0 = std::max(0, int(std::floor(std::min({ax, bx, cx}) - 0.5)));
    const int c1 = std::min(width - 1, int(std::ceil(std::max({ax, bx, cx}))));
    const int r0 = std::max(0, int(std::floor(std::min({ay, by, cy}) - 0.5)));
    const int r1 = std::min(height - 1, int(std::ceil(std::max({ay, by, cy}))));

    for (int r = r0; r <= r1; ++r) {
      const double py = r + 0.5;
      for (int c = c0; c <= c1; ++c) {
        const double px = c + 0.5;
        const double e0 = sign * cross2(bx - ax, by - ay, px - ax, py - ay);
        const double e1 = sign * cross2(cx - bx, cy - by, px - bx, py - by);
        const double e2 = sign * cross2(ax - cx, ay - cy, px - cx, py - cy);
        const bool in0 = e0 > 0.0 || (e0 == 0.0 && edge_accepts_zero(sign * (bx - ax), sign * (by - ay)));
        const bool in1 = e1 > 0.0 || (e1 == 0.0 && edge_accepts_zero(sign * (cx - bx), sign * (cy - by)));
        const bool in2 = e2 > 0.0 || (e2 == 0.0 && edge_accepts_zero(sign * (ax - cx), sign * (ay - cy)));
        if (!(in0 && in1 && in2)) continue;

        const double inside_margin = std::min({e0, e1, e2});
        if (maps.triangle_map.at(r, c) >= 0) {
          if (inside_margin > kStrictInside && margin.at(r, c) > kStrictInside)
            fail(ErrorCode::overlapping_charts,
                 "UV triangles " + std::to_string(maps.triangle_map.at(r, c)) + " and " +
                     std::to_string(fi) + " both claim texel (" + std::to_string(r) + "," +
                     std::to_string(c) + ")");
          continue;  // grazing duplicate along a chart border: first claim wins
        }
        maps.triangle_map.at(r, c) = int(fi);
        margin.at(r, c) = inside_margin;
        maps.uv_mask.at(r, c) = 1.0f;

        // barycentrics in original corner order (signed-area form works for
        // either winding)
        const double la = cross2(cx - bx, cy - by, px - bx, py - by) / area2;
        const double lb = cross2(ax - cx, ay - cy, px - cx, py - cy) / area2;
        const double lc = 1.0 - la - lb;
        maps.bary_map.at(r, c, 0) = float(la);
        maps.bary_map.at(r, c, 1) = float(lb);
        maps.bary_map.at(r, c, 2) = float(lc);

        const auto& face = scaffolds.faces[fi];
        for (int li = 0; li < level_total; ++li) {
          const Vec3 p = la * scaffolds.levels[li][face[0]] + lb * scaffolds.levels[li][face[1]] +
                         lc * scaffolds.levels[li][face[2]];
          maps.position_maps[li].at(r, c, 0) = float(p.x);
          maps.position_maps[li].at(r, c, 1) = float(p.y);
          maps.position_maps[li].at(r, c, 2) = float(p.z);
        }
        const Vec3 n_raw = la * scaffolds.vertex_normals[face[0]] +
                           lb * scaffolds.vertex_normals[face[1]] +
                           lc * scaffolds.vertex_normals[face[2]];
        const double n_len = norm(n_raw);
        require(n_len >= 1e-12, ErrorCode::zero_normal,
                "interpolated normal vanishes at texel (" + std::to_string(r) + "," +
                    std::to_string(c) + ")");
        const Vec3 n = n_raw / n_len;
        maps.normal_map.at(r, c, 0) = float(n.x);
        maps.normal_map.at(r, c, 1) = float(n.y);
        maps.normal_map.at(r, c, 2) = float(n.z);
      }
    }
  }

  // offsets from the stored float positions, so offset == pos[i+1]-pos[i]
  // holds bit-exactly in float
  for (int i = 0; i < scaffolds.level_count; ++i) {
    const ImageF& hi = maps.position_maps[i + 1];
    const ImageF& lo = maps.position_maps[i];
    ImageF& off = maps.offset_maps[i];
    for (size_t k = 0; k < off.data.size(); ++k) off.data[k] = hi.data[k] - lo.data[k];
  }

  maps.foreground.reserve(size_t(height) * width / 4);
  for (int r = 0; r < height; ++r)
    for (int c = 0; c < width; ++c)
      if (maps.uv_mask.at(r, c) != 0.0f) maps.foreground.emplace_back(r, c);

  return maps;
}

}  // namespace uvsplat
