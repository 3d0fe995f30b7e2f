#include "uvsplat/texture_transfer.hpp"

#include "uvsplat/bvh.hpp"
#include "uvsplat/camera.hpp"
#include "uvsplat/scaffold.hpp"

namespace uvsplat {

ImageF transfer_texture_nearest(const UvGeometryMaps& template_geo, const TexturedMesh& scan) {
  require(!scan.mesh.faces.empty(), ErrorCode::empty_scan, "scan mesh has no faces");
  require(!scan.texture.empty() && scan.texture.channels == 3, ErrorCode::invalid_config,
          "scan texture must be HxWx3");

  const TriangleBvh bvh(scan.mesh.vertices, scan.mesh.faces);
  const int H = template_geo.height(), W = template_geo.width();
  const ImageF& pos0 = template_geo.position_maps[0];
  ImageF out(H, W, 3, 0.0f);

  parallel_chunks(template_geo.foreground.size(), 1024, [&](int64_t, int64_t begin, int64_t end) {
    for (int64_t i = begin; i < end; ++i) {
      const auto [r, c] = template_geo.foreground[i];
      const Vec3 p = {pos0.at(r, c, 0), pos0.at(r, c, 1), pos0.at(r, c, 2)};
      const auto hit = bvh.closest(p);
      // UV of the nearest scan point, then the scan texture color there
      const auto& fuv = scan.mesh.uv_faces[hit.face];
      const double u = hit.bary.x * fuv[0].x + hit.bary.y * fuv[1].x + hit.bary.z * fuv[2].x;
      const double v = hit.bary.x * fuv[0].y + hit.bary.y * fuv[1].y + hit.bary.z * fuv[2].y;
      double rgb[3];
      bilinear_sample(scan.texture, u * scan.texture.width, v * scan.texture.height, rgb);
      for (int ch = 0; ch < 3; ++ch) out.at(r, c, ch) = float(rgb[ch]);
    }
  });
  return out;
}

ImageF transfer_texture_nearest(const TemplateMesh& templ, const TexturedMesh& scan, int height,
                                int width) {
  TemplateMesh t = templ;
  if (t.vertex_normals.size() != t.vertices.size()) t.vertex_normals = compute_vertex_normals(t);
  const ScaffoldSet base = build_scaffolds(t, 1.0, 0);  // level 0 only; step unused
  const UvGeometryMaps geo = rasterize_uv_geometry(base, height, width);
  return transfer_texture_nearest(geo, scan);
}

}  // namespace uvsplat
