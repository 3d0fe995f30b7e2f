#pragma once

#include "uvsplat/mesh.hpp"
#include "uvsplat/uv_raster.hpp"

namespace uvsplat {

// Bakes a pseudo ground-truth texture for the template UV layout: each
// foreground texel's level-0 surface point is matched to the nearest point on
// the scan surface, and the scan texture is sampled at that point's UV.
// Background texels stay 0.
ImageF transfer_texture_nearest(const TemplateMesh& templ, const TexturedMesh& scan, int height,
                                int width);

// Same, reusing an already rasterized template geometry.
ImageF transfer_texture_nearest(const UvGeometryMaps& template_geo, const TexturedMesh& scan);

}  // namespace uvsplat
