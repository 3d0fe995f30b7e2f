#pragma once

#include "uvsplat/camera.hpp"
#include "uvsplat/uv_raster.hpp"

namespace uvsplat {

// Z-buffer depth pass of a triangle mesh; +inf where nothing covers the pixel.
ImageD render_depth_map(std::span<const Vec3> vertices,
                        std::span<const std::array<int, 3>> faces, const Camera& camera);

// Per-texel, per-camera normalized contribution weights for one scaffold level.
struct VisibilityWeights {
  int level = 0;
  std::vector<ImageF> weights;  // one HxWx1 map per camera; sums to 1 on observed texels
  ImageF observed;              // HxWx1, 1 where at least one camera sees the texel
  int unobserved_texels = 0;    // foreground texels with all-zero weights
};

// Weight = cosine foreshortening, gated by an occlusion test against a depth
// render of the level-0 template, normalized over cameras. depth_bias absorbs
// rasterization quantization.
VisibilityWeights visibility_weights(const ScaffoldSet& scaffolds, const UvGeometryMaps& geo,
                                     const std::vector<Camera>& cameras, int level,
                                     double depth_bias = 0.005);

struct AggregatedColorMap {
  int level = 0;
  ImageF color;     // HxWx3
  ImageF observed;  // HxWx1 (copied from weights)
  int unobserved_texels = 0;
};

// Visibility-weighted average of bilinear image samples at the projected
// texel positions. Unobserved foreground texels take the color of the nearest
// observed texel (breadth-first over the UV grid).
AggregatedColorMap aggregate_rgb_map(const CaptureSet& capture, const UvGeometryMaps& geo,
                                     const VisibilityWeights& weights, int level);

}  // namespace uvsplat
