#pragma once

#include "uvsplat/image.hpp"
#include "uvsplat/math.hpp"
#include "uvsplat/uv_raster.hpp"
#include "uvsplat/visibility.hpp"

namespace uvsplat {

// numerically stable ln(1+e^x)
inline double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}
inline double inv_softplus(double y) { return std::log(std::expm1(y)); }
inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
inline double logit(double y) { return std::log(y / (1.0 - y)); }

// Scale activation: softplus capped at the inter-scaffold spacing. The cap
// realizes the representation's scale confinement; its derivative is 0 at the
// clamp.
inline Vec3 activate_scale(const Vec3& raw, double limit) {
  return {std::min(softplus(raw.x), limit), std::min(softplus(raw.y), limit),
          std::min(softplus(raw.z), limit)};
}
inline double activate_opacity(double raw) { return sigmoid(raw); }

// Normalizes q and converts to a rotation matrix. Throws degenerate_quaternion
// when the norm underflows.
Mat3 quat_to_rotation(const Quat& q_raw);

// Sigma = R diag(s)^2 R^T for a unit quaternion and positive scales.
Mat3 covariance_matrix(const Quat& q_unit, const Vec3& scale);

// Raw (pre-activation) parameter maps for every scaffold level. Position and
// color maps are fixed inputs; only quat/scale/opacity raws are optimized.
struct ParamMapSet {
  int scaffold_count = 0;   // S
  double scale_limit = 0.0;  // d
  ImageF uv_mask;           // HxWx1

  struct Level {
    ImageF position;        // HxWx3, fixed
    ImageF color;           // HxWx3, fixed
    ImageF color_residual;  // HxWx3, zero unless residual learning is enabled
    ImageF quat_raw;        // HxWx4 (w,x,y,z)
    ImageF scale_raw;       // HxWx3
    ImageF opacity_raw;     // HxWx1
    ImageF observed;        // HxWx1, 1 where some camera saw the texel
  };
  std::vector<Level> levels;  // S+1

  int height() const { return uv_mask.height; }
  int width() const { return uv_mask.width; }
  void validate() const;  // throws incomplete_maps
};

// Fresh maps from rasterized geometry and aggregated colors: identity
// rotations, quarter-spacing scales, near-opaque where observed and faint
// where the fallback color was inpainted.
ParamMapSet init_param_maps(const UvGeometryMaps& geo,
                            const std::vector<AggregatedColorMap>& colors);

struct GaussianSource {
  int level = 0, row = 0, col = 0;
};

// Flat, render-ready Gaussians. Activated fields always hold the public
// contract (unit quaternions, scales in (0, limit], opacities in (0,1)); the
// raw fields back the activation chain for gradients and may be empty for
// directly constructed clouds.
struct GaussianCloud {
  double scale_limit = 0.0;
  std::vector<Vec3> means;
  std::vector<Quat> quats;  // unit
  std::vector<Vec3> scales;
  std::vector<double> opacities;
  std::vector<Vec3> colors;

  std::vector<Quat> quats_raw;
  std::vector<Vec3> scales_raw;
  std::vector<double> opacities_raw;
  std::vector<GaussianSource> sources;

  size_t size() const { return means.size(); }
  bool has_raw() const { return quats_raw.size() == means.size(); }

  // Fills activated fields from raw ones through the activation functions.
  static GaussianCloud from_raw(std::vector<Vec3> means, std::vector<Quat> quats_raw,
                                std::vector<Vec3> scales_raw, std::vector<double> opacities_raw,
                                std::vector<Vec3> colors, double scale_limit);
};

// One Gaussian per (level, foreground texel), level-major then row-major.
// Emitted color is clamp(color + color_residual, 0, 1).
GaussianCloud assemble_cloud(const ParamMapSet& maps);

}  // namespace uvsplat
