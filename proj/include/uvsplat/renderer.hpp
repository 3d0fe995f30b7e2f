#pragma once

#include <optional>
#include <string>

#include "uvsplat/camera.hpp"
#include "uvsplat/gaussian_model.hpp"

namespace uvsplat {

struct RenderConfig {
  double blur_floor = 0.3;            // px^2 added to the projected covariance diagonal
  double alpha_cutoff = 1.0 / 255.0;  // contributions below this are skipped
  double transmittance_cutoff = 1e-4; // compositing stops once T drops below
  double maha_cutoff = 9.0;           // 3-sigma support; shared by tiling and compositing
  double near_depth = 1e-4;           // camera-space z culling plane
  int tile_size = 16;
};

// A Gaussian projected to the image plane.
struct Splat2D {
  double mean_x = 0, mean_y = 0;
  double cov00 = 0, cov01 = 0, cov11 = 0;     // 2D covariance, blur floor included
  double conic00 = 0, conic01 = 0, conic11 = 0;
  double depth = 0;
  double radius = 0;  // conservative 3-sigma pixel radius
  Vec3 color;
  double opacity = 0;
  int source = -1;  // cloud index
};

// EWA projection of one Gaussian: pinhole mean projection plus J W Sigma W^T J^T
// with the perspective Jacobian J at the camera-space mean. Returns nullopt for
// Gaussians behind the near plane.
std::optional<Splat2D> project_gaussian(const Camera& camera, const Vec3& mean, const Mat3& cov3,
                                        const RenderConfig& cfg = {});

struct RenderOutput {
  ImageD color;          // HxWx3 in [0,1] (black background)
  ImageD alpha;          // HxWx1
  ImageI32 blend_counts; // HxWx1 composited contributions per pixel
};

struct RenderStats {
  int tiles_x = 0, tiles_y = 0;
  std::vector<int> splats_per_tile;
  std::vector<int64_t> blends_per_tile;
  std::string to_json() const;
};

// Depth-sorted, tile-parallel forward pass of the alpha-blending equation.
// Tiling never changes the result: the per-tile 3-sigma bound matches the
// compositing cutoff.
RenderOutput render(const GaussianCloud& cloud, const Camera& camera,
                    const RenderConfig& cfg = {}, RenderStats* stats = nullptr);

// Gradients with respect to the cloud's raw parameterization. Mean and color
// gradients are reported too even though the fitting stage keeps those maps
// frozen.
struct CloudGradients {
  std::vector<Vec3> means;
  std::vector<Quat> quats_raw;
  std::vector<Vec3> scales_raw;
  std::vector<double> opacities_raw;
  std::vector<Vec3> colors;

  void resize(size_t n) {
    means.assign(n, Vec3{});
    quats_raw.assign(n, Quat{0, 0, 0, 0});
    scales_raw.assign(n, Vec3{});
    opacities_raw.assign(n, 0.0);
    colors.assign(n, Vec3{});
  }
};

// Analytic adjoint of render(). Recomputes the forward compositing state per
// tile, so no stored forward state is required; contributions skipped by the
// forward cutoffs receive zero gradient, matching the piecewise forward.
CloudGradients render_backward(const GaussianCloud& cloud, const Camera& camera,
                               const ImageD& grad_color, const ImageD& grad_alpha,
                               const RenderConfig& cfg = {});

}  // namespace uvsplat
