#pragma once

#include "uvsplat/camera.hpp"
#include "uvsplat/mesh.hpp"

namespace uvsplat {

// Procedural desk-scale subject: a torus template plus a bump-displaced,
// textured oracle surface observed by a ring of calibrated cameras. Drives
// tests, benchmarks and the make-synthetic command.
struct SyntheticConfig {
  int segments_major = 96;   // template tessellation around the main ring
  int segments_minor = 48;
  double radius_major = 0.12;  // meters
  double radius_minor = 0.05;
  double bump_amplitude = 0.03;  // max outward displacement of the scan
  int bump_count = 6;
  uint64_t seed = 7;
  int texture_size = 256;
  int image_size = 160;
  int input_views = 3;
  int heldout_views = 2;
  double camera_distance = 1.0;
  double camera_elevation = 0.3;
  double focal = 360.0;  // pixels, scaled with image_size/160
};

struct SyntheticScene {
  TemplateMesh template_mesh;
  TexturedMesh scan;     // displaced + textured oracle surface
  CaptureSet inputs;     // views rendered from the scan
  CaptureSet heldout;
};

TemplateMesh make_torus_mesh(double radius_major, double radius_minor, int segments_major,
                             int segments_minor);

// Gently bumped open heightfield whose UV chart fills [0,1]^2. Every texel
// faces all front-side cameras, which makes it the fixture for aggregation
// oracles (no silhouette rim inside the foreground).
TemplateMesh make_relief_patch_mesh(double extent, double amplitude, int quads);

// smooth procedural texture evaluated directly at (u, v)
Vec3 synthetic_texture(double u, double v);
ImageF bake_synthetic_texture(int size);

SyntheticScene make_synthetic_scene(const SyntheticConfig& cfg);

// Classic z-buffer rasterization of a textured mesh. This is the oracle
// renderer: it shares no code with the splat pipeline.
struct MeshRender {
  ImageD color;  // HxWx3
  ImageD depth;  // HxWx1, +inf background
  ImageF mask;   // HxWx1 coverage
};
MeshRender render_mesh(const TexturedMesh& mesh, const Camera& camera);

}  // namespace uvsplat
