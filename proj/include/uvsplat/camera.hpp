#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "uvsplat/image.hpp"
#include "uvsplat/math.hpp"

namespace uvsplat {

// Calibrated pinhole camera. Rotation maps world to camera coordinates
// (x right, y down, z forward); pixel (0,0) spans [0,1)x[0,1) with its center
// at (0.5, 0.5).
struct Camera {
  double fx = 1, fy = 1, cx = 0, cy = 0;
  Mat3 rotation;
  Vec3 translation;
  int width = 1, height = 1;

  void validate() const;
  Vec3 center() const;  // camera position in world coordinates

  // Camera looking from eye toward target with the given world up direction.
  static Camera look_at(const Vec3& eye, const Vec3& target, const Vec3& up, double fx, double fy,
                        int width, int height);
};

struct ProjectedPoint {
  double x = 0, y = 0;   // continuous pixel coordinates
  double depth = 0;      // camera-space z
  bool behind = false;   // z <= 1e-8; excluded from sampling downstream
};

ProjectedPoint project_point(const Camera& camera, const Vec3& p);
std::vector<ProjectedPoint> project(const Camera& camera, std::span<const Vec3> points);

// Bilinear interpolation with texel centers at integer+0.5 and border clamp.
// Writes image.channels values to out.
template <typename T>
void bilinear_sample(const Image<T>& image, double x, double y, double* out) {
  if (!std::isfinite(x)) x = 0.0;
  if (!std::isfinite(y)) y = 0.0;
  x = std::clamp(x, 0.0, double(image.width));
  y = std::clamp(y, 0.0, double(image.height));
  const double xf = x - 0.5, yf = y - 0.5;
  double x0d = std::floor(xf), y0d = std::floor(yf);
  const double wx = xf - x0d, wy = yf - y0d;
  const auto clampi = [](int v, int hi) { return v < 0 ? 0 : (v > hi ? hi : v); };
  const int x0 = clampi(int(x0d), image.width - 1);
  const int x1 = clampi(int(x0d) + 1, image.width - 1);
  const int y0 = clampi(int(y0d), image.height - 1);
  const int y1 = clampi(int(y0d) + 1, image.height - 1);
  for (int ch = 0; ch < image.channels; ++ch) {
    const double v00 = image.at(y0, x0, ch), v01 = image.at(y0, x1, ch);
    const double v10 = image.at(y1, x0, ch), v11 = image.at(y1, x1, ch);
    out[ch] = (1 - wy) * ((1 - wx) * v00 + wx * v01) + wy * ((1 - wx) * v10 + wx * v11);
  }
}

template <typename T>
std::vector<std::vector<double>> bilinear_sample(const Image<T>& image,
                                                 std::span<const Vec2> coords) {
  std::vector<std::vector<double>> out(coords.size(), std::vector<double>(image.channels));
  for (size_t i = 0; i < coords.size(); ++i)
    bilinear_sample(image, coords[i].x, coords[i].y, out[i].data());
  return out;
}

// One calibrated observation of the subject.
struct View {
  Camera camera;
  ImageF image;  // HxWx3 in [0,1]
  ImageF mask;   // HxWx1 in {0,1}
};

struct CaptureSet {
  std::vector<View> views;

  void validate() const;
  std::vector<Camera> cameras() const;
};

// Camera JSON: array of {fx, fy, cx, cy, R (row-major 9), t (3), width, height}.
std::vector<Camera> load_cameras_json(const std::string& path);
void save_cameras_json(const std::vector<Camera>& cameras, const std::string& path);

}  // namespace uvsplat
