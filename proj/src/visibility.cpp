#include "uvsplat/visibility.hpp"

#include <cmath>
#include <deque>
#include <limits>

namespace uvsplat {

namespace {

inline double cross2(double ax, double ay, double bx, double by) { return ax * by - ay * bx; }

}  // namespace

ImageD render_depth_map(std::span<const Vec3> vertices,
                        std::span<const std::array<int, 3>> faces, const Camera& camera) {
  const int W = camera.width, H = camera.height;
  ImageD depth(H, W, 1, std::numeric_limits<double>::infinity());

  std::vector<ProjectedPoint> proj(vertices.size());
  for (size_t i = 0; i < vertices.size(); ++i) proj[i] = project_point(camera, vertices[i]);

  for (const auto& f : faces) {
    const ProjectedPoint &a = proj[f[0]], &b = proj[f[1]], &c = proj[f[2]];
    if (a.behind || b.behind || c.behind) continue;  // no near-plane clipping
    const double area2 = cross2(b.x - a.x, b.y - a.y, c.x - a.x, c.y - a.y);
    if (area2 == 0.0) continue;

    const int c0 = std::max(0, int(std::floor(std::min({a.x, b.x, c.x}) - 0.5)));
    const int c1 = std::min(W - 1, int(std::ceil(std::max({a.x, b.x, c.x}))));
    const int r0 = std::max(0, int(std::floor(std::min({a.y, b.y, c.y}) - 0.5)));
    const int r1 = std::min(H - 1, int(std::ceil(std::max({a.y, b.y, c.y}))));

    for (int r = r0; r <= r1; ++r) {
      const double py = r + 0.5;
      for (int col = c0; col <= c1; ++col) {
        const double px = col + 0.5;
        const double la = cross2(c.x - b.x, c.y - b.y, px - b.x, py - b.y) / area2;
        const double lb = cross2(a.x - c.x, a.y - c.y, px - c.x, py - c.y) / area2;
        const double lc = 1.0 - la - lb;
        if (la < 0.0 || lb < 0.0 || lc < 0.0) continue;
        // perspective-correct depth via linear 1/z
        const double inv_z = la / a.depth + lb / b.depth + lc / c.depth;
        const double z = 1.0 / inv_z;
        if (z < depth.at(r, col)) depth.at(r, col) = z;
      }
    }
  }
  return depth;
}

VisibilityWeights visibility_weights(const ScaffoldSet& scaffolds, const UvGeometryMaps& geo,
                                     const std::vector<Camera>& cameras, int level,
                                     double depth_bias) {
  require(level >= 0 && level <= geo.scaffold_count, ErrorCode::level_mismatch,
          "scaffold level out of range");
  require(!cameras.empty(), ErrorCode::invalid_config, "need at least one camera");

  const int H = geo.height(), W = geo.width();
  const int C = int(cameras.size());
  VisibilityWeights vw;
  vw.level = level;
  vw.weights.assign(C, ImageF(H, W, 1, 0.0f));
  vw.observed = ImageF(H, W, 1, 0.0f);

  // occlusion is always tested against the level-0 template surface
  std::vector<ImageD> depth_maps;
  depth_maps.reserve(C);
  for (const Camera& cam : cameras)
    depth_maps.push_back(render_depth_map(scaffolds.levels[0], scaffolds.faces, cam));

  const ImageF& pos = geo.position_maps[level];
  std::vector<double> scores(C);
  int unobserved = 0;
  for (const auto& [r, c] : geo.foreground) {
    const Vec3 p = {pos.at(r, c, 0), pos.at(r, c, 1), pos.at(r, c, 2)};
    const Vec3 n = {geo.normal_map.at(r, c, 0), geo.normal_map.at(r, c, 1),
                    geo.normal_map.at(r, c, 2)};
    double total = 0.0;
    for (int cam_i = 0; cam_i < C; ++cam_i) {
      const Camera& cam = cameras[cam_i];
      double s = 0.0;
      const Vec3 view_dir = normalized(p - cam.center());
      const double cosine = -dot(n, view_dir);
      if (cosine > 0.0) {
        const ProjectedPoint pp = project_point(cam, p);
        if (!pp.behind) {
          const int px = int(std::floor(pp.x));
          const int py = int(std::floor(pp.y));
          if (px >= 0 && px < cam.width && py >= 0 && py < cam.height &&
              pp.depth <= depth_maps[cam_i].at(py, px) + depth_bias)
            s = cosine;
        }
      }
      scores[cam_i] = s;
      total += s;
    }
    if (total > 0.0) {
      for (int cam_i = 0; cam_i < C; ++cam_i)
        vw.weights[cam_i].at(r, c) = float(scores[cam_i] / total);
      vw.observed.at(r, c) = 1.0f;
    } else {
      ++unobserved;
    }
  }
  vw.unobserved_texels = unobserved;
  return vw;
}

namespace {

// Multi-source BFS over the full UV grid: every unobserved foreground texel
// takes the color of the nearest observed texel, ties resolved by row-major
// source order.
void fill_unobserved(ImageF& color, const ImageF& uv_mask, const ImageF& observed) {
  const int H = color.height, W = color.width;
  std::vector<int32_t> src(size_t(H) * W, -1);
  std::deque<int32_t> queue;
  for (int r = 0; r < H; ++r)
    for (int c = 0; c < W; ++c)
      if (observed.at(r, c) != 0.0f) {
        src[size_t(r) * W + c] = int32_t(r) * W + c;
        queue.push_back(int32_t(r) * W + c);
      }

  if (queue.empty()) {
    // nothing observed anywhere: neutral gray on the foreground
    for (int r = 0; r < H; ++r)
      for (int c = 0; c < W; ++c)
        if (uv_mask.at(r, c) != 0.0f)
          for (int ch = 0; ch < 3; ++ch) color.at(r, c, ch) = 0.5f;
    return;
  }

  const int dr[4] = {-1, 0, 0, 1};
  const int dc[4] = {0, -1, 1, 0};
  while (!queue.empty()) {
    const int32_t cur = queue.front();
    queue.pop_front();
    const int r = cur / W, c = cur % W;
    for (int k = 0; k < 4; ++k) {
      const int nr = r + dr[k], nc = c + dc[k];
      if (nr < 0 || nr >= H || nc < 0 || nc >= W) continue;
      auto& slot = src[size_t(nr) * W + nc];
      if (slot >= 0) continue;
      slot = src[size_t(r) * W + c];
      queue.push_back(int32_t(nr) * W + nc);
    }
  }

  for (int r = 0; r < H; ++r)
    for (int c = 0; c < W; ++c) {
      if (uv_mask.at(r, c) == 0.0f || observed.at(r, c) != 0.0f) continue;
      const int32_t s = src[size_t(r) * W + c];
      const int sr = s / W, sc = s % W;
      for (int ch = 0; ch < 3; ++ch) color.at(r, c, ch) = color.at(sr, sc, ch);
    }
}

}  // namespace

AggregatedColorMap aggregate_rgb_map(const CaptureSet& capture, const UvGeometryMaps& geo,
                                     const VisibilityWeights& weights, int level) {
  require(weights.level == level, ErrorCode::level_mismatch,
          "visibility weights were computed for level " + std::to_string(weights.level) +
              ", not " + std::to_string(level));
  require(weights.weights.size() == capture.views.size(), ErrorCode::count_mismatch,
          "weight/camera count mismatch");

  const int H = geo.height(), W = geo.width();
  AggregatedColorMap out;
  out.level = level;
  out.color = ImageF(H, W, 3, 0.0f);
  out.observed = weights.observed;
  out.unobserved_texels = weights.unobserved_texels;

  const ImageF& pos = geo.position_maps[level];
  for (const auto& [r, c] : geo.foreground) {
    if (weights.observed.at(r, c) == 0.0f) continue;
    const Vec3 p = {pos.at(r, c, 0), pos.at(r, c, 1), pos.at(r, c, 2)};
    double acc[3] = {0, 0, 0};
    for (size_t cam_i = 0; cam_i < capture.views.size(); ++cam_i) {
      const double w = weights.weights[cam_i].at(r, c);
      if (w == 0.0) continue;
      const ProjectedPoint pp = project_point(capture.views[cam_i].camera, p);
      if (pp.behind) continue;
      double rgb[3];
      bilinear_sample(capture.views[cam_i].image, pp.x, pp.y, rgb);
      for (int ch = 0; ch < 3; ++ch) acc[ch] += w * rgb[ch];
    }
    for (int ch = 0; ch < 3; ++ch) out.color.at(r, c, ch) = float(acc[ch]);
  }

  fill_unobserved(out.color, geo.uv_mask, weights.observed);
  return out;
}

}  // namespace uvsplat
