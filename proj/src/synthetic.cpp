#include "uvsplat/synthetic.hpp"

#include <cmath>
#include <limits>
#include <random>

namespace uvsplat {

namespace {

constexpr double kPi = 3.14159265358979323846;

// uniform double in [0,1) from raw engine bits; avoids the
// implementation-defined std distributions
double rand_unit(std::mt19937_64& rng) { return double(rng() >> 11) * 0x1.0p-53; }

}  // namespace

TemplateMesh make_torus_mesh(double radius_major, double radius_minor, int segments_major,
                             int segments_minor) {
  require(segments_major >= 3 && segments_minor >= 3, ErrorCode::invalid_config,
          "torus needs at least 3 segments per ring");
  TemplateMesh mesh;
  const int Nu = segments_major, Nv = segments_minor;
  mesh.vertices.reserve(size_t(Nu) * Nv);
  for (int i = 0; i < Nu; ++i) {
    const double theta = 2.0 * kPi * i / Nu;
    for (int j = 0; j < Nv; ++j) {
      const double phi = 2.0 * kPi * j / Nv;
      const double ring = radius_major + radius_minor * std::cos(phi);
      mesh.vertices.push_back(
          {ring * std::cos(theta), ring * std::sin(theta), radius_minor * std::sin(phi)});
    }
  }
  auto vid = [&](int i, int j) { return (i % Nu) * Nv + (j % Nv); };
  for (int i = 0; i < Nu; ++i)
    for (int j = 0; j < Nv; ++j) {
      // per-corner UVs; the wrap column/row uses 1.0 rather than 0 so the
      // atlas tiles [0,1]^2 without overlapping charts
      const double u0 = double(i) / Nu, u1 = double(i + 1) / Nu;
      const double v0 = double(j) / Nv, v1 = double(j + 1) / Nv;
      const int a = vid(i, j), b = vid(i + 1, j), c = vid(i + 1, j + 1), d = vid(i, j + 1);
      mesh.faces.push_back({a, b, c});
      mesh.uv_faces.push_back({Vec2{u0, v0}, Vec2{u1, v0}, Vec2{u1, v1}});
      mesh.faces.push_back({a, c, d});
      mesh.uv_faces.push_back({Vec2{u0, v0}, Vec2{u1, v1}, Vec2{u0, v1}});
    }
  mesh.vertex_normals = compute_vertex_normals(mesh);
  return mesh;
}

TemplateMesh make_relief_patch_mesh(double extent, double amplitude, int quads) {
  require(quads >= 1, ErrorCode::invalid_config, "need at least one quad");
  TemplateMesh mesh;
  const int n = quads;
  for (int j = 0; j <= n; ++j)
    for (int i = 0; i <= n; ++i) {
      const double u = double(i) / n, v = double(j) / n;
      const double x = (u - 0.5) * 2.0 * extent;
      const double y = (v - 0.5) * 2.0 * extent;
      const double z = amplitude * (std::sin(2.0 * kPi * u) * std::cos(2.0 * kPi * v) +
                                    0.5 * std::sin(4.0 * kPi * (u + v)));
      mesh.vertices.push_back({x, y, z});
    }
  auto vid = [&](int i, int j) { return j * (n + 1) + i; };
  auto uv = [&](int i, int j) { return Vec2{double(i) / n, double(j) / n}; };
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) {
      // winding keeps the area-weighted normals on the +z side; front cameras
      // belong at z > 0 looking down
      mesh.faces.push_back({vid(i, j), vid(i + 1, j), vid(i + 1, j + 1)});
      mesh.uv_faces.push_back({uv(i, j), uv(i + 1, j), uv(i + 1, j + 1)});
      mesh.faces.push_back({vid(i, j), vid(i + 1, j + 1), vid(i, j + 1)});
      mesh.uv_faces.push_back({uv(i, j), uv(i + 1, j + 1), uv(i, j + 1)});
    }
  mesh.vertex_normals = compute_vertex_normals(mesh);
  return mesh;
}

Vec3 synthetic_texture(double u, double v) {
  // smooth, colorful, low-frequency: bilinear sampling reconstructs it well
  const double r = 0.5 + 0.32 * std::sin(2.0 * kPi * (2.0 * u + 0.1)) * std::cos(2.0 * kPi * v);
  const double g = 0.5 + 0.32 * std::sin(2.0 * kPi * (u + 2.0 * v));
  const double b = 0.5 + 0.32 * std::cos(2.0 * kPi * (3.0 * u - v));
  return {r, g, b};
}

// scan texture: the smooth base plus detail bands, so misplacing geometry
// costs photometric error
static Vec3 scan_texture(double u, double v) {
  const Vec3 base = synthetic_texture(u, v);
  const double detail = 0.18 * std::sin(2.0 * kPi * 9.0 * u) * std::sin(2.0 * kPi * 7.0 * v) +
                        0.1 * std::sin(2.0 * kPi * (5.0 * u - 3.0 * v));
  return {std::clamp(base.x + detail, 0.02, 0.98), std::clamp(base.y + detail, 0.02, 0.98),
          std::clamp(base.z - detail, 0.02, 0.98)};
}

ImageF bake_synthetic_texture(int size) {
  ImageF tex(size, size, 3);
  for (int r = 0; r < size; ++r)
    for (int c = 0; c < size; ++c) {
      const Vec3 rgb = synthetic_texture((c + 0.5) / size, (r + 0.5) / size);
      tex.at(r, c, 0) = float(rgb.x);
      tex.at(r, c, 1) = float(rgb.y);
      tex.at(r, c, 2) = float(rgb.z);
    }
  return tex;
}

namespace {

struct Bump {
  Vec3 dir;       // unit direction from the torus center region
  double theta;   // angular center on the major ring
  double phi;     // angular center on the minor ring
  double sigma;
  double weight;
};

TexturedMesh make_scan(const TemplateMesh& templ, const SyntheticConfig& cfg) {
  std::mt19937_64 rng(cfg.seed);
  std::vector<Bump> bumps;
  for (int b = 0; b < cfg.bump_count; ++b) {
    Bump bump;
    bump.theta = 2.0 * kPi * rand_unit(rng);
    bump.phi = 2.0 * kPi * rand_unit(rng);
    bump.sigma = 0.5 + 0.5 * rand_unit(rng);  // radians on the ring angles
    bump.weight = 0.6 + 0.4 * rand_unit(rng);
    bumps.push_back(bump);
  }

  auto angle_diff = [](double a, double b) {
    double d = std::fmod(a - b + 3.0 * kPi, 2.0 * kPi) - kPi;
    return d;
  };

  TexturedMesh scan;
  scan.mesh = templ;
  for (size_t j = 0; j < templ.vertices.size(); ++j) {
    const Vec3& p = templ.vertices[j];
    const double theta = std::atan2(p.y, p.x);
    const double ring = std::sqrt(p.x * p.x + p.y * p.y);
    const double phi = std::atan2(p.z, ring - cfg.radius_major);
    double h = 0.0;
    for (const Bump& b : bumps) {
      const double dt = angle_diff(theta, b.theta);
      const double dp = angle_diff(phi, b.phi);
      h += b.weight * std::exp(-(dt * dt + dp * dp) / (2.0 * b.sigma * b.sigma));
    }
    // saturating profile: broad regions sit well off the template, peaks reach
    // the full amplitude
    const double height = cfg.bump_amplitude * (1.0 - std::exp(-1.4 * h));
    scan.mesh.vertices[j] = templ.vertices[j] + height * templ.vertex_normals[j];
  }
  scan.mesh.vertex_normals = compute_vertex_normals(scan.mesh);
  scan.texture = ImageF(cfg.texture_size, cfg.texture_size, 3);
  for (int r = 0; r < cfg.texture_size; ++r)
    for (int c = 0; c < cfg.texture_size; ++c) {
      const Vec3 rgb =
          scan_texture((c + 0.5) / cfg.texture_size, (r + 0.5) / cfg.texture_size);
      scan.texture.at(r, c, 0) = float(rgb.x);
      scan.texture.at(r, c, 1) = float(rgb.y);
      scan.texture.at(r, c, 2) = float(rgb.z);
    }
  return scan;
}

}  // namespace

MeshRender render_mesh(const TexturedMesh& mesh, const Camera& camera) {
  const int W = camera.width, H = camera.height;
  MeshRender out;
  out.color = ImageD(H, W, 3, 0.0);
  out.depth = ImageD(H, W, 1, std::numeric_limits<double>::infinity());
  out.mask = ImageF(H, W, 1, 0.0f);

  // project vertices
  struct Screen {
    double x, y, z;
    bool behind;
  };
  std::vector<Screen> scr(mesh.mesh.vertices.size());
  for (size_t i = 0; i < mesh.mesh.vertices.size(); ++i) {
    const Vec3 pc = camera.rotation * mesh.mesh.vertices[i] + camera.translation;
    Screen s;
    s.z = pc.z;
    s.behind = pc.z <= 1e-6;
    if (!s.behind) {
      s.x = camera.fx * pc.x / pc.z + camera.cx;
      s.y = camera.fy * pc.y / pc.z + camera.cy;
    } else {
      s.x = s.y = 0;
    }
    scr[i] = s;
  }

  for (size_t fi = 0; fi < mesh.mesh.faces.size(); ++fi) {
    const auto& f = mesh.mesh.faces[fi];
    const Screen &a = scr[f[0]], &b = scr[f[1]], &c = scr[f[2]];
    if (a.behind || b.behind || c.behind) continue;
    const double area2 = (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
    if (area2 == 0.0) continue;

    const auto& uv = mesh.mesh.uv_faces[fi];
    const int c0 = std::max(0, int(std::floor(std::min({a.x, b.x, c.x}) - 0.5)));
    const int c1 = std::min(W - 1, int(std::ceil(std::max({a.x, b.x, c.x}))));
    const int r0 = std::max(0, int(std::floor(std::min({a.y, b.y, c.y}) - 0.5)));
    const int r1 = std::min(H - 1, int(std::ceil(std::max({a.y, b.y, c.y}))));

    for (int r = r0; r <= r1; ++r) {
      const double py = r + 0.5;
      for (int col = c0; col <= c1; ++col) {
        const double px = col + 0.5;
        const double la = ((c.x - b.x) * (py - b.y) - (c.y - b.y) * (px - b.x)) / area2;
        const double lb = ((a.x - c.x) * (py - c.y) - (a.y - c.y) * (px - c.x)) / area2;
        const double lc = 1.0 - la - lb;
        if (la < 0.0 || lb < 0.0 || lc < 0.0) continue;
        const double inv_z = la / a.z + lb / b.z + lc / c.z;
        const double z = 1.0 / inv_z;
        if (z >= out.depth.at(r, col)) continue;
        out.depth.at(r, col) = z;
        out.mask.at(r, col) = 1.0f;
        // perspective-correct UV
        const double wa = la / a.z * z, wb = lb / b.z * z, wc = lc / c.z * z;
        const double u = wa * uv[0].x + wb * uv[1].x + wc * uv[2].x;
        const double v = wa * uv[0].y + wb * uv[1].y + wc * uv[2].y;
        double rgb[3];
        bilinear_sample(mesh.texture, u * mesh.texture.width, v * mesh.texture.height, rgb);
        out.color.at(r, col, 0) = rgb[0];
        out.color.at(r, col, 1) = rgb[1];
        out.color.at(r, col, 2) = rgb[2];
      }
    }
  }
  return out;
}

SyntheticScene make_synthetic_scene(const SyntheticConfig& cfg) {
  SyntheticScene scene;
  scene.template_mesh =
      make_torus_mesh(cfg.radius_major, cfg.radius_minor, cfg.segments_major, cfg.segments_minor);
  scene.scan = make_scan(scene.template_mesh, cfg);

  const double focal = cfg.focal * double(cfg.image_size) / 160.0;
  auto camera_at = [&](double angle) {
    const Vec3 eye = {cfg.camera_distance * std::cos(angle), cfg.camera_distance * std::sin(angle),
                      cfg.camera_elevation};
    return Camera::look_at(eye, {0, 0, 0}, {0, 0, 1}, focal, focal, cfg.image_size,
                           cfg.image_size);
  };

  auto make_view = [&](double angle) {
    View view;
    view.camera = camera_at(angle);
    const MeshRender mr = render_mesh(scene.scan, view.camera);
    view.image = convert<float>(mr.color);
    view.mask = mr.mask;
    return view;
  };

  // input cameras evenly spaced; held-out cameras on the gaps between them
  for (int v = 0; v < cfg.input_views; ++v)
    scene.inputs.views.push_back(make_view(2.0 * kPi * v / cfg.input_views));
  for (int v = 0; v < cfg.heldout_views; ++v)
    scene.heldout.views.push_back(
        make_view(2.0 * kPi * (v + 0.5) / std::max(1, cfg.heldout_views) + 0.35));
  return scene;
}

}  // namespace uvsplat
