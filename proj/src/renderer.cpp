#include "uvsplat/renderer.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace uvsplat {

std::optional<Splat2D> project_gaussian(const Camera& camera, const Vec3& mean, const Mat3& cov3,
                                        const RenderConfig& cfg) {
  const Vec3 t = camera.rotation * mean + camera.translation;
  if (t.z <= cfg.near_depth) return std::nullopt;

  Splat2D s;
  s.depth = t.z;
  s.mean_x = camera.fx * t.x / t.z + camera.cx;
  s.mean_y = camera.fy * t.y / t.z + camera.cy;

  // A = J * W: rows of the screen-space linearization
  const double inv_z = 1.0 / t.z;
  const double j00 = camera.fx * inv_z;
  const double j02 = -camera.fx * t.x * inv_z * inv_z;
  const double j11 = camera.fy * inv_z;
  const double j12 = -camera.fy * t.y * inv_z * inv_z;
  const Vec3 a0 = {j00 * camera.rotation(0, 0) + j02 * camera.rotation(2, 0),
                   j00 * camera.rotation(0, 1) + j02 * camera.rotation(2, 1),
                   j00 * camera.rotation(0, 2) + j02 * camera.rotation(2, 2)};
  const Vec3 a1 = {j11 * camera.rotation(1, 0) + j12 * camera.rotation(2, 0),
                   j11 * camera.rotation(1, 1) + j12 * camera.rotation(2, 1),
                   j11 * camera.rotation(1, 2) + j12 * camera.rotation(2, 2)};
  const Vec3 sa0 = cov3 * a0;
  const Vec3 sa1 = cov3 * a1;
  s.cov00 = dot(a0, sa0) + cfg.blur_floor;
  s.cov01 = dot(a0, sa1);
  s.cov11 = dot(a1, sa1) + cfg.blur_floor;

  const double det = s.cov00 * s.cov11 - s.cov01 * s.cov01;
  if (det <= 0.0) return std::nullopt;  // cannot happen with a positive blur floor
  const double inv_det = 1.0 / det;
  s.conic00 = s.cov11 * inv_det;
  s.conic01 = -s.cov01 * inv_det;
  s.conic11 = s.cov00 * inv_det;

  const double mid = 0.5 * (s.cov00 + s.cov11);
  const double lambda_max = mid + std::sqrt(std::max(0.0, mid * mid - det));
  s.radius = 3.0 * std::sqrt(lambda_max);
  return s;
}

namespace {

struct TileGrid {
  int tiles_x = 0, tiles_y = 0;
  std::vector<std::vector<int>> lists;  // per tile, indices into the sorted splat array
};

std::vector<Splat2D> prepare_sorted_splats(const GaussianCloud& cloud, const Camera& camera,
                                           const RenderConfig& cfg) {
  std::vector<Splat2D> splats;
  splats.reserve(cloud.size());
  for (size_t i = 0; i < cloud.size(); ++i) {
    const Mat3 cov3 = covariance_matrix(cloud.quats[i], cloud.scales[i]);
    auto s = project_gaussian(camera, cloud.means[i], cov3, cfg);
    if (!s) continue;
    s->color = cloud.colors[i];
    s->opacity = cloud.opacities[i];
    s->source = int(i);
    splats.push_back(*s);
  }
  // global front-to-back order; ties broken by source index for determinism
  std::sort(splats.begin(), splats.end(), [](const Splat2D& a, const Splat2D& b) {
    if (a.depth != b.depth) return a.depth < b.depth;
    return a.source < b.source;
  });
  return splats;
}

TileGrid bin_splats(const std::vector<Splat2D>& splats, int width, int height,
                    const RenderConfig& cfg) {
  TileGrid grid;
  grid.tiles_x = (width + cfg.tile_size - 1) / cfg.tile_size;
  grid.tiles_y = (height + cfg.tile_size - 1) / cfg.tile_size;
  grid.lists.assign(size_t(grid.tiles_x) * grid.tiles_y, {});
  for (size_t k = 0; k < splats.size(); ++k) {
    const Splat2D& s = splats[k];
    // pixel centers sit at half-integers; pad one pixel to stay conservative
    const int c0 = std::max(0, int(std::floor(s.mean_x - s.radius - 0.5)) - 1);
    const int c1 = std::min(width - 1, int(std::ceil(s.mean_x + s.radius - 0.5)) + 1);
    const int r0 = std::max(0, int(std::floor(s.mean_y - s.radius - 0.5)) - 1);
    const int r1 = std::min(height - 1, int(std::ceil(s.mean_y + s.radius - 0.5)) + 1);
    if (c0 > c1 || r0 > r1) continue;
    for (int tr = r0 / cfg.tile_size; tr <= r1 / cfg.tile_size; ++tr)
      for (int tc = c0 / cfg.tile_size; tc <= c1 / cfg.tile_size; ++tc)
        grid.lists[size_t(tr) * grid.tiles_x + tc].push_back(int(k));
  }
  return grid;
}

// alpha of one splat at a pixel center; false when the contribution falls
// outside the shared support/alpha cutoffs
inline bool splat_alpha(const Splat2D& s, double px, double py, double maha_cutoff,
                        double alpha_cutoff, double* alpha_out) {
  const double dx = px - s.mean_x;
  const double dy = py - s.mean_y;
  const double maha = s.conic00 * dx * dx + 2.0 * s.conic01 * dx * dy + s.conic11 * dy * dy;
  if (maha > maha_cutoff) return false;
  const double alpha = s.opacity * std::exp(-0.5 * maha);
  if (alpha < alpha_cutoff) return false;
  *alpha_out = alpha;
  return true;
}

}  // namespace

RenderOutput render(const GaussianCloud& cloud, const Camera& camera, const RenderConfig& cfg,
                    RenderStats* stats) {
  const int W = camera.width, H = camera.height;
  RenderOutput out;
  out.color = ImageD(H, W, 3, 0.0);
  out.alpha = ImageD(H, W, 1, 0.0);
  out.blend_counts = ImageI32(H, W, 1, 0);

  const std::vector<Splat2D> splats = prepare_sorted_splats(cloud, camera, cfg);
  const TileGrid grid = bin_splats(splats, W, H, cfg);

  if (stats) {
    stats->tiles_x = grid.tiles_x;
    stats->tiles_y = grid.tiles_y;
    stats->splats_per_tile.assign(grid.lists.size(), 0);
    stats->blends_per_tile.assign(grid.lists.size(), 0);
    for (size_t t = 0; t < grid.lists.size(); ++t)
      stats->splats_per_tile[t] = int(grid.lists[t].size());
  }

  const int64_t tile_count = int64_t(grid.lists.size());
  parallel_chunks(tile_count, 1, [&](int64_t, int64_t tile_begin, int64_t tile_end) {
    for (int64_t tile = tile_begin; tile < tile_end; ++tile) {
      const auto& list = grid.lists[tile];
      const int tr = int(tile) / grid.tiles_x;
      const int tc = int(tile) % grid.tiles_x;
      const int r0 = tr * cfg.tile_size, r1 = std::min(H, r0 + cfg.tile_size);
      const int c0 = tc * cfg.tile_size, c1 = std::min(W, c0 + cfg.tile_size);
      int64_t blends = 0;
      for (int r = r0; r < r1; ++r) {
        const double py = r + 0.5;
        for (int c = c0; c < c1; ++c) {
          const double px = c + 0.5;
          double T = 1.0;
          double rgb[3] = {0, 0, 0};
          int count = 0;
          for (const int k : list) {
            const Splat2D& s = splats[k];
            double alpha;
            if (!splat_alpha(s, px, py, cfg.maha_cutoff, cfg.alpha_cutoff, &alpha)) continue;
            rgb[0] += T * alpha * s.color.x;
            rgb[1] += T * alpha * s.color.y;
            rgb[2] += T * alpha * s.color.z;
            T *= 1.0 - alpha;
            ++count;
            if (T < cfg.transmittance_cutoff) break;
          }
          out.color.at(r, c, 0) = rgb[0];
          out.color.at(r, c, 1) = rgb[1];
          out.color.at(r, c, 2) = rgb[2];
          out.alpha.at(r, c) = 1.0 - T;
          out.blend_counts.at(r, c) = count;
          blends += count;
        }
      }
      if (stats) stats->blends_per_tile[tile] = blends;
    }
  });
  return out;
}

namespace {

// per-splat upstream gradients accumulated from the 2D compositing stage
struct SplatGrad {
  double mx = 0, my = 0;
  double q00 = 0, q01 = 0, q11 = 0;  // conic
  double opacity = 0;                // activated opacity
  double color[3] = {0, 0, 0};
};

struct Contribution {
  int entry;     // index into the tile list
  double alpha;
  double T;      // transmittance in front of this contribution
};

// chain from the 2D stage through projection, covariance and activations into
// raw parameter gradients
void splat_geometry_backward(const GaussianCloud& cloud, const Camera& camera,
                             const Splat2D& s, const SplatGrad& g, CloudGradients& out) {
  if (g.mx == 0 && g.my == 0 && g.q00 == 0 && g.q01 == 0 && g.q11 == 0 && g.opacity == 0 &&
      g.color[0] == 0 && g.color[1] == 0 && g.color[2] == 0)
    return;
  const int i = s.source;
  out.colors[i] += {g.color[0], g.color[1], g.color[2]};
  // opacity: alpha = sigmoid(raw) upstream of the compositing stage
  const double opac = cloud.opacities[i];
  out.opacities_raw[i] += g.opacity * opac * (1.0 - opac);

  // recompute forward intermediates
  const Vec3 t = camera.rotation * cloud.means[i] + camera.translation;
  const double inv_z = 1.0 / t.z;
  const double j00 = camera.fx * inv_z;
  const double j02 = -camera.fx * t.x * inv_z * inv_z;
  const double j11 = camera.fy * inv_z;
  const double j12 = -camera.fy * t.y * inv_z * inv_z;
  const Vec3 a0 = {j00 * camera.rotation(0, 0) + j02 * camera.rotation(2, 0),
                   j00 * camera.rotation(0, 1) + j02 * camera.rotation(2, 1),
                   j00 * camera.rotation(0, 2) + j02 * camera.rotation(2, 2)};
  const Vec3 a1 = {j11 * camera.rotation(1, 0) + j12 * camera.rotation(2, 0),
                   j11 * camera.rotation(1, 1) + j12 * camera.rotation(2, 1),
                   j11 * camera.rotation(1, 2) + j12 * camera.rotation(2, 2)};

  const Quat& q = cloud.quats[i];
  const Mat3 R = quat_to_rotation(q);
  const Vec3& sc = cloud.scales[i];
  Mat3 M = R;
  for (int r = 0; r < 3; ++r) {
    M(r, 0) *= sc.x;
    M(r, 1) *= sc.y;
    M(r, 2) *= sc.z;
  }
  Mat3 sig = Mat3::zero();
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) {
      double v = 0;
      for (int k = 0; k < 3; ++k) v += M(r, k) * M(c, k);
      sig(r, c) = v;
    }

  // conic -> 2D covariance (a, b, c entries with b off-diagonal)
  const double a = s.cov00, b = s.cov01, c = s.cov11;
  const double det = a * c - b * b;
  const double inv_det2 = 1.0 / (det * det);
  const double da_cov =
      (g.q00 * (-c * c) + g.q01 * (b * c) + g.q11 * (-b * b)) * inv_det2;
  const double db_cov =
      (g.q00 * (2 * b * c) + g.q01 * (-(det + 2 * b * b)) + g.q11 * (2 * a * b)) * inv_det2;
  const double dc_cov =
      (g.q00 * (-b * b) + g.q01 * (a * b) + g.q11 * (-a * a)) * inv_det2;

  // cov2 -> Sigma3 (as independent entries) and the linearization rows
  const Vec3 sig_a0 = sig * a0;
  const Vec3 sig_a1 = sig * a1;
  Mat3 dSig = Mat3::zero();
  for (int r = 0; r < 3; ++r)
    for (int cc = 0; cc < 3; ++cc)
      dSig(r, cc) = da_cov * a0[r] * a0[cc] + db_cov * a0[r] * a1[cc] + dc_cov * a1[r] * a1[cc];
  const Vec3 dA0 = 2.0 * da_cov * sig_a0 + db_cov * sig_a1;
  const Vec3 dA1 = 2.0 * dc_cov * sig_a1 + db_cov * sig_a0;

  // Sigma3 = M M^T
  Mat3 dM = Mat3::zero();
  for (int r = 0; r < 3; ++r)
    for (int k = 0; k < 3; ++k) {
      double v = 0;
      for (int cc = 0; cc < 3; ++cc) v += (dSig(r, cc) + dSig(cc, r)) * M(cc, k);
      dM(r, k) = v;
    }

  // M = R diag(s)
  Vec3 ds = {0, 0, 0};
  Mat3 dR = Mat3::zero();
  for (int r = 0; r < 3; ++r) {
    dR(r, 0) = dM(r, 0) * sc.x;
    dR(r, 1) = dM(r, 1) * sc.y;
    dR(r, 2) = dM(r, 2) * sc.z;
    ds.x += dM(r, 0) * R(r, 0);
    ds.y += dM(r, 1) * R(r, 1);
    ds.z += dM(r, 2) * R(r, 2);
  }

  // rotation -> unit quaternion
  const double w = q.w, x = q.x, y = q.y, z = q.z;
  double du_w = dR(0, 1) * (-2 * z) + dR(0, 2) * (2 * y) + dR(1, 0) * (2 * z) +
                dR(1, 2) * (-2 * x) + dR(2, 0) * (-2 * y) + dR(2, 1) * (2 * x);
  double du_x = dR(0, 1) * (2 * y) + dR(0, 2) * (2 * z) + dR(1, 0) * (2 * y) +
                dR(1, 1) * (-4 * x) + dR(1, 2) * (-2 * w) + dR(2, 0) * (2 * z) +
                dR(2, 1) * (2 * w) + dR(2, 2) * (-4 * x);
  double du_y = dR(0, 0) * (-4 * y) + dR(0, 1) * (2 * x) + dR(0, 2) * (2 * w) +
                dR(1, 0) * (2 * x) + dR(1, 2) * (2 * z) + dR(2, 0) * (-2 * w) +
                dR(2, 1) * (2 * z) + dR(2, 2) * (-4 * y);
  double du_z = dR(0, 0) * (-4 * z) + dR(0, 1) * (-2 * w) + dR(0, 2) * (2 * x) +
                dR(1, 0) * (2 * w) + dR(1, 1) * (-4 * z) + dR(1, 2) * (2 * y) +
                dR(2, 0) * (2 * x) + dR(2, 1) * (2 * y);

  // unit quaternion -> raw quaternion (normalization Jacobian)
  const Quat& qr = cloud.quats_raw[i];
  const double qn = qr.norm();
  const double udotdu = w * du_w + x * du_x + y * du_y + z * du_z;
  out.quats_raw[i].w += (du_w - w * udotdu) / qn;
  out.quats_raw[i].x += (du_x - x * udotdu) / qn;
  out.quats_raw[i].y += (du_y - y * udotdu) / qn;
  out.quats_raw[i].z += (du_z - z * udotdu) / qn;

  // scale -> raw scale through softplus + clamp (zero slope at the clamp)
  const Vec3& sraw = cloud.scales_raw[i];
  const double limit = cloud.scale_limit;
  out.scales_raw[i] += {softplus(sraw.x) < limit ? ds.x * sigmoid(sraw.x) : 0.0,
                        softplus(sraw.y) < limit ? ds.y * sigmoid(sraw.y) : 0.0,
                        softplus(sraw.z) < limit ? ds.z * sigmoid(sraw.z) : 0.0};

  // screen mean and Jacobian entries -> camera-space position
  const double dJ00 = dot(dA0, camera.rotation.row(0));
  const double dJ02 = dot(dA0, camera.rotation.row(2));
  const double dJ11 = dot(dA1, camera.rotation.row(1));
  const double dJ12 = dot(dA1, camera.rotation.row(2));

  Vec3 dt;
  dt.x = g.mx * (camera.fx * inv_z) + dJ02 * (-camera.fx * inv_z * inv_z);
  dt.y = g.my * (camera.fy * inv_z) + dJ12 * (-camera.fy * inv_z * inv_z);
  dt.z = g.mx * (-camera.fx * t.x * inv_z * inv_z) + g.my * (-camera.fy * t.y * inv_z * inv_z) +
         dJ00 * (-camera.fx * inv_z * inv_z) + dJ11 * (-camera.fy * inv_z * inv_z) +
         dJ02 * (2.0 * camera.fx * t.x * inv_z * inv_z * inv_z) +
         dJ12 * (2.0 * camera.fy * t.y * inv_z * inv_z * inv_z);
  out.means[i] += camera.rotation.transpose() * dt;
}

}  // namespace

CloudGradients render_backward(const GaussianCloud& cloud, const Camera& camera,
                               const ImageD& grad_color, const ImageD& grad_alpha,
                               const RenderConfig& cfg) {
  require(cloud.has_raw(), ErrorCode::invalid_config,
          "render_backward needs a cloud with raw parameters");
  const int W = camera.width, H = camera.height;
  require(grad_color.height == H && grad_color.width == W && grad_color.channels == 3,
          ErrorCode::shape_mismatch, "grad_color shape mismatch");
  require(grad_alpha.height == H && grad_alpha.width == W && grad_alpha.channels == 1,
          ErrorCode::shape_mismatch, "grad_alpha shape mismatch");

  CloudGradients out;
  out.resize(cloud.size());

  const std::vector<Splat2D> splats = prepare_sorted_splats(cloud, camera, cfg);
  const TileGrid grid = bin_splats(splats, W, H, cfg);
  const int64_t tile_count = int64_t(grid.lists.size());

  // per-tile accumulators, merged in tile order afterwards so the result does
  // not depend on the thread count
  std::vector<std::vector<SplatGrad>> tile_grads(grid.lists.size());

  parallel_chunks(tile_count, 1, [&](int64_t, int64_t tile_begin, int64_t tile_end) {
    std::vector<Contribution> stack;
    for (int64_t tile = tile_begin; tile < tile_end; ++tile) {
      const auto& list = grid.lists[tile];
      if (list.empty()) continue;
      auto& grads = tile_grads[tile];
      grads.assign(list.size(), SplatGrad{});

      const int tr = int(tile) / grid.tiles_x;
      const int tc = int(tile) % grid.tiles_x;
      const int r0 = tr * cfg.tile_size, r1 = std::min(H, r0 + cfg.tile_size);
      const int c0 = tc * cfg.tile_size, c1 = std::min(W, c0 + cfg.tile_size);

      for (int r = r0; r < r1; ++r) {
        const double py = r + 0.5;
        for (int c = c0; c < c1; ++c) {
          const double px = c + 0.5;
          const double gc[3] = {grad_color.at(r, c, 0), grad_color.at(r, c, 1),
                                grad_color.at(r, c, 2)};
          const double ga = grad_alpha.at(r, c);
          if (gc[0] == 0.0 && gc[1] == 0.0 && gc[2] == 0.0 && ga == 0.0) continue;

          // forward replay
          stack.clear();
          double T = 1.0;
          for (size_t e = 0; e < list.size(); ++e) {
            const Splat2D& s = splats[list[e]];
            double alpha;
            if (!splat_alpha(s, px, py, cfg.maha_cutoff, cfg.alpha_cutoff, &alpha)) continue;
            stack.push_back({int(e), alpha, T});
            T *= 1.0 - alpha;
            if (T < cfg.transmittance_cutoff) break;
          }

          // back-to-front: suffix_color[k] = sum_{j>k} c_j a_j prod_{k<l<j}(1-a_l),
          // suffix_T = prod_{j>k} (1-a_j); both avoid dividing by (1-alpha)
          double suffix_color[3] = {0, 0, 0};
          double suffix_T = 1.0;
          for (int k = int(stack.size()) - 1; k >= 0; --k) {
            const Contribution& ct = stack[size_t(k)];
            const Splat2D& s = splats[list[ct.entry]];
            SplatGrad& sg = grads[size_t(ct.entry)];

            const double d_alpha =
                (gc[0] * (s.color.x - suffix_color[0]) + gc[1] * (s.color.y - suffix_color[1]) +
                 gc[2] * (s.color.z - suffix_color[2])) *
                    ct.T +
                ga * ct.T * suffix_T;

            const double at = ct.alpha * ct.T;
            sg.color[0] += gc[0] * at;
            sg.color[1] += gc[1] * at;
            sg.color[2] += gc[2] * at;

            const double G = ct.alpha / s.opacity;  // exp(-maha/2)
            sg.opacity += d_alpha * G;
            const double d_maha = d_alpha * s.opacity * G * -0.5;
            const double dx = px - s.mean_x;
            const double dy = py - s.mean_y;
            sg.q00 += d_maha * dx * dx;
            sg.q01 += d_maha * 2.0 * dx * dy;
            sg.q11 += d_maha * dy * dy;
            const double d_dx = d_maha * (2.0 * s.conic00 * dx + 2.0 * s.conic01 * dy);
            const double d_dy = d_maha * (2.0 * s.conic01 * dx + 2.0 * s.conic11 * dy);
            sg.mx -= d_dx;
            sg.my -= d_dy;

            suffix_color[0] = ct.alpha * s.color.x + (1.0 - ct.alpha) * suffix_color[0];
            suffix_color[1] = ct.alpha * s.color.y + (1.0 - ct.alpha) * suffix_color[1];
            suffix_color[2] = ct.alpha * s.color.z + (1.0 - ct.alpha) * suffix_color[2];
            suffix_T *= 1.0 - ct.alpha;
          }
        }
      }
    }
  });

  // deterministic merge into per-splat accumulators
  std::vector<SplatGrad> merged(splats.size());
  for (size_t tile = 0; tile < grid.lists.size(); ++tile) {
    const auto& list = grid.lists[tile];
    const auto& grads = tile_grads[tile];
    if (grads.empty()) continue;
    for (size_t e = 0; e < list.size(); ++e) {
      SplatGrad& dst = merged[size_t(list[e])];
      const SplatGrad& src = grads[e];
      dst.mx += src.mx;
      dst.my += src.my;
      dst.q00 += src.q00;
      dst.q01 += src.q01;
      dst.q11 += src.q11;
      dst.opacity += src.opacity;
      dst.color[0] += src.color[0];
      dst.color[1] += src.color[1];
      dst.color[2] += src.color[2];
    }
  }

  // geometry chain is independent per splat
  parallel_for(int64_t(splats.size()), [&](int64_t k) {
    splat_geometry_backward(cloud, camera, splats[size_t(k)], merged[size_t(k)], out);
  });
  return out;
}

std::string RenderStats::to_json() const {
  std::ostringstream os;
  os << "{\"tiles_x\":" << tiles_x << ",\"tiles_y\":" << tiles_y << ",\"splats_per_tile\":[";
  for (size_t i = 0; i < splats_per_tile.size(); ++i)
    os << (i ? "," : "") << splats_per_tile[i];
  os << "],\"blends_per_tile\":[";
  for (size_t i = 0; i < blends_per_tile.size(); ++i)
    os << (i ? "," : "") << blends_per_tile[i];
  os << "]}";
  return os.str();
}

}  // namespace uvsplat
