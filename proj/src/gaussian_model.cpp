#include "uvsplat/gaussian_model.hpp"

#include <algorithm>

namespace uvsplat {

Mat3 quat_to_rotation(const Quat& q_raw) {
  const double n = q_raw.norm();
  require(n > 1e-12, ErrorCode::degenerate_quaternion, "quaternion norm underflow");
  const double w = q_raw.w / n, x = q_raw.x / n, y = q_raw.y / n, z = q_raw.z / n;
  Mat3 R;
  R(0, 0) = 1 - 2 * (y * y + z * z);
  R(0, 1) = 2 * (x * y - w * z);
  R(0, 2) = 2 * (x * z + w * y);
  R(1, 0) = 2 * (x * y + w * z);
  R(1, 1) = 1 - 2 * (x * x + z * z);
  R(1, 2) = 2 * (y * z - w * x);
  R(2, 0) = 2 * (x * z - w * y);
  R(2, 1) = 2 * (y * z + w * x);
  R(2, 2) = 1 - 2 * (x * x + y * y);
  return R;
}

Mat3 covariance_matrix(const Quat& q_unit, const Vec3& scale) {
  const Mat3 R = quat_to_rotation(q_unit);
  // M = R diag(s); Sigma = M M^T, symmetric by construction
  Mat3 M = R;
  for (int r = 0; r < 3; ++r) {
    M(r, 0) *= scale.x;
    M(r, 1) *= scale.y;
    M(r, 2) *= scale.z;
  }
  Mat3 sigma = Mat3::zero();
  for (int i = 0; i < 3; ++i)
    for (int j = i; j < 3; ++j) {
      double v = 0;
      for (int k = 0; k < 3; ++k) v += M(i, k) * M(j, k);
      sigma(i, j) = v;
      sigma(j, i) = v;
    }
  return sigma;
}

void ParamMapSet::validate() const {
  require(scaffold_count >= 0 && int(levels.size()) == scaffold_count + 1,
          ErrorCode::incomplete_maps, "expected " + std::to_string(scaffold_count + 1) +
                                          " map levels, have " + std::to_string(levels.size()));
  require(scale_limit > 0.0, ErrorCode::invalid_config, "scale limit must be > 0");
  const int H = uv_mask.height, W = uv_mask.width;
  require(H > 0 && W > 0 && uv_mask.channels == 1, ErrorCode::incomplete_maps, "bad uv_mask");
  for (size_t i = 0; i < levels.size(); ++i) {
    const Level& L = levels[i];
    auto check = [&](const ImageF& img, int ch, const char* name) {
      require(img.height == H && img.width == W && img.channels == ch, ErrorCode::incomplete_maps,
              "level " + std::to_string(i) + ": bad or missing " + name + " map");
    };
    check(L.position, 3, "position");
    check(L.color, 3, "color");
    check(L.color_residual, 3, "color_residual");
    check(L.quat_raw, 4, "quat_raw");
    check(L.scale_raw, 3, "scale_raw");
    check(L.opacity_raw, 1, "opacity_raw");
    check(L.observed, 1, "observed");
  }
}

ParamMapSet init_param_maps(const UvGeometryMaps& geo,
                            const std::vector<AggregatedColorMap>& colors) {
  require(int(colors.size()) == geo.scaffold_count + 1, ErrorCode::incomplete_maps,
          "need one color map per scaffold level");
  const int H = geo.height(), W = geo.width();

  ParamMapSet maps;
  maps.scaffold_count = geo.scaffold_count;
  maps.scale_limit = geo.offset_step;
  maps.uv_mask = geo.uv_mask;
  maps.levels.resize(geo.scaffold_count + 1);

  const float scale_init = float(inv_softplus(geo.offset_step / 4.0));
  const float opacity_seen = float(logit(0.9));
  const float opacity_fallback = float(logit(0.1));

  for (int li = 0; li <= geo.scaffold_count; ++li) {
    auto& L = maps.levels[li];
    L.position = geo.position_maps[li];
    L.color = colors[li].color;
    L.color_residual = ImageF(H, W, 3, 0.0f);
    L.observed = colors[li].observed;
    L.quat_raw = ImageF(H, W, 4, 0.0f);
    L.scale_raw = ImageF(H, W, 3, 0.0f);
    L.opacity_raw = ImageF(H, W, 1, 0.0f);
    for (const auto& [r, c] : geo.foreground) {
      L.quat_raw.at(r, c, 0) = 1.0f;  // identity rotation
      for (int k = 0; k < 3; ++k) L.scale_raw.at(r, c, k) = scale_init;
      L.opacity_raw.at(r, c) =
          L.observed.at(r, c) != 0.0f ? opacity_seen : opacity_fallback;
    }
  }
  return maps;
}

GaussianCloud GaussianCloud::from_raw(std::vector<Vec3> means, std::vector<Quat> quats_raw,
                                      std::vector<Vec3> scales_raw,
                                      std::vector<double> opacities_raw, std::vector<Vec3> colors,
                                      double scale_limit) {
  const size_t n = means.size();
  require(quats_raw.size() == n && scales_raw.size() == n && opacities_raw.size() == n &&
              colors.size() == n,
          ErrorCode::shape_mismatch, "raw parameter arrays must share one length");
  GaussianCloud cloud;
  cloud.scale_limit = scale_limit;
  cloud.means = std::move(means);
  cloud.quats_raw = std::move(quats_raw);
  cloud.scales_raw = std::move(scales_raw);
  cloud.opacities_raw = std::move(opacities_raw);
  cloud.colors = std::move(colors);
  cloud.quats.resize(n);
  cloud.scales.resize(n);
  cloud.opacities.resize(n);
  for (size_t i = 0; i < n; ++i) {
    const Quat& q = cloud.quats_raw[i];
    const double qn = q.norm();
    require(qn > 1e-12, ErrorCode::degenerate_quaternion,
            "gaussian " + std::to_string(i) + ": quaternion norm underflow");
    cloud.quats[i] = {q.w / qn, q.x / qn, q.y / qn, q.z / qn};
    cloud.scales[i] = activate_scale(cloud.scales_raw[i], scale_limit);
    cloud.opacities[i] = activate_opacity(cloud.opacities_raw[i]);
  }
  return cloud;
}

GaussianCloud assemble_cloud(const ParamMapSet& maps) {
  maps.validate();
  const int H = maps.height(), W = maps.width();

  std::vector<std::pair<int, int>> fg;
  for (int r = 0; r < H; ++r)
    for (int c = 0; c < W; ++c)
      if (maps.uv_mask.at(r, c) != 0.0f) fg.emplace_back(r, c);

  const size_t n = fg.size() * maps.levels.size();
  std::vector<Vec3> means, scales_raw, colors;
  std::vector<Quat> quats_raw;
  std::vector<double> opacities_raw;
  std::vector<GaussianSource> sources;
  means.reserve(n);
  quats_raw.reserve(n);
  scales_raw.reserve(n);
  opacities_raw.reserve(n);
  colors.reserve(n);
  sources.reserve(n);

  for (int li = 0; li < int(maps.levels.size()); ++li) {
    const auto& L = maps.levels[li];
    for (const auto& [r, c] : fg) {
      means.push_back({L.position.at(r, c, 0), L.position.at(r, c, 1), L.position.at(r, c, 2)});
      quats_raw.push_back({L.quat_raw.at(r, c, 0), L.quat_raw.at(r, c, 1), L.quat_raw.at(r, c, 2),
                           L.quat_raw.at(r, c, 3)});
      scales_raw.push_back({L.scale_raw.at(r, c, 0), L.scale_raw.at(r, c, 1),
                            L.scale_raw.at(r, c, 2)});
      opacities_raw.push_back(L.opacity_raw.at(r, c));
      colors.push_back(
          {std::clamp(double(L.color.at(r, c, 0)) + double(L.color_residual.at(r, c, 0)), 0.0, 1.0),
           std::clamp(double(L.color.at(r, c, 1)) + double(L.color_residual.at(r, c, 1)), 0.0, 1.0),
           std::clamp(double(L.color.at(r, c, 2)) + double(L.color_residual.at(r, c, 2)), 0.0,
                      1.0)});
      sources.push_back({li, r, c});
    }
  }

  GaussianCloud cloud =
      GaussianCloud::from_raw(std::move(means), std::move(quats_raw), std::move(scales_raw),
                              std::move(opacities_raw), std::move(colors), maps.scale_limit);
  cloud.sources = std::move(sources);
  return cloud;
}

}  // namespace uvsplat
