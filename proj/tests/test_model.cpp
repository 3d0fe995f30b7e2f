#include "doctest.h"

#include <random>

#include "test_support.hpp"
#include "uvsplat/gaussian_model.hpp"
#include "uvsplat/scaffold.hpp"

using namespace uvsplat;
using test::urand;

TEST_CASE("activate_scale: softplus asymptotes and clamp") {
  const Vec3 tiny = activate_scale({-20, -20, -20}, 0.01);
  CHECK(tiny.x > 0.0);
  CHECK(tiny.x == doctest::Approx(2.061e-9).epsilon(1e-3));
  const Vec3 capped = activate_scale({20, 20, 20}, 0.01);
  CHECK(capped.x == 0.01);
  CHECK(capped.y == 0.01);
  CHECK(capped.z == 0.01);
  // softplus(0) = ln 2 > 0.01, so zero raw also clamps
  const Vec3 zero = activate_scale({0, 0, 0}, 0.01);
  CHECK(softplus(0.0) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(zero.x == 0.01);
}

TEST_CASE("activate_scale: below the clamp it is exactly softplus") {
  const double limit = 10.0;
  for (double raw : {-3.0, -1.0, 0.0, 1.0, 2.0}) {
    const Vec3 s = activate_scale({raw, raw, raw}, limit);
    CHECK(s.x == doctest::Approx(std::log1p(std::exp(raw))).epsilon(1e-12));
  }
}

TEST_CASE("inv_softplus inverts softplus") {
  for (double y : {1e-4, 0.0025, 0.01, 0.5, 3.0})
    CHECK(softplus(inv_softplus(y)) == doctest::Approx(y).epsilon(1e-10));
}

TEST_CASE("activate_opacity: sigmoid midpoint, asymptote, symmetry") {
  CHECK(activate_opacity(0.0) == 0.5);
  CHECK(activate_opacity(50.0) >= 1.0 - 1e-20);
  std::mt19937_64 rng(5);
  for (int i = 0; i < 100; ++i) {
    const double x = urand(rng, -10, 10);
    CHECK(std::abs(activate_opacity(-x) - (1.0 - activate_opacity(x))) < 1e-12);
  }
}

TEST_CASE("quat_to_rotation: identity and quarter turn") {
  const Mat3 I = quat_to_rotation({1, 0, 0, 0});
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) CHECK(I(r, c) == doctest::Approx(r == c ? 1.0 : 0.0));

  const double s = std::sqrt(0.5);
  const Mat3 Rz = quat_to_rotation({s, 0, 0, s});  // 90 degrees about z
  const Vec3 mapped = Rz * Vec3{1, 0, 0};
  CHECK(mapped.x == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(mapped.y == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(mapped.z == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("quat_to_rotation: random quats give orthonormal det-1 matrices") {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 200; ++i) {
    const Quat q{urand(rng, -2, 2), urand(rng, -2, 2), urand(rng, -2, 2), urand(rng, -2, 2)};
    if (q.norm() < 1e-6) continue;
    const Mat3 R = quat_to_rotation(q);
    const Mat3 rtr = R.transpose() * R;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c)
        CHECK(std::abs(rtr(r, c) - (r == c ? 1.0 : 0.0)) < 1e-9);
    CHECK(std::abs(R.det() - 1.0) < 1e-9);
  }
  CHECK_THROWS_AS(quat_to_rotation({0, 0, 0, 0}), Error);
}

TEST_CASE("covariance: axis-aligned and rotated analytic cases") {
  const Mat3 axis = covariance_matrix({1, 0, 0, 0}, {1, 2, 3});
  CHECK(axis(0, 0) == doctest::Approx(1.0));
  CHECK(axis(1, 1) == doctest::Approx(4.0));
  CHECK(axis(2, 2) == doctest::Approx(9.0));
  CHECK(axis(0, 1) == doctest::Approx(0.0));

  const double s = std::sqrt(0.5);
  const Mat3 rot = covariance_matrix({s, 0, 0, s}, {2, 1, 1});  // swap x/y variance
  CHECK(rot(0, 0) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(rot(1, 1) == doctest::Approx(4.0).epsilon(1e-9));
  CHECK(rot(2, 2) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("covariance: eigenvalues are the squared scales") {
  std::mt19937_64 rng(9);
  for (int i = 0; i < 50; ++i) {
    Quat q{urand(rng, -1, 1), urand(rng, -1, 1), urand(rng, -1, 1), urand(rng, -1, 1)};
    if (q.norm() < 1e-3) q = {1, 0, 0, 0};
    const Vec3 s = {urand(rng, 0.1, 2.0), urand(rng, 0.1, 2.0), urand(rng, 0.1, 2.0)};
    const Mat3 sigma = covariance_matrix(q, s);

    // oracle: characteristic polynomial evaluated at each s_k^2 must vanish
    for (const double lam : {s.x * s.x, s.y * s.y, s.z * s.z}) {
      Mat3 shifted = sigma;
      for (int d = 0; d < 3; ++d) shifted(d, d) -= lam;
      CHECK(std::abs(shifted.det()) < 1e-9);
    }
    // symmetry
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) CHECK(sigma(r, c) == sigma(c, r));
  }
}

namespace {

ParamMapSet tiny_maps(int fg_texels, int S, double d) {
  // 4x4 mask with fg_texels foreground texels in row-major order
  ParamMapSet maps;
  maps.scaffold_count = S;
  maps.scale_limit = d;
  maps.uv_mask = ImageF(4, 4, 1, 0.0f);
  for (int i = 0; i < fg_texels; ++i) maps.uv_mask.at(i / 4, i % 4) = 1.0f;
  maps.levels.resize(S + 1);
  for (int li = 0; li <= S; ++li) {
    auto& L = maps.levels[li];
    L.position = ImageF(4, 4, 3, 0.0f);
    L.color = ImageF(4, 4, 3, 0.5f);
    L.color_residual = ImageF(4, 4, 3, 0.0f);
    L.quat_raw = ImageF(4, 4, 4, 0.0f);
    L.scale_raw = ImageF(4, 4, 3, -3.0f);
    L.opacity_raw = ImageF(4, 4, 1, 0.0f);
    L.observed = ImageF(4, 4, 1, 1.0f);
    for (int r = 0; r < 4; ++r)
      for (int c = 0; c < 4; ++c) {
        L.quat_raw.at(r, c, 0) = 1.0f;
        L.position.at(r, c, 2) = float(li) * float(d);
      }
  }
  return maps;
}

}  // namespace

TEST_CASE("assemble_cloud: one gaussian per level per foreground texel") {
  const ParamMapSet maps = tiny_maps(1, 4, 0.01);
  const GaussianCloud cloud = assemble_cloud(maps);
  CHECK(cloud.size() == 5);  // (S+1) x 1
  for (size_t g = 0; g < cloud.size(); ++g) {
    CHECK(cloud.sources[g].level == int(g));
    CHECK(cloud.sources[g].row == 0);
    CHECK(cloud.sources[g].col == 0);
  }
}

TEST_CASE("assemble_cloud: empty mask gives an empty cloud") {
  const ParamMapSet maps = tiny_maps(0, 2, 0.01);
  const GaussianCloud cloud = assemble_cloud(maps);
  CHECK(cloud.size() == 0);
}

TEST_CASE("assemble_cloud: emitted scales confined, opacities in (0,1)") {
  std::mt19937_64 rng(13);
  ParamMapSet maps = tiny_maps(16, 3, 0.01);
  for (auto& L : maps.levels) {
    for (auto& v : L.scale_raw.data) v = float(urand(rng, -8.0, 8.0));
    for (auto& v : L.opacity_raw.data) v = float(urand(rng, -9.0, 9.0));
    for (auto& v : L.quat_raw.data) v = float(urand(rng, -1.0, 1.0));
    for (int r = 0; r < 4; ++r)
      for (int c = 0; c < 4; ++c)
        if (std::abs(L.quat_raw.at(r, c, 0)) < 0.2f) L.quat_raw.at(r, c, 0) = 1.0f;
  }
  const GaussianCloud cloud = assemble_cloud(maps);
  CHECK(cloud.size() == 16 * 4);
  for (size_t g = 0; g < cloud.size(); ++g) {
    CHECK(cloud.scales[g].x > 0.0);
    CHECK(cloud.scales[g].x <= 0.01);
    CHECK(cloud.scales[g].y <= 0.01);
    CHECK(cloud.scales[g].z <= 0.01);
    CHECK(cloud.opacities[g] > 0.0);
    CHECK(cloud.opacities[g] < 1.0);
    CHECK(cloud.quats[g].norm() == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("assemble_cloud: editing one texel changes exactly one gaussian") {
  ParamMapSet maps = tiny_maps(8, 2, 0.01);
  const GaussianCloud before = assemble_cloud(maps);
  maps.levels[1].opacity_raw.at(0, 3) = 2.5f;  // texel #3, level 1
  const GaussianCloud after = assemble_cloud(maps);
  int changed = 0;
  for (size_t g = 0; g < before.size(); ++g) {
    const bool same = before.opacities_raw[g] == after.opacities_raw[g] &&
                      norm(before.means[g] - after.means[g]) == 0.0;
    if (!same) {
      ++changed;
      CHECK(after.sources[g].level == 1);
      CHECK(after.sources[g].row == 0);
      CHECK(after.sources[g].col == 3);
    }
  }
  CHECK(changed == 1);
}

TEST_CASE("assemble_cloud: incomplete maps rejected") {
  ParamMapSet maps = tiny_maps(4, 2, 0.01);
  maps.levels.pop_back();
  try {
    assemble_cloud(maps);
    FAIL("expected incomplete_maps");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::incomplete_maps);
  }
}

TEST_CASE("init_param_maps: raw initialization encodes the documented start") {
  std::mt19937_64 rng(17);
  const TemplateMesh mesh = test::random_blob_mesh(rng);
  const ScaffoldSet set = build_scaffolds(mesh, 0.01, 2);
  const UvGeometryMaps geo = rasterize_uv_geometry(set, 32, 32);
  std::vector<AggregatedColorMap> colors(3);
  for (int li = 0; li <= 2; ++li) {
    colors[li].level = li;
    colors[li].color = ImageF(32, 32, 3, 0.25f);
    colors[li].observed = ImageF(32, 32, 1, 0.0f);
    // mark half the texels observed
    for (size_t i = 0; i < geo.foreground.size() / 2; ++i)
      colors[li].observed.at(geo.foreground[i].first, geo.foreground[i].second) = 1.0f;
  }
  const ParamMapSet maps = init_param_maps(geo, colors);
  const auto& [r_seen, c_seen] = geo.foreground.front();
  const auto& [r_miss, c_miss] = geo.foreground.back();
  // identity quaternion, quarter-spacing scale everywhere
  CHECK(maps.levels[1].quat_raw.at(r_seen, c_seen, 0) == 1.0f);
  CHECK(softplus(maps.levels[1].scale_raw.at(r_seen, c_seen, 0)) ==
        doctest::Approx(0.01 / 4.0).epsilon(1e-5));
  // near-opaque on observed, faint on fallback texels
  CHECK(sigmoid(maps.levels[1].opacity_raw.at(r_seen, c_seen)) ==
        doctest::Approx(0.9).epsilon(1e-5));
  CHECK(sigmoid(maps.levels[1].opacity_raw.at(r_miss, c_miss)) ==
        doctest::Approx(0.1).epsilon(1e-5));
  // positions and colors are carried over untouched
  CHECK(maps.levels[0].position.data == geo.position_maps[0].data);
  CHECK(maps.levels[2].color.data == colors[2].color.data);
}
