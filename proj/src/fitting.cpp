#include "uvsplat/fitting.hpp"

#include <chrono>
#include <cmath>

#include "uvsplat/scaffold.hpp"
#include "uvsplat/visibility.hpp"

namespace uvsplat {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

ImageD to_double(const ImageF& img) { return convert<double>(img); }

// raw-parameter gradient buffers per level, laid out exactly like the maps
struct MapGradients {
  std::vector<std::vector<double>> quat, scale, opacity, color_residual;

  void init(const ParamMapSet& maps) {
    quat.clear();
    scale.clear();
    opacity.clear();
    color_residual.clear();
    for (const auto& L : maps.levels) {
      quat.emplace_back(L.quat_raw.data.size(), 0.0);
      scale.emplace_back(L.scale_raw.data.size(), 0.0);
      opacity.emplace_back(L.opacity_raw.data.size(), 0.0);
      color_residual.emplace_back(L.color_residual.data.size(), 0.0);
    }
  }
  void zero() {
    for (auto& v : quat) std::fill(v.begin(), v.end(), 0.0);
    for (auto& v : scale) std::fill(v.begin(), v.end(), 0.0);
    for (auto& v : opacity) std::fill(v.begin(), v.end(), 0.0);
    for (auto& v : color_residual) std::fill(v.begin(), v.end(), 0.0);
  }
};

void scatter_gradients(const GaussianCloud& cloud, const CloudGradients& grads,
                       const ParamMapSet& maps, MapGradients& out) {
  const int W = maps.width();
  for (size_t g = 0; g < cloud.size(); ++g) {
    const GaussianSource& src = cloud.sources[g];
    const size_t texel = size_t(src.row) * W + src.col;
    double* q = out.quat[src.level].data() + texel * 4;
    q[0] += grads.quats_raw[g].w;
    q[1] += grads.quats_raw[g].x;
    q[2] += grads.quats_raw[g].y;
    q[3] += grads.quats_raw[g].z;
    double* s = out.scale[src.level].data() + texel * 3;
    s[0] += grads.scales_raw[g].x;
    s[1] += grads.scales_raw[g].y;
    s[2] += grads.scales_raw[g].z;
    out.opacity[src.level][texel] += grads.opacities_raw[g];
    // residual gradient passes where the assembled color is strictly inside
    // [0,1] (clamp subgradient)
    const auto& L = maps.levels[src.level];
    double* cr = out.color_residual[src.level].data() + texel * 3;
    for (int ch = 0; ch < 3; ++ch) {
      const double pre = double(L.color.data[texel * 3 + ch]) +
                         double(L.color_residual.data[texel * 3 + ch]);
      if (pre > 0.0 && pre < 1.0)
        cr[ch] += ch == 0 ? grads.colors[g].x : (ch == 1 ? grads.colors[g].y : grads.colors[g].z);
    }
  }
}

void assert_scale_confinement(const ParamMapSet& maps) {
  for (const auto& L : maps.levels)
    for (const float raw : L.scale_raw.data) {
      const double s = std::min(softplus(double(raw)), maps.scale_limit);
      require(s <= maps.scale_limit, ErrorCode::invalid_config,
              "scale confinement violated");  // unreachable by construction
    }
}

std::string checkpoint_dir_name(const std::string& base, int iteration) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "/iter_%06d", iteration);
  return base + buf;
}

FitReport run_fit(ParamMapSet& maps, const CaptureSet& inputs, const FitConfig& cfg,
                  const CaptureSet* heldout, const RenderConfig& rcfg,
                  std::vector<AdamWState>& states, int start_iteration) {
  cfg.validate();
  maps.validate();
  inputs.validate();
  require(start_iteration >= 0 && start_iteration < cfg.iterations, ErrorCode::invalid_config,
          "start iteration outside [0, iterations)");

  const auto t_total = Clock::now();
  const size_t level_count = maps.levels.size();
  if (states.empty()) {
    states.resize(level_count * 4);
    for (size_t li = 0; li < level_count; ++li) {
      states[li * 4 + 0].init(maps.levels[li].quat_raw.data.size());
      states[li * 4 + 1].init(maps.levels[li].scale_raw.data.size());
      states[li * 4 + 2].init(maps.levels[li].opacity_raw.data.size());
      states[li * 4 + 3].init(maps.levels[li].color_residual.data.size());
    }
  }
  require(states.size() == level_count * 4, ErrorCode::incomplete_maps,
          "optimizer state count does not match map levels");

  std::vector<ImageD> gt_images, gt_masks;
  for (const auto& v : inputs.views) {
    gt_images.push_back(to_double(v.image));
    gt_masks.push_back(to_double(v.mask));
  }

  FitReport report;
  report.loss_trace.reserve(cfg.iterations - start_iteration);
  MapGradients grads;
  grads.init(maps);

  for (int it = start_iteration; it < cfg.iterations; ++it) {
    const GaussianCloud cloud = assemble_cloud(maps);

    auto t0 = Clock::now();
    std::vector<RenderOutput> renders;
    renders.reserve(inputs.views.size());
    for (const auto& v : inputs.views) renders.push_back(render(cloud, v.camera, rcfg));
    report.seconds_forward += seconds_since(t0);

    t0 = Clock::now();
    std::vector<ViewPrediction> preds(inputs.views.size());
    std::vector<ViewTarget> targets(inputs.views.size());
    for (size_t v = 0; v < inputs.views.size(); ++v) {
      preds[v] = {&renders[v].color, &renders[v].alpha};
      targets[v] = {&gt_images[v], &gt_masks[v]};
    }
    const CompositeResult loss = composite_loss(preds, targets, cfg.weights);
    require(std::isfinite(loss.value), ErrorCode::non_finite_loss,
            "loss became non-finite at iteration " + std::to_string(it));
    report.loss_trace.push_back(loss.value);
    report.seconds_loss += seconds_since(t0);

    t0 = Clock::now();
    grads.zero();
    for (size_t v = 0; v < inputs.views.size(); ++v) {
      const CloudGradients cg =
          render_backward(cloud, inputs.views[v].camera, loss.grad_color[v], loss.grad_alpha[v],
                          rcfg);
      scatter_gradients(cloud, cg, maps, grads);
    }
    report.seconds_backward += seconds_since(t0);

    t0 = Clock::now();
    for (size_t li = 0; li < level_count; ++li) {
      auto& L = maps.levels[li];
      adamw_step(L.quat_raw.data, grads.quat[li], states[li * 4 + 0], cfg.adamw);
      adamw_step(L.scale_raw.data, grads.scale[li], states[li * 4 + 1], cfg.adamw);
      adamw_step(L.opacity_raw.data, grads.opacity[li], states[li * 4 + 2], cfg.adamw);
      if (cfg.learn_color_residual)
        adamw_step(L.color_residual.data, grads.color_residual[li], states[li * 4 + 3],
                   cfg.adamw);
    }
    report.seconds_step += seconds_since(t0);

    const int done = it + 1;
    const bool at_checkpoint =
        cfg.checkpoint_interval > 0 && done % cfg.checkpoint_interval == 0;
    if (at_checkpoint || done == cfg.iterations) {
      assert_scale_confinement(maps);
      if (at_checkpoint && !cfg.checkpoint_dir.empty())
        save_checkpoint(checkpoint_dir_name(cfg.checkpoint_dir, done), maps, states, done);
      if (heldout && !heldout->views.empty()) {
        const EvalReport ev = evaluate(maps, *heldout, rcfg);
        report.checkpoints.push_back({done, ev.psnr_mean, ev.ssim_mean});
      }
    }
  }

  report.seconds_total = seconds_since(t_total);
  return report;
}

}  // namespace

EvalReport evaluate(const ParamMapSet& maps, const CaptureSet& views, const RenderConfig& rcfg) {
  EvalReport report;
  if (views.views.empty()) return report;
  const GaussianCloud cloud = assemble_cloud(maps);
  for (size_t v = 0; v < views.views.size(); ++v) {
    const View& view = views.views[v];
    const RenderOutput out = render(cloud, view.camera, rcfg);
    const ImageD gt = to_double(view.image);
    ViewMetrics m;
    m.view = int(v);
    m.psnr_db = psnr(out.color, gt);
    m.ssim = ssim(out.color, gt);
    double abs_sum = 0;
    for (size_t i = 0; i < gt.data.size(); ++i) abs_sum += std::abs(out.color.data[i] - gt.data[i]);
    m.l1 = abs_sum / double(gt.size());
    report.views.push_back(m);
    report.psnr_mean += m.psnr_db;
    report.ssim_mean += m.ssim;
    report.l1_mean += m.l1;
  }
  const double n = double(report.views.size());
  report.psnr_mean /= n;
  report.ssim_mean /= n;
  report.l1_mean /= n;
  return report;
}

std::string EvalReport::to_json() const {
  nlohmann::json doc;
  doc["views"] = nlohmann::json::array();
  for (const auto& m : views) {
    nlohmann::json j;
    j["view_id"] = m.view;
    j["psnr_db"] = m.psnr_db;
    j["ssim"] = m.ssim;
    j["l1"] = m.l1;
    doc["views"].push_back(j);
  }
  doc["psnr_mean"] = psnr_mean;
  doc["ssim_mean"] = ssim_mean;
  doc["l1_mean"] = l1_mean;
  return doc.dump(2);
}

FitReport optimize_maps(ParamMapSet& maps, const CaptureSet& inputs, const FitConfig& cfg,
                        const CaptureSet* heldout, const RenderConfig& rcfg,
                        int start_iteration) {
  std::vector<AdamWState> states;
  return run_fit(maps, inputs, cfg, heldout, rcfg, states, start_iteration);
}

FitOutput fit_subject(const CaptureSet& capture, const TemplateMesh& templ, const FitConfig& cfg,
                      int uv_resolution, double offset_step, int scaffold_count,
                      const CaptureSet* heldout, double depth_bias) {
  capture.validate();
  TemplateMesh mesh = templ;
  validate_mesh(mesh);
  if (mesh.vertex_normals.size() != mesh.vertices.size())
    mesh.vertex_normals = compute_vertex_normals(mesh);

  const ScaffoldSet scaffolds = build_scaffolds(mesh, offset_step, scaffold_count);
  const UvGeometryMaps geo = rasterize_uv_geometry(scaffolds, uv_resolution, uv_resolution);
  const std::vector<Camera> cams = capture.cameras();

  std::vector<AggregatedColorMap> colors;
  for (int level = 0; level <= scaffold_count; ++level) {
    const VisibilityWeights w = visibility_weights(scaffolds, geo, cams, level, depth_bias);
    colors.push_back(aggregate_rgb_map(capture, geo, w, level));
  }

  FitOutput out;
  out.maps = init_param_maps(geo, colors);
  out.report = optimize_maps(out.maps, capture, cfg, heldout);
  return out;
}

void save_checkpoint(const std::string& dir, const ParamMapSet& maps,
                     const std::vector<AdamWState>& states, int iteration) {
  require(states.size() == maps.levels.size() * 4, ErrorCode::incomplete_maps,
          "optimizer state count does not match map levels");
  MapContainer c = param_maps_to_container(maps);
  const char* kinds[4] = {"quat", "scale", "opacity", "residual"};
  const int chans[4] = {4, 3, 1, 3};
  for (size_t li = 0; li < maps.levels.size(); ++li)
    for (int k = 0; k < 4; ++k) {
      const AdamWState& st = states[li * 4 + k];
      ImageF m(maps.height(), maps.width(), chans[k]);
      ImageF v(maps.height(), maps.width(), chans[k]);
      require(st.m.size() == m.data.size(), ErrorCode::shape_mismatch,
              "optimizer moment size mismatch");
      std::copy(st.m.begin(), st.m.end(), m.data.begin());
      std::copy(st.v.begin(), st.v.end(), v.data.begin());
      const std::string suffix = std::string(kinds[k]) + "_" + std::to_string(li);
      c.add("adam_m_" + suffix, std::move(m), "adam first moment");
      c.add("adam_v_" + suffix, std::move(v), "adam second moment");
    }
  c.meta["iteration"] = iteration;
  c.save(dir);
}

Checkpoint load_checkpoint(const std::string& dir) {
  const MapContainer c = MapContainer::load(dir);
  Checkpoint ck;
  ck.maps = param_maps_from_container(c);
  ck.iteration = c.meta.value("iteration", 0);
  const char* kinds[4] = {"quat", "scale", "opacity", "residual"};
  for (size_t li = 0; li < ck.maps.levels.size(); ++li)
    for (int k = 0; k < 4; ++k) {
      const std::string suffix = std::string(kinds[k]) + "_" + std::to_string(li);
      const ImageF& m = c.get("adam_m_" + suffix);
      const ImageF& v = c.get("adam_v_" + suffix);
      AdamWState st;
      st.m.assign(m.data.begin(), m.data.end());
      st.v.assign(v.data.begin(), v.data.end());
      st.step = ck.iteration;
      ck.states.push_back(std::move(st));
    }
  return ck;
}

FitReport resume_fit(Checkpoint& ck, const CaptureSet& inputs, const FitConfig& cfg,
                     const CaptureSet* heldout, const RenderConfig& rcfg) {
  return run_fit(ck.maps, inputs, cfg, heldout, rcfg, ck.states, ck.iteration);
}

}  // namespace uvsplat
