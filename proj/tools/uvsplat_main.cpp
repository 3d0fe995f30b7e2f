// Command-line front end for the UV-anchored multi-scaffold Gaussian pipeline.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "json.hpp"
#include "uvsplat/container.hpp"
#include "uvsplat/fitting.hpp"
#include "uvsplat/png_io.hpp"
#include "uvsplat/scaffold.hpp"
#include "uvsplat/scene_config.hpp"
#include "uvsplat/synthetic.hpp"
#include "uvsplat/texture_transfer.hpp"
#include "uvsplat/visibility.hpp"

namespace fs = std::filesystem;
using namespace uvsplat;

namespace {

struct SceneOverrides {
  std::optional<double> offset_step;
  std::optional<int> scaffold_count;
  std::optional<int> uv_resolution;
  std::optional<double> depth_bias;
  std::optional<int> iterations;
  std::optional<double> learning_rate;
  std::optional<uint64_t> seed;
  std::optional<bool> learn_color_residual;
  std::optional<int> checkpoint_interval;
  std::optional<std::string> checkpoint_dir;

  void apply(SceneConfig& cfg) const {
    if (offset_step) cfg.offset_step = *offset_step;
    if (scaffold_count) cfg.scaffold_count = *scaffold_count;
    if (uv_resolution) cfg.uv_resolution = *uv_resolution;
    if (depth_bias) cfg.depth_bias = *depth_bias;
    if (iterations) cfg.fit.iterations = *iterations;
    if (learning_rate) cfg.fit.adamw.learning_rate = *learning_rate;
    if (seed) cfg.fit.seed = *seed;
    if (learn_color_residual) cfg.fit.learn_color_residual = *learn_color_residual;
    if (checkpoint_interval) cfg.fit.checkpoint_interval = *checkpoint_interval;
    if (checkpoint_dir) cfg.fit.checkpoint_dir = *checkpoint_dir;
  }
};

void add_scene_options(CLI::App* cmd, std::string& scene_path, SceneOverrides& ovr) {
  cmd->add_option("--scene", scene_path, "scene config JSON")->required();
  cmd->add_option("--offset-step,--d", ovr.offset_step, "scaffold spacing in meters");
  cmd->add_option("--scaffolds,--S", ovr.scaffold_count, "outer scaffold count");
  cmd->add_option("--uv-res", ovr.uv_resolution, "UV map resolution");
  cmd->add_option("--depth-bias", ovr.depth_bias, "occlusion depth bias in meters");
  cmd->add_option("--iterations", ovr.iterations, "fit iterations");
  cmd->add_option("--lr", ovr.learning_rate, "fit learning rate");
  cmd->add_option("--seed", ovr.seed, "fit seed");
  cmd->add_flag("--learn-color-residual", ovr.learn_color_residual,
                "optimize a residual on top of the aggregated colors");
  cmd->add_option("--checkpoint-interval", ovr.checkpoint_interval, "iterations per checkpoint");
  cmd->add_option("--checkpoint-dir", ovr.checkpoint_dir, "checkpoint output directory");
}

SceneConfig load_scene(const std::string& path, const SceneOverrides& ovr) {
  SceneConfig cfg = SceneConfig::from_json_file(path);
  ovr.apply(cfg);
  cfg.validate();
  return cfg;
}

UvGeometryMaps build_geometry(const SceneConfig& cfg, const TemplateMesh& mesh) {
  const ScaffoldSet scaffolds = build_scaffolds(mesh, cfg.offset_step, cfg.scaffold_count);
  return rasterize_uv_geometry(scaffolds, cfg.uv_resolution, cfg.uv_resolution);
}

std::vector<AggregatedColorMap> aggregate_all_levels(const SceneConfig& cfg,
                                                     const ScaffoldSet& scaffolds,
                                                     const UvGeometryMaps& geo,
                                                     const CaptureSet& capture) {
  const std::vector<Camera> cams = capture.cameras();
  std::vector<AggregatedColorMap> colors;
  for (int level = 0; level <= cfg.scaffold_count; ++level) {
    const VisibilityWeights w = visibility_weights(scaffolds, geo, cams, level, cfg.depth_bias);
    colors.push_back(aggregate_rgb_map(capture, geo, w, level));
  }
  return colors;
}

std::vector<AggregatedColorMap> colors_from_container(const MapContainer& c) {
  std::vector<AggregatedColorMap> colors;
  const auto counts = c.meta.value("unobserved_texels", std::vector<int>{});
  for (int level = 0; level <= c.scaffold_count; ++level) {
    AggregatedColorMap cm;
    cm.level = level;
    cm.color = c.get("color_" + std::to_string(level));
    cm.observed = c.get("observed_" + std::to_string(level));
    cm.unobserved_texels = level < int(counts.size()) ? counts[level] : 0;
    colors.push_back(std::move(cm));
  }
  return colors;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  require(out.good(), ErrorCode::io_error, "cannot write " + path);
  out << text;
}

nlohmann::json report_to_json(const FitReport& report) {
  nlohmann::json doc;
  doc["loss_trace"] = report.loss_trace;
  doc["checkpoints"] = nlohmann::json::array();
  for (const auto& ck : report.checkpoints)
    doc["checkpoints"].push_back(
        {{"iteration", ck.iteration}, {"psnr_mean", ck.psnr_mean}, {"ssim_mean", ck.ssim_mean}});
  doc["seconds"] = {{"forward", report.seconds_forward},
                    {"loss", report.seconds_loss},
                    {"backward", report.seconds_backward},
                    {"step", report.seconds_step},
                    {"total", report.seconds_total}};
  return doc;
}

// ---- subcommand bodies ----

int cmd_scaffold(const std::string& scene_path, const SceneOverrides& ovr,
                 const std::string& out_dir) {
  const SceneConfig cfg = load_scene(scene_path, ovr);
  const TemplateMesh mesh = load_obj(cfg.resolve(cfg.template_obj));
  const UvGeometryMaps geo = build_geometry(cfg, mesh);
  MapContainer c = geometry_to_container(geo);
  c.save(out_dir);
  const size_t fg = geo.foreground.size();
  std::printf("foreground_texels %zu\n", fg);
  std::printf("gaussian_count %zu\n", fg * size_t(cfg.scaffold_count + 1));
  return 0;
}

int cmd_aggregate(const std::string& scene_path, const SceneOverrides& ovr,
                  const std::string& geometry_dir, const std::string& out_dir) {
  const SceneConfig cfg = load_scene(scene_path, ovr);
  const CaptureSet capture = cfg.load_views(cfg.input_views);
  const MapContainer gc = MapContainer::load(geometry_dir);
  const UvGeometryMaps geo = geometry_from_container(gc);
  const TemplateMesh mesh = load_obj(cfg.resolve(cfg.template_obj));
  const ScaffoldSet scaffolds = build_scaffolds(mesh, geo.offset_step, geo.scaffold_count);

  const auto colors = aggregate_all_levels(cfg, scaffolds, geo, capture);
  MapContainer out = geometry_to_container(geo);
  add_color_maps(out, colors);
  out.save(out_dir);
  nlohmann::json stats;
  stats["unobserved_texels"] = out.meta["unobserved_texels"];
  std::cout << stats.dump() << "\n";
  return 0;
}

int cmd_fit(const std::string& scene_path, const SceneOverrides& ovr,
            const std::string& aggregated_dir, const std::string& resume_dir,
            const std::string& out_dir, const std::string& report_path) {
  const SceneConfig cfg = load_scene(scene_path, ovr);
  const CaptureSet capture = cfg.load_views(cfg.input_views);
  CaptureSet heldout;
  if (!cfg.heldout_views.empty()) heldout = cfg.load_views(cfg.heldout_views);
  const CaptureSet* heldout_ptr = heldout.views.empty() ? nullptr : &heldout;

  ParamMapSet maps;
  FitReport report;
  if (!resume_dir.empty()) {
    Checkpoint ck = load_checkpoint(resume_dir);
    report = resume_fit(ck, capture, cfg.fit, heldout_ptr);
    maps = std::move(ck.maps);
  } else {
    const MapContainer ac = MapContainer::load(aggregated_dir);
    const UvGeometryMaps geo = geometry_from_container(ac);
    maps = init_param_maps(geo, colors_from_container(ac));
    report = optimize_maps(maps, capture, cfg.fit, heldout_ptr);
  }

  param_maps_to_container(maps).save(out_dir);
  if (!report_path.empty()) write_text(report_path, report_to_json(report).dump(2) + "\n");
  if (!report.loss_trace.empty())
    std::printf("final_loss %.8g\n", report.loss_trace.back());
  if (!report.checkpoints.empty())
    std::printf("heldout_psnr %.4f\n", report.checkpoints.back().psnr_mean);
  return 0;
}

int cmd_render(const std::string& params_dir, const std::string& cameras_path, int view_id,
               const std::string& out_png, const std::string& stats_path) {
  const MapContainer c = MapContainer::load(params_dir);
  const ParamMapSet maps = param_maps_from_container(c);
  const std::vector<Camera> cams = load_cameras_json(cameras_path);
  require(view_id >= 0 && view_id < int(cams.size()), ErrorCode::invalid_config,
          "view id outside camera list");
  RenderStats stats;
  const RenderOutput out = render(assemble_cloud(maps), cams[view_id], RenderConfig{},
                                  stats_path.empty() ? nullptr : &stats);
  if (!stats_path.empty()) write_text(stats_path, stats.to_json() + "\n");

  ImageF rgba(out.color.height, out.color.width, 4);
  for (int r = 0; r < rgba.height; ++r)
    for (int col = 0; col < rgba.width; ++col) {
      for (int ch = 0; ch < 3; ++ch) rgba.at(r, col, ch) = float(out.color.at(r, col, ch));
      rgba.at(r, col, 3) = float(out.alpha.at(r, col));
    }
  write_png(out_png, rgba);
  return 0;
}

int cmd_eval(const std::string& scene_path, const SceneOverrides& ovr,
             const std::string& params_dir, const std::string& out_path,
             const std::string& external_path) {
  const SceneConfig cfg = load_scene(scene_path, ovr);
  require(!cfg.heldout_views.empty(), ErrorCode::invalid_config,
          "scene config lists no held-out views");
  const CaptureSet heldout = cfg.load_views(cfg.heldout_views);
  const ParamMapSet maps = param_maps_from_container(MapContainer::load(params_dir));
  const EvalReport report = evaluate(maps, heldout);
  nlohmann::json doc = nlohmann::json::parse(report.to_json());
  if (!external_path.empty()) {
    // merge externally computed metrics (e.g. perceptual scores) for tables
    std::ifstream ein(external_path);
    require(ein.good(), ErrorCode::missing_input,
            "cannot open external metrics: " + external_path);
    nlohmann::json ext;
    ein >> ext;
    doc["external"] = ext;
  }
  const std::string json = doc.dump(2);
  if (!out_path.empty()) write_text(out_path, json + "\n");
  std::cout << json << "\n";
  return 0;
}

int cmd_texture_transfer(const std::string& template_path, const std::string& scan_path,
                         const std::string& scan_texture_path, int resolution,
                         const std::string& out_png) {
  const TemplateMesh templ = load_obj(template_path);
  TexturedMesh scan;
  scan.mesh = load_obj(scan_path);
  scan.texture = read_png_float(scan_texture_path);
  const ImageF baked = transfer_texture_nearest(templ, scan, resolution, resolution);
  write_png(out_png, baked);
  return 0;
}

int cmd_ablate(const std::string& scene_path, const SceneOverrides& ovr,
               const std::vector<int>& scaffold_counts, const std::string& out_csv) {
  SceneConfig cfg = load_scene(scene_path, ovr);
  require(!scaffold_counts.empty(), ErrorCode::invalid_config, "need at least one S value");
  require(!cfg.heldout_views.empty(), ErrorCode::invalid_config,
          "ablation needs held-out views");
  const TemplateMesh mesh = load_obj(cfg.resolve(cfg.template_obj));
  const CaptureSet capture = cfg.load_views(cfg.input_views);
  const CaptureSet heldout = cfg.load_views(cfg.heldout_views);

  std::string csv = "S,psnr_db,ssim,l1\n";
  char line[128];
  for (const int s : scaffold_counts) {
    require(s >= 0, ErrorCode::invalid_config, "scaffold counts must be >= 0");
    const FitOutput fit = fit_subject(capture, mesh, cfg.fit, cfg.uv_resolution,
                                      cfg.offset_step, s, nullptr, cfg.depth_bias);
    const EvalReport ev = evaluate(fit.maps, heldout);
    std::snprintf(line, sizeof(line), "%d,%.6f,%.6f,%.8f\n", s, ev.psnr_mean, ev.ssim_mean,
                  ev.l1_mean);
    csv += line;
    std::printf("S=%d psnr=%.4f ssim=%.5f l1=%.7f\n", s, ev.psnr_mean, ev.ssim_mean, ev.l1_mean);
  }
  if (!out_csv.empty()) write_text(out_csv, csv);
  return 0;
}

int cmd_make_synthetic(const std::string& out_dir, SyntheticConfig scfg, int uv_resolution,
                       int iterations) {
  std::error_code ec;
  fs::create_directories(fs::path(out_dir) / "images", ec);
  fs::create_directories(fs::path(out_dir) / "masks", ec);
  require(!ec, ErrorCode::io_error, "cannot create " + out_dir);

  const SyntheticScene scene = make_synthetic_scene(scfg);
  save_obj(scene.template_mesh, (fs::path(out_dir) / "template.obj").string());
  save_obj(scene.scan.mesh, (fs::path(out_dir) / "scan.obj").string());
  write_png((fs::path(out_dir) / "scan_texture.png").string(), scene.scan.texture);

  std::vector<Camera> cams;
  char name[64];
  int id = 0;
  auto dump_view = [&](const View& view) {
    cams.push_back(view.camera);
    std::snprintf(name, sizeof(name), "images/view_%03d.png", id);
    write_png((fs::path(out_dir) / name).string(), view.image);
    std::snprintf(name, sizeof(name), "masks/mask_%03d.png", id);
    write_png((fs::path(out_dir) / name).string(), view.mask);
    ++id;
  };
  for (const auto& v : scene.inputs.views) dump_view(v);
  for (const auto& v : scene.heldout.views) dump_view(v);
  save_cameras_json(cams, (fs::path(out_dir) / "cameras.json").string());

  SceneConfig cfg;
  for (int v = 0; v < int(scene.inputs.views.size()); ++v) cfg.input_views.push_back(v);
  for (int v = 0; v < int(scene.heldout.views.size()); ++v)
    cfg.heldout_views.push_back(int(scene.inputs.views.size()) + v);
  cfg.uv_resolution = uv_resolution;
  cfg.fit.iterations = iterations;
  cfg.save_json((fs::path(out_dir) / "scene.json").string());
  std::printf("synthetic scene written to %s\n", out_dir.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"UV-anchored multi-scaffold Gaussian splatting pipeline"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "worker thread count (0 = hardware)");

  std::string scene_path, out_dir, geometry_dir, aggregated_dir, resume_dir, report_path;
  std::string params_dir, cameras_path, out_png, template_path, scan_path, scan_texture_path;
  std::string out_csv;
  SceneOverrides ovr;
  int view_id = 0, resolution = 512;
  std::vector<int> s_list;

  auto* scaffold_cmd = app.add_subcommand("scaffold", "build scaffold geometry maps");
  add_scene_options(scaffold_cmd, scene_path, ovr);
  scaffold_cmd->add_option("--out", out_dir, "output container directory")->required();

  auto* aggregate_cmd = app.add_subcommand("aggregate", "aggregate view colors into UV maps");
  add_scene_options(aggregate_cmd, scene_path, ovr);
  aggregate_cmd->add_option("--geometry", geometry_dir, "geometry container")->required();
  aggregate_cmd->add_option("--out", out_dir, "output container directory")->required();

  auto* fit_cmd = app.add_subcommand("fit", "optimize Gaussian parameter maps");
  add_scene_options(fit_cmd, scene_path, ovr);
  fit_cmd->add_option("--aggregated", aggregated_dir, "aggregated container");
  fit_cmd->add_option("--resume", resume_dir, "checkpoint container to resume from");
  fit_cmd->add_option("--out", out_dir, "fitted container directory")->required();
  fit_cmd->add_option("--report", report_path, "fit report JSON path");

  auto* render_cmd = app.add_subcommand("render", "render a fitted container");
  render_cmd->add_option("--params", params_dir, "fitted container")->required();
  render_cmd->add_option("--cameras", cameras_path, "camera JSON")->required();
  render_cmd->add_option("--view", view_id, "camera index")->required();
  render_cmd->add_option("--out", out_png, "output PNG (RGBA)")->required();
  std::string stats_path;
  render_cmd->add_option("--stats", stats_path, "per-tile statistics JSON path");

  auto* eval_cmd = app.add_subcommand("eval", "evaluate held-out views");
  add_scene_options(eval_cmd, scene_path, ovr);
  eval_cmd->add_option("--params", params_dir, "fitted container")->required();
  eval_cmd->add_option("--out", report_path, "metrics JSON path");
  std::string external_metrics;
  eval_cmd->add_option("--external", external_metrics,
                       "JSON of externally computed metrics to merge into the report");

  auto* transfer_cmd = app.add_subcommand("texture-transfer",
                                          "bake a scan texture into the template UV layout");
  transfer_cmd->add_option("--template", template_path, "template OBJ")->required();
  transfer_cmd->add_option("--scan", scan_path, "scan OBJ")->required();
  transfer_cmd->add_option("--scan-texture", scan_texture_path, "scan texture PNG")->required();
  transfer_cmd->add_option("--resolution", resolution, "output map resolution");
  transfer_cmd->add_option("--out", out_png, "output PNG")->required();

  auto* ablate_cmd = app.add_subcommand("ablate", "sweep the outer scaffold count");
  add_scene_options(ablate_cmd, scene_path, ovr);
  ablate_cmd->add_option("--s-list", s_list, "scaffold counts to sweep")->required();
  ablate_cmd->add_option("--out", out_csv, "output CSV path");

  SyntheticConfig scfg;
  int synth_uv_res = 96, synth_iterations = 600;
  auto* synth_cmd = app.add_subcommand("make-synthetic", "generate a synthetic capture scene");
  synth_cmd->add_option("--out", out_dir, "output scene directory")->required();
  synth_cmd->add_option("--seed", scfg.seed, "random seed");
  synth_cmd->add_option("--image-size", scfg.image_size, "rendered view size");
  synth_cmd->add_option("--views", scfg.input_views, "input view count");
  synth_cmd->add_option("--heldout", scfg.heldout_views, "held-out view count");
  synth_cmd->add_option("--bump-amplitude", scfg.bump_amplitude, "scan displacement in meters");
  synth_cmd->add_option("--uv-res", synth_uv_res, "uv resolution stored in scene.json");
  synth_cmd->add_option("--iterations", synth_iterations, "fit iterations stored in scene.json");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }
  if (threads > 0) set_thread_count(threads);

  try {
    if (*scaffold_cmd) return cmd_scaffold(scene_path, ovr, out_dir);
    if (*aggregate_cmd) return cmd_aggregate(scene_path, ovr, geometry_dir, out_dir);
    if (*fit_cmd) {
      require(!aggregated_dir.empty() || !resume_dir.empty(), ErrorCode::invalid_config,
              "fit needs --aggregated or --resume");
      return cmd_fit(scene_path, ovr, aggregated_dir, resume_dir, out_dir, report_path);
    }
    if (*render_cmd) return cmd_render(params_dir, cameras_path, view_id, out_png, stats_path);
    if (*eval_cmd) return cmd_eval(scene_path, ovr, params_dir, report_path, external_metrics);
    if (*transfer_cmd)
      return cmd_texture_transfer(template_path, scan_path, scan_texture_path, resolution,
                                  out_png);
    if (*ablate_cmd) return cmd_ablate(scene_path, ovr, s_list, out_csv);
    if (*synth_cmd) return cmd_make_synthetic(out_dir, scfg, synth_uv_res, synth_iterations);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.is_validation() ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
