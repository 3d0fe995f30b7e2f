#include "uvsplat/scene_config.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "json.hpp"
#include "uvsplat/png_io.hpp"

namespace uvsplat {

namespace fs = std::filesystem;

SceneConfig SceneConfig::from_json_file(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::missing_input, "cannot open scene config: " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const std::exception& e) {
    fail(ErrorCode::parse_error, "scene config parse error in " + path + ": " + e.what());
  }

  SceneConfig cfg;
  cfg.base_dir = fs::path(path).parent_path().string();
  try {
    cfg.template_obj = doc.value("template_obj", cfg.template_obj);
    cfg.cameras = doc.value("cameras", cfg.cameras);
    cfg.images_dir = doc.value("images_dir", cfg.images_dir);
    cfg.masks_dir = doc.value("masks_dir", cfg.masks_dir);
    cfg.input_views = doc.value("input_views", cfg.input_views);
    cfg.heldout_views = doc.value("heldout_views", cfg.heldout_views);
    cfg.offset_step = doc.value("offset_step", cfg.offset_step);
    cfg.scaffold_count = doc.value("scaffold_count", cfg.scaffold_count);
    cfg.uv_resolution = doc.value("uv_resolution", cfg.uv_resolution);
    cfg.depth_bias = doc.value("depth_bias", cfg.depth_bias);
    if (doc.contains("fit")) {
      const auto& f = doc["fit"];
      cfg.fit.iterations = f.value("iterations", cfg.fit.iterations);
      cfg.fit.adamw.learning_rate = f.value("learning_rate", cfg.fit.adamw.learning_rate);
      cfg.fit.adamw.beta1 = f.value("beta1", cfg.fit.adamw.beta1);
      cfg.fit.adamw.beta2 = f.value("beta2", cfg.fit.adamw.beta2);
      cfg.fit.adamw.eps = f.value("eps", cfg.fit.adamw.eps);
      cfg.fit.adamw.weight_decay = f.value("weight_decay", cfg.fit.adamw.weight_decay);
      cfg.fit.seed = f.value("seed", cfg.fit.seed);
      cfg.fit.checkpoint_interval = f.value("checkpoint_interval", cfg.fit.checkpoint_interval);
      cfg.fit.learn_color_residual =
          f.value("learn_color_residual", cfg.fit.learn_color_residual);
      if (f.contains("weights")) {
        const auto& w = f["weights"];
        cfg.fit.weights.l1 = w.value("l1", cfg.fit.weights.l1);
        cfg.fit.weights.ssim = w.value("ssim", cfg.fit.weights.ssim);
        cfg.fit.weights.mask = w.value("mask", cfg.fit.weights.mask);
        cfg.fit.weights.target_views = w.value("target_views", cfg.fit.weights.target_views);
      }
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::parse_error, "scene config field error in " + path + ": " + e.what());
  }
  return cfg;
}

void SceneConfig::save_json(const std::string& path) const {
  nlohmann::json doc;
  doc["template_obj"] = template_obj;
  doc["cameras"] = cameras;
  doc["images_dir"] = images_dir;
  doc["masks_dir"] = masks_dir;
  doc["input_views"] = input_views;
  doc["heldout_views"] = heldout_views;
  doc["offset_step"] = offset_step;
  doc["scaffold_count"] = scaffold_count;
  doc["uv_resolution"] = uv_resolution;
  doc["depth_bias"] = depth_bias;
  doc["fit"] = {{"iterations", fit.iterations},
                {"learn_color_residual", fit.learn_color_residual},
                {"learning_rate", fit.adamw.learning_rate},
                {"beta1", fit.adamw.beta1},
                {"beta2", fit.adamw.beta2},
                {"eps", fit.adamw.eps},
                {"weight_decay", fit.adamw.weight_decay},
                {"seed", fit.seed},
                {"checkpoint_interval", fit.checkpoint_interval},
                {"weights",
                 {{"l1", fit.weights.l1},
                  {"ssim", fit.weights.ssim},
                  {"mask", fit.weights.mask},
                  {"target_views", fit.weights.target_views}}}};
  std::ofstream out(path);
  require(out.good(), ErrorCode::io_error, "cannot write scene config: " + path);
  out << doc.dump(2) << "\n";
}

void SceneConfig::validate() const {
  require(!input_views.empty(), ErrorCode::invalid_config, "scene needs input views");
  for (int id : input_views)
    require(std::find(heldout_views.begin(), heldout_views.end(), id) == heldout_views.end(),
            ErrorCode::invalid_config,
            "view " + std::to_string(id) + " is both an input and a held-out view");
  require(offset_step > 0.0, ErrorCode::invalid_config, "offset_step must be > 0");
  require(scaffold_count >= 0, ErrorCode::invalid_config, "scaffold_count must be >= 0");
  require(uv_resolution >= 1, ErrorCode::invalid_config, "uv_resolution must be >= 1");
  require(depth_bias >= 0.0, ErrorCode::invalid_config, "depth_bias must be >= 0");
  fit.validate();
}

std::string SceneConfig::resolve(const std::string& rel) const {
  const fs::path p(rel);
  if (p.is_absolute() || base_dir.empty()) return rel;
  return (fs::path(base_dir) / p).string();
}

std::vector<Camera> SceneConfig::load_cameras() const {
  return load_cameras_json(resolve(cameras));
}

CaptureSet SceneConfig::load_views(const std::vector<int>& ids) const {
  const std::vector<Camera> cams = load_cameras();
  CaptureSet capture;
  char name[64];
  for (int id : ids) {
    require(id >= 0 && id < int(cams.size()), ErrorCode::invalid_config,
            "view id " + std::to_string(id) + " outside camera list");
    View view;
    view.camera = cams[id];
    std::snprintf(name, sizeof(name), "view_%03d.png", id);
    view.image = read_png_float(resolve(images_dir + "/" + name));
    require(view.image.channels >= 3, ErrorCode::invalid_config,
            std::string(name) + ": expected an RGB image");
    if (view.image.channels > 3) {
      ImageF rgb(view.image.height, view.image.width, 3);
      for (int r = 0; r < rgb.height; ++r)
        for (int c = 0; c < rgb.width; ++c)
          for (int ch = 0; ch < 3; ++ch) rgb.at(r, c, ch) = view.image.at(r, c, ch);
      view.image = std::move(rgb);
    }
    std::snprintf(name, sizeof(name), "mask_%03d.png", id);
    view.mask = read_mask_png(resolve(masks_dir + "/" + name));
    capture.views.push_back(std::move(view));
  }
  capture.validate();
  return capture;
}

}  // namespace uvsplat
