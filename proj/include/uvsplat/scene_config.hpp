#pragma once

#include <string>
#include <vector>

#include "uvsplat/camera.hpp"
#include "uvsplat/fitting.hpp"

namespace uvsplat {

// Scene description: file locations plus pipeline defaults. CLI flags override
// file values, which override built-in defaults.
struct SceneConfig {
  std::string base_dir;  // directory of the config file; relative paths resolve against it
  std::string template_obj = "template.obj";
  std::string cameras = "cameras.json";
  std::string images_dir = "images";
  std::string masks_dir = "masks";
  std::vector<int> input_views;
  std::vector<int> heldout_views;
  double offset_step = 0.01;  // meters between scaffolds
  int scaffold_count = 4;
  int uv_resolution = 512;
  double depth_bias = 0.005;  // occlusion-test slack, meters
  FitConfig fit;

  static SceneConfig from_json_file(const std::string& path);
  void save_json(const std::string& path) const;
  void validate() const;

  std::string resolve(const std::string& rel) const;
  std::vector<Camera> load_cameras() const;
  // loads (camera, image, mask) triples for the given view ids
  CaptureSet load_views(const std::vector<int>& ids) const;
};

}  // namespace uvsplat
