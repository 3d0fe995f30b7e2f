#pragma once

#include "uvsplat/camera.hpp"
#include "uvsplat/container.hpp"
#include "uvsplat/gaussian_model.hpp"
#include "uvsplat/losses.hpp"
#include "uvsplat/mesh.hpp"
#include "uvsplat/optimizer.hpp"
#include "uvsplat/renderer.hpp"

namespace uvsplat {

struct FitConfig {
  int iterations = 600;
  AdamWConfig adamw;   // learning rate 2e-4, weight decay 0
  LossWeights weights;
  uint64_t seed = 0;
  bool learn_color_residual = false;  // optimize a residual on top of the fixed colors
  int checkpoint_interval = 0;        // 0 disables checkpoints
  std::string checkpoint_dir;

  void validate() const {
    require(iterations >= 1, ErrorCode::invalid_config, "iterations must be >= 1");
    adamw.validate();
    weights.validate();
    require(checkpoint_interval >= 0, ErrorCode::invalid_config,
            "checkpoint interval must be >= 0");
  }
};

struct EvalCheckpoint {
  int iteration = 0;
  double psnr_mean = 0, ssim_mean = 0;
};

struct FitReport {
  std::vector<double> loss_trace;          // one entry per iteration
  std::vector<EvalCheckpoint> checkpoints; // held-out metrics at checkpoints
  double seconds_forward = 0, seconds_loss = 0, seconds_backward = 0, seconds_step = 0,
         seconds_total = 0;
};

struct ViewMetrics {
  int view = 0;
  double psnr_db = 0, ssim = 0, l1 = 0;
};

struct EvalReport {
  std::vector<ViewMetrics> views;
  double psnr_mean = 0, ssim_mean = 0, l1_mean = 0;
  std::string to_json() const;
};

// Renders every view and reports PSNR/SSIM/L1 per view plus means. An empty
// view list yields an empty report.
EvalReport evaluate(const ParamMapSet& maps, const CaptureSet& views,
                    const RenderConfig& rcfg = {});

// Core loop: render all input views, composite loss, analytic backward,
// scatter per-Gaussian gradients to their (level, texel) map slots, AdamW on
// the raw quat/scale/opacity maps. Positions and colors stay untouched.
// Deterministic given config, inputs and thread count. start_iteration > 0
// continues a checkpointed run.
FitReport optimize_maps(ParamMapSet& maps, const CaptureSet& inputs, const FitConfig& cfg,
                        const CaptureSet* heldout = nullptr, const RenderConfig& rcfg = {},
                        int start_iteration = 0);

// Full per-subject pipeline from a template and calibrated views: scaffolds,
// UV geometry, visibility-weighted color aggregation, map initialization, fit.
struct FitOutput {
  ParamMapSet maps;
  FitReport report;
};
FitOutput fit_subject(const CaptureSet& capture, const TemplateMesh& templ, const FitConfig& cfg,
                      int uv_resolution, double offset_step, int scaffold_count,
                      const CaptureSet* heldout = nullptr, double depth_bias = 0.005);

// Checkpoint = parameter container + optimizer moments + iteration counter.
// Resuming reproduces the uninterrupted run exactly.
struct Checkpoint {
  ParamMapSet maps;
  std::vector<AdamWState> states;  // 4 per level: quat, scale, opacity, color residual
  int iteration = 0;
};
void save_checkpoint(const std::string& dir, const ParamMapSet& maps,
                     const std::vector<AdamWState>& states, int iteration);
Checkpoint load_checkpoint(const std::string& dir);

// Continues a checkpointed fit up to cfg.iterations; the returned trace covers
// iterations [checkpoint.iteration, cfg.iterations) and matches the
// uninterrupted run bit for bit.
FitReport resume_fit(Checkpoint& checkpoint, const CaptureSet& inputs, const FitConfig& cfg,
                     const CaptureSet* heldout = nullptr, const RenderConfig& rcfg = {});

}  // namespace uvsplat
