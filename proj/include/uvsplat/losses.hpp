#pragma once

#include <span>

#include "uvsplat/image.hpp"

namespace uvsplat {

struct LossWeights {
  double l1 = 0.8;
  double ssim = 0.2;
  double mask = 0.02;
  int target_views = 3;

  void validate() const {
    require(l1 >= 0 && ssim >= 0 && mask >= 0, ErrorCode::invalid_config,
            "loss weights must be >= 0");
    require(target_views >= 1, ErrorCode::invalid_config, "target view count must be >= 1");
  }
};

struct LossResult {
  double value = 0;
  ImageD grad;  // d value / d pred
};

// mean absolute error; subgradient 0 where pred == gt
LossResult l1_loss(const ImageD& pred, const ImageD& gt);

// mean SSIM, 11x11 Gaussian window (sigma 1.5), C1=0.01^2, C2=0.03^2 on unit
// range, mirrored borders
double ssim(const ImageD& a, const ImageD& b);

// 1 - mean SSIM with its analytic gradient
LossResult ssim_loss(const ImageD& pred, const ImageD& gt);

// mean binary cross entropy; alpha clamped to [1e-6, 1-1e-6] before the logs
LossResult mask_loss(const ImageD& pred_alpha, const ImageD& gt_mask);

// the weighted per-view average: (lambda_1 L1 + lambda_ssim Lssim + lambda_mask Lmask) / N
double combine_weighted_terms(double l1_term, double ssim_term, double mask_term,
                              const LossWeights& w, int n_views);

struct ViewPrediction {
  const ImageD* color = nullptr;
  const ImageD* alpha = nullptr;
};
struct ViewTarget {
  const ImageD* image = nullptr;
  const ImageD* mask = nullptr;
};

struct CompositeResult {
  double value = 0;
  double l1_sum = 0, ssim_sum = 0, mask_sum = 0;  // unweighted per-view sums
  std::vector<ImageD> grad_color;
  std::vector<ImageD> grad_alpha;
};

CompositeResult composite_loss(std::span<const ViewPrediction> preds,
                               std::span<const ViewTarget> targets, const LossWeights& w);

// 10 log10(peak^2 / MSE), capped at 99 dB once MSE < 1e-12
double psnr(const ImageD& pred, const ImageD& gt, double peak = 1.0);

}  // namespace uvsplat
