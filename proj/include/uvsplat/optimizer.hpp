#pragma once

#include <span>
#include <vector>

#include "uvsplat/common.hpp"

namespace uvsplat {

struct AdamWConfig {
  double learning_rate = 2e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;

  void validate() const {
    require(learning_rate > 0.0, ErrorCode::invalid_config, "learning rate must be > 0");
    require(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0,
            ErrorCode::invalid_config, "betas must lie in [0,1)");
    require(eps > 0.0, ErrorCode::invalid_config, "adam eps must be > 0");
  }
};

// Moments live in float32 so a checkpoint restores the optimizer exactly; the
// per-element update itself runs in double.
struct AdamWState {
  std::vector<float> m, v;
  int64_t step = 0;

  void init(size_t n) {
    m.assign(n, 0.0f);
    v.assign(n, 0.0f);
    step = 0;
  }
};

// One decoupled-weight-decay Adam step:
//   m <- b1 m + (1-b1) g;  v <- b2 v + (1-b2) g^2
//   theta <- theta - lr (m_hat / (sqrt(v_hat) + eps) + wd theta)
void adamw_step(std::span<float> params, std::span<const double> grads, AdamWState& state,
                const AdamWConfig& cfg);

}  // namespace uvsplat
