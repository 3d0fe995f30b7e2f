#include "uvsplat/optimizer.hpp"

#include <cmath>

namespace uvsplat {

void adamw_step(std::span<float> params, std::span<const double> grads, AdamWState& state,
                const AdamWConfig& cfg) {
  cfg.validate();
  require(params.size() == grads.size(), ErrorCode::shape_mismatch,
          "param/grad length mismatch");
  if (state.m.size() != params.size()) state.init(params.size());

  ++state.step;
  const double bias1 = 1.0 - std::pow(cfg.beta1, double(state.step));
  const double bias2 = 1.0 - std::pow(cfg.beta2, double(state.step));

  parallel_chunks(int64_t(params.size()), 4096, [&](int64_t, int64_t begin, int64_t end) {
    for (int64_t i = begin; i < end; ++i) {
      const double g = grads[i];
      const double m = cfg.beta1 * double(state.m[i]) + (1.0 - cfg.beta1) * g;
      const double v = cfg.beta2 * double(state.v[i]) + (1.0 - cfg.beta2) * g * g;
      state.m[i] = float(m);
      state.v[i] = float(v);
      const double m_hat = double(state.m[i]) / bias1;
      const double v_hat = double(state.v[i]) / bias2;
      const double theta = double(params[i]);
      params[i] = float(theta - cfg.learning_rate *
                                    (m_hat / (std::sqrt(v_hat) + cfg.eps) +
                                     cfg.weight_decay * theta));
    }
  });
}

}  // namespace uvsplat
