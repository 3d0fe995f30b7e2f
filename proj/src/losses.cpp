#include "uvsplat/losses.hpp"

#include <array>
#include <cmath>

namespace uvsplat {

LossResult l1_loss(const ImageD& pred, const ImageD& gt) {
  check_same_shape(pred, gt, "l1_loss");
  LossResult res;
  res.grad = ImageD(pred.height, pred.width, pred.channels, 0.0);
  const double inv_n = 1.0 / double(pred.size());
  double sum = 0.0;
  for (size_t i = 0; i < pred.data.size(); ++i) {
    const double d = pred.data[i] - gt.data[i];
    sum += std::abs(d);
    res.grad.data[i] = d > 0.0 ? inv_n : (d < 0.0 ? -inv_n : 0.0);
  }
  res.value = sum * inv_n;
  return res;
}

namespace {

constexpr int kWindow = 11;
constexpr int kRadius = kWindow / 2;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

const std::array<double, kWindow>& gaussian_kernel() {
  static const std::array<double, kWindow> k = [] {
    std::array<double, kWindow> w{};
    const double sigma = 1.5;
    double sum = 0.0;
    for (int i = 0; i < kWindow; ++i) {
      const double d = i - kRadius;
      w[i] = std::exp(-d * d / (2.0 * sigma * sigma));
      sum += w[i];
    }
    for (auto& v : w) v /= sum;
    return w;
  }();
  return k;
}

// half-sample symmetric reflection; total for any n >= 1
inline int mirror(int i, int n) {
  while (i < 0 || i >= n) {
    if (i < 0) i = -1 - i;
    if (i >= n) i = 2 * n - 1 - i;
  }
  return i;
}

// separable Gaussian blur of one channel plane with mirrored borders
void blur_plane(const std::vector<double>& in, int H, int W, std::vector<double>& tmp,
                std::vector<double>& out) {
  const auto& k = gaussian_kernel();
  parallel_chunks(H, 16, [&](int64_t, int64_t rb, int64_t re) {
    for (int64_t r = rb; r < re; ++r)
      for (int c = 0; c < W; ++c) {
        double acc = 0.0;
        for (int o = -kRadius; o <= kRadius; ++o)
          acc += k[o + kRadius] * in[size_t(r) * W + mirror(c + o, W)];
        tmp[size_t(r) * W + c] = acc;
      }
  });
  parallel_chunks(W, 64, [&](int64_t, int64_t cb, int64_t ce) {
    for (int64_t c = cb; c < ce; ++c)
      for (int r = 0; r < H; ++r) {
        double acc = 0.0;
        for (int o = -kRadius; o <= kRadius; ++o)
          acc += k[o + kRadius] * tmp[size_t(mirror(r + o, H)) * W + c];
        out[size_t(r) * W + c] = acc;
      }
  });
}

// adjoint of blur_plane: scatter through the same mirrored taps, in reverse
// (vertical adjoint first, then horizontal)
void blur_plane_adjoint(const std::vector<double>& in, int H, int W, std::vector<double>& tmp,
                        std::vector<double>& out) {
  const auto& k = gaussian_kernel();
  std::fill(tmp.begin(), tmp.end(), 0.0);
  parallel_chunks(W, 64, [&](int64_t, int64_t cb, int64_t ce) {
    for (int64_t c = cb; c < ce; ++c)
      for (int r = 0; r < H; ++r) {
        const double v = in[size_t(r) * W + c];
        if (v == 0.0) continue;
        for (int o = -kRadius; o <= kRadius; ++o)
          tmp[size_t(mirror(r + o, H)) * W + c] += k[o + kRadius] * v;
      }
  });
  std::fill(out.begin(), out.end(), 0.0);
  parallel_chunks(H, 16, [&](int64_t, int64_t rb, int64_t re) {
    for (int64_t r = rb; r < re; ++r)
      for (int c = 0; c < W; ++c) {
        const double v = tmp[size_t(r) * W + c];
        if (v == 0.0) continue;
        for (int o = -kRadius; o <= kRadius; ++o)
          out[size_t(r) * W + mirror(c + o, W)] += k[o + kRadius] * v;
      }
  });
}

struct SsimPlanes {
  std::vector<double> x, y, u, uy, v, vy, m;
};

void extract_channel(const ImageD& img, int ch, std::vector<double>& plane) {
  const size_t n = size_t(img.height) * img.width;
  plane.resize(n);
  for (size_t p = 0; p < n; ++p) plane[p] = img.data[p * img.channels + ch];
}

double ssim_channel(const ImageD& a, const ImageD& b, int ch, SsimPlanes& pl,
                    std::vector<double>* grad_plane) {
  const int H = a.height, W = a.width;
  const size_t n = size_t(H) * W;
  extract_channel(a, ch, pl.x);
  extract_channel(b, ch, pl.y);

  std::vector<double> tmp(n), prod(n);
  pl.u.resize(n);
  pl.uy.resize(n);
  pl.v.resize(n);
  pl.vy.resize(n);
  pl.m.resize(n);
  blur_plane(pl.x, H, W, tmp, pl.u);
  blur_plane(pl.y, H, W, tmp, pl.uy);
  for (size_t p = 0; p < n; ++p) prod[p] = pl.x[p] * pl.x[p];
  blur_plane(prod, H, W, tmp, pl.v);
  for (size_t p = 0; p < n; ++p) prod[p] = pl.y[p] * pl.y[p];
  blur_plane(prod, H, W, tmp, pl.vy);
  for (size_t p = 0; p < n; ++p) prod[p] = pl.x[p] * pl.y[p];
  blur_plane(prod, H, W, tmp, pl.m);

  double sum = 0.0;
  std::vector<double> du, dv, dm;
  if (grad_plane) {
    du.assign(n, 0.0);
    dv.assign(n, 0.0);
    dm.assign(n, 0.0);
  }
  for (size_t p = 0; p < n; ++p) {
    const double u = pl.u[p], uy = pl.uy[p];
    const double sx2 = pl.v[p] - u * u;
    const double sy2 = pl.vy[p] - uy * uy;
    const double sxy = pl.m[p] - u * uy;
    const double a1 = 2.0 * u * uy + kC1;
    const double a2 = 2.0 * sxy + kC2;
    const double b1 = u * u + uy * uy + kC1;
    const double b2 = sx2 + sy2 + kC2;
    const double denom = b1 * b2;
    const double s = a1 * a2 / denom;
    sum += s;
    if (grad_plane) {
      const double da1 = a2 / denom;
      const double da2 = a1 / denom;
      const double db1 = -s / b1;
      const double db2 = -s / b2;
      du[p] = da1 * 2.0 * uy + db1 * 2.0 * u + da2 * -2.0 * uy + db2 * -2.0 * u;
      dv[p] = db2;
      dm[p] = da2 * 2.0;
    }
  }

  if (grad_plane) {
    std::vector<double> adj(n);
    grad_plane->assign(n, 0.0);
    blur_plane_adjoint(du, H, W, tmp, adj);
    for (size_t p = 0; p < n; ++p) (*grad_plane)[p] += adj[p];
    blur_plane_adjoint(dv, H, W, tmp, adj);
    for (size_t p = 0; p < n; ++p) (*grad_plane)[p] += adj[p] * 2.0 * pl.x[p];
    blur_plane_adjoint(dm, H, W, tmp, adj);
    for (size_t p = 0; p < n; ++p) (*grad_plane)[p] += adj[p] * pl.y[p];
  }
  return sum;
}

}  // namespace

double ssim(const ImageD& a, const ImageD& b) {
  check_same_shape(a, b, "ssim");
  SsimPlanes pl;
  double sum = 0.0;
  for (int ch = 0; ch < a.channels; ++ch) sum += ssim_channel(a, b, ch, pl, nullptr);
  return sum / double(a.size());
}

LossResult ssim_loss(const ImageD& pred, const ImageD& gt) {
  check_same_shape(pred, gt, "ssim_loss");
  LossResult res;
  res.grad = ImageD(pred.height, pred.width, pred.channels, 0.0);
  SsimPlanes pl;
  std::vector<double> grad_plane;
  const size_t n = size_t(pred.height) * pred.width;
  double sum = 0.0;
  for (int ch = 0; ch < pred.channels; ++ch) {
    sum += ssim_channel(pred, gt, ch, pl, &grad_plane);
    // loss = 1 - mean(S): each d S / d x picks up -1/(H W C)
    const double scale = -1.0 / double(pred.size());
    for (size_t p = 0; p < n; ++p)
      res.grad.data[p * pred.channels + ch] = scale * grad_plane[p];
  }
  res.value = 1.0 - sum / double(pred.size());
  return res;
}

LossResult mask_loss(const ImageD& pred_alpha, const ImageD& gt_mask) {
  check_same_shape(pred_alpha, gt_mask, "mask_loss");
  constexpr double kEps = 1e-6;
  LossResult res;
  res.grad = ImageD(pred_alpha.height, pred_alpha.width, pred_alpha.channels, 0.0);
  const double inv_n = 1.0 / double(pred_alpha.size());
  double sum = 0.0;
  for (size_t i = 0; i < pred_alpha.data.size(); ++i) {
    const double raw = pred_alpha.data[i];
    const double a = std::clamp(raw, kEps, 1.0 - kEps);
    const double m = gt_mask.data[i];
    sum += -(m * std::log(a) + (1.0 - m) * std::log(1.0 - a));
    // zero slope where the clamp is active
    if (raw > kEps && raw < 1.0 - kEps)
      res.grad.data[i] = -(m / a - (1.0 - m) / (1.0 - a)) * inv_n;
  }
  res.value = sum * inv_n;
  return res;
}

double combine_weighted_terms(double l1_term, double ssim_term, double mask_term,
                              const LossWeights& w, int n_views) {
  require(n_views >= 1, ErrorCode::count_mismatch, "need at least one view");
  return (w.l1 * l1_term + w.ssim * ssim_term + w.mask * mask_term) / double(n_views);
}

CompositeResult composite_loss(std::span<const ViewPrediction> preds,
                               std::span<const ViewTarget> targets, const LossWeights& w) {
  require(preds.size() == targets.size(), ErrorCode::count_mismatch,
          "prediction/target view counts differ");
  require(!preds.empty(), ErrorCode::count_mismatch, "need at least one view pair");
  w.validate();

  const int n = int(preds.size());
  const double inv_n = 1.0 / double(n);
  CompositeResult res;
  res.grad_color.resize(preds.size());
  res.grad_alpha.resize(preds.size());

  for (size_t v = 0; v < preds.size(); ++v) {
    LossResult l1 = l1_loss(*preds[v].color, *targets[v].image);
    LossResult ss = ssim_loss(*preds[v].color, *targets[v].image);
    LossResult bce = mask_loss(*preds[v].alpha, *targets[v].mask);
    res.l1_sum += l1.value;
    res.ssim_sum += ss.value;
    res.mask_sum += bce.value;

    ImageD gc(l1.grad.height, l1.grad.width, l1.grad.channels, 0.0);
    for (size_t i = 0; i < gc.data.size(); ++i)
      gc.data[i] = (w.l1 * l1.grad.data[i] + w.ssim * ss.grad.data[i]) * inv_n;
    res.grad_color[v] = std::move(gc);

    ImageD ga = std::move(bce.grad);
    for (auto& g : ga.data) g *= w.mask * inv_n;
    res.grad_alpha[v] = std::move(ga);
  }
  res.value = combine_weighted_terms(res.l1_sum, res.ssim_sum, res.mask_sum, w, n);
  return res;
}

double psnr(const ImageD& pred, const ImageD& gt, double peak) {
  check_same_shape(pred, gt, "psnr");
  double sum = 0.0;
  for (size_t i = 0; i < pred.data.size(); ++i) {
    const double d = pred.data[i] - gt.data[i];
    sum += d * d;
  }
  const double mse = sum / double(pred.size());
  if (mse < 1e-12) return 99.0;
  return 10.0 * std::log10(peak * peak / mse);
}

}  // namespace uvsplat
