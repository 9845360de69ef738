#pragma once

#include <Eigen/Core>
#include <fftw3.h>

#include <utility>

#include "patrec/ops.hpp"

// Network-layer primitives: dense and convolutional maps (im2col + GEMM),
// pooling, channel concat, the pixel shuffle pair and graph-integrated FFTs.
// Image tensors are {C, H, W}; dense inputs are {N, in}.

namespace patrec::diff {

namespace detail {

template <class S>
using MatRM = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class S>
using MapM = Eigen::Map<MatRM<S>>;
template <class S>
using CMapM = Eigen::Map<const MatRM<S>>;

// Patch matrix (Ho*Wo, Cin*kh*kw) of the zero-padded input.
template <class S>
MatRM<S> im2col(std::span<const S> x, int C, int H, int W, int kh, int kw, int stride,
                int pad, int Ho, int Wo) {
  MatRM<S> cols(Ho * Wo, C * kh * kw);
  cols.setZero();
  for (int oh = 0; oh < Ho; ++oh) {
    for (int ow = 0; ow < Wo; ++ow) {
      const int r = oh * Wo + ow;
      for (int c = 0; c < C; ++c) {
        for (int ki = 0; ki < kh; ++ki) {
          const int ih = oh * stride - pad + ki;
          if (ih < 0 || ih >= H) continue;
          for (int kj = 0; kj < kw; ++kj) {
            const int iw = ow * stride - pad + kj;
            if (iw < 0 || iw >= W) continue;
            cols(r, (c * kh + ki) * kw + kj) =
                x[(static_cast<std::size_t>(c) * H + ih) * W + iw];
          }
        }
      }
    }
  }
  return cols;
}

template <class S>
void col2im_add(const MatRM<S>& cols, std::span<S> xg, int C, int H, int W, int kh,
                int kw, int stride, int pad, int Ho, int Wo) {
  for (int oh = 0; oh < Ho; ++oh) {
    for (int ow = 0; ow < Wo; ++ow) {
      const int r = oh * Wo + ow;
      for (int c = 0; c < C; ++c) {
        for (int ki = 0; ki < kh; ++ki) {
          const int ih = oh * stride - pad + ki;
          if (ih < 0 || ih >= H) continue;
          for (int kj = 0; kj < kw; ++kj) {
            const int iw = ow * stride - pad + kj;
            if (iw < 0 || iw >= W) continue;
            xg[(static_cast<std::size_t>(c) * H + ih) * W + iw] +=
                cols(r, (c * kh + ki) * kw + kj);
          }
        }
      }
    }
  }
}

} // namespace detail

// y = x W (+ b): x {N, in}, W {in, out}, optional b {out}.
template <class S>
Tensor<S> dense(const Tensor<S>& x, const Tensor<S>& W, const Tensor<S>& b = {}) {
  if (x.ndim() != 2 || W.ndim() != 2 || x.dim(1) != W.dim(0))
    throw std::invalid_argument("dense: shape mismatch");
  const int N = x.dim(0), in = x.dim(1), out_dim = W.dim(1);
  if (b.defined() && (b.ndim() != 1 || b.dim(0) != out_dim))
    throw std::invalid_argument("dense: bias shape mismatch");

  Tensor<S> out = Tensor<S>::zeros({N, out_dim});
  {
    detail::CMapM<S> X(x.value().data(), N, in), Wm(W.value().data(), in, out_dim);
    detail::MapM<S> Y(out.value().data(), N, out_dim);
    Y.noalias() = X * Wm;
    if (b.defined()) {
      detail::CMapM<S> bm(b.value().data(), 1, out_dim);
      Y.rowwise() += bm.row(0);
    }
  }
  const bool track = b.defined() ? detail::should_track<S>(x, W, b)
                                 : detail::should_track<S>(x, W);
  if (track) {
    out.set_requires_grad(true);
    Graph<S>::active()->record([x, W, b, out, N, in, out_dim]() {
      if (!out.has_grad()) return;
      detail::CMapM<S> dY(out.grad().data(), N, out_dim);
      if (x.requires_grad()) {
        detail::CMapM<S> Wm(W.value().data(), in, out_dim);
        detail::MapM<S> dX(x.grad().data(), N, in);
        dX.noalias() += dY * Wm.transpose();
      }
      if (W.requires_grad()) {
        detail::CMapM<S> X(x.value().data(), N, in);
        detail::MapM<S> dW(W.grad().data(), in, out_dim);
        dW.noalias() += X.transpose() * dY;
      }
      if (b.defined() && b.requires_grad()) {
        detail::MapM<S> db(b.grad().data(), 1, out_dim);
        db.row(0) += dY.colwise().sum();
      }
    });
  }
  return out;
}

// x {Cin, H, W}, K {Cout, Cin, kh, kw}, optional bias {Cout}; zero padding.
template <class S>
Tensor<S> conv2d(const Tensor<S>& x, const Tensor<S>& K, const Tensor<S>& b = {},
                 int stride = 1, int pad = 0) {
  if (x.ndim() != 3 || K.ndim() != 4 || x.dim(0) != K.dim(1))
    throw std::invalid_argument("conv2d: shape mismatch");
  const int Cin = x.dim(0), H = x.dim(1), W = x.dim(2);
  const int Cout = K.dim(0), kh = K.dim(2), kw = K.dim(3);
  if (b.defined() && (b.ndim() != 1 || b.dim(0) != Cout))
    throw std::invalid_argument("conv2d: bias shape mismatch");
  const int Ho = (H + 2 * pad - kh) / stride + 1;
  const int Wo = (W + 2 * pad - kw) / stride + 1;
  if (Ho <= 0 || Wo <= 0) throw std::invalid_argument("conv2d: empty output");

  Tensor<S> out = Tensor<S>::zeros({Cout, Ho, Wo});
  {
    auto cols = detail::im2col<S>(x.value(), Cin, H, W, kh, kw, stride, pad, Ho, Wo);
    detail::CMapM<S> Km(K.value().data(), Cout, Cin * kh * kw);
    detail::MapM<S> Y(out.value().data(), Cout, Ho * Wo);
    Y.noalias() = Km * cols.transpose();
    if (b.defined()) {
      auto bv = b.value();
      for (int c = 0; c < Cout; ++c) Y.row(c).array() += bv[c];
    }
  }
  const bool track = b.defined() ? detail::should_track<S>(x, K, b)
                                 : detail::should_track<S>(x, K);
  if (track) {
    out.set_requires_grad(true);
    Graph<S>::active()->record([x, K, b, out, stride, pad, Ho, Wo]() {
      if (!out.has_grad()) return;
      const int Cin = x.dim(0), H = x.dim(1), W = x.dim(2);
      const int Cout = K.dim(0), kh = K.dim(2), kw = K.dim(3);
      detail::CMapM<S> dY(out.grad().data(), Cout, Ho * Wo);
      if (K.requires_grad()) {
        auto cols = detail::im2col<S>(x.value(), Cin, H, W, kh, kw, stride, pad, Ho, Wo);
        detail::MapM<S> dK(K.grad().data(), Cout, Cin * kh * kw);
        dK.noalias() += dY * cols;
      }
      if (x.requires_grad()) {
        detail::CMapM<S> Km(K.value().data(), Cout, Cin * kh * kw);
        detail::MatRM<S> dcols = dY.transpose() * Km;  // (HoWo, Cin*kh*kw)
        detail::col2im_add<S>(dcols, x.grad(), Cin, H, W, kh, kw, stride, pad, Ho, Wo);
      }
      if (b.defined() && b.requires_grad()) {
        auto bg = b.grad();
        for (int c = 0; c < Cout; ++c) bg[c] += dY.row(c).sum();
      }
    });
  }
  return out;
}

// Transposed convolution, x {Cin, H, W}, K {Cin, Cout, kh, kw};
// output {Cout, (H-1)*stride + kh, (W-1)*stride + kw}.
template <class S>
Tensor<S> conv_transpose2(const Tensor<S>& x, const Tensor<S>& K, int stride = 2) {
  if (x.ndim() != 3 || K.ndim() != 4 || x.dim(0) != K.dim(0))
    throw std::invalid_argument("conv_transpose2: shape mismatch");
  const int Cin = x.dim(0), H = x.dim(1), W = x.dim(2);
  const int Cout = K.dim(1), kh = K.dim(2), kw = K.dim(3);
  const int Ho = (H - 1) * stride + kh, Wo = (W - 1) * stride + kw;

  Tensor<S> out = Tensor<S>::zeros({Cout, Ho, Wo});
  {
    // rows of x as (H*W, Cin) times K as (Cin, Cout*kh*kw), then scatter-add
    detail::CMapM<S> Xt(x.value().data(), Cin, H * W);
    detail::CMapM<S> Km(K.value().data(), Cin, Cout * kh * kw);
    detail::MatRM<S> cols = Xt.transpose() * Km;
    auto ov = out.value();
    for (int r = 0; r < H * W; ++r) {
      const int ih = r / W, iw = r % W;
      for (int c = 0; c < Cout; ++c)
        for (int ki = 0; ki < kh; ++ki)
          for (int kj = 0; kj < kw; ++kj)
            ov[(static_cast<std::size_t>(c) * Ho + ih * stride + ki) * Wo + iw * stride +
               kj] += cols(r, (c * kh + ki) * kw + kj);
    }
  }
  if (detail::should_track<S>(x, K)) {
    out.set_requires_grad(true);
    Graph<S>::active()->record([x, K, out, stride]() {
      if (!out.has_grad()) return;
      const int Cin = x.dim(0), H = x.dim(1), W = x.dim(2);
      const int Cout = K.dim(1), kh = K.dim(2), kw = K.dim(3);
      const int Ho = out.dim(1), Wo = out.dim(2);
      auto og = out.grad();
      detail::MatRM<S> dcols(H * W, Cout * kh * kw);
      for (int r = 0; r < H * W; ++r) {
        const int ih = r / W, iw = r % W;
        for (int c = 0; c < Cout; ++c)
          for (int ki = 0; ki < kh; ++ki)
            for (int kj = 0; kj < kw; ++kj)
              dcols(r, (c * kh + ki) * kw + kj) =
                  og[(static_cast<std::size_t>(c) * Ho + ih * stride + ki) * Wo +
                     iw * stride + kj];
      }
      if (x.requires_grad()) {
        detail::CMapM<S> Km(K.value().data(), Cin, Cout * kh * kw);
        detail::MapM<S> dXt(x.grad().data(), Cin, H * W);
        dXt.noalias() += Km * dcols.transpose();
      }
      if (K.requires_grad()) {
        detail::CMapM<S> Xt(x.value().data(), Cin, H * W);
        detail::MapM<S> dK(K.grad().data(), Cin, Cout * kh * kw);
        dK.noalias() += Xt * dcols;
      }
    });
  }
  return out;
}

// 2x2 max pooling, stride 2; ties resolve to the first maximum in scan order.
template <class S>
Tensor<S> max_pool2(const Tensor<S>& x) {
  if (x.ndim() != 3 || x.dim(1) % 2 != 0 || x.dim(2) % 2 != 0)
    throw std::invalid_argument("max_pool2: input must be {C, even, even}");
  const int C = x.dim(0), H = x.dim(1), W = x.dim(2);
  const int Ho = H / 2, Wo = W / 2;
  Tensor<S> out = Tensor<S>::zeros({C, Ho, Wo});
  auto argmax = std::make_shared<std::vector<std::int64_t>>(out.numel());
  {
    auto xv = x.value();
    auto ov = out.value();
    std::size_t o = 0;
    for (int c = 0; c < C; ++c) {
      for (int oh = 0; oh < Ho; ++oh) {
        for (int ow = 0; ow < Wo; ++ow, ++o) {
          std::int64_t best_idx = -1;
          S best = S(0);
          for (int di = 0; di < 2; ++di) {
            for (int dj = 0; dj < 2; ++dj) {
              const std::int64_t idx =
                  (static_cast<std::int64_t>(c) * H + 2 * oh + di) * W + 2 * ow + dj;
              if (best_idx < 0 || xv[idx] > best) {
                best = xv[idx];
                best_idx = idx;
              }
            }
          }
          ov[o] = best;
          (*argmax)[o] = best_idx;
        }
      }
    }
  }
  if (detail::should_track<S>(x)) {
    out.set_requires_grad(true);
    Graph<S>::active()->record([x, out, argmax]() {
      if (!out.has_grad()) return;
      auto og = out.grad();
      auto xg = x.grad();
      for (std::size_t o = 0; o < og.size(); ++o) xg[(*argmax)[o]] += og[o];
    });
  }
  return out;
}

template <class S>
Tensor<S> concat_channels(const Tensor<S>& a, const Tensor<S>& b) {
  if (a.ndim() != 3 || b.ndim() != 3 || a.dim(1) != b.dim(1) || a.dim(2) != b.dim(2))
    throw std::invalid_argument("concat_channels: spatial shape mismatch");
  const int Ca = a.dim(0), Cb = b.dim(0), H = a.dim(1), W = a.dim(2);
  Tensor<S> out = Tensor<S>::zeros({Ca + Cb, H, W});
  auto ov = out.value();
  std::copy(a.value().begin(), a.value().end(), ov.begin());
  std::copy(b.value().begin(), b.value().end(), ov.begin() + a.numel());
  if (detail::should_track<S>(a, b)) {
    out.set_requires_grad(true);
    Graph<S>::active()->record([a, b, out]() {
      if (!out.has_grad()) return;
      auto og = out.grad();
      if (a.requires_grad()) {
        auto ag = a.grad();
        for (std::size_t i = 0; i < ag.size(); ++i) ag[i] += og[i];
      }
      if (b.requires_grad()) {
        auto bg = b.grad();
        const std::size_t off = a.value().size();
        for (std::size_t i = 0; i < bg.size(); ++i) bg[i] += og[off + i];
      }
    });
  }
  return out;
}

// {H, W} -> {4, H/2, W/2}; sub-images are the interleaved parities in the
// order (even,even), (even,odd), (odd,even), (odd,odd).
template <class S>
Tensor<S> pixel_unshuffle(const Tensor<S>& x) {
  if (x.ndim() != 2 || x.dim(0) % 2 != 0 || x.dim(1) % 2 != 0)
    throw std::invalid_argument("pixel_unshuffle: input must be even-sized 2-d");
  const int H = x.dim(0), W = x.dim(1);
  const int h = H / 2, w = W / 2;
  Tensor<S> out = Tensor<S>::zeros({4, h, w});
  auto xv = x.value();
  auto ov = out.value();
  for (int pi = 0; pi < 2; ++pi)
    for (int pj = 0; pj < 2; ++pj)
      for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j)
          ov[(static_cast<std::size_t>(pi * 2 + pj) * h + i) * w + j] =
              xv[static_cast<std::size_t>(2 * i + pi) * W + 2 * j + pj];
  if (detail::should_track<S>(x)) {
    out.set_requires_grad(true);
    Graph<S>::active()->record([x, out, h, w, W]() {
      if (!out.has_grad()) return;
      auto og = out.grad();
      auto xg = x.grad();
      for (int pi = 0; pi < 2; ++pi)
        for (int pj = 0; pj < 2; ++pj)
          for (int i = 0; i < h; ++i)
            for (int j = 0; j < w; ++j)
              xg[static_cast<std::size_t>(2 * i + pi) * W + 2 * j + pj] +=
                  og[(static_cast<std::size_t>(pi * 2 + pj) * h + i) * w + j];
    });
  }
  return out;
}

// Exact inverse of pixel_unshuffle: {4, h, w} -> {2h, 2w}.
template <class S>
Tensor<S> pixel_shuffle(const Tensor<S>& x) {
  if (x.ndim() != 3 || x.dim(0) != 4)
    throw std::invalid_argument("pixel_shuffle: input must be {4, h, w}");
  const int h = x.dim(1), w = x.dim(2);
  const int H = 2 * h, W = 2 * w;
  Tensor<S> out = Tensor<S>::zeros({H, W});
  auto xv = x.value();
  auto ov = out.value();
  for (int pi = 0; pi < 2; ++pi)
    for (int pj = 0; pj < 2; ++pj)
      for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j)
          ov[static_cast<std::size_t>(2 * i + pi) * W + 2 * j + pj] =
              xv[(static_cast<std::size_t>(pi * 2 + pj) * h + i) * w + j];
  if (detail::should_track<S>(x)) {
    out.set_requires_grad(true);
    Graph<S>::active()->record([x, out, h, w, W]() {
      if (!out.has_grad()) return;
      auto og = out.grad();
      auto xg = x.grad();
      for (int pi = 0; pi < 2; ++pi)
        for (int pj = 0; pj < 2; ++pj)
          for (int i = 0; i < h; ++i)
            for (int j = 0; j < w; ++j)
              xg[(static_cast<std::size_t>(pi * 2 + pj) * h + i) * w + j] +=
                  og[static_cast<std::size_t>(2 * i + pi) * W + 2 * j + pj];
    });
  }
  return out;
}

template <class S>
Tensor<S> select_channel(const Tensor<S>& x, int c) {
  if (x.ndim() != 3 || c < 0 || c >= x.dim(0))
    throw std::invalid_argument("select_channel: bad channel");
  const int H = x.dim(1), W = x.dim(2);
  const std::size_t plane = static_cast<std::size_t>(H) * W;
  Tensor<S> out = Tensor<S>::zeros({H, W});
  std::copy(x.value().begin() + c * plane, x.value().begin() + (c + 1) * plane,
            out.value().begin());
  if (detail::should_track<S>(x)) {
    out.set_requires_grad(true);
    Graph<S>::active()->record([x, out, c, plane]() {
      if (!out.has_grad()) return;
      auto og = out.grad();
      auto xg = x.grad();
      for (std::size_t i = 0; i < plane; ++i) xg[c * plane + i] += og[i];
    });
  }
  return out;
}

template <class S>
Tensor<S> stack_channels(const std::vector<Tensor<S>>& xs) {
  if (xs.empty()) throw std::invalid_argument("stack_channels: empty input");
  const int H = xs[0].dim(0), W = xs[0].dim(1);
  for (const auto& x : xs)
    if (x.ndim() != 2 || x.dim(0) != H || x.dim(1) != W)
      throw std::invalid_argument("stack_channels: shape mismatch");
  const std::size_t plane = static_cast<std::size_t>(H) * W;
  Tensor<S> out = Tensor<S>::zeros({static_cast<int>(xs.size()), H, W});
  auto ov = out.value();
  for (std::size_t c = 0; c < xs.size(); ++c)
    std::copy(xs[c].value().begin(), xs[c].value().end(), ov.begin() + c * plane);
  bool track = Graph<S>::active() != nullptr;
  bool any = false;
  for (const auto& x : xs) any = any || x.requires_grad();
  if (track && any) {
    out.set_requires_grad(true);
    Graph<S>::active()->record([xs, out, plane]() {
      if (!out.has_grad()) return;
      auto og = out.grad();
      for (std::size_t c = 0; c < xs.size(); ++c) {
        if (!xs[c].requires_grad()) continue;
        auto xg = xs[c].grad();
        for (std::size_t i = 0; i < plane; ++i) xg[i] += og[c * plane + i];
      }
    });
  }
  return out;
}

namespace detail {

// Unnormalized c2c transform of a (re, im) pair held as two real arrays.
// Computed in double regardless of S.
template <class S>
void fft2_c2c(std::span<const S> re, std::span<const S> im, std::span<S> re_out,
              std::span<S> im_out, int H, int W, int sign) {
  const std::size_t n = static_cast<std::size_t>(H) * W;
  fftw_complex* buf = fftw_alloc_complex(n);
  for (std::size_t i = 0; i < n; ++i) {
    buf[i][0] = static_cast<double>(re[i]);
    buf[i][1] = static_cast<double>(im[i]);
  }
  fftw_plan p = fftw_plan_dft_2d(H, W, buf, buf, sign, FFTW_ESTIMATE);
  fftw_execute(p);
  fftw_destroy_plan(p);
  for (std::size_t i = 0; i < n; ++i) {
    re_out[i] = static_cast<S>(buf[i][0]);
    im_out[i] = static_cast<S>(buf[i][1]);
  }
  fftw_free(buf);
}

} // namespace detail

// Unnormalized forward 2-D DFT of a complex pair; the backward rule is the
// conjugate transpose, i.e. an unnormalized inverse transform.
template <class S>
std::pair<Tensor<S>, Tensor<S>> fft2(const Tensor<S>& re, const Tensor<S>& im) {
  detail::check_same_shape(re, im, "fft2");
  if (re.ndim() != 2) throw std::invalid_argument("fft2: input must be 2-d");
  const int H = re.dim(0), W = re.dim(1);
  Tensor<S> ore = Tensor<S>::zeros(re.shape()), oim = Tensor<S>::zeros(re.shape());
  detail::fft2_c2c<S>(re.value(), im.value(), ore.value(), oim.value(), H, W,
                      FFTW_FORWARD);
  if (detail::should_track<S>(re, im)) {
    ore.set_requires_grad(true);
    oim.set_requires_grad(true);
    Graph<S>::active()->record([re, im, ore, oim, H, W]() {
      if (!ore.has_grad() && !oim.has_grad()) return;
      std::vector<S> zero(re.numel(), S(0));
      std::span<const S> gre = ore.has_grad() ? ore.grad() : std::span<const S>(zero);
      std::span<const S> gim = oim.has_grad() ? oim.grad() : std::span<const S>(zero);
      std::vector<S> bre(re.numel()), bim(re.numel());
      detail::fft2_c2c<S>(gre, gim, std::span<S>(bre), std::span<S>(bim), H, W,
                          FFTW_BACKWARD);
      if (re.requires_grad()) {
        auto g = re.grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += bre[i];
      }
      if (im.requires_grad()) {
        auto g = im.grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += bim[i];
      }
    });
  }
  return {ore, oim};
}

// Normalized inverse 2-D DFT (1/(H*W)); inverse of fft2.
template <class S>
std::pair<Tensor<S>, Tensor<S>> ifft2(const Tensor<S>& re, const Tensor<S>& im) {
  detail::check_same_shape(re, im, "ifft2");
  if (re.ndim() != 2) throw std::invalid_argument("ifft2: input must be 2-d");
  const int H = re.dim(0), W = re.dim(1);
  const S inv_n = S(1) / static_cast<S>(static_cast<std::int64_t>(H) * W);
  Tensor<S> ore = Tensor<S>::zeros(re.shape()), oim = Tensor<S>::zeros(re.shape());
  detail::fft2_c2c<S>(re.value(), im.value(), ore.value(), oim.value(), H, W,
                      FFTW_BACKWARD);
  for (auto& v : ore.value()) v *= inv_n;
  for (auto& v : oim.value()) v *= inv_n;
  if (detail::should_track<S>(re, im)) {
    ore.set_requires_grad(true);
    oim.set_requires_grad(true);
    Graph<S>::active()->record([re, im, ore, oim, H, W, inv_n]() {
      if (!ore.has_grad() && !oim.has_grad()) return;
      std::vector<S> zero(re.numel(), S(0));
      std::span<const S> gre = ore.has_grad() ? ore.grad() : std::span<const S>(zero);
      std::span<const S> gim = oim.has_grad() ? oim.grad() : std::span<const S>(zero);
      std::vector<S> bre(re.numel()), bim(re.numel());
      detail::fft2_c2c<S>(gre, gim, std::span<S>(bre), std::span<S>(bim), H, W,
                          FFTW_FORWARD);
      if (re.requires_grad()) {
        auto g = re.grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += inv_n * bre[i];
      }
      if (im.requires_grad()) {
        auto g = im.grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += inv_n * bim[i];
      }
    });
  }
  return {ore, oim};
}

} // namespace patrec::diff
