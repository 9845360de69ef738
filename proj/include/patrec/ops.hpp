#pragma once

#include <algorithm>
#include <cmath>

#include "patrec/tensor.hpp"

// Pointwise, reduction and shape primitives. Each op computes its value
// eagerly and, when a Graph is active and an input is tracked, records a
// closure that routes the output cotangent back to its inputs.

namespace patrec::diff {

namespace detail {

template <class S>
void check_same_shape(const Tensor<S>& a, const Tensor<S>& b, const char* what) {
  if (a.shape() != b.shape())
    throw std::invalid_argument(std::string(what) + ": shape mismatch");
}

} // namespace detail

template <class S>
Tensor<S> add(const Tensor<S>& a, const Tensor<S>& b) {
  detail::check_same_shape(a, b, "add");
  Tensor<S> out = Tensor<S>::zeros(a.shape());
  auto av = a.value(), bv = b.value();
  auto ov = out.value();
  for (std::int64_t i = 0; i < out.numel(); ++i) ov[i] = av[i] + bv[i];
  if (detail::should_track<S>(a, b)) {
    out.set_requires_grad(true);
    Graph<S>::active()->record([a, b, out]() {
      if (!out.has_grad()) return;
      auto og = out.grad();
      if (a.requires_grad()) {
        auto ag = a.grad();
        for (std::size_t i = 0; i < og.size(); ++i) ag[i] += og[i];
      }
      if (b.requires_grad()) {
        auto bg = b.grad();
        for (std::size_t i = 0; i < og.size(); ++i) bg[i] += og[i];
      }
    });
  }
  return out;
}

template <class S>
Tensor<S> sub(const Tensor<S>& a, const Tensor<S>& b) {
  detail::check_same_shape(a, b, "sub");
  Tensor<S> out = Tensor<S>::zeros(a.shape());
  auto av = a.value(), bv = b.value();
  auto ov = out.value();
  for (std::int64_t i = 0; i < out.numel(); ++i) ov[i] = av[i] - bv[i];
  if (detail::should_track<S>(a, b)) {
    out.set_requires_grad(true);
    Graph<S>::active()->record([a, b, out]() {
      if (!out.has_grad()) return;
      auto og = out.grad();
      if (a.requires_grad()) {
        auto ag = a.grad();
        for (std::size_t i = 0; i < og.size(); ++i) ag[i] += og[i];
      }
      if (b.requires_grad()) {
        auto bg = b.grad();
        for (std::size_t i = 0; i < og.size(); ++i) bg[i] -= og[i];
      }
    });
  }
  return out;
}

template <class S>
Tensor<S> mul(const Tensor<S>& a, const Tensor<S>& b) {
  detail::check_same_shape(a, b, "mul");
  Tensor<S> out = Tensor<S>::zeros(a.shape());
  auto av = a.value(), bv = b.value();
  auto ov = out.value();
  for (std::int64_t i = 0; i < out.numel(); ++i) ov[i] = av[i] * bv[i];
  if (detail::should_track<S>(a, b)) {
    out.set_requires_grad(true);
    Graph<S>::active()->record([a, b, out]() {
      if (!out.has_grad()) return;
      auto og = out.grad();
      auto av = a.value(), bv = b.value();
      if (a.requires_grad()) {
        auto ag = a.grad();
        for (std::size_t i = 0; i < og.size(); ++i) ag[i] += og[i] * bv[i];
      }
      if (b.requires_grad()) {
        auto bg = b.grad();
        for (std::size_t i = 0; i < og.size(); ++i) bg[i] += og[i] * av[i];
      }
    });
  }
  return out;
}

// y = scale * x + shift
template <class S>
Tensor<S> affine(const Tensor<S>& x, S scale, S shift = S(0)) {
  Tensor<S> out = Tensor<S>::zeros(x.shape());
  auto xv = x.value();
  auto ov = out.value();
  for (std::int64_t i = 0; i < out.numel(); ++i) ov[i] = scale * xv[i] + shift;
  if (detail::should_track<S>(x)) {
    out.set_requires_grad(true);
    Graph<S>::active()->record([x, out, scale]() {
      if (!out.has_grad()) return;
      auto og = out.grad();
      auto xg = x.grad();
      for (std::size_t i = 0; i < og.size(); ++i) xg[i] += scale * og[i];
    });
  }
  return out;
}

template <class S>
Tensor<S> scale(const Tensor<S>& x, S c) {
  return affine(x, c, S(0));
}

// y = x * s with scalar tensor s (shape {1})
template <class S>
Tensor<S> mul_scalar(const Tensor<S>& x, const Tensor<S>& s) {
  if (s.numel() != 1) throw std::invalid_argument("mul_scalar: s must be scalar");
  Tensor<S> out = Tensor<S>::zeros(x.shape());
  const S sv = s.value()[0];
  auto xv = x.value();
  auto ov = out.value();
  for (std::int64_t i = 0; i < out.numel(); ++i) ov[i] = xv[i] * sv;
  if (detail::should_track<S>(x, s)) {
    out.set_requires_grad(true);
    Graph<S>::active()->record([x, s, out]() {
      if (!out.has_grad()) return;
      auto og = out.grad();
      auto xv = x.value();
      if (x.requires_grad()) {
        auto xg = x.grad();
        const S sv = s.value()[0];
        for (std::size_t i = 0; i < og.size(); ++i) xg[i] += og[i] * sv;
      }
      if (s.requires_grad()) {
        double acc = 0;
        for (std::size_t i = 0; i < og.size(); ++i)
          acc += static_cast<double>(og[i]) * static_cast<double>(xv[i]);
        s.grad()[0] += static_cast<S>(acc);
      }
    });
  }
  return out;
}

template <class S>
Tensor<S> relu(const Tensor<S>& x) {
  Tensor<S> out = Tensor<S>::zeros(x.shape());
  auto xv = x.value();
  auto ov = out.value();
  for (std::int64_t i = 0; i < out.numel(); ++i) ov[i] = xv[i] > S(0) ? xv[i] : S(0);
  if (detail::should_track<S>(x)) {
    out.set_requires_grad(true);
    Graph<S>::active()->record([x, out]() {
      if (!out.has_grad()) return;
      auto og = out.grad();
      auto xv = x.value();
      auto xg = x.grad();
      for (std::size_t i = 0; i < og.size(); ++i)
        if (xv[i] > S(0)) xg[i] += og[i];
    });
  }
  return out;
}

template <class S>
Tensor<S> tanh_op(const Tensor<S>& x) {
  Tensor<S> out = Tensor<S>::zeros(x.shape());
  auto xv = x.value();
  auto ov = out.value();
  for (std::int64_t i = 0; i < out.numel(); ++i) ov[i] = std::tanh(xv[i]);
  if (detail::should_track<S>(x)) {
    out.set_requires_grad(true);
    Graph<S>::active()->record([x, out]() {
      if (!out.has_grad()) return;
      auto og = out.grad();
      auto ov = out.value();
      auto xg = x.grad();
      for (std::size_t i = 0; i < og.size(); ++i)
        xg[i] += og[i] * (S(1) - ov[i] * ov[i]);
    });
  }
  return out;
}

// min(max(x, 0), 1). The cotangent passes through on the closed interval
// [0, 1]; saturated pixels receive no gradient, so a reconstruction pinned at
// an endpoint can only be pulled back by pixels still in range.
template <class S>
Tensor<S> clamp01(const Tensor<S>& x) {
  Tensor<S> out = Tensor<S>::zeros(x.shape());
  auto xv = x.value();
  auto ov = out.value();
  for (std::int64_t i = 0; i < out.numel(); ++i)
    ov[i] = std::clamp(xv[i], S(0), S(1));
  if (detail::should_track<S>(x)) {
    out.set_requires_grad(true);
    Graph<S>::active()->record([x, out]() {
      if (!out.has_grad()) return;
      auto og = out.grad();
      auto xv = x.value();
      auto xg = x.grad();
      for (std::size_t i = 0; i < og.size(); ++i)
        if (xv[i] >= S(0) && xv[i] <= S(1)) xg[i] += og[i];
    });
  }
  return out;
}

// max(x, floor); gradient passes where x >= floor
template <class S>
Tensor<S> floor_at(const Tensor<S>& x, S floor) {
  Tensor<S> out = Tensor<S>::zeros(x.shape());
  auto xv = x.value();
  auto ov = out.value();
  for (std::int64_t i = 0; i < out.numel(); ++i) ov[i] = std::max(xv[i], floor);
  if (detail::should_track<S>(x)) {
    out.set_requires_grad(true);
    Graph<S>::active()->record([x, out, floor]() {
      if (!out.has_grad()) return;
      auto og = out.grad();
      auto xv = x.value();
      auto xg = x.grad();
      for (std::size_t i = 0; i < og.size(); ++i)
        if (xv[i] >= floor) xg[i] += og[i];
    });
  }
  return out;
}

template <class S>
Tensor<S> reshape(const Tensor<S>& x, std::vector<int> shape) {
  if (detail::shape_numel(shape) != x.numel())
    throw std::invalid_argument("reshape: element count mismatch");
  Tensor<S> out = Tensor<S>::from_vector(std::move(shape),
                                         std::vector<S>(x.value().begin(), x.value().end()));
  if (detail::should_track<S>(x)) {
    out.set_requires_grad(true);
    Graph<S>::active()->record([x, out]() {
      if (!out.has_grad()) return;
      auto og = out.grad();
      auto xg = x.grad();
      for (std::size_t i = 0; i < og.size(); ++i) xg[i] += og[i];
    });
  }
  return out;
}

// Places the {h, w} input at (row_off, col_off) inside a {rows, cols} field
// filled with a constant. The fill receives no gradient.
template <class S>
Tensor<S> embed(const Tensor<S>& x, int rows, int cols, int row_off, int col_off,
                S fill = S(0)) {
  if (x.ndim() != 2) throw std::invalid_argument("embed: input must be 2-d");
  const int h = x.dim(0), w = x.dim(1);
  if (row_off < 0 || col_off < 0 || row_off + h > rows || col_off + w > cols)
    throw std::invalid_argument("embed: window out of range");
  Tensor<S> out = Tensor<S>::full({rows, cols}, fill);
  auto xv = x.value();
  auto ov = out.value();
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j)
      ov[static_cast<std::size_t>(row_off + i) * cols + col_off + j] =
          xv[static_cast<std::size_t>(i) * w + j];
  if (detail::should_track<S>(x)) {
    out.set_requires_grad(true);
    Graph<S>::active()->record([x, out, rows, cols, row_off, col_off, h, w]() {
      if (!out.has_grad()) return;
      auto og = out.grad();
      auto xg = x.grad();
      for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j)
          xg[static_cast<std::size_t>(i) * w + j] +=
              og[static_cast<std::size_t>(row_off + i) * cols + col_off + j];
    });
  }
  return out;
}

template <class S>
Tensor<S> sum(const Tensor<S>& x) {
  double acc = 0;
  for (S v : x.value()) acc += static_cast<double>(v);
  Tensor<S> out = Tensor<S>::scalar(static_cast<S>(acc));
  if (detail::should_track<S>(x)) {
    out.set_requires_grad(true);
    Graph<S>::active()->record([x, out]() {
      if (!out.has_grad()) return;
      const S g = out.grad()[0];
      auto xg = x.grad();
      for (std::size_t i = 0; i < xg.size(); ++i) xg[i] += g;
    });
  }
  return out;
}

// Euclidean (Frobenius) norm as a scalar tensor.
template <class S>
Tensor<S> norm2(const Tensor<S>& x) {
  double acc = 0;
  for (S v : x.value()) acc += static_cast<double>(v) * static_cast<double>(v);
  const double n = std::sqrt(acc);
  Tensor<S> out = Tensor<S>::scalar(static_cast<S>(n));
  if (detail::should_track<S>(x)) {
    out.set_requires_grad(true);
    Graph<S>::active()->record([x, out]() {
      if (!out.has_grad()) return;
      const double n = static_cast<double>(out.value()[0]);
      if (n == 0.0) return;  // subgradient 0 at the origin
      const double g = static_cast<double>(out.grad()[0]) / n;
      auto xv = x.value();
      auto xg = x.grad();
      for (std::size_t i = 0; i < xg.size(); ++i)
        xg[i] += static_cast<S>(g * static_cast<double>(xv[i]));
    });
  }
  return out;
}

// Scalar division a / b for {1}-shaped tensors.
template <class S>
Tensor<S> div_scalar(const Tensor<S>& a, const Tensor<S>& b) {
  if (a.numel() != 1 || b.numel() != 1)
    throw std::invalid_argument("div_scalar: operands must be scalars");
  const S bv = b.value()[0];
  if (bv == S(0)) throw std::domain_error("div_scalar: zero denominator");
  Tensor<S> out = Tensor<S>::scalar(a.value()[0] / bv);
  if (detail::should_track<S>(a, b)) {
    out.set_requires_grad(true);
    Graph<S>::active()->record([a, b, out]() {
      if (!out.has_grad()) return;
      const S g = out.grad()[0];
      const S av = a.value()[0], bv = b.value()[0];
      if (a.requires_grad()) a.grad()[0] += g / bv;
      if (b.requires_grad()) b.grad()[0] -= g * av / (bv * bv);
    });
  }
  return out;
}

} // namespace patrec::diff
