#include <doctest.h>

#include <cmath>

#include "patrec/adam.hpp"
#include "patrec/layers.hpp"
#include "patrec/ops.hpp"
#include "support/gradcheck.hpp"

using namespace patrec;
using namespace patrec::diff;
using patrec::testing::grad_check;

namespace {

template <class S>
Tensor<S> random_tensor(std::vector<int> shape, Rng& rng, double lo = -1.0,
                        double hi = 1.0) {
  Tensor<S> t = Tensor<S>::zeros(std::move(shape));
  for (auto& v : t.value()) v = static_cast<S>(rng.uniform(lo, hi));
  return t;
}

// random but kink-free inputs for relu / clamp style ops
template <class S>
Tensor<S> margin_tensor(std::vector<int> shape, Rng& rng) {
  Tensor<S> t = Tensor<S>::zeros(std::move(shape));
  for (auto& v : t.value()) {
    double x = rng.uniform(-1.5, 1.5);
    for (double kink : {0.0, 1.0, 0.01})
      if (std::abs(x - kink) < 0.05) x += 0.1;
    v = static_cast<S>(x);
  }
  return t;
}

template <class S>
Tensor<S> weight_tensor(std::vector<int> shape, Rng& rng) {
  return random_tensor<S>(std::move(shape), rng, -0.5, 0.5);
}

} // namespace

TEST_CASE("finite differences validate every primitive (64-bit)") {
  Rng rng(2024, 0);
  const double h = 1e-6;
  const double tol = 1e-6;

  SUBCASE("pointwise and arithmetic") {
    auto a = random_tensor<double>({3, 4}, rng);
    auto b = random_tensor<double>({3, 4}, rng);
    auto w = random_tensor<double>({3, 4}, rng);
    auto s = random_tensor<double>({1}, rng, 0.5, 1.5);
    auto check = [&](auto&& fwd, std::vector<Tensor<double>> ins) {
      auto rep = grad_check<double>(fwd, ins, h, 64, 7);
      CHECK(rep.max_rel_err <= tol);
    };
    check([&] { return sum(mul(w, add(a, b))); }, {a, b});
    check([&] { return sum(mul(w, sub(a, b))); }, {a, b});
    check([&] { return sum(mul(w, mul(a, b))); }, {a, b});
    check([&] { return sum(mul(w, affine(a, 1.7, -0.3))); }, {a});
    check([&] { return sum(mul(w, mul_scalar(a, s))); }, {a, s});
    check([&] { return norm2(a); }, {a});
    check([&] { return div_scalar(norm2(a), norm2(b)); }, {a, b});
    check([&] { return sum(mul(w, tanh_op(a))); }, {a});
    auto w43 = random_tensor<double>({4, 3}, rng);
    check([&] { return sum(mul(w43, reshape(a, {4, 3}))); }, {a});
  }

  SUBCASE("kinked pointwise ops away from their kinks") {
    auto a = margin_tensor<double>({5, 5}, rng);
    auto w = random_tensor<double>({5, 5}, rng);
    auto rep = grad_check<double>([&] { return sum(mul(w, relu(a))); }, {a}, h, 64, 8);
    CHECK(rep.max_rel_err <= tol);
    rep = grad_check<double>([&] { return sum(mul(w, clamp01(a))); }, {a}, h, 64, 9);
    CHECK(rep.max_rel_err <= tol);
    rep = grad_check<double>([&] { return sum(mul(w, floor_at(a, 0.01))); }, {a}, h, 64, 10);
    CHECK(rep.max_rel_err <= tol);
  }

  SUBCASE("dense") {
    auto x = random_tensor<double>({3, 5}, rng);
    auto W = weight_tensor<double>({5, 4}, rng);
    auto b = weight_tensor<double>({4}, rng);
    auto w = random_tensor<double>({3, 4}, rng);
    auto rep = grad_check<double>([&] { return sum(mul(w, dense(x, W, b))); },
                                  {x, W, b}, h, 64, 11);
    CHECK(rep.max_rel_err <= tol);
  }

  SUBCASE("conv2d stride 1 same padding") {
    auto x = random_tensor<double>({2, 6, 6}, rng);
    auto K = weight_tensor<double>({3, 2, 3, 3}, rng);
    auto b = weight_tensor<double>({3}, rng);
    auto w = random_tensor<double>({3, 6, 6}, rng);
    auto rep = grad_check<double>([&] { return sum(mul(w, conv2d(x, K, b, 1, 1))); },
                                  {x, K, b}, h, 64, 12);
    CHECK(rep.max_rel_err <= tol);
  }

  SUBCASE("conv2d stride 2 no padding") {
    auto x = random_tensor<double>({2, 6, 6}, rng);
    auto K = weight_tensor<double>({3, 2, 2, 2}, rng);
    auto w = random_tensor<double>({3, 3, 3}, rng);
    auto rep = grad_check<double>([&] { return sum(mul(w, conv2d(x, K, {}, 2, 0))); },
                                  {x, K}, h, 64, 13);
    CHECK(rep.max_rel_err <= tol);
  }

  SUBCASE("transposed conv 2x2 stride 2") {
    auto x = random_tensor<double>({3, 4, 4}, rng);
    auto K = weight_tensor<double>({3, 2, 2, 2}, rng);
    auto w = random_tensor<double>({2, 8, 8}, rng);
    auto rep = grad_check<double>([&] { return sum(mul(w, conv_transpose2(x, K, 2))); },
                                  {x, K}, h, 64, 14);
    CHECK(rep.max_rel_err <= tol);
  }

  SUBCASE("max pooling (distinct values)") {
    auto x = Tensor<double>::zeros({2, 4, 4});
    double val = 0.11;
    for (auto& v : x.value()) {
      v = val;
      val = std::fmod(val * 1.618 + 0.37, 2.0) - 1.0;  // spread, no ties
    }
    auto w = random_tensor<double>({2, 2, 2}, rng);
    auto rep = grad_check<double>([&] { return sum(mul(w, max_pool2(x))); }, {x}, h, 64, 15);
    CHECK(rep.max_rel_err <= tol);
  }

  SUBCASE("concat, channel select/stack, shuffles, embed") {
    auto a = random_tensor<double>({2, 4, 4}, rng);
    auto b = random_tensor<double>({3, 4, 4}, rng);
    auto w = random_tensor<double>({5, 4, 4}, rng);
    auto rep = grad_check<double>([&] { return sum(mul(w, concat_channels(a, b))); },
                                  {a, b}, h, 64, 16);
    CHECK(rep.max_rel_err <= tol);

    auto img = random_tensor<double>({6, 6}, rng);
    auto w2 = random_tensor<double>({4, 3, 3}, rng);
    rep = grad_check<double>([&] { return sum(mul(w2, pixel_unshuffle(img))); },
                             {img}, h, 64, 17);
    CHECK(rep.max_rel_err <= tol);

    auto quads = random_tensor<double>({4, 3, 3}, rng);
    auto w3 = random_tensor<double>({6, 6}, rng);
    rep = grad_check<double>([&] { return sum(mul(w3, pixel_shuffle(quads))); },
                             {quads}, h, 64, 18);
    CHECK(rep.max_rel_err <= tol);

    auto w4 = random_tensor<double>({4, 4}, rng);
    rep = grad_check<double>(
        [&] { return sum(mul(w4, select_channel(b, 1))); }, {b}, h, 64, 19);
    CHECK(rep.max_rel_err <= tol);

    auto small = random_tensor<double>({3, 3}, rng);
    auto w5 = random_tensor<double>({8, 8}, rng);
    rep = grad_check<double>(
        [&] { return sum(mul(w5, embed(small, 8, 8, 2, 3, 0.7))); }, {small}, h, 64, 20);
    CHECK(rep.max_rel_err <= tol);
  }

  SUBCASE("fft2 and ifft2") {
    auto re = random_tensor<double>({4, 4}, rng);
    auto im = random_tensor<double>({4, 4}, rng);
    auto wr = random_tensor<double>({4, 4}, rng);
    auto wi = random_tensor<double>({4, 4}, rng);
    auto rep = grad_check<double>(
        [&] {
          auto [yr, yi] = fft2(re, im);
          return add(sum(mul(wr, yr)), sum(mul(wi, yi)));
        },
        {re, im}, h, 64, 21);
    CHECK(rep.max_rel_err <= tol);
    rep = grad_check<double>(
        [&] {
          auto [yr, yi] = ifft2(re, im);
          return add(sum(mul(wr, yr)), sum(mul(wi, yi)));
        },
        {re, im}, h, 64, 22);
    CHECK(rep.max_rel_err <= tol);
  }
}

TEST_CASE("conv with a one-hot center kernel is the identity") {
  Rng rng(5, 5);
  auto x = random_tensor<double>({1, 5, 5}, rng);
  auto K = Tensor<double>::zeros({1, 1, 3, 3});
  K.value()[4] = 1.0;  // center tap
  auto y = conv2d(x, K, {}, 1, 1);
  for (std::int64_t i = 0; i < x.numel(); ++i)
    CHECK(y.value()[i] == doctest::Approx(x.value()[i]));
}

TEST_CASE("relu gradient is the step function") {
  auto x = Tensor<double>::from_vector({3}, {-2.0, 0.5, 3.0}, true);
  Graph<double> g;
  auto y = sum(relu(x));
  g.backward(y);
  CHECK(x.grad()[0] == 0.0);
  CHECK(x.grad()[1] == 1.0);
  CHECK(x.grad()[2] == 1.0);
}

TEST_CASE("clamp01 values, gradients, idempotence") {
  auto x = Tensor<double>::from_vector({3}, {-0.2, 0.5, 1.3}, true);
  auto y = clamp01(x);
  CHECK(y.value()[0] == 0.0);
  CHECK(y.value()[1] == 0.5);
  CHECK(y.value()[2] == 1.0);
  auto z = clamp01(y);
  CHECK(z.value()[0] == y.value()[0]);
  CHECK(z.value()[1] == y.value()[1]);
  CHECK(z.value()[2] == y.value()[2]);
  Graph<double> g;
  auto s = sum(clamp01(x));
  g.backward(s);
  CHECK(x.grad()[0] == 0.0);
  CHECK(x.grad()[1] == 1.0);
  CHECK(x.grad()[2] == 0.0);
}

TEST_CASE("pixel unshuffle: 2x2 example, parity collection, exact inverse") {
  auto x = Tensor<double>::from_vector({2, 2}, {1, 2, 3, 4});
  auto u = pixel_unshuffle(x);
  CHECK(u.value()[0] == 1.0);  // (even, even)
  CHECK(u.value()[1] == 2.0);  // (even, odd)
  CHECK(u.value()[2] == 3.0);  // (odd, even)
  CHECK(u.value()[3] == 4.0);  // (odd, odd)

  // 4x4: the (even,even) sub-image collects (0,0),(0,2),(2,0),(2,2)
  std::vector<double> vals(16);
  for (int i = 0; i < 16; ++i) vals[i] = i;
  auto x4 = Tensor<double>::from_vector({4, 4}, vals);
  auto u4 = pixel_unshuffle(x4);
  CHECK(u4.value()[0] == 0.0);
  CHECK(u4.value()[1] == 2.0);
  CHECK(u4.value()[2] == 8.0);
  CHECK(u4.value()[3] == 10.0);

  Rng rng(8, 8);
  auto r = random_tensor<double>({8, 8}, rng);
  auto round = pixel_shuffle(pixel_unshuffle(r));
  for (std::int64_t i = 0; i < r.numel(); ++i)
    CHECK(round.value()[i] == r.value()[i]);  // bitwise
}

TEST_CASE("unshuffle -> linear maps -> shuffle is linear (superposition)") {
  Rng rng(13, 0);
  const int m = 8, q = (m / 2) * (m / 2);
  std::vector<Tensor<double>> mats;
  for (int j = 0; j < 4; ++j) mats.push_back(weight_tensor<double>({q, q}, rng));
  auto apply = [&](const Tensor<double>& g) {
    auto sub = pixel_unshuffle(g);
    std::vector<Tensor<double>> mapped;
    for (int j = 0; j < 4; ++j)
      mapped.push_back(
          reshape(dense(reshape(select_channel(sub, j), {1, q}), mats[j]), {m / 2, m / 2}));
    return pixel_shuffle(stack_channels(mapped));
  };
  auto x = random_tensor<double>({m, m}, rng);
  auto y = random_tensor<double>({m, m}, rng);
  const double a = 1.3, b = -0.7;
  auto lhs = apply(add(scale(x, a), scale(y, b)));
  auto rhs = add(scale(apply(x), a), scale(apply(y), b));
  for (std::int64_t i = 0; i < lhs.numel(); ++i)
    CHECK(std::abs(lhs.value()[i] - rhs.value()[i]) <= 1e-12);
}

TEST_CASE("fan-out accumulates: d(x+x)/dx = 2 exactly") {
  auto x = Tensor<double>::from_vector({1}, {0.37}, true);
  Graph<double> g;
  auto y = add(x, x);
  g.backward(y);
  CHECK(x.grad()[0] == 2.0);
}

TEST_CASE("backward before forward and shape mismatches raise") {
  auto x = Tensor<double>::from_vector({1}, {1.0}, true);
  {
    Graph<double> g;
    CHECK_THROWS_AS(g.backward(x), std::logic_error);
  }
  auto a = Tensor<double>::zeros({2, 3});
  auto b = Tensor<double>::zeros({3, 2});
  CHECK_THROWS_AS(add(a, b), std::invalid_argument);
  CHECK_THROWS_AS(dense(a, a), std::invalid_argument);
}

TEST_CASE("adam: zero gradient, first-step value, defaults") {
  // fresh state, zero gradient -> zero update
  auto p = Tensor<double>::from_vector({2}, {1.0, -2.0}, true);
  Adam<double> opt;
  opt.add_group({p}, 1e-3);
  p.grad();  // allocate zeros
  opt.step();
  CHECK(p.value()[0] == 1.0);
  CHECK(p.value()[1] == -2.0);
  CHECK(opt.step_count() == 1);

  // first step with g = 1: update = -lr / (1 + eps) after bias correction
  auto q = Tensor<double>::from_vector({1}, {0.0}, true);
  Adam<double> opt2;
  opt2.add_group({q}, 1e-3);
  q.grad()[0] = 1.0;
  opt2.step();
  const double expect = -1e-3 * 1.0 / (1.0 + 1e-8);
  CHECK(q.value()[0] == doctest::Approx(expect).epsilon(1e-14));

  Adam<double>::Hyper hp;
  CHECK(hp.beta1 == 0.9);
  CHECK(hp.beta2 == 0.999);
}
