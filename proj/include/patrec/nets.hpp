#pragma once

#include <string>
#include <vector>

#include "patrec/kspace.hpp"
#include "patrec/layers.hpp"
#include "patrec/ops.hpp"
#include "patrec/rng.hpp"

namespace patrec::models {

using diff::Tensor;

template <class S>
using NamedTensors = std::vector<std::pair<std::string, Tensor<S>>>;

namespace detail {

// U(-1/sqrt(fan_in), 1/sqrt(fan_in)), the usual fan-in scaled init.
template <class S>
Tensor<S> uniform_init(std::vector<int> shape, int fan_in, Rng& rng) {
  Tensor<S> t = Tensor<S>::zeros(std::move(shape), true);
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (auto& v : t.value()) v = static_cast<S>(rng.uniform(-bound, bound));
  return t;
}

} // namespace detail

// Scalar network approximating the speed law on [0, 1]: an MLP with three
// hidden layers of 10 nodes, tanh activations, and an output manipulation
// that pins the endpoints to c0 and c1 for any parameter values:
//
//   M(f) = MLP(f) - MLP(0)(1 - f) - MLP(1) f + ((c1 - c0) f + c0)
template <class S>
class MappingNet {
 public:
  MappingNet() = default;
  MappingNet(double c0, double c1, Rng& rng) : c0_(c0), c1_(c1) {
    W_[0] = detail::uniform_init<S>({1, 10}, 1, rng);
    b_[0] = detail::uniform_init<S>({10}, 1, rng);
    W_[1] = detail::uniform_init<S>({10, 10}, 10, rng);
    b_[1] = detail::uniform_init<S>({10}, 10, rng);
    W_[2] = detail::uniform_init<S>({10, 10}, 10, rng);
    b_[2] = detail::uniform_init<S>({10}, 10, rng);
    W_[3] = detail::uniform_init<S>({10, 1}, 10, rng);
    b_[3] = detail::uniform_init<S>({1}, 10, rng);
  }

  double c0() const { return c0_; }
  double c1() const { return c1_; }

  Tensor<S> raw_mlp(const Tensor<S>& x) const {
    Tensor<S> h = x;
    for (int l = 0; l < 3; ++l) h = diff::tanh_op(diff::dense(h, W_[l], b_[l]));
    return diff::dense(h, W_[3], b_[3]);
  }

  // Elementwise over any shape; inputs are clamped to [0, 1] first.
  Tensor<S> forward(const Tensor<S>& v) const {
    const auto out_shape = v.shape();
    const int n = static_cast<int>(v.numel());
    Tensor<S> f = diff::reshape(diff::clamp01(v), {n, 1});
    Tensor<S> mf = raw_mlp(f);
    Tensor<S> m0 = raw_mlp(Tensor<S>::zeros({1, 1}));
    Tensor<S> m1 = raw_mlp(Tensor<S>::full({1, 1}, S(1)));
    Tensor<S> t0 = diff::mul_scalar(diff::affine(f, S(-1), S(1)), m0);
    Tensor<S> t1 = diff::mul_scalar(f, m1);
    Tensor<S> lin = diff::affine(f, static_cast<S>(c1_ - c0_), static_cast<S>(c0_));
    Tensor<S> out = diff::add(diff::sub(diff::sub(mf, t0), t1), lin);
    return diff::reshape(out, out_shape);
  }

  // Plain scalar evaluation (no graph).
  double eval(double v) const {
    Tensor<S> x = Tensor<S>::scalar(static_cast<S>(v));
    return static_cast<double>(forward(x).value()[0]);
  }

  std::vector<Tensor<S>> params() const {
    return {W_[0], b_[0], W_[1], b_[1], W_[2], b_[2], W_[3], b_[3]};
  }

  void collect(const std::string& prefix, NamedTensors<S>& out) const {
    for (int l = 0; l < 4; ++l) {
      out.emplace_back(prefix + ".W" + std::to_string(l + 1), W_[l]);
      out.emplace_back(prefix + ".b" + std::to_string(l + 1), b_[l]);
    }
  }

 private:
  double c0_ = 0.7, c1_ = 1.0;
  Tensor<S> W_[4], b_[4];
};

struct UNetConfig {
  int levels = 3;          // number of 2x2 poolings
  int base_channels = 32;  // channels at full resolution, doubled per level
};

// Contracting/expansive U-Net: two 3x3 same-padded convs + relu per block,
// max-pool down, transposed-conv up, skip connections by channel concat, and
// a final 1x1 projection.
template <class S>
class UNet {
 public:
  UNet() = default;
  UNet(int in_channels, UNetConfig cfg, Rng& rng) : cfg_(cfg) {
    int ch_in = in_channels;
    for (int d = 0; d <= cfg.levels; ++d) {
      const int ch = cfg.base_channels << d;
      enc_.push_back(make_block(ch_in, ch, rng));
      ch_in = ch;
    }
    for (int d = cfg.levels - 1; d >= 0; --d) {
      const int ch = cfg.base_channels << d;
      up_.push_back(detail::uniform_init<S>({2 * ch, ch, 2, 2}, 2 * ch * 4, rng));
      dec_.push_back(make_block(2 * ch, ch, rng));
    }
    final_K_ = detail::uniform_init<S>({1, cfg.base_channels, 1, 1}, cfg.base_channels, rng);
    final_b_ = Tensor<S>::zeros({1}, true);
  }

  Tensor<S> forward(const Tensor<S>& x) const {
    if (x.ndim() != 3) throw std::invalid_argument("unet: input must be {C, H, W}");
    const int div = 1 << cfg_.levels;
    if (x.dim(1) % div != 0 || x.dim(2) % div != 0)
      throw std::invalid_argument("unet: spatial size must be divisible by 2^levels");
    std::vector<Tensor<S>> skips;
    Tensor<S> cur = x;
    for (int d = 0; d < cfg_.levels; ++d) {
      cur = run_block(enc_[d], cur);
      skips.push_back(cur);
      cur = diff::max_pool2(cur);
    }
    cur = run_block(enc_[cfg_.levels], cur);
    for (int i = 0; i < cfg_.levels; ++i) {
      cur = diff::conv_transpose2(cur, up_[i], 2);
      cur = diff::concat_channels(skips[cfg_.levels - 1 - i], cur);
      cur = run_block(dec_[i], cur);
    }
    return diff::conv2d(cur, final_K_, final_b_, 1, 0);
  }

  std::vector<Tensor<S>> params() const {
    std::vector<Tensor<S>> out;
    for (const auto& b : enc_) append_block(b, out);
    for (const auto& k : up_) out.push_back(k);
    for (const auto& b : dec_) append_block(b, out);
    out.push_back(final_K_);
    out.push_back(final_b_);
    return out;
  }

  void collect(const std::string& prefix, NamedTensors<S>& out) const {
    for (std::size_t d = 0; d < enc_.size(); ++d)
      collect_block(enc_[d], prefix + ".enc" + std::to_string(d), out);
    for (std::size_t i = 0; i < up_.size(); ++i)
      out.emplace_back(prefix + ".up" + std::to_string(i), up_[i]);
    for (std::size_t i = 0; i < dec_.size(); ++i)
      collect_block(dec_[i], prefix + ".dec" + std::to_string(i), out);
    out.emplace_back(prefix + ".final_K", final_K_);
    out.emplace_back(prefix + ".final_b", final_b_);
  }

 private:
  struct Block {
    Tensor<S> K1, b1, K2, b2;
  };

  // Weights get the fan-in init; biases start at zero so the perturbation
  // path of a zero-initialized reconstruction is exactly zero.
  static Block make_block(int ch_in, int ch_out, Rng& rng) {
    Block b;
    b.K1 = detail::uniform_init<S>({ch_out, ch_in, 3, 3}, ch_in * 9, rng);
    b.b1 = Tensor<S>::zeros({ch_out}, true);
    b.K2 = detail::uniform_init<S>({ch_out, ch_out, 3, 3}, ch_out * 9, rng);
    b.b2 = Tensor<S>::zeros({ch_out}, true);
    return b;
  }
  static Tensor<S> run_block(const Block& b, const Tensor<S>& x) {
    Tensor<S> h = diff::relu(diff::conv2d(x, b.K1, b.b1, 1, 1));
    return diff::relu(diff::conv2d(h, b.K2, b.b2, 1, 1));
  }
  static void append_block(const Block& b, std::vector<Tensor<S>>& out) {
    out.push_back(b.K1);
    out.push_back(b.b1);
    out.push_back(b.K2);
    out.push_back(b.b2);
  }
  static void collect_block(const Block& b, const std::string& prefix,
                            NamedTensors<S>& out) {
    out.emplace_back(prefix + ".K1", b.K1);
    out.emplace_back(prefix + ".b1", b.b1);
    out.emplace_back(prefix + ".K2", b.K2);
    out.emplace_back(prefix + ".b2", b.b2);
  }

  UNetConfig cfg_;
  std::vector<Block> enc_;
  std::vector<Tensor<S>> up_;
  std::vector<Block> dec_;
  Tensor<S> final_K_, final_b_;
};

enum class ReconVariant { dense, pixelshuffle };

inline ReconVariant recon_variant_from_string(const std::string& s) {
  if (s == "dense") return ReconVariant::dense;
  if (s == "pixelshuffle") return ReconVariant::pixelshuffle;
  throw std::invalid_argument("unknown reconstruction variant: " + s);
}
inline std::string to_string(ReconVariant v) {
  return v == ReconVariant::dense ? "dense" : "pixelshuffle";
}

// Reconstruction operator: a linear map perturbed by a U-Net, clamped to the
// phantom range. The pixelshuffle variant replaces each m^2 x m^2 matrix by
// four independent maps on the unshuffled quarter-resolution images, a 4x
// parameter reduction per stage.
template <class S>
class ReconstructionNet {
 public:
  ReconstructionNet() = default;
  ReconstructionNet(int m, ReconVariant variant, UNetConfig ucfg, Rng& rng)
      : m_(m), variant_(variant), unet_(1, ucfg, rng) {
    if (variant_ == ReconVariant::dense) {
      T1_.push_back(Tensor<S>::zeros({m * m, m * m}, true));
      T2_.push_back(Tensor<S>::zeros({m * m, m * m}, true));
    } else {
      if (m % 2 != 0)
        throw std::invalid_argument("pixelshuffle variant requires even m");
      const int q = (m / 2) * (m / 2);
      for (int j = 0; j < 4; ++j) {
        T1_.push_back(Tensor<S>::zeros({q, q}, true));
        T2_.push_back(Tensor<S>::zeros({q, q}, true));
      }
    }
  }

  int m() const { return m_; }
  ReconVariant variant() const { return variant_; }
  const UNet<S>& unet() const { return unet_; }

  Tensor<S> forward(const Tensor<S>& g) const {
    if (g.ndim() != 2 || g.dim(0) != m_ || g.dim(1) != m_)
      throw std::invalid_argument("reconstruct: boundary data must be m x m");
    Tensor<S> y1 = linear_stage(g, T1_);
    Tensor<S> y2 = linear_stage(g, T2_);
    Tensor<S> u = diff::reshape(unet_.forward(diff::reshape(y2, {1, m_, m_})), {m_, m_});
    return diff::clamp01(diff::add(y1, u));
  }

  std::vector<Tensor<S>> linear_params() const {
    std::vector<Tensor<S>> out = T1_;
    out.insert(out.end(), T2_.begin(), T2_.end());
    return out;
  }
  std::vector<Tensor<S>> unet_params() const { return unet_.params(); }

  void collect(NamedTensors<S>& out) const {
    for (std::size_t j = 0; j < T1_.size(); ++j)
      out.emplace_back("recon.T1." + std::to_string(j), T1_[j]);
    for (std::size_t j = 0; j < T2_.size(); ++j)
      out.emplace_back("recon.T2." + std::to_string(j), T2_[j]);
    unet_.collect("recon.unet", out);
  }

 private:
  Tensor<S> linear_stage(const Tensor<S>& g, const std::vector<Tensor<S>>& mats) const {
    if (variant_ == ReconVariant::dense) {
      Tensor<S> flat = diff::reshape(g, {1, m_ * m_});
      return diff::reshape(diff::dense(flat, mats[0]), {m_, m_});
    }
    const int h = m_ / 2;
    Tensor<S> sub = diff::pixel_unshuffle(g);
    std::vector<Tensor<S>> mapped;
    for (int j = 0; j < 4; ++j) {
      Tensor<S> flat = diff::reshape(diff::select_channel(sub, j), {1, h * h});
      mapped.push_back(diff::reshape(diff::dense(flat, mats[j]), {h, h}));
    }
    return diff::pixel_shuffle(diff::stack_channels(mapped));
  }

  int m_ = 0;
  ReconVariant variant_ = ReconVariant::dense;
  std::vector<Tensor<S>> T1_, T2_;
  UNet<S> unet_;
};

// Squared-speed field for the simulator: the mapping applied pointwise on the
// interior, floored at eps_c, embedded into the padded grid with the ambient
// value c0 outside. Differentiable through both the phantom estimate and the
// mapping parameters.
template <class S>
Tensor<S> speed_field_from_phantom(const Tensor<S>& f_hat, const MappingNet<S>& mapping,
                                   const kspace::SimGrid& grid, double eps_c = 0.01) {
  if (f_hat.ndim() != 2 || f_hat.dim(0) != grid.m || f_hat.dim(1) != grid.m)
    throw std::invalid_argument("speed_field_from_phantom: estimate must be m x m");
  Tensor<S> mapped = diff::floor_at(mapping.forward(f_hat), static_cast<S>(eps_c));
  const int off = grid.interior_offset();
  return diff::embed(mapped, grid.M, grid.M, off, off, static_cast<S>(mapping.c0()));
}

} // namespace patrec::models
