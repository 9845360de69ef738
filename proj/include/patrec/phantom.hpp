#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "patrec/field.hpp"
#include "patrec/rng.hpp"

namespace patrec::phantom {

// Axis lengths of the support ellipse {x^2/0.69^2 + y^2/0.92^2 <= 1}. All
// phantom content must stay inside it so the wave sources never touch the
// detector circle.
inline constexpr double kSupportA = 0.69;
inline constexpr double kSupportB = 0.92;

struct Ellipse {
  double semi_x;     // semi-axis along the local x direction, > 0
  double semi_y;     // semi-axis along the local y direction, > 0
  double center_x;   // in [-1, 1]
  double center_y;   // in [-1, 1]
  double angle;      // ccw rotation, radians
  double intensity;  // additive value
};

bool contains_point(const Ellipse& e, double x, double y);

// Exact containment of e inside the support ellipse, via maximising the
// normalized boundary radius (dense scan + Newton refinement).
bool contained_in_support(const Ellipse& e);

// The canonical 10-ellipse head phantom with intensities scaled so the
// summed image lies in [0, 1].
std::vector<Ellipse> shepp_logan();

// Sum of intensities of all ellipses covering each node, without clamping.
Field rasterize_raw(std::span<const Ellipse> ellipses, int m);

// rasterize_raw clamped to [0, 1]. Throws if m < 8 or if any ellipse has a
// non-positive axis or escapes the support ellipse.
Field rasterize(std::span<const Ellipse> ellipses, int m);

// One random phantom: every parameter of every canonical ellipse scaled by
// (1 + u), u ~ U[-jitter, jitter], redrawn per ellipse until the containment
// invariant holds. Throws after a bounded number of rejections.
std::vector<Ellipse> sample_phantom(Rng& rng, double jitter = 0.05);

struct Dataset {
  std::vector<Field> train;
  std::vector<Field> validation;
  std::vector<Field> test;
  std::uint64_t seed = 0;
  double jitter = 0.05;
  int m = 0;
};

// Deterministic dataset; phantom i draws from the (seed, i) stream so the
// content of each split entry is independent of generation order. Every
// phantom is guaranteed to have at least one nonzero pixel.
Dataset build_dataset(std::uint64_t seed, int m, int n_train, int n_val, int n_test,
                      double jitter = 0.05);

} // namespace patrec::phantom
