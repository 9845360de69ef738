#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

#include "patrec/dataset_io.hpp"
#include "patrec/phantom.hpp"

using namespace patrec;
using namespace patrec::phantom;

namespace {

// Independent audit: does every boundary sample of e stay inside the support
// ellipse?
bool boundary_inside_support(const Ellipse& e, int n_samples, double tol) {
  for (int k = 0; k < n_samples; ++k) {
    const double t = 2.0 * std::numbers::pi * k / n_samples;
    const double c = std::cos(e.angle), s = std::sin(e.angle);
    const double px = e.semi_x * std::cos(t), py = e.semi_y * std::sin(t);
    const double x = e.center_x + c * px - s * py;
    const double y = e.center_y + s * px + c * py;
    const double r = x * x / (kSupportA * kSupportA) + y * y / (kSupportB * kSupportB);
    if (r > 1.0 + tol) return false;
  }
  return true;
}

std::uint64_t hash_fields(const std::vector<Field>& fs) {
  std::string bytes;
  for (const auto& f : fs)
    bytes.append(reinterpret_cast<const char*>(f.v.data()), f.v.size() * sizeof(double));
  return io::fnv1a(bytes);
}

} // namespace

TEST_CASE("single centered disk rasterizes to expected point values") {
  Ellipse disk{0.5, 0.5, 0.0, 0.0, 0.0, 1.0};
  Field f = rasterize(std::vector<Ellipse>{disk}, 64);
  // node nearest (0,0)
  CHECK(f.at(32, 32) == doctest::Approx(1.0));
  // node nearest (0.9, 0): x_j = -1 + 2j/64 -> j ~ 60.8
  CHECK(f.at(32, 61) == doctest::Approx(0.0));
}

TEST_CASE("empty ellipse list gives the zero phantom") {
  Field f = rasterize(std::vector<Ellipse>{}, 32);
  CHECK(f.max_abs() == 0.0);
}

TEST_CASE("disk area fraction matches the analytic value") {
  Ellipse disk{0.5, 0.5, 0.0, 0.0, 0.0, 1.0};
  const int m = 64;
  Field f = rasterize(std::vector<Ellipse>{disk}, m);
  int nonzero = 0;
  for (double v : f.v)
    if (v != 0.0) ++nonzero;
  const double fraction = static_cast<double>(nonzero) / (m * m);
  const double expect = std::numbers::pi * 0.25 / 4.0;
  CHECK(std::abs(fraction - expect) <= 2.0 / m);
}

TEST_CASE("rasterize rejects an ellipse escaping the support") {
  Ellipse bad{0.5, 0.5, 0.6, 0.0, 0.0, 1.0};  // pokes out at x ~ 1.1 > 0.69
  CHECK_THROWS_AS(rasterize(std::vector<Ellipse>{bad}, 32), std::invalid_argument);
  Ellipse degenerate{0.0, 0.5, 0.0, 0.0, 0.0, 1.0};
  CHECK_THROWS_AS(rasterize(std::vector<Ellipse>{degenerate}, 32), std::invalid_argument);
}

TEST_CASE("canonical table is contained and rasterizes into [0,1]") {
  auto base = shepp_logan();
  REQUIRE(base.size() == 10);
  for (const auto& e : base) CHECK(contained_in_support(e));
  Field f = rasterize(base, 64);
  for (double v : f.v) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
  CHECK(f.max_abs() > 0.0);
}

TEST_CASE("zero jitter reproduces the canonical table on every call") {
  Rng r1(7, 0), r2(7, 99);
  auto a = sample_phantom(r1, 0.0);
  auto b = sample_phantom(r2, 0.0);
  auto base = shepp_logan();
  REQUIRE(a.size() == base.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].semi_x == base[i].semi_x);
    CHECK(a[i].intensity == base[i].intensity);
    CHECK(b[i].center_y == base[i].center_y);
  }
}

TEST_CASE("sampled phantoms satisfy containment under a dense boundary audit") {
  int audited = 0;
  for (int k = 0; k < 1000; ++k) {
    Rng rng(123, static_cast<std::uint64_t>(k));
    for (const auto& e : sample_phantom(rng, 0.05)) {
      CHECK(boundary_inside_support(e, 512, 1e-9));
      ++audited;
    }
  }
  CHECK(audited == 10000);
}

TEST_CASE("sampled rasters stay in [0,1]") {
  for (int k = 0; k < 20; ++k) {
    Rng rng(5, static_cast<std::uint64_t>(k));
    Field f = rasterize(sample_phantom(rng, 0.05), 32);
    for (double v : f.v) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
  }
}

TEST_CASE("degenerate jitter exhausts rejection sampling") {
  Rng rng(11, 0);
  CHECK_THROWS_AS(sample_phantom(rng, 50.0), std::runtime_error);
  CHECK_THROWS_AS(sample_phantom(rng, -0.1), std::invalid_argument);
}

TEST_CASE("rasterization is intensity-additive before clamping") {
  for (int k = 0; k < 10; ++k) {
    Rng rng(42, static_cast<std::uint64_t>(k));
    auto es = sample_phantom(rng, 0.05);
    std::vector<Ellipse> a(es.begin(), es.begin() + 4);
    std::vector<Ellipse> b(es.begin() + 4, es.end());
    std::vector<Ellipse> both(es.begin(), es.end());
    Field ra = rasterize_raw(a, 32), rb = rasterize_raw(b, 32);
    Field rc = rasterize(both, 32);
    for (std::size_t i = 0; i < rc.v.size(); ++i)
      CHECK(std::abs(rc.v[i] - std::clamp(ra.v[i] + rb.v[i], 0.0, 1.0)) <= 1e-12);
  }
}

TEST_CASE("quarter-turn rotation maps to the transposed, flipped raster") {
  Rng rng(77, 3);
  auto es = sample_phantom(rng, 0.03);
  std::vector<Ellipse> rotated;
  for (auto e : es) {
    const double cx = e.center_x, cy = e.center_y;
    e.center_x = -cy;
    e.center_y = cx;
    e.angle += std::numbers::pi / 2.0;
    rotated.push_back(e);
  }
  const int m = 32;
  Field orig = rasterize_raw(es, m);
  Field rot = rasterize_raw(rotated, m);
  // point (x_j, y_i) of the rotated image comes from (y_i, -x_j): indices
  // (row, col) = (m - j, i) in the original, valid away from the wrap column
  for (int i = 0; i < m; ++i)
    for (int j = 1; j < m; ++j)
      CHECK(std::abs(rot.at(i, j) - orig.at(m - j, i)) <= 1e-12);
}

TEST_CASE("build_dataset sizes, determinism and distinctness") {
  auto ds1 = phantom::build_dataset(1009, 16, 20, 4, 6, 0.05);
  CHECK(ds1.train.size() == 20);
  CHECK(ds1.validation.size() == 4);
  CHECK(ds1.test.size() == 6);

  auto ds2 = phantom::build_dataset(1009, 16, 20, 4, 6, 0.05);
  CHECK(hash_fields(ds1.train) == hash_fields(ds2.train));
  CHECK(hash_fields(ds1.validation) == hash_fields(ds2.validation));
  CHECK(hash_fields(ds1.test) == hash_fields(ds2.test));

  std::set<std::uint64_t> hashes;
  auto note = [&](const std::vector<Field>& fs) {
    for (const auto& f : fs) hashes.insert(hash_fields({f}));
  };
  note(ds1.train);
  note(ds1.validation);
  note(ds1.test);
  CHECK(hashes.size() == 30);  // pairwise distinct

  for (const auto& f : ds1.train) CHECK(f.max_abs() > 0.0);
}

TEST_CASE("split content is independent of the split sizes around it") {
  // phantom i is a pure function of (seed, i)
  auto big = phantom::build_dataset(4242, 16, 8, 2, 2, 0.05);
  auto small = phantom::build_dataset(4242, 16, 4, 2, 2, 0.05);
  CHECK(hash_fields({big.train[2]}) == hash_fields({small.train[2]}));
  // validation of `small` starts at global index 4 == train[4] of `big`
  CHECK(hash_fields({small.validation[0]}) == hash_fields({big.train[4]}));
}
