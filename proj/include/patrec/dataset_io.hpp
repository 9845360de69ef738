#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "patrec/field.hpp"
#include "patrec/gamma.hpp"
#include "patrec/kspace.hpp"

// On-disk formats, all little-endian with explicit versioned headers:
//
//   phantom split  "PHSP" v1: u32 m | u32 count | u64 seed | f64 jitter
//                             | count * m * m float32, row-major
//   boundary set   "PBDS" v1: u32 n_det | u32 n_time | f64 dt
//                             | u32 record_stride | u32 pad | u32 count
//                             | count * n_det * n_time float32, row-major
//   single record  "PBDT" v1: same header with count omitted, one payload

namespace patrec::io {

struct PhantomSplit {
  int m = 0;
  std::uint64_t seed = 0;
  double jitter = 0;
  std::vector<Field> phantoms;
};

void write_phantom_split(const std::string& path, const PhantomSplit& split);
PhantomSplit read_phantom_split(const std::string& path);

struct BoundaryHeader {
  int n_det = 0;
  int n_time = 0;
  double dt = 0;
  int record_stride = 0;
  int pad = 0;
};

void write_boundary_set(const std::string& path, const BoundaryHeader& header,
                        const std::vector<Field>& records);
std::pair<BoundaryHeader, std::vector<Field>> read_boundary_set(const std::string& path);

void write_boundary_record(const std::string& path, const BoundaryHeader& header,
                           const Field& record);
std::pair<BoundaryHeader, Field> read_boundary_record(const std::string& path);

// Squared-speed field gamma(f) on the padded grid; the embedding fills the
// exterior with f = 0, so the ambient value is gamma(0) = c0 automatically.
Field true_speed_field(const Field& f_interior, GammaCase gamma_case,
                       const kspace::Simulator& sim);

// Boundary data for a whole split under the ground-truth speed law.
std::vector<Field> simulate_boundary_set(const std::vector<Field>& phantoms,
                                         GammaCase gamma_case,
                                         const kspace::Simulator& sim);

// Histogram of phantom values over [0, 1] (for inspecting how the value
// distribution covers the mapping's domain).
std::vector<std::int64_t> value_histogram(const std::vector<Field>& phantoms,
                                          int n_bins = 20);

// FNV-1a, used to key cache directories by their manifest text.
std::uint64_t fnv1a(const std::string& text);

} // namespace patrec::io
