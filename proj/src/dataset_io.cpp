#include "patrec/dataset_io.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace patrec::io {

namespace {

void write_bytes(std::ostream& os, const void* p, std::size_t n) {
  os.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(n));
}

void read_bytes(std::istream& is, void* p, std::size_t n) {
  is.read(reinterpret_cast<char*>(p), static_cast<std::streamsize>(n));
  if (!is) throw std::runtime_error("dataset_io: truncated file");
}

template <class T>
void write_pod(std::ostream& os, T v) {
  write_bytes(os, &v, sizeof v);
}

template <class T>
T read_pod(std::istream& is) {
  T v{};
  read_bytes(is, &v, sizeof v);
  return v;
}

void write_field_f32(std::ostream& os, const Field& f) {
  std::vector<float> buf(f.v.size());
  for (std::size_t i = 0; i < buf.size(); ++i) buf[i] = static_cast<float>(f.v[i]);
  write_bytes(os, buf.data(), buf.size() * sizeof(float));
}

Field read_field_f32(std::istream& is, int rows, int cols) {
  Field f(rows, cols);
  std::vector<float> buf(f.v.size());
  read_bytes(is, buf.data(), buf.size() * sizeof(float));
  for (std::size_t i = 0; i < buf.size(); ++i) f.v[i] = static_cast<double>(buf[i]);
  if (!f.all_finite()) throw std::runtime_error("dataset_io: non-finite payload");
  return f;
}

void check_magic(std::istream& is, const char expect[4], const std::string& path) {
  char magic[4];
  read_bytes(is, magic, 4);
  if (std::memcmp(magic, expect, 4) != 0)
    throw std::runtime_error("dataset_io: bad magic in " + path);
  const auto version = read_pod<std::uint32_t>(is);
  if (version != 1)
    throw std::runtime_error("dataset_io: unsupported version in " + path);
}

void write_boundary_header(std::ostream& os, const BoundaryHeader& h) {
  write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(h.n_det));
  write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(h.n_time));
  write_pod<double>(os, h.dt);
  write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(h.record_stride));
  write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(h.pad));
}

BoundaryHeader read_boundary_header(std::istream& is) {
  BoundaryHeader h;
  h.n_det = static_cast<int>(read_pod<std::uint32_t>(is));
  h.n_time = static_cast<int>(read_pod<std::uint32_t>(is));
  h.dt = read_pod<double>(is);
  h.record_stride = static_cast<int>(read_pod<std::uint32_t>(is));
  h.pad = static_cast<int>(read_pod<std::uint32_t>(is));
  return h;
}

} // namespace

void write_phantom_split(const std::string& path, const PhantomSplit& split) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path);
  os.write("PHSP", 4);
  write_pod<std::uint32_t>(os, 1);
  write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(split.m));
  write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(split.phantoms.size()));
  write_pod<std::uint64_t>(os, split.seed);
  write_pod<double>(os, split.jitter);
  for (const Field& f : split.phantoms) {
    require_shape(f, split.m, split.m, "write_phantom_split");
    write_field_f32(os, f);
  }
  if (!os) throw std::runtime_error("write failed for " + path);
}

PhantomSplit read_phantom_split(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path);
  check_magic(is, "PHSP", path);
  PhantomSplit split;
  split.m = static_cast<int>(read_pod<std::uint32_t>(is));
  const auto count = read_pod<std::uint32_t>(is);
  split.seed = read_pod<std::uint64_t>(is);
  split.jitter = read_pod<double>(is);
  split.phantoms.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i)
    split.phantoms.push_back(read_field_f32(is, split.m, split.m));
  return split;
}

void write_boundary_set(const std::string& path, const BoundaryHeader& header,
                        const std::vector<Field>& records) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path);
  os.write("PBDS", 4);
  write_pod<std::uint32_t>(os, 1);
  write_boundary_header(os, header);
  write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(records.size()));
  for (const Field& f : records) {
    require_shape(f, header.n_det, header.n_time, "write_boundary_set");
    write_field_f32(os, f);
  }
  if (!os) throw std::runtime_error("write failed for " + path);
}

std::pair<BoundaryHeader, std::vector<Field>> read_boundary_set(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path);
  check_magic(is, "PBDS", path);
  BoundaryHeader h = read_boundary_header(is);
  const auto count = read_pod<std::uint32_t>(is);
  std::vector<Field> records;
  records.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i)
    records.push_back(read_field_f32(is, h.n_det, h.n_time));
  return {h, std::move(records)};
}

void write_boundary_record(const std::string& path, const BoundaryHeader& header,
                           const Field& record) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path);
  os.write("PBDT", 4);
  write_pod<std::uint32_t>(os, 1);
  write_boundary_header(os, header);
  require_shape(record, header.n_det, header.n_time, "write_boundary_record");
  write_field_f32(os, record);
  if (!os) throw std::runtime_error("write failed for " + path);
}

std::pair<BoundaryHeader, Field> read_boundary_record(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path);
  check_magic(is, "PBDT", path);
  BoundaryHeader h = read_boundary_header(is);
  Field f = read_field_f32(is, h.n_det, h.n_time);
  return {h, std::move(f)};
}

Field true_speed_field(const Field& f_interior, GammaCase gamma_case,
                       const kspace::Simulator& sim) {
  Field full = sim.embed_interior(f_interior, 0.0);
  for (double& v : full.v) v = gamma_ground_truth(gamma_case, v);
  return full;
}

std::vector<Field> simulate_boundary_set(const std::vector<Field>& phantoms,
                                         GammaCase gamma_case,
                                         const kspace::Simulator& sim) {
  std::vector<Field> out;
  out.reserve(phantoms.size());
  for (const Field& f : phantoms)
    out.push_back(sim.simulate(f, true_speed_field(f, gamma_case, sim)));
  return out;
}

std::vector<std::int64_t> value_histogram(const std::vector<Field>& phantoms, int n_bins) {
  std::vector<std::int64_t> bins(n_bins, 0);
  for (const Field& f : phantoms) {
    for (double v : f.v) {
      int b = static_cast<int>(v * n_bins);
      if (b >= n_bins) b = n_bins - 1;
      if (b < 0) b = 0;
      ++bins[b];
    }
  }
  return bins;
}

std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

} // namespace patrec::io
