#ifndef PGNN_DATASET_IO_HPP
#define PGNN_DATASET_IO_HPP

#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>

#include "pgnn/errors.hpp"
#include "pgnn/scenario.hpp"

// Dataset binary format, little-endian:
//   magic "PGNN" (4 bytes), version u32 = 1, M u32, N u32, K u32, S u64,
//   precision u32 = 64, reserved u64 = 0 (header total 40 bytes), then
//   S*M*M*N*K complex entries as (f64 real, f64 imag) in index order
//   s-major, then i, m, n, k with k fastest.

namespace pgnn {

namespace detail {

inline void put_u32(std::ostream& os, std::uint32_t v) {
  std::array<unsigned char, 4> b{};
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b.data()), 4);
}

inline void put_u64(std::ostream& os, std::uint64_t v) {
  std::array<unsigned char, 8> b{};
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b.data()), 8);
}

inline void put_f64(std::ostream& os, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put_u64(os, bits);
}

struct byte_reader {
  std::istream& is;
  std::size_t offset = 0;

  void read(void* dst, std::size_t n, const char* what) {
    is.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(is.gcount()) != n)
      throw format_error(std::string("dataset: truncated while reading ") + what, offset);
    offset += n;
  }
  std::uint32_t u32(const char* what) {
    unsigned char b[4];
    read(b, 4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
  }
  std::uint64_t u64(const char* what) {
    unsigned char b[8];
    read(b, 8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
  }
  double f64(const char* what) {
    const std::uint64_t bits = u64(what);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }
};

}  // namespace detail

inline constexpr std::size_t dataset_header_bytes = 40;

inline void write_dataset(const std::string& path, const ChannelDataset& ds) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("dataset: cannot open for writing: " + path);
  os.write("PGNN", 4);
  detail::put_u32(os, 1);  // version
  detail::put_u32(os, ds.config.cells);
  detail::put_u32(os, ds.config.antennas_per_bs);
  detail::put_u32(os, ds.config.users_per_cell);
  detail::put_u64(os, ds.count);
  detail::put_u32(os, 64);  // precision
  detail::put_u64(os, 0);   // reserved
  for (std::size_t s = 0; s < ds.count; ++s)
    for (std::uint32_t i = 0; i < ds.config.cells; ++i)
      for (std::uint32_t m = 0; m < ds.config.cells; ++m) {
        const arma::cx_mat& H = ds.block(s, i, m);
        for (std::uint32_t n = 0; n < ds.config.antennas_per_bs; ++n)
          for (std::uint32_t k = 0; k < ds.config.users_per_cell; ++k) {
            detail::put_f64(os, H(n, k).real());
            detail::put_f64(os, H(n, k).imag());
          }
      }
  if (!os) throw std::runtime_error("dataset: write failed: " + path);
}

inline ChannelDataset read_dataset(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("dataset: cannot open for reading: " + path);
  detail::byte_reader r{is};

  char magic[4];
  r.read(magic, 4, "magic");
  if (std::memcmp(magic, "PGNN", 4) != 0) throw format_error("dataset: bad magic", 0);
  const std::uint32_t version = r.u32("version");
  if (version != 1) throw format_error("dataset: unsupported version " + std::to_string(version), 4);

  ChannelDataset ds;
  ds.config.cells = r.u32("M");
  ds.config.antennas_per_bs = r.u32("N");
  ds.config.users_per_cell = r.u32("K");
  ds.count = r.u64("S");
  const std::uint32_t precision = r.u32("precision");
  if (precision != 64)
    throw format_error("dataset: unsupported precision " + std::to_string(precision), 28);
  (void)r.u64("reserved");
  if (ds.config.cells < 1 || ds.config.antennas_per_bs < 1 || ds.config.users_per_cell < 1)
    throw format_error("dataset: invalid dimensions in header", 8);

  ds.blocks.resize(ds.count * static_cast<std::size_t>(ds.config.cells) * ds.config.cells);
  for (std::size_t s = 0; s < ds.count; ++s)
    for (std::uint32_t i = 0; i < ds.config.cells; ++i)
      for (std::uint32_t m = 0; m < ds.config.cells; ++m) {
        arma::cx_mat& H = ds.block(s, i, m);
        H.set_size(ds.config.antennas_per_bs, ds.config.users_per_cell);
        for (std::uint32_t n = 0; n < ds.config.antennas_per_bs; ++n)
          for (std::uint32_t k = 0; k < ds.config.users_per_cell; ++k) {
            const double re = r.f64("entry");
            const double im = r.f64("entry");
            if (!std::isfinite(re) || !std::isfinite(im))
              throw format_error("dataset: non-finite entry", r.offset - 16);
            H(n, k) = {re, im};
          }
      }
  return ds;
}

}  // namespace pgnn

#endif
