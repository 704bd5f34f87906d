#ifndef PGNN_CHECKPOINT_HPP
#define PGNN_CHECKPOINT_HPP

#include <fstream>
#include <string>

#include "pgnn/dataset_io.hpp"
#include "pgnn/gnn.hpp"

// Parameter checkpoint format, little-endian:
//   magic "PGNP" (4 bytes), version u32 = 1, architecture tag u32,
//   width-list length u32 followed by that many u32 widths, then every
//   weight matrix in declaration order as column-major f64.
// The architecture tag packs kind (bits 0-7), pooling (8-15), flags
// (16: omit non-neighbor, 17: scale adapter, 18: per-edge activation,
// 19: identity activation) and the cell count (bits 20-27).

namespace pgnn {

namespace detail {

inline std::uint32_t arch_tag(const GnnArch& a) {
  std::uint32_t tag = static_cast<std::uint32_t>(a.kind);
  tag |= static_cast<std::uint32_t>(a.pooling) << 8;
  if (a.omit_nonneighbor) tag |= 1u << 16;
  if (a.with_scale_adapter) tag |= 1u << 17;
  if (a.per_edge_activation) tag |= 1u << 18;
  if (a.disable_activation) tag |= 1u << 19;
  tag |= (a.cells & 0xFFu) << 20;
  return tag;
}

inline GnnArch arch_from_tag(std::uint32_t tag, std::vector<std::uint32_t> widths) {
  GnnArch a;
  a.kind = static_cast<ArchKind>(tag & 0xFFu);
  a.pooling = static_cast<Pooling>((tag >> 8) & 0xFFu);
  a.omit_nonneighbor = tag & (1u << 16);
  a.with_scale_adapter = tag & (1u << 17);
  a.per_edge_activation = tag & (1u << 18);
  a.disable_activation = tag & (1u << 19);
  a.cells = (tag >> 20) & 0xFFu;
  if (a.cells == 0) a.cells = 1;
  a.widths = std::move(widths);
  return a;
}

}  // namespace detail

inline void save_params(const std::string& path, const ParamPack& pack) {
  pack.arch.validate();
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("checkpoint: cannot open for writing: " + path);
  os.write("PGNP", 4);
  detail::put_u32(os, 1);
  detail::put_u32(os, detail::arch_tag(pack.arch));
  detail::put_u32(os, static_cast<std::uint32_t>(pack.arch.widths.size()));
  for (std::uint32_t wdt : pack.arch.widths) detail::put_u32(os, wdt);
  for (const arma::mat& m : pack.mats)
    for (arma::uword i = 0; i < m.n_elem; ++i) detail::put_f64(os, m(i));  // column-major
  if (!os) throw std::runtime_error("checkpoint: write failed: " + path);
}

inline ParamPack load_params(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("checkpoint: cannot open for reading: " + path);
  detail::byte_reader r{is};
  char magic[4];
  r.read(magic, 4, "magic");
  if (std::memcmp(magic, "PGNP", 4) != 0) throw format_error("checkpoint: bad magic", 0);
  const std::uint32_t version = r.u32("version");
  if (version != 1) throw format_error("checkpoint: unsupported version", 4);
  const std::uint32_t tag = r.u32("arch tag");
  const std::uint32_t width_count = r.u32("width count");
  if (width_count < 2 || width_count > 64) throw format_error("checkpoint: implausible width list", 12);
  std::vector<std::uint32_t> widths(width_count);
  for (auto& wdt : widths) wdt = r.u32("width");

  ParamPack pack;
  pack.arch = detail::arch_from_tag(tag, std::move(widths));
  pack.arch.validate();
  pack.mats.resize(pack.arch.matrix_count());
  for (std::size_t i = 0; i < pack.mats.size(); ++i) {
    const auto [rows, cols] = pack.arch.matrix_shape(i);
    arma::mat m(rows, cols);
    for (arma::uword e = 0; e < m.n_elem; ++e) m(e) = r.f64("weight");
    pack.mats[i] = std::move(m);
  }
  return pack;
}

}  // namespace pgnn

#endif
