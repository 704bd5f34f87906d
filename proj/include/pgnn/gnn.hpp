#ifndef PGNN_GNN_HPP
#define PGNN_GNN_HPP

#include <armadillo>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "pgnn/autodiff.hpp"
#include "pgnn/errors.hpp"
#include "pgnn/precoding.hpp"
#include "pgnn/rng.hpp"

namespace pgnn {

enum class ArchKind : std::uint32_t { vanilla = 1, model = 2, model_multicell = 3 };
enum class Pooling : std::uint32_t { sum = 1, mean = 2, max = 3 };

// Per-layer hidden representation living on the antenna-user edges.
// flat is (N*K) x J with row r = k*N + n; consecutive feature columns
// (2t, 2t+1) pair up as (real, imaginary) of complex channel t.
struct EdgeState {
  arma::uword antennas = 0;  // N (or M*N across cells)
  arma::uword users = 0;     // K (or M*K across cells)
  arma::mat flat;
  std::uint32_t layer = 0;

  arma::uword width() const { return flat.n_cols; }

  static EdgeState from_channel(const arma::cx_mat& H) {
    EdgeState e;
    e.antennas = H.n_rows;
    e.users = H.n_cols;
    e.flat.set_size(H.n_elem, 2);
    e.flat.col(0) = arma::vectorise(arma::real(H));
    e.flat.col(1) = arma::vectorise(arma::imag(H));
    return e;
  }

  arma::cx_mat channel(arma::uword t) const {
    if (2 * t + 1 >= width()) throw std::invalid_argument("EdgeState: channel index out of range");
    return arma::cx_mat(arma::reshape(flat.col(2 * t), antennas, users),
                        arma::reshape(flat.col(2 * t + 1), antennas, users));
  }

  void validate_for_pairing() const {
    if (width() % 2 != 0)
      throw std::invalid_argument("EdgeState: odd feature width has no complex pairing");
  }
};

// Architecture description. widths lists J_0 .. J_L with J_0 = J_L = 2;
// the model variants additionally require even hidden widths.
struct GnnArch {
  ArchKind kind = ArchKind::model;
  std::vector<std::uint32_t> widths{2, 32, 32, 8, 2};
  Pooling pooling = Pooling::sum;      // vanilla aggregators
  bool omit_nonneighbor = true;        // model: drop the non-neighbored aggregation term
  bool per_edge_activation = false;    // normalize per edge vector instead of the whole tensor
  bool disable_activation = false;     // identity activation in hidden layers (diagnostics)
  std::uint32_t cells = 1;             // model_multicell
  bool with_scale_adapter = false;     // appended K -> eta FNN (widths 1,16,16,1)

  std::size_t layer_count() const { return widths.size() - 1; }

  std::size_t mats_per_layer() const {
    switch (kind) {
      case ArchKind::vanilla: return 3;                             // S, P, Q
      case ArchKind::model: return omit_nonneighbor ? 5 : 6;        // S0,S1,P0,Q0,Q1[,P1]
      case ArchKind::model_multicell: return 5;                     // s,pa,pr,qa,qr
    }
    throw std::invalid_argument("arch: unknown kind");
  }

  std::size_t gnn_matrix_count() const { return layer_count() * mats_per_layer(); }
  std::size_t matrix_count() const { return gnn_matrix_count() + (with_scale_adapter ? 6 : 0); }

  // rows x cols of the flat parameter matrix at index idx (declaration order)
  std::pair<arma::uword, arma::uword> matrix_shape(std::size_t idx) const {
    if (idx < gnn_matrix_count()) {
      const std::size_t per = mats_per_layer();
      const std::size_t layer = idx / per, slot = idx % per;
      const arma::uword jin = widths[layer], jout = widths[layer + 1];
      if (kind == ArchKind::model_multicell) {
        // s, q_a, q_r act on the concatenated Step-1 feature (two J-blocks);
        // p_a, p_r shrink to the first block when non-neighbor terms are omitted
        const bool p_side = (slot == 1 || slot == 2);
        const arma::uword in = (p_side && omit_nonneighbor) ? jin : 2 * jin;
        return {jout, in};
      }
      return {jout, jin};
    }
    static constexpr arma::uword adapter_shapes[6][2] = {{16, 1}, {16, 1}, {16, 16},
                                                         {16, 1}, {1, 16}, {1, 1}};
    const std::size_t a = idx - gnn_matrix_count();
    if (a >= 6) throw std::invalid_argument("arch: matrix index out of range");
    return {adapter_shapes[a][0], adapter_shapes[a][1]};
  }

  void validate() const {
    if (widths.size() < 2) throw std::invalid_argument("arch: need at least input and output widths");
    if (widths.front() != 2 || widths.back() != 2)
      throw std::invalid_argument("arch: edge features must enter and leave with width 2");
    if (kind != ArchKind::vanilla)
      for (std::uint32_t j : widths)
        if (j % 2 != 0)
          throw std::invalid_argument("arch: model variants need even widths for complex pairing");
    if (kind == ArchKind::model_multicell && cells < 1)
      throw std::invalid_argument("arch: multicell needs cells >= 1");
    for (std::uint32_t j : widths)
      if (j == 0) throw std::invalid_argument("arch: zero layer width");
  }
};

// Table-style default hyper-parameters per architecture/objective.
inline GnnArch model_se_arch() { return GnnArch{ArchKind::model, {2, 32, 32, 8, 2}}; }
inline GnnArch model_ee_arch() {
  GnnArch a{ArchKind::model, {2, 32, 32, 32, 8, 2}};
  a.with_scale_adapter = true;
  return a;
}
inline GnnArch vanilla_arch() { return GnnArch{ArchKind::vanilla, {2, 64, 512, 512, 64, 2}}; }
inline GnnArch model_multicell_arch(std::uint32_t cells) {
  GnnArch a{ArchKind::model, {2, 32, 32, 8, 2}};
  a.kind = ArchKind::model_multicell;
  a.cells = cells;
  return a;
}

// Trainable state: the architecture plus its weight matrices flattened in
// declaration order (layer-major, then the scale adapter when present).
struct ParamPack {
  GnnArch arch;
  std::vector<arma::mat> mats;
};

inline ParamPack init_params(const GnnArch& arch, std::uint64_t seed) {
  arch.validate();
  rng64 g(rng64::stream_seed(seed, 0x9e3779b9));
  ParamPack pack;
  pack.arch = arch;
  pack.mats.resize(arch.matrix_count());
  for (std::size_t i = 0; i < pack.mats.size(); ++i) {
    const auto [rows, cols] = arch.matrix_shape(i);
    arma::mat m(rows, cols);
    if (i < arch.gnn_matrix_count()) {
      const std::size_t layer = i / arch.mats_per_layer();
      const double bound = std::sqrt(1.0 / arch.widths[layer]);
      m.imbue([&] { return g.next_uniform(-bound, bound); });
    } else if (cols == 1 && (i - arch.gnn_matrix_count()) % 2 == 1) {
      m.zeros();  // adapter biases
    } else {
      const double bound = std::sqrt(1.0 / static_cast<double>(cols));
      m.imbue([&] { return g.next_uniform(-bound, bound); });
    }
    pack.mats[i] = std::move(m);
  }
  return pack;
}

// The layer weights that make a width-2 model layer compute one step of the
// pseudo-inverse expansion exactly: d' = 2 d - b with activation disabled.
inline ParamPack tgnn_specialization(std::size_t layers) {
  GnnArch arch{ArchKind::model, std::vector<std::uint32_t>(layers + 1, 2)};
  arch.disable_activation = true;
  ParamPack pack;
  pack.arch = arch;
  pack.mats.resize(arch.matrix_count());
  for (std::size_t l = 0; l < layers; ++l) {
    pack.mats[5 * l + 0] = 2.0 * arma::eye(2, 2);   // S0
    pack.mats[5 * l + 1] = -arma::eye(2, 2);        // S1
    pack.mats[5 * l + 2] = arma::zeros(2, 2);       // P0
    pack.mats[5 * l + 3] = arma::zeros(2, 2);       // Q0
    pack.mats[5 * l + 4] = arma::zeros(2, 2);       // Q1
  }
  return pack;
}

// ---------------------------------------------------------------------------
// tape-level forward builders
// ---------------------------------------------------------------------------

namespace gnn_detail {

using ad::Tape;
using ad::Var;

inline std::vector<Var> bind_params(Tape& t, const ParamPack& pack, bool trainable) {
  std::vector<Var> vars;
  vars.reserve(pack.mats.size());
  for (const arma::mat& m : pack.mats) vars.push_back(trainable ? t.param(m) : t.constant(m));
  return vars;
}

inline Var activation(Tape& t, Var x, const GnnArch& arch) {
  if (arch.disable_activation) return x;
  if (!arch.per_edge_activation) {
    Var n = t.sqrt_op(t.sum_all(t.mul(x, x)));
    return t.scalar_mul(x, t.recip(t.add_const(n, 1e-12)));
  }
  // per-edge variant: each edge's feature vector normalized on its own
  const arma::uword j = t.value(x).n_cols;
  Var row_sq = t.mm(t.mul(x, x), t.constant(arma::ones(j, 1)));
  Var inv = t.recip(t.add_const(t.sqrt_op(row_sq), 1e-12));
  return t.mul(x, t.mm(inv, t.constant(arma::ones(1, j))));
}

// neighbor aggregation for the vanilla update; transform first, then pool
inline Var vanilla_aggregate(Tape& t, Var transformed, arma::uword N, arma::uword K, Pooling pooling,
                             bool over_antennas) {
  const arma::uword group = over_antennas ? N : K;
  if (group < 2) return t.scale(transformed, 0.0);  // no neighbors: empty sum/mean
  switch (pooling) {
    case Pooling::sum: {
      Var full = over_antennas ? t.pool_antennas(transformed, N, K) : t.pool_users(transformed, N, K);
      return t.sub(full, transformed);
    }
    case Pooling::mean: {
      Var full = over_antennas ? t.pool_antennas(transformed, N, K) : t.pool_users(transformed, N, K);
      return t.scale(t.sub(full, transformed), 1.0 / static_cast<double>(group - 1));
    }
    case Pooling::max:
      return over_antennas ? t.pool_antennas_max_excl(transformed, N, K)
                           : t.pool_users_max_excl(transformed, N, K);
  }
  throw std::invalid_argument("vanilla layer: unknown pooling kind");
}

inline Var vanilla_layer(Tape& t, Var e, arma::uword N, arma::uword K, Var S, Var P, Var Q,
                         Pooling pooling) {
  Var out = t.mm_nt(e, S);
  out = t.add(out, vanilla_aggregate(t, t.mm_nt(e, P), N, K, pooling, /*over_antennas=*/true));
  out = t.add(out, vanilla_aggregate(t, t.mm_nt(e, Q), N, K, pooling, /*over_antennas=*/false));
  return out;
}

// Step 1 of the model update: per complex channel t, A_t = H^H D_t and
// B_t = D_t A_t; returns the B-block with the same width as e.
inline Var model_step1_block(Tape& t, Var e, Var Hr, Var Hi, arma::uword N, arma::uword K) {
  const arma::uword width = t.value(e).n_cols;
  if (width % 2 != 0) throw std::invalid_argument("model step 1: odd feature width");
  std::vector<Var> cols;
  cols.reserve(width);
  for (arma::uword ch = 0; ch < width / 2; ++ch) {
    Var Dr = t.reshape(t.extract_cols(e, 2 * ch, 1), N, K);
    Var Di = t.reshape(t.extract_cols(e, 2 * ch + 1, 1), N, K);
    Var Ar = t.add(t.mm_tn(Hr, Dr), t.mm_tn(Hi, Di));
    Var Ai = t.sub(t.mm_tn(Hr, Di), t.mm_tn(Hi, Dr));
    Var Br = t.sub(t.mm(Dr, Ar), t.mm(Di, Ai));
    Var Bi = t.add(t.mm(Dr, Ai), t.mm(Di, Ar));
    cols.push_back(t.reshape(Br, N * K, 1));
    cols.push_back(t.reshape(Bi, N * K, 1));
  }
  return t.hcat(cols);
}

inline Var model_layer(Tape& t, Var e, Var b, arma::uword N, arma::uword K, Var S0, Var S1, Var P0,
                       Var Q0, Var Q1, const Var* P1) {
  // full-range sums (self included); the self weight absorbs the difference
  Var out = t.add(t.mm_nt(e, S0), t.mm_nt(b, S1));
  out = t.add(out, t.mm_nt(t.pool_antennas(e, N, K), P0));
  out = t.add(out, t.mm_nt(t.pool_users(e, N, K), Q0));
  out = t.add(out, t.mm_nt(t.pool_users(b, N, K), Q1));
  if (P1 != nullptr) out = t.add(out, t.mm_nt(t.pool_antennas(b, N, K), *P1));
  return out;
}

// raw single-cell forward: (N*K) x 2 output edge state, no power normalization
inline Var raw_forward_single(Tape& t, const arma::cx_mat& H, const GnnArch& arch,
                              const std::vector<Var>& w) {
  const arma::uword N = H.n_rows, K = H.n_cols;
  Var e = t.constant(EdgeState::from_channel(H).flat);
  Var Hr = t.constant(arma::real(H));
  Var Hi = t.constant(arma::imag(H));
  const std::size_t per = arch.mats_per_layer();
  for (std::size_t l = 0; l < arch.layer_count(); ++l) {
    const std::size_t base = l * per;
    if (arch.kind == ArchKind::vanilla) {
      e = vanilla_layer(t, e, N, K, w[base], w[base + 1], w[base + 2], arch.pooling);
    } else {
      Var b = model_step1_block(t, e, Hr, Hi, N, K);
      const Var* P1 = arch.omit_nonneighbor ? nullptr : &w[base + 5];
      e = model_layer(t, e, b, N, K, w[base], w[base + 1], w[base + 2], w[base + 3], w[base + 4], P1);
    }
    if (l + 1 < arch.layer_count()) e = activation(t, e, arch);
  }
  return e;
}

// Step 1 in the multi-cell graph: inner products use only the serving-BS
// block, a_{j_{m'} k} = h_{j_{m'},m}^H d_{m,k}; each BS's row block runs the
// single-cell recursion against its own departure channels.
inline Var model_step1_block_multicell(Tape& t, Var e, const std::vector<Var>& Hr_rows,
                                       const std::vector<Var>& Hi_rows, arma::uword M,
                                       arma::uword N, arma::uword users) {
  const arma::uword width = t.value(e).n_cols;
  if (width % 2 != 0) throw std::invalid_argument("model step 1: odd feature width");
  std::vector<Var> cols;
  cols.reserve(width);
  for (arma::uword ch = 0; ch < width / 2; ++ch) {
    Var Dr = t.reshape(t.extract_cols(e, 2 * ch, 1), M * N, users);
    Var Di = t.reshape(t.extract_cols(e, 2 * ch + 1, 1), M * N, users);
    std::vector<Var> br_blocks, bi_blocks;
    for (arma::uword m = 0; m < M; ++m) {
      Var Dmr = t.extract_rows(Dr, m * N, N);
      Var Dmi = t.extract_rows(Di, m * N, N);
      Var Ar = t.add(t.mm_tn(Hr_rows[m], Dmr), t.mm_tn(Hi_rows[m], Dmi));
      Var Ai = t.sub(t.mm_tn(Hr_rows[m], Dmi), t.mm_tn(Hi_rows[m], Dmr));
      br_blocks.push_back(t.sub(t.mm(Dmr, Ar), t.mm(Dmi, Ai)));
      bi_blocks.push_back(t.add(t.mm(Dmr, Ai), t.mm(Dmi, Ar)));
    }
    cols.push_back(t.reshape(t.vcat(br_blocks), M * N * users, 1));
    cols.push_back(t.reshape(t.vcat(bi_blocks), M * N * users, 1));
  }
  return t.hcat(cols);
}

// blocks[i * M + m] = N x K channel from BS i to users of cell m
inline Var raw_forward_multicell(Tape& t, const std::vector<arma::cx_mat>& blocks, arma::uword M,
                                 const GnnArch& arch, const std::vector<Var>& w) {
  const arma::uword N = blocks.front().n_rows, K = blocks.front().n_cols;
  const arma::uword users = M * K;

  // assemble the (M*N) x (M*K) graph channel and per-BS departure rows
  arma::cx_mat Hbig(M * N, users);
  for (arma::uword i = 0; i < M; ++i)
    for (arma::uword m = 0; m < M; ++m)
      Hbig.submat(i * N, m * K, i * N + N - 1, m * K + K - 1) = blocks[i * M + m];
  std::vector<Var> Hr_rows, Hi_rows;
  for (arma::uword m = 0; m < M; ++m) {
    arma::cx_mat rows = Hbig.rows(m * N, m * N + N - 1);
    Hr_rows.push_back(t.constant(arma::real(rows)));
    Hi_rows.push_back(t.constant(arma::imag(rows)));
  }

  Var e = t.constant(EdgeState::from_channel(Hbig).flat);
  const std::size_t per = arch.mats_per_layer();
  for (std::size_t l = 0; l < arch.layer_count(); ++l) {
    const std::size_t base = l * per;
    Var b = model_step1_block_multicell(t, e, Hr_rows, Hi_rows, M, N, users);
    Var c = t.hcat({e, b});

    Var self_term = t.mm_nt(c, w[base]);  // s
    Var p_input = arch.omit_nonneighbor ? e : c;

    // intra-cell antennas excluding self; inter-cell sums run over every
    // antenna of the other BSs (anything less would break equivariance to
    // per-cell antenna permutations)
    Var intra_a = t.sub(t.pool_antennas_intra(p_input, M, N, users), p_input);
    Var inter_a = t.sub(t.pool_antennas(p_input, M * N, users),
                        t.pool_antennas_intra(p_input, M, N, users));
    Var out = t.add(self_term, t.add(t.mm_nt(intra_a, w[base + 1]), t.mm_nt(inter_a, w[base + 2])));

    Var intra_u = t.sub(t.pool_users_intra(c, M * N, M, K), c);
    Var inter_u =
        t.sub(t.pool_users(c, M * N, users), t.pool_users_intra(c, M * N, M, K));
    out = t.add(out, t.add(t.mm_nt(intra_u, w[base + 3]), t.mm_nt(inter_u, w[base + 4])));

    e = out;
    if (l + 1 < arch.layer_count()) e = activation(t, e, arch);
  }
  return e;
}

// exact power normalization of a flat (rows x 2) output; throws on zero input
inline Var power_normalize_tape(Tape& t, Var raw, double p_max) {
  Var norm = t.sqrt_op(t.sum_all(t.mul(raw, raw)));
  if (t.scalar(norm) == 0.0)
    throw degenerate_input_error("gnn forward: zero raw output cannot be power-normalized");
  return t.scalar_mul(raw, t.scale(t.recip(norm), std::sqrt(p_max)));
}

inline arma::cx_mat flat_to_complex(const arma::mat& flat, arma::uword N, arma::uword K) {
  return arma::cx_mat(arma::reshape(flat.col(0), N, K), arma::reshape(flat.col(1), N, K));
}

}  // namespace gnn_detail

// ---------------------------------------------------------------------------
// plain EdgeState-level operations (diagnostics and tests)
// ---------------------------------------------------------------------------

struct VanillaLayerWeights {
  arma::mat S, P, Q;
};
struct ModelLayerWeights {
  arma::mat S0, S1, P0, Q0, Q1;
  std::optional<arma::mat> P1;  // non-neighbor term, applied only when present
};

inline EdgeState vanilla_layer_forward(const EdgeState& d, const VanillaLayerWeights& w,
                                       Pooling pooling = Pooling::sum, bool apply_activation = true,
                                       bool per_edge_activation = false) {
  if (w.S.n_cols != d.width() || w.P.n_cols != d.width() || w.Q.n_cols != d.width())
    throw std::invalid_argument("vanilla layer: weight width does not match edge state");
  ad::Tape t(false);
  ad::Var e = t.constant(d.flat);
  ad::Var out = gnn_detail::vanilla_layer(t, e, d.antennas, d.users, t.constant(w.S),
                                          t.constant(w.P), t.constant(w.Q), pooling);
  if (apply_activation) {
    GnnArch a;
    a.per_edge_activation = per_edge_activation;
    out = gnn_detail::activation(t, out, a);
  }
  return {d.antennas, d.users, t.value(out), d.layer + 1};
}

inline EdgeState model_step1(const EdgeState& d, const arma::cx_mat& H) {
  d.validate_for_pairing();
  if (H.n_rows != d.antennas || H.n_cols != d.users)
    throw std::invalid_argument("model step 1: channel shape does not match edge state");
  ad::Tape t(false);
  ad::Var b = gnn_detail::model_step1_block(t, t.constant(d.flat), t.constant(arma::real(H)),
                                            t.constant(arma::imag(H)), d.antennas, d.users);
  EdgeState out{d.antennas, d.users, arma::join_rows(d.flat, t.value(b)), d.layer};
  return out;
}

inline EdgeState model_layer_forward(const EdgeState& d, const arma::cx_mat& H,
                                     const ModelLayerWeights& w, bool omit_nonneighbor = true,
                                     bool apply_activation = true) {
  d.validate_for_pairing();
  if (w.S0.n_cols != d.width()) throw std::invalid_argument("model layer: weight width mismatch");
  if (!omit_nonneighbor && !w.P1)
    throw std::invalid_argument("model layer: non-neighbor term requested without P1");
  ad::Tape t(false);
  ad::Var e = t.constant(d.flat);
  ad::Var b = gnn_detail::model_step1_block(t, e, t.constant(arma::real(H)),
                                            t.constant(arma::imag(H)), d.antennas, d.users);
  ad::Var p1;
  if (!omit_nonneighbor) p1 = t.constant(*w.P1);
  ad::Var out = gnn_detail::model_layer(t, e, b, d.antennas, d.users, t.constant(w.S0),
                                        t.constant(w.S1), t.constant(w.P0), t.constant(w.Q0),
                                        t.constant(w.Q1), omit_nonneighbor ? nullptr : &p1);
  if (apply_activation) {
    GnnArch a;
    out = gnn_detail::activation(t, out, a);
  }
  return {d.antennas, d.users, t.value(out), d.layer + 1};
}

struct MultiCellLayerWeights {
  arma::mat s, p_a, p_r, q_a, q_r;
};

inline EdgeState model_layer_forward_multicell(const EdgeState& d,
                                               const std::vector<arma::cx_mat>& blocks,
                                               arma::uword cells, const MultiCellLayerWeights& w,
                                               bool omit_nonneighbor = true,
                                               bool apply_activation = true) {
  d.validate_for_pairing();
  if (blocks.size() != static_cast<std::size_t>(cells) * cells)
    throw std::invalid_argument("multicell layer: need cells^2 channel blocks");
  const arma::uword N = blocks.front().n_rows, K = blocks.front().n_cols;
  if (d.antennas != cells * N || d.users != cells * K)
    throw std::invalid_argument("multicell layer: edge state does not match channel dims");
  ad::Tape t(false);
  std::vector<ad::Var> wvars{t.constant(w.s), t.constant(w.p_a), t.constant(w.p_r),
                             t.constant(w.q_a), t.constant(w.q_r)};
  const arma::uword users = cells * K;
  std::vector<ad::Var> Hr_rows, Hi_rows;
  arma::cx_mat Hbig(cells * N, users);
  for (arma::uword i = 0; i < cells; ++i)
    for (arma::uword m = 0; m < cells; ++m)
      Hbig.submat(i * N, m * K, i * N + N - 1, m * K + K - 1) = blocks[i * cells + m];
  for (arma::uword m = 0; m < cells; ++m) {
    arma::cx_mat rows = Hbig.rows(m * N, m * N + N - 1);
    Hr_rows.push_back(t.constant(arma::real(rows)));
    Hi_rows.push_back(t.constant(arma::imag(rows)));
  }
  ad::Var e = t.constant(d.flat);
  ad::Var b = gnn_detail::model_step1_block_multicell(t, e, Hr_rows, Hi_rows, cells, N, users);
  ad::Var c = t.hcat({e, b});
  ad::Var p_input = omit_nonneighbor ? e : c;
  ad::Var intra_a = t.sub(t.pool_antennas_intra(p_input, cells, N, users), p_input);
  ad::Var inter_a = t.sub(t.pool_antennas(p_input, cells * N, users),
                          t.pool_antennas_intra(p_input, cells, N, users));
  ad::Var intra_u = t.sub(t.pool_users_intra(c, cells * N, cells, K), c);
  ad::Var inter_u =
      t.sub(t.pool_users(c, cells * N, users), t.pool_users_intra(c, cells * N, cells, K));
  ad::Var out = t.mm_nt(c, wvars[0]);
  out = t.add(out, t.add(t.mm_nt(intra_a, wvars[1]), t.mm_nt(inter_a, wvars[2])));
  out = t.add(out, t.add(t.mm_nt(intra_u, wvars[3]), t.mm_nt(inter_u, wvars[4])));
  if (apply_activation) {
    GnnArch a;
    out = gnn_detail::activation(t, out, a);
  }
  return {d.antennas, d.users, t.value(out), d.layer + 1};
}

// ---------------------------------------------------------------------------
// whole-network forwards
// ---------------------------------------------------------------------------

inline PrecodingMatrix vanilla_forward(const arma::cx_mat& H, const ParamPack& pack, double p_max) {
  pack.arch.validate();
  if (pack.arch.kind != ArchKind::vanilla) throw std::invalid_argument("vanilla_forward: wrong arch");
  ad::Tape t(false);
  auto w = gnn_detail::bind_params(t, pack, false);
  ad::Var raw = gnn_detail::raw_forward_single(t, H, pack.arch, w);
  ad::Var out = gnn_detail::power_normalize_tape(t, raw, p_max);
  return {gnn_detail::flat_to_complex(t.value(out), H.n_rows, H.n_cols), p_max};
}

inline PrecodingMatrix model_forward(const arma::cx_mat& H, const ParamPack& pack, double p_max) {
  pack.arch.validate();
  if (pack.arch.kind != ArchKind::model) throw std::invalid_argument("model_forward: wrong arch");
  ad::Tape t(false);
  auto w = gnn_detail::bind_params(t, pack, false);
  ad::Var raw = gnn_detail::raw_forward_single(t, H, pack.arch, w);
  ad::Var out = gnn_detail::power_normalize_tape(t, raw, p_max);
  return {gnn_detail::flat_to_complex(t.value(out), H.n_rows, H.n_cols), p_max};
}

// hidden-layer edge states of a single-cell forward (diagnostics)
inline std::vector<EdgeState> model_forward_states(const arma::cx_mat& H, const ParamPack& pack) {
  pack.arch.validate();
  std::vector<EdgeState> states;
  EdgeState e = EdgeState::from_channel(H);
  states.push_back(e);
  const std::size_t per = pack.arch.mats_per_layer();
  for (std::size_t l = 0; l < pack.arch.layer_count(); ++l) {
    const bool last = (l + 1 == pack.arch.layer_count());
    ModelLayerWeights w{pack.mats[l * per], pack.mats[l * per + 1], pack.mats[l * per + 2],
                        pack.mats[l * per + 3], pack.mats[l * per + 4], std::nullopt};
    if (!pack.arch.omit_nonneighbor) w.P1 = pack.mats[l * per + 5];
    e = model_layer_forward(e, H, w, pack.arch.omit_nonneighbor,
                            !pack.arch.disable_activation && !last);
    states.push_back(e);
  }
  return states;
}

// per-BS power-normalized multi-cell forward
inline std::vector<PrecodingMatrix> model_forward_multicell(const std::vector<arma::cx_mat>& blocks,
                                                            arma::uword cells, const ParamPack& pack,
                                                            double p_max) {
  pack.arch.validate();
  if (pack.arch.kind != ArchKind::model_multicell)
    throw std::invalid_argument("model_forward_multicell: wrong arch");
  const arma::uword N = blocks.front().n_rows, K = blocks.front().n_cols;
  ad::Tape t(false);
  auto w = gnn_detail::bind_params(t, pack, false);
  ad::Var raw = gnn_detail::raw_forward_multicell(t, blocks, cells, pack.arch, w);
  const arma::mat& flat = t.value(raw);
  std::vector<PrecodingMatrix> out;
  out.reserve(cells);
  arma::mat re = arma::reshape(flat.col(0), cells * N, cells * K);
  arma::mat im = arma::reshape(flat.col(1), cells * N, cells * K);
  for (arma::uword m = 0; m < cells; ++m) {
    arma::cx_mat Vm(re.submat(m * N, m * K, m * N + N - 1, m * K + K - 1),
                    im.submat(m * N, m * K, m * N + N - 1, m * K + K - 1));
    out.push_back(power_normalize(Vm, p_max));
  }
  return out;
}

// ---------------------------------------------------------------------------
// scale adapter: K -> positive factor eta_K (widths 1, 16, 16, 1)
// ---------------------------------------------------------------------------

namespace gnn_detail {

// input standardization keeps fresh adapters in a sane output range
inline double adapter_input(std::uint32_t K) { return (static_cast<double>(K) - 16.0) / 16.0; }

inline ad::Var scale_adapter_tape(ad::Tape& t, const std::vector<ad::Var>& w, std::size_t base,
                                  std::uint32_t K) {
  ad::Var x = t.constant(arma::mat(1, 1, arma::fill::value(adapter_input(K))));
  ad::Var z1 = t.softplus(t.add(t.mm(w[base + 0], x), w[base + 1]));
  ad::Var z2 = t.softplus(t.add(t.mm(w[base + 2], z1), w[base + 3]));
  return t.softplus(t.add(t.mm(w[base + 4], z2), w[base + 5]));
}

}  // namespace gnn_detail

inline double scale_adapter_forward(const ParamPack& pack, std::uint32_t K) {
  if (!pack.arch.with_scale_adapter)
    throw std::invalid_argument("scale_adapter_forward: pack has no adapter");
  if (K < 1) throw std::invalid_argument("scale_adapter_forward: K must be >= 1");
  ad::Tape t(false);
  auto w = gnn_detail::bind_params(t, pack, false);
  return t.scalar(gnn_detail::scale_adapter_tape(t, w, pack.arch.gnn_matrix_count(), K));
}

}  // namespace pgnn

#endif
