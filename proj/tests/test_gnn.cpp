#include <catch2/catch_amalgamated.hpp>

#include "oracles.hpp"
#include "pgnn/checkpoint.hpp"
#include "pgnn/gnn.hpp"
#include "pgnn/linalg.hpp"
#include "pgnn/scenario.hpp"

#include <cstdio>
#include <filesystem>

using namespace pgnn;

namespace {
arma::cx_mat random_channel(arma::uword n, arma::uword k, std::uint64_t seed) {
  ScenarioConfig cfg;
  cfg.antennas_per_bs = static_cast<std::uint32_t>(n);
  cfg.users_per_cell = static_cast<std::uint32_t>(k);
  cfg.seed = seed;
  return sample_channel(cfg, 1).channel(0);
}

arma::mat random_mat(arma::uword r, arma::uword c, std::uint64_t seed, double scale = 1.0) {
  rng64 g(seed);
  arma::mat m(r, c);
  m.imbue([&] { return scale * g.next_uniform(-1.0, 1.0); });
  return m;
}
}  // namespace

TEST_CASE("vanilla layer forward", "[gnn]") {
  const arma::cx_mat H = random_channel(4, 3, 1);
  const EdgeState e0 = EdgeState::from_channel(H);

  SECTION("identity weights with activation off pass features through") {
    VanillaLayerWeights w{arma::eye(2, 2), arma::zeros(2, 2), arma::zeros(2, 2)};
    const EdgeState out = vanilla_layer_forward(e0, w, Pooling::sum, false);
    CHECK(arma::norm(out.flat - e0.flat, "fro") == 0.0);
  }

  SECTION("single edge graph leaves only the self term") {
    const arma::cx_mat h = random_channel(1, 1, 2);
    const EdgeState e = EdgeState::from_channel(h);
    VanillaLayerWeights w{random_mat(3, 2, 3), random_mat(3, 2, 4), random_mat(3, 2, 5)};
    const EdgeState out = vanilla_layer_forward(e, w, Pooling::sum, false);
    CHECK(arma::norm(out.flat - (e.flat * w.S.t()), "fro") < 1e-14);
  }

  SECTION("matches the loop oracle for every pooling kind") {
    VanillaLayerWeights w{random_mat(5, 2, 6), random_mat(5, 2, 7), random_mat(5, 2, 8)};
    for (Pooling pooling : {Pooling::sum, Pooling::mean, Pooling::max}) {
      const EdgeState out = vanilla_layer_forward(e0, w, pooling, true);
      const auto want = test_oracle::vanilla_layer(test_oracle::grid_from_state(e0), w.S, w.P, w.Q,
                                                   pooling, true);
      CHECK(arma::norm(out.flat - test_oracle::grid_to_flat(want), "fro") < 1e-12);
    }
  }

  SECTION("width mismatch is rejected") {
    VanillaLayerWeights w{random_mat(3, 4, 9), random_mat(3, 4, 10), random_mat(3, 4, 11)};
    CHECK_THROWS_AS(vanilla_layer_forward(e0, w), std::invalid_argument);
  }
}

TEST_CASE("model step 1 concatenates the expansion features", "[gnn]") {
  const arma::cx_mat H = random_channel(6, 3, 12);

  SECTION("D = H single channel reproduces H (H^H H)") {
    const EdgeState e = EdgeState::from_channel(H);
    const EdgeState out = model_step1(e, H);
    REQUIRE(out.width() == 4);
    const arma::cx_mat B = out.channel(1);
    CHECK(arma::norm(B - H * (H.t() * H), "fro") < 1e-12);
    CHECK(arma::norm(out.channel(0) - H, "fro") == 0.0);
  }

  SECTION("orthonormal columns give output [H, H]") {
    arma::cx_mat Q, R;
    arma::qr_econ(Q, R, H);
    const EdgeState e = EdgeState::from_channel(Q);
    const EdgeState out = model_step1(e, Q);
    CHECK(arma::norm(out.channel(1) - Q, "fro") < 1e-12);
  }

  SECTION("zero features stay zero") {
    EdgeState e = EdgeState::from_channel(H);
    e.flat.zeros();
    const EdgeState out = model_step1(e, H);
    CHECK(arma::norm(out.flat, "fro") == 0.0);
  }

  SECTION("odd widths are rejected") {
    EdgeState e = EdgeState::from_channel(H);
    e.flat = arma::join_rows(e.flat, arma::mat(e.flat.n_rows, 1, arma::fill::zeros));
    CHECK_THROWS_AS(model_step1(e, H), std::invalid_argument);
  }
}

TEST_CASE("model layer forward", "[gnn]") {
  const arma::cx_mat H = random_channel(5, 3, 13);
  const EdgeState e0 = EdgeState::from_channel(H);

  SECTION("specialization weights compute one expansion step") {
    ModelLayerWeights w{2.0 * arma::eye(2, 2), -arma::eye(2, 2), arma::zeros(2, 2),
                        arma::zeros(2, 2), arma::zeros(2, 2), std::nullopt};
    const EdgeState out = model_layer_forward(e0, H, w, true, /*activation=*/false);
    const arma::cx_mat want = taylor_pinv_step(H, H);
    CHECK(arma::norm(out.channel(0) - want, "fro") < 1e-12);
  }

  SECTION("omitted term equals a zero P1 bit for bit") {
    ModelLayerWeights w{random_mat(4, 2, 14), random_mat(4, 2, 15), random_mat(4, 2, 16),
                        random_mat(4, 2, 17), random_mat(4, 2, 18), std::nullopt};
    const EdgeState omitted = model_layer_forward(e0, H, w, true);
    w.P1 = arma::zeros(4, 2);
    const EdgeState with_zero = model_layer_forward(e0, H, w, false);
    CHECK(arma::norm(omitted.flat - with_zero.flat, "fro") == 0.0);
  }

  SECTION("matches the loop oracle with and without the non-neighbor term") {
    ModelLayerWeights w{random_mat(6, 4, 19), random_mat(6, 4, 20), random_mat(6, 4, 21),
                        random_mat(6, 4, 22), random_mat(6, 4, 23), random_mat(6, 4, 24)};
    const EdgeState widened = model_step1(e0, H);  // width 4 input for a generic case
    EdgeState in{e0.antennas, e0.users, widened.flat, 0};
    const auto grid = test_oracle::grid_from_state(in);
    const EdgeState got_omit = model_layer_forward(in, H, w, true);
    const auto want_omit =
        test_oracle::model_layer(grid, H, w.S0, w.S1, w.P0, w.Q0, w.Q1, nullptr, true);
    CHECK(arma::norm(got_omit.flat - test_oracle::grid_to_flat(want_omit), "fro") < 1e-10);

    const EdgeState got_full = model_layer_forward(in, H, w, false);
    const auto want_full =
        test_oracle::model_layer(grid, H, w.S0, w.S1, w.P0, w.Q0, w.Q1, &*w.P1, true);
    CHECK(arma::norm(got_full.flat - test_oracle::grid_to_flat(want_full), "fro") < 1e-10);
  }
}

TEST_CASE("model forward stack embeds the iterated expansion", "[gnn]") {
  const arma::cx_mat H = random_channel(8, 4, 25);

  SECTION("specialized stack reproduces the scaled recursion layer by layer") {
    const std::size_t L = 6;
    const double s2 = spectral_norm_sq_estimate(H);
    const arma::cx_mat X = H / s2;  // scaled input enters the contraction region
    const ParamPack pack = tgnn_specialization(L);
    const auto states = model_forward_states(X, pack);
    REQUIRE(states.size() == L + 1);
    arma::cx_mat D = X;
    CHECK(arma::norm(states[0].channel(0) - D, "fro") < 1e-12);
    for (std::size_t l = 1; l <= L; ++l) {
      D = taylor_pinv_step(D, X);
      CHECK(arma::norm(states[l].channel(0) - D, "fro") < 1e-10);
    }
  }

  SECTION("raw-input specialization matches the unscaled recursion for two layers") {
    const ParamPack pack = tgnn_specialization(2);
    const auto states = model_forward_states(H, pack);
    arma::cx_mat D = H;
    for (std::size_t l = 1; l <= 2; ++l) {
      D = taylor_pinv_step(D, H);
      CHECK(arma::norm(states[l].channel(0) - D, "fro") < 1e-10);
    }
  }

  SECTION("permutation equivariance of the full forward") {
    const ParamPack pack = init_params(model_se_arch(), 3);
    const arma::uvec pa = arma::randperm(8), pu = arma::randperm(4);
    const arma::cx_mat Hp = H.rows(pa).eval().cols(pu);
    const arma::cx_mat V = model_forward(H, pack, 1.0).entries;
    const arma::cx_mat Vp = model_forward(Hp, pack, 1.0).entries;
    CHECK(arma::norm(Vp - V.rows(pa).eval().cols(pu), "fro") < 1e-6);
  }

  SECTION("random parameters give a finite, power-feasible output") {
    const ParamPack pack = init_params(model_se_arch(), 4);
    const PrecodingMatrix V = model_forward(H, pack, 2.0);
    CHECK(V.entries.is_finite());
    CHECK(V.total_power() == Catch::Approx(2.0).epsilon(1e-9));
  }
}

TEST_CASE("vanilla forward stack", "[gnn]") {
  const arma::cx_mat H = random_channel(8, 4, 26);

  SECTION("permutation equivariance") {
    GnnArch arch{ArchKind::vanilla, {2, 16, 16, 2}};
    const ParamPack pack = init_params(arch, 5);
    const arma::uvec pa = arma::randperm(8), pu = arma::randperm(4);
    const arma::cx_mat Hp = H.rows(pa).eval().cols(pu);
    const arma::cx_mat V = vanilla_forward(H, pack, 1.0).entries;
    const arma::cx_mat Vp = vanilla_forward(Hp, pack, 1.0).entries;
    CHECK(arma::norm(Vp - V.rows(pa).eval().cols(pu), "fro") < 1e-6);
  }

  SECTION("zero weights produce a degenerate output") {
    GnnArch arch{ArchKind::vanilla, {2, 4, 2}};
    ParamPack pack = init_params(arch, 6);
    for (auto& m : pack.mats) m.zeros();
    CHECK_THROWS_AS(vanilla_forward(H, pack, 1.0), degenerate_input_error);
  }

  SECTION("identity channel gives a finite normalized output") {
    GnnArch arch{ArchKind::vanilla, {2, 8, 2}};
    const ParamPack pack = init_params(arch, 7);
    const arma::cx_mat I8(arma::eye(8, 8), arma::zeros(8, 8));
    const PrecodingMatrix V = vanilla_forward(I8, pack, 1.5);
    CHECK(V.entries.is_finite());
    CHECK(V.total_power() == Catch::Approx(1.5).epsilon(1e-9));
  }
}

TEST_CASE("multi-cell model layer", "[gnn]") {
  const arma::uword M = 2, N = 3, K = 2;
  ScenarioConfig cfg;
  cfg.cells = M;
  cfg.antennas_per_bs = N;
  cfg.users_per_cell = K;
  cfg.seed = 27;
  const ChannelDataset ds = sample_channel(cfg, 1);
  std::vector<arma::cx_mat> blocks;
  for (arma::uword i = 0; i < M; ++i)
    for (arma::uword m = 0; m < M; ++m) blocks.push_back(ds.block(0, i, m));

  arma::cx_mat Hbig(M * N, M * K);
  for (arma::uword i = 0; i < M; ++i)
    for (arma::uword m = 0; m < M; ++m)
      Hbig.submat(i * N, m * K, i * N + N - 1, m * K + K - 1) = blocks[i * M + m];
  const EdgeState e0 = EdgeState::from_channel(Hbig);

  SECTION("matches the loop oracle (omitted and full)") {
    for (bool omit : {true, false}) {
      MultiCellLayerWeights w{random_mat(4, 4, 28), random_mat(4, omit ? 2 : 4, 29),
                              random_mat(4, omit ? 2 : 4, 30), random_mat(4, 4, 31),
                              random_mat(4, 4, 32)};
      const EdgeState got = model_layer_forward_multicell(e0, blocks, M, w, omit, true);
      const auto want =
          test_oracle::multicell_layer(test_oracle::grid_from_state(e0), blocks, M, w.s, w.p_a,
                                       w.p_r, w.q_a, w.q_r, omit, true);
      CHECK(arma::norm(got.flat - test_oracle::grid_to_flat(want), "fro") < 1e-11);
    }
  }

  SECTION("M=1 reduces to the single-cell layer under the weight mapping") {
    std::vector<arma::cx_mat> one{blocks[0]};
    const EdgeState e1 = EdgeState::from_channel(blocks[0]);
    MultiCellLayerWeights w{random_mat(4, 4, 33), random_mat(4, 2, 34), arma::zeros(4, 2),
                            random_mat(4, 4, 35), arma::zeros(4, 4)};
    const EdgeState got = model_layer_forward_multicell(e1, one, 1, w, true, false);

    // single-cell full-range equivalents: S = s - [p_a | 0] - q_a on c-blocks
    const arma::mat s_d = w.s.cols(0, 1), s_b = w.s.cols(2, 3);
    const arma::mat qa_d = w.q_a.cols(0, 1), qa_b = w.q_a.cols(2, 3);
    ModelLayerWeights sw{s_d - w.p_a - qa_d, s_b - qa_b, w.p_a, qa_d, qa_b, std::nullopt};
    const EdgeState want = model_layer_forward(e1, blocks[0], sw, true, false);
    CHECK(arma::norm(got.flat - want.flat, "fro") < 1e-11);
  }

  SECTION("cell permutation equivariance of the full multi-cell forward") {
    GnnArch arch = model_multicell_arch(2);
    arch.widths = {2, 8, 2};
    const ParamPack pack = init_params(arch, 8);
    const auto V = model_forward_multicell(blocks, M, pack, 1.0);
    // swap the two cells: blocks'[i*M+m] = blocks[(1-i)*M + (1-m)]
    std::vector<arma::cx_mat> swapped{blocks[3], blocks[2], blocks[1], blocks[0]};
    const auto Vs = model_forward_multicell(swapped, M, pack, 1.0);
    CHECK(arma::norm(Vs[0].entries - V[1].entries, "fro") < 1e-8);
    CHECK(arma::norm(Vs[1].entries - V[0].entries, "fro") < 1e-8);
  }

  SECTION("zero cross-cell channels with zero inter-cell weights decouple") {
    // identity activation: the whole-tensor norm would couple the cells
    // through a global scale even when all interactions are zero
    std::vector<arma::cx_mat> diag = blocks;
    diag[1].zeros();  // BS 0 -> cell 1
    diag[2].zeros();  // BS 1 -> cell 0
    GnnArch arch = model_multicell_arch(2);
    arch.widths = {2, 4, 2};
    arch.disable_activation = true;
    ParamPack pack = init_params(arch, 9);
    // zero the inter-cell aggregation weights p_r, q_r in every layer
    for (std::size_t l = 0; l < arch.layer_count(); ++l) {
      pack.mats[l * 5 + 2].zeros();
      pack.mats[l * 5 + 4].zeros();
    }
    const auto V = model_forward_multicell(diag, M, pack, 1.0);

    // the same weights as a single-cell run of cell 0 (users of the other
    // cell see zero channels, so their edges carry zero influence)
    GnnArch sc = arch;
    sc.cells = 1;
    ParamPack single{sc, pack.mats};
    std::vector<arma::cx_mat> cell0{diag[0]};
    const auto V0 = model_forward_multicell(cell0, 1, single, 1.0);
    CHECK(arma::norm(V[0].entries - V0[0].entries, "fro") < 1e-9);
  }
}

TEST_CASE("init_params determinism, widths and bounds", "[gnn]") {
  SECTION("same seed twice is bit identical") {
    const ParamPack a = init_params(model_se_arch(), 11);
    const ParamPack b = init_params(model_se_arch(), 11);
    for (std::size_t i = 0; i < a.mats.size(); ++i)
      CHECK(arma::norm(a.mats[i] - b.mats[i], "fro") == 0.0);
  }

  SECTION("catalog widths") {
    CHECK(model_se_arch().widths == std::vector<std::uint32_t>{2, 32, 32, 8, 2});
    CHECK(model_ee_arch().widths == std::vector<std::uint32_t>{2, 32, 32, 32, 8, 2});
    CHECK(vanilla_arch().widths == std::vector<std::uint32_t>{2, 64, 512, 512, 64, 2});
  }

  SECTION("entries live in +-sqrt(1/J_l)") {
    const ParamPack p = init_params(model_se_arch(), 12);
    for (std::size_t l = 0; l < p.arch.layer_count(); ++l) {
      const double bound = std::sqrt(1.0 / p.arch.widths[l]);
      for (std::size_t slot = 0; slot < 5; ++slot)
        CHECK(arma::abs(p.mats[l * 5 + slot]).max() <= bound);
    }
  }

  SECTION("odd hidden widths are rejected for the model arch") {
    GnnArch bad{ArchKind::model, {2, 7, 2}};
    CHECK_THROWS_AS(init_params(bad, 1), std::invalid_argument);
  }
}

TEST_CASE("scale adapter produces bounded positive factors", "[gnn]") {
  GnnArch arch = model_ee_arch();
  arch.widths = {2, 4, 2};  // adapter behavior is independent of the trunk

  SECTION("fresh adapters stay in (0, 10) for K up to 64") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const ParamPack p = init_params(arch, seed);
      for (std::uint32_t K : {1u, 2u, 8u, 16u, 32u, 64u}) {
        const double eta = scale_adapter_forward(p, K);
        CHECK(eta > 0.0);
        CHECK(eta < 10.0);
      }
    }
  }

  SECTION("zero inner weights collapse to softplus(bias)") {
    ParamPack p = init_params(arch, 1);
    const std::size_t base = arch.gnn_matrix_count();
    for (std::size_t i = 0; i < 6; ++i) p.mats[base + i].zeros();
    p.mats[base + 5](0, 0) = 0.3;  // output bias
    const double want = std::log1p(std::exp(0.3));
    for (std::uint32_t K : {1u, 7u, 30u})
      CHECK(scale_adapter_forward(p, K) == Catch::Approx(want).epsilon(1e-12));
  }
}

TEST_CASE("vanilla output sensitivity to distant entries shrinks with scale",
          "[gnn][proposition]") {
  // fixed random single layer with mean pooling; redraw everything except
  // edge (0,0) and measure how much that edge's output moves
  const auto sensitivity = [](arma::uword N, arma::uword K, std::uint64_t seed) {
    VanillaLayerWeights w{random_mat(4, 2, 71), random_mat(4, 2, 72), random_mat(4, 2, 73)};
    double acc = 0.0;
    const int trials = 200;
    for (int tr = 0; tr < trials; ++tr) {
      const arma::cx_mat H = random_channel(N, K, seed + 2 * tr);
      arma::cx_mat Ht = random_channel(N, K, seed + 2 * tr + 1);
      Ht(0, 0) = H(0, 0);
      const EdgeState a = vanilla_layer_forward(EdgeState::from_channel(H), w, Pooling::mean, true);
      const EdgeState b = vanilla_layer_forward(EdgeState::from_channel(Ht), w, Pooling::mean, true);
      acc += arma::norm(a.flat.row(0) - b.flat.row(0), 2);
    }
    return acc / trials;
  };
  const double small = sensitivity(8, 4, 1000);
  const double large = sensitivity(16, 8, 4000);
  CHECK(large < small);
}

TEST_CASE("block-orthogonal separation: specialized model decouples, vanilla does not",
          "[gnn][separation]") {
  // H = [H1, H2] with H1^H H2 = 0
  const arma::uword n = 8, kh = 2;
  arma::cx_mat G = random_channel(n, n, 500);
  arma::cx_mat Q, R;
  arma::qr(Q, R, G);
  const arma::cx_mat H1 = Q.cols(0, n / 2 - 1) * random_channel(n / 2, kh, 501);
  const arma::cx_mat H2 = Q.cols(n / 2, n - 1) * random_channel(n / 2, kh, 502);
  const arma::cx_mat H = arma::join_rows(H1, H2);
  REQUIRE(arma::norm(H1.t() * H2, "fro") < 1e-12);

  SECTION("specialized model layer output on block 1 ignores block 2") {
    ModelLayerWeights w{2.0 * arma::eye(2, 2), -arma::eye(2, 2), arma::zeros(2, 2),
                        arma::zeros(2, 2), arma::zeros(2, 2), std::nullopt};
    const EdgeState joint = model_layer_forward(EdgeState::from_channel(H), H, w, true, false);
    const EdgeState alone = model_layer_forward(EdgeState::from_channel(H1), H1, w, true, false);
    double diff = 0.0;
    for (arma::uword k = 0; k < kh; ++k)
      for (arma::uword i = 0; i < n; ++i)
        diff += arma::norm(joint.flat.row(k * n + i) - alone.flat.row(k * n + i), 2);
    CHECK(diff < 1e-9);
  }

  SECTION("vanilla layer with nonzero Q couples the blocks") {
    VanillaLayerWeights w{arma::eye(2, 2), arma::zeros(2, 2), random_mat(2, 2, 503)};
    REQUIRE(arma::norm(w.Q, "fro") > 0.0);
    const EdgeState joint = vanilla_layer_forward(EdgeState::from_channel(H), H1.n_cols ? w : w,
                                                  Pooling::sum, false);
    const EdgeState alone = vanilla_layer_forward(EdgeState::from_channel(H1), w, Pooling::sum, false);
    double diff = 0.0;
    for (arma::uword k = 0; k < kh; ++k)
      for (arma::uword i = 0; i < n; ++i)
        diff += arma::norm(joint.flat.row(k * n + i) - alone.flat.row(k * n + i), 2);
    CHECK(diff > 1e-3);
  }
}

TEST_CASE("parameter checkpoints round-trip bit exactly", "[gnn][checkpoint]") {
  const std::string path = (std::filesystem::temp_directory_path() / "pgnn_ckpt.bin").string();
  for (const GnnArch& arch : {model_se_arch(), model_ee_arch(), vanilla_arch(),
                              model_multicell_arch(2)}) {
    const ParamPack pack = init_params(arch, 77);
    save_params(path, pack);
    const ParamPack back = load_params(path);
    CHECK(back.arch.kind == pack.arch.kind);
    CHECK(back.arch.widths == pack.arch.widths);
    CHECK(back.arch.with_scale_adapter == pack.arch.with_scale_adapter);
    REQUIRE(back.mats.size() == pack.mats.size());
    for (std::size_t i = 0; i < pack.mats.size(); ++i)
      CHECK(std::memcmp(pack.mats[i].memptr(), back.mats[i].memptr(),
                        pack.mats[i].n_elem * sizeof(double)) == 0);
  }
  std::remove(path.c_str());

  SECTION("bad magic raises a format error") {
    const ParamPack pack = init_params(model_se_arch(), 78);
    save_params(path, pack);
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(0);
    f.write("NOPE", 4);
    f.close();
    CHECK_THROWS_AS(load_params(path), format_error);
    std::remove(path.c_str());
  }
}
