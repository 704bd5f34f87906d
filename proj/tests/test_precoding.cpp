#include <catch2/catch_amalgamated.hpp>

#include "pgnn/metrics.hpp"
#include "pgnn/precoding.hpp"
#include "pgnn/rates.hpp"
#include "pgnn/scenario.hpp"

using namespace pgnn;

namespace {
arma::cx_mat random_channel(arma::uword n, arma::uword k, std::uint64_t seed) {
  ScenarioConfig cfg;
  cfg.antennas_per_bs = static_cast<std::uint32_t>(n);
  cfg.users_per_cell = static_cast<std::uint32_t>(k);
  cfg.seed = seed;
  return sample_channel(cfg, 1).channel(0);
}

// columns compared up to a complex phase
double direction_distance(const arma::cx_vec& a, const arma::cx_vec& b) {
  return 1.0 - std::abs(arma::cdot(a, b)) / (arma::norm(a) * arma::norm(b));
}

arma::cx_mat block_orthogonal_channel(arma::uword n, arma::uword k_half, std::uint64_t seed,
                                      arma::cx_mat* h1 = nullptr, arma::cx_mat* h2 = nullptr) {
  arma::cx_mat G = random_channel(n, n, seed);
  arma::cx_mat Q, R;
  arma::qr(Q, R, G);
  const arma::cx_mat C1 = random_channel(n / 2, k_half, seed + 1);
  const arma::cx_mat C2 = random_channel(n / 2, k_half, seed + 2);
  arma::cx_mat H1 = Q.cols(0, n / 2 - 1) * C1;
  arma::cx_mat H2 = Q.cols(n / 2, n - 1) * C2;
  if (h1) *h1 = H1;
  if (h2) *h2 = H2;
  return arma::join_rows(H1, H2);
}
}  // namespace

TEST_CASE("mrt aligns beams with channels at equal power", "[precoding]") {
  SECTION("identity channel with p_max = 2") {
    const arma::cx_mat I2(arma::eye(2, 2), arma::zeros(2, 2));
    const PrecodingMatrix V = mrt(I2, 2.0);
    CHECK(arma::norm(V.entries - I2, "fro") < 1e-12);
  }
  SECTION("normalized correlation is one for every user") {
    const arma::cx_mat H = random_channel(8, 4, 1);
    const arma::vec c = normalized_correlation(H, mrt(H, 1.0).entries);
    for (double v : c) CHECK(v == Catch::Approx(1.0).margin(1e-12));
  }
  SECTION("single-user column is scaled to unit power") {
    arma::cx_mat h(2, 1, arma::fill::zeros);
    h(0, 0) = {2.0, 0.0};
    const PrecodingMatrix V = mrt(h, 1.0);
    CHECK(std::abs(V.entries(0, 0) - arma::cx_double(1.0, 0.0)) < 1e-12);
    CHECK(std::abs(V.entries(1, 0)) < 1e-12);
  }
  SECTION("zero column rejected") {
    arma::cx_mat H(2, 2, arma::fill::zeros);
    H(0, 0) = {1.0, 0.0};
    CHECK_THROWS_AS(mrt(H, 1.0), std::invalid_argument);
  }
}

TEST_CASE("zfbf nulls inter-user interference", "[precoding]") {
  SECTION("identity channel") {
    const arma::cx_mat I4(arma::eye(4, 4), arma::zeros(4, 4));
    CHECK(arma::norm(zfbf(I4, 4.0).entries - I4, "fro") < 1e-12);
  }
  SECTION("leakage below 1e-9 on a random 8x4 channel") {
    const arma::cx_mat H = random_channel(8, 4, 2);
    const arma::cx_mat V = zfbf(H, 1.0).entries;
    const arma::cx_mat G = H.t() * V;
    for (arma::uword j = 0; j < 4; ++j)
      for (arma::uword k = 0; k < 4; ++k)
        if (j != k) CHECK(std::abs(G(j, k)) < 1e-9);
  }
  SECTION("orthogonal columns make ZFBF coincide with MRT") {
    arma::cx_mat H = random_channel(8, 8, 3);
    arma::cx_mat Q, R;
    arma::qr_econ(Q, R, H);
    const arma::cx_mat Ho = Q.cols(0, 3) * arma::diagmat(arma::cx_vec{{2.0, 0}, {1.0, 0}, {0.5, 0}, {3.0, 0}});
    const arma::cx_mat Vz = zfbf(Ho, 1.0).entries;
    const arma::cx_mat Vm = mrt(Ho, 1.0).entries;
    for (arma::uword k = 0; k < 4; ++k)
      CHECK(direction_distance(Vz.col(k), Vm.col(k)) < 1e-10);
  }
}

TEST_CASE("rzf interpolates zfbf and mrt", "[precoding]") {
  const arma::cx_mat H = random_channel(8, 4, 4);
  SECTION("vanishing regularizer approaches zfbf directions") {
    const PrecodingMatrix V = rzf(H, 1.0, 1e-9 / 4.0);  // K sigma2 / p_max = 1e-9
    const arma::cx_mat Vz = zfbf(H, 1.0).entries;
    for (arma::uword k = 0; k < 4; ++k)
      CHECK(direction_distance(V.entries.col(k), Vz.col(k)) < 1e-6);
  }
  SECTION("dominant regularizer approaches mrt directions") {
    const PrecodingMatrix V = rzf(H, 1.0, 1e9);
    const arma::cx_mat Vm = mrt(H, 1.0).entries;
    for (arma::uword k = 0; k < 4; ++k)
      CHECK(direction_distance(V.entries.col(k), Vm.col(k)) < 1e-6);
  }
  SECTION("beats mrt and zfbf in mean sum rate at 10 dB") {
    const double sigma2 = 0.1;
    double sr_rzf = 0.0, sr_mrt = 0.0, sr_zf = 0.0;
    for (std::uint64_t s = 0; s < 100; ++s) {
      const arma::cx_mat Hs = random_channel(8, 4, 100 + s);
      sr_rzf += sum_rate(Hs, rzf(Hs, 1.0, sigma2).entries, sigma2).total;
      sr_mrt += sum_rate(Hs, mrt(Hs, 1.0).entries, sigma2).total;
      sr_zf += sum_rate(Hs, zfbf(Hs, 1.0).entries, sigma2).total;
    }
    CHECK(sr_rzf >= sr_mrt);
    CHECK(sr_rzf >= sr_zf);
  }
}

TEST_CASE("structured precoder evaluates the optimal solution form", "[precoding]") {
  const arma::cx_mat H = random_channel(8, 4, 5);
  const arma::vec uniform(4, arma::fill::value(0.25));  // trace = p_max = 1

  SECTION("uniform multipliers with vanishing noise give zfbf directions") {
    const PrecodingMatrix V = structured_precoder(H, uniform, uniform, 1e-12);
    const arma::cx_mat Vz = zfbf(H, 1.0).entries;
    for (arma::uword k = 0; k < 4; ++k)
      CHECK(direction_distance(V.entries.col(k), Vz.col(k)) < 1e-6);
  }
  SECTION("single user reduces to the mrt direction") {
    const arma::cx_mat h = random_channel(8, 1, 6);
    const PrecodingMatrix V = structured_precoder(h, arma::vec{1.0}, arma::vec{1.0}, 0.3);
    CHECK(direction_distance(V.entries.col(0), mrt(h, 1.0).entries.col(0)) < 1e-10);
  }
  SECTION("uniform multipliers land within 5% of rzf sum rate at 10 dB") {
    // the raw Eq-form output is not power constrained; compare at the budget
    const double sigma2 = 0.1;
    double sr_s = 0.0, sr_r = 0.0;
    for (std::uint64_t s = 0; s < 100; ++s) {
      const arma::cx_mat Hs = random_channel(8, 4, 200 + s);
      const arma::cx_mat Vs =
          power_normalize(structured_precoder(Hs, uniform, uniform, sigma2).entries, 1.0).entries;
      sr_s += sum_rate(Hs, Vs, sigma2).total;
      sr_r += sum_rate(Hs, rzf(Hs, 1.0, sigma2).entries, sigma2).total;
    }
    CHECK(std::abs(sr_s - sr_r) / sr_r < 0.05);
  }
  SECTION("trace mismatch is rejected") {
    arma::vec bad = uniform;
    bad(0) += 0.5;
    CHECK_THROWS_AS(structured_precoder(H, bad, uniform, 0.1), std::invalid_argument);
  }
}

TEST_CASE("power_normalize hits the budget exactly", "[precoding]") {
  const arma::cx_mat H = random_channel(6, 3, 7);

  SECTION("unit-norm input scaled by sqrt(p_max)") {
    arma::cx_mat V = H / arma::norm(H, "fro");
    const PrecodingMatrix P = power_normalize(V, 4.0);
    CHECK(P.total_power() == Catch::Approx(4.0).epsilon(1e-12));
    CHECK(arma::norm(P.entries - 2.0 * V, "fro") < 1e-12);
  }
  SECTION("idempotent on an already normalized matrix") {
    const PrecodingMatrix once = power_normalize(H, 2.0);
    const PrecodingMatrix twice = power_normalize(once.entries, 2.0);
    CHECK(arma::norm(once.entries - twice.entries, "fro") < 1e-13);
  }
  SECTION("column directions are unchanged") {
    const PrecodingMatrix P = power_normalize(H, 0.7);
    for (arma::uword k = 0; k < H.n_cols; ++k)
      CHECK(direction_distance(P.entries.col(k), H.col(k)) < 1e-12);
  }
  SECTION("zero matrix is degenerate") {
    CHECK_THROWS_AS(power_normalize(arma::cx_mat(4, 2, arma::fill::zeros), 1.0),
                    degenerate_input_error);
  }
}

TEST_CASE("tgnn precoder follows the iterated expansion", "[precoding]") {
  const arma::cx_mat H = random_channel(8, 4, 8);

  SECTION("zero iterations equals mrt") {
    const arma::cx_mat V0 = tgnn_precoder(H, 0, 1.0).entries;
    const arma::cx_mat Vm = mrt(H, 1.0).entries;
    CHECK(arma::norm(V0 - Vm, "fro") < 1e-10);
  }
  SECTION("forty iterations reach zfbf-level leakage") {
    const arma::cx_mat V = tgnn_precoder(H, 40, 1.0).entries;
    const arma::cx_mat Vz = zfbf(H, 1.0).entries;
    for (arma::uword k = 0; k < 4; ++k) {
      for (arma::uword j = 0; j < 4; ++j)
        if (j != k) CHECK(std::abs(arma::cdot(H.col(j), V.col(k))) / arma::norm(V.col(k)) < 1e-6);
      CHECK(direction_distance(V.col(k), Vz.col(k)) < 1e-8);
    }
  }
  SECTION("block-orthogonal channels decouple") {
    arma::cx_mat H1, H2;
    const arma::cx_mat Hb = block_orthogonal_channel(8, 2, 40, &H1, &H2);
    REQUIRE(arma::norm(H1.t() * H2, "fro") < 1e-12);
    const arma::cx_mat V = tgnn_precoder(Hb, 40, 1.0).entries;
    const arma::cx_mat V1 = tgnn_precoder(H1, 40, 0.5).entries;
    const arma::cx_mat V2 = tgnn_precoder(H2, 40, 0.5).entries;
    CHECK(arma::norm(V.cols(0, 1) - V1, "fro") < 1e-7);
    CHECK(arma::norm(V.cols(2, 3) - V2, "fro") < 1e-7);
  }
}

TEST_CASE("every precoder is power feasible and permutation equivariant", "[precoding]") {
  const double p_max = 2.0, sigma2 = 0.25;
  const arma::cx_mat H = random_channel(8, 4, 9);
  const arma::uvec pa = arma::randperm(8), pu = arma::randperm(4);
  const arma::cx_mat Hp = H.rows(pa).eval().cols(pu);

  const auto check_pe = [&](auto&& f) {
    const arma::cx_mat V = f(H).entries;
    const arma::cx_mat Vp = f(Hp).entries;
    CHECK(arma::norm(Vp - V.rows(pa).eval().cols(pu), "fro") < 1e-9);
  };

  check_pe([&](const arma::cx_mat& X) { return mrt(X, p_max); });
  check_pe([&](const arma::cx_mat& X) { return zfbf(X, p_max); });
  check_pe([&](const arma::cx_mat& X) { return rzf(X, p_max, sigma2); });
  check_pe([&](const arma::cx_mat& X) { return tgnn_precoder(X, 12, p_max); });

  for (const PrecodingMatrix& V :
       {mrt(H, p_max), zfbf(H, p_max), rzf(H, p_max, sigma2), tgnn_precoder(H, 12, p_max)})
    CHECK(V.power_feasible());
}
