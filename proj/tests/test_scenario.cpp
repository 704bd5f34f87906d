#include <catch2/catch_amalgamated.hpp>

#include "pgnn/scenario.hpp"

using namespace pgnn;

TEST_CASE("channel sampling shapes and determinism", "[scenario]") {
  ScenarioConfig cfg;
  cfg.antennas_per_bs = 8;
  cfg.users_per_cell = 4;
  cfg.seed = 7;

  SECTION("count zero yields an empty dataset") {
    const ChannelDataset ds = sample_channel(cfg, 0);
    CHECK(ds.count == 0);
    CHECK(ds.complex_entries() == 0);
    CHECK(ds.blocks.empty());
  }

  SECTION("multi-cell tensor size follows S*M*M*N*K") {
    ScenarioConfig mc = cfg;
    mc.cells = 2;
    mc.antennas_per_bs = 4;
    mc.users_per_cell = 2;
    const ChannelDataset ds = sample_channel(mc, 3);
    CHECK(ds.complex_entries() == 3 * 2 * 2 * 4 * 2);
    CHECK(ds.blocks.size() == 3 * 2 * 2);
  }

  SECTION("identical config gives bit-identical draws") {
    const ChannelDataset a = sample_channel(cfg, 50);
    const ChannelDataset b = sample_channel(cfg, 50);
    for (std::size_t s = 0; s < a.count; ++s) {
      REQUIRE(a.channel(s).n_elem == b.channel(s).n_elem);
      CHECK(std::memcmp(a.channel(s).memptr(), b.channel(s).memptr(),
                        a.channel(s).n_elem * sizeof(arma::cx_double)) == 0);
    }
  }

  SECTION("seed changes the draw") {
    ScenarioConfig other = cfg;
    other.seed = 8;
    CHECK(arma::norm(sample_channel(cfg, 1).channel(0) - sample_channel(other, 1).channel(0),
                     "fro") > 1e-6);
  }
}

TEST_CASE("channel entries are unit-variance complex normal", "[scenario]") {
  ScenarioConfig cfg;
  cfg.antennas_per_bs = 8;
  cfg.users_per_cell = 4;
  cfg.seed = 123;
  const ChannelDataset ds = sample_channel(cfg, 10000);

  double sum_sq = 0.0, sum_re = 0.0, sum_im = 0.0, sum_re2 = 0.0, sum_im2 = 0.0;
  const std::size_t n_entries = ds.complex_entries();
  for (std::size_t s = 0; s < ds.count; ++s) {
    const arma::cx_mat& H = ds.channel(s);
    sum_sq += arma::accu(arma::square(arma::abs(H)));
    sum_re += arma::accu(arma::real(H));
    sum_im += arma::accu(arma::imag(H));
    sum_re2 += arma::accu(arma::square(arma::real(H)));
    sum_im2 += arma::accu(arma::square(arma::imag(H)));
  }
  const double n = static_cast<double>(n_entries);
  CHECK(sum_sq / n == Catch::Approx(1.0).margin(0.05));         // E|h|^2 = 1
  CHECK(std::abs(sum_re / n) < 0.01);
  CHECK(std::abs(sum_im / n) < 0.01);
  const double var_re = sum_re2 / n - std::pow(sum_re / n, 2);
  const double var_im = sum_im2 / n - std::pow(sum_im / n, 2);
  CHECK(var_re > 0.45);
  CHECK(var_re < 0.55);
  CHECK(var_im > 0.45);
  CHECK(var_im < 0.55);

  // independence proxy: correlation between two fixed entries across draws
  arma::vec a(ds.count), b(ds.count), c(ds.count);
  for (std::size_t s = 0; s < ds.count; ++s) {
    a(s) = ds.channel(s)(0, 0).real();
    b(s) = ds.channel(s)(3, 2).real();
    c(s) = ds.channel(s)(0, 0).imag();
  }
  CHECK(std::abs(arma::as_scalar(arma::cor(a, b))) < 0.05);
  CHECK(std::abs(arma::as_scalar(arma::cor(a, c))) < 0.05);
}

TEST_CASE("snr scaling multiplies by sqrt(p_max/sigma2)", "[scenario]") {
  arma::cx_mat H(3, 2, arma::fill::ones);
  H(0, 0) = {1.0, 0.0};

  SECTION("unit ratio leaves H unchanged") {
    CHECK(arma::norm(apply_snr_scaling(H, 1.0, 1.0) - H, "fro") == 0.0);
  }
  SECTION("p_max=100, sigma2=1 multiplies entries by 10") {
    const arma::cx_mat S = apply_snr_scaling(H, 100.0, 1.0);
    CHECK(S(0, 0).real() == Catch::Approx(10.0));
    CHECK(S(0, 0).imag() == Catch::Approx(0.0));
  }
  SECTION("p_max=4, sigma2=16 halves the Frobenius norm") {
    const arma::cx_mat S = apply_snr_scaling(H, 4.0, 16.0);
    CHECK(arma::norm(S, "fro") == Catch::Approx(0.5 * arma::norm(H, "fro")));
  }
  SECTION("non-positive powers are rejected") {
    CHECK_THROWS_AS(apply_snr_scaling(H, 0.0, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(apply_snr_scaling(H, 1.0, -2.0), std::invalid_argument);
  }
}

TEST_CASE("snr convention fixes p_max = 1 and derives sigma2", "[scenario]") {
  ScenarioConfig cfg;
  cfg.snr_db = 10.0;
  cfg.apply_snr_convention();
  CHECK(cfg.p_max == 1.0);
  CHECK(cfg.sigma2 == Catch::Approx(0.1));
}

TEST_CASE("user count distributions", "[scenario]") {
  rng64 g(99);

  SECTION("fixed returns the constant") {
    const auto dist = UserCountDistribution::fixed(4);
    for (int i = 0; i < 10; ++i) CHECK(sample_user_count(dist, g) == 4);
  }

  SECTION("exponential(4) draws concentrate below 10 with mean near 4") {
    const auto dist = UserCountDistribution::exponential(4.0);
    const int n = 100000;
    double mean = 0.0;
    int below10 = 0, minv = 1 << 30;
    for (int i = 0; i < n; ++i) {
      const int k = static_cast<int>(sample_user_count(dist, g));
      mean += k;
      if (k < 10) ++below10;
      minv = std::min(minv, k);
    }
    mean /= n;
    CHECK(mean > 3.5);
    CHECK(mean < 4.6);
    CHECK(below10 >= n * 9 / 10);
    CHECK(minv >= 2);  // clamp
  }

  SECTION("uniform(2,30) covers the range with mean near 16") {
    const auto dist = UserCountDistribution::uniform(2, 30);
    const int n = 100000;
    double mean = 0.0;
    int lo = 1 << 30, hi = 0;
    for (int i = 0; i < n; ++i) {
      const int k = static_cast<int>(sample_user_count(dist, g));
      mean += k;
      lo = std::min(lo, k);
      hi = std::max(hi, k);
    }
    mean /= n;
    CHECK(lo == 2);
    CHECK(hi == 30);
    CHECK(mean == Catch::Approx(16.0).margin(0.5));
  }

  SECTION("invalid parameters are rejected") {
    CHECK_THROWS_AS(sample_user_count(UserCountDistribution::exponential(-1.0), g),
                    std::invalid_argument);
    CHECK_THROWS_AS(sample_user_count(UserCountDistribution::uniform(5, 3), g),
                    std::invalid_argument);
  }
}

TEST_CASE("variable-K sampling draws per-sample user counts", "[scenario]") {
  const auto ds = sample_channel_variable_k(16, UserCountDistribution::exponential(4.0), 200, 5);
  CHECK(ds.channels.size() == 200);
  bool varied = false;
  for (const auto& H : ds.channels) {
    CHECK(H.n_rows == 16);
    CHECK(H.n_cols >= 2);
    varied = varied || H.n_cols != ds.channels.front().n_cols;
  }
  CHECK(varied);
}
