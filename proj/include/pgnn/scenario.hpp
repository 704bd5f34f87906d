#ifndef PGNN_SCENARIO_HPP
#define PGNN_SCENARIO_HPP

#include <armadillo>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "pgnn/errors.hpp"
#include "pgnn/parallel.hpp"
#include "pgnn/rng.hpp"

namespace pgnn {

// System dimensions and link budget of one scenario.
//
// When snr_db is set, p_max is fixed to 1 W and sigma2 is derived from
// SNR(dB) = 10*log10(p_max / sigma2); only the ratio matters downstream.
struct ScenarioConfig {
  std::uint32_t cells = 1;             // M
  std::uint32_t antennas_per_bs = 8;   // N
  std::uint32_t users_per_cell = 4;    // K
  double p_max = 1.0;                  // watts
  double sigma2 = 1.0;                 // watts
  std::optional<double> snr_db;
  std::uint64_t seed = 0;

  void apply_snr_convention() {
    if (snr_db) {
      p_max = 1.0;
      sigma2 = std::pow(10.0, -(*snr_db) / 10.0);
    }
  }

  void validate() const {
    if (cells < 1 || antennas_per_bs < 1 || users_per_cell < 1)
      throw std::invalid_argument("scenario: M, N and K must all be >= 1");
    if (!(p_max > 0.0)) throw std::invalid_argument("scenario: p_max must be positive");
    if (!(sigma2 > 0.0)) throw std::invalid_argument("scenario: sigma2 must be positive");
  }
};

// Collection of i.i.d. CN(0,1) channel realizations.
// block(s, i, m) is the N x K matrix from the antennas of BS i to the
// users of cell m (single cell: i = m = 0).
struct ChannelDataset {
  ScenarioConfig config;
  std::size_t count = 0;
  std::vector<arma::cx_mat> blocks;  // count * M * M entries, s-major then i, m

  const arma::cx_mat& block(std::size_t s, std::uint32_t i, std::uint32_t m) const {
    return blocks[(s * config.cells + i) * config.cells + m];
  }
  arma::cx_mat& block(std::size_t s, std::uint32_t i, std::uint32_t m) {
    return blocks[(s * config.cells + i) * config.cells + m];
  }

  // single-cell convenience accessor
  const arma::cx_mat& channel(std::size_t s) const { return block(s, 0, 0); }

  std::size_t complex_entries() const {
    return count * static_cast<std::size_t>(config.cells) * config.cells *
           config.antennas_per_bs * config.users_per_cell;
  }
};

namespace detail {

// entries drawn in the file's index order (i, m, n, k) with k fastest
inline void fill_sample(ChannelDataset& ds, std::size_t s) {
  const auto& c = ds.config;
  rng64 g(rng64::stream_seed(c.seed, s));
  const double comp = 1.0 / std::sqrt(2.0);  // per-component std of CN(0,1)
  for (std::uint32_t i = 0; i < c.cells; ++i)
    for (std::uint32_t m = 0; m < c.cells; ++m) {
      arma::cx_mat& H = ds.block(s, i, m);
      H.set_size(c.antennas_per_bs, c.users_per_cell);
      for (std::uint32_t n = 0; n < c.antennas_per_bs; ++n)
        for (std::uint32_t k = 0; k < c.users_per_cell; ++k) {
          const double re = comp * g.next_normal();
          const double im = comp * g.next_normal();
          H(n, k) = {re, im};
        }
    }
}

}  // namespace detail

inline ChannelDataset sample_channel(ScenarioConfig config, std::size_t count) {
  config.apply_snr_convention();
  config.validate();
  ChannelDataset ds;
  ds.config = config;
  ds.count = count;
  ds.blocks.resize(count * static_cast<std::size_t>(config.cells) * config.cells);
  parallel_for(count, [&](std::size_t s) { detail::fill_sample(ds, s); });
  return ds;
}

// h'_{nk} = h_{nk} * sqrt(p_max / sigma2); makes the unit-budget convention
// (p_max = 1, sigma2 = 1) carry the intended SNR.
inline arma::cx_mat apply_snr_scaling(const arma::cx_mat& H, double p_max, double sigma2) {
  if (!(p_max > 0.0)) throw std::invalid_argument("apply_snr_scaling: p_max must be positive");
  if (!(sigma2 > 0.0)) throw std::invalid_argument("apply_snr_scaling: sigma2 must be positive");
  return H * std::sqrt(p_max / sigma2);
}

// Distribution of the number of users per sample.
struct UserCountDistribution {
  enum class Kind { fixed, exponential, uniform };
  Kind kind = Kind::fixed;
  std::uint32_t fixed_value = 4;
  double mean = 4.0;               // exponential
  std::uint32_t lo = 2, hi = 30;   // uniform, inclusive

  static UserCountDistribution fixed(std::uint32_t k) {
    return {Kind::fixed, k, 0.0, 0, 0};
  }
  static UserCountDistribution exponential(double mean) {
    return {Kind::exponential, 0, mean, 0, 0};
  }
  static UserCountDistribution uniform(std::uint32_t lo, std::uint32_t hi) {
    return {Kind::uniform, 0, 0.0, lo, hi};
  }

  void validate() const {
    switch (kind) {
      case Kind::fixed:
        if (fixed_value < 1) throw std::invalid_argument("user count: fixed value must be >= 1");
        break;
      case Kind::exponential:
        if (!(mean > 0.0)) throw std::invalid_argument("user count: exponential mean must be > 0");
        break;
      case Kind::uniform:
        if (lo < 1 || lo > hi) throw std::invalid_argument("user count: need 1 <= lo <= hi");
        break;
    }
  }
};

// Exponential draws are rounded to the nearest integer and clamped to >= 2;
// a single-user system has no interference structure to learn from.
inline std::uint32_t sample_user_count(const UserCountDistribution& dist, rng64& g) {
  dist.validate();
  switch (dist.kind) {
    case UserCountDistribution::Kind::fixed:
      return dist.fixed_value;
    case UserCountDistribution::Kind::exponential: {
      const double draw = g.next_exponential(dist.mean);
      const auto rounded = static_cast<std::int64_t>(std::llround(draw));
      return static_cast<std::uint32_t>(std::max<std::int64_t>(2, rounded));
    }
    case UserCountDistribution::Kind::uniform:
      return static_cast<std::uint32_t>(g.next_int(dist.lo, dist.hi));
  }
  throw std::invalid_argument("user count: unknown distribution kind");
}

// Single-cell channel set where each sample carries its own user count.
// Kept in memory only; the on-disk dataset format is fixed-K.
struct VariableKDataset {
  std::uint32_t antennas = 8;
  std::vector<arma::cx_mat> channels;  // N x K_s each
};

inline VariableKDataset sample_channel_variable_k(std::uint32_t antennas,
                                                  const UserCountDistribution& dist,
                                                  std::size_t count, std::uint64_t seed) {
  VariableKDataset ds;
  ds.antennas = antennas;
  ds.channels.resize(count);
  parallel_for(count, [&](std::size_t s) {
    rng64 g(rng64::stream_seed(seed, s));
    const std::uint32_t k = sample_user_count(dist, g);
    arma::cx_mat H(antennas, k);
    const double comp = 1.0 / std::sqrt(2.0);
    for (std::uint32_t n = 0; n < antennas; ++n)
      for (std::uint32_t j = 0; j < k; ++j) H(n, j) = {comp * g.next_normal(), comp * g.next_normal()};
    ds.channels[s] = std::move(H);
  });
  return ds;
}

}  // namespace pgnn

#endif
