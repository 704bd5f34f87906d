#ifndef PGNN_RATES_HPP
#define PGNN_RATES_HPP

#include <armadillo>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace pgnn {

struct RateResult {
  arma::vec per_user;  // bits/s/Hz
  double total = 0.0;
};

// Single-cell sum rate: R_k = log2(1 + |h_k^H v_k|^2 / (sum_{j!=k} |h_k^H v_j|^2 + sigma2)).
inline RateResult sum_rate(const arma::cx_mat& H, const arma::cx_mat& V, double sigma2) {
  if (H.n_rows != V.n_rows || H.n_cols != V.n_cols)
    throw std::invalid_argument("sum_rate: H and V shapes differ");
  const arma::uword K = H.n_cols;
  const arma::mat G2 = arma::square(arma::abs(H.t() * V));  // G2(k,j) = |h_k^H v_j|^2
  RateResult r;
  r.per_user.set_size(K);
  for (arma::uword k = 0; k < K; ++k) {
    const double signal = G2(k, k);
    const double interference = arma::accu(G2.row(k)) - signal;
    r.per_user(k) = std::log2(1.0 + signal / (interference + sigma2));
  }
  r.total = arma::accu(r.per_user);
  return r;
}

// Multi-cell coordinated rates. channel(i, m) is the N x K block from BS i
// to the users of cell m; V[m] is the precoder of BS m. Interference is
// summed over every transmit beam other than the user's own.
template <typename ChannelBlockFn>
inline RateResult sum_rate_multicell_fn(ChannelBlockFn&& channel, std::uint32_t cells,
                                        const std::vector<arma::cx_mat>& V, double sigma2) {
  if (V.size() != cells) throw std::invalid_argument("sum_rate_multicell: need one precoder per cell");
  const arma::uword K = V.front().n_cols;
  RateResult r;
  r.per_user.set_size(static_cast<arma::uword>(cells) * K);
  for (std::uint32_t m = 0; m < cells; ++m) {
    // received power at the users of cell m from every BS
    arma::mat G2(K, static_cast<arma::uword>(cells) * K);
    for (std::uint32_t i = 0; i < cells; ++i) {
      const arma::cx_mat& Him = channel(i, m);
      if (Him.n_rows != V[i].n_rows || Him.n_cols != K)
        throw std::invalid_argument("sum_rate_multicell: channel/precoder shape mismatch");
      G2.cols(i * K, (i + 1) * K - 1) = arma::square(arma::abs(Him.t() * V[i]));
    }
    for (arma::uword k = 0; k < K; ++k) {
      const double signal = G2(k, static_cast<arma::uword>(m) * K + k);
      const double interference = arma::accu(G2.row(k)) - signal;
      r.per_user(static_cast<arma::uword>(m) * K + k) =
          std::log2(1.0 + signal / (interference + sigma2));
    }
  }
  r.total = arma::accu(r.per_user);
  return r;
}

inline RateResult sum_rate_multicell(const std::vector<arma::cx_mat>& blocks, std::uint32_t cells,
                                     const std::vector<arma::cx_mat>& V, double sigma2) {
  // blocks laid out as block[i * cells + m] = channel from BS i to users of cell m
  return sum_rate_multicell_fn(
      [&](std::uint32_t i, std::uint32_t m) -> const arma::cx_mat& {
        return blocks[static_cast<std::size_t>(i) * cells + m];
      },
      cells, V, sigma2);
}

}  // namespace pgnn

#endif
