#ifndef PGNN_WMMSE_HPP
#define PGNN_WMMSE_HPP

#include <armadillo>
#include <cstdint>
#include <vector>

#include "pgnn/errors.hpp"
#include "pgnn/precoding.hpp"
#include "pgnn/rates.hpp"

namespace pgnn {

struct WmmseOptions {
  int max_iterations = 200;
  double objective_tolerance = 1e-5;   // bits/s/Hz
  double bisection_tolerance = 1e-8;   // relative power
  std::uint64_t seed = 0;              // reserved for randomized starts

  void validate() const {
    if (max_iterations < 1) throw std::invalid_argument("wmmse: max_iterations must be >= 1");
    if (!(objective_tolerance > 0.0) || !(bisection_tolerance > 0.0))
      throw std::invalid_argument("wmmse: tolerances must be positive");
  }
};

struct WmmseResult {
  std::vector<arma::cx_mat> precoders;    // one per BS
  std::vector<double> objective_trace;    // sum rate after each full update
};

namespace detail {

// channels laid out as blocks[i * cells + m] = N x K from BS i to users of cell m
struct wmmse_workspace {
  std::uint32_t cells;
  const std::vector<arma::cx_mat>* blocks;
  double p_max, sigma2;
  arma::uword N, K;

  const arma::cx_mat& blk(std::uint32_t i, std::uint32_t m) const {
    return (*blocks)[static_cast<std::size_t>(i) * cells + m];
  }
};

// One full block-coordinate update: scalar MMSE receivers, MSE weights,
// then per-BS precoders with the power dual found by bisection.
inline void wmmse_update(const wmmse_workspace& ws, std::vector<arma::cx_mat>& V) {
  const std::uint32_t M = ws.cells;
  const arma::uword K = ws.K, N = ws.N;
  const arma::uword total_users = static_cast<arma::uword>(M) * K;

  // receive amplitudes g(u, b) = h_u(from BS i)^H v_b for every beam b = (j, i)
  arma::cx_mat g(total_users, total_users);
  for (std::uint32_t m = 0; m < M; ++m)
    for (std::uint32_t i = 0; i < M; ++i)
      g.submat(m * K, i * K, m * K + K - 1, i * K + K - 1) = ws.blk(i, m).t() * V[i];

  arma::cx_vec u(total_users);
  arma::vec w(total_users);
  for (arma::uword q = 0; q < total_users; ++q) {
    const double rx_power = arma::accu(arma::square(arma::abs(g.row(q)))) + ws.sigma2;
    u(q) = g(q, q) / rx_power;
    const double mse = 1.0 - std::real(std::conj(u(q)) * g(q, q));
    w(q) = 1.0 / mse;
  }

  // v_{k_m} = w u (B_m + mu_m I)^{-1} h_{k_m, m}; mu_m by bisection per BS
  for (std::uint32_t m = 0; m < M; ++m) {
    arma::cx_mat Hm(N, total_users);  // channels departing from BS m
    for (std::uint32_t i = 0; i < M; ++i) Hm.cols(i * K, (i + 1) * K - 1) = ws.blk(m, i);
    arma::cx_mat B(N, N, arma::fill::zeros);
    for (arma::uword q = 0; q < total_users; ++q)
      B += (w(q) * std::norm(u(q))) * (Hm.col(q) * Hm.col(q).t());

    arma::vec lam;
    arma::cx_mat U;
    if (!arma::eig_sym(lam, U, B))
      throw internal_consistency_error("wmmse: eigendecomposition of the beamformer matrix failed");
    lam.transform([](double x) { return x < 0.0 ? 0.0 : x; });

    const arma::cx_mat Hw = U.t() * ws.blk(m, m);  // rotated serving channels
    arma::cx_vec coef(K);
    for (arma::uword k = 0; k < K; ++k) coef(k) = w(m * K + k) * u(m * K + k);
    arma::vec cn(N, arma::fill::zeros);
    for (arma::uword n = 0; n < N; ++n)
      for (arma::uword k = 0; k < K; ++k) cn(n) += std::norm(coef(k)) * std::norm(Hw(n, k));

    if (arma::accu(cn) == 0.0) {
      V[m].zeros(N, K);
      continue;
    }
    auto power_at = [&](double mu) {
      double p = 0.0;
      for (arma::uword n = 0; n < N; ++n) {
        const double d = lam(n) + mu;
        if (cn(n) > 0.0) p += cn(n) / (d * d);
      }
      return p;
    };

    double mu = 0.0;
    const double p0 = (lam.min() > 0.0) ? power_at(0.0) : std::numeric_limits<double>::infinity();
    if (p0 > ws.p_max) {
      double lo = 0.0, hi = 1.0;
      while (power_at(hi) > ws.p_max) hi *= 2.0;
      for (int it = 0; it < 200 && (hi - lo) > 1e-16 * std::max(1.0, hi); ++it) {
        const double mid = 0.5 * (lo + hi);
        if (power_at(mid) > ws.p_max)
          lo = mid;
        else
          hi = mid;
      }
      mu = hi;  // feasible end of the bracket
    }

    for (arma::uword k = 0; k < K; ++k)
      V[m].col(k) = U * (Hw.col(k) % (coef(k) / arma::cx_vec(lam + mu, arma::zeros(N))));
  }
}

inline double wmmse_objective(const wmmse_workspace& ws, const std::vector<arma::cx_mat>& V) {
  return sum_rate_multicell_fn(
             [&](std::uint32_t i, std::uint32_t m) -> const arma::cx_mat& { return ws.blk(i, m); },
             ws.cells, V, ws.sigma2)
      .total;
}

inline arma::cx_mat safe_mrt(const arma::cx_mat& H, double p_max) {
  arma::cx_mat V(H.n_rows, H.n_cols, arma::fill::zeros);
  const double per_user = std::sqrt(p_max / static_cast<double>(H.n_cols));
  for (arma::uword k = 0; k < H.n_cols; ++k) {
    const double nk = arma::norm(H.col(k));
    if (nk > 0.0) V.col(k) = H.col(k) * (per_user / nk);
  }
  return V;
}

inline WmmseResult wmmse_solve(const wmmse_workspace& ws, std::vector<arma::cx_mat> V,
                               const WmmseOptions& opts) {
  WmmseResult result;
  result.objective_trace.reserve(16);
  double prev = wmmse_objective(ws, V);
  for (int it = 0; it < opts.max_iterations; ++it) {
    wmmse_update(ws, V);
    const double obj = wmmse_objective(ws, V);
    result.objective_trace.push_back(obj);
    if (std::abs(obj - prev) < opts.objective_tolerance) break;
    prev = obj;
  }
  for (std::size_t t = 1; t < result.objective_trace.size(); ++t)
    if (result.objective_trace[t] < result.objective_trace[t - 1] - 1e-9)
      throw internal_consistency_error("wmmse: objective trace decreased");
  result.precoders = std::move(V);
  return result;
}

}  // namespace detail

// Sum-rate maximization for the single-cell problem. Starts from the best of
// the closed-form precoders (MRT always; ZFBF/R-ZFBF when computable), so the
// monotone ascent dominates each of them on every instance.
inline std::pair<PrecodingMatrix, std::vector<double>> wmmse_p1(const arma::cx_mat& H, double p_max,
                                                                double sigma2,
                                                                const WmmseOptions& opts = {}) {
  opts.validate();
  if (H.n_rows < 1 || H.n_cols < 1) throw std::invalid_argument("wmmse_p1: empty channel");
  std::vector<arma::cx_mat> blocks{H};
  detail::wmmse_workspace ws{1, &blocks, p_max, sigma2, H.n_rows, H.n_cols};

  if (arma::norm(H, "fro") == 0.0)
    return {PrecodingMatrix{arma::cx_mat(H.n_rows, H.n_cols, arma::fill::zeros), p_max},
            std::vector<double>{0.0}};

  std::vector<arma::cx_mat> candidates{detail::safe_mrt(H, p_max)};
  if (H.n_rows >= H.n_cols) {
    try {
      candidates.push_back(zfbf(H, p_max).entries);
    } catch (const singular_matrix_error&) {
    } catch (const std::invalid_argument&) {
    }
  }
  try {
    candidates.push_back(rzf(H, p_max, sigma2).entries);
  } catch (const degenerate_input_error&) {
  }
  std::size_t best = 0;
  double best_obj = -1.0;
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    std::vector<arma::cx_mat> Vc{candidates[c]};
    const double obj = detail::wmmse_objective(ws, Vc);
    if (obj > best_obj) {
      best_obj = obj;
      best = c;
    }
  }

  auto result = detail::wmmse_solve(ws, {candidates[best]}, opts);
  return {PrecodingMatrix{std::move(result.precoders.front()), p_max},
          std::move(result.objective_trace)};
}

// Multi-cell coordinated beamforming with per-BS power budgets.
// blocks[i * cells + m] = N x K channel from BS i to the users of cell m.
inline std::pair<std::vector<PrecodingMatrix>, std::vector<double>> wmmse_p2(
    const std::vector<arma::cx_mat>& blocks, std::uint32_t cells, double p_max, double sigma2,
    const WmmseOptions& opts = {}) {
  if (cells < 1 || blocks.size() != static_cast<std::size_t>(cells) * cells)
    throw std::invalid_argument("wmmse_p2: blocks must hold cells^2 channel matrices");
  if (cells == 1) {
    auto [V, trace] = wmmse_p1(blocks.front(), p_max, sigma2, opts);
    std::vector<PrecodingMatrix> out;
    out.push_back(std::move(V));
    return {std::move(out), std::move(trace)};
  }
  const arma::uword N = blocks.front().n_rows, K = blocks.front().n_cols;
  detail::wmmse_workspace ws{cells, &blocks, p_max, sigma2, N, K};

  std::vector<arma::cx_mat> V(cells);
  for (std::uint32_t m = 0; m < cells; ++m) V[m] = detail::safe_mrt(ws.blk(m, m), p_max);

  auto result = detail::wmmse_solve(ws, std::move(V), opts);
  std::vector<PrecodingMatrix> out;
  out.reserve(cells);
  for (auto& Vm : result.precoders) out.push_back(PrecodingMatrix{std::move(Vm), p_max});
  return {std::move(out), std::move(result.objective_trace)};
}

// One full update from a given precoder set; used to probe stationarity.
inline std::vector<arma::cx_mat> wmmse_refine_once(const std::vector<arma::cx_mat>& blocks,
                                                   std::uint32_t cells, double p_max, double sigma2,
                                                   std::vector<arma::cx_mat> V) {
  detail::wmmse_workspace ws{cells, &blocks, p_max, sigma2, blocks.front().n_rows,
                             blocks.front().n_cols};
  detail::wmmse_update(ws, V);
  return V;
}

}  // namespace pgnn

#endif
