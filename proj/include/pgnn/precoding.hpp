#ifndef PGNN_PRECODING_HPP
#define PGNN_PRECODING_HPP

#include <armadillo>
#include <stdexcept>

#include "pgnn/errors.hpp"
#include "pgnn/linalg.hpp"

namespace pgnn {

// Precoding matrix V = [v_1 ... v_K] together with the power budget it was
// built against. Column k is the beam for user k; ||v_k||^2 is its power.
struct PrecodingMatrix {
  arma::cx_mat entries;
  double p_max = 1.0;

  double total_power() const { return std::real(arma::trace(entries.t() * entries)); }
  bool power_feasible(double tol = 1e-9) const { return total_power() <= p_max * (1.0 + tol); }
};

// Maximum-ratio transmission: beam directions equal the channel directions,
// equal per-user power p_max / K.
inline PrecodingMatrix mrt(const arma::cx_mat& H, double p_max) {
  const arma::uword K = H.n_cols;
  arma::cx_mat V(H.n_rows, K);
  const double per_user = std::sqrt(p_max / static_cast<double>(K));
  for (arma::uword k = 0; k < K; ++k) {
    const double nk = arma::norm(H.col(k));
    if (nk == 0.0) throw std::invalid_argument("mrt: zero channel column");
    V.col(k) = H.col(k) * (per_user / nk);
  }
  return {V, p_max};
}

// Zero-forcing directions from the channel pseudo-inverse, equal per-user power.
inline PrecodingMatrix zfbf(const arma::cx_mat& H, double p_max) {
  const arma::cx_mat P = pinv_exact(H);
  const arma::uword K = H.n_cols;
  arma::cx_mat V(H.n_rows, K);
  const double per_user = std::sqrt(p_max / static_cast<double>(K));
  for (arma::uword k = 0; k < K; ++k) V.col(k) = P.col(k) * (per_user / arma::norm(P.col(k)));
  return {V, p_max};
}

// Scales V_raw so that trace(V^H V) = p_max exactly; column directions are kept.
inline PrecodingMatrix power_normalize(const arma::cx_mat& V_raw, double p_max) {
  const double n = arma::norm(V_raw, "fro");
  if (n == 0.0) throw degenerate_input_error("power_normalize: zero matrix");
  return {V_raw * (std::sqrt(p_max) / n), p_max};
}

// Regularized zero-forcing H (H^H H + (K sigma2 / p_max) I)^{-1} followed by
// equal per-user power, like the other closed-form baselines. Interpolates
// ZFBF (sigma2 -> 0) and MRT (dominant loading).
inline PrecodingMatrix rzf(const arma::cx_mat& H, double p_max, double sigma2) {
  if (!(p_max > 0.0)) throw std::invalid_argument("rzf: p_max must be positive");
  const arma::uword K = H.n_cols;
  const double load = static_cast<double>(K) * sigma2 / p_max;
  const arma::cx_mat gram = H.t() * H + load * arma::cx_mat(arma::eye(K, K), arma::zeros(K, K));
  const arma::cx_mat V_raw = H * arma::cx_mat(arma::solve(
                                     gram, arma::cx_mat(arma::eye(K, K), arma::zeros(K, K)),
                                     arma::solve_opts::likely_sympd));
  arma::cx_mat V(H.n_rows, K);
  const double per_user = std::sqrt(p_max / static_cast<double>(K));
  for (arma::uword k = 0; k < K; ++k) {
    const double nk = arma::norm(V_raw.col(k));
    if (nk == 0.0) throw degenerate_input_error("rzf: zero column in regularized inverse");
    V.col(k) = V_raw.col(k) * (per_user / nk);
  }
  return {V, p_max};
}

// Optimal-structure evaluator V = H (Lambda H^H H + sigma2 I)^{-1} T^{1/2}
// with diagonal multipliers Lambda and powers T, both of trace p_max.
// This is a plain evaluator: the output is NOT projected onto the power
// budget and can exceed it away from the optimal multipliers.
inline PrecodingMatrix structured_precoder(const arma::cx_mat& H, const arma::vec& lambda_diag,
                                           const arma::vec& t_diag, double sigma2) {
  const arma::uword K = H.n_cols;
  if (lambda_diag.n_elem != K || t_diag.n_elem != K)
    throw std::invalid_argument("structured_precoder: multiplier lengths must equal K");
  if (lambda_diag.min() <= 0.0)
    throw std::invalid_argument("structured_precoder: Lambda entries must be positive");
  if (t_diag.min() < 0.0)
    throw std::invalid_argument("structured_precoder: T entries must be non-negative");
  const double p_max = arma::accu(lambda_diag);
  if (std::abs(arma::accu(t_diag) - p_max) > 1e-6)
    throw std::invalid_argument("structured_precoder: trace(Lambda) and trace(T) must both equal p_max");

  const arma::cx_mat gram = H.t() * H;
  arma::cx_mat A = arma::diagmat(arma::cx_vec(lambda_diag, arma::zeros(K))) * gram;
  A.diag() += sigma2;
  const arma::cx_mat inv = arma::solve(A, arma::cx_mat(arma::eye(K, K), arma::zeros(K, K)));
  const arma::cx_mat V = H * inv * arma::diagmat(arma::cx_vec(arma::sqrt(t_diag), arma::zeros(K)));
  return {V, p_max};
}

// Precoder realized by the converged iterative-expansion network: the
// pseudo-inverse approximation after L steps, columns at equal power.
inline PrecodingMatrix tgnn_precoder(const arma::cx_mat& H, std::size_t iterations, double p_max) {
  const arma::cx_mat D = taylor_pinv(H, iterations, TaylorInit::spectral_scaled).approx;
  const arma::uword K = H.n_cols;
  arma::cx_mat V(H.n_rows, K);
  const double per_user = std::sqrt(p_max / static_cast<double>(K));
  for (arma::uword k = 0; k < K; ++k) {
    const double nk = arma::norm(D.col(k));
    if (nk == 0.0) throw degenerate_input_error("tgnn_precoder: zero column in iterate");
    V.col(k) = D.col(k) * (per_user / nk);
  }
  return {V, p_max};
}

}  // namespace pgnn

#endif
