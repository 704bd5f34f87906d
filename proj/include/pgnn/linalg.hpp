#ifndef PGNN_LINALG_HPP
#define PGNN_LINALG_HPP

#include <armadillo>
#include <limits>
#include <stdexcept>
#include <vector>

#include "pgnn/errors.hpp"

namespace pgnn {

inline constexpr double pinv_condition_limit = 1e12;

namespace detail {

// condition estimate of the Hermitian Gram matrix via its eigenvalues
inline double gram_condition(const arma::cx_mat& gram) {
  arma::vec ev;
  if (!arma::eig_sym(ev, gram)) return std::numeric_limits<double>::infinity();
  const double lo = ev.min();
  const double hi = ev.max();
  if (lo <= 0.0) return std::numeric_limits<double>::infinity();
  return hi / lo;
}

}  // namespace detail

// Left pseudo-inverse H (H^H H)^{-1} for full column rank H with N >= K.
// Solved through the Cholesky factor of the K x K Gram matrix with one
// refinement pass; satisfies H^H * result = I_K to ~1e-12 Frobenius on
// well-conditioned inputs.
inline arma::cx_mat pinv_exact(const arma::cx_mat& H) {
  const arma::uword N = H.n_rows, K = H.n_cols;
  if (N < K) throw std::invalid_argument("pinv_exact: need N >= K (tall matrix)");
  const arma::cx_mat gram = H.t() * H;  // .t() is the conjugate transpose

  const double condition = detail::gram_condition(gram);
  if (!(condition < pinv_condition_limit))
    throw singular_matrix_error("pinv_exact: Gram matrix is ill-conditioned", condition);

  arma::cx_mat R;
  if (!arma::chol(R, gram))
    throw singular_matrix_error("pinv_exact: Cholesky factorization failed", condition);

  const arma::cx_mat eye = arma::cx_mat(arma::eye(K, K), arma::zeros(K, K));
  auto chol_solve = [&R](const arma::cx_mat& B) {
    arma::cx_mat Y = arma::solve(arma::trimatl(R.t()), B);
    return arma::cx_mat(arma::solve(arma::trimatu(R), Y));
  };
  arma::cx_mat X = chol_solve(eye);
  X += chol_solve(eye - gram * X);  // one refinement pass
  return H * X;
}

// One first-order expansion step of the pseudo-inverse recursion:
// D' = 2 D - D (H^H D).
inline arma::cx_mat taylor_pinv_step(const arma::cx_mat& D, const arma::cx_mat& H) {
  if (D.n_rows != H.n_rows || D.n_cols != H.n_cols)
    throw std::invalid_argument("taylor_pinv_step: shape mismatch between D and H");
  return 2.0 * D - D * (H.t() * D);
}

enum class TaylorInit {
  paper_raw,        // D0 = H; converges only locally, kept for fidelity
  spectral_scaled,  // D0 = H / sigma_max(H)^2; enters the contraction region
};

// sigma_max(H)^2 estimated by 20 power-iteration steps on H^H H
inline double spectral_norm_sq_estimate(const arma::cx_mat& H) {
  const arma::cx_mat gram = H.t() * H;
  arma::cx_vec v(H.n_cols, arma::fill::ones);
  v /= arma::norm(v);
  double lambda = 0.0;
  for (int it = 0; it < 20; ++it) {
    arma::cx_vec w = gram * v;
    const double nw = arma::norm(w);
    if (nw == 0.0) return 0.0;
    v = w / nw;
    lambda = nw;
  }
  return lambda;
}

struct TaylorPinvResult {
  arma::cx_mat approx;
  std::vector<double> error_trace;  // ||D^(l) - pinv_exact(H)||_F, length L+1
  std::vector<arma::cx_mat> iterates;  // D^(0) .. D^(L)
};

// Iterated first-order expansion of the pseudo-inverse. The recursion is
// stopped early (the iterate is frozen) once an update falls below the
// floating-point stagnation threshold; beyond that point further steps only
// stir round-off.
inline TaylorPinvResult taylor_pinv(const arma::cx_mat& H, std::size_t iterations,
                                    TaylorInit init = TaylorInit::spectral_scaled) {
  if (H.n_rows < H.n_cols) throw std::invalid_argument("taylor_pinv: need N >= K");
  const arma::cx_mat exact = pinv_exact(H);

  arma::cx_mat D = H;
  if (init == TaylorInit::spectral_scaled) {
    const double s2 = spectral_norm_sq_estimate(H);
    if (s2 <= 0.0) throw std::invalid_argument("taylor_pinv: zero matrix");
    D /= s2;
  }

  TaylorPinvResult result;
  result.error_trace.reserve(iterations + 1);
  result.iterates.reserve(iterations + 1);
  result.error_trace.push_back(arma::norm(D - exact, "fro"));
  result.iterates.push_back(D);
  bool stagnant = false;
  for (std::size_t l = 0; l < iterations; ++l) {
    if (!stagnant) {
      arma::cx_mat next = taylor_pinv_step(D, H);
      const double step = arma::norm(next - D, "fro");
      if (step <= 4.0 * std::numeric_limits<double>::epsilon() * arma::norm(D, "fro"))
        stagnant = true;
      else
        D = std::move(next);
    }
    result.error_trace.push_back(arma::norm(D - exact, "fro"));
    result.iterates.push_back(D);
  }
  result.approx = std::move(D);
  return result;
}

}  // namespace pgnn

#endif
