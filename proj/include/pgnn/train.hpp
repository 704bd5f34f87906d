#ifndef PGNN_TRAIN_HPP
#define PGNN_TRAIN_HPP

#include <armadillo>
#include <chrono>
#include <cmath>
#include <numeric>
#include <vector>

#include "pgnn/autodiff.hpp"
#include "pgnn/gnn.hpp"
#include "pgnn/parallel.hpp"
#include "pgnn/rates.hpp"
#include "pgnn/rng.hpp"
#include "pgnn/scenario.hpp"

namespace pgnn {

enum class LossKind { negative_sum_rate, ee_lagrangian };

struct EeConstants {
  double rho = 1.0 / 0.311;  // inverse power-amplifier efficiency
  double p_c = 17.6;         // circuit power per antenna, watts
  double p_0 = 43.3;         // static power per BS, watts
};

struct TrainConfig {
  double learning_rate = 0.01;  // 0.001 is the EE default
  std::size_t batch_size = 100;
  std::size_t epochs = 100;
  LossKind loss = LossKind::negative_sum_rate;
  double r_min = 0.0;           // per-user QoS floor, bits/s/Hz (EE)
  double multiplier_step = 0.1; // beta in the dual ascent
  double lambda_init = 1.0;
  EeConstants ee;
  std::uint64_t seed = 0;
  std::size_t val_samples = 0;  // tail samples held out for per-epoch SE ratio

  void validate() const {
    if (!(learning_rate > 0.0)) throw std::invalid_argument("train: learning rate must be > 0");
    if (batch_size < 1) throw std::invalid_argument("train: batch size must be >= 1");
    if (r_min < 0.0) throw std::invalid_argument("train: r_min must be >= 0");
  }
};

struct TrainHistory {
  std::vector<double> loss;          // per-epoch mean training loss
  std::vector<double> val_metric;    // SE ratio (or mean EE) on the held-out tail
  std::vector<double> lambda;        // dual multiplier (EE)
  std::vector<double> wall_clock;    // seconds per epoch
  bool aborted = false;
  std::string abort_reason;
};

struct TrainResult {
  ParamPack params;
  TrainHistory history;
};

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

struct AdamState {
  std::vector<arma::mat> m, v;
  std::uint64_t step = 0;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

  static AdamState like(const ParamPack& pack) {
    AdamState s;
    s.m.reserve(pack.mats.size());
    s.v.reserve(pack.mats.size());
    for (const arma::mat& p : pack.mats) {
      s.m.emplace_back(arma::size(p), arma::fill::zeros);
      s.v.emplace_back(arma::size(p), arma::fill::zeros);
    }
    return s;
  }
};

inline void adam_step(ParamPack& pack, const std::vector<arma::mat>& grads, AdamState& state,
                      double lr) {
  if (grads.size() != pack.mats.size())
    throw std::invalid_argument("adam_step: gradient count does not match parameters");
  state.step += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < pack.mats.size(); ++i) {
    if (arma::size(grads[i]) != arma::size(pack.mats[i]))
      throw std::invalid_argument("adam_step: gradient shape mismatch");
    state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * grads[i];
    state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * arma::square(grads[i]);
    pack.mats[i] -= lr * (state.m[i] / bc1) / (arma::sqrt(state.v[i] / bc2) + state.eps);
  }
}

// ---------------------------------------------------------------------------
// per-sample losses on the tape
// ---------------------------------------------------------------------------

namespace train_detail {

using ad::Tape;
using ad::Var;

// per-user rates (K x 1) of a flat (N*K) x 2 precoder under unit noise
inline Var rates_tape(Tape& t, const arma::cx_mat& H_scaled, Var v_flat, double sigma2) {
  const arma::uword N = H_scaled.n_rows, K = H_scaled.n_cols;
  Var Vr = t.reshape(t.extract_cols(v_flat, 0, 1), N, K);
  Var Vi = t.reshape(t.extract_cols(v_flat, 1, 1), N, K);
  Var Hr = t.constant(arma::real(H_scaled));
  Var Hi = t.constant(arma::imag(H_scaled));
  Var Gr = t.add(t.mm_tn(Hr, Vr), t.mm_tn(Hi, Vi));
  Var Gi = t.sub(t.mm_tn(Hr, Vi), t.mm_tn(Hi, Vr));
  Var G2 = t.add(t.mul(Gr, Gr), t.mul(Gi, Gi));  // G2(k, j) = |h_k^H v_j|^2
  Var ones = t.constant(arma::ones(K, 1));
  Var rx = t.mm(G2, ones);                                   // total received power per user
  Var signal = t.mm(t.mul(G2, t.constant(arma::eye(K, K))), ones);
  Var interference = t.sub(rx, signal);
  Var sinr = t.div(signal, t.add_const(interference, sigma2));
  return t.scale(t.log_op(t.add_const(sinr, 1.0)), 1.0 / std::numbers::ln2);
}

inline Var se_loss_single(Tape& t, const arma::cx_mat& H_scaled, const ParamPack& pack,
                          const std::vector<Var>& w) {
  Var raw = gnn_detail::raw_forward_single(t, H_scaled, pack.arch, w);
  Var v = gnn_detail::power_normalize_tape(t, raw, 1.0);
  return t.neg(t.sum_all(rates_tape(t, H_scaled, v, 1.0)));
}

struct EeLossParts {
  Var loss;
  Var hinge_mean;
  Var ee;
};

// EE objective with the dual-weighted QoS hinge. The adapter scale is applied
// to the raw output; the result is projected onto the power budget only when
// it exceeds it.
inline EeLossParts ee_loss_single(Tape& t, const arma::cx_mat& H_scaled, const ParamPack& pack,
                                  const std::vector<Var>& w, double lambda, double r_min,
                                  const EeConstants& ee, double p_max) {
  const arma::uword N = H_scaled.n_rows, K = H_scaled.n_cols;
  Var raw = gnn_detail::raw_forward_single(t, H_scaled, pack.arch, w);
  if (pack.arch.with_scale_adapter) {
    Var eta = gnn_detail::scale_adapter_tape(t, w, pack.arch.gnn_matrix_count(),
                                             static_cast<std::uint32_t>(K));
    raw = t.scalar_mul(raw, eta);
  }
  Var trace = t.sum_all(t.mul(raw, raw));
  if (t.scalar(trace) > p_max) {
    Var factor = t.sqrt_op(t.scale(t.recip(trace), p_max));
    raw = t.scalar_mul(raw, factor);
    trace = t.sum_all(t.mul(raw, raw));
  }
  Var rates = rates_tape(t, H_scaled, raw, 1.0);
  Var denom = t.add_const(t.scale(trace, ee.rho), static_cast<double>(N) * ee.p_c + ee.p_0);
  Var ee_value = t.div(t.sum_all(rates), denom);
  Var hinge = t.relu(t.add_const(t.neg(rates), r_min));
  Var hinge_mean = t.scale(t.sum_all(hinge), 1.0 / static_cast<double>(K));
  Var loss = t.add(t.neg(ee_value), t.scale(hinge_mean, lambda));
  return {loss, hinge_mean, ee_value};
}

inline Var se_loss_multicell(Tape& t, const std::vector<arma::cx_mat>& blocks_scaled,
                             arma::uword cells, const ParamPack& pack, const std::vector<Var>& w) {
  const arma::uword N = blocks_scaled.front().n_rows, K = blocks_scaled.front().n_cols;
  Var raw = gnn_detail::raw_forward_multicell(t, blocks_scaled, cells, pack.arch, w);
  Var re = t.reshape(t.extract_cols(raw, 0, 1), cells * N, cells * K);
  Var im = t.reshape(t.extract_cols(raw, 1, 1), cells * N, cells * K);

  std::vector<Var> Vr(cells), Vi(cells);
  for (arma::uword m = 0; m < cells; ++m) {
    Var vr = t.extract_cols(t.extract_rows(re, m * N, N), m * K, K);
    Var vi = t.extract_cols(t.extract_rows(im, m * N, N), m * K, K);
    Var norm = t.sqrt_op(t.add(t.sum_all(t.mul(vr, vr)), t.sum_all(t.mul(vi, vi))));
    if (t.scalar(norm) == 0.0)
      throw degenerate_input_error("multicell forward: zero raw output for one BS");
    Var f = t.recip(norm);  // unit budget per BS
    Vr[m] = t.scalar_mul(vr, f);
    Vi[m] = t.scalar_mul(vi, f);
  }

  Var total = t.constant(arma::zeros(1, 1));
  Var onesK = t.constant(arma::ones(K, 1));
  for (arma::uword m = 0; m < cells; ++m) {
    Var rx;
    Var signal;
    for (arma::uword i = 0; i < cells; ++i) {
      const arma::cx_mat& Him = blocks_scaled[i * cells + m];
      Var Hr = t.constant(arma::real(Him));
      Var Hi = t.constant(arma::imag(Him));
      Var Gr = t.add(t.mm_tn(Hr, Vr[i]), t.mm_tn(Hi, Vi[i]));
      Var Gi = t.sub(t.mm_tn(Hr, Vi[i]), t.mm_tn(Hi, Vr[i]));
      Var G2 = t.add(t.mul(Gr, Gr), t.mul(Gi, Gi));
      Var rxi = t.mm(G2, onesK);
      rx = rx.valid() ? t.add(rx, rxi) : rxi;
      if (i == m) signal = t.mm(t.mul(G2, t.constant(arma::eye(K, K))), onesK);
    }
    Var interference = t.sub(rx, signal);
    Var sinr = t.div(signal, t.add_const(interference, 1.0));
    Var rates = t.scale(t.log_op(t.add_const(sinr, 1.0)), 1.0 / std::numbers::ln2);
    total = t.add(total, t.sum_all(rates));
  }
  return t.neg(total);
}

}  // namespace train_detail

// Inference path of the EE-trained network: raw forward, adapter scale,
// projection onto the power budget only when it is exceeded.
inline PrecodingMatrix ee_forward(const arma::cx_mat& H_scaled, const ParamPack& pack,
                                  double p_max) {
  ad::Tape t(false);
  auto w = gnn_detail::bind_params(t, pack, false);
  ad::Var raw = gnn_detail::raw_forward_single(t, H_scaled, pack.arch, w);
  if (pack.arch.with_scale_adapter) {
    ad::Var eta = gnn_detail::scale_adapter_tape(t, w, pack.arch.gnn_matrix_count(),
                                                 static_cast<std::uint32_t>(H_scaled.n_cols));
    raw = t.scalar_mul(raw, eta);
  }
  arma::cx_mat V = gnn_detail::flat_to_complex(t.value(raw), H_scaled.n_rows, H_scaled.n_cols);
  const double trace = std::pow(arma::norm(V, "fro"), 2);
  if (trace > p_max) V *= std::sqrt(p_max / trace);
  return {std::move(V), p_max};
}

// ---------------------------------------------------------------------------
// batch gradients (deterministic ordered reduction over parallel samples)
// ---------------------------------------------------------------------------

struct LossSpec {
  LossKind kind = LossKind::negative_sum_rate;
  double p_max = 1.0;   // unit-budget convention after SNR scaling
  double sigma2 = 1.0;
  double r_min = 0.0;
  double lambda = 1.0;
  EeConstants ee;
};

struct BatchGradient {
  double loss = 0.0;
  double mean_hinge = 0.0;  // EE only
  std::vector<arma::mat> grads;
};

// Mean loss and gradients over a batch of (scaled) single-cell channels.
// One forward/backward per sample; parameter shapes are K-independent, so
// variable user counts batch exactly.
inline BatchGradient gradient(const ParamPack& pack, const std::vector<arma::cx_mat>& batch,
                              const LossSpec& spec) {
  if (batch.empty()) throw std::invalid_argument("gradient: empty batch");
  struct Slot {
    double loss = 0.0, hinge = 0.0;
    std::vector<arma::mat> grads;
  };
  std::vector<Slot> slots(batch.size());
  parallel_for(batch.size(), [&](std::size_t s) {
    try {
      ad::Tape t;
      auto w = gnn_detail::bind_params(t, pack, true);
      ad::Var loss;
      if (spec.kind == LossKind::negative_sum_rate) {
        loss = train_detail::se_loss_single(t, batch[s], pack, w);
      } else {
        auto parts = train_detail::ee_loss_single(t, batch[s], pack, w, spec.lambda, spec.r_min,
                                                  spec.ee, spec.p_max);
        loss = parts.loss;
        slots[s].hinge = t.scalar(parts.hinge_mean);
      }
      t.backward(loss);
      slots[s].loss = t.scalar(loss);
      slots[s].grads.reserve(w.size());
      for (ad::Var v : w)
        slots[s].grads.push_back(t.grad(v).is_empty()
                                     ? arma::mat(arma::size(t.value(v)), arma::fill::zeros)
                                     : t.grad(v));
    } catch (const numeric_error& e) {
      throw numeric_error(e.what(), static_cast<std::ptrdiff_t>(s));
    }
  });

  BatchGradient out;
  out.grads.resize(pack.mats.size());
  for (std::size_t i = 0; i < pack.mats.size(); ++i)
    out.grads[i] = arma::mat(arma::size(pack.mats[i]), arma::fill::zeros);
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (const Slot& s : slots) {  // fixed order keeps the reduction bit-stable
    out.loss += s.loss * inv;
    out.mean_hinge += s.hinge * inv;
    for (std::size_t i = 0; i < out.grads.size(); ++i) out.grads[i] += s.grads[i] * inv;
  }
  return out;
}

inline BatchGradient gradient_multicell(const ParamPack& pack,
                                        const std::vector<std::vector<arma::cx_mat>>& batch,
                                        arma::uword cells) {
  if (batch.empty()) throw std::invalid_argument("gradient: empty batch");
  std::vector<std::pair<double, std::vector<arma::mat>>> slots(batch.size());
  parallel_for(batch.size(), [&](std::size_t s) {
    try {
      ad::Tape t;
      auto w = gnn_detail::bind_params(t, pack, true);
      ad::Var loss = train_detail::se_loss_multicell(t, batch[s], cells, pack, w);
      t.backward(loss);
      slots[s].first = t.scalar(loss);
      for (ad::Var v : w)
        slots[s].second.push_back(t.grad(v).is_empty()
                                      ? arma::mat(arma::size(t.value(v)), arma::fill::zeros)
                                      : t.grad(v));
    } catch (const numeric_error& e) {
      throw numeric_error(e.what(), static_cast<std::ptrdiff_t>(s));
    }
  });
  BatchGradient out;
  out.grads.resize(pack.mats.size());
  for (std::size_t i = 0; i < pack.mats.size(); ++i)
    out.grads[i] = arma::mat(arma::size(pack.mats[i]), arma::fill::zeros);
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (const auto& s : slots) {
    out.loss += s.first * inv;
    for (std::size_t i = 0; i < out.grads.size(); ++i) out.grads[i] += s.second[i] * inv;
  }
  return out;
}

// ---------------------------------------------------------------------------
// training loops
// ---------------------------------------------------------------------------

namespace train_detail {

inline std::vector<std::size_t> shuffled_order(std::size_t n, rng64& g) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(g.next_int(0, static_cast<std::int64_t>(i) - 1));
    std::swap(order[i - 1], order[j]);
  }
  return order;
}

}  // namespace train_detail

// Unsupervised SE training on pre-scaled channels (unit-budget convention).
inline TrainResult train_se(const std::vector<arma::cx_mat>& scaled_channels, const GnnArch& arch,
                            const TrainConfig& config) {
  config.validate();
  if (scaled_channels.empty()) throw std::invalid_argument("train_se: empty dataset");
  ParamPack pack = init_params(arch, config.seed);
  AdamState adam = AdamState::like(pack);
  TrainHistory history;
  rng64 order_rng(rng64::stream_seed(config.seed, 0x5e5e5e5e));

  const std::size_t n_val = std::min(config.val_samples, scaled_channels.size() / 2);
  const std::size_t n_train = scaled_channels.size() - n_val;
  LossSpec spec;

  ParamPack last_good = pack;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    auto order = train_detail::shuffled_order(n_train, order_rng);
    double epoch_loss = 0.0;
    std::size_t seen = 0;
    try {
      for (std::size_t at = 0; at < n_train; at += config.batch_size) {
        const std::size_t take = std::min(config.batch_size, n_train - at);
        std::vector<arma::cx_mat> batch;
        batch.reserve(take);
        for (std::size_t b = 0; b < take; ++b) batch.push_back(scaled_channels[order[at + b]]);
        BatchGradient g = gradient(pack, batch, spec);
        adam_step(pack, g.grads, adam, config.learning_rate);
        epoch_loss += g.loss * static_cast<double>(take);
        seen += take;
      }
    } catch (const numeric_error& e) {
      history.aborted = true;
      history.abort_reason = e.what();
      return {std::move(last_good), std::move(history)};
    }
    last_good = pack;
    history.loss.push_back(epoch_loss / static_cast<double>(seen));
    if (n_val > 0) {
      double se = 0.0;
      for (std::size_t s = n_train; s < scaled_channels.size(); ++s)
        se += sum_rate(scaled_channels[s],
                       (arch.kind == ArchKind::vanilla ? vanilla_forward(scaled_channels[s], pack, 1.0)
                                                       : model_forward(scaled_channels[s], pack, 1.0))
                           .entries,
                       1.0)
                  .total;
      history.val_metric.push_back(se / static_cast<double>(n_val));
    }
    history.wall_clock.push_back(
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  }
  return {std::move(pack), std::move(history)};
}

// convenience overload: physical dataset, scaling applied internally
inline TrainResult train_se(const ChannelDataset& dataset, const GnnArch& arch,
                            const TrainConfig& config) {
  if (dataset.config.cells != 1) throw std::invalid_argument("train_se: single-cell dataset expected");
  std::vector<arma::cx_mat> scaled;
  scaled.reserve(dataset.count);
  for (std::size_t s = 0; s < dataset.count; ++s)
    scaled.push_back(apply_snr_scaling(dataset.channel(s), dataset.config.p_max, dataset.config.sigma2));
  return train_se(scaled, arch, config);
}

// EE training with the dual multiplier updated once per epoch.
inline TrainResult train_ee(const std::vector<arma::cx_mat>& scaled_channels, const GnnArch& arch,
                            const TrainConfig& config) {
  config.validate();
  if (scaled_channels.empty()) throw std::invalid_argument("train_ee: empty dataset");
  ParamPack pack = init_params(arch, config.seed);
  AdamState adam = AdamState::like(pack);
  TrainHistory history;
  rng64 order_rng(rng64::stream_seed(config.seed, 0x5e5e5e5e));

  LossSpec spec;
  spec.kind = LossKind::ee_lagrangian;
  spec.r_min = config.r_min;
  spec.lambda = config.lambda_init;
  spec.ee = config.ee;

  ParamPack last_good = pack;
  const std::size_t n = scaled_channels.size();
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    auto order = train_detail::shuffled_order(n, order_rng);
    double epoch_loss = 0.0, epoch_hinge = 0.0;
    std::size_t seen = 0;
    try {
      for (std::size_t at = 0; at < n; at += config.batch_size) {
        const std::size_t take = std::min(config.batch_size, n - at);
        std::vector<arma::cx_mat> batch;
        batch.reserve(take);
        for (std::size_t b = 0; b < take; ++b) batch.push_back(scaled_channels[order[at + b]]);
        BatchGradient g = gradient(pack, batch, spec);
        adam_step(pack, g.grads, adam, config.learning_rate);
        epoch_loss += g.loss * static_cast<double>(take);
        epoch_hinge += g.mean_hinge * static_cast<double>(take);
        seen += take;
      }
    } catch (const numeric_error& e) {
      history.aborted = true;
      history.abort_reason = e.what();
      return {std::move(last_good), std::move(history)};
    }
    last_good = pack;
    const double mean_violation = epoch_hinge / static_cast<double>(seen);
    spec.lambda = std::max(0.0, spec.lambda + config.multiplier_step * mean_violation);
    history.loss.push_back(epoch_loss / static_cast<double>(seen));
    history.lambda.push_back(spec.lambda);
    history.wall_clock.push_back(
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  }
  return {std::move(pack), std::move(history)};
}

inline TrainResult train_ee(const VariableKDataset& dataset, double p_max, double sigma2,
                            const GnnArch& arch, const TrainConfig& config) {
  std::vector<arma::cx_mat> scaled;
  scaled.reserve(dataset.channels.size());
  for (const auto& H : dataset.channels) scaled.push_back(apply_snr_scaling(H, p_max, sigma2));
  return train_ee(scaled, arch, config);
}

// Multi-cell SE training; blocks are scaled like the single-cell path and the
// loss uses per-BS unit budgets.
inline TrainResult train_se_multicell(const ChannelDataset& dataset, const GnnArch& arch,
                                      const TrainConfig& config) {
  config.validate();
  if (dataset.count == 0) throw std::invalid_argument("train_se_multicell: empty dataset");
  const arma::uword M = dataset.config.cells;
  const double scale = std::sqrt(dataset.config.p_max / dataset.config.sigma2);
  std::vector<std::vector<arma::cx_mat>> scaled(dataset.count);
  for (std::size_t s = 0; s < dataset.count; ++s) {
    scaled[s].reserve(M * M);
    for (arma::uword i = 0; i < M; ++i)
      for (arma::uword m = 0; m < M; ++m) scaled[s].push_back(dataset.block(s, i, m) * scale);
  }

  ParamPack pack = init_params(arch, config.seed);
  AdamState adam = AdamState::like(pack);
  TrainHistory history;
  rng64 order_rng(rng64::stream_seed(config.seed, 0x5e5e5e5e));
  ParamPack last_good = pack;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    auto order = train_detail::shuffled_order(dataset.count, order_rng);
    double epoch_loss = 0.0;
    std::size_t seen = 0;
    try {
      for (std::size_t at = 0; at < dataset.count; at += config.batch_size) {
        const std::size_t take = std::min(config.batch_size, dataset.count - at);
        std::vector<std::vector<arma::cx_mat>> batch;
        batch.reserve(take);
        for (std::size_t b = 0; b < take; ++b) batch.push_back(scaled[order[at + b]]);
        BatchGradient g = gradient_multicell(pack, batch, M);
        adam_step(pack, g.grads, adam, config.learning_rate);
        epoch_loss += g.loss * static_cast<double>(take);
        seen += take;
      }
    } catch (const numeric_error& e) {
      history.aborted = true;
      history.abort_reason = e.what();
      return {std::move(last_good), std::move(history)};
    }
    last_good = pack;
    history.loss.push_back(epoch_loss / static_cast<double>(seen));
    history.wall_clock.push_back(
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  }
  return {std::move(pack), std::move(history)};
}

}  // namespace pgnn

#endif
