#ifndef PGNN_METRICS_HPP
#define PGNN_METRICS_HPP

#include <armadillo>
#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "pgnn/errors.hpp"
#include "pgnn/gnn.hpp"
#include "pgnn/parallel.hpp"
#include "pgnn/rates.hpp"
#include "pgnn/scenario.hpp"
#include "pgnn/wmmse.hpp"

namespace pgnn {

struct MetricsRecord {
  double se_ratio = 0.0;                 // percent
  std::optional<double> ee_ratio;        // percent, when an EE reference exists
  double csr = 100.0;                    // percent
  std::vector<double> per_user_rates;    // mean rates, bits/s/Hz
  std::uint64_t flops = 0;
  double wall_clock = 0.0;               // seconds
  std::string scenario;

  nlohmann::json to_json() const {
    nlohmann::json j{{"se_ratio", se_ratio},
                     {"csr", csr},
                     {"per_user_rates", per_user_rates},
                     {"flops", flops},
                     {"wall_clock", wall_clock},
                     {"scenario", scenario}};
    if (ee_ratio) j["ee_ratio"] = *ee_ratio;
    return j;
  }
};

inline void write_metrics_jsonl(const std::string& path, const std::vector<MetricsRecord>& records) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("metrics: cannot open for writing: " + path);
  for (const auto& r : records) os << r.to_json().dump() << "\n";
}

// 100 * mean(learned sum rate) / mean(oracle sum rate)
inline double se_ratio(const std::vector<double>& learned, const std::vector<double>& oracle) {
  if (learned.size() != oracle.size() || learned.empty())
    throw std::invalid_argument("se_ratio: sample sets must match and be non-empty");
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < learned.size(); ++i) {
    num += learned[i];
    den += oracle[i];
  }
  if (den == 0.0) throw degenerate_input_error("se_ratio: zero oracle sum rate");
  return 100.0 * num / den;
}

// sum rate divided by total consumed power rho * Tr(V^H V) + N * P_c + P_0
inline double ee(const arma::cx_mat& H, const arma::cx_mat& V, double rho, double p_c, double p_0,
                 double sigma2) {
  const double sr = sum_rate(H, V, sigma2).total;
  const double tx = std::real(arma::trace(V.t() * V));
  return sr / (rho * tx + static_cast<double>(V.n_rows) * p_c + p_0);
}

// percentage of user-sample pairs with R_k >= r_min
inline double constraint_satisfaction_ratio(const std::vector<arma::vec>& per_sample_rates,
                                            double r_min) {
  std::size_t satisfied = 0, total = 0;
  for (const arma::vec& rates : per_sample_rates) {
    total += rates.n_elem;
    satisfied += arma::accu(rates >= r_min);
  }
  if (total == 0) throw std::invalid_argument("csr: no user-sample pairs");
  return 100.0 * static_cast<double>(satisfied) / static_cast<double>(total);
}

// |h_k^H v_k| / (||h_k|| ||v_k||) per user; 1 exactly for MRT beams
inline arma::vec normalized_correlation(const arma::cx_mat& H, const arma::cx_mat& V) {
  if (H.n_rows != V.n_rows || H.n_cols != V.n_cols)
    throw std::invalid_argument("normalized_correlation: shape mismatch");
  arma::vec out(H.n_cols);
  for (arma::uword k = 0; k < H.n_cols; ++k) {
    const double nh = arma::norm(H.col(k));
    const double nv = arma::norm(V.col(k));
    if (nh == 0.0 || nv == 0.0)
      throw degenerate_input_error("normalized_correlation: zero column");
    out(k) = std::abs(arma::cdot(H.col(k), V.col(k))) / (nh * nv);
  }
  return out;
}

// plot-ready CDF support: the values sorted ascending
inline arma::vec cdf_points(arma::vec values) { return arma::sort(values); }

// Closed-form inference FLOP counts per forward pass.
// vanilla: sum over layers of 6 N K J_{l+1} J_l + 2 N K J_l
// model:   sum over layers of 2 N K^2 J_l + 12 N K J_{l+1} J_l
//          - 2 K J_{l+1} J_l + 4 N K J_l
inline std::uint64_t flop_count(ArchKind arch, std::uint64_t N, std::uint64_t K,
                                const std::vector<std::uint32_t>& widths) {
  if (widths.size() < 2) throw std::invalid_argument("flop_count: need at least two widths");
  std::int64_t total = 0;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const std::int64_t j = widths[l], j1 = widths[l + 1];
    const std::int64_t n = static_cast<std::int64_t>(N), k = static_cast<std::int64_t>(K);
    if (arch == ArchKind::vanilla)
      total += 6 * n * k * j1 * j + 2 * n * k * j;
    else
      total += 2 * n * k * k * j + 12 * n * k * j1 * j - 2 * k * j1 * j + 4 * n * k * j;
  }
  return static_cast<std::uint64_t>(total);
}

// ---------------------------------------------------------------------------
// evaluation drivers
// ---------------------------------------------------------------------------

// Per-sample oracle sum rates, parallel across samples.
inline std::vector<double> wmmse_oracle_rates(const std::vector<arma::cx_mat>& scaled_channels,
                                              const WmmseOptions& opts = {}) {
  std::vector<double> out(scaled_channels.size());
  parallel_for(scaled_channels.size(), [&](std::size_t s) {
    auto [V, trace] = wmmse_p1(scaled_channels[s], 1.0, 1.0, opts);
    out[s] = trace.empty() ? 0.0 : trace.back();
  });
  return out;
}

inline std::vector<double> forward_rates(const ParamPack& pack,
                                         const std::vector<arma::cx_mat>& scaled_channels) {
  std::vector<double> out(scaled_channels.size());
  parallel_for(scaled_channels.size(), [&](std::size_t s) {
    const PrecodingMatrix V = pack.arch.kind == ArchKind::vanilla
                                  ? vanilla_forward(scaled_channels[s], pack, 1.0)
                                  : model_forward(scaled_channels[s], pack, 1.0);
    out[s] = sum_rate(scaled_channels[s], V.entries, 1.0).total;
  });
  return out;
}

// SE ratio of a trained network across user counts, no retraining.
// Channels are drawn fresh per K at the given SNR.
inline std::vector<MetricsRecord> generalization_sweep(const ParamPack& pack, std::uint32_t antennas,
                                                       const std::vector<std::uint32_t>& user_counts,
                                                       std::size_t samples_per_k, double snr_db,
                                                       std::uint64_t seed,
                                                       const WmmseOptions& opts = {}) {
  std::vector<MetricsRecord> records;
  const double scale = std::sqrt(std::pow(10.0, snr_db / 10.0));
  for (std::size_t idx = 0; idx < user_counts.size(); ++idx) {
    const std::uint32_t K = user_counts[idx];
    ScenarioConfig cfg;
    cfg.antennas_per_bs = antennas;
    cfg.users_per_cell = K;
    cfg.seed = rng64::stream_seed(seed, K);  // keyed by K so rows are list-independent
    ChannelDataset ds = sample_channel(cfg, samples_per_k);
    std::vector<arma::cx_mat> scaled;
    scaled.reserve(ds.count);
    for (std::size_t s = 0; s < ds.count; ++s) scaled.push_back(ds.channel(s) * scale);

    const auto t0 = std::chrono::steady_clock::now();
    const std::vector<double> learned = forward_rates(pack, scaled);
    MetricsRecord rec;
    rec.wall_clock = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    rec.se_ratio = se_ratio(learned, wmmse_oracle_rates(scaled, opts));
    rec.flops = flop_count(pack.arch.kind, antennas, K, pack.arch.widths);
    rec.scenario = "N=" + std::to_string(antennas) + ",K=" + std::to_string(K) +
                   ",snr=" + std::to_string(snr_db);
    records.push_back(std::move(rec));
  }
  return records;
}

}  // namespace pgnn

#endif
