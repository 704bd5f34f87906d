// pgnn command-line workbench: dataset generation, GNN training, evaluation
// against the WMMSE reference, parameter sweeps and FLOP accounting.
//
// Exit codes: 0 success, 2 usage/config error, 3 numeric failure.

#include <CLI11.hpp>

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pgnn/checkpoint.hpp"
#include "pgnn/config.hpp"
#include "pgnn/dataset_io.hpp"
#include "pgnn/manifest.hpp"
#include "pgnn/metrics.hpp"
#include "pgnn/train.hpp"
#include "pgnn/wmmse.hpp"

namespace fs = std::filesystem;
using namespace pgnn;

namespace {

constexpr int exit_ok = 0;
constexpr int exit_usage = 2;
constexpr int exit_numeric = 3;

struct CliOptions {
  std::string config_path;
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed;
  std::string arch;
  std::string loss;
  std::string oracle = "wmmse";
  std::string checkpoint;
  std::string dataset;
};

ScenarioConfig scenario_from(const Config& cfg, std::optional<std::uint64_t> seed_override) {
  ScenarioConfig sc;
  sc.cells = static_cast<std::uint32_t>(cfg.get_int("scenario.cells", 1));
  sc.antennas_per_bs = static_cast<std::uint32_t>(cfg.get_int("scenario.antennas", 8));
  sc.users_per_cell = static_cast<std::uint32_t>(cfg.get_int("scenario.users", 4));
  sc.p_max = cfg.get_double("scenario.p_max", 1.0);
  sc.sigma2 = cfg.get_double("scenario.sigma2", 1.0);
  if (cfg.has("scenario.snr_db")) sc.snr_db = cfg.get_double("scenario.snr_db");
  sc.seed = static_cast<std::uint64_t>(cfg.get_int("scenario.seed", 0));
  if (seed_override) sc.seed = *seed_override;
  sc.apply_snr_convention();
  sc.validate();
  return sc;
}

// Table-style defaults per architecture/loss; config overrides widths or
// pooling when present.
GnnArch arch_from(const Config& cfg, const std::string& arch_name, const std::string& loss_name,
                  std::uint32_t cells) {
  GnnArch arch;
  if (arch_name == "vanilla") {
    arch = vanilla_arch();
  } else if (arch_name == "model") {
    arch = loss_name == "ee" ? model_ee_arch() : model_se_arch();
  } else if (arch_name == "model-multicell") {
    arch = model_multicell_arch(cells);
  } else {
    throw std::invalid_argument("unknown trainable arch '" + arch_name + "'");
  }
  if (cfg.has("arch.widths")) {
    std::vector<std::uint32_t> widths{2};
    for (std::int64_t w : cfg.get_int_list("arch.widths"))
      widths.push_back(static_cast<std::uint32_t>(w));
    widths.push_back(2);
    arch.widths = std::move(widths);
  }
  const std::string pooling = cfg.get_string("arch.pooling", "sum");
  if (pooling == "sum")
    arch.pooling = Pooling::sum;
  else if (pooling == "mean")
    arch.pooling = Pooling::mean;
  else if (pooling == "max")
    arch.pooling = Pooling::max;
  else
    throw std::invalid_argument("unknown pooling '" + pooling + "'");
  arch.omit_nonneighbor = cfg.get_int("arch.omit_nonneighbor", 1) != 0;
  if (loss_name == "ee" && arch.kind == ArchKind::model) arch.with_scale_adapter = true;
  arch.validate();
  return arch;
}

TrainConfig train_config_from(const Config& cfg, const std::string& loss_name,
                              std::uint64_t seed) {
  TrainConfig tc;
  tc.loss = loss_name == "ee" ? LossKind::ee_lagrangian : LossKind::negative_sum_rate;
  tc.learning_rate =
      cfg.get_double("train.learning_rate", tc.loss == LossKind::ee_lagrangian ? 0.001 : 0.01);
  tc.batch_size = static_cast<std::size_t>(cfg.get_int("train.batch_size", 100));
  tc.epochs = static_cast<std::size_t>(cfg.get_int("train.epochs", 100));
  tc.r_min = cfg.get_double("train.r_min", 0.0);
  tc.multiplier_step = cfg.get_double("train.multiplier_step", 0.1);
  tc.lambda_init = cfg.get_double("train.lambda_init", 1.0);
  tc.ee.rho = cfg.get_double("train.rho", 1.0 / 0.311);
  tc.ee.p_c = cfg.get_double("train.p_c", 17.6);
  tc.ee.p_0 = cfg.get_double("train.p_0", 43.3);
  tc.seed = seed;
  tc.val_samples = static_cast<std::size_t>(cfg.get_int("train.val_samples", 0));
  tc.validate();
  return tc;
}

RunManifest manifest_base(const std::string& command, const Config& cfg, std::uint64_t seed) {
  RunManifest m;
  m.command = command;
  m.seed = seed;
  m.config_snapshot = cfg.entries();
  m.started_at = RunManifest::timestamp();
  return m;
}

std::vector<arma::cx_mat> scaled_channels(const ChannelDataset& ds) {
  std::vector<arma::cx_mat> out;
  out.reserve(ds.count);
  const double scale = std::sqrt(ds.config.p_max / ds.config.sigma2);
  for (std::size_t s = 0; s < ds.count; ++s) out.push_back(ds.channel(s) * scale);
  return out;
}

std::uint64_t file_content_hash(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot hash missing file: " + path);
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  char buf[1 << 16];
  while (is) {
    is.read(buf, sizeof buf);
    for (std::streamsize i = 0; i < is.gcount(); ++i)
      h = (h ^ static_cast<unsigned char>(buf[i])) * 0x100000001b3ULL;
  }
  return h;
}

// ---------------------------------------------------------------------------

int cmd_gen(const CliOptions& opt) {
  const Config cfg = Config::parse_file(opt.config_path);
  const ScenarioConfig sc = scenario_from(cfg, opt.seed);
  const std::size_t samples = static_cast<std::size_t>(cfg.get_int("scenario.samples"));
  RunManifest manifest = manifest_base("gen", cfg, sc.seed);

  const ChannelDataset ds = sample_channel(sc, samples);
  fs::create_directories(opt.out_dir);
  const std::string dataset_path = (fs::path(opt.out_dir) / "dataset.bin").string();
  write_dataset(dataset_path, ds);

  manifest.artifacts["dataset"] = dataset_path;
  manifest.finished_at = RunManifest::timestamp();
  manifest.write((fs::path(opt.out_dir) / "manifest.txt").string());
  std::cout << "wrote " << ds.count << " samples (M=" << sc.cells << ", N=" << sc.antennas_per_bs
            << ", K=" << sc.users_per_cell << ") to " << dataset_path << "\n";
  return exit_ok;
}

int cmd_train(const CliOptions& opt) {
  const Config cfg = Config::parse_file(opt.config_path);
  const std::string arch_name = opt.arch.empty() ? cfg.get_string("arch.name", "model") : opt.arch;
  const std::string loss_name = opt.loss.empty() ? cfg.get_string("train.loss", "se") : opt.loss;
  if (loss_name != "se" && loss_name != "ee")
    throw std::invalid_argument("unknown loss '" + loss_name + "'");

  const ScenarioConfig sc = scenario_from(cfg, opt.seed);
  const GnnArch arch = arch_from(cfg, arch_name, loss_name, sc.cells);
  const TrainConfig tc = train_config_from(cfg, loss_name, sc.seed);
  RunManifest manifest = manifest_base("train", cfg, sc.seed);

  // dataset: an explicit file, or drawn on the fly from the scenario (the
  // variable-K generalization protocol has no fixed-K file format)
  const std::string user_dist = cfg.get_string("scenario.users_dist", "fixed");
  TrainResult result;
  if (arch.kind == ArchKind::model_multicell) {
    ChannelDataset ds =
        opt.dataset.empty()
            ? sample_channel(sc, static_cast<std::size_t>(cfg.get_int("scenario.samples", 1000)))
            : read_dataset(opt.dataset);
    result = train_se_multicell(ds, arch, tc);
  } else if (user_dist != "fixed") {
    UserCountDistribution dist;
    if (user_dist == "exponential")
      dist = UserCountDistribution::exponential(cfg.get_double("scenario.users_mean", 4.0));
    else if (user_dist == "uniform")
      dist = UserCountDistribution::uniform(
          static_cast<std::uint32_t>(cfg.get_int("scenario.users_lo", 2)),
          static_cast<std::uint32_t>(cfg.get_int("scenario.users_hi", 30)));
    else
      throw std::invalid_argument("unknown users_dist '" + user_dist + "'");
    const auto vark = sample_channel_variable_k(
        sc.antennas_per_bs, dist, static_cast<std::size_t>(cfg.get_int("scenario.samples", 1000)),
        sc.seed);
    std::vector<arma::cx_mat> ch;
    ch.reserve(vark.channels.size());
    for (const auto& H : vark.channels) ch.push_back(apply_snr_scaling(H, sc.p_max, sc.sigma2));
    result = tc.loss == LossKind::ee_lagrangian ? train_ee(ch, arch, tc) : train_se(ch, arch, tc);
  } else {
    ChannelDataset ds =
        opt.dataset.empty()
            ? sample_channel(sc, static_cast<std::size_t>(cfg.get_int("scenario.samples", 1000)))
            : read_dataset(opt.dataset);
    if (tc.loss == LossKind::ee_lagrangian) {
      result = train_ee(scaled_channels(ds), arch, tc);
    } else {
      result = train_se(ds, arch, tc);
    }
  }

  fs::create_directories(opt.out_dir);
  const std::string ckpt_path = (fs::path(opt.out_dir) / "checkpoint.bin").string();
  save_params(ckpt_path, result.params);

  const std::string history_path = (fs::path(opt.out_dir) / "history.csv").string();
  {
    std::ofstream os(history_path);
    os << "epoch,loss,val_metric,lambda,wall_clock\n";
    for (std::size_t e = 0; e < result.history.loss.size(); ++e) {
      os << e << "," << result.history.loss[e] << ",";
      if (e < result.history.val_metric.size()) os << result.history.val_metric[e];
      os << ",";
      if (e < result.history.lambda.size()) os << result.history.lambda[e];
      os << ",";
      if (e < result.history.wall_clock.size()) os << result.history.wall_clock[e];
      os << "\n";
    }
  }
  {
    std::ofstream os((fs::path(opt.out_dir) / "checkpoint.meta.txt").string());
    os << "epochs = " << result.history.loss.size() << "\n";
    os << "final_loss = " << (result.history.loss.empty() ? 0.0 : result.history.loss.back())
       << "\n";
    if (!result.history.lambda.empty()) os << "lambda = " << result.history.lambda.back() << "\n";
    os << "aborted = " << (result.history.aborted ? 1 : 0) << "\n";
  }

  manifest.artifacts["checkpoint"] = ckpt_path;
  manifest.artifacts["history"] = history_path;
  manifest.finished_at = RunManifest::timestamp();
  manifest.write((fs::path(opt.out_dir) / "manifest.txt").string());

  if (result.history.aborted) {
    std::cerr << "training aborted on a numeric error: " << result.history.abort_reason
              << " (last good checkpoint kept)\n";
    return exit_numeric;
  }
  std::cout << "trained " << arch_name << "/" << loss_name << " for "
            << result.history.loss.size() << " epochs; checkpoint at " << ckpt_path << "\n";
  return exit_ok;
}

PrecodingMatrix closed_form_precoder(const std::string& arch, const arma::cx_mat& H_scaled,
                                     double sigma2_unit) {
  if (arch == "mrt") return mrt(H_scaled, 1.0);
  if (arch == "zfbf") return zfbf(H_scaled, 1.0);
  if (arch == "rzf") return rzf(H_scaled, 1.0, sigma2_unit);
  if (arch == "tgnn") return tgnn_precoder(H_scaled, 40, 1.0);
  if (arch == "bnn-structured") {
    const arma::uword K = H_scaled.n_cols;
    const arma::vec uniform(K, arma::fill::value(1.0 / static_cast<double>(K)));
    return power_normalize(structured_precoder(H_scaled, uniform, uniform, sigma2_unit).entries,
                           1.0);
  }
  throw std::invalid_argument("unknown closed-form arch '" + arch + "'");
}

int cmd_eval(const CliOptions& opt) {
  const Config cfg = Config::parse_file(opt.config_path);
  const ScenarioConfig sc = scenario_from(cfg, opt.seed);
  RunManifest manifest = manifest_base("eval", cfg, sc.seed);

  ChannelDataset ds =
      opt.dataset.empty()
          ? sample_channel(sc, static_cast<std::size_t>(cfg.get_int("eval.samples", 100)))
          : read_dataset(opt.dataset);
  if (ds.config.cells != 1)
    throw std::invalid_argument("eval: multi-cell datasets are not supported by this command");
  const auto channels = scaled_channels(ds);

  const std::string arch_name = opt.arch.empty() ? cfg.get_string("eval.arch", "model") : opt.arch;
  const bool trainable = arch_name == "model" || arch_name == "vanilla";

  std::optional<ParamPack> pack;
  if (trainable) {
    if (opt.checkpoint.empty()) throw std::invalid_argument("eval: --checkpoint required");
    pack = load_params(opt.checkpoint);
  }

  fs::create_directories(opt.out_dir);
  const double r_min = cfg.get_double("eval.r_min", 0.0);
  const EeConstants ee_consts;

  // per-sample precoders and rates
  std::vector<arma::vec> per_user(ds.count);
  std::vector<double> learned(ds.count), ee_values(ds.count), ee_ref(ds.count);
  std::vector<arma::vec> correlations(ds.count);
  const auto t0 = std::chrono::steady_clock::now();
  const bool ee_mode = opt.loss == "ee";
  parallel_for(ds.count, [&](std::size_t s) {
    const arma::cx_mat& H = channels[s];
    const PrecodingMatrix V =
        trainable ? (pack->arch.kind == ArchKind::vanilla ? vanilla_forward(H, *pack, 1.0)
                     : ee_mode                            ? ee_forward(H, *pack, 1.0)
                                                          : model_forward(H, *pack, 1.0))
                  : closed_form_precoder(arch_name, H, 1.0);
    const RateResult r = sum_rate(H, V.entries, 1.0);
    per_user[s] = r.per_user;
    learned[s] = r.total;
    ee_values[s] = ee(H, V.entries, ee_consts.rho, ee_consts.p_c, ee_consts.p_0, 1.0);
    ee_ref[s] = ee(H, zfbf(H, 1.0).entries, ee_consts.rho, ee_consts.p_c, ee_consts.p_0, 1.0);
    correlations[s] = normalized_correlation(H, V.entries);
  });
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  // WMMSE reference, cached by dataset content
  std::vector<double> oracle(ds.count, 0.0);
  bool have_oracle = false;
  if (opt.oracle == "wmmse") {
    std::string cache_path;
    if (!opt.dataset.empty()) {
      cache_path = (fs::path(opt.out_dir) /
                    ("oracle-" + std::to_string(file_content_hash(opt.dataset)) + ".txt"))
                       .string();
    }
    if (!cache_path.empty() && fs::exists(cache_path)) {
      std::ifstream is(cache_path);
      for (auto& v : oracle) is >> v;
      have_oracle = static_cast<bool>(is);
    }
    if (!have_oracle) {
      oracle = wmmse_oracle_rates(channels);
      have_oracle = true;
      if (!cache_path.empty()) {
        std::ofstream os(cache_path);
        os.precision(17);
        for (double v : oracle) os << v << "\n";
        manifest.artifacts["oracle_cache"] = cache_path;
      }
    }
  }

  MetricsRecord rec;
  rec.se_ratio = have_oracle ? se_ratio(learned, oracle) : 0.0;
  rec.csr = constraint_satisfaction_ratio(per_user, r_min);
  double mean_ee = 0.0, mean_ee_ref = 0.0;
  arma::vec mean_rates(ds.count ? per_user[0].n_elem : 0, arma::fill::zeros);
  for (std::size_t s = 0; s < ds.count; ++s) {
    mean_ee += ee_values[s] / static_cast<double>(ds.count);
    mean_ee_ref += ee_ref[s] / static_cast<double>(ds.count);
    mean_rates += per_user[s] / static_cast<double>(ds.count);
  }
  if (mean_ee_ref > 0.0) rec.ee_ratio = 100.0 * mean_ee / mean_ee_ref;  // vs full-power ZFBF
  rec.per_user_rates = arma::conv_to<std::vector<double>>::from(mean_rates);
  if (trainable)
    rec.flops =
        flop_count(pack->arch.kind == ArchKind::vanilla ? ArchKind::vanilla : ArchKind::model,
                   sc.antennas_per_bs, sc.users_per_cell, pack->arch.widths);
  rec.wall_clock = wall;
  rec.scenario = "M=" + std::to_string(sc.cells) + ",N=" + std::to_string(sc.antennas_per_bs) +
                 ",K=" + std::to_string(sc.users_per_cell);

  const std::string metrics_path = (fs::path(opt.out_dir) / "metrics.jsonl").string();
  write_metrics_jsonl(metrics_path, {rec});

  // plot-ready CDF of normalized correlations
  {
    arma::vec all(ds.count * (ds.count ? correlations[0].n_elem : 0));
    arma::uword at = 0;
    for (const auto& c : correlations)
      for (double v : c) all(at++) = v;
    const arma::vec sorted = cdf_points(all);
    std::ofstream os((fs::path(opt.out_dir) / "correlation_cdf.txt").string());
    os.precision(10);
    for (double v : sorted) os << v << "\n";
  }

  manifest.artifacts["metrics"] = metrics_path;
  manifest.finished_at = RunManifest::timestamp();
  manifest.write((fs::path(opt.out_dir) / "manifest.txt").string());
  std::cout << rec.to_json().dump() << "\n";
  return exit_ok;
}

int cmd_sweep(const CliOptions& opt) {
  const Config cfg = Config::parse_file(opt.config_path);
  const std::string kind = cfg.get_string("sweep.kind");
  const std::size_t seeds = static_cast<std::size_t>(cfg.get_int("sweep.seeds", 5));
  const ScenarioConfig sc = scenario_from(cfg, opt.seed);
  const std::string arch_name = opt.arch.empty() ? cfg.get_string("arch.name", "model") : opt.arch;
  const std::string loss_name = opt.loss.empty() ? cfg.get_string("train.loss", "se") : opt.loss;
  RunManifest manifest = manifest_base("sweep", cfg, sc.seed);

  fs::create_directories(opt.out_dir);
  const std::string csv_path = (fs::path(opt.out_dir) / "sweep.csv").string();
  std::ofstream csv(csv_path);
  csv << "kind,value,seeds,se_ratio,flops\n";

  const std::size_t train_samples =
      static_cast<std::size_t>(cfg.get_int("scenario.samples", 1000));
  const std::size_t test_samples = static_cast<std::size_t>(cfg.get_int("eval.samples", 100));

  std::vector<double> grid;
  if (kind == "snr") {
    for (std::int64_t v : cfg.get_int_list("sweep.grid", {0, 10, 20})) grid.push_back(double(v));
  } else if (kind == "samples") {
    for (std::int64_t v : cfg.get_int_list("sweep.grid", {10, 100, 1000, 10000}))
      grid.push_back(double(v));
  } else if (kind == "users") {
    std::vector<std::int64_t> def;
    for (std::int64_t k = 2; k <= 30; k += 2) def.push_back(k);
    for (std::int64_t v : cfg.get_int_list("sweep.grid", def)) grid.push_back(double(v));
  } else {
    throw std::invalid_argument("unknown sweep kind '" + kind + "'");
  }

  for (double value : grid) {
    double acc = 0.0;
    std::uint64_t flops = 0;
    for (std::uint64_t seed = 0; seed < seeds; ++seed) {
      ScenarioConfig scenario = sc;
      if (kind == "snr") {
        scenario.snr_db = value;
        scenario.apply_snr_convention();
      }
      if (kind == "users") scenario.users_per_cell = static_cast<std::uint32_t>(value);
      const std::size_t samples =
          kind == "samples" ? static_cast<std::size_t>(value) : train_samples;

      ScenarioConfig train_sc = scenario;
      train_sc.seed = rng64::stream_seed(sc.seed + seed, 0x7121);
      const ChannelDataset ds = sample_channel(train_sc, samples);
      const GnnArch arch = arch_from(cfg, arch_name, loss_name, scenario.cells);
      const TrainConfig tc = train_config_from(cfg, loss_name, train_sc.seed);
      const TrainResult r = train_se(ds, arch, tc);

      ScenarioConfig test_sc = scenario;
      test_sc.seed = rng64::stream_seed(train_sc.seed, 0xE7A1);
      const ChannelDataset test = sample_channel(test_sc, test_samples);
      const auto channels = scaled_channels(test);
      acc += se_ratio(forward_rates(r.params, channels), wmmse_oracle_rates(channels));
      flops = flop_count(arch.kind == ArchKind::vanilla ? ArchKind::vanilla : ArchKind::model,
                         scenario.antennas_per_bs, scenario.users_per_cell, arch.widths);
    }
    csv << kind << "," << value << "," << seeds << "," << acc / double(seeds) << "," << flops
        << "\n";
    csv.flush();
  }

  manifest.artifacts["sweep"] = csv_path;
  manifest.finished_at = RunManifest::timestamp();
  manifest.write((fs::path(opt.out_dir) / "manifest.txt").string());
  std::cout << "sweep written to " << csv_path << "\n";
  return exit_ok;
}

int cmd_flops(const std::string& arch, std::int64_t N, std::int64_t K,
              const std::vector<std::int64_t>& hidden) {
  if (arch != "vanilla" && arch != "model")
    throw std::invalid_argument("flops: arch must be vanilla or model");
  std::vector<std::uint32_t> widths{2};
  for (std::int64_t w : hidden) widths.push_back(static_cast<std::uint32_t>(w));
  widths.push_back(2);
  const ArchKind kind = arch == "vanilla" ? ArchKind::vanilla : ArchKind::model;
  std::cout << flop_count(kind, static_cast<std::uint64_t>(N), static_cast<std::uint64_t>(K),
                          widths)
            << "\n";
  return exit_ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"precoding-GNN workbench"};
  app.require_subcommand(1);

  CliOptions opt;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", opt.config_path, "run configuration file")->required();
    sub->add_option("--out", opt.out_dir, "output directory");
    sub->add_option("--seed", opt.seed, "seed override");
  };

  auto* gen = app.add_subcommand("gen", "sample a channel dataset");
  add_common(gen);

  auto* train = app.add_subcommand("train", "train a precoding network");
  add_common(train);
  train->add_option("--arch", opt.arch, "vanilla | model | model-multicell");
  train->add_option("--loss", opt.loss, "se | ee");
  train->add_option("--dataset", opt.dataset, "existing dataset file (otherwise drawn on the fly)");

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint or closed-form baseline");
  add_common(eval);
  eval->add_option("--arch", opt.arch, "model | vanilla | tgnn | mrt | zfbf | rzf | bnn-structured");
  eval->add_option("--loss", opt.loss, "se | ee");
  eval->add_option("--oracle", opt.oracle, "wmmse | none");
  eval->add_option("--checkpoint", opt.checkpoint, "trained parameter file");
  eval->add_option("--dataset", opt.dataset, "dataset file to evaluate on");

  auto* sweep = app.add_subcommand("sweep", "seed-averaged grids over snr / users / samples");
  add_common(sweep);
  sweep->add_option("--arch", opt.arch, "vanilla | model");
  sweep->add_option("--loss", opt.loss, "se | ee");

  auto* flops = app.add_subcommand("flops", "closed-form FLOP count per forward pass");
  std::string flops_arch = "model";
  std::int64_t flops_n = 8, flops_k = 4;
  std::vector<std::int64_t> flops_widths{32, 32, 8};
  flops->add_option("--arch", flops_arch, "vanilla | model");
  flops->add_option("-N", flops_n, "antennas");
  flops->add_option("-K", flops_k, "users");
  flops->add_option("--widths", flops_widths, "hidden layer widths")->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? exit_ok : exit_usage;
  }

  try {
    if (gen->parsed()) return cmd_gen(opt);
    if (train->parsed()) return cmd_train(opt);
    if (eval->parsed()) return cmd_eval(opt);
    if (sweep->parsed()) return cmd_sweep(opt);
    if (flops->parsed()) return cmd_flops(flops_arch, flops_n, flops_k, flops_widths);
  } catch (const config_parse_error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return exit_usage;
  } catch (const numeric_error& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return exit_numeric;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return exit_usage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_usage;
  }
  return exit_usage;
}
