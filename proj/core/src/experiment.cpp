#include "hbf/experiment.hpp"

#include "hbf/checkpoint.hpp"
#include "hbf/container.hpp"
#include "hbf/encoding.hpp"
#include "hbf/linalg.hpp"
#include "hbf/metrics.hpp"
#include "hbf/rng.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <exception>
#include <limits>
#include <optional>
#include <ostream>
#include <thread>

#ifndef HBF_VERSION_STRING
#define HBF_VERSION_STRING "0.0.0"
#endif

namespace hbf {

namespace fs = std::filesystem;

std::string tool_version() { return HBF_VERSION_STRING; }

std::string csv_comment(std::uint64_t config_hash, int trials) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "# config_hash=%016" PRIx64 " tool=hbf %s trials=%d\n", config_hash,
                HBF_VERSION_STRING, trials);
  return buf;
}

void parallel_for(int count, int threads, const std::function<void(int)>& fn) {
  if (count <= 0) return;
  const int workers = std::max(1, std::min(threads, count));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(count));
  std::atomic<int> next{0};
  auto work = [&] {
    for (int i = next++; i < count; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[static_cast<std::size_t>(i)] = std::current_exception();
      }
    }
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

namespace {

std::string fmt_num(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

InputShape covnet_shape(const SystemDims& d) { return {d.n_t, d.n_t, 3}; }
InputShape channel_shape(const SystemDims& d) { return {d.n_r, d.n_t, 3}; }

void check_model(const NetworkParams& net, NetRole role, InputShape shape, int outputs,
                 const fs::path& path) {
  if (net.role != role || !(net.input == shape) || net.output_size() != outputs) {
    throw MissingModelError(path.string() + ": checkpoint does not match the configured dimensions");
  }
}

NetworkParams load_checked(const fs::path& path, NetRole role, InputShape shape, int outputs) {
  if (!fs::exists(path)) {
    throw MissingModelError("missing model checkpoint " + path.string() + " (run `hbf train` first)");
  }
  NetworkParams net;
  try {
    net = load_network(path);
  } catch (const FormatError& e) {
    throw MissingModelError(path.string() + ": unreadable checkpoint: " + e.what());
  }
  check_model(net, role, shape, outputs, path);
  return net;
}

}  // namespace

TrainedModels load_models(const fs::path& dir, const SystemDims& dims) {
  TrainedModels m;
  m.covnet = load_checked(dir / kCovNetFile, NetRole::kCovNet, covnet_shape(dims),
                          beamformer_label_size(dims.n_t, dims.n_rf, dims.n_s));
  m.channelnet = load_checked(dir / kChannelNetFile, NetRole::kChannelNet, channel_shape(dims),
                              channel_label_size(dims.n_r, dims.n_t));
  m.bfnet = load_checked(dir / kBfNetFile, NetRole::kBfNet, channel_shape(dims),
                         beamformer_label_size(dims.n_r, dims.n_rf, dims.n_s));
  return m;
}

std::string loss_csv(const std::vector<EpochLog>& log, std::uint64_t config_hash) {
  std::string out = csv_comment(config_hash, 1);
  out += "epoch,train_mse,val_mse,lr\n";
  for (const auto& e : log) {
    out += std::to_string(e.epoch) + "," + fmt_num(e.train_mse) + "," + fmt_num(e.val_mse) + "," +
           fmt_num(e.lr) + "\n";
  }
  return out;
}

namespace {

void write_text(const fs::path& path, const std::string& text) {
  write_file_atomic(path, std::vector<unsigned char>(text.begin(), text.end()));
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory: " + ec.message(), dir.string());
}

std::vector<EpochLog> read_loss_csv(const fs::path& path) {
  std::vector<EpochLog> log;
  if (!fs::exists(path)) return log;
  const auto raw = read_file(path);
  const std::string text(raw.begin(), raw.end());
  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::size_t end = std::min(text.find('\n', pos), text.size());
    const std::string line = text.substr(pos, end - pos);
    pos = end + 1;
    if (line.empty() || line[0] == '#' || line[0] == 'e') continue;
    EpochLog e;
    if (std::sscanf(line.c_str(), "%d,%lf,%lf,%lf", &e.epoch, &e.train_mse, &e.val_mse, &e.lr) == 4) {
      log.push_back(e);
    }
  }
  return log;
}

std::vector<NamedArray> dataset_arrays(const Dataset& d, const std::vector<SampleIndex>& index) {
  RMatrix idx(3, static_cast<Eigen::Index>(index.size()));
  for (std::size_t k = 0; k < index.size(); ++k) {
    idx(0, static_cast<Eigen::Index>(k)) = index[k].scenario;
    idx(1, static_cast<Eigen::Index>(k)) = index[k].realization;
    idx(2, static_cast<Eigen::Index>(k)) = index[k].snr;
  }
  RVector shape(3);
  shape << d.shape.rows, d.shape.cols, d.shape.channels;
  return {NamedArray::from_real("shape", shape), NamedArray::from_real("inputs", d.inputs),
          NamedArray::from_real("labels", d.labels), NamedArray::from_real("index", idx)};
}

}  // namespace

TrainReport train_models(const ExperimentConfig& cfg, std::ostream* log) {
  const fs::path model_dir = cfg.model_dir;
  const fs::path out_dir = cfg.output;
  ensure_dir(model_dir);
  ensure_dir(out_dir);

  if (log != nullptr) {
    *log << "generating datasets: N=" << cfg.dataset.scenarios << " G=" << cfg.dataset.realizations
         << " snr triples=" << cfg.dataset.snr.size() << "\n";
  }
  const GeneratedData data = generate_datasets(cfg.dataset);
  TrainReport report;
  report.samples = data.covnet.size();
  report.skipped_scenarios = data.skipped_scenarios;
  if (log != nullptr && data.skipped_scenarios > 0) {
    *log << "warning: skipped " << data.skipped_scenarios << " scenario(s) after solver failures\n";
  }
  if (report.samples == 0) {
    throw NumericalError("train: every scenario failed; no training data");
  }
  if (cfg.save_datasets) {
    save_container(dataset_arrays(data.covnet, data.index), out_dir / "dataset_covnet.bfd");
    save_container(dataset_arrays(data.channelnet, data.index), out_dir / "dataset_channelnet.bfd");
    save_container(dataset_arrays(data.bfnet, data.index), out_dir / "dataset_bfnet.bfd");
  }

  const SystemDims& d = cfg.dims;
  struct Job {
    NetRole role;
    const Dataset* data;
    const ArchitectureOptions* arch;
    const char* file;
    const char* loss_file;
    int outputs;
    NetworkParams* slot;
    std::vector<EpochLog>* log;
  };
  const Job jobs[] = {
      {NetRole::kCovNet, &data.covnet, &cfg.covnet_arch, kCovNetFile, "covnet_loss.csv",
       beamformer_label_size(d.n_t, d.n_rf, d.n_s), &report.models.covnet, &report.covnet_log},
      {NetRole::kChannelNet, &data.channelnet, &cfg.channelnet_arch, kChannelNetFile,
       "channelnet_loss.csv", channel_label_size(d.n_r, d.n_t), &report.models.channelnet,
       &report.channelnet_log},
      {NetRole::kBfNet, &data.bfnet, &cfg.bfnet_arch, kBfNetFile, "bfnet_loss.csv",
       beamformer_label_size(d.n_r, d.n_rf, d.n_s), &report.models.bfnet, &report.bfnet_log},
  };
  for (const Job& job : jobs) {
    const fs::path ckpt = model_dir / job.file;
    const auto role_id = static_cast<std::uint64_t>(job.role);
    if (fs::exists(ckpt)) {
      try {
        NetworkParams net = load_network(ckpt);
        check_model(net, job.role, job.data->shape, job.outputs, ckpt);
        *job.slot = std::move(net);
        *job.log = read_loss_csv(out_dir / job.loss_file);
        report.resumed.push_back(to_string(job.role));
        if (log != nullptr) *log << to_string(job.role) << ": reusing " << ckpt.string() << "\n";
        continue;
      } catch (const Error& e) {
        if (log != nullptr) *log << to_string(job.role) << ": retraining (" << e.what() << ")\n";
      }
    }
    const NetworkParams init = make_network(job.role, job.data->shape, job.outputs, *job.arch,
                                            derive_seed(cfg.seed, 10 + role_id));
    TrainConfig tc = cfg.train;
    tc.seed = derive_seed(cfg.train.seed, role_id);
    const std::string name = to_string(job.role);
    TrainResult result = train(init, *job.data, tc, [&](const EpochLog& e) {
      if (log != nullptr) {
        *log << name << " epoch " << e.epoch << " train_mse=" << fmt_num(e.train_mse)
             << " val_mse=" << fmt_num(e.val_mse) << " lr=" << fmt_num(e.lr) << "\n";
        log->flush();
      }
    });
    save_network(result.params, ckpt);
    write_text(out_dir / job.loss_file, loss_csv(result.log, cfg.hash));
    *job.slot = std::move(result.params);
    *job.log = std::move(result.log);
  }
  return report;
}

Summary summarize(const std::vector<double>& samples) {
  Summary s;
  double sum = 0.0;
  for (double v : samples) {
    if (std::isfinite(v)) {
      sum += v;
      ++s.count;
    }
  }
  if (s.count == 0) {
    s.mean = std::numeric_limits<double>::quiet_NaN();
    s.stderr_ = std::numeric_limits<double>::quiet_NaN();
    return s;
  }
  s.mean = sum / s.count;
  if (s.count > 1) {
    double ss = 0.0;
    for (double v : samples) {
      if (std::isfinite(v)) ss += (v - s.mean) * (v - s.mean);
    }
    s.stderr_ = std::sqrt(ss / (s.count - 1)) / std::sqrt(static_cast<double>(s.count));
  }
  return s;
}

namespace {

struct Link {
  CMatrix f;
  CMatrix w;
};

/// Quantities a trial hands to the method designers.
struct TrialInputs {
  CMatrix h;         // true channel, SE is evaluated on it
  CMatrix r;         // covariance known to the statistical designs
  CMatrix h_design;  // channel the receiver designs with
  CMatrix bfnet_in;  // channel fed to BFNet
  CMatrix covnet_in; // corrupted covariance fed to CovNet
  double rho = 1.0;
};

struct Context {
  const ExperimentConfig& cfg;
  const TrainedModels* models;
  std::vector<ScenarioRecord> scenarios;
  PilotConfig pilot;
  ArrayGeometry tx, rx;
};

Link design(Method m, const TrialInputs& in, const Context& ctx, std::uint64_t seed) {
  const SystemDims& d = ctx.cfg.dims;
  const DatasetSpec& spec = ctx.cfg.dataset;
  switch (m) {
    case Method::kMo: {
      AlternatingOptions po = spec.precoder_options;
      po.seed = derive_seed(seed, 1);
      const CMatrix r_inst = linalg::hermitian_part(in.h_design.adjoint() * in.h_design);
      const HybridBeamformer f = alternating_hybrid_precoder(r_inst, d.n_rf, d.n_s, in.rho, po).beamformer;
      CombinerOptions co = spec.combiner_options;
      co.seed = derive_seed(seed, 2);
      const HybridBeamformer w =
          alternating_hybrid_combiner(in.h_design, f.rf, f.bb, in.rho, 1.0, d.n_rf, co).beamformer;
      return {f.product(), w.product()};
    }
    case Method::kPeHb: {
      const CMatrix r_inst = linalg::hermitian_part(in.h_design.adjoint() * in.h_design);
      const HybridBeamformer f = phase_extraction_hybrid_precoder(r_inst, d.n_rf, d.n_s, in.rho);
      const HybridBeamformer w =
          phase_extraction_hybrid_combiner(in.h_design, f.rf, f.bb, in.rho, 1.0, d.n_rf);
      return {f.product(), w.product()};
    }
    case Method::kShb: {
      const HybridBeamformer f = phase_extraction_hybrid_precoder(in.r, d.n_rf, d.n_s, in.rho);
      const HybridBeamformer w =
          phase_extraction_hybrid_combiner(in.h_design, f.rf, f.bb, in.rho, 1.0, d.n_rf);
      return {f.product(), w.product()};
    }
    case Method::kSdhb: {
      const RVector zf = Network(ctx.models->covnet).infer(build_input(in.covnet_in, ThirdChannel::kPhase));
      const RVector zw = Network(ctx.models->bfnet).infer(build_input(in.bfnet_in, ThirdChannel::kMagnitude));
      const HybridBeamformer f =
          reconstruct_beamformer_pair(zf, d.n_t, d.n_rf, d.n_s, BeamformerRole::kPrecoder);
      const HybridBeamformer w =
          reconstruct_beamformer_pair(zw, d.n_r, d.n_rf, d.n_s, BeamformerRole::kCombiner);
      return {f.product(), w.product()};
    }
    case Method::kFullyDigital:
    case Method::kFullyDigitalStat:
      break;
  }
  throw std::logic_error("design: fully-digital methods are evaluated directly");
}

double evaluate(Method m, const TrialInputs& in, const Context& ctx, std::uint64_t seed) {
  const SystemDims& d = ctx.cfg.dims;
  if (m == Method::kFullyDigital) {
    return fully_digital_benchmark(in.h, in.r, d.n_s, in.rho, 1.0, BenchmarkMode::kInstantaneous);
  }
  if (m == Method::kFullyDigitalStat) {
    return fully_digital_benchmark(in.h, in.r, d.n_s, in.rho, 1.0, BenchmarkMode::kStatistical);
  }
  const Link link = design(m, in, ctx, seed);
  return spectral_efficiency(in.h, link.f, link.w, in.rho, 1.0);
}

bool needs_models(const ExperimentConfig& cfg) {
  switch (cfg.kind) {
    case ExperimentKind::kSeVsPilotSnr:
    case ExperimentKind::kNmseVsPilotSnr:
    case ExperimentKind::kAngleMismatch:
    case ExperimentKind::kOnlineTrace:
      return true;
    default:
      return std::find(cfg.methods.begin(), cfg.methods.end(), Method::kSdhb) != cfg.methods.end();
  }
}

Context make_context(const ExperimentConfig& cfg, const TrainedModels* models) {
  Context ctx{cfg, models, {}, pilot_for(cfg.dims, cfg.dataset.pilot_tx_beams, cfg.dataset.pilot_rx_beams),
              ArrayGeometry{cfg.dims.n_t, cfg.scenario.spacing_ratio},
              ArrayGeometry{cfg.dims.n_r, cfg.scenario.spacing_ratio}};
  if (cfg.kind != ExperimentKind::kClusterSweep) {
    // Test channels are the training scenarios' channels under fresh noise.
    ctx.scenarios.resize(static_cast<std::size_t>(cfg.dataset.scenarios));
    parallel_for(cfg.dataset.scenarios, cfg.threads, [&](int n) {
      ctx.scenarios[static_cast<std::size_t>(n)] = scenario_statistics(cfg.dataset, n);
    });
  }
  return ctx;
}

ChannelRealization perturb_rays(const ChannelRealization& base, double sigma, Stream& rng,
                                const ArrayGeometry& tx, const ArrayGeometry& rx) {
  ChannelRealization out = base;
  for (Ray& ray : out.rays) {
    ray.aoa += sigma * rng.normal();
    ray.aod += sigma * rng.normal();
  }
  out.h = assemble_channel(out.rays, out.gamma, tx, rx);
  return out;
}

ScenarioParams perturb_clusters(const ScenarioParams& base, double sigma, Stream& rng) {
  ScenarioParams out = base;
  for (Cluster& c : out.clusters) {
    c.mean_aoa += sigma * rng.normal();
    c.mean_aod += sigma * rng.normal();
  }
  return out;
}

std::string variable_name(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::kSeVsSnr:
      return "snr_db";
    case ExperimentKind::kSeVsPilotSnr:
    case ExperimentKind::kNmseVsPilotSnr:
      return "pilot_snr_db";
    case ExperimentKind::kAngleMismatch:
      return "mismatch_std_deg";
    case ExperimentKind::kClusterSweep:
      return "clusters";
    default:
      return "value";
  }
}

}  // namespace

SweepTable run_sweep(const ExperimentConfig& cfg, const TrainedModels* models) {
  const bool nmse_kind = cfg.kind == ExperimentKind::kNmseVsPilotSnr;
  switch (cfg.kind) {
    case ExperimentKind::kSeVsSnr:
    case ExperimentKind::kSeVsPilotSnr:
    case ExperimentKind::kNmseVsPilotSnr:
    case ExperimentKind::kAngleMismatch:
    case ExperimentKind::kClusterSweep:
      break;
    default:
      throw std::invalid_argument("run_sweep: " + to_string(cfg.kind) + " is not a sweep experiment");
  }
  if (needs_models(cfg) && models == nullptr) {
    throw MissingModelError("run_sweep: " + to_string(cfg.kind) + " needs trained models");
  }
  const Context ctx = make_context(cfg, models);

  SweepTable table;
  table.variable = variable_name(cfg.kind);
  table.values = cfg.grid;
  table.trials = cfg.trials;
  if (nmse_kind) {
    table.series = {"ICE", "ChannelNet", "OMP"};
  } else {
    for (Method m : cfg.methods) table.series.push_back(to_string(m));
  }
  const std::size_t n_series = table.series.size();
  const auto trials = static_cast<std::size_t>(cfg.trials);
  std::atomic<int> failures{0};

  for (std::size_t vi = 0; vi < cfg.grid.size(); ++vi) {
    const double value = cfg.grid[vi];
    // samples[series][trial]
    std::vector<std::vector<double>> samples(n_series, std::vector<double>(trials));
    const std::uint64_t point_seed = derive_seed(derive_seed(cfg.seed, 100), vi);
    parallel_for(cfg.trials, cfg.threads, [&](int t) {
      const std::uint64_t seed = derive_seed(point_seed, static_cast<std::uint64_t>(t));
      Stream rng(derive_seed(seed, 0));
      ChannelRealization chan;
      CMatrix r;
      if (cfg.kind == ExperimentKind::kClusterSweep) {
        const int clusters = static_cast<int>(value);
        const ScenarioParams sp = random_scenario(clusters, cfg.scenario.rays_per_cluster,
                                                  deg_to_rad(cfg.scenario.spread_deg), rng,
                                                  cfg.scenario.gain_variance);
        chan = generate_channel(sp, ctx.tx, ctx.rx, derive_seed(seed, 1));
        r = covariance_monte_carlo(sp, ctx.tx, cfg.dims.n_r, cfg.scenario.covariance_realizations,
                                   derive_seed(seed, 2))
                .r;
      } else {
        const ScenarioRecord& rec = ctx.scenarios[static_cast<std::size_t>(t) % ctx.scenarios.size()];
        chan = rec.channel;
        r = rec.covariance;
        if (cfg.kind == ExperimentKind::kAngleMismatch && value > 0.0) {
          const double sigma = deg_to_rad(value);
          chan = perturb_rays(rec.channel, sigma, rng, ctx.tx, ctx.rx);
          r = covariance_monte_carlo(perturb_clusters(rec.params, sigma, rng), ctx.tx, cfg.dims.n_r,
                                     cfg.scenario.covariance_realizations, derive_seed(seed, 2))
                  .r;
        }
      }

      const double pilot_snr = (cfg.kind == ExperimentKind::kSeVsPilotSnr || nmse_kind) ? value
                                                                                        : cfg.pilot_snr_db;
      const bool estimated = cfg.kind == ExperimentKind::kSeVsPilotSnr ||
                             cfg.kind == ExperimentKind::kAngleMismatch || nmse_kind;
      CMatrix ybar, ice, est;
      if (estimated) {
        ybar = simulate_preamble(chan.h, ctx.pilot, pilot_snr, derive_seed(seed, 3));
        ice = initial_channel_estimate(ybar, ctx.pilot).y;
        est = channelnet_estimate(models->channelnet, ice);
      }

      if (nmse_kind) {
        OmpOptions omp = cfg.online.omp;
        const CMatrix h_omp = reference_estimator_omp(ybar, ctx.pilot, omp).h;
        samples[0][static_cast<std::size_t>(t)] = nmse(ice, chan.h);
        samples[1][static_cast<std::size_t>(t)] = nmse(est, chan.h);
        samples[2][static_cast<std::size_t>(t)] = nmse(h_omp, chan.h);
        return;
      }

      TrialInputs in;
      in.h = chan.h;
      in.r = r;
      in.rho = snr_db_to_rho(cfg.kind == ExperimentKind::kSeVsSnr ? value : cfg.snr_db);
      in.h_design = estimated ? est : chan.h;
      in.bfnet_in = estimated ? est : corrupt_matrix(chan.h, cfg.channel_snr_db, derive_seed(seed, 4));
      in.covnet_in = corrupt_matrix(r, cfg.covariance_snr_db, derive_seed(seed, 5));
      for (std::size_t k = 0; k < n_series; ++k) {
        double se = std::numeric_limits<double>::quiet_NaN();
        try {
          se = evaluate(cfg.methods[k], in, ctx, derive_seed(seed, 10 + k));
        } catch (const Error&) {
          ++failures;
        }
        samples[k][static_cast<std::size_t>(t)] = se;
      }
    });
    std::vector<Summary> row;
    for (const auto& s : samples) row.push_back(summarize(s));
    table.cells.push_back(std::move(row));
  }
  table.failures = failures.load();
  return table;
}

std::string sweep_csv(const SweepTable& table, std::uint64_t config_hash) {
  std::string out = csv_comment(config_hash, table.trials);
  out += table.variable;
  for (const auto& s : table.series) out += "," + s + "_mean";
  for (const auto& s : table.series) out += "," + s + "_stderr";
  out += "\n";
  for (std::size_t i = 0; i < table.values.size(); ++i) {
    out += fmt_num(table.values[i]);
    for (const auto& c : table.cells[i]) out += "," + fmt_num(c.mean);
    for (const auto& c : table.cells[i]) out += "," + fmt_num(c.stderr_);
    out += "\n";
  }
  return out;
}

std::vector<TimingRow> run_timing(const ExperimentConfig& cfg, const TrainedModels* models) {
  if (needs_models(cfg) && models == nullptr) {
    throw MissingModelError("timing: SDHB needs trained models");
  }
  ExperimentConfig one = cfg;
  one.dataset.scenarios = 1;
  const Context ctx = make_context(one, models);
  const ScenarioRecord& rec = ctx.scenarios.front();
  TrialInputs in;
  in.h = rec.channel.h;
  in.r = rec.covariance;
  in.h_design = in.h;
  in.bfnet_in = corrupt_matrix(in.h, cfg.channel_snr_db, derive_seed(cfg.seed, 41));
  in.covnet_in = corrupt_matrix(in.r, cfg.covariance_snr_db, derive_seed(cfg.seed, 42));
  in.rho = snr_db_to_rho(cfg.snr_db);
  const int runs = std::max(cfg.trials, 20);
  const SystemDims& d = cfg.dims;

  std::vector<TimingRow> rows;
  volatile double sink = 0.0;
  for (Method m : cfg.methods) {
    std::vector<double> times;
    for (int k = 0; k < runs; ++k) {
      const auto t0 = std::chrono::steady_clock::now();
      if (m == Method::kFullyDigital || m == Method::kFullyDigitalStat) {
        const BenchmarkMode mode =
            m == Method::kFullyDigital ? BenchmarkMode::kInstantaneous : BenchmarkMode::kStatistical;
        const CMatrix f = fully_digital_precoder(in.h, in.r, d.n_s, in.rho, 1.0, mode);
        const CMatrix w = mmse_combiner(in.h, CMatrix::Identity(d.n_t, d.n_t), f, in.rho, 1.0);
        sink = sink + std::abs(w(0, 0));
      } else {
        // Same seed every run: identical inputs and identical work.
        const Link link = design(m, in, ctx, derive_seed(cfg.seed, 43));
        sink = sink + std::abs(link.w(0, 0));
      }
      const auto t1 = std::chrono::steady_clock::now();
      times.push_back(std::chrono::duration<double>(t1 - t0).count());
    }
    std::sort(times.begin(), times.end());
    const std::size_t mid = times.size() / 2;
    const double median = times.size() % 2 == 1 ? times[mid] : 0.5 * (times[mid - 1] + times[mid]);
    rows.push_back(TimingRow{to_string(m), median, runs, std::numeric_limits<double>::quiet_NaN()});
  }
  const auto mo = std::find_if(rows.begin(), rows.end(), [](const TimingRow& r) { return r.method == "MO"; });
  if (mo != rows.end()) {
    for (auto& r : rows) r.ratio_mo = mo->median_s / r.median_s;
  }
  return rows;
}

std::string timing_csv(const std::vector<TimingRow>& rows, std::uint64_t config_hash) {
  std::string out = csv_comment(config_hash, rows.empty() ? 0 : rows.front().runs);
  out += "method,median_s,runs,ratio_mo_over_method\n";
  for (const auto& r : rows) {
    out += r.method + "," + fmt_num(r.median_s) + "," + std::to_string(r.runs) + "," +
           fmt_num(r.ratio_mo) + "\n";
  }
  return out;
}

OnlineTrace run_online_trace(const ExperimentConfig& cfg, const NetworkParams& channelnet) {
  const OnlineExperiment& oe = cfg.online;
  ExperimentConfig scen = cfg;
  scen.kind = ExperimentKind::kOnlineTrace;
  scen.dataset.scenarios = std::min(cfg.dataset.scenarios, oe.seeds);
  const Context ctx = make_context(scen, nullptr);
  const auto steps = static_cast<std::size_t>(oe.steps);
  const auto seeds = static_cast<std::size_t>(oe.seeds);

  struct Sample {
    double eta = 0.0, updated = 0.0, nmse_dl = 0.0, nmse_ref = 0.0, nmse_frozen = 0.0;
  };
  std::vector<std::vector<Sample>> grid(seeds, std::vector<Sample>(steps));
  std::vector<int> updates(seeds, 0), ref_failures(seeds, 0);

  parallel_for(oe.seeds, cfg.threads, [&](int s) {
    const std::uint64_t seed = derive_seed(derive_seed(cfg.seed, 200), static_cast<std::uint64_t>(s));
    const ScenarioRecord& rec = ctx.scenarios[static_cast<std::size_t>(s) % ctx.scenarios.size()];
    const OmpReferenceEstimator reference(ctx.pilot, oe.omp);
    OnlineDeployer deployer(channelnet, reference, oe.online, cfg.dims.n_r, cfg.dims.n_t);
    for (std::size_t t = 0; t < steps; ++t) {
      const double drift = oe.drift_start_deg + (oe.drift_end_deg - oe.drift_start_deg) *
                                                    static_cast<double>(t) / static_cast<double>(steps - 1);
      const ChannelRealization chan =
          shift_angles(rec.channel, deg_to_rad(drift), deg_to_rad(drift), ctx.tx, ctx.rx);
      const std::uint64_t step_seed = derive_seed(seed, t);
      PilotObservation obs;
      obs.ybar = simulate_preamble(chan.h, ctx.pilot, oe.pilot_snr_db, derive_seed(step_seed, 0));
      obs.ice = initial_channel_estimate(obs.ybar, ctx.pilot).y;
      const OnlineStepResult res = deployer.step(obs, derive_seed(step_seed, 1));
      const ReferenceEstimate ref = reference.estimate(obs);
      Sample& out = grid[static_cast<std::size_t>(s)][t];
      out.eta = res.eta;
      out.updated = res.updated ? 1.0 : 0.0;
      out.nmse_dl = nmse(res.estimate, chan.h);
      out.nmse_ref = ref.ok ? nmse(ref.h, chan.h) : std::numeric_limits<double>::quiet_NaN();
      out.nmse_frozen = nmse(channelnet_estimate(channelnet, obs.ice), chan.h);
      if (res.reference_failed) ++ref_failures[static_cast<std::size_t>(s)];
    }
    updates[static_cast<std::size_t>(s)] = deployer.updates();
  });

  OnlineTrace trace;
  for (std::size_t t = 0; t < steps; ++t) {
    OnlineTraceRow row;
    row.t = static_cast<int>(t);
    row.drift_deg = oe.drift_start_deg + (oe.drift_end_deg - oe.drift_start_deg) *
                                             static_cast<double>(t) / static_cast<double>(steps - 1);
    std::vector<double> eta, upd, dl, ref, frozen;
    for (std::size_t s = 0; s < seeds; ++s) {
      eta.push_back(grid[s][t].eta);
      upd.push_back(grid[s][t].updated);
      dl.push_back(grid[s][t].nmse_dl);
      ref.push_back(grid[s][t].nmse_ref);
      frozen.push_back(grid[s][t].nmse_frozen);
    }
    row.eta = summarize(eta).mean;
    row.updated = summarize(upd).mean;
    row.nmse_dl = summarize(dl).mean;
    row.nmse_ref = summarize(ref).mean;
    row.nmse_frozen = summarize(frozen).mean;
    trace.rows.push_back(row);
  }
  for (std::size_t s = 0; s < seeds; ++s) {
    trace.total_updates += updates[s];
    trace.reference_failures += ref_failures[s];
  }
  return trace;
}

std::string online_csv(const OnlineTrace& trace, std::uint64_t config_hash, int seeds) {
  std::string out = csv_comment(config_hash, seeds);
  out += "t,drift_deg,eta,updated,nmse_dl,nmse_ref,nmse_frozen\n";
  for (const auto& r : trace.rows) {
    out += std::to_string(r.t) + "," + fmt_num(r.drift_deg) + "," + fmt_num(r.eta) + "," +
           fmt_num(r.updated) + "," + fmt_num(r.nmse_dl) + "," + fmt_num(r.nmse_ref) + "," +
           fmt_num(r.nmse_frozen) + "\n";
  }
  return out;
}

namespace {

template <class F>
int guarded(std::ostream& err, F&& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitBadConfig;
  } catch (const MissingModelError& e) {
    err << "error: " << e.what() << "\n";
    return kExitMissingModel;
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kExitDisk;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitDisk;
  } catch (const std::invalid_argument& e) {
    err << "error: invalid configuration: " << e.what() << "\n";
    return kExitBadConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

}  // namespace

int command_train(const ExperimentConfig& cfg, std::ostream& err) {
  return guarded(err, [&] {
    const TrainReport report = train_models(cfg, &err);
    err << "trained on " << report.samples << " samples; checkpoints in " << cfg.model_dir << "\n";
    return static_cast<int>(kExitOk);
  });
}

int command_run(const ExperimentConfig& cfg, std::ostream& err) {
  switch (cfg.kind) {
    case ExperimentKind::kTrain:
      return command_train(cfg, err);
    case ExperimentKind::kTiming:
      return command_bench(cfg, err);
    case ExperimentKind::kOnlineTrace:
      return command_online(cfg, err);
    default:
      break;
  }
  return guarded(err, [&] {
    std::optional<TrainedModels> models;
    if (needs_models(cfg)) models = load_models(cfg.model_dir, cfg.dims);
    const SweepTable table = run_sweep(cfg, models ? &*models : nullptr);
    if (table.failures > 0) {
      err << "warning: " << table.failures << " method evaluation(s) failed numerically and were excluded\n";
    }
    ensure_dir(cfg.output);
    const fs::path path = fs::path(cfg.output) / (to_string(cfg.kind) + ".csv");
    write_text(path, sweep_csv(table, cfg.hash));
    err << "wrote " << path.string() << "\n";
    return static_cast<int>(kExitOk);
  });
}

int command_bench(const ExperimentConfig& cfg, std::ostream& err) {
  return guarded(err, [&] {
    std::optional<TrainedModels> models;
    if (needs_models(cfg)) models = load_models(cfg.model_dir, cfg.dims);
    const auto rows = run_timing(cfg, models ? &*models : nullptr);
    ensure_dir(cfg.output);
    const fs::path path = fs::path(cfg.output) / "timing.csv";
    write_text(path, timing_csv(rows, cfg.hash));
    err << "wrote " << path.string() << "\n";
    return static_cast<int>(kExitOk);
  });
}

int command_online(const ExperimentConfig& cfg, std::ostream& err) {
  return guarded(err, [&] {
    const NetworkParams channelnet =
        load_checked(fs::path(cfg.model_dir) / kChannelNetFile, NetRole::kChannelNet,
                     channel_shape(cfg.dims), channel_label_size(cfg.dims.n_r, cfg.dims.n_t));
    const OnlineTrace trace = run_online_trace(cfg, channelnet);
    if (trace.reference_failures > 0) {
      err << "warning: reference estimator failed " << trace.reference_failures << " time(s)\n";
    }
    ensure_dir(cfg.output);
    const fs::path path = fs::path(cfg.output) / "online_trace.csv";
    write_text(path, online_csv(trace, cfg.hash, cfg.online.seeds));
    err << "wrote " << path.string() << " (" << trace.total_updates << " updates)\n";
    return static_cast<int>(kExitOk);
  });
}

}  // namespace hbf
