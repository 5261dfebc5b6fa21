#include "hbf/pipeline.hpp"

#include "hbf/encoding.hpp"
#include "hbf/metrics.hpp"
#include "hbf/rng.hpp"

#include <cmath>

namespace hbf {

void SystemDims::validate() const {
  if (n_t < 1 || n_r < 1 || n_s < 1 || n_rf < n_s || n_rf > std::min(n_t, n_r)) {
    throw std::invalid_argument("dims: need N_S <= N_RF <= min(N_T, N_R)");
  }
}

void ScenarioConfig::validate() const {
  if (clusters < 1 || rays_per_cluster < 1 || spread_deg < 0.0 || !(gain_variance > 0.0) ||
      !(spacing_ratio > 0.0) || covariance_realizations < 1) {
    throw std::invalid_argument("scenario: values out of range");
  }
}

void DatasetSpec::validate() const {
  dims.validate();
  scenario.validate();
  if (scenarios < 1 || realizations < 1) {
    throw std::invalid_argument("dataset: N and G must be >= 1");
  }
  if (snr.empty()) {
    throw std::invalid_argument("dataset: at least one SNR triple is required");
  }
  for (int l : train_clusters) {
    if (l < 1) throw std::invalid_argument("dataset: cluster counts must be >= 1");
  }
}

Eigen::Index DatasetSpec::expected_size() const {
  return static_cast<Eigen::Index>(scenarios) * realizations * static_cast<Eigen::Index>(snr.size());
}

PilotConfig pilot_for(const SystemDims& dims, int m_t, int m_r) {
  return make_dft_pilot(dims.n_t, dims.n_r, m_t > 0 ? m_t : dims.n_t, m_r > 0 ? m_r : dims.n_r);
}

std::uint64_t sample_seed(std::uint64_t seed, int n, int g, int s) {
  std::uint64_t k = derive_seed(seed, 0x5A5A0000u + static_cast<std::uint64_t>(n));
  k = derive_seed(k, static_cast<std::uint64_t>(g));
  return derive_seed(k, static_cast<std::uint64_t>(s));
}

ScenarioRecord scenario_statistics(const DatasetSpec& spec, int n) {
  const std::uint64_t base = derive_seed(spec.seed, static_cast<std::uint64_t>(n));
  const ArrayGeometry tx{spec.dims.n_t, spec.scenario.spacing_ratio};
  const ArrayGeometry rx{spec.dims.n_r, spec.scenario.spacing_ratio};
  const int clusters = spec.train_clusters.empty()
                           ? spec.scenario.clusters
                           : spec.train_clusters[static_cast<std::size_t>(n) % spec.train_clusters.size()];
  Stream rng(derive_seed(base, 0));
  ScenarioRecord rec;
  rec.params = random_scenario(clusters, spec.scenario.rays_per_cluster,
                               deg_to_rad(spec.scenario.spread_deg), rng, spec.scenario.gain_variance);
  rec.channel = generate_channel(rec.params, tx, rx, derive_seed(base, 1));
  rec.covariance = covariance_monte_carlo(rec.params, tx, spec.dims.n_r,
                                          spec.scenario.covariance_realizations, derive_seed(base, 2))
                       .r;
  return rec;
}

ScenarioRecord build_scenario(const DatasetSpec& spec, int n) {
  const std::uint64_t base = derive_seed(spec.seed, static_cast<std::uint64_t>(n));
  ScenarioRecord rec = scenario_statistics(spec, n);
  const double rho = snr_db_to_rho(spec.design_snr_db);
  AlternatingOptions popts = spec.precoder_options;
  popts.seed = derive_seed(base, 3);
  // Labels start from the phase-extraction solution so they are a function of the
  // scenario rather than of a random start; networks cannot fit the latter.
  popts.initial_rf =
      phase_extraction_hybrid_precoder(rec.covariance, spec.dims.n_rf, spec.dims.n_s, rho).rf;
  rec.precoder =
      alternating_hybrid_precoder(rec.covariance, spec.dims.n_rf, spec.dims.n_s, rho, popts).beamformer;
  CombinerOptions copts = spec.combiner_options;
  copts.seed = derive_seed(base, 4);
  copts.initial_rf = phase_extraction_hybrid_combiner(rec.channel.h, rec.precoder.rf,
                                                      rec.precoder.bb, rho, 1.0, spec.dims.n_rf)
                         .rf;
  rec.combiner = alternating_hybrid_combiner(rec.channel.h, rec.precoder.rf, rec.precoder.bb, rho,
                                             1.0, spec.dims.n_rf, copts)
                     .beamformer;
  return rec;
}

NetworkInputs corrupt_inputs(const ScenarioRecord& rec, const PilotConfig& pilot,
                             const SnrTriple& snr, std::uint64_t seed) {
  NetworkInputs in;
  in.noisy_covariance = corrupt_matrix(rec.covariance, snr.covariance_db, derive_seed(seed, 0));
  in.noisy_channel = corrupt_matrix(rec.channel.h, snr.channel_db, derive_seed(seed, 1));
  in.ybar = simulate_preamble(rec.channel.h, pilot, snr.pilot_db, derive_seed(seed, 2));
  in.ice = initial_channel_estimate(in.ybar, pilot).y;
  return in;
}

GeneratedData generate_datasets(const DatasetSpec& spec) {
  spec.validate();
  const PilotConfig pilot = pilot_for(spec.dims, spec.pilot_tx_beams, spec.pilot_rx_beams);
  GeneratedData out;
  std::vector<Tensor3> x_r, x_y, x_h;
  std::vector<RVector> z_r, z_y, z_h;
  const auto reserve = static_cast<std::size_t>(spec.expected_size());
  for (auto* v : {&x_r, &x_y, &x_h}) v->reserve(reserve);
  for (auto* v : {&z_r, &z_y, &z_h}) v->reserve(reserve);

  for (int n = 0; n < spec.scenarios; ++n) {
    ScenarioRecord rec;
    try {
      rec = build_scenario(spec, n);
    } catch (const Error&) {
      ++out.skipped_scenarios;
      continue;
    }
    const RVector label_r = build_label_beamformer(rec.precoder.rf, rec.precoder.bb);
    const RVector label_y = build_label_channel(rec.channel.h);
    const RVector label_h = build_label_beamformer(rec.combiner.rf, rec.combiner.bb);
    for (int g = 0; g < spec.realizations; ++g) {
      for (std::size_t s = 0; s < spec.snr.size(); ++s) {
        const NetworkInputs in =
            corrupt_inputs(rec, pilot, spec.snr[s], sample_seed(spec.seed, n, g, static_cast<int>(s)));
        x_r.push_back(build_input(in.noisy_covariance, ThirdChannel::kPhase));
        x_y.push_back(build_input(in.ice, ThirdChannel::kMagnitude));
        x_h.push_back(build_input(in.noisy_channel, ThirdChannel::kMagnitude));
        z_r.push_back(label_r);
        z_y.push_back(label_y);
        z_h.push_back(label_h);
        out.index.push_back({n, g, static_cast<int>(s)});
      }
    }
    out.scenarios.push_back(std::move(rec));
    out.scenario_ids.push_back(n);
  }
  out.covnet = make_dataset(NetRole::kCovNet, x_r, z_r);
  out.channelnet = make_dataset(NetRole::kChannelNet, x_y, z_y);
  out.bfnet = make_dataset(NetRole::kBfNet, x_h, z_h);
  return out;
}

double error_metric(const CMatrix& dl_estimate, const CMatrix& reference) {
  if (dl_estimate.rows() != reference.rows() || dl_estimate.cols() != reference.cols()) {
    throw std::invalid_argument("error_metric: shape mismatch");
  }
  return (dl_estimate - reference).norm() / static_cast<double>(reference.size());
}

}  // namespace hbf
