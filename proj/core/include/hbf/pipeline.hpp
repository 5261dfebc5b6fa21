#pragma once

#include "hbf/channel.hpp"
#include "hbf/combiner.hpp"
#include "hbf/network.hpp"
#include "hbf/pilot.hpp"
#include "hbf/precoder.hpp"
#include "hbf/training.hpp"

#include <cstdint>
#include <functional>
#include <vector>

namespace hbf {

struct SystemDims {
  int n_t = 16;
  int n_r = 4;
  int n_rf = 2;
  int n_s = 2;

  void validate() const;
};

struct ScenarioConfig {
  int clusters = 5;
  int rays_per_cluster = 10;
  double spread_deg = 5.0;
  double gain_variance = 1.0;
  double spacing_ratio = 0.5;
  int covariance_realizations = kDefaultCovarianceRealizations;

  void validate() const;
};

struct SnrTriple {
  double covariance_db = 20.0;  // SNR_R
  double channel_db = 15.0;     // SNR_H
  double pilot_db = 20.0;       // SNR on the received preamble
};

/// N = 100, G = 200 and nine triples give the paper-scale 180,000 pairs.
struct DatasetSpec {
  int scenarios = 20;     // N
  int realizations = 50;  // G per scenario
  std::vector<SnrTriple> snr{SnrTriple{}};
  std::vector<int> train_clusters;  // L per scenario, cycled; empty -> scenario.clusters
  SystemDims dims;
  ScenarioConfig scenario;
  double design_snr_db = 0.0;  // rho used by the label solvers
  int pilot_tx_beams = 0;      // M_T; 0 -> N_T
  int pilot_rx_beams = 0;      // M_R; 0 -> N_R
  AlternatingOptions precoder_options;
  CombinerOptions combiner_options;
  std::uint64_t seed = 1;

  void validate() const;
  Eigen::Index expected_size() const;
};

/// Everything fixed per training scenario n.
struct ScenarioRecord {
  ScenarioParams params;
  ChannelRealization channel;
  CMatrix covariance;
  HybridBeamformer precoder;
  HybridBeamformer combiner;
};

struct SampleIndex {
  int scenario = 0;
  int realization = 0;
  int snr = 0;
};

struct GeneratedData {
  Dataset covnet;
  Dataset channelnet;
  Dataset bfnet;
  std::vector<SampleIndex> index;          // aligned with dataset columns
  std::vector<ScenarioRecord> scenarios;   // successful scenarios, by scenario id
  std::vector<int> scenario_ids;           // id of each entry in `scenarios`
  int skipped_scenarios = 0;
};

PilotConfig pilot_for(const SystemDims& dims, int m_t, int m_r);

/// Cluster draw, channel and covariance of scenario n; beamformers left empty.
ScenarioRecord scenario_statistics(const DatasetSpec& spec, int n);

/// scenario_statistics plus the precoder and combiner labels. Throws on solver failure.
ScenarioRecord build_scenario(const DatasetSpec& spec, int n);

/// Noisy inputs for one (scenario, realization, SNR) tuple.
struct NetworkInputs {
  CMatrix noisy_covariance;
  CMatrix noisy_channel;
  CMatrix ybar;
  CMatrix ice;
};
NetworkInputs corrupt_inputs(const ScenarioRecord& rec, const PilotConfig& pilot,
                             const SnrTriple& snr, std::uint64_t seed);

/// Algorithm-1 dataset generation. Deterministic for a fixed spec.
GeneratedData generate_datasets(const DatasetSpec& spec);

/// Seed for sample (n, g, s) derived from the spec seed.
std::uint64_t sample_seed(std::uint64_t seed, int n, int g, int s);

/// ||A - B||_F / (N_T N_R)
double error_metric(const CMatrix& dl_estimate, const CMatrix& reference);

struct OnlineConfig {
  double zeta = 0.02;
  int g_y = 200;
  double snr_y_db = 20.0;
  /// Fine-tuning schedule; learning rate is 10x below offline training.
  TrainConfig fine_tune = [] {
    TrainConfig c;
    c.learning_rate = 5e-5;
    c.max_epochs = 50;
    c.patience = 3;
    c.fit_standardization = false;
    c.standardize_labels = false;
    return c;
  }();

  void validate() const;
};

struct OnlineStepResult {
  CMatrix estimate;  // DL estimate reported for this step
  double eta = 0.0;
  bool updated = false;
  bool reference_failed = false;
};

/// Threshold-triggered online adaptation of a channel-estimation network.
class OnlineDeployer {
 public:
  OnlineDeployer(NetworkParams network, const ReferenceEstimator& reference, OnlineConfig config,
                 int n_r, int n_t);

  OnlineStepResult step(const PilotObservation& obs, std::uint64_t seed);

  const NetworkParams& network() const { return network_; }
  const CMatrix& reference_estimate() const { return reference_estimate_; }
  int updates() const { return updates_; }

 private:
  CMatrix estimate(const CMatrix& ice) const;

  NetworkParams network_;
  const ReferenceEstimator& reference_;
  OnlineConfig config_;
  int n_r_;
  int n_t_;
  bool started_ = false;
  CMatrix reference_estimate_;
  int updates_ = 0;
};

/// Channel estimate from a ChannelNet-role network given an ICE.
CMatrix channelnet_estimate(const NetworkParams& net, const CMatrix& ice);

}  // namespace hbf
