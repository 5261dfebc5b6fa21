#include "hbf/pipeline.hpp"

#include "hbf/encoding.hpp"
#include "hbf/rng.hpp"

namespace hbf {

void OnlineConfig::validate() const {
  if (!(zeta > 0.0) || g_y < 1) {
    throw std::invalid_argument("online: zeta must be > 0 and G_Y >= 1");
  }
  fine_tune.validate();
}

CMatrix channelnet_estimate(const NetworkParams& net, const CMatrix& ice) {
  const RVector z = Network(net).infer(build_input(ice, ThirdChannel::kMagnitude));
  return reconstruct_channel(z, static_cast<int>(ice.rows()), static_cast<int>(ice.cols()));
}

OnlineDeployer::OnlineDeployer(NetworkParams network, const ReferenceEstimator& reference,
                               OnlineConfig config, int n_r, int n_t)
    : network_(std::move(network)), reference_(reference), config_(std::move(config)), n_r_(n_r), n_t_(n_t) {
  config_.validate();
  if (network_.output_size() != channel_label_size(n_r, n_t)) {
    throw std::invalid_argument("OnlineDeployer: network output does not match a channel label");
  }
}

CMatrix OnlineDeployer::estimate(const CMatrix& ice) const { return channelnet_estimate(network_, ice); }

OnlineStepResult OnlineDeployer::step(const PilotObservation& obs, std::uint64_t seed) {
  if (obs.ice.rows() != n_r_ || obs.ice.cols() != n_t_) {
    throw std::invalid_argument("OnlineDeployer: ICE has the wrong shape");
  }
  OnlineStepResult out;
  out.estimate = estimate(obs.ice);
  if (!started_) {
    const ReferenceEstimate ref = reference_.estimate(obs);
    if (!ref.ok) {
      out.reference_failed = true;
      return out;
    }
    reference_estimate_ = ref.h;
    started_ = true;
  }
  out.eta = error_metric(out.estimate, reference_estimate_);
  if (out.eta < config_.zeta) {
    return out;
  }

  const ReferenceEstimate ref = reference_.estimate(obs);
  if (!ref.ok) {
    out.reference_failed = true;
    return out;
  }
  reference_estimate_ = ref.h;

  std::vector<Tensor3> inputs;
  std::vector<RVector> labels;
  inputs.reserve(static_cast<std::size_t>(config_.g_y));
  labels.reserve(static_cast<std::size_t>(config_.g_y));
  const RVector label = build_label_channel(reference_estimate_);
  for (int g = 0; g < config_.g_y; ++g) {
    const CMatrix noisy = corrupt_matrix(obs.ice, config_.snr_y_db, derive_seed(seed, static_cast<std::uint64_t>(g)));
    inputs.push_back(build_input(noisy, ThirdChannel::kMagnitude));
    labels.push_back(label);
  }
  const Dataset online = make_dataset(NetRole::kChannelNet, inputs, labels);

  NetworkParams tuned = network_;
  freeze_conv_layers(tuned);
  TrainConfig cfg = config_.fine_tune;
  cfg.fit_standardization = false;
  cfg.standardize_labels = false;
  cfg.seed = derive_seed(seed, 0xF1F1F1F1u);
  TrainResult result = train(tuned, online, cfg);
  // Freezing is a property of this update only; the deployed spec keeps its flags.
  for (std::size_t k = 0; k < result.params.layers.size(); ++k) {
    result.params.layers[k].frozen = network_.layers[k].frozen;
  }
  network_ = std::move(result.params);
  ++updates_;
  out.updated = true;
  out.estimate = estimate(obs.ice);
  return out;
}

}  // namespace hbf
