#pragma once

#include "hbf/network.hpp"
#include "hbf/tensor.hpp"

#include <cstdint>
#include <functional>
#include <vector>

namespace hbf {

/// Input/label pairs. inputs holds raw Tensor3 data, one sample per column.
struct Dataset {
  NetRole role = NetRole::kCustom;
  InputShape shape;
  RMatrix inputs;  // shape.size() x T
  RMatrix labels;  // K x T

  Eigen::Index size() const { return inputs.cols(); }
};

/// Packs per-sample tensors and labels into a Dataset.
Dataset make_dataset(NetRole role, const std::vector<Tensor3>& inputs,
                     const std::vector<RVector>& labels);

struct TrainConfig {
  double learning_rate = 5e-4;
  double momentum = 0.9;
  int batch_size = 128;
  double lr_decay = 0.9;
  int lr_decay_every = 20;  // epochs
  int patience = 3;         // 0 disables early stopping
  int max_epochs = 100;
  std::uint64_t seed = 0;
  double validation_fraction = 0.2;
  /// Recompute per-channel input statistics from the training split.
  bool fit_standardization = true;
  /// Train against per-output z-scored labels (meant for fresh networks, like
  /// fit_standardization). The scaling is folded into the regression layer
  /// afterwards, so the returned network predicts raw labels.
  bool standardize_labels = true;

  void validate() const;
};

/// Learning rate in effect after `completed_epochs` full epochs.
double learning_rate_at(const TrainConfig& cfg, int completed_epochs);

struct SplitSizes {
  Eigen::Index train = 0;
  Eigen::Index validation = 0;
};
/// validation = floor(fraction * T), train = T - validation.
SplitSizes split_sizes(Eigen::Index total, double validation_fraction);

struct EpochLog {
  int epoch = 0;
  double train_mse = 0.0;  // element-mean squared error, dropout off
  double val_mse = 0.0;    // NaN when there is no validation split
  double lr = 0.0;
};

struct TrainResult {
  NetworkParams params;  // best-validation parameters (last epoch without validation)
  std::vector<EpochLog> log;
  int best_epoch = 0;
  bool stopped_early = false;
};

/// Per-channel mean and standard deviation over the given sample columns.
void fit_standardization(NetworkParams& params, const RMatrix& raw_inputs);

using EpochCallback = std::function<void(const EpochLog&)>;

/// SGD with momentum on the batch-mean of 0.5 ||y - z||^2. Deterministic for a fixed seed.
TrainResult train(const NetworkParams& initial, const Dataset& data, const TrainConfig& cfg,
                  const EpochCallback& on_epoch = {});

/// W <- diag(mul) W and b <- mul .* b + add on the regression layer.
void rescale_output_layer(NetworkParams& params, const RVector& mul, const RVector& add);

/// Mean squared error per output element, dropout off.
double evaluate_mse(const Network& net, const RMatrix& prepared_inputs, const RMatrix& labels,
                    std::size_t from_layer = 0);

/// Inference on raw inputs (one sample per column).
RMatrix predict(const NetworkParams& params, const RMatrix& raw_inputs);

}  // namespace hbf
