#include "hbf/training.hpp"

#include "hbf/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace hbf {

Dataset make_dataset(NetRole role, const std::vector<Tensor3>& inputs,
                     const std::vector<RVector>& labels) {
  if (inputs.size() != labels.size()) {
    throw std::invalid_argument("make_dataset: inputs and labels differ in count");
  }
  Dataset d;
  d.role = role;
  if (inputs.empty()) {
    return d;
  }
  d.shape = inputs.front().shape();
  const auto count = static_cast<Eigen::Index>(inputs.size());
  d.inputs.resize(d.shape.size(), count);
  d.labels.resize(labels.front().size(), count);
  for (Eigen::Index t = 0; t < count; ++t) {
    const auto k = static_cast<std::size_t>(t);
    if (!(inputs[k].shape() == d.shape) || labels[k].size() != d.labels.rows()) {
      throw std::invalid_argument("make_dataset: sample " + std::to_string(t) + " has a different shape");
    }
    d.inputs.col(t) = inputs[k].data();
    d.labels.col(t) = labels[k];
  }
  return d;
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0) || momentum < 0.0 || momentum >= 1.0 || batch_size < 1 ||
      !(lr_decay > 0.0) || lr_decay_every < 1 || patience < 0 || max_epochs < 1 ||
      !(validation_fraction >= 0.0 && validation_fraction < 1.0)) {
    throw std::invalid_argument("TrainConfig: values out of range");
  }
}

double learning_rate_at(const TrainConfig& cfg, int completed_epochs) {
  return cfg.learning_rate * std::pow(cfg.lr_decay, completed_epochs / cfg.lr_decay_every);
}

SplitSizes split_sizes(Eigen::Index total, double validation_fraction) {
  SplitSizes s;
  s.validation = static_cast<Eigen::Index>(std::floor(validation_fraction * static_cast<double>(total) + 1e-9));
  s.train = total - s.validation;
  return s;
}

void fit_standardization(NetworkParams& params, const RMatrix& raw_inputs) {
  const InputShape& s = params.input;
  if (raw_inputs.rows() != s.size() || raw_inputs.cols() == 0) {
    throw std::invalid_argument("fit_standardization: inputs do not match the network");
  }
  const Eigen::Index per_channel = static_cast<Eigen::Index>(s.rows) * s.cols;
  params.input_mean.resize(s.channels);
  params.input_std.resize(s.channels);
  const double n = static_cast<double>(per_channel * raw_inputs.cols());
  for (int c = 0; c < s.channels; ++c) {
    const auto block = raw_inputs.middleRows(c * per_channel, per_channel);
    const double mean = block.sum() / n;
    const double var = (block.array() - mean).square().sum() / n;
    params.input_mean(c) = mean;
    params.input_std(c) = var > 0.0 ? std::sqrt(var) : 1.0;
  }
}

void rescale_output_layer(NetworkParams& params, const RVector& mul, const RVector& add) {
  const std::vector<LayerPlan> plan = plan_layers(params.input, params.layers);
  const LayerPlan& out = plan.back();
  if (mul.size() != out.out_size || add.size() != out.out_size) {
    throw std::invalid_argument("rescale_output_layer: scaling length does not match the output");
  }
  Eigen::Map<RMatrix> w(params.params.data() + out.weight_offset, out.out_size, out.in_size);
  Eigen::Map<RVector> b(params.params.data() + out.bias_offset, out.bias_count);
  w = mul.asDiagonal() * w;
  b = mul.cwiseProduct(b) + add;
}

double evaluate_mse(const Network& net, const RMatrix& prepared_inputs, const RMatrix& labels,
                    std::size_t from_layer) {
  if (prepared_inputs.cols() == 0) {
    return std::numeric_limits<double>::quiet_NaN();
  }
  constexpr Eigen::Index kChunk = 256;
  double sum = 0.0;
  for (Eigen::Index start = 0; start < prepared_inputs.cols(); start += kChunk) {
    const Eigen::Index len = std::min(kChunk, prepared_inputs.cols() - start);
    const RMatrix out = net.infer(prepared_inputs.middleCols(start, len), from_layer);
    sum += (out - labels.middleCols(start, len)).squaredNorm();
  }
  return sum / static_cast<double>(labels.size());
}

RMatrix predict(const NetworkParams& params, const RMatrix& raw_inputs) {
  const Network net(params);
  return net.infer(net.prepare(raw_inputs));
}

namespace {

std::vector<Eigen::Index> shuffled(std::vector<Eigen::Index> v, Stream& rng) {
  // Explicit Fisher-Yates keeps the order identical across standard libraries.
  for (std::size_t i = v.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.engine()() % i);
    std::swap(v[i - 1], v[j]);
  }
  return v;
}

RMatrix gather(const RMatrix& m, const std::vector<Eigen::Index>& idx, std::size_t begin,
               std::size_t end) {
  RMatrix out(m.rows(), static_cast<Eigen::Index>(end - begin));
  for (std::size_t k = begin; k < end; ++k) {
    out.col(static_cast<Eigen::Index>(k - begin)) = m.col(idx[k]);
  }
  return out;
}

}  // namespace

TrainResult train(const NetworkParams& initial, const Dataset& data, const TrainConfig& cfg,
                  const EpochCallback& on_epoch) {
  cfg.validate();
  if (data.size() == 0) {
    throw std::invalid_argument("train: empty dataset");
  }
  if (!(data.shape == initial.input)) {
    throw std::invalid_argument("train: dataset input shape does not match the network");
  }
  if (data.labels.rows() != initial.output_size() || data.labels.cols() != data.size()) {
    throw std::invalid_argument("train: label length does not match the network output");
  }

  Stream rng(cfg.seed);
  std::vector<Eigen::Index> all(static_cast<std::size_t>(data.size()));
  std::iota(all.begin(), all.end(), Eigen::Index{0});
  all = shuffled(std::move(all), rng);
  const SplitSizes sizes = split_sizes(data.size(), cfg.validation_fraction);
  const auto n_train = static_cast<std::size_t>(sizes.train);
  std::vector<Eigen::Index> train_idx(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::vector<Eigen::Index> val_idx(all.begin() + static_cast<std::ptrdiff_t>(n_train), all.end());

  NetworkParams start = initial;
  if (cfg.fit_standardization) {
    fit_standardization(start, gather(data.inputs, train_idx, 0, train_idx.size()));
  }
  Network net(start);
  const std::size_t prefix = net.frozen_prefix_end();

  // Inputs to the first layer that is actually trained; frozen deterministic
  // layers in front of it are evaluated once here.
  const auto features = [&](const std::vector<Eigen::Index>& idx) {
    const RMatrix prepared = net.prepare(gather(data.inputs, idx, 0, idx.size()));
    return prefix == 0 ? prepared : net.infer_range(prepared, 0, prefix);
  };
  const RMatrix x_train = features(train_idx);
  RMatrix y_train = gather(data.labels, train_idx, 0, train_idx.size());
  RMatrix y_val = val_idx.empty() ? RMatrix() : gather(data.labels, val_idx, 0, val_idx.size());

  // Per-output label scaling; identity unless standardize_labels. Like a
  // refit of the input statistics, the initial regression layer is taken to
  // act in the standardized units.
  const auto k_out = data.labels.rows();
  RVector label_mean = RVector::Zero(k_out);
  RVector label_scale = RVector::Ones(k_out);
  if (cfg.standardize_labels && !start.layers.back().frozen) {
    label_mean = y_train.rowwise().mean();
    const RVector sd =
        ((y_train.colwise() - label_mean).array().square().rowwise().sum() / static_cast<double>(y_train.cols()))
            .sqrt();
    const double floor = 1e-9 * std::max(1.0, sd.maxCoeff());
    for (Eigen::Index k = 0; k < k_out; ++k) label_scale(k) = sd(k) > floor ? sd(k) : 1.0;
    y_train = label_scale.cwiseInverse().asDiagonal() * (y_train.colwise() - label_mean);
    if (y_val.size() != 0) {
      y_val = label_scale.cwiseInverse().asDiagonal() * (y_val.colwise() - label_mean);
    }
  }
  const auto restore = [&](NetworkParams p) {
    if (cfg.standardize_labels && !p.layers.back().frozen) rescale_output_layer(p, label_scale, label_mean);
    return p;
  };
  // MSE in label units.
  const auto mse = [&](const RMatrix& x, const RMatrix& y) {
    if (x.cols() == 0) return std::numeric_limits<double>::quiet_NaN();
    constexpr Eigen::Index kChunk = 256;
    double sum = 0.0;
    for (Eigen::Index c = 0; c < x.cols(); c += kChunk) {
      const Eigen::Index len = std::min(kChunk, x.cols() - c);
      const RMatrix diff = net.infer(x.middleCols(c, len), prefix) - y.middleCols(c, len);
      sum += (label_scale.asDiagonal() * diff).squaredNorm();
    }
    return sum / static_cast<double>(y.size());
  };
  const RMatrix x_val = val_idx.empty() ? RMatrix() : features(val_idx);

  std::vector<Eigen::Index> local(train_idx.size());
  std::iota(local.begin(), local.end(), Eigen::Index{0});

  TrainResult result;
  result.params = restore(net.params());
  RVector velocity = RVector::Zero(start.params.size());
  RVector grad;
  ForwardCache cache;
  double best_val = std::numeric_limits<double>::infinity();
  int since_best = 0;

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const double lr = learning_rate_at(cfg, epoch - 1);
    const std::vector<Eigen::Index> order = shuffled(local, rng);
    for (std::size_t b = 0; b < order.size(); b += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t e = std::min(order.size(), b + static_cast<std::size_t>(cfg.batch_size));
      const RMatrix xb = gather(x_train, order, b, e);
      const RMatrix yb = gather(y_train, order, b, e);
      const std::uint64_t dropout_seed = rng.engine()();
      const RMatrix out = net.forward_train(xb, dropout_seed, cache, prefix);
      net.backward(cache, out, yb, grad);
      velocity = cfg.momentum * velocity - lr * grad;
      net.mutable_params().params += velocity;
    }

    EpochLog log;
    log.epoch = epoch;
    log.lr = lr;
    log.train_mse = mse(x_train, y_train);
    log.val_mse = mse(x_val, y_val);
    result.log.push_back(log);
    if (on_epoch) {
      on_epoch(log);
    }

    if (val_idx.empty()) {
      result.params = restore(net.params());
      result.best_epoch = epoch;
      continue;
    }
    if (log.val_mse < best_val) {
      best_val = log.val_mse;
      result.params = restore(net.params());
      result.best_epoch = epoch;
      since_best = 0;
    } else {
      ++since_best;
      if (cfg.patience > 0 && since_best >= cfg.patience) {
        result.stopped_early = true;
        break;
      }
    }
  }
  return result;
}

}  // namespace hbf
