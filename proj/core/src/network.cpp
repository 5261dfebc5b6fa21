#include "hbf/network.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace hbf {

std::string to_string(NetRole role) {
  switch (role) {
    case NetRole::kCovNet:
      return "covnet";
    case NetRole::kChannelNet:
      return "channelnet";
    case NetRole::kBfNet:
      return "bfnet";
    case NetRole::kCustom:
      return "custom";
  }
  return "custom";
}

NetRole net_role_from_string(const std::string& name) {
  if (name == "covnet") return NetRole::kCovNet;
  if (name == "channelnet") return NetRole::kChannelNet;
  if (name == "bfnet") return NetRole::kBfNet;
  if (name == "custom") return NetRole::kCustom;
  throw std::invalid_argument("unknown network role '" + name + "'");
}

int NetworkParams::output_size() const {
  for (auto it = layers.rbegin(); it != layers.rend(); ++it) {
    if (it->kind == LayerKind::kOutputRegression) {
      return it->size;
    }
  }
  return 0;
}

ArchitectureOptions default_architecture(NetRole role, bool desk_scale) {
  ArchitectureOptions a;
  switch (role) {
    case NetRole::kCovNet:
      a.conv_filters = desk_scale ? 16 : 256;
      a.fc_units = desk_scale ? std::vector<int>{256, 128} : std::vector<int>{1024, 512};
      break;
    case NetRole::kChannelNet:
      a.conv_filters = desk_scale ? 16 : 128;
      a.fc_units = desk_scale ? std::vector<int>{512, 256, 128} : std::vector<int>{2048, 1024, 512};
      break;
    case NetRole::kBfNet:
      a.conv_filters = desk_scale ? 16 : 128;
      a.fc_units = desk_scale ? std::vector<int>{256, 128} : std::vector<int>{1024, 512};
      break;
    case NetRole::kCustom:
      throw std::invalid_argument("default_architecture: custom networks have no preset");
  }
  // Half of 128 units is too few to survive in a regression head; narrow desk nets collapse to the label mean.
  a.dropout_p = desk_scale ? 0.1 : 0.5;
  return a;
}

std::vector<LayerSpec> role_layers(NetRole role, int output_size, const ArchitectureOptions& arch) {
  if (arch.conv_filters < 1 || arch.fc_units.empty() || output_size < 1) {
    throw std::invalid_argument("role_layers: filters, FC widths and output size must be positive");
  }
  const bool pooled = role == NetRole::kCovNet || role == NetRole::kBfNet;
  if (!pooled && role != NetRole::kChannelNet) {
    throw std::invalid_argument("role_layers: custom networks have no preset");
  }
  std::vector<LayerSpec> layers;
  for (int k = 0; k < 3; ++k) {
    layers.push_back({LayerKind::kConv, arch.conv_filters, false, 0.0});
    if (pooled && k < 2) {
      layers.push_back({LayerKind::kPool, 0, false, 0.0});
    }
  }
  for (int units : arch.fc_units) {
    layers.push_back({LayerKind::kFullyConnected, units, false, 0.0});
    layers.push_back({LayerKind::kDropout, 0, false, arch.dropout_p});
  }
  layers.push_back({LayerKind::kOutputRegression, output_size, false, 0.0});
  return layers;
}

std::vector<LayerPlan> plan_layers(const InputShape& input, const std::vector<LayerSpec>& layers) {
  if (input.rows < 1 || input.cols < 1 || input.channels < 1) {
    throw std::invalid_argument("network: input dimensions must be positive");
  }
  if (layers.empty() || layers.back().kind != LayerKind::kOutputRegression) {
    throw std::invalid_argument("network: the last layer must be the regression output");
  }
  std::vector<LayerPlan> plan;
  plan.reserve(layers.size());
  int h = input.rows;
  int w = input.cols;
  int c = input.channels;
  bool flat = false;
  Eigen::Index offset = 0;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const LayerSpec& s = layers[i];
    LayerPlan p;
    p.kind = s.kind;
    p.in_rows = h;
    p.in_cols = w;
    p.in_channels = c;
    p.in_size = static_cast<Eigen::Index>(h) * w * c;
    p.frozen = s.frozen;
    const std::string where = "network layer " + std::to_string(i);
    switch (s.kind) {
      case LayerKind::kConv:
        if (flat) throw std::invalid_argument(where + ": conv after a dense layer");
        if (s.size < 1) throw std::invalid_argument(where + ": conv needs >= 1 filter");
        p.weight_count = static_cast<Eigen::Index>(s.size) * 9 * c;
        p.bias_count = s.size;
        c = s.size;
        break;
      case LayerKind::kPool:
        if (flat) throw std::invalid_argument(where + ": pool after a dense layer");
        h = (h + 1) / 2;
        w = (w + 1) / 2;
        break;
      case LayerKind::kFullyConnected:
      case LayerKind::kOutputRegression:
        if (s.size < 1) throw std::invalid_argument(where + ": dense layer needs >= 1 unit");
        p.weight_count = static_cast<Eigen::Index>(s.size) * p.in_size;
        p.bias_count = s.size;
        h = 1;
        w = 1;
        c = s.size;
        flat = true;
        break;
      case LayerKind::kDropout:
        if (!(s.dropout_p >= 0.0 && s.dropout_p < 1.0)) {
          throw std::invalid_argument(where + ": dropout probability must be in [0, 1)");
        }
        p.dropout_p = s.dropout_p;
        break;
      default:
        throw std::invalid_argument(where + ": unknown layer kind");
    }
    if (s.kind == LayerKind::kOutputRegression && i + 1 != layers.size()) {
      throw std::invalid_argument(where + ": regression output must be last");
    }
    p.weight_offset = offset;
    offset += p.weight_count;
    p.bias_offset = offset;
    offset += p.bias_count;
    p.out_rows = h;
    p.out_cols = w;
    p.out_channels = c;
    p.out_size = static_cast<Eigen::Index>(h) * w * c;
    plan.push_back(p);
  }
  return plan;
}

Eigen::Index parameter_count(const std::vector<LayerPlan>& plan) {
  return plan.empty() ? 0 : plan.back().bias_offset + plan.back().bias_count;
}

NetworkParams make_network(NetRole role, InputShape input, std::vector<LayerSpec> layers,
                           std::uint64_t seed) {
  NetworkParams p;
  p.role = role;
  p.input = input;
  p.layers = std::move(layers);
  const std::vector<LayerPlan> plan = plan_layers(p.input, p.layers);
  p.params = RVector::Zero(parameter_count(plan));
  Stream rng(seed);
  for (const LayerPlan& l : plan) {
    if (l.weight_count == 0) {
      continue;
    }
    const double fan_in = static_cast<double>(l.weight_count / l.bias_count);
    const double limit = std::sqrt(6.0 / fan_in);
    for (Eigen::Index k = 0; k < l.weight_count; ++k) {
      p.params(l.weight_offset + k) = rng.uniform(-limit, limit);
    }
  }
  p.input_mean = RVector::Zero(input.channels);
  p.input_std = RVector::Ones(input.channels);
  return p;
}

NetworkParams make_network(NetRole role, InputShape input, int output_size,
                           const ArchitectureOptions& arch, std::uint64_t seed) {
  return make_network(role, input, role_layers(role, output_size, arch), seed);
}

void freeze_conv_layers(NetworkParams& params) {
  for (LayerSpec& s : params.layers) {
    if (s.kind == LayerKind::kConv) {
      s.frozen = true;
    }
  }
}

Network::Network(NetworkParams params) : params_(std::move(params)) {
  plan_ = plan_layers(params_.input, params_.layers);
  if (params_.params.size() != parameter_count(plan_)) {
    throw std::invalid_argument("network: parameter vector has " +
                                std::to_string(params_.params.size()) + " values, layers need " +
                                std::to_string(parameter_count(plan_)));
  }
  const auto c = params_.input.channels;
  if (params_.input_mean.size() == 0) params_.input_mean = RVector::Zero(c);
  if (params_.input_std.size() == 0) params_.input_std = RVector::Ones(c);
  if (params_.input_mean.size() != c || params_.input_std.size() != c) {
    throw std::invalid_argument("network: standardization statistics must have one entry per channel");
  }
}

int Network::output_size() const { return params_.output_size(); }

RMatrix Network::prepare(const RMatrix& raw) const {
  const InputShape& s = params_.input;
  if (raw.rows() != s.size()) {
    throw std::invalid_argument("network: input has " + std::to_string(raw.rows()) +
                                " values, expected " + std::to_string(s.size()));
  }
  RMatrix out(raw.rows(), raw.cols());
  for (Eigen::Index b = 0; b < raw.cols(); ++b) {
    for (int c = 0; c < s.channels; ++c) {
      const double mean = params_.input_mean(c);
      const double sd = params_.input_std(c) > 0.0 ? params_.input_std(c) : 1.0;
      for (int r = 0; r < s.rows; ++r) {
        for (int q = 0; q < s.cols; ++q) {
          const Eigen::Index src = (static_cast<Eigen::Index>(c) * s.rows + r) * s.cols + q;
          const Eigen::Index dst = (static_cast<Eigen::Index>(r) * s.cols + q) * s.channels + c;
          out(dst, b) = (raw(src, b) - mean) / sd;
        }
      }
    }
  }
  return out;
}

namespace {

void im2col(const RMatrix& x, const LayerPlan& p, RMatrix& cols) {
  const int h = p.in_rows;
  const int w = p.in_cols;
  const int c = p.in_channels;
  const Eigen::Index hw = static_cast<Eigen::Index>(h) * w;
  const Eigen::Index k9 = 9 * static_cast<Eigen::Index>(c);
  cols.resize(k9, hw * x.cols());
  for (Eigen::Index b = 0; b < x.cols(); ++b) {
    const double* src = x.col(b).data();
    for (int r = 0; r < h; ++r) {
      for (int q = 0; q < w; ++q) {
        double* dst = cols.data() + (b * hw + static_cast<Eigen::Index>(r) * w + q) * k9;
        for (int k = 0; k < 9; ++k) {
          const int rr = r + k / 3 - 1;
          const int qq = q + k % 3 - 1;
          double* slot = dst + static_cast<Eigen::Index>(k) * c;
          if (rr < 0 || rr >= h || qq < 0 || qq >= w) {
            std::fill(slot, slot + c, 0.0);
          } else {
            const double* from = src + (static_cast<Eigen::Index>(rr) * w + qq) * c;
            std::copy(from, from + c, slot);
          }
        }
      }
    }
  }
}

void col2im_add(const RMatrix& dcols, const LayerPlan& p, RMatrix& dx) {
  const int h = p.in_rows;
  const int w = p.in_cols;
  const int c = p.in_channels;
  const Eigen::Index hw = static_cast<Eigen::Index>(h) * w;
  const Eigen::Index k9 = 9 * static_cast<Eigen::Index>(c);
  for (Eigen::Index b = 0; b < dx.cols(); ++b) {
    double* dst = dx.col(b).data();
    for (int r = 0; r < h; ++r) {
      for (int q = 0; q < w; ++q) {
        const double* src = dcols.data() + (b * hw + static_cast<Eigen::Index>(r) * w + q) * k9;
        for (int k = 0; k < 9; ++k) {
          const int rr = r + k / 3 - 1;
          const int qq = q + k % 3 - 1;
          if (rr < 0 || rr >= h || qq < 0 || qq >= w) {
            continue;
          }
          double* to = dst + (static_cast<Eigen::Index>(rr) * w + qq) * c;
          const double* from = src + static_cast<Eigen::Index>(k) * c;
          for (int ch = 0; ch < c; ++ch) {
            to[ch] += from[ch];
          }
        }
      }
    }
  }
}

}  // namespace

RMatrix Network::run_layer(std::size_t i, const RMatrix& x, bool train, Stream* rng,
                           ForwardCache* cache) const {
  const LayerPlan& p = plan_[i];
  const Eigen::Index batch = x.cols();
  if (x.rows() != p.in_size) {
    throw std::invalid_argument("network layer " + std::to_string(i) + ": input size mismatch");
  }
  switch (p.kind) {
    case LayerKind::kConv: {
      const auto filters = p.out_channels;
      const Eigen::Index hw = static_cast<Eigen::Index>(p.in_rows) * p.in_cols;
      RMatrix cols;
      im2col(x, p, cols);
      const Eigen::Map<const RMatrix> weights(params_.params.data() + p.weight_offset, filters,
                                              9 * p.in_channels);
      const Eigen::Map<const RVector> bias(params_.params.data() + p.bias_offset, filters);
      RMatrix y(p.out_size, batch);
      Eigen::Map<RMatrix> ym(y.data(), filters, hw * batch);
      ym.noalias() = weights * cols;
      ym.colwise() += bias;
      y = y.cwiseMax(0.0);
      if (cache != nullptr) {
        cache->im2col[i] = std::move(cols);
      }
      return y;
    }
    case LayerKind::kPool: {
      RMatrix y(p.out_size, batch);
      Eigen::ArrayXi arg;
      if (cache != nullptr) {
        arg.resize(p.out_size * batch);
      }
      const int c = p.in_channels;
      for (Eigen::Index b = 0; b < batch; ++b) {
        for (int orow = 0; orow < p.out_rows; ++orow) {
          for (int ocol = 0; ocol < p.out_cols; ++ocol) {
            for (int ch = 0; ch < c; ++ch) {
              double best = -std::numeric_limits<double>::infinity();
              Eigen::Index best_idx = 0;
              for (int r = 2 * orow; r < std::min(2 * orow + 2, p.in_rows); ++r) {
                for (int q = 2 * ocol; q < std::min(2 * ocol + 2, p.in_cols); ++q) {
                  const Eigen::Index idx = (static_cast<Eigen::Index>(r) * p.in_cols + q) * c + ch;
                  if (x(idx, b) > best) {
                    best = x(idx, b);
                    best_idx = idx;
                  }
                }
              }
              const Eigen::Index o = (static_cast<Eigen::Index>(orow) * p.out_cols + ocol) * c + ch;
              y(o, b) = best;
              if (cache != nullptr) {
                arg(b * p.out_size + o) = static_cast<int>(best_idx);
              }
            }
          }
        }
      }
      if (cache != nullptr) {
        cache->pool_argmax[i] = std::move(arg);
      }
      return y;
    }
    case LayerKind::kFullyConnected:
    case LayerKind::kOutputRegression: {
      const Eigen::Index units = p.out_size;
      const Eigen::Map<const RMatrix> weights(params_.params.data() + p.weight_offset, units,
                                              p.in_size);
      const Eigen::Map<const RVector> bias(params_.params.data() + p.bias_offset, units);
      RMatrix y(units, batch);
      y.noalias() = weights * x;
      y.colwise() += bias;
      if (p.kind == LayerKind::kFullyConnected) {
        y = y.cwiseMax(0.0);
      }
      return y;
    }
    case LayerKind::kDropout: {
      if (!train || p.dropout_p == 0.0) {
        return x;
      }
      const double keep_scale = 1.0 / (1.0 - p.dropout_p);
      RMatrix mask(x.rows(), x.cols());
      for (Eigen::Index b = 0; b < batch; ++b) {
        for (Eigen::Index k = 0; k < x.rows(); ++k) {
          mask(k, b) = rng->uniform(0.0, 1.0) < p.dropout_p ? 0.0 : keep_scale;
        }
      }
      RMatrix y = x.cwiseProduct(mask);
      if (cache != nullptr) {
        cache->dropout_masks[i] = std::move(mask);
      }
      return y;
    }
  }
  throw std::logic_error("network: unreachable layer kind");
}

RMatrix Network::infer(const RMatrix& x, std::size_t from) const {
  return infer_range(x, from, plan_.size());
}

RMatrix Network::infer_range(const RMatrix& x, std::size_t from, std::size_t to) const {
  RMatrix a = x;
  for (std::size_t i = from; i < std::min(to, plan_.size()); ++i) {
    a = run_layer(i, a, false, nullptr, nullptr);
  }
  return a;
}

RVector Network::infer(const Tensor3& x) const {
  if (!(x.shape() == params_.input)) {
    throw std::invalid_argument("network: input tensor shape does not match the network");
  }
  const RMatrix raw = x.data();
  return infer(prepare(raw)).col(0);
}

RMatrix Network::forward_train(const RMatrix& x, std::uint64_t seed, ForwardCache& cache,
                               std::size_t from) const {
  Stream rng(seed);
  cache.first_layer = from;
  cache.activations.clear();
  cache.activations.reserve(plan_.size() - from + 1);
  cache.im2col.assign(plan_.size(), RMatrix());
  cache.pool_argmax.assign(plan_.size(), Eigen::ArrayXi());
  cache.dropout_masks.assign(plan_.size(), RMatrix());
  cache.activations.push_back(x);
  for (std::size_t i = from; i < plan_.size(); ++i) {
    cache.activations.push_back(run_layer(i, cache.activations.back(), true, &rng, &cache));
  }
  return cache.activations.back();
}

std::size_t Network::first_trainable_layer() const {
  for (std::size_t i = 0; i < plan_.size(); ++i) {
    if (params_.layers[i].has_parameters() && !plan_[i].frozen) {
      return i;
    }
  }
  return plan_.size();
}

std::size_t Network::frozen_prefix_end() const {
  std::size_t k = 0;
  while (k < plan_.size()) {
    const LayerSpec& s = params_.layers[k];
    const bool trainable = s.has_parameters() && !s.frozen;
    if (trainable || s.kind == LayerKind::kDropout) {
      break;
    }
    ++k;
  }
  return k;
}

double Network::backward(const ForwardCache& cache, const RMatrix& output, const RMatrix& targets,
                         RVector& grad) const {
  if (output.rows() != targets.rows() || output.cols() != targets.cols()) {
    throw std::invalid_argument("network: target shape does not match output");
  }
  if (cache.activations.size() != plan_.size() - cache.first_layer + 1) {
    throw std::invalid_argument("network: cache does not come from forward_train");
  }
  const auto batch = static_cast<double>(output.cols());
  const RMatrix diff = output - targets;
  const double loss = 0.5 * diff.squaredNorm() / batch;
  grad.setZero(params_.params.size());

  std::size_t lowest = plan_.size();
  for (std::size_t i = cache.first_layer; i < plan_.size(); ++i) {
    if (params_.layers[i].has_parameters() && !plan_[i].frozen) {
      lowest = i;
      break;
    }
  }
  if (lowest == plan_.size()) {
    return loss;
  }

  RMatrix d = diff / batch;
  for (std::size_t i = plan_.size(); i-- > lowest;) {
    const LayerPlan& p = plan_[i];
    const RMatrix& in = cache.activations[i - cache.first_layer];
    const RMatrix& out = cache.activations[i - cache.first_layer + 1];
    const bool need_dx = i > lowest;
    switch (p.kind) {
      case LayerKind::kFullyConnected:
      case LayerKind::kOutputRegression: {
        if (p.kind == LayerKind::kFullyConnected) {
          d = d.cwiseProduct((out.array() > 0.0).cast<double>().matrix());
        }
        const Eigen::Map<const RMatrix> weights(params_.params.data() + p.weight_offset,
                                                p.out_size, p.in_size);
        if (!p.frozen) {
          Eigen::Map<RMatrix> gw(grad.data() + p.weight_offset, p.out_size, p.in_size);
          Eigen::Map<RVector> gb(grad.data() + p.bias_offset, p.out_size);
          gw.noalias() = d * in.transpose();
          gb = d.rowwise().sum();
        }
        if (need_dx) {
          RMatrix dx = weights.transpose() * d;
          d = std::move(dx);
        }
        break;
      }
      case LayerKind::kConv: {
        d = d.cwiseProduct((out.array() > 0.0).cast<double>().matrix());
        const auto filters = p.out_channels;
        const Eigen::Index hw = static_cast<Eigen::Index>(p.in_rows) * p.in_cols;
        const Eigen::Index cols_per = hw * d.cols();
        const Eigen::Map<const RMatrix> dy(d.data(), filters, cols_per);
        const Eigen::Map<const RMatrix> weights(params_.params.data() + p.weight_offset, filters,
                                                9 * p.in_channels);
        const RMatrix& cols = cache.im2col[i];
        if (!p.frozen) {
          Eigen::Map<RMatrix> gw(grad.data() + p.weight_offset, filters, 9 * p.in_channels);
          Eigen::Map<RVector> gb(grad.data() + p.bias_offset, filters);
          gw.noalias() = dy * cols.transpose();
          gb = dy.rowwise().sum();
        }
        if (need_dx) {
          const RMatrix dcols = weights.transpose() * dy;
          RMatrix dx = RMatrix::Zero(p.in_size, d.cols());
          col2im_add(dcols, p, dx);
          d = std::move(dx);
        }
        break;
      }
      case LayerKind::kPool: {
        if (need_dx) {
          const Eigen::ArrayXi& arg = cache.pool_argmax[i];
          RMatrix dx = RMatrix::Zero(p.in_size, d.cols());
          for (Eigen::Index b = 0; b < d.cols(); ++b) {
            for (Eigen::Index o = 0; o < p.out_size; ++o) {
              dx(arg(b * p.out_size + o), b) += d(o, b);
            }
          }
          d = std::move(dx);
        }
        break;
      }
      case LayerKind::kDropout: {
        const RMatrix& mask = cache.dropout_masks[i];
        if (mask.size() != 0) {
          d = d.cwiseProduct(mask);
        }
        break;
      }
    }
  }
  return loss;
}

RVector forward(const NetworkParams& params, const Tensor3& x, const ForwardMode& mode) {
  const Network net(params);
  if (!mode.train) {
    return net.infer(x);
  }
  if (!(x.shape() == params.input)) {
    throw std::invalid_argument("forward: input tensor shape does not match the network");
  }
  ForwardCache cache;
  const RMatrix raw = x.data();
  return net.forward_train(net.prepare(raw), mode.seed, cache).col(0);
}

GradientSet backward(const NetworkParams& params, const Tensor3& x, const RVector& target,
                     const ForwardMode& mode) {
  const Network net(params);
  if (!(x.shape() == params.input)) {
    throw std::invalid_argument("backward: input tensor shape does not match the network");
  }
  if (target.size() != net.output_size()) {
    throw std::invalid_argument("backward: target length does not match the output layer");
  }
  ForwardCache cache;
  const RMatrix raw = x.data();
  RMatrix prepared = net.prepare(raw);
  RMatrix out;
  if (mode.train) {
    out = net.forward_train(prepared, mode.seed, cache);
  } else {
    // Dropout off: a training pass through a copy with every dropout disabled.
    NetworkParams no_drop = params;
    for (LayerSpec& s : no_drop.layers) {
      if (s.kind == LayerKind::kDropout) s.dropout_p = 0.0;
    }
    const Network plain(no_drop);
    out = plain.forward_train(prepared, 0, cache);
  }
  GradientSet g;
  const RMatrix t = target;
  g.loss = net.backward(cache, out, t, g.grad);
  return g;
}

}  // namespace hbf
