#pragma once

#include "hbf/rng.hpp"
#include "hbf/tensor.hpp"
#include "hbf/types.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace hbf {

enum class LayerKind : std::uint32_t {
  kConv = 0,             // 3x3, same padding, stride 1, ReLU
  kPool = 1,             // 2x2 max pooling, stride 2
  kFullyConnected = 2,   // affine + ReLU
  kDropout = 3,
  kOutputRegression = 4  // affine, identity activation, MSE loss
};

enum class NetRole : std::uint32_t { kCovNet = 0, kChannelNet = 1, kBfNet = 2, kCustom = 3 };

std::string to_string(NetRole role);
NetRole net_role_from_string(const std::string& name);

struct LayerSpec {
  LayerKind kind = LayerKind::kConv;
  int size = 0;  // filters (conv) or units (fc/output); unused otherwise
  bool frozen = false;
  double dropout_p = 0.5;

  bool has_parameters() const {
    return kind == LayerKind::kConv || kind == LayerKind::kFullyConnected ||
           kind == LayerKind::kOutputRegression;
  }
  bool operator==(const LayerSpec&) const = default;
};

struct NetworkParams {
  NetRole role = NetRole::kCustom;
  InputShape input;
  std::vector<LayerSpec> layers;
  RVector params;      // all weights and biases, layer by layer
  RVector input_mean;  // per input channel
  RVector input_std;   // per input channel

  int output_size() const;
};

struct ArchitectureOptions {
  int conv_filters = 0;
  std::vector<int> fc_units;
  double dropout_p = 0.5;
};

/// Paper-scale widths, or the reduced desk-scale preset.
ArchitectureOptions default_architecture(NetRole role, bool desk_scale);

/// Layer list for a role: CovNet/BFNet use conv-pool-conv-pool-conv, ChannelNet
/// three unpooled convs, each followed by its FC stack with dropout and the
/// regression output.
std::vector<LayerSpec> role_layers(NetRole role, int output_size, const ArchitectureOptions& arch);

/// He-uniform weights (fan-in), zero biases, identity standardization.
NetworkParams make_network(NetRole role, InputShape input, int output_size,
                           const ArchitectureOptions& arch, std::uint64_t seed);
NetworkParams make_network(NetRole role, InputShape input, std::vector<LayerSpec> layers,
                           std::uint64_t seed);

/// Parameter-block location of one layer inside NetworkParams::params.
struct LayerPlan {
  LayerKind kind = LayerKind::kConv;
  int in_rows = 0, in_cols = 0, in_channels = 0;
  int out_rows = 0, out_cols = 0, out_channels = 0;
  Eigen::Index in_size = 0;
  Eigen::Index out_size = 0;
  Eigen::Index weight_offset = 0;
  Eigen::Index weight_count = 0;
  Eigen::Index bias_offset = 0;
  Eigen::Index bias_count = 0;
  bool frozen = false;
  double dropout_p = 0.0;
};

/// Per-layer shapes and parameter offsets. Validates the spec.
std::vector<LayerPlan> plan_layers(const InputShape& input, const std::vector<LayerSpec>& layers);
Eigen::Index parameter_count(const std::vector<LayerPlan>& plan);

/// Intermediate values kept by a training-mode forward pass.
struct ForwardCache {
  std::size_t first_layer = 0;
  std::vector<RMatrix> activations;         // activations[i] feeds layer first_layer + i
  std::vector<RMatrix> im2col;              // per layer; empty unless conv
  std::vector<Eigen::ArrayXi> pool_argmax;  // per layer; empty unless pool
  std::vector<RMatrix> dropout_masks;       // per layer; empty unless dropout
};

/// Feed-forward engine over NetworkParams. Batched values are matrices with
/// one sample per column. "Prepared" inputs are standardized and laid out
/// position-major (HWC), which is the internal activation layout.
class Network {
 public:
  explicit Network(NetworkParams params);

  const NetworkParams& params() const { return params_; }
  NetworkParams& mutable_params() { return params_; }
  const std::vector<LayerPlan>& plan() const { return plan_; }
  int output_size() const;

  /// Raw Tensor3-layout columns -> standardized HWC columns.
  RMatrix prepare(const RMatrix& raw) const;

  /// Inference (dropout off) starting at layer `from`; `x` is the input of that layer.
  RMatrix infer(const RMatrix& x, std::size_t from = 0) const;
  RVector infer(const Tensor3& x) const;
  /// Inference through layers [from, to).
  RMatrix infer_range(const RMatrix& x, std::size_t from, std::size_t to) const;

  /// Training-mode pass with inverted dropout seeded by `seed`.
  RMatrix forward_train(const RMatrix& x, std::uint64_t seed, ForwardCache& cache,
                        std::size_t from = 0) const;

  /// Gradient of the batch-mean of 0.5 ||y - t||^2 with respect to every
  /// parameter; frozen blocks stay exactly zero. Returns the loss.
  double backward(const ForwardCache& cache, const RMatrix& output, const RMatrix& targets,
                  RVector& grad) const;

  /// Index of the first layer with trainable parameters (layer_count if none).
  std::size_t first_trainable_layer() const;
  /// Largest k such that layers [0, k) are deterministic and hold no trainable parameters.
  std::size_t frozen_prefix_end() const;

 private:
  RMatrix run_layer(std::size_t i, const RMatrix& x, bool train, Stream* rng,
                    ForwardCache* cache) const;

  NetworkParams params_;
  std::vector<LayerPlan> plan_;
};

struct ForwardMode {
  bool train = false;
  std::uint64_t seed = 0;  // dropout masks; ignored for inference
};

/// Single-sample helpers on raw tensors.
RVector forward(const NetworkParams& params, const Tensor3& x, const ForwardMode& mode = {});

struct GradientSet {
  double loss = 0.0;
  RVector grad;  // same layout as NetworkParams::params
};
GradientSet backward(const NetworkParams& params, const Tensor3& x, const RVector& target,
                     const ForwardMode& mode = {});

/// Marks every conv layer frozen (fine-tuning keeps only the dense head trainable).
void freeze_conv_layers(NetworkParams& params);

}  // namespace hbf
