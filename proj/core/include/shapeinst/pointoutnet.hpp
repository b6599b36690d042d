#pragma once

#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include "shapeinst/geometry.hpp"
#include "shapeinst/tensor.hpp"

namespace shapeinst {

/// PointOutNet layout. The encoding part is one stem convolution followed
/// by num_downsamples stages, each a stride-2 convolution that doubles the
/// channel count plus two stride-1 convolutions at that width; every
/// convolution is followed by ReLU. The prediction part is three
/// fully-connected layers (the two fc_widths entries, then num_vertices*3
/// with a linear output). The default configuration yields 19 convolutions
/// with channels 16..1024 and a 192x256 -> 3x4 spatial trace.
struct NetworkConfig {
  std::size_t input_height = 192;
  std::size_t input_width = 256;
  std::size_t input_channels = 1;
  std::size_t base_channels = 16;
  int num_downsamples = 6;
  std::size_t kernel_size = 3;
  std::size_t num_vertices = 0;  // numY; required, per subject
  double l2_weight = 1e-5;
  std::vector<std::size_t> fc_widths = {2048, 1024};
  bool regularize_biases = false;

  std::size_t conv_layer_count() const {
    return 1 + 3 * static_cast<std::size_t>(num_downsamples);
  }
  static constexpr std::size_t dense_layer_count() { return 3; }
};

/// Rejects invalid configurations (fc_widths must have exactly 2 entries,
/// the spatial trace must stay nonempty, ...).
void validate_config(const NetworkConfig& config);

/// Spatial extents after the stem and after each downsampling stage.
std::vector<std::pair<std::size_t, std::size_t>> spatial_trace(const NetworkConfig& config);

struct ConvLayerSpec {
  std::size_t in_channels, out_channels;
  int stride;
};
struct DenseLayerSpec {
  std::size_t in_width, out_width;
};

std::vector<ConvLayerSpec> conv_schedule(const NetworkConfig& config);
std::vector<DenseLayerSpec> dense_schedule(const NetworkConfig& config);

/// Full parameter set in a fixed serialization order: for each convolution
/// (kernel, bias) in network order, then for each fully-connected layer
/// (weight, bias).
struct ModelParams {
  NetworkConfig config;
  std::vector<Tensor> tensors;

  std::size_t conv_layer_count() const;
  std::size_t dense_layer_count() const;
  const Tensor& conv_kernel(std::size_t layer) const;
  const Tensor& conv_bias(std::size_t layer) const;
  const Tensor& dense_weight(std::size_t layer) const;
  const Tensor& dense_bias(std::size_t layer) const;

  /// Kernels and weights only (the L2-regularized subset by default).
  std::vector<Tensor> weight_tensors() const;
  std::vector<Tensor> regularized_tensors() const;

  void zero_grads();
};

/// Builds seeded parameters: fan-in-scaled uniform weights, zero biases.
/// Deterministic per (config, seed).
ModelParams build(const NetworkConfig& config, std::uint64_t seed);

/// Same layout with all parameters zero (useful for tests).
ModelParams build_zeroed(const NetworkConfig& config);

/// Runs the network on a [1,H,W,C] image, keeping the autodiff graph. The
/// result is the final fully-connected output reshaped to [numY,3].
Tensor forward_tensor(const ModelParams& params, const Tensor& image);

/// Inference entry point: rejects non-finite input, returns the cloud.
PointCloud forward(const ModelParams& params, const Tensor& image);

/// l2_weight * sum of squared entries over the regularized parameters.
Tensor regularization_loss(const ModelParams& params);

/// Writes <stem>.params (tensor file) and <stem>.json (the NetworkConfig,
/// so a checkpoint is self-describing).
void save_checkpoint(const ModelParams& params, const std::filesystem::path& stem);
ModelParams load_checkpoint(const std::filesystem::path& stem);

}  // namespace shapeinst
