#include "shapeinst/pointoutnet.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "shapeinst/errors.hpp"
#include "shapeinst/rng.hpp"
#include "shapeinst/serialize.hpp"

namespace shapeinst {

using nlohmann::json;

void validate_config(const NetworkConfig& config) {
  if (config.num_vertices == 0)
    throw std::invalid_argument("NetworkConfig: num_vertices must be positive");
  if (config.fc_widths.size() != 2)
    throw std::invalid_argument("NetworkConfig: fc_widths must have exactly 2 entries, got " +
                                std::to_string(config.fc_widths.size()));
  if (config.input_channels == 0 || config.base_channels == 0)
    throw std::invalid_argument("NetworkConfig: channel counts must be positive");
  if (config.kernel_size == 0)
    throw std::invalid_argument("NetworkConfig: kernel_size must be positive");
  if (config.num_downsamples < 0)
    throw std::invalid_argument("NetworkConfig: num_downsamples must be nonnegative");
  if (config.fc_widths[0] == 0 || config.fc_widths[1] == 0)
    throw std::invalid_argument("NetworkConfig: fc widths must be positive");
  std::size_t h = config.input_height, w = config.input_width;
  if (h == 0 || w == 0)
    throw std::invalid_argument("NetworkConfig: input extents must be positive");
  for (int s = 0; s < config.num_downsamples; ++s) {
    h /= 2;
    w /= 2;
    if (h == 0 || w == 0)
      throw std::invalid_argument(
          "NetworkConfig: spatial extent collapses to zero at downsampling stage " +
          std::to_string(s + 1) + " for input " + std::to_string(config.input_height) + "x" +
          std::to_string(config.input_width));
  }
}

std::vector<std::pair<std::size_t, std::size_t>> spatial_trace(const NetworkConfig& config) {
  validate_config(config);
  std::vector<std::pair<std::size_t, std::size_t>> trace;
  std::size_t h = config.input_height, w = config.input_width;
  trace.emplace_back(h, w);  // after the stem (stride 1)
  for (int s = 0; s < config.num_downsamples; ++s) {
    h /= 2;
    w /= 2;
    trace.emplace_back(h, w);
  }
  return trace;
}

std::vector<ConvLayerSpec> conv_schedule(const NetworkConfig& config) {
  std::vector<ConvLayerSpec> layers;
  layers.push_back({config.input_channels, config.base_channels, 1});
  std::size_t channels = config.base_channels;
  for (int s = 0; s < config.num_downsamples; ++s) {
    layers.push_back({channels, channels * 2, 2});
    channels *= 2;
    layers.push_back({channels, channels, 1});
    layers.push_back({channels, channels, 1});
  }
  return layers;
}

std::vector<DenseLayerSpec> dense_schedule(const NetworkConfig& config) {
  const auto trace = spatial_trace(config);
  const auto [h, w] = trace.back();
  const std::size_t channels =
      config.base_channels << static_cast<std::size_t>(config.num_downsamples);
  const std::size_t flat = h * w * channels;
  return {{flat, config.fc_widths[0]},
          {config.fc_widths[0], config.fc_widths[1]},
          {config.fc_widths[1], config.num_vertices * 3}};
}

std::size_t ModelParams::conv_layer_count() const { return config.conv_layer_count(); }
std::size_t ModelParams::dense_layer_count() const { return NetworkConfig::dense_layer_count(); }

const Tensor& ModelParams::conv_kernel(std::size_t layer) const {
  return tensors.at(2 * layer);
}
const Tensor& ModelParams::conv_bias(std::size_t layer) const {
  return tensors.at(2 * layer + 1);
}
const Tensor& ModelParams::dense_weight(std::size_t layer) const {
  return tensors.at(2 * conv_layer_count() + 2 * layer);
}
const Tensor& ModelParams::dense_bias(std::size_t layer) const {
  return tensors.at(2 * conv_layer_count() + 2 * layer + 1);
}

std::vector<Tensor> ModelParams::weight_tensors() const {
  std::vector<Tensor> out;
  out.reserve(tensors.size() / 2);
  for (std::size_t i = 0; i < tensors.size(); i += 2) out.push_back(tensors[i]);
  return out;
}

std::vector<Tensor> ModelParams::regularized_tensors() const {
  if (config.regularize_biases) return tensors;
  return weight_tensors();
}

void ModelParams::zero_grads() {
  for (Tensor& t : tensors) t.zero_grad();
}

namespace {

ModelParams build_with(const NetworkConfig& config,
                       const std::function<Tensor(Shape, std::size_t fan_in)>& make_weight) {
  validate_config(config);
  ModelParams params;
  params.config = config;
  const std::size_t k = config.kernel_size;
  for (const ConvLayerSpec& layer : conv_schedule(config)) {
    const std::size_t fan_in = layer.in_channels * k * k;
    params.tensors.push_back(
        make_weight(Shape{layer.in_channels, k, k, layer.out_channels}, fan_in));
    params.tensors.push_back(Tensor::zeros(Shape{layer.out_channels}, true));
  }
  for (const DenseLayerSpec& layer : dense_schedule(config)) {
    params.tensors.push_back(make_weight(Shape{layer.in_width, layer.out_width}, layer.in_width));
    params.tensors.push_back(Tensor::zeros(Shape{layer.out_width}, true));
  }
  return params;
}

}  // namespace

ModelParams build(const NetworkConfig& config, std::uint64_t seed) {
  std::mt19937_64 rng(derive_seed(seed, "init"));
  return build_with(config, [&rng](Shape shape, std::size_t fan_in) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
    std::vector<double> values(shape_numel(shape));
    for (double& v : values) v = uniform_in(rng, -limit, limit);
    return Tensor::from_data(std::move(shape), std::move(values), true);
  });
}

ModelParams build_zeroed(const NetworkConfig& config) {
  return build_with(config,
                    [](Shape shape, std::size_t) { return Tensor::zeros(std::move(shape), true); });
}

Tensor forward_tensor(const ModelParams& params, const Tensor& image) {
  const NetworkConfig& config = params.config;
  const Shape expected{1, config.input_height, config.input_width, config.input_channels};
  if (image.shape() != expected)
    throw std::invalid_argument("forward: image shape " + shape_to_string(image.shape()) +
                                " does not match the network input " +
                                shape_to_string(expected));

  Tensor x = image;
  const auto convs = conv_schedule(config);
  for (std::size_t i = 0; i < convs.size(); ++i)
    x = relu(conv2d(x, params.conv_kernel(i), params.conv_bias(i), convs[i].stride));

  x = reshape(x, Shape{1, x.size()});
  x = relu(dense(x, params.dense_weight(0), params.dense_bias(0)));
  x = relu(dense(x, params.dense_weight(1), params.dense_bias(1)));
  x = dense(x, params.dense_weight(2), params.dense_bias(2));  // linear output
  return reshape(x, Shape{config.num_vertices, 3});
}

PointCloud forward(const ModelParams& params, const Tensor& image) {
  for (double v : image.data())
    if (!std::isfinite(v))
      throw std::invalid_argument("forward: non-finite value in input image");
  return cloud_from_tensor(forward_tensor(params, image));
}

Tensor regularization_loss(const ModelParams& params) {
  const std::vector<Tensor> regs = params.regularized_tensors();
  return l2_penalty(regs, params.config.l2_weight);
}

void save_checkpoint(const ModelParams& params, const std::filesystem::path& stem) {
  save_tensors(stem.string() + ".params", params.tensors);
  json meta = {{"inputHeight", params.config.input_height},
               {"inputWidth", params.config.input_width},
               {"inputChannels", params.config.input_channels},
               {"baseChannels", params.config.base_channels},
               {"numDownsamples", params.config.num_downsamples},
               {"kernelSize", params.config.kernel_size},
               {"numY", params.config.num_vertices},
               {"l2Weight", params.config.l2_weight},
               {"fcWidths", params.config.fc_widths},
               {"regularizeBiases", params.config.regularize_biases}};
  std::ofstream out(stem.string() + ".json", std::ios::trunc);
  if (!out) throw DataError("cannot open for writing: " + stem.string() + ".json");
  out << meta.dump(2) << '\n';
}

ModelParams load_checkpoint(const std::filesystem::path& stem) {
  std::ifstream in(stem.string() + ".json");
  if (!in) throw DataError("cannot open checkpoint config: " + stem.string() + ".json");
  json meta;
  try {
    in >> meta;
  } catch (const json::parse_error& e) {
    throw DataError("malformed checkpoint config " + stem.string() + ".json: " + e.what());
  }
  NetworkConfig config;
  try {
    config.input_height = meta.at("inputHeight").get<std::size_t>();
    config.input_width = meta.at("inputWidth").get<std::size_t>();
    config.input_channels = meta.at("inputChannels").get<std::size_t>();
    config.base_channels = meta.at("baseChannels").get<std::size_t>();
    config.num_downsamples = meta.at("numDownsamples").get<int>();
    config.kernel_size = meta.at("kernelSize").get<std::size_t>();
    config.num_vertices = meta.at("numY").get<std::size_t>();
    config.l2_weight = meta.at("l2Weight").get<double>();
    config.fc_widths = meta.at("fcWidths").get<std::vector<std::size_t>>();
    config.regularize_biases = meta.at("regularizeBiases").get<bool>();
  } catch (const json::exception& e) {
    throw DataError("checkpoint config missing fields (" + std::string(e.what()) + "): " +
                    stem.string() + ".json");
  }
  validate_config(config);

  ModelParams params;
  params.config = config;
  params.tensors = load_tensors(stem.string() + ".params");

  // Cross-check the tensor list against the schedule.
  ModelParams expected = build_zeroed(config);
  if (params.tensors.size() != expected.tensors.size())
    throw DataError("checkpoint holds " + std::to_string(params.tensors.size()) +
                    " tensors but the configuration needs " +
                    std::to_string(expected.tensors.size()) + ": " + stem.string());
  for (std::size_t i = 0; i < params.tensors.size(); ++i)
    if (params.tensors[i].shape() != expected.tensors[i].shape())
      throw DataError("checkpoint tensor " + std::to_string(i) + " has shape " +
                      shape_to_string(params.tensors[i].shape()) + ", expected " +
                      shape_to_string(expected.tensors[i].shape()) + ": " + stem.string());
  return params;
}

}  // namespace shapeinst
