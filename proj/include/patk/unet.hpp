#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "patk/field.hpp"

namespace patk {

enum class HeadKind {
  conv3x3_relu,              // 3x3 convolution with bias, ReLU output
  conv1x1_nobias_leakyrelu,  // 1x1 convolution without bias, leaky ReLU
  conv1x1_nobias_linear,     // 1x1 convolution without bias, no activation
};

/// U-Net with len(channels) encoder stages. Each stage is
/// [conv3x3 -> instance norm -> ReLU] x 2; a 2x2 max pool follows every
/// stage but the last (the bottleneck). Each decoder stage upsamples with a
/// 2x2 stride-2 transposed convolution, concatenates the encoder skip and
/// applies two more conv/norm/ReLU blocks. The head maps to one channel.
struct UNetConfig {
  std::vector<int> channels{32, 64, 128, 256};
  int conv_kernel = 3;
  int pool = 2;
  HeadKind head = HeadKind::conv3x3_relu;
  double leaky_slope = 0.125;
  double norm_eps = 1e-5;
  std::uint64_t init_seed = 0;

  void validate() const;
  int pooling_stages() const { return static_cast<int>(channels.size()) - 1; }
};

struct ParamBlock {
  std::string name;
  std::size_t offset = 0;
  std::size_t size = 0;
  friend bool operator==(const ParamBlock&, const ParamBlock&) = default;
};

/// Flat parameter vector with named views (weights, biases, norm scale/shift).
struct NetworkParams {
  std::vector<double> values;
  std::vector<ParamBlock> blocks;

  std::size_t size() const { return values.size(); }
  const ParamBlock& block(std::string_view name) const;
  std::span<double> view(std::string_view name);
  std::span<const double> view(std::string_view name) const;

  friend bool operator==(const NetworkParams&, const NetworkParams&) = default;
};

/// Kaiming-normal (fan-in) kernels, uniform +-1/sqrt(fan_in) biases, unit
/// norm scale and zero shift, all from config.init_seed. Throws ConfigError
/// when the input sides are not divisible by 2^pooling_stages.
NetworkParams unet_init(const UNetConfig& config, std::size_t nx, std::size_t ny);

Image unet_forward(const NetworkParams& params, const UNetConfig& config, const Image& z);

struct UNetGradients {
  std::vector<double> params;
  Image input;
};

/// Reverse-mode gradients of <unet_forward(z), upstream> with respect to
/// every parameter and the input.
UNetGradients unet_vjp(const NetworkParams& params, const UNetConfig& config, const Image& z,
                       const Image& upstream);

/// Forward pass that keeps the activations needed for the pullback.
/// `params` and `config` must outlive the pass.
class UNetPass {
 public:
  UNetPass(const NetworkParams& params, const UNetConfig& config, const Image& z);
  ~UNetPass();
  UNetPass(const UNetPass&) = delete;
  UNetPass& operator=(const UNetPass&) = delete;

  const Image& output() const;
  UNetGradients vjp(const Image& upstream) const;

 private:
  struct Tape;
  const NetworkParams& params_;
  const UNetConfig& config_;
  std::unique_ptr<Tape> tape_;
};

}  // namespace patk
