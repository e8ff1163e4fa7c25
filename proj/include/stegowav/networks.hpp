#pragma once

// U-Net hiding/revealing networks, the dual-container coupling and the
// parameter bundle that ties a configuration to its weights.

#include <map>
#include <random>
#include <string>
#include <vector>

#include "stegowav/autodiff.hpp"
#include "stegowav/config.hpp"

namespace stegowav {

struct UNetConfig {
  Index depth = 2;
  Index base_channels = 8;
  Index kernel = 3;
  Index in_depth = 1;
  Index out_depth = 1;

  void validate() const;
  /// Throws unless both extents are divisible by 2^depth.
  void check_input(Index height, Index width) const;
};

struct Parameter {
  std::string name;
  Tensor value;
};
using ParameterList = std::vector<Parameter>;

/// Standard normal draws from raw engine bits (Box–Muller), identical on
/// every standard library.
double standard_normal(std::mt19937_64& rng);

/// Appends the U-Net's weights under `prefix` with He initialisation
/// (variance 2/fan_in) and zero biases.
void append_unet_parameters(ParameterList& params, const UNetConfig& cfg, const std::string& prefix,
                            std::mt19937_64& rng);
Index unet_param_count(const UNetConfig& cfg);
/// Conv MACs plus one per output element of every other materialised tensor.
long long unet_macs(const UNetConfig& cfg, Index height, Index width);

/// Parameters placed on a tape, looked up by name.
class Bindings {
 public:
  Bindings() = default;
  Bindings(Tape& tape, const ParameterList& params, bool requires_grad);

  Var operator[](const std::string& name) const;
  bool contains(const std::string& name) const { return index_.count(name) > 0; }
  /// Handles in parameter order.
  const std::vector<Var>& vars() const { return vars_; }

 private:
  std::vector<Var> vars_;
  std::map<std::string, std::size_t> index_;
};

/// D down blocks (conv, leaky_relu, mean_pool2), a bottleneck conv, D up
/// blocks (upsample, concat skip, conv, leaky_relu) and a final linear 1×1 conv.
Var unet_forward(const UNetConfig& cfg, const Bindings& params, const std::string& prefix, Var x);

/// w1·a + w2·b + bias, with coupling = [w1, w2, bias].
Var couple(Var a, Var b, Var coupling);

/// Weights and architecture for one pipeline configuration.
struct ModelBundle {
  PipelineConfig config;
  ParameterList params;

  /// Fresh, seeded initialisation.
  static ModelBundle create(const PipelineConfig& config);

  bool dual() const { return config.loss.container == ContainerKind::dual; }
  EmbeddingContext context() const { return config.context(); }
  UNetConfig hide_config() const;
  UNetConfig reveal_config() const;

  Index param_count() const;
  const Parameter& find(const std::string& name) const;
  Parameter& find(const std::string& name);
};

/// Parameter count implied by a configuration, without building weights.
Index param_count(const PipelineConfig& config);

}  // namespace stegowav
