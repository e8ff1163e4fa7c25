#include "stegowav/networks.hpp"

#include <cmath>
#include <numbers>

namespace stegowav {

void UNetConfig::validate() const {
  if (depth < 1) throw ConfigError("unet depth must be at least 1");
  if (base_channels < 1 || in_depth < 1 || out_depth < 1) throw ConfigError("unet channel counts must be positive");
  if (kernel < 1 || kernel % 2 == 0) throw ConfigError("unet kernel must be odd, got " + std::to_string(kernel));
}

void UNetConfig::check_input(Index height, Index width) const {
  const Index unit = Index(1) << depth;
  if (height % unit || width % unit) {
    throw ConfigError("unet input " + std::to_string(height) + "x" + std::to_string(width) +
                      " is not divisible by 2^" + std::to_string(depth));
  }
}

double standard_normal(std::mt19937_64& rng) {
  auto unit = [&] { return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53; };
  const double u1 = unit(), u2 = unit();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

namespace {

struct ConvSpec {
  std::string name;
  Index in, out, kernel;
};

std::vector<ConvSpec> unet_convs(const UNetConfig& c) {
  std::vector<ConvSpec> convs;
  Index in = c.in_depth;
  for (Index i = 0; i < c.depth; ++i) {
    const Index out = c.base_channels << i;
    convs.push_back({"down" + std::to_string(i), in, out, c.kernel});
    in = out;
  }
  convs.push_back({"mid", in, c.base_channels << c.depth, c.kernel});
  for (Index i = c.depth - 1; i >= 0; --i) {
    const Index below = c.base_channels << (i + 1), skip = c.base_channels << i;
    convs.push_back({"up" + std::to_string(i), below + skip, skip, c.kernel});
  }
  convs.push_back({"out", c.base_channels, c.out_depth, 1});
  return convs;
}

}  // namespace

void append_unet_parameters(ParameterList& params, const UNetConfig& cfg, const std::string& prefix,
                            std::mt19937_64& rng) {
  cfg.validate();
  for (const ConvSpec& conv : unet_convs(cfg)) {
    Tensor w = Tensor::zeros({conv.out, conv.in, conv.kernel, conv.kernel});
    const double sd = std::sqrt(2.0 / static_cast<double>(conv.in * conv.kernel * conv.kernel));
    for (Index i = 0; i < w.size(); ++i) w[i] = sd * standard_normal(rng);
    params.push_back({prefix + "." + conv.name + ".w", std::move(w)});
    params.push_back({prefix + "." + conv.name + ".b", Tensor::zeros({conv.out})});
  }
}

Index unet_param_count(const UNetConfig& cfg) {
  Index n = 0;
  for (const ConvSpec& conv : unet_convs(cfg)) n += conv.out * conv.in * conv.kernel * conv.kernel + conv.out;
  return n;
}

long long unet_macs(const UNetConfig& cfg, Index height, Index width) {
  cfg.check_input(height, width);
  long long macs = 0;
  auto conv = [&](Index h, Index w, Index in, Index out, Index k) { macs += h * w * out * in * k * k; };
  Index h = height, w = width, in = cfg.in_depth;
  for (Index i = 0; i < cfg.depth; ++i) {
    const Index out = cfg.base_channels << i;
    conv(h, w, in, out, cfg.kernel);
    macs += h * w * out;              // leaky_relu
    macs += (h / 2) * (w / 2) * out;  // mean_pool2
    h /= 2;
    w /= 2;
    in = out;
  }
  const Index mid = cfg.base_channels << cfg.depth;
  conv(h, w, in, mid, cfg.kernel);
  macs += h * w * mid;
  in = mid;
  for (Index i = cfg.depth - 1; i >= 0; --i) {
    h *= 2;
    w *= 2;
    const Index skip = cfg.base_channels << i;
    macs += h * w * in;           // nearest_upsample2
    macs += h * w * (in + skip);  // concat
    conv(h, w, in + skip, skip, cfg.kernel);
    macs += h * w * skip;
    in = skip;
  }
  conv(h, w, in, cfg.out_depth, 1);
  return macs;
}

Bindings::Bindings(Tape& tape, const ParameterList& params, bool requires_grad) {
  for (const Parameter& p : params) {
    index_[p.name] = vars_.size();
    vars_.push_back(tape.leaf(p.value, requires_grad));
  }
}

Var Bindings::operator[](const std::string& name) const {
  const auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("no parameter named '" + name + "'");
  return vars_[it->second];
}

Var unet_forward(const UNetConfig& cfg, const Bindings& params, const std::string& prefix, Var x) {
  detail::require_rank("unet_forward", x, 3);
  if (x.shape()[0] != cfg.in_depth) {
    throw ConfigError("unet '" + prefix + "' expects depth " + std::to_string(cfg.in_depth) + ", got " +
                      shape_string(x.shape()));
  }
  cfg.check_input(x.shape()[1], x.shape()[2]);
  auto conv = [&](const std::string& name, Var in) {
    return conv2d(in, params[prefix + "." + name + ".w"], params[prefix + "." + name + ".b"]);
  };
  std::vector<Var> skips;
  Var h = x;
  for (Index i = 0; i < cfg.depth; ++i) {
    h = leaky_relu(conv("down" + std::to_string(i), h));
    skips.push_back(h);
    h = mean_pool2(h);
  }
  h = leaky_relu(conv("mid", h));
  for (Index i = cfg.depth - 1; i >= 0; --i) {
    h = concat_depth<double>({nearest_upsample2(h), skips[i]});
    h = leaky_relu(conv("up" + std::to_string(i), h));
  }
  return conv("out", h);
}

Var couple(Var a, Var b, Var coupling) {
  detail::require_same_shape("couple", a, b);
  if (coupling.shape() != Shape{3}) throw ConfigError("coupling expects [3] weights, got " + shape_string(coupling.shape()));
  Var mixed = weighted_sum<double>({a, b}, {slice(coupling, 0, 0, 1), slice(coupling, 0, 1, 2)});
  return shift(mixed, slice(coupling, 0, 2, 3));
}

// ---------------------------------------------------------------------------

UNetConfig ModelBundle::hide_config() const {
  const EmbeddingContext ctx = context();
  return {config.unet_depth, config.unet_channels, config.unet_kernel, ctx.secret_input_shape()[0],
          ctx.watermark_shape()[0]};
}

UNetConfig ModelBundle::reveal_config() const {
  const EmbeddingContext ctx = context();
  return {config.unet_depth, config.unet_channels, config.unet_kernel, ctx.reveal_input_shape()[0],
          ctx.reveal_output_shape()[0]};
}

ModelBundle ModelBundle::create(const PipelineConfig& config) {
  config.validate();
  ModelBundle m;
  m.config = config;
  std::mt19937_64 rng(config.seed);
  append_unet_parameters(m.params, m.hide_config(), "hide", rng);
  append_unet_parameters(m.params, m.reveal_config(), "reveal", rng);
  if (m.dual()) {
    append_unet_parameters(m.params, m.hide_config(), "hide_phase", rng);
    append_unet_parameters(m.params, m.reveal_config(), "reveal_phase", rng);
    m.params.push_back({"coupling", Tensor({3}, (Tensor::Array(3) << 0.5, 0.5, 0.0).finished())});
  }
  const EmbeddingContext ctx = m.context();
  if (ctx.enc_weight_count()) m.params.push_back({"ctx.enc_weights", Tensor::filled({ctx.enc_weight_count()}, 1.0)});
  if (ctx.dec_weight_count()) m.params.push_back({"ctx.dec_weights", Tensor::filled({ctx.dec_weight_count()}, 1.0)});
  return m;
}

Index ModelBundle::param_count() const {
  Index n = 0;
  for (const Parameter& p : params) n += p.value.size();
  return n;
}

const Parameter& ModelBundle::find(const std::string& name) const {
  for (const Parameter& p : params)
    if (p.name == name) return p;
  throw ConfigError("no parameter named '" + name + "'");
}

Parameter& ModelBundle::find(const std::string& name) {
  return const_cast<Parameter&>(static_cast<const ModelBundle&>(*this).find(name));
}

Index param_count(const PipelineConfig& config) {
  ModelBundle shape;
  shape.config = config;
  const EmbeddingContext ctx = config.context();
  const Index nets = unet_param_count(shape.hide_config()) + unet_param_count(shape.reveal_config());
  const bool dual = config.loss.container == ContainerKind::dual;
  return (dual ? 2 * nets + 3 : nets) + ctx.enc_weight_count() + ctx.dec_weight_count();
}

}  // namespace stegowav
