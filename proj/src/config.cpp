#include "stegowav/config.hpp"

#include <charconv>
#include <sstream>

namespace stegowav {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const char* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) throw ConfigError("invalid value '" + value + "' for key '" + key + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw ConfigError("invalid boolean '" + value + "' for key '" + key + "'");
}

std::string format(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

}  // namespace

std::string to_string(Profile p) { return p == Profile::desk ? "desk" : "paper"; }

PipelineConfig PipelineConfig::for_profile(Profile p) {
  PipelineConfig c;
  c.profile = p;
  if (p == Profile::paper) {
    c.image_size = 256;
    c.sample_rate = 44100;
    c.lr = 1e-3;
    c.batch_size = 4;
  }
  return c;
}

EmbeddingContext PipelineConfig::context() const {
  return EmbeddingContext::make(method, image_size, image_size, large);
}

StftConfig PipelineConfig::stft() const {
  const EmbeddingContext ctx = context();
  const Index n = transform == TransformKind::stft ? 2 * ctx.container_h : ctx.container_h;
  Index r = hop;
  if (r == 0) {
    const Index divisor = profile == Profile::desk ? (large ? 16 : 4) : (large ? 64 : 16);
    r = std::max<Index>(1, n / divisor);
  }
  return StftConfig{frame_length == 0 ? n : frame_length, r};
}

Index PipelineConfig::cover_length() const { return stft().span(context().container_w); }

void PipelineConfig::validate() const {
  loss.validate();
  if (unet_depth < 1) throw ConfigError("unet_depth must be at least 1");
  if (unet_channels < 1) throw ConfigError("unet_channels must be positive");
  if (unet_kernel < 1 || unet_kernel % 2 == 0) throw ConfigError("unet_kernel must be odd and positive");
  const Index unit = Index(1) << unet_depth;
  if (image_size < 2 || image_size % unit) {
    throw ConfigError("image_size " + std::to_string(image_size) + " must be divisible by 2^unet_depth = " +
                      std::to_string(unit));
  }
  if (sample_rate <= 0) throw ConfigError("sample_rate must be positive");
  if (transform == TransformKind::stdct && loss.container != ContainerKind::magnitude) {
    throw ConfigError("the stdct transform has no phase plane; container must be magnitude");
  }
  const EmbeddingContext ctx = context();
  const StftConfig cfg = stft();
  cfg.validate();
  if (cfg.bins(transform) != ctx.container_h) {
    throw ConfigError("frame_length " + std::to_string(cfg.frame_length) + " gives " +
                      std::to_string(cfg.bins(transform)) + " bins, container needs " +
                      std::to_string(ctx.container_h));
  }
  if (!(lr >= 0)) throw ConfigError("lr must be non-negative");
  if (!(adam_beta1 >= 0 && adam_beta1 < 1 && adam_beta2 >= 0 && adam_beta2 < 1)) {
    throw ConfigError("adam betas must lie in [0, 1)");
  }
  if (!(adam_eps > 0)) throw ConfigError("adam_eps must be positive");
  if (steps < 0) throw ConfigError("steps must be non-negative");
  if (batch_size < 1) throw ConfigError("batch_size must be positive");
}

void PipelineConfig::set(const std::string& key, const std::string& value) {
  if (key == "profile") {
    Profile p;
    if (value == "desk") p = Profile::desk;
    else if (value == "paper") p = Profile::paper;
    else throw ConfigError("unknown profile '" + value + "' (expected desk or paper)");
    const PipelineConfig d = for_profile(p);
    profile = p;
    image_size = d.image_size;
    sample_rate = d.sample_rate;
    lr = d.lr;
    batch_size = d.batch_size;
  } else if (key == "image_size") {
    image_size = parse_number<Index>(key, value);
  } else if (key == "sample_rate") {
    sample_rate = parse_number<int>(key, value);
  } else if (key == "frame_length") {
    frame_length = parse_number<Index>(key, value);
  } else if (key == "hop") {
    hop = parse_number<Index>(key, value);
  } else if (key == "transform") {
    if (value == "stft") transform = TransformKind::stft;
    else if (value == "stdct") transform = TransformKind::stdct;
    else throw ConfigError("unknown transform '" + value + "' (expected stft or stdct)");
  } else if (key == "method") {
    method = parse_method(value);
  } else if (key == "container") {
    loss.container = parse_container(value);
  } else if (key == "large") {
    large = parse_bool(key, value);
  } else if (key == "luma") {
    luma = parse_bool(key, value);
  } else if (key == "beta") {
    loss.beta = parse_number<double>(key, value);
  } else if (key == "lambda") {
    loss.lambda = parse_number<double>(key, value);
  } else if (key == "theta") {
    loss.theta = parse_number<double>(key, value);
  } else if (key == "gamma") {
    loss.gamma = parse_number<double>(key, value);
  } else if (key == "wave_loss") {
    loss.wave = parse_wave_loss(value);
  } else if (key == "lr") {
    lr = parse_number<double>(key, value);
  } else if (key == "adam_beta1") {
    adam_beta1 = parse_number<double>(key, value);
  } else if (key == "adam_beta2") {
    adam_beta2 = parse_number<double>(key, value);
  } else if (key == "adam_eps") {
    adam_eps = parse_number<double>(key, value);
  } else if (key == "steps") {
    steps = parse_number<int>(key, value);
  } else if (key == "batch_size") {
    batch_size = parse_number<int>(key, value);
  } else if (key == "seed") {
    seed = parse_number<std::uint64_t>(key, value);
  } else if (key == "unet_depth") {
    unet_depth = parse_number<Index>(key, value);
  } else if (key == "unet_channels") {
    unet_channels = parse_number<Index>(key, value);
  } else if (key == "unet_kernel") {
    unet_kernel = parse_number<Index>(key, value);
  } else {
    throw ConfigError("unknown config key '" + key + "'");
  }
}

std::string PipelineConfig::to_text() const {
  std::ostringstream o;
  o << "profile=" << to_string(profile) << "\n"
    << "image_size=" << image_size << "\n"
    << "sample_rate=" << sample_rate << "\n"
    << "frame_length=" << frame_length << "\n"
    << "hop=" << hop << "\n"
    << "transform=" << to_string(transform) << "\n"
    << "method=" << to_string(method) << "\n"
    << "container=" << to_string(loss.container) << "\n"
    << "large=" << (large ? "true" : "false") << "\n"
    << "luma=" << (luma ? "true" : "false") << "\n"
    << "beta=" << format(loss.beta) << "\n"
    << "lambda=" << format(loss.lambda) << "\n"
    << "theta=" << format(loss.theta) << "\n"
    << "gamma=" << format(loss.gamma) << "\n"
    << "wave_loss=" << to_string(loss.wave) << "\n"
    << "lr=" << format(lr) << "\n"
    << "adam_beta1=" << format(adam_beta1) << "\n"
    << "adam_beta2=" << format(adam_beta2) << "\n"
    << "adam_eps=" << format(adam_eps) << "\n"
    << "steps=" << steps << "\n"
    << "batch_size=" << batch_size << "\n"
    << "seed=" << seed << "\n"
    << "unet_depth=" << unet_depth << "\n"
    << "unet_channels=" << unet_channels << "\n"
    << "unet_kernel=" << unet_kernel << "\n";
  return o.str();
}

PipelineConfig parse_config(const std::string& text, PipelineConfig base) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(lineno) + ": expected key=value, got '" + line + "'");
    }
    try {
      base.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return base;
}

}  // namespace stegowav
