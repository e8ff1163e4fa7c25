#pragma once

// Pipeline configuration and its flat key=value text form.

#include <cstdint>
#include <map>
#include <string>

#include "stegowav/dsp.hpp"
#include "stegowav/embeddings.hpp"
#include "stegowav/losses.hpp"

namespace stegowav {

enum class Profile { desk, paper };

std::string to_string(Profile p);

struct PipelineConfig {
  Profile profile = Profile::desk;
  Index image_size = 16;  ///< secret images are image_size × image_size
  int sample_rate = 16000;
  Index frame_length = 0;  ///< 0 derives N from the container height
  Index hop = 0;           ///< 0 derives the hop from the profile

  TransformKind transform = TransformKind::stft;
  EmbeddingMethod method = EmbeddingMethod::replicate;
  bool large = false;
  bool luma = true;
  LossConfig loss;

  double lr = 5e-3;  ///< desk default; the paper profile uses 1e-3
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  int steps = 300;
  int batch_size = 8;  ///< desk default; the paper profile uses 4
  std::uint64_t seed = 0;

  Index unet_depth = 2;
  Index unet_channels = 8;
  Index unet_kernel = 3;

  /// Profile defaults for image size, sample rate, learning rate and batch size.
  static PipelineConfig for_profile(Profile p);

  void validate() const;
  EmbeddingContext context() const;
  /// Resolved transform configuration (frame length, hop).
  StftConfig stft() const;
  /// Samples a cover needs to fill the container's frame count.
  Index cover_length() const;

  /// Applies one key=value pair; unknown keys are configuration errors.
  /// "profile" resets image_size, sample_rate, lr and batch_size.
  void set(const std::string& key, const std::string& value);
  /// Every key, one per line, in a fixed order.
  std::string to_text() const;
};

/// Parses key=value lines ('#' comments, blank lines ignored) on top of `base`.
PipelineConfig parse_config(const std::string& text, PipelineConfig base = {});

}  // namespace stegowav
