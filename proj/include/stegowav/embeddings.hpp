#pragma once

// Container arrangements: how a hiding-network output is laid out on the
// spectral container and how the revealing network sees it again.
//
//   encode_arrange   watermark (native shape) -> [1, F, T]
//   decode_prepare   [1, F, T] -> reveal-net input
//   decode_finalize  reveal-net output -> [1, 2H, 2W] plane or [3, H, W] image

#include <string>

#include "stegowav/autodiff.hpp"
#include "stegowav/imageops.hpp"

namespace stegowav {

enum class EmbeddingMethod { stretch, replicate, w_replicate, ws_replicate, multichannel };

std::string to_string(EmbeddingMethod m);
EmbeddingMethod parse_method(const std::string& s);

/// Shapes and trainable weights of one arrangement. Weights live in the
/// model's parameter set; the context only records how many there are.
struct EmbeddingContext {
  EmbeddingMethod method = EmbeddingMethod::stretch;
  Index image_h = 0;  ///< secret image height H
  Index image_w = 0;
  Index container_h = 0;  ///< F
  Index container_w = 0;  ///< T
  ReplicaGrid grid;

  /// Small container is (4H, 2W), large (8H, 4W).
  static EmbeddingContext make(EmbeddingMethod method, Index image_h, Index image_w, bool large);

  Index replicas() const { return grid.count(); }
  /// Multichannel hide-net depth C (replica count), otherwise 1.
  Index channels() const { return method == EmbeddingMethod::multichannel ? grid.count() : 1; }
  Index enc_weight_count() const;
  Index dec_weight_count() const;

  /// Shape the hiding network must produce.
  Shape watermark_shape() const;
  Shape secret_input_shape() const;
  /// Shape fed to the revealing network.
  Shape reveal_input_shape() const;
  Shape reveal_output_shape() const;
  bool outputs_rgb() const { return method == EmbeddingMethod::multichannel; }
};

/// enc_weights is a [R] leaf for w_replicate / ws_replicate, ignored otherwise.
Var encode_arrange(Var wmark, const EmbeddingContext& ctx, Var enc_weights = {});
Var decode_prepare(Var container, const EmbeddingContext& ctx);
/// dec_weights is a [R] leaf for w_replicate, ignored otherwise.
Var decode_finalize(Var net_out, const EmbeddingContext& ctx, Var dec_weights = {});

/// MACs spent by the three hooks: one per output element of every hook that
/// materialises a tensor (resize, copy, scaling, averaging, stacking).
struct ArrangementMacs {
  long long encode = 0;
  long long decode = 0;
};
ArrangementMacs arrangement_macs(const EmbeddingContext& ctx);

}  // namespace stegowav
