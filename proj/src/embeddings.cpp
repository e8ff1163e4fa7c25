#include "stegowav/embeddings.hpp"

namespace stegowav {

namespace {

bool is_plane_grid(EmbeddingMethod m) {
  return m == EmbeddingMethod::replicate || m == EmbeddingMethod::w_replicate ||
         m == EmbeddingMethod::ws_replicate;
}

void require_shape(const char* hook, Var v, const Shape& expected) {
  if (v.shape() != expected) {
    throw ConfigError(std::string(hook) + ": got " + shape_string(v.shape()) + ", expected " +
                      shape_string(expected));
  }
}

void require_weights(const char* hook, Var w, Index count) {
  if (w.tape == nullptr) throw ConfigError(std::string(hook) + ": missing replica weights");
  if (w.shape() != Shape{count}) {
    throw ConfigError(std::string(hook) + ": replica weights " + shape_string(w.shape()) + ", expected [" +
                      std::to_string(count) + "]");
  }
}

Var element(Var w, Index i) { return slice(w, 0, i, i + 1); }

}  // namespace

std::string to_string(EmbeddingMethod m) {
  switch (m) {
    case EmbeddingMethod::stretch: return "stretch";
    case EmbeddingMethod::replicate: return "replicate";
    case EmbeddingMethod::w_replicate: return "w_replicate";
    case EmbeddingMethod::ws_replicate: return "ws_replicate";
    case EmbeddingMethod::multichannel: return "multichannel";
  }
  return "?";
}

EmbeddingMethod parse_method(const std::string& s) {
  for (auto m : {EmbeddingMethod::stretch, EmbeddingMethod::replicate, EmbeddingMethod::w_replicate,
                 EmbeddingMethod::ws_replicate, EmbeddingMethod::multichannel}) {
    if (to_string(m) == s) return m;
  }
  throw ConfigError("unknown embedding method '" + s + "'");
}

EmbeddingContext EmbeddingContext::make(EmbeddingMethod method, Index image_h, Index image_w, bool large) {
  if (image_h <= 0 || image_w <= 0) throw ConfigError("image extents must be positive");
  EmbeddingContext ctx;
  ctx.method = method;
  ctx.image_h = image_h;
  ctx.image_w = image_w;
  ctx.container_h = (large ? 8 : 4) * image_h;
  ctx.container_w = (large ? 4 : 2) * image_w;
  if (is_plane_grid(method)) {
    ctx.grid = large ? ReplicaGrid{4, 2, 2 * image_h, 2 * image_w} : ReplicaGrid{2, 1, 2 * image_h, 2 * image_w};
  } else if (method == EmbeddingMethod::multichannel) {
    ctx.grid = large ? ReplicaGrid{8, 4, image_h, image_w} : ReplicaGrid{4, 2, image_h, image_w};
  } else {
    ctx.grid = ReplicaGrid{1, 1, ctx.container_h, ctx.container_w};
  }
  return ctx;
}

Index EmbeddingContext::enc_weight_count() const {
  return method == EmbeddingMethod::w_replicate || method == EmbeddingMethod::ws_replicate ? replicas() : 0;
}

Index EmbeddingContext::dec_weight_count() const {
  return method == EmbeddingMethod::w_replicate ? replicas() : 0;
}

Shape EmbeddingContext::secret_input_shape() const {
  if (method == EmbeddingMethod::multichannel) return {3, image_h, image_w};
  return {1, 2 * image_h, 2 * image_w};
}

Shape EmbeddingContext::watermark_shape() const {
  if (method == EmbeddingMethod::multichannel) return {channels(), image_h, image_w};
  return {1, 2 * image_h, 2 * image_w};
}

Shape EmbeddingContext::reveal_input_shape() const {
  switch (method) {
    case EmbeddingMethod::ws_replicate: return {replicas(), 2 * image_h, 2 * image_w};
    case EmbeddingMethod::multichannel: return {channels(), image_h, image_w};
    default: return {1, container_h, container_w};
  }
}

Shape EmbeddingContext::reveal_output_shape() const {
  switch (method) {
    case EmbeddingMethod::ws_replicate: return {1, 2 * image_h, 2 * image_w};
    case EmbeddingMethod::multichannel: return {3, image_h, image_w};
    default: return {1, container_h, container_w};
  }
}

Var encode_arrange(Var wmark, const EmbeddingContext& ctx, Var enc_weights) {
  require_shape("encode_arrange", wmark, ctx.watermark_shape());
  switch (ctx.method) {
    case EmbeddingMethod::stretch:
      return bilinear_resize_op(wmark, ctx.container_h, ctx.container_w);
    case EmbeddingMethod::replicate:
      return pack_grid_op(std::vector<Var>(ctx.replicas(), wmark), ctx.grid);
    case EmbeddingMethod::w_replicate:
    case EmbeddingMethod::ws_replicate: {
      require_weights("encode_arrange", enc_weights, ctx.replicas());
      std::vector<Var> copies;
      for (Index i = 0; i < ctx.replicas(); ++i) copies.push_back(weighted_sum<double>({wmark}, {element(enc_weights, i)}));
      return pack_grid_op(copies, ctx.grid);
    }
    case EmbeddingMethod::multichannel: {
      std::vector<Var> channels;
      for (Index c = 0; c < ctx.channels(); ++c) channels.push_back(slice(wmark, 0, c, c + 1));
      return pack_grid_op(channels, ctx.grid);
    }
  }
  throw ConfigError("encode_arrange: unknown method");
}

Var decode_prepare(Var container, const EmbeddingContext& ctx) {
  require_shape("decode_prepare", container, {1, ctx.container_h, ctx.container_w});
  switch (ctx.method) {
    case EmbeddingMethod::ws_replicate:
    case EmbeddingMethod::multichannel:
      return concat_depth(unpack_grid_op(container, ctx.grid));
    default:
      return container;
  }
}

Var decode_finalize(Var net_out, const EmbeddingContext& ctx, Var dec_weights) {
  require_shape("decode_finalize", net_out, ctx.reveal_output_shape());
  switch (ctx.method) {
    case EmbeddingMethod::stretch:
      return bilinear_resize_op(net_out, 2 * ctx.image_h, 2 * ctx.image_w);
    case EmbeddingMethod::replicate: {
      const auto parts = unpack_grid_op(net_out, ctx.grid);
      Var acc = parts[0];
      for (std::size_t i = 1; i < parts.size(); ++i) acc = add(acc, parts[i]);
      return scale(acc, 1.0 / static_cast<double>(parts.size()));
    }
    case EmbeddingMethod::w_replicate: {
      require_weights("decode_finalize", dec_weights, ctx.replicas());
      const auto parts = unpack_grid_op(net_out, ctx.grid);
      std::vector<Var> weights;
      for (Index i = 0; i < ctx.replicas(); ++i) weights.push_back(element(dec_weights, i));
      Var total = scale(mean(dec_weights), static_cast<double>(ctx.replicas()));
      return weighted_sum<double>({weighted_sum(parts, weights)}, {reciprocal(total)});
    }
    case EmbeddingMethod::ws_replicate:
    case EmbeddingMethod::multichannel:
      return net_out;
  }
  throw ConfigError("decode_finalize: unknown method");
}

ArrangementMacs arrangement_macs(const EmbeddingContext& ctx) {
  // Every hook that materialises a tensor pays one MAC per output element;
  // pass-throughs are free.
  const long long container = ctx.container_h * ctx.container_w;
  const long long plane = 4 * ctx.image_h * ctx.image_w;
  ArrangementMacs m;
  m.encode = container;
  switch (ctx.method) {
    case EmbeddingMethod::stretch:
    case EmbeddingMethod::replicate:
    case EmbeddingMethod::w_replicate:
      m.decode = plane;
      break;
    case EmbeddingMethod::ws_replicate:
    case EmbeddingMethod::multichannel:
      m.decode = container;
      break;
  }
  return m;
}

}  // namespace stegowav
