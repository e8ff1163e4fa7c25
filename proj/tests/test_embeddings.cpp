#include <doctest.h>

#include <set>

#include "stegowav/embeddings.hpp"
#include "test_support.hpp"

using namespace stegowav;
using stegowav::testing::random_leaf;
using stegowav::testing::random_tensor;

namespace {

const EmbeddingMethod kMethods[] = {EmbeddingMethod::stretch, EmbeddingMethod::replicate, EmbeddingMethod::w_replicate,
                                    EmbeddingMethod::ws_replicate, EmbeddingMethod::multichannel};

Var weights(Tape& tape, std::vector<double> w) {
  Tensor t = Tensor::zeros({static_cast<Index>(w.size())});
  for (std::size_t i = 0; i < w.size(); ++i) t[static_cast<Index>(i)] = w[i];
  return tape.leaf(t, true);
}

}  // namespace

TEST_CASE("method names round trip") {
  for (EmbeddingMethod m : kMethods) CHECK(parse_method(to_string(m)) == m);
  CHECK_THROWS_AS(parse_method("tile"), ConfigError);
}

TEST_CASE("container geometry and replica counts") {
  const Index H = 16, W = 16;
  struct Expect {
    EmbeddingMethod method;
    bool large;
    Index replicas;
  };
  const Expect table[] = {{EmbeddingMethod::stretch, false, 1},     {EmbeddingMethod::replicate, false, 2},
                          {EmbeddingMethod::replicate, true, 8},    {EmbeddingMethod::w_replicate, true, 8},
                          {EmbeddingMethod::ws_replicate, false, 2}, {EmbeddingMethod::multichannel, false, 8},
                          {EmbeddingMethod::multichannel, true, 32}};
  for (const Expect& e : table) {
    INFO(to_string(e.method) << (e.large ? " large" : " small"));
    const EmbeddingContext ctx = EmbeddingContext::make(e.method, H, W, e.large);
    CHECK(ctx.container_h == (e.large ? 8 : 4) * H);
    CHECK(ctx.container_w == (e.large ? 4 : 2) * W);
    CHECK(ctx.replicas() == e.replicas);
    CHECK(ctx.grid.height() == ctx.container_h);
    CHECK(ctx.grid.width() == ctx.container_w);
  }
  CHECK(EmbeddingContext::make(EmbeddingMethod::multichannel, H, W, false).channels() == 8);
  CHECK(EmbeddingContext::make(EmbeddingMethod::replicate, H, W, false).channels() == 1);
  CHECK(EmbeddingContext::make(EmbeddingMethod::w_replicate, H, W, false).enc_weight_count() == 2);
  CHECK(EmbeddingContext::make(EmbeddingMethod::w_replicate, H, W, false).dec_weight_count() == 2);
  CHECK(EmbeddingContext::make(EmbeddingMethod::ws_replicate, H, W, false).dec_weight_count() == 0);
  CHECK_THROWS_AS(EmbeddingContext::make(EmbeddingMethod::replicate, 0, W, false), ConfigError);
}

TEST_CASE("replica grids partition the container exactly") {
  for (EmbeddingMethod m : kMethods) {
    for (bool large : {false, true}) {
      INFO(to_string(m) << (large ? " large" : " small"));
      const EmbeddingContext ctx = EmbeddingContext::make(m, 8, 8, large);
      Plane ids(ctx.container_h, ctx.container_w);
      for (Index i = 0; i < ids.size(); ++i) ids.data()[i] = static_cast<double>(i);
      std::multiset<double> seen;
      for (const Plane& cell : unpack_grid(ids, ctx.grid))
        for (Index i = 0; i < cell.size(); ++i) seen.insert(cell.data()[i]);
      CHECK(static_cast<Index>(seen.size()) == ids.size());
      CHECK(std::set<double>(seen.begin(), seen.end()).size() == seen.size());
    }
  }
}

TEST_CASE("replicate copies the watermark into every cell and averages on decode") {
  std::mt19937_64 rng(1);
  const EmbeddingContext ctx = EmbeddingContext::make(EmbeddingMethod::replicate, 4, 4, true);
  Tape tape;
  Var w = tape.constant(random_tensor(rng, ctx.watermark_shape()));
  Var c = encode_arrange(w, ctx);
  CHECK(c.shape() == Shape{1, ctx.container_h, ctx.container_w});
  for (const Plane& cell : unpack_grid(Plane(c.value().plane(0)), ctx.grid)) CHECK(cell == w.value().plane(0));

  // Identity reveal: decode of the container returns the watermark.
  Var back = decode_finalize(decode_prepare(c, ctx), ctx);
  CHECK((back.value().plane(0) - w.value().plane(0)).cwiseAbs().maxCoeff() < 1e-15);

  // Mean over replicas when they differ.
  Plane container = c.value().plane(0);
  container.block(0, 0, 8, 8).array() += 8.0;
  Var shifted = decode_finalize(tape.constant(Tensor::from_plane(container)), ctx);
  CHECK(((shifted.value().plane(0) - w.value().plane(0)).array() - 1.0).abs().maxCoeff() < 1e-12);
}

TEST_CASE("stretch resizes to the container and back") {
  const EmbeddingContext ctx = EmbeddingContext::make(EmbeddingMethod::stretch, 4, 4, false);
  Tape tape;
  Var w = tape.constant(Tensor::filled(ctx.watermark_shape(), 0.3));
  Var c = encode_arrange(w, ctx);
  CHECK(c.shape() == Shape{1, 16, 8});
  CHECK((c.value().plane(0).array() - 0.3).abs().maxCoeff() < 1e-15);
  Var back = decode_finalize(decode_prepare(c, ctx), ctx);
  CHECK(back.shape() == Shape{1, 8, 8});
  CHECK((back.value().plane(0).array() - 0.3).abs().maxCoeff() < 1e-15);
}

TEST_CASE("weighted replicas scale on encode and normalise on decode") {
  std::mt19937_64 rng(2);
  const EmbeddingContext ctx = EmbeddingContext::make(EmbeddingMethod::w_replicate, 4, 4, false);
  Tape tape;
  Var w = tape.constant(random_tensor(rng, ctx.watermark_shape()));
  Var c = encode_arrange(w, ctx, weights(tape, {2.0, 3.0}));
  const auto cells = unpack_grid(Plane(c.value().plane(0)), ctx.grid);
  CHECK((cells[0] - 2.0 * w.value().plane(0)).cwiseAbs().maxCoeff() < 1e-15);
  CHECK((cells[1] - 3.0 * w.value().plane(0)).cwiseAbs().maxCoeff() < 1e-15);

  // (0.5·2x + 1.5·3x) / (0.5 + 1.5) = 2.75x
  Var out = decode_finalize(c, ctx, weights(tape, {0.5, 1.5}));
  CHECK((out.value().plane(0) - 2.75 * w.value().plane(0)).cwiseAbs().maxCoeff() < 1e-14);
  CHECK_THROWS_AS(decode_finalize(c, ctx), ConfigError);
  CHECK_THROWS_AS(encode_arrange(w, ctx, weights(tape, {1.0, 1.0, 1.0})), ConfigError);
}

TEST_CASE("stacked methods hand the revealing network a depth stack") {
  std::mt19937_64 rng(3);
  const EmbeddingContext ws = EmbeddingContext::make(EmbeddingMethod::ws_replicate, 4, 4, true);
  Tape tape;
  Var w = tape.constant(random_tensor(rng, ws.watermark_shape()));
  Var stack = decode_prepare(encode_arrange(w, ws, weights(tape, std::vector<double>(8, 1.0))), ws);
  CHECK(stack.shape() == ws.reveal_input_shape());
  CHECK(stack.shape() == Shape{8, 8, 8});
  for (Index r = 0; r < 8; ++r) CHECK(stack.value().plane(r) == w.value().plane(0));

  const EmbeddingContext mc = EmbeddingContext::make(EmbeddingMethod::multichannel, 4, 4, false);
  Var channels = tape.constant(random_tensor(rng, mc.watermark_shape()));
  CHECK(channels.shape() == Shape{8, 4, 4});
  Var container = encode_arrange(channels, mc);
  CHECK(container.shape() == Shape{1, 16, 8});
  Var again = decode_prepare(container, mc);
  CHECK(again.value().data().isApprox(channels.value().data(), 0.0));
  CHECK(mc.reveal_output_shape() == Shape{3, 4, 4});
  CHECK(mc.outputs_rgb());
}

TEST_CASE("hooks reject mismatched shapes") {
  const EmbeddingContext ctx = EmbeddingContext::make(EmbeddingMethod::replicate, 4, 4, false);
  Tape tape;
  CHECK_THROWS_AS(encode_arrange(tape.constant(Tensor::zeros({1, 4, 4})), ctx), ConfigError);
  CHECK_THROWS_AS(decode_prepare(tape.constant(Tensor::zeros({1, 8, 8})), ctx), ConfigError);
  CHECK_THROWS_AS(decode_finalize(tape.constant(Tensor::zeros({1, 8, 8})), ctx), ConfigError);
}

TEST_CASE("arrangements pass grad_check including replica weights") {
  for (EmbeddingMethod m : kMethods) {
    INFO(to_string(m));
    const EmbeddingContext ctx = EmbeddingContext::make(m, 2, 2, false);
    GraphBuilder<double> builder = [&](Tape& t, std::mt19937_64& r) {
      Var w = random_leaf(t, r, ctx.watermark_shape());
      Var enc = ctx.enc_weight_count() ? random_leaf(t, r, {ctx.enc_weight_count()}, 0.5, 1.5) : Var{};
      Var dec = ctx.dec_weight_count() ? random_leaf(t, r, {ctx.dec_weight_count()}, 0.5, 1.5) : Var{};
      Var c = encode_arrange(w, ctx, enc);
      Var prepared = decode_prepare(c, ctx);
      // A fixed linear map stands in for the revealing network.
      Var net = prepared;
      if (ctx.reveal_output_shape() != prepared.shape()) {
        const Shape out = ctx.reveal_output_shape();
        Var k = t.constant(random_tensor(r, {out[0], prepared.shape()[0], 1, 1}));
        net = conv2d(prepared, k, t.constant(Tensor::zeros({out[0]})));
      }
      return stegowav::testing::project(t, r, decode_finalize(net, ctx, dec));
    };
    CHECK(grad_check(builder, 5) < 1e-4);
  }
}

TEST_CASE("stretch and replicate spend the same arrangement MACs") {
  for (bool large : {false, true}) {
    const auto s = arrangement_macs(EmbeddingContext::make(EmbeddingMethod::stretch, 16, 16, large));
    const auto r = arrangement_macs(EmbeddingContext::make(EmbeddingMethod::replicate, 16, 16, large));
    CHECK(s.encode == r.encode);
    CHECK(s.decode == r.decode);
  }
}
