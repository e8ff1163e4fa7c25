#include <doctest.h>

#include <cmath>
#include <numbers>

#include "stegowav/imageops.hpp"
#include "test_support.hpp"

using namespace stegowav;
using stegowav::testing::uniform;

namespace {

RgbImage random_image(std::mt19937_64& rng, Index h, Index w) {
  RgbImage img(h, w);
  for (Index c = 0; c < 3; ++c)
    for (Index i = 0; i < img.channel(c).size(); ++i) img.channel(c).data()[i] = uniform(rng, 0.0, 1.0);
  return img;
}

// Published JPEG inverse, rounded coefficients.
Pixel jpeg_inverse(const Pixel& ycc) {
  const double y = ycc[0], cb = ycc[1] - 0.5, cr = ycc[2] - 0.5;
  return {y + 1.402 * cr, y - 0.344136 * cb - 0.714136 * cr, y + 1.772 * cb};
}

}  // namespace

TEST_CASE("ycbcr round trip over random pixels") {
  std::mt19937_64 rng(1);
  double worst = 0, worst_oracle = 0;
  for (int i = 0; i < 1000; ++i) {
    const Pixel p(uniform(rng, 0, 1), uniform(rng, 0, 1), uniform(rng, 0, 1));
    const Pixel ycc = rgb_to_ycbcr(p);
    worst = std::max(worst, (ycbcr_to_rgb(ycc) - p).cwiseAbs().maxCoeff());
    worst_oracle = std::max(worst_oracle, (jpeg_inverse(ycc) - p).cwiseAbs().maxCoeff());
  }
  CHECK(worst < 1e-12);
  CHECK(worst_oracle < 1e-5);
  CHECK(rgb_to_ycbcr(Pixel(1, 1, 1)).isApprox(Pixel(1, 0.5, 0.5), 1e-12));
}

TEST_CASE("shuffle lays out R G / B Y cells") {
  RgbImage red = RgbImage::filled(1, 1, 1, 0, 0);
  const Plane p = shuffle_with_luma(red);
  CHECK(p.rows() == 2);
  CHECK(p(0, 0) == 1.0);
  CHECK(p(0, 1) == 0.0);
  CHECK(p(1, 0) == 0.0);
  CHECK(p(1, 1) == doctest::Approx(0.299));
  CHECK(shuffle_with_luma(red, LumaMode::zero_pad)(1, 1) == 0.0);
}

TEST_CASE("unshuffle inverts shuffle") {
  std::mt19937_64 rng(4);
  const RgbImage img = random_image(rng, 5, 7);
  for (LumaMode mode : {LumaMode::buffer, LumaMode::zero_pad}) {
    const RgbImage back = unshuffle_with_luma(shuffle_with_luma(img, mode), mode);
    for (Index c = 0; c < 3; ++c) CHECK((back.channel(c) - img.channel(c)).cwiseAbs().maxCoeff() < 1e-12);
  }
  CHECK_THROWS_AS(unshuffle_with_luma(Plane(Plane::Zero(3, 4))), ConfigError);
}

TEST_CASE("perturbing the luma slot shifts every channel by half the perturbation") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    const Pixel rgb(uniform(rng, 0.2, 0.8), uniform(rng, 0.2, 0.8), uniform(rng, 0.2, 0.8));
    const double delta = uniform(rng, -0.1, 0.1);
    Plane p = shuffle_with_luma(RgbImage::filled(1, 1, rgb[0], rgb[1], rgb[2]));
    p(1, 1) += delta;
    const RgbImage out = unshuffle_with_luma(p);
    // Oracle: averaged luma through the published inverse.
    Pixel ycc = rgb_to_ycbcr(rgb);
    ycc[0] += delta / 2;
    const Pixel expected = jpeg_inverse(ycc);
    CHECK((out.pixel(0, 0) - expected).cwiseAbs().maxCoeff() < 1e-5);
    CHECK((out.pixel(0, 0) - rgb).cwiseAbs().maxCoeff() == doctest::Approx(std::abs(delta) / 2).epsilon(1e-9));
    // Zero-pad ignores the slot entirely.
    CHECK((unshuffle_with_luma(p, LumaMode::zero_pad).pixel(0, 0) - rgb).cwiseAbs().maxCoeff() < 1e-15);
  }
}

TEST_CASE("differentiable unshuffle matches the explicit ycbcr route") {
  std::mt19937_64 rng(13);
  Tape tape;
  Plane p(6, 8);
  for (Index i = 0; i < p.size(); ++i) p.data()[i] = uniform(rng, 0.1, 0.9);
  Var v = tape.constant(Tensor::from_plane(p));
  const RgbImage reference = unshuffle_with_luma(p);
  const RgbImage op = RgbImage::from_tensor(unshuffle_op(v).value());
  for (Index c = 0; c < 3; ++c) CHECK((op.channel(c) - reference.channel(c)).cwiseAbs().maxCoeff() < 1e-12);

  for (LumaMode mode : {LumaMode::buffer, LumaMode::zero_pad}) {
    GraphBuilder<double> g = [mode](Tape& t, std::mt19937_64& r) {
      return stegowav::testing::project(t, r, unshuffle_op(stegowav::testing::random_leaf(t, r, {1, 4, 6}), mode));
    };
    for (std::uint64_t seed = 0; seed < 5; ++seed) CHECK(grad_check(g, seed) < 1e-4);
  }
}

TEST_CASE("bilinear resize") {
  SUBCASE("rows of the weight matrix are convex combinations") {
    const Plane w = bilinear_weights<double>(7, 19);
    CHECK((w.rowwise().sum().array() - 1).abs().maxCoeff() < 1e-12);
    CHECK(w.minCoeff() >= 0);
    CHECK(w(0, 0) == 1.0);
    CHECK(w(18, 6) == 1.0);
  }
  SUBCASE("affine fields are reproduced exactly") {
    Plane p(5, 6);
    for (Index y = 0; y < 5; ++y)
      for (Index x = 0; x < 6; ++x) p(y, x) = 0.1 + 0.05 * y + 0.03 * x;
    const Plane up = bilinear_resize(p, 9, 11);
    for (Index y = 0; y < 9; ++y)
      for (Index x = 0; x < 11; ++x) CHECK(up(y, x) == doctest::Approx(0.1 + 0.05 * y * 4 / 8.0 + 0.03 * x * 5 / 10.0));
  }
  SUBCASE("up then down on smooth fields is near-lossless") {
    for (Index n : {8, 16, 32}) {
      Plane p(n, n);
      for (Index y = 0; y < n; ++y)
        for (Index x = 0; x < n; ++x)
          p(y, x) = 0.5 + 0.4 * std::sin(std::numbers::pi * y / n) * std::cos(std::numbers::pi * x / n);
      const Plane back = bilinear_resize(bilinear_resize(p, 2 * n, 4 * n), n, n);
      CHECK((back - p).cwiseAbs().maxCoeff() < 0.05);
    }
  }
  SUBCASE("gradient") {
    GraphBuilder<double> g = [](Tape& t, std::mt19937_64& r) {
      return stegowav::testing::project(t, r, bilinear_resize_op(stegowav::testing::random_leaf(t, r, {2, 4, 5}), 7, 3));
    };
    for (std::uint64_t seed = 0; seed < 5; ++seed) CHECK(grad_check(g, seed) < 1e-4);
  }
  CHECK_THROWS_AS(bilinear_resize(Plane(Plane::Zero(2, 2)), 0, 3), ConfigError);
}

TEST_CASE("replica grids pack and unpack losslessly") {
  std::mt19937_64 rng(3);
  for (auto [rows, cols] : {std::pair<Index, Index>{2, 1}, {4, 2}, {8, 4}}) {
    const ReplicaGrid g{rows, cols, 6, 5};
    std::vector<Plane> replicas;
    for (Index i = 0; i < g.count(); ++i) {
      Plane r(6, 5);
      for (Index k = 0; k < r.size(); ++k) r.data()[k] = uniform(rng);
      replicas.push_back(r);
    }
    const Plane packed = pack_grid(replicas, g);
    CHECK(packed.rows() == 6 * rows);
    CHECK(packed.cols() == 5 * cols);
    // Replica 0 at the low-frequency (top) edge.
    CHECK(packed.block(0, 0, 6, 5) == replicas[0]);
    const auto back = unpack_grid(packed, g);
    for (Index i = 0; i < g.count(); ++i) CHECK(back[i] == replicas[i]);

    Tape tape;
    std::vector<Var> vars;
    for (const auto& r : replicas) vars.push_back(tape.constant(Tensor::from_plane(r)));
    Var c = pack_grid_op(vars, g);
    CHECK(c.value().plane(0) == packed);
    const auto parts = unpack_grid_op(c, g);
    for (Index i = 0; i < g.count(); ++i) CHECK(parts[i].value().plane(0) == replicas[i]);
  }
  CHECK_THROWS_AS(pack_grid(std::vector<Plane>(3, Plane::Zero(2, 2)), ReplicaGrid{2, 1, 2, 2}), ConfigError);
  CHECK_THROWS_AS(unpack_grid(Plane(Plane::Zero(5, 4)), ReplicaGrid{2, 1, 2, 2}), ConfigError);
}

TEST_CASE("images clamp on ingest") {
  const RgbImage img = RgbImage::filled(2, 2, 1.5, -0.2, 0.5);
  CHECK(img.pixel(1, 1) == Pixel(1, 0, 0.5));
  CHECK_THROWS_AS(RgbImage(Plane::Zero(2, 2), Plane::Zero(2, 3), Plane::Zero(2, 2)), ConfigError);
}
