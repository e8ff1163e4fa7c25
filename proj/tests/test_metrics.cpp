#include <doctest.h>

#include <cmath>

#include "stegowav/metrics.hpp"
#include "test_support.hpp"

using namespace stegowav;
using stegowav::testing::uniform;

namespace {

Plane pattern_a(Index h, Index w) {
  Plane p(h, w);
  for (Index y = 0; y < h; ++y)
    for (Index x = 0; x < w; ++x) p(y, x) = 0.5 + 0.4 * std::sin(0.3 * x + 0.2 * y);
  return p;
}

Plane pattern_b(Index h, Index w) {
  Plane p = pattern_a(h, w);
  for (Index y = 0; y < h; ++y)
    for (Index x = 0; x < w; ++x)
      p(y, x) = std::clamp(p(y, x) + 0.1 * std::cos(0.7 * x - 0.45 * y) + 0.05 * std::sin(1.3 * x * y / 7.0), 0.0, 1.0);
  return p;
}

RgbImage gray(const Plane& p) { return RgbImage(p, p, p); }

}  // namespace

TEST_CASE("psnr of identical and offset images") {
  const RgbImage a = RgbImage::filled(8, 8, 0.2, 0.4, 0.6);
  CHECK(psnr(a, a) == kInfinity);
  const RgbImage b = RgbImage::filled(8, 8, 0.3, 0.5, 0.7);
  CHECK(psnr(a, b) == doctest::Approx(20.0).epsilon(1e-12));
  CHECK_THROWS_AS(psnr(a, RgbImage::filled(4, 8, 0, 0, 0)), ConfigError);
}

TEST_CASE("ssim against scikit-image on a fixed pattern") {
  // skimage.metrics.structural_similarity(a, b, data_range=1, gaussian_weights=True,
  // sigma=1.5, use_sample_covariance=False)
  const double oracle = 0.8475605908651007;
  CHECK(ssim_plane(pattern_a(24, 20), pattern_b(24, 20)) == doctest::Approx(oracle).epsilon(1e-12));
  CHECK(ssim(gray(pattern_a(24, 20)), gray(pattern_b(24, 20))) == doctest::Approx(oracle).epsilon(1e-12));
}

TEST_CASE("ssim of an image with itself is one") {
  std::mt19937_64 rng(1);
  Plane p(16, 16);
  for (Index i = 0; i < p.size(); ++i) p.data()[i] = uniform(rng, 0, 1);
  CHECK(ssim_plane(p, p) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK_THROWS_AS(ssim_plane(Plane(Plane::Zero(8, 8)), Plane(Plane::Zero(8, 8))), UsageError);
}

TEST_CASE("ssim is shift invariant when local means agree") {
  // b = a + δ with δ in the nullspace of the valid Gaussian filter, so every
  // window sees equal means and the luminance term is exactly 1.
  const Index n = 16, valid = n - 10;
  Eigen::VectorXd taps(11);
  for (Index i = 0; i < 11; ++i) taps[i] = std::exp(-double((i - 5) * (i - 5)) / (2 * 1.5 * 1.5));
  taps /= taps.sum();
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(valid, n);
  for (Index r = 0; r < valid; ++r) g.row(r).segment(r, 11) = taps.transpose();
  const Eigen::MatrixXd kernel = Eigen::FullPivLU<Eigen::MatrixXd>(g).kernel();
  REQUIRE(kernel.cols() == 10);
  Eigen::VectorXd v = kernel.col(3);
  v *= 0.05 / v.cwiseAbs().maxCoeff();
  Eigen::VectorXd u(n);
  for (Index i = 0; i < n; ++i) u[i] = 1.0 + 0.3 * std::cos(0.5 * i);

  const Plane a = pattern_a(n, n);
  const Plane b = a + u * v.transpose();
  const double base = ssim_plane(a, b);
  CHECK(base < 0.999);
  const Plane a2 = (a.array() + 0.1).matrix(), b2 = (b.array() + 0.1).matrix();
  CHECK(std::abs(ssim_plane(a2, b2) - base) < 1e-6);
}

TEST_CASE("ssim is symmetric and negative for an inverted checkerboard") {
  const Plane a = pattern_a(16, 16), b = pattern_b(16, 16);
  CHECK(ssim_plane(a, b) == doctest::Approx(ssim_plane(b, a)).epsilon(1e-14));
  Plane board(16, 16);
  for (Index y = 0; y < 16; ++y)
    for (Index x = 0; x < 16; ++x) board(y, x) = (x + y) % 2;
  const Plane inverted = (1.0 - board.array()).matrix();
  CHECK(ssim_plane(board, inverted) < 0.0);
}

TEST_CASE("psnr matches the direct formula and is symmetric") {
  std::mt19937_64 rng(3);
  RgbImage a(6, 9), b(6, 9);
  double se = 0;
  for (Index c = 0; c < 3; ++c) {
    for (Index i = 0; i < 54; ++i) {
      a.channel(c).data()[i] = uniform(rng, 0, 1);
      b.channel(c).data()[i] = uniform(rng, 0, 1);
      se += std::pow(a.channel(c).data()[i] - b.channel(c).data()[i], 2);
    }
  }
  CHECK(std::abs(psnr(a, b) - 10 * std::log10(162 / se)) < 1e-9);
  CHECK(psnr(a, b) == psnr(b, a));
}

TEST_CASE("snr in decibels") {
  Samples<double> ref(2), test(2);
  ref << 1, 1;
  test << 1, 0;
  CHECK(snr_db(ref, test) == doctest::Approx(10 * std::log10(2.0)).epsilon(1e-14));
  CHECK(snr_db(ref, ref) == kInfinity);
  CHECK_THROWS_AS(snr_db(Samples<double>(Samples<double>::Zero(2)), test), UsageError);
  CHECK_THROWS_AS(snr_db(ref, Samples<double>(Samples<double>::Zero(3))), ConfigError);
  // Unit power with noise power 0.001 sits at the 30 dB threshold.
  Samples<double> unit = Samples<double>::Ones(1000), noisy = unit;
  for (Index i = 0; i < 1000; ++i) noisy[i] += (i % 2 ? 1 : -1) * std::sqrt(0.001);
  CHECK(snr_db(unit, noisy) == doctest::Approx(30.0).epsilon(1e-12));
  CHECK(snr_db(unit, noisy) != snr_db(noisy, unit));
}

TEST_CASE("rgb histograms are densities") {
  std::mt19937_64 rng(2);
  RgbImage img(10, 10);
  for (Index c = 0; c < 3; ++c)
    for (Index i = 0; i < 100; ++i) img.channel(c).data()[i] = uniform(rng, 0, 1);
  const auto h = rgb_histogram(img, 16);
  CHECK(h.rows() == 3);
  for (Index c = 0; c < 3; ++c) CHECK(h.row(c).sum() == doctest::Approx(1.0));
  // All-zero vs all-one images share no bins.
  const auto h0 = rgb_histogram(RgbImage::filled(4, 4, 0, 0, 0));
  const auto h1 = rgb_histogram(RgbImage::filled(4, 4, 1, 1, 1));
  CHECK(h1(0, 255) == 1.0);
  CHECK(histogram_l1(h0, h1) == 2.0);
  CHECK(histogram_l1(h, h) == 0.0);
}

TEST_CASE("metrics rows print as csv") {
  MetricsRow r;
  r.method = "replicate";
  r.container = "magnitude";
  r.beta = 0.75;
  r.lambda = 1;
  r.ssim = 0.5;
  r.psnr_db = kInfinity;
  r.snr_db = 31.25;
  r.waveform_loss = 0.001;
  r.hist_l1 = 0.125;
  CHECK(MetricsRow::csv_header() == "method,container,beta,lambda,ssim,psnr_db,snr_db,waveform_loss,hist_l1");
  CHECK(r.csv_row() == "replicate,magnitude,0.75,1,0.5,inf,31.25,0.001,0.125");
  CHECK(format_number(0.1) == "0.1");
  CHECK(format_number(-kInfinity) == "-inf");
}
