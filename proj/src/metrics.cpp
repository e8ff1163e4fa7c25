#include "stegowav/metrics.hpp"

#include <charconv>
#include <cmath>

namespace stegowav {

namespace {

void require_same(const RgbImage& a, const RgbImage& b, const char* what) {
  if (a.height() != b.height() || a.width() != b.width()) {
    throw ConfigError(std::string(what) + ": image shapes differ, " + std::to_string(a.height()) + "x" +
                      std::to_string(a.width()) + " vs " + std::to_string(b.height()) + "x" +
                      std::to_string(b.width()));
  }
}

constexpr Index kWindow = 11;
constexpr double kSigma = 1.5;

Eigen::VectorXd gaussian_taps() {
  Eigen::VectorXd g(kWindow);
  for (Index i = 0; i < kWindow; ++i) {
    const double d = static_cast<double>(i - kWindow / 2);
    g[i] = std::exp(-d * d / (2 * kSigma * kSigma));
  }
  return g / g.sum();
}

/// Valid separable filtering with the Gaussian taps.
Plane filter_valid(const Plane& p) {
  static const Eigen::VectorXd g = gaussian_taps();
  const Index H = p.rows() - kWindow + 1, W = p.cols() - kWindow + 1;
  Plane rows = Plane::Zero(H, p.cols());
  for (Index k = 0; k < kWindow; ++k) rows += g[k] * p.middleRows(k, H);
  Plane out = Plane::Zero(H, W);
  for (Index k = 0; k < kWindow; ++k) out += g[k] * rows.middleCols(k, W);
  return out;
}

}  // namespace

double psnr(const RgbImage& a, const RgbImage& b) {
  require_same(a, b, "psnr");
  double se = 0;
  for (Index c = 0; c < 3; ++c) se += (a.channel(c) - b.channel(c)).squaredNorm();
  const double mse = se / static_cast<double>(3 * a.height() * a.width());
  if (mse == 0) return kInfinity;
  return 10 * std::log10(1 / mse);
}

double ssim_plane(const Plane& a, const Plane& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw ConfigError("ssim: plane shapes differ");
  if (a.rows() < kWindow || a.cols() < kWindow) {
    throw UsageError("ssim needs at least " + std::to_string(kWindow) + "x" + std::to_string(kWindow) +
                     " pixels, got " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()));
  }
  constexpr double C1 = 0.01 * 0.01, C2 = 0.03 * 0.03;
  const Plane mx = filter_valid(a), my = filter_valid(b);
  const Plane sxx = filter_valid(a.cwiseProduct(a)) - mx.cwiseProduct(mx);
  const Plane syy = filter_valid(b.cwiseProduct(b)) - my.cwiseProduct(my);
  const Plane sxy = filter_valid(a.cwiseProduct(b)) - mx.cwiseProduct(my);
  const auto num = (2 * mx.array() * my.array() + C1) * (2 * sxy.array() + C2);
  const auto den = (mx.array().square() + my.array().square() + C1) * (sxx.array() + syy.array() + C2);
  return (num / den).mean();
}

double ssim(const RgbImage& a, const RgbImage& b) {
  require_same(a, b, "ssim");
  double s = 0;
  for (Index c = 0; c < 3; ++c) s += ssim_plane(a.channel(c), b.channel(c));
  return s / 3;
}

double snr_db(const Samples<double>& reference, const Samples<double>& test) {
  if (reference.size() != test.size()) {
    throw ConfigError("snr: lengths differ, " + std::to_string(reference.size()) + " vs " +
                      std::to_string(test.size()));
  }
  const double signal = reference.square().sum();
  if (signal == 0) throw UsageError("snr: reference signal has zero energy");
  const double noise = (reference - test).square().sum();
  if (noise == 0) return kInfinity;
  return 10 * std::log10(signal / noise);
}

Eigen::ArrayXXd rgb_histogram(const RgbImage& img, Index bins) {
  if (bins < 1) throw ConfigError("histogram needs at least one bin");
  Eigen::ArrayXXd h = Eigen::ArrayXXd::Zero(3, bins);
  const double n = static_cast<double>(img.height() * img.width());
  if (n == 0) return h;
  for (Index c = 0; c < 3; ++c) {
    const Plane& p = img.channel(c);
    for (Index i = 0; i < p.size(); ++i) {
      const Index b = std::min(bins - 1, static_cast<Index>(std::floor(p.data()[i] * static_cast<double>(bins))));
      h(c, std::max<Index>(0, b)) += 1;
    }
  }
  return h / n;
}

double histogram_l1(const Eigen::ArrayXXd& h1, const Eigen::ArrayXXd& h2) {
  if (h1.rows() != h2.rows() || h1.cols() != h2.cols()) throw ConfigError("histogram shapes differ");
  return (h1 - h2).abs().rowwise().sum().mean();
}

std::string format_number(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::string MetricsRow::csv_header() { return "method,container,beta,lambda,ssim,psnr_db,snr_db,waveform_loss,hist_l1"; }

std::string MetricsRow::csv_row() const {
  return method + "," + container + "," + format_number(beta) + "," + format_number(lambda) + "," +
         format_number(ssim) + "," + format_number(psnr_db) + "," + format_number(snr_db) + "," +
         format_number(waveform_loss) + "," + format_number(hist_l1);
}

}  // namespace stegowav
