#pragma once

// Image and audio quality metrics.

#include <limits>
#include <string>

#include "stegowav/dsp.hpp"
#include "stegowav/imageops.hpp"

namespace stegowav {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// 10·log10(1/MSE) over all channels; +inf when identical.
double psnr(const RgbImage& a, const RgbImage& b);

/// Mean SSIM over valid 11×11 Gaussian (σ = 1.5) windows, K1 = 0.01,
/// K2 = 0.03, dynamic range 1.
double ssim_plane(const Plane& a, const Plane& b);
/// Channel mean of ssim_plane.
double ssim(const RgbImage& a, const RgbImage& b);

/// 10·log10(Σw² / Σ(w − w')²) with w the reference; +inf when identical.
double snr_db(const Samples<double>& reference, const Samples<double>& test);

/// 3 × bins per-channel densities over [0, 1].
Eigen::ArrayXXd rgb_histogram(const RgbImage& img, Index bins = 256);
/// Mean over channels of the per-channel L1 distance between densities.
double histogram_l1(const Eigen::ArrayXXd& h1, const Eigen::ArrayXXd& h2);

struct MetricsRow {
  std::string method;
  std::string container;
  double beta = 0;
  double lambda = 0;
  double ssim = 0;
  double psnr_db = 0;
  double snr_db = 0;
  double waveform_loss = 0;
  double hist_l1 = 0;

  static std::string csv_header();
  std::string csv_row() const;
};

/// Shortest round-trip decimal form; "inf" for +inf.
std::string format_number(double v);

}  // namespace stegowav
