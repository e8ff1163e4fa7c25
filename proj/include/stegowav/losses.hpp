#pragma once

// Distances and the composite training objectives.

#include <optional>
#include <string>
#include <vector>

#include "stegowav/autodiff.hpp"

namespace stegowav {

enum class WaveLoss { l1, soft_dtw };
enum class ContainerKind { magnitude, phase, dual };

std::string to_string(WaveLoss w);
std::string to_string(ContainerKind c);
WaveLoss parse_wave_loss(const std::string& s);
ContainerKind parse_container(const std::string& s);

struct LossConfig {
  double beta = 0.75;   ///< image vs spectrogram trade-off
  double lambda = 1.0;  ///< waveform weight
  double theta = 0.5;   ///< phase share of the spectrogram term (dual only)
  double gamma = 1.0;   ///< soft-DTW smoothing
  WaveLoss wave = WaveLoss::l1;
  ContainerKind container = ContainerKind::magnitude;

  void validate() const;
};

/// Mean absolute difference.
Var l1(Var a, Var b);
/// Root of the mean squared difference; gradient 0 when a == b.
Var l2(Var a, Var b);

// Soft dynamic time warping with squared-difference cost.

/// Value and gradients of one soft-DTW dynamic program.
struct SoftDtwResult {
  double value = 0;
  Eigen::ArrayXd grad_x;
  Eigen::ArrayXd grad_y;
};

/// Full O(n·m) soft-DTW, with gradients when requested.
SoftDtwResult soft_dtw_full(const Eigen::ArrayXd& x, const Eigen::ArrayXd& y, double gamma, bool gradients = true);

/// Sequences longer than this are scored chunk by chunk.
inline constexpr Index kSoftDtwChunkThreshold = 4096;
inline constexpr Index kSoftDtwChunk = 1024;

/// soft_dtw_full, or for inputs longer than kSoftDtwChunkThreshold the sum
/// over consecutive non-overlapping kSoftDtwChunk-sample blocks.
SoftDtwResult soft_dtw(const Eigen::ArrayXd& x, const Eigen::ArrayXd& y, double gamma, bool gradients = true);

/// Tape op over 1-D tensors.
Var soft_dtw_op(Var x, Var y, double gamma);

/// Scalar loss terms as tape nodes. Unused terms hold constant zeros.
struct LossTerms {
  Var total;
  Var image;  ///< ‖s − s'‖₁
  Var wave;   ///< l1 or soft-DTW between w and w'
  Var mag;    ///< ‖M − M'‖₂ (active plane for single containers)
  Var phase;  ///< ‖P − P'‖₂ (dual only)
};

/// Planes for the composite loss. For single containers `m` / `m_prime` hold
/// the active plane (magnitude or phase); `p` / `p_prime` only in dual mode.
struct LossInputs {
  Var s, s_prime;
  Var w, w_prime;
  Var m, m_prime;
  Var p, p_prime;
};

LossTerms composite_loss(const LossConfig& cfg, const LossInputs& in);

}  // namespace stegowav
