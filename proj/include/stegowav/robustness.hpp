#pragma once

// Frame-dropout attacks on stego spectrograms and the sweep over kept
// fractions.

#include <cstdint>
#include <string>
#include <vector>

#include "stegowav/pipeline.hpp"

namespace stegowav {

enum class DropoutMode { sequential, random };

std::string to_string(DropoutMode m);
DropoutMode parse_dropout_mode(const std::string& s);

struct DropoutSpec {
  double keep_fraction = 1.0;  ///< p in (0, 1]
  DropoutMode mode = DropoutMode::sequential;
  std::uint64_t seed = 0;
  /// Sequential only: frames left intact after the dropped block (0 drops the tail).
  Index offset = 0;

  void validate() const;
  /// round((1 − p)·T)
  Index dropped_frames(Index frames) const;
};

/// Frame indices zeroed by the spec, ascending.
std::vector<Index> dropped_frame_indices(Index frames, const DropoutSpec& spec);

/// Zeroes the magnitude of the selected frames; the phase is left alone.
Spectrogram apply_frame_dropout(const Spectrogram& s, const DropoutSpec& spec);

struct RobustnessRow {
  std::string method;
  DropoutMode mode = DropoutMode::sequential;
  double keep_fraction = 1.0;
  double mean_ssim = 0;
  double mean_psnr_db = 0;

  static std::string csv_header();
  std::string csv_row() const;
};

inline const std::vector<double> kDefaultKeepFractions = {1.0, 0.75, 0.5, 0.25, 0.125};

struct SweepOptions {
  std::vector<double> fractions = kDefaultKeepFractions;
  std::vector<DropoutMode> modes = {DropoutMode::sequential, DropoutMode::random};
  std::uint64_t seed = 0;
  std::string dump_dir;  ///< revealed images per cell when non-empty
};

/// One row per (mode, fraction), modes outer, averaged over the samples.
std::vector<RobustnessRow> robustness_sweep(const ModelBundle& m, const Dataset& data, const SweepOptions& opts = {});
std::string robustness_csv(const std::vector<RobustnessRow>& rows);

}  // namespace stegowav
