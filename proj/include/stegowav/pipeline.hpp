#pragma once

// End-to-end hiding and revealing, training and dataset synthesis.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "stegowav/config.hpp"
#include "stegowav/losses.hpp"
#include "stegowav/metrics.hpp"
#include "stegowav/networks.hpp"

namespace stegowav {

struct SamplePair {
  RgbImage secret;
  Waveform cover;
};
using Dataset = std::vector<SamplePair>;

/// Procedural images (smooth gradients plus coloured shapes) and covers
/// (3–8 sinusoids plus pink noise, peak ≤ 0.8).
Dataset synth_dataset(Index n, Profile profile, std::uint64_t seed);
/// Sample count and cover length used by synth_dataset for a profile.
Index synth_cover_length(Profile profile);
int synth_sample_rate(Profile profile);
Index synth_image_size(Profile profile);

/// pair_NNN.ppm / pair_NNN.wav files.
void save_dataset(const Dataset& data, const std::string& dir);
Dataset load_dataset(const std::string& dir);

/// Cover cropped to the configured length; usage error when too short.
Waveform fit_cover(const Waveform& cover, const PipelineConfig& cfg);

struct EmbedResult {
  Waveform stego;
  Waveform cover_reference;  ///< inverse transform of the untouched cover spectrogram
  Spectrogram cover_spectrogram;
  Spectrogram stego_spectrogram;  ///< container after embedding, before inversion
  double snr_db = 0;              ///< stego vs cover_reference
  double container_l2 = 0;        ///< root-mean-square container perturbation
};

EmbedResult embed(const RgbImage& secret, const Waveform& cover, const ModelBundle& m);
RgbImage reveal(const Waveform& stego, const ModelBundle& m);
/// Reveal from an already analysed (possibly attacked) stego spectrogram.
RgbImage reveal_spectrogram(const Spectrogram& s, const ModelBundle& m);

/// Constant tensors of one training sample.
struct PreparedSample {
  Tensor secret_input;   ///< shuffled plane or RGB stack
  Tensor secret_target;  ///< [3, H, W]
  Tensor magnitude;      ///< [1, F, T]; stdct coefficients for stdct
  Tensor phase;          ///< [1, F, T]; zeros for stdct
  Tensor cover_reference;
};
PreparedSample prepare_sample(const SamplePair& pair, const ModelBundle& m);

/// Composite loss of one sample on a tape, with the revealed image.
struct SampleGraph {
  LossTerms terms;
  Var revealed;  ///< [3, H, W], unclamped
  Var stego;
};
SampleGraph sample_graph(Tape& tape, const Bindings& params, const ModelBundle& m, const PreparedSample& s);

struct TrainLogRow {
  int step = 0;
  double total = 0;
  double image_l1 = 0;
  double wave_term = 0;
  double mag_l2 = 0;
  double phase_l2 = 0;
};
std::string train_log_header();
std::string train_log_csv(const std::vector<TrainLogRow>& rows);

struct TrainResult {
  ModelBundle model;
  std::vector<TrainLogRow> log;
  double initial_loss = 0;  ///< mean total loss over the dataset before training
  double final_loss = 0;    ///< and after
};

/// Adam on the composite loss; deterministic given the config seed.
TrainResult train(const Dataset& data, const PipelineConfig& cfg);
/// Continues training an existing bundle for cfg.steps steps.
TrainResult train(const Dataset& data, ModelBundle model);

/// Mean composite loss over the dataset (no gradients).
double dataset_loss(const Dataset& data, const ModelBundle& m);

/// Per-sample metrics plus their mean as the summary row.
struct Evaluation {
  std::vector<MetricsRow> samples;
  MetricsRow mean;
  double revealed_l1 = 0;       ///< mean L1 between secret and revealed image
  double baseline_l1 = 0;       ///< mean L1 of the best constant image per sample
};
Evaluation evaluate(const Dataset& data, const ModelBundle& m);

/// L1 distance to the best constant image (every value the median of the
/// secret's values).
double best_constant_l1(const RgbImage& secret);
double image_l1(const RgbImage& a, const RgbImage& b);

/// Worker count from STEGOWAV_THREADS (default: hardware concurrency).
unsigned worker_threads();
/// Runs fn(i) for i in [0, n) on up to worker_threads() threads.
void parallel_for(Index n, const std::function<void(Index)>& fn);

}  // namespace stegowav
