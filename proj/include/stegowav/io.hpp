#pragma once

// File formats: 16-bit PCM WAV, binary PPM/PGM, checkpoints.

#include <cstdint>
#include <string>
#include <vector>

#include "stegowav/dsp.hpp"
#include "stegowav/imageops.hpp"
#include "stegowav/networks.hpp"

namespace stegowav {

using Bytes = std::vector<std::uint8_t>;

Bytes read_file(const std::string& path);
void write_file(const std::string& path, const Bytes& bytes);
void write_text(const std::string& path, const std::string& text);
std::string read_text(const std::string& path);

/// Mono 16-bit PCM. Samples map to [−1, 1) by /32768.
Waveform decode_wav(const Bytes& bytes);
/// Rounds half away from zero after ×32768 and clips to the int16 range.
Bytes encode_wav(const Waveform& w);
Waveform read_wav(const std::string& path);
void write_wav(const std::string& path, const Waveform& w);

/// Binary 8-bit P6.
RgbImage decode_ppm(const Bytes& bytes);
Bytes encode_ppm(const RgbImage& img);
RgbImage read_ppm(const std::string& path);
void write_ppm(const std::string& path, const RgbImage& img);

/// Binary 8-bit P5 of a [0, 1] plane; row 0 of the plane becomes the bottom
/// raster row (low frequencies at the bottom).
Bytes encode_pgm_flipped(const Plane& p);

// Checkpoints: "PXW2", u32 version, u32 config length, config text,
// u32 parameter count, then per parameter u32 name length, name, u32 rank,
// u64 extents, float64 values. All integers and floats little-endian.

inline constexpr std::uint32_t kCheckpointVersion = 1;

Bytes encode_checkpoint(const ModelBundle& m);
ModelBundle decode_checkpoint(const Bytes& bytes);
void save_checkpoint(const ModelBundle& m, const std::string& path);
ModelBundle load_checkpoint(const std::string& path);

}  // namespace stegowav
