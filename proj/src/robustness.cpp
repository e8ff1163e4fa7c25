#include "stegowav/robustness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <random>

#include "stegowav/io.hpp"

namespace stegowav {

std::string to_string(DropoutMode m) { return m == DropoutMode::sequential ? "sequential" : "random"; }

DropoutMode parse_dropout_mode(const std::string& s) {
  if (s == "sequential") return DropoutMode::sequential;
  if (s == "random") return DropoutMode::random;
  throw UsageError("unknown dropout mode '" + s + "' (expected sequential or random)");
}

void DropoutSpec::validate() const {
  if (!(keep_fraction > 0 && keep_fraction <= 1)) {
    throw UsageError("keep fraction must lie in (0, 1], got " + format_number(keep_fraction));
  }
  if (offset < 0) throw UsageError("dropout offset must be non-negative");
}

Index DropoutSpec::dropped_frames(Index frames) const {
  return static_cast<Index>(std::llround((1 - keep_fraction) * static_cast<double>(frames)));
}

std::vector<Index> dropped_frame_indices(Index frames, const DropoutSpec& spec) {
  spec.validate();
  const Index d = spec.dropped_frames(frames);
  std::vector<Index> out;
  if (spec.mode == DropoutMode::sequential) {
    if (d + spec.offset > frames) {
      throw UsageError("dropout offset " + std::to_string(spec.offset) + " leaves no room for " + std::to_string(d) +
                       " dropped frames out of " + std::to_string(frames));
    }
    for (Index t = frames - spec.offset - d; t < frames - spec.offset; ++t) out.push_back(t);
    return out;
  }
  // Partial Fisher–Yates on raw engine bits.
  std::vector<Index> idx(frames);
  for (Index t = 0; t < frames; ++t) idx[t] = t;
  std::mt19937_64 rng(spec.seed);
  for (Index i = 0; i < d; ++i) {
    const Index span = frames - i;
    const Index j = i + static_cast<Index>(static_cast<double>(rng() >> 11) * 0x1.0p-53 * static_cast<double>(span));
    std::swap(idx[i], idx[j]);
  }
  out.assign(idx.begin(), idx.begin() + d);
  std::sort(out.begin(), out.end());
  return out;
}

Spectrogram apply_frame_dropout(const Spectrogram& s, const DropoutSpec& spec) {
  Spectrogram out = s;
  for (Index t : dropped_frame_indices(s.frames(), spec)) out.magnitude.col(t).setZero();
  return out;
}

std::string RobustnessRow::csv_header() { return "method,mode,keep_fraction,mean_ssim,mean_psnr_db"; }

std::string RobustnessRow::csv_row() const {
  return method + "," + to_string(mode) + "," + format_number(keep_fraction) + "," + format_number(mean_ssim) + "," +
         format_number(mean_psnr_db);
}

std::string robustness_csv(const std::vector<RobustnessRow>& rows) {
  std::string out = RobustnessRow::csv_header() + "\n";
  for (const auto& r : rows) out += r.csv_row() + "\n";
  return out;
}

std::vector<RobustnessRow> robustness_sweep(const ModelBundle& m, const Dataset& data, const SweepOptions& opts) {
  if (data.empty()) throw UsageError("robustness sweep needs at least one sample");
  if (opts.fractions.empty() || opts.modes.empty()) throw UsageError("robustness sweep needs fractions and modes");
  std::vector<DropoutSpec> cells;
  for (DropoutMode mode : opts.modes) {
    for (double p : opts.fractions) {
      DropoutSpec spec{p, mode, opts.seed, 0};
      spec.validate();
      cells.push_back(spec);
    }
  }
  if (!opts.dump_dir.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(opts.dump_dir, ec);
    if (ec) throw DataError("cannot create directory '" + opts.dump_dir + "': " + ec.message());
  }

  const Index n = static_cast<Index>(data.size());
  std::vector<Spectrogram> stego(n);
  parallel_for(n, [&](Index i) {
    const EmbedResult e = embed(data[i].secret, data[i].cover, m);
    stego[i] = analyze(e.stego, m.config.stft(), m.config.transform);
  });

  const Index C = static_cast<Index>(cells.size());
  std::vector<double> ssims(C * n), psnrs(C * n);
  std::vector<RgbImage> revealed(opts.dump_dir.empty() ? 0 : C * n);
  parallel_for(C * n, [&](Index k) {
    const Index c = k / n, i = k % n;
    const RgbImage img = reveal_spectrogram(apply_frame_dropout(stego[i], cells[c]), m);
    ssims[k] = ssim(data[i].secret, img);
    psnrs[k] = psnr(data[i].secret, img);
    if (!revealed.empty()) revealed[k] = img;
  });

  std::vector<RobustnessRow> rows;
  for (Index c = 0; c < C; ++c) {
    RobustnessRow r;
    r.method = to_string(m.config.method);
    r.mode = cells[c].mode;
    r.keep_fraction = cells[c].keep_fraction;
    for (Index i = 0; i < n; ++i) {
      r.mean_ssim += ssims[c * n + i] / static_cast<double>(n);
      r.mean_psnr_db += psnrs[c * n + i] / static_cast<double>(n);
    }
    rows.push_back(r);
    for (Index i = 0; !revealed.empty() && i < n; ++i) {
      char name[96];
      std::snprintf(name, sizeof name, "/%s_keep%.4f_%03ld.ppm", to_string(r.mode).c_str(), r.keep_fraction,
                    static_cast<long>(i));
      write_ppm(opts.dump_dir + name, revealed[c * n + i]);
    }
  }
  return rows;
}

}  // namespace stegowav
