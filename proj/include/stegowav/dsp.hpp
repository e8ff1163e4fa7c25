#pragma once

// Short-time transforms between waveforms and spectral planes.
//
// Frame m covers samples [m·hop, m·hop + N) of the tail-zero-padded signal and
// is weighted by a periodic Hann window. The STFT keeps bins 0..N/2−1 (the
// Nyquist bin is dropped and restored as zero); the STDCT keeps all N
// orthonormal DCT-II coefficients. Inverses use weighted overlap-add divided
// by the sum of squared shifted windows.
//
// Sample 0 is weighted by h[0] = 0 in the only frame that covers it, so it is
// outside the support of the analysis and is always synthesized as 0.

#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>

#include <cmath>
#include <complex>
#include <map>
#include <numbers>
#include <string>
#include <vector>

#include "stegowav/autodiff.hpp"
#include "stegowav/errors.hpp"

namespace stegowav {

enum class TransformKind { stft, stdct };

inline const char* to_string(TransformKind k) { return k == TransformKind::stft ? "stft" : "stdct"; }

struct StftConfig {
  Index frame_length = 64;  ///< N
  Index hop = 16;           ///< r

  void validate() const {
    if (frame_length < 4 || frame_length % 2 != 0) {
      throw ConfigError("frame length must be even and >= 4, got " + std::to_string(frame_length));
    }
    if (hop < 1 || hop > frame_length) {
      throw ConfigError("hop must lie in [1, " + std::to_string(frame_length) + "], got " +
                        std::to_string(hop));
    }
  }

  Index bins(TransformKind kind) const { return kind == TransformKind::stft ? frame_length / 2 : frame_length; }

  /// Frames produced by a signal of `length` samples (tail padded).
  Index frames_for(Index length) const {
    if (length < frame_length) {
      throw UsageError("signal of " + std::to_string(length) + " samples is shorter than one frame (" +
                       std::to_string(frame_length) + ")");
    }
    return (length - frame_length + hop - 1) / hop + 1;
  }

  /// Samples spanned by `frames` frames.
  Index span(Index frames) const { return frame_length + (frames - 1) * hop; }

  friend bool operator==(const StftConfig&, const StftConfig&) = default;
};

template <typename Scalar>
using Samples = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
struct BasicWaveform {
  Samples<Scalar> samples;
  int sample_rate = 16000;

  Index size() const { return samples.size(); }
};

/// Magnitude and phase planes, frequency × frame. For STDCT the signed
/// coefficients live in `magnitude` and `phase` is all zero.
template <typename Scalar>
struct BasicSpectrogram {
  RowMatrix<Scalar> magnitude;
  RowMatrix<Scalar> phase;
  StftConfig config;
  TransformKind kind = TransformKind::stft;
  Index length = 0;  ///< samples of the analysed signal
  int sample_rate = 16000;

  Index bins() const { return magnitude.rows(); }
  Index frames() const { return magnitude.cols(); }
};

/// Real and imaginary STFT planes, frequency × frame.
template <typename Scalar>
struct ComplexPlanes {
  RowMatrix<Scalar> re;
  RowMatrix<Scalar> im;
};

using Waveform = BasicWaveform<double>;
using Spectrogram = BasicSpectrogram<double>;

/// Periodic Hann weights w[n] = 0.5 − 0.5·cos(2πn/N).
template <typename Scalar = double>
Samples<Scalar> hann_window(Index n) {
  if (n < 4 || n % 2 != 0) throw ConfigError("hann window length must be even and >= 4, got " + std::to_string(n));
  Samples<Scalar> w(n);
  for (Index i = 0; i < n; ++i) {
    w[i] = Scalar(0.5) - Scalar(0.5) * std::cos(Scalar(2) * std::numbers::pi_v<Scalar> * Scalar(i) / Scalar(n));
  }
  return w;
}

/// Σ_m h²[t − m·hop] over the padded span of `frames` frames.
template <typename Scalar = double>
Samples<Scalar> overlap_denominator(const StftConfig& cfg, Index frames) {
  const Samples<Scalar> h = hann_window<Scalar>(cfg.frame_length);
  Samples<Scalar> d = Samples<Scalar>::Zero(cfg.span(frames));
  for (Index m = 0; m < frames; ++m) d.segment(m * cfg.hop, cfg.frame_length) += h.square();
  return d;
}

namespace detail {

/// Windowed frames as columns, N × T.
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> windowed_frames(const Samples<Scalar>& x,
                                                                     const StftConfig& cfg, Index frames) {
  const Index N = cfg.frame_length;
  const Samples<Scalar> h = hann_window<Scalar>(N);
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> f =
      Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>::Zero(N, frames);
  for (Index m = 0; m < frames; ++m) {
    const Index start = m * cfg.hop;
    const Index n = std::min(N, x.size() - start);
    if (n > 0) f.col(m).head(n) = (x.segment(start, n) * h.head(n)).matrix();
  }
  return f;
}

/// Weighted overlap-add of columns of `frames`, divided by the squared-window
/// sum, trimmed to `length`. Zero denominators are allowed only at sample 0.
template <typename Scalar>
Samples<Scalar> overlap_add(const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& frames,
                            const StftConfig& cfg, Index length) {
  const Index N = cfg.frame_length, T = frames.cols();
  const Samples<Scalar> h = hann_window<Scalar>(N);
  const Samples<Scalar> den = overlap_denominator<Scalar>(cfg, T);
  Samples<Scalar> out = Samples<Scalar>::Zero(cfg.span(T));
  for (Index m = 0; m < T; ++m) out.segment(m * cfg.hop, N) += frames.col(m).array() * h;
  for (Index t = 0; t < out.size(); ++t) {
    if (den[t] > 0) {
      out[t] /= den[t];
    } else if (t == 0) {
      out[t] = 0;
    } else {
      throw ConfigError("overlap-add normalization vanishes at sample " + std::to_string(t) + " (hop " +
                        std::to_string(cfg.hop) + " too large for frame length " +
                        std::to_string(cfg.frame_length) + ")");
    }
  }
  if (length > out.size()) {
    Samples<Scalar> padded = Samples<Scalar>::Zero(length);
    padded.head(out.size()) = out;
    return padded;
  }
  return out.head(length);
}

/// Adjoint of overlap_add: N × T matrix of per-frame gradients.
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> overlap_add_adjoint(const Samples<Scalar>& g,
                                                                          const StftConfig& cfg,
                                                                          Index frames) {
  const Index N = cfg.frame_length;
  const Samples<Scalar> h = hann_window<Scalar>(N);
  const Samples<Scalar> den = overlap_denominator<Scalar>(cfg, frames);
  Samples<Scalar> scaled = Samples<Scalar>::Zero(den.size());
  const Index n = std::min(g.size(), den.size());
  for (Index t = 0; t < n; ++t) scaled[t] = den[t] > 0 ? g[t] / den[t] : Scalar(0);
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> f(N, frames);
  for (Index m = 0; m < frames; ++m) f.col(m) = (scaled.segment(m * cfg.hop, N) * h).matrix();
  return f;
}

/// Adjoint of windowed_frames: scatter h·frame back onto `length` samples.
template <typename Scalar>
Samples<Scalar> windowed_frames_adjoint(const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& f,
                                        const StftConfig& cfg, Index length) {
  const Index N = cfg.frame_length;
  const Samples<Scalar> h = hann_window<Scalar>(N);
  Samples<Scalar> g = Samples<Scalar>::Zero(length);
  for (Index m = 0; m < f.cols(); ++m) {
    const Index start = m * cfg.hop;
    const Index n = std::min(N, length - start);
    if (n > 0) g.segment(start, n) += f.col(m).head(n).array() * h.head(n);
  }
  return g;
}

/// Orthonormal DCT-II matrix, row k = basis k.
template <typename Scalar>
const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& dct_matrix(Index n) {
  thread_local std::map<Index, Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>> cache;
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> d(n, n);
  const long double pi = std::numbers::pi_v<long double>;
  for (Index k = 0; k < n; ++k) {
    const long double alpha = k == 0 ? std::sqrt(1.0L / n) : std::sqrt(2.0L / n);
    for (Index i = 0; i < n; ++i) d(k, i) = static_cast<Scalar>(alpha * std::cos(pi * (i + 0.5L) * k / n));
  }
  return cache.emplace(n, std::move(d)).first->second;
}

}  // namespace detail

/// Complex analysis: bins 0..N/2−1 of the windowed DFT of every frame.
template <typename Scalar>
ComplexPlanes<Scalar> stft_planes(const Samples<Scalar>& x, const StftConfig& cfg) {
  cfg.validate();
  if (x.size() == 0) throw UsageError("stft of an empty waveform");
  const Index N = cfg.frame_length, F = cfg.bins(TransformKind::stft), T = cfg.frames_for(x.size());
  const auto frames = detail::windowed_frames(x, cfg, T);
  ComplexPlanes<Scalar> out{RowMatrix<Scalar>(F, T), RowMatrix<Scalar>(F, T)};
  Eigen::FFT<Scalar> fft;
  std::vector<Scalar> in(N);
  std::vector<std::complex<Scalar>> spec;
  for (Index m = 0; m < T; ++m) {
    for (Index n = 0; n < N; ++n) in[n] = frames(n, m);
    fft.fwd(spec, in);
    for (Index k = 0; k < F; ++k) {
      out.re(k, m) = spec[k].real();
      out.im(k, m) = spec[k].imag();
    }
  }
  return out;
}

/// Adjoint of stft_planes with respect to the input samples.
template <typename Scalar>
Samples<Scalar> stft_planes_adjoint(const ComplexPlanes<Scalar>& g, const StftConfig& cfg, Index length) {
  const Index N = cfg.frame_length, F = g.re.rows(), T = g.re.cols();
  Eigen::FFT<Scalar> fft;
  std::vector<std::complex<Scalar>> spec(N), time;
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> gf(N, T);
  for (Index m = 0; m < T; ++m) {
    std::fill(spec.begin(), spec.end(), std::complex<Scalar>(0));
    for (Index k = 0; k < F; ++k) spec[k] = {g.re(k, m), g.im(k, m)};
    fft.inv(time, spec);
    for (Index n = 0; n < N; ++n) gf(n, m) = time[n].real() * Scalar(N);
  }
  return detail::windowed_frames_adjoint(gf, cfg, length);
}

/// Overlap-add synthesis from bins 0..N/2−1; the Nyquist bin is taken as 0.
template <typename Scalar>
Samples<Scalar> istft_planes(const ComplexPlanes<Scalar>& s, const StftConfig& cfg, Index length) {
  cfg.validate();
  const Index N = cfg.frame_length, F = s.re.rows(), T = s.re.cols();
  if (F != cfg.bins(TransformKind::stft)) {
    throw ConfigError("istft: " + std::to_string(F) + " bins do not match frame length " + std::to_string(N));
  }
  Eigen::FFT<Scalar> fft;
  std::vector<std::complex<Scalar>> spec(N), time;
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> frames(N, T);
  for (Index m = 0; m < T; ++m) {
    std::fill(spec.begin(), spec.end(), std::complex<Scalar>(0));
    spec[0] = {s.re(0, m), s.im(0, m)};
    for (Index k = 1; k < F; ++k) {
      spec[k] = {s.re(k, m), s.im(k, m)};
      spec[N - k] = std::conj(spec[k]);
    }
    fft.inv(time, spec);
    for (Index n = 0; n < N; ++n) frames(n, m) = time[n].real();
  }
  return detail::overlap_add(frames, cfg, length);
}

/// Adjoint of istft_planes with respect to the real and imaginary planes.
template <typename Scalar>
ComplexPlanes<Scalar> istft_planes_adjoint(const Samples<Scalar>& g, const StftConfig& cfg, Index frames) {
  const Index N = cfg.frame_length, F = cfg.bins(TransformKind::stft);
  const auto gf = detail::overlap_add_adjoint(g, cfg, frames);
  ComplexPlanes<Scalar> out{RowMatrix<Scalar>(F, frames), RowMatrix<Scalar>(F, frames)};
  Eigen::FFT<Scalar> fft;
  std::vector<Scalar> in(N);
  std::vector<std::complex<Scalar>> spec;
  for (Index m = 0; m < frames; ++m) {
    for (Index n = 0; n < N; ++n) in[n] = gf(n, m);
    fft.fwd(spec, in);
    for (Index k = 0; k < F; ++k) {
      const Scalar c = (k == 0 ? Scalar(1) : Scalar(2)) / Scalar(N);
      out.re(k, m) = c * spec[k].real();
      out.im(k, m) = c * spec[k].imag();
    }
  }
  return out;
}

/// Orthonormal DCT-II of every windowed frame, N × T.
template <typename Scalar>
RowMatrix<Scalar> stdct_plane(const Samples<Scalar>& x, const StftConfig& cfg) {
  cfg.validate();
  if (x.size() == 0) throw UsageError("stdct of an empty waveform");
  const Index T = cfg.frames_for(x.size());
  return detail::dct_matrix<Scalar>(cfg.frame_length) * detail::windowed_frames(x, cfg, T);
}

template <typename Scalar>
Samples<Scalar> stdct_plane_adjoint(const RowMatrix<Scalar>& g, const StftConfig& cfg, Index length) {
  const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> gf =
      detail::dct_matrix<Scalar>(cfg.frame_length).transpose() * g;
  return detail::windowed_frames_adjoint(gf, cfg, length);
}

template <typename Scalar>
Samples<Scalar> istdct_plane(const RowMatrix<Scalar>& c, const StftConfig& cfg, Index length) {
  cfg.validate();
  if (c.rows() != cfg.frame_length) {
    throw ConfigError("istdct: " + std::to_string(c.rows()) + " coefficients do not match frame length " +
                      std::to_string(cfg.frame_length));
  }
  const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> frames =
      detail::dct_matrix<Scalar>(cfg.frame_length).transpose() * c;
  return detail::overlap_add(frames, cfg, length);
}

template <typename Scalar>
RowMatrix<Scalar> istdct_plane_adjoint(const Samples<Scalar>& g, const StftConfig& cfg, Index frames) {
  return detail::dct_matrix<Scalar>(cfg.frame_length) * detail::overlap_add_adjoint(g, cfg, frames);
}

/// Principal angle in (−π, π].
template <typename Scalar>
Scalar principal_angle(Scalar im, Scalar re) {
  const Scalar a = std::atan2(im, re);
  return a <= -std::numbers::pi_v<Scalar> ? std::numbers::pi_v<Scalar> : a;
}

template <typename Scalar>
BasicSpectrogram<Scalar> stft(const BasicWaveform<Scalar>& w, const StftConfig& cfg) {
  const ComplexPlanes<Scalar> c = stft_planes(w.samples, cfg);
  BasicSpectrogram<Scalar> s;
  s.magnitude = (c.re.array().square() + c.im.array().square()).sqrt().matrix();
  s.phase = RowMatrix<Scalar>(c.re.rows(), c.re.cols());
  for (Index i = 0; i < c.re.size(); ++i) s.phase.data()[i] = principal_angle(c.im.data()[i], c.re.data()[i]);
  s.config = cfg;
  s.kind = TransformKind::stft;
  s.length = w.size();
  s.sample_rate = w.sample_rate;
  return s;
}

template <typename Scalar>
ComplexPlanes<Scalar> to_complex(const BasicSpectrogram<Scalar>& s) {
  return {(s.magnitude.array() * s.phase.array().cos()).matrix(),
          (s.magnitude.array() * s.phase.array().sin()).matrix()};
}

template <typename Scalar>
BasicWaveform<Scalar> istft(const BasicSpectrogram<Scalar>& s) {
  if (s.kind != TransformKind::stft) throw UsageError("istft needs an stft spectrogram");
  return {istft_planes(to_complex(s), s.config, s.length), s.sample_rate};
}

template <typename Scalar>
BasicSpectrogram<Scalar> stdct(const BasicWaveform<Scalar>& w, const StftConfig& cfg) {
  BasicSpectrogram<Scalar> s;
  s.magnitude = stdct_plane(w.samples, cfg);
  s.phase = RowMatrix<Scalar>::Zero(s.magnitude.rows(), s.magnitude.cols());
  s.config = cfg;
  s.kind = TransformKind::stdct;
  s.length = w.size();
  s.sample_rate = w.sample_rate;
  return s;
}

template <typename Scalar>
BasicWaveform<Scalar> istdct(const BasicSpectrogram<Scalar>& s) {
  if (s.kind != TransformKind::stdct) throw UsageError("istdct needs an stdct spectrogram");
  return {istdct_plane(s.magnitude, s.config, s.length), s.sample_rate};
}

template <typename Scalar>
BasicSpectrogram<Scalar> analyze(const BasicWaveform<Scalar>& w, const StftConfig& cfg, TransformKind kind) {
  return kind == TransformKind::stft ? stft(w, cfg) : stdct(w, cfg);
}

template <typename Scalar>
BasicWaveform<Scalar> synthesize(const BasicSpectrogram<Scalar>& s) {
  return s.kind == TransformKind::stft ? istft(s) : istdct(s);
}

/// log(1 + |magnitude|) scaled to [0, 1] by its maximum. One-way.
template <typename Scalar>
RowMatrix<Scalar> log_view(const BasicSpectrogram<Scalar>& s) {
  RowMatrix<Scalar> v = s.magnitude.array().abs().log1p().matrix();
  const Scalar peak = v.size() ? v.maxCoeff() : Scalar(0);
  if (peak > 0) v /= peak;
  return v;
}

// ---------------------------------------------------------------------------
// Differentiable transforms. Complex planes travel as [2, F, T] tensors
// (real part first).

template <typename Scalar>
BasicVar<Scalar> stft_op(BasicVar<Scalar> samples, const StftConfig& cfg) {
  const Index length = samples.size();
  const ComplexPlanes<Scalar> c = stft_planes<Scalar>(samples.value().data(), cfg);
  const Index F = c.re.rows(), T = c.re.cols();
  BasicTensor<Scalar> out = BasicTensor<Scalar>::zeros({2, F, T});
  out.plane(0) = c.re;
  out.plane(1) = c.im;
  return samples.tape->record(std::move(out), {samples}, [=](auto& t, const auto& g) {
    ComplexPlanes<Scalar> gp{Eigen::Map<const RowMatrix<Scalar>>(g.data(), F, T),
                             Eigen::Map<const RowMatrix<Scalar>>(g.data() + F * T, F, T)};
    t.accumulate(samples, stft_planes_adjoint(gp, cfg, length));
  });
}

template <typename Scalar>
BasicVar<Scalar> istft_op(BasicVar<Scalar> planes, const StftConfig& cfg, Index length) {
  detail::require_rank("istft_op", planes, 3);
  const Index F = planes.shape()[1], T = planes.shape()[2];
  ComplexPlanes<Scalar> c{planes.value().plane(0), planes.value().plane(1)};
  Samples<Scalar> w = istft_planes(c, cfg, length);
  return planes.tape->record(BasicTensor<Scalar>({length}, std::move(w)), {planes},
                             [=](auto& t, const auto& g) {
                               const ComplexPlanes<Scalar> gp = istft_planes_adjoint<Scalar>(g, cfg, T);
                               typename BasicTensor<Scalar>::Array ga(2 * F * T);
                               ga.head(F * T) = Eigen::Map<const typename BasicTensor<Scalar>::Array>(
                                   gp.re.data(), F * T);
                               ga.tail(F * T) = Eigen::Map<const typename BasicTensor<Scalar>::Array>(
                                   gp.im.data(), F * T);
                               t.accumulate(planes, ga);
                             });
}

template <typename Scalar>
BasicVar<Scalar> stdct_op(BasicVar<Scalar> samples, const StftConfig& cfg) {
  const Index length = samples.size();
  RowMatrix<Scalar> c = stdct_plane<Scalar>(samples.value().data(), cfg);
  const Index F = c.rows(), T = c.cols();
  return samples.tape->record(BasicTensor<Scalar>::from_plane(c), {samples}, [=](auto& t, const auto& g) {
    const RowMatrix<Scalar> gm = Eigen::Map<const RowMatrix<Scalar>>(g.data(), F, T);
    t.accumulate(samples, stdct_plane_adjoint(gm, cfg, length));
  });
}

template <typename Scalar>
BasicVar<Scalar> istdct_op(BasicVar<Scalar> plane, const StftConfig& cfg, Index length) {
  detail::require_rank("istdct_op", plane, 3);
  const Index T = plane.shape()[2];
  Samples<Scalar> w = istdct_plane<Scalar>(plane.value().plane(0), cfg, length);
  return plane.tape->record(BasicTensor<Scalar>({length}, std::move(w)), {plane}, [=](auto& t, const auto& g) {
    const RowMatrix<Scalar> gm = istdct_plane_adjoint<Scalar>(g, cfg, T);
    t.accumulate(plane, Eigen::Map<const typename BasicTensor<Scalar>::Array>(gm.data(), gm.size()));
  });
}

/// |z| of a [2, F, T] complex tensor, as [1, F, T]. Gradient 0 at z = 0.
template <typename Scalar>
BasicVar<Scalar> magnitude_op(BasicVar<Scalar> z) {
  detail::require_rank("magnitude_op", z, 3);
  const Index F = z.shape()[1], T = z.shape()[2], n = F * T;
  const auto& d = z.value().data();
  typename BasicTensor<Scalar>::Array mag = (d.head(n).square() + d.tail(n).square()).sqrt();
  BasicTensor<Scalar> out({1, F, T}, mag);
  return z.tape->record(std::move(out), {z}, [=](auto& t, const auto& g) {
    const auto& zd = t.value(z).data();
    typename BasicTensor<Scalar>::Array gz(2 * n);
    for (Index i = 0; i < n; ++i) {
      const Scalar m = mag[i];
      gz[i] = m > 0 ? g[i] * zd[i] / m : Scalar(0);
      gz[n + i] = m > 0 ? g[i] * zd[n + i] / m : Scalar(0);
    }
    t.accumulate(z, gz);
  });
}

/// arg(z) of a [2, F, T] complex tensor, as [1, F, T]. Gradient 0 at z = 0.
template <typename Scalar>
BasicVar<Scalar> phase_op(BasicVar<Scalar> z) {
  detail::require_rank("phase_op", z, 3);
  const Index F = z.shape()[1], T = z.shape()[2], n = F * T;
  const auto& d = z.value().data();
  typename BasicTensor<Scalar>::Array ph(n);
  for (Index i = 0; i < n; ++i) ph[i] = principal_angle(d[n + i], d[i]);
  return z.tape->record(BasicTensor<Scalar>({1, F, T}, ph), {z}, [=](auto& t, const auto& g) {
    const auto& zd = t.value(z).data();
    typename BasicTensor<Scalar>::Array gz(2 * n);
    for (Index i = 0; i < n; ++i) {
      const Scalar re = zd[i], im = zd[n + i], r2 = re * re + im * im;
      gz[i] = r2 > 0 ? -g[i] * im / r2 : Scalar(0);
      gz[n + i] = r2 > 0 ? g[i] * re / r2 : Scalar(0);
    }
    t.accumulate(z, gz);
  });
}

/// [mag·cos(phase); mag·sin(phase)] as a [2, F, T] tensor.
template <typename Scalar>
BasicVar<Scalar> polar_op(BasicVar<Scalar> mag, BasicVar<Scalar> phase) {
  detail::require_same_shape("polar_op", mag, phase);
  detail::require_rank("polar_op", mag, 3);
  if (mag.shape()[0] != 1) throw ConfigError("polar_op: expected single-depth planes, got " + shape_string(mag.shape()));
  const Index F = mag.shape()[1], T = mag.shape()[2], n = F * T;
  const auto& m = mag.value().data();
  const auto& p = phase.value().data();
  typename BasicTensor<Scalar>::Array z(2 * n);
  z.head(n) = m * p.cos();
  z.tail(n) = m * p.sin();
  return mag.tape->record(BasicTensor<Scalar>({2, F, T}, std::move(z)), {mag, phase},
                          [=](auto& t, const auto& g) {
                            const auto& mv = t.value(mag).data();
                            const auto& pv = t.value(phase).data();
                            const auto gre = g.head(n), gim = g.tail(n);
                            t.accumulate(mag, gre * pv.cos() + gim * pv.sin());
                            t.accumulate(phase, mv * (gim * pv.cos() - gre * pv.sin()));
                          });
}

}  // namespace stegowav
