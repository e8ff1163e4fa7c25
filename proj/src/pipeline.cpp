#include "stegowav/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <numbers>
#include <sstream>
#include <thread>

#include "stegowav/io.hpp"

namespace stegowav {

// ---------------------------------------------------------------------------
// Threads

unsigned worker_threads() {
  if (const char* env = std::getenv("STEGOWAV_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v >= 1) return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(Index n, const std::function<void(Index)>& fn) {
  const Index workers = std::min<Index>(n, worker_threads());
  if (workers <= 1) {
    for (Index i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> pool;
  for (Index w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (Index i = w; i < n; i += workers) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
}

// ---------------------------------------------------------------------------
// Synthetic data

namespace {

double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }
double uniform(std::mt19937_64& rng, double lo, double hi) { return lo + (hi - lo) * unit(rng); }
Index uniform_int(std::mt19937_64& rng, Index lo, Index hi) {
  return lo + static_cast<Index>(unit(rng) * static_cast<double>(hi - lo + 1));
}

RgbImage synth_image(std::mt19937_64& rng, Index size) {
  RgbImage img(size, size);
  const double ax = uniform(rng, -1, 1), ay = uniform(rng, -1, 1);
  for (Index c = 0; c < 3; ++c) {
    const double c0 = uniform(rng, 0.1, 0.9), c1 = uniform(rng, 0.1, 0.9);
    for (Index y = 0; y < size; ++y) {
      for (Index x = 0; x < size; ++x) {
        const double u = (ax * x + ay * y) / static_cast<double>(size) * 0.5 + 0.5;
        img.channel(c)(y, x) = c0 + (c1 - c0) * u;
      }
    }
  }
  const Index shapes = uniform_int(rng, 1, 3);
  for (Index s = 0; s < shapes; ++s) {
    const double r = uniform(rng, 0, 1), g = uniform(rng, 0, 1), b = uniform(rng, 0, 1);
    const double cx = uniform(rng, 0, size), cy = uniform(rng, 0, size);
    const double extent = uniform(rng, 0.15, 0.35) * static_cast<double>(size);
    const bool circle = unit(rng) < 0.5;
    for (Index y = 0; y < size; ++y) {
      for (Index x = 0; x < size; ++x) {
        const double dx = x + 0.5 - cx, dy = y + 0.5 - cy;
        const bool inside = circle ? dx * dx + dy * dy <= extent * extent
                                   : std::abs(dx) <= extent && std::abs(dy) <= 0.6 * extent;
        if (inside) img.set_pixel(y, x, Pixel(r, g, b));
      }
    }
  }
  img.clamp();
  return img;
}

Waveform synth_audio(std::mt19937_64& rng, Index length, int rate) {
  Samples<double> s = Samples<double>::Zero(length);
  const Index tones = uniform_int(rng, 3, 8);
  for (Index k = 0; k < tones; ++k) {
    const double f = uniform(rng, 50.0, 0.4 * rate), amp = uniform(rng, 0.2, 1.0);
    const double ph = uniform(rng, -std::numbers::pi, std::numbers::pi);
    for (Index t = 0; t < length; ++t) s[t] += amp * std::sin(2 * std::numbers::pi * f * t / rate + ph);
  }
  // Pink noise through Paul Kellet's economy filter.
  double b0 = 0, b1 = 0, b2 = 0;
  for (Index t = 0; t < length; ++t) {
    const double white = uniform(rng, -1, 1);
    b0 = 0.99765 * b0 + white * 0.0990460;
    b1 = 0.96300 * b1 + white * 0.2965164;
    b2 = 0.57000 * b2 + white * 1.0526913;
    s[t] += 0.05 * (b0 + b1 + b2 + white * 0.1848);
  }
  const double peak = s.abs().maxCoeff();
  if (peak > 0) s *= uniform(rng, 0.3, 0.8) / peak;
  return Waveform{std::move(s), rate};
}

}  // namespace

Index synth_cover_length(Profile p) { return p == Profile::desk ? 1280 : 70560; }
int synth_sample_rate(Profile p) { return p == Profile::desk ? 16000 : 44100; }
Index synth_image_size(Profile p) { return p == Profile::desk ? 16 : 256; }

Dataset synth_dataset(Index n, Profile profile, std::uint64_t seed) {
  if (n < 1) throw UsageError("dataset size must be at least 1");
  std::mt19937_64 rng(seed);
  Dataset data;
  for (Index i = 0; i < n; ++i) {
    RgbImage img = synth_image(rng, synth_image_size(profile));
    data.push_back({std::move(img), synth_audio(rng, synth_cover_length(profile), synth_sample_rate(profile))});
  }
  return data;
}

void save_dataset(const Dataset& data, const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw DataError("cannot create directory '" + dir + "': " + ec.message());
  for (std::size_t i = 0; i < data.size(); ++i) {
    char stem[32];
    std::snprintf(stem, sizeof stem, "pair_%03zu", i);
    write_ppm(dir + "/" + stem + ".ppm", data[i].secret);
    write_wav(dir + "/" + stem + ".wav", data[i].cover);
  }
}

Dataset load_dataset(const std::string& dir) {
  if (!std::filesystem::is_directory(dir)) throw DataError("dataset directory '" + dir + "' does not exist");
  std::vector<std::string> stems;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.path().extension() == ".ppm") stems.push_back(e.path().stem().string());
  }
  std::sort(stems.begin(), stems.end());
  if (stems.empty()) throw DataError("dataset directory '" + dir + "' holds no .ppm files");
  Dataset data;
  for (const auto& stem : stems) {
    const std::string wav = dir + "/" + stem + ".wav";
    if (!std::filesystem::exists(wav)) throw DataError("missing cover '" + wav + "'");
    data.push_back({read_ppm(dir + "/" + stem + ".ppm"), read_wav(wav)});
  }
  return data;
}

// ---------------------------------------------------------------------------
// Graph pieces shared by training and inference

Waveform fit_cover(const Waveform& cover, const PipelineConfig& cfg) {
  const Index need = cfg.cover_length();
  if (cover.size() < need) {
    throw UsageError("cover has " + std::to_string(cover.size()) + " samples, the configuration needs " +
                     std::to_string(need));
  }
  return Waveform{cover.samples.head(need), cover.sample_rate};
}

namespace {

LumaMode luma_mode(const PipelineConfig& cfg) { return cfg.luma ? LumaMode::buffer : LumaMode::zero_pad; }

void check_secret(const RgbImage& s, const PipelineConfig& cfg) {
  if (s.height() != cfg.image_size || s.width() != cfg.image_size) {
    throw UsageError("secret image is " + std::to_string(s.height()) + "x" + std::to_string(s.width()) +
                     ", the model expects " + std::to_string(cfg.image_size) + "x" + std::to_string(cfg.image_size));
  }
}

Tensor secret_input(const RgbImage& s, const ModelBundle& m) {
  check_secret(s, m.config);
  if (m.context().method == EmbeddingMethod::multichannel) return s.to_tensor();
  return Tensor::from_plane(shuffle_with_luma(s, luma_mode(m.config)));
}

struct Watermarks {
  Var magnitude;  ///< arranged watermark for the magnitude / coefficient plane
  Var phase;      ///< arranged watermark for the phase plane
};

Watermarks hide_graph(const Bindings& params, const ModelBundle& m, Var secret) {
  const EmbeddingContext ctx = m.context();
  const Var enc = ctx.enc_weight_count() ? params["ctx.enc_weights"] : Var{};
  auto hide = [&](const std::string& prefix) {
    return encode_arrange(unet_forward(m.hide_config(), params, prefix, secret), ctx, enc);
  };
  Watermarks w;
  switch (m.config.loss.container) {
    case ContainerKind::magnitude: w.magnitude = hide("hide"); break;
    case ContainerKind::phase: w.phase = hide("hide"); break;
    case ContainerKind::dual:
      w.magnitude = hide("hide");
      w.phase = hide("hide_phase");
      break;
  }
  return w;
}

/// Reveal network output before unshuffling: [1, 2H, 2W] plane or [3, H, W].
Var reveal_graph(const Bindings& params, const ModelBundle& m, Var magnitude, Var phase) {
  const EmbeddingContext ctx = m.context();
  const Var dec = ctx.dec_weight_count() ? params["ctx.dec_weights"] : Var{};
  auto branch = [&](const std::string& prefix, Var plane) {
    return decode_finalize(unet_forward(m.reveal_config(), params, prefix, decode_prepare(plane, ctx)), ctx, dec);
  };
  switch (m.config.loss.container) {
    case ContainerKind::magnitude: return branch("reveal", magnitude);
    case ContainerKind::phase: return branch("reveal", phase);
    case ContainerKind::dual: return couple(branch("reveal", magnitude), branch("reveal_phase", phase), params["coupling"]);
  }
  throw ConfigError("unknown container kind");
}

void check_spectrogram(const Spectrogram& s, const ModelBundle& m) {
  const EmbeddingContext ctx = m.context();
  if (s.kind != m.config.transform || s.bins() != ctx.container_h || s.frames() != ctx.container_w) {
    throw UsageError("spectrogram " + std::to_string(s.bins()) + "x" + std::to_string(s.frames()) + " (" +
                     to_string(s.kind) + ") does not match the model's " + std::to_string(ctx.container_h) + "x" +
                     std::to_string(ctx.container_w) + " " + to_string(m.config.transform) + " container");
  }
}

}  // namespace

PreparedSample prepare_sample(const SamplePair& pair, const ModelBundle& m) {
  const PipelineConfig& cfg = m.config;
  const Waveform cover = fit_cover(pair.cover, cfg);
  const Spectrogram spec = analyze(cover, cfg.stft(), cfg.transform);
  check_spectrogram(spec, m);
  PreparedSample s;
  s.secret_input = secret_input(pair.secret, m);
  s.secret_target = pair.secret.to_tensor();
  s.magnitude = Tensor::from_plane(spec.magnitude);
  s.phase = Tensor::from_plane(spec.phase);
  s.cover_reference = Tensor({cover.size()}, synthesize(spec).samples);
  return s;
}

SampleGraph sample_graph(Tape& tape, const Bindings& params, const ModelBundle& m, const PreparedSample& s) {
  const PipelineConfig& cfg = m.config;
  const StftConfig stft = cfg.stft();
  const Index length = s.cover_reference.size();
  const Watermarks wm = hide_graph(params, m, tape.constant(s.secret_input));
  const Var M = tape.constant(s.magnitude), P = tape.constant(s.phase);
  const Var Mp = wm.magnitude.tape ? add(M, wm.magnitude) : M;
  const Var Pp = wm.phase.tape ? add(P, wm.phase) : P;

  SampleGraph g;
  Var out;
  if (cfg.transform == TransformKind::stdct) {
    g.stego = istdct_op(Mp, stft, length);
    out = reveal_graph(params, m, stdct_op(g.stego, stft), Var{});
  } else {
    g.stego = istft_op(polar_op(Mp, Pp), stft, length);
    const Var z = stft_op(g.stego, stft);
    const ContainerKind kind = cfg.loss.container;
    out = reveal_graph(params, m, kind == ContainerKind::phase ? Var{} : magnitude_op(z),
                       kind == ContainerKind::magnitude ? Var{} : phase_op(z));
  }
  g.revealed = m.context().outputs_rgb() ? out : unshuffle_op(out, luma_mode(cfg));

  LossInputs in;
  in.s = tape.constant(s.secret_target);
  in.s_prime = g.revealed;
  in.w = tape.constant(s.cover_reference);
  in.w_prime = g.stego;
  if (cfg.loss.container == ContainerKind::phase) {
    in.m = P;
    in.m_prime = Pp;
  } else {
    in.m = M;
    in.m_prime = Mp;
  }
  if (cfg.loss.container == ContainerKind::dual) {
    in.p = P;
    in.p_prime = Pp;
  }
  g.terms = composite_loss(cfg.loss, in);
  return g;
}

// ---------------------------------------------------------------------------
// Inference

EmbedResult embed(const RgbImage& secret, const Waveform& cover, const ModelBundle& m) {
  const PipelineConfig& cfg = m.config;
  EmbedResult r;
  r.cover_spectrogram = analyze(fit_cover(cover, cfg), cfg.stft(), cfg.transform);
  check_spectrogram(r.cover_spectrogram, m);
  Tape tape;
  const Bindings params(tape, m.params, false);
  const Watermarks wm = hide_graph(params, m, tape.constant(secret_input(secret, m)));

  r.stego_spectrogram = r.cover_spectrogram;
  double energy = 0;
  if (wm.magnitude.tape) {
    const Plane w = wm.magnitude.value().plane(0);
    r.stego_spectrogram.magnitude += w;
    energy += w.squaredNorm();
  }
  if (wm.phase.tape) {
    const Plane w = wm.phase.value().plane(0);
    r.stego_spectrogram.phase += w;
    energy += w.squaredNorm();
  }
  const Index planes = m.dual() ? 2 : 1;
  r.container_l2 = std::sqrt(energy / static_cast<double>(planes * r.cover_spectrogram.magnitude.size()));
  r.stego = synthesize(r.stego_spectrogram);
  r.cover_reference = synthesize(r.cover_spectrogram);
  r.snr_db = snr_db(r.cover_reference.samples, r.stego.samples);
  return r;
}

RgbImage reveal_spectrogram(const Spectrogram& s, const ModelBundle& m) {
  check_spectrogram(s, m);
  Tape tape;
  const Bindings params(tape, m.params, false);
  const Var mag = tape.constant(Tensor::from_plane(s.magnitude));
  const Var ph = tape.constant(Tensor::from_plane(s.phase));
  const Var out = reveal_graph(params, m, mag, ph);
  if (m.context().outputs_rgb()) return RgbImage::from_tensor(out.value());
  return unshuffle_with_luma(Plane(out.value().plane(0)), luma_mode(m.config));
}

RgbImage reveal(const Waveform& stego, const ModelBundle& m) {
  const Index need = m.config.cover_length();
  if (stego.size() != need) {
    throw UsageError("stego waveform has " + std::to_string(stego.size()) + " samples, the model expects " +
                     std::to_string(need));
  }
  return reveal_spectrogram(analyze(stego, m.config.stft(), m.config.transform), m);
}

// ---------------------------------------------------------------------------
// Training

std::string train_log_header() { return "step,total,image_l1,wave_term,mag_l2,phase_l2"; }

std::string train_log_csv(const std::vector<TrainLogRow>& rows) {
  std::string out = train_log_header() + "\n";
  for (const auto& r : rows) {
    out += std::to_string(r.step) + "," + format_number(r.total) + "," + format_number(r.image_l1) + "," +
           format_number(r.wave_term) + "," + format_number(r.mag_l2) + "," + format_number(r.phase_l2) + "\n";
  }
  return out;
}

namespace {

double prepared_loss(const std::vector<PreparedSample>& prepared, const ModelBundle& m) {
  std::vector<double> losses(prepared.size());
  parallel_for(static_cast<Index>(prepared.size()), [&](Index i) {
    Tape tape;
    const Bindings params(tape, m.params, false);
    losses[i] = sample_graph(tape, params, m, prepared[i]).terms.total.value()[0];
  });
  double sum = 0;
  for (double l : losses) sum += l;
  return sum / static_cast<double>(losses.size());
}

struct SampleStep {
  std::vector<Tensor::Array> grads;
  double terms[5] = {0, 0, 0, 0, 0};
};

}  // namespace

double dataset_loss(const Dataset& data, const ModelBundle& m) {
  std::vector<PreparedSample> prepared;
  for (const auto& p : data) prepared.push_back(prepare_sample(p, m));
  return prepared_loss(prepared, m);
}

TrainResult train(const Dataset& data, const PipelineConfig& cfg) { return train(data, ModelBundle::create(cfg)); }

TrainResult train(const Dataset& data, ModelBundle model) {
  const PipelineConfig cfg = model.config;
  cfg.validate();
  if (data.empty()) throw UsageError("training needs at least one sample");
  std::vector<PreparedSample> prepared;
  for (const auto& p : data) prepared.push_back(prepare_sample(p, model));

  TrainResult result;
  result.initial_loss = prepared_loss(prepared, model);

  const std::size_t P = model.params.size();
  std::vector<Tensor::Array> m1(P), m2(P);
  for (std::size_t p = 0; p < P; ++p) {
    m1[p] = Tensor::Array::Zero(model.params[p].value.size());
    m2[p] = Tensor::Array::Zero(model.params[p].value.size());
  }

  std::mt19937_64 shuffle_rng(cfg.seed ^ 0x5deece66dULL);
  std::vector<Index> order(prepared.size());
  std::size_t cursor = order.size();
  auto next_index = [&]() {
    if (cursor == order.size()) {
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<Index>(i);
      for (std::size_t i = order.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(unit(shuffle_rng) * static_cast<double>(i));
        std::swap(order[i - 1], order[j]);
      }
      cursor = 0;
    }
    return order[cursor++];
  };

  static const char* kTermNames[5] = {"total", "image_l1", "wave_term", "mag_l2", "phase_l2"};
  const Index batch = std::min<Index>(cfg.batch_size, static_cast<Index>(prepared.size()));
  for (int step = 1; step <= cfg.steps; ++step) {
    std::vector<Index> members(batch);
    for (Index& i : members) i = next_index();
    std::vector<SampleStep> results(batch);
    parallel_for(batch, [&](Index b) {
      Tape tape;
      const Bindings params(tape, model.params, true);
      const SampleGraph g = sample_graph(tape, params, model, prepared[members[b]]);
      SampleStep& r = results[b];
      const LossTerms& t = g.terms;
      const Var vars[5] = {t.total, t.image, t.wave, t.mag, t.phase};
      for (int k = 0; k < 5; ++k) r.terms[k] = vars[k].value()[0];
      if (!std::isfinite(r.terms[0])) return;
      tape.backward(t.total);
      for (const Var& v : params.vars()) r.grads.push_back(tape.grad(v));
    });

    TrainLogRow row;
    row.step = step;
    double sums[5] = {0, 0, 0, 0, 0};
    for (const SampleStep& r : results) {
      // Components first so the message names the term that went bad.
      for (int k : {1, 2, 3, 4, 0}) {
        if (!std::isfinite(r.terms[k])) {
          throw NumericError("step " + std::to_string(step) + ": " + kTermNames[k] + " loss is " +
                             format_number(r.terms[k]));
        }
        sums[k] += r.terms[k];
      }
    }
    row.total = sums[0] / batch;
    row.image_l1 = sums[1] / batch;
    row.wave_term = sums[2] / batch;
    row.mag_l2 = sums[3] / batch;
    row.phase_l2 = sums[4] / batch;
    result.log.push_back(row);

    const double b1 = cfg.adam_beta1, b2 = cfg.adam_beta2;
    const double c1 = 1 - std::pow(b1, step), c2 = 1 - std::pow(b2, step);
    for (std::size_t p = 0; p < P; ++p) {
      Tensor::Array g = results[0].grads[p];
      for (Index b = 1; b < batch; ++b) g += results[b].grads[p];
      g /= static_cast<double>(batch);
      if (!g.allFinite()) {
        throw NumericError("step " + std::to_string(step) + ": non-finite gradient for parameter '" +
                           model.params[p].name + "'");
      }
      m1[p] = b1 * m1[p] + (1 - b1) * g;
      m2[p] = b2 * m2[p] + (1 - b2) * g.square();
      if (cfg.lr == 0) continue;
      Tensor& value = model.params[p].value;
      for (Index i = 0; i < value.size(); ++i) {
        value[i] -= cfg.lr * (m1[p][i] / c1) / (std::sqrt(m2[p][i] / c2) + cfg.adam_eps);
      }
    }
  }
  result.final_loss = prepared_loss(prepared, model);
  result.model = std::move(model);
  return result;
}

// ---------------------------------------------------------------------------
// Evaluation

double image_l1(const RgbImage& a, const RgbImage& b) {
  double s = 0;
  for (Index c = 0; c < 3; ++c) s += (a.channel(c) - b.channel(c)).cwiseAbs().sum();
  return s / static_cast<double>(3 * a.height() * a.width());
}

double best_constant_l1(const RgbImage& secret) {
  std::vector<double> v;
  for (Index c = 0; c < 3; ++c) v.insert(v.end(), secret.channel(c).data(), secret.channel(c).data() + secret.channel(c).size());
  std::sort(v.begin(), v.end());
  const double med = v.size() % 2 ? v[v.size() / 2] : 0.5 * (v[v.size() / 2 - 1] + v[v.size() / 2]);
  double s = 0;
  for (double x : v) s += std::abs(x - med);
  return s / static_cast<double>(v.size());
}

Evaluation evaluate(const Dataset& data, const ModelBundle& m) {
  const PipelineConfig& cfg = m.config;
  Evaluation ev;
  ev.samples.resize(data.size());
  std::vector<double> l1s(data.size()), baselines(data.size());
  parallel_for(static_cast<Index>(data.size()), [&](Index i) {
    const EmbedResult e = embed(data[i].secret, data[i].cover, m);
    const RgbImage revealed = reveal(e.stego, m);
    MetricsRow& row = ev.samples[i];
    row.method = to_string(cfg.method);
    row.container = to_string(cfg.loss.container);
    row.beta = cfg.loss.beta;
    row.lambda = cfg.loss.lambda;
    row.ssim = ssim(data[i].secret, revealed);
    row.psnr_db = psnr(data[i].secret, revealed);
    row.snr_db = e.snr_db;
    const Samples<double>& ref = e.cover_reference.samples;
    row.waveform_loss = cfg.loss.wave == WaveLoss::l1 ? (ref - e.stego.samples).abs().mean()
                                                       : soft_dtw(ref, e.stego.samples, cfg.loss.gamma, false).value;
    row.hist_l1 = histogram_l1(rgb_histogram(data[i].secret), rgb_histogram(revealed));
    l1s[i] = image_l1(data[i].secret, revealed);
    baselines[i] = best_constant_l1(data[i].secret);
  });
  const double n = static_cast<double>(data.size());
  ev.mean = ev.samples.front();
  ev.mean.ssim = ev.mean.psnr_db = ev.mean.snr_db = ev.mean.waveform_loss = ev.mean.hist_l1 = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    ev.mean.ssim += ev.samples[i].ssim / n;
    ev.mean.psnr_db += ev.samples[i].psnr_db / n;
    ev.mean.snr_db += ev.samples[i].snr_db / n;
    ev.mean.waveform_loss += ev.samples[i].waveform_loss / n;
    ev.mean.hist_l1 += ev.samples[i].hist_l1 / n;
    ev.revealed_l1 += l1s[i] / n;
    ev.baseline_l1 += baselines[i] / n;
  }
  return ev;
}

}  // namespace stegowav
