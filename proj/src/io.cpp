#include "stegowav/io.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

namespace stegowav {

Bytes read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "' for reading");
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const std::string& path, const Bytes& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("failed writing '" + path + "'");
}

void write_text(const std::string& path, const std::string& text) { write_file(path, Bytes(text.begin(), text.end())); }

std::string read_text(const std::string& path) {
  const Bytes b = read_file(path);
  return std::string(b.begin(), b.end());
}

namespace {

/// Little-endian cursor that reports the byte offset of any failure.
class Reader {
 public:
  Reader(const Bytes& b, std::string what) : b_(b), what_(std::move(what)) {}

  std::size_t offset() const { return pos_; }
  bool done() const { return pos_ >= b_.size(); }

  void need(std::size_t n) const {
    if (b_.size() - pos_ < n) {
      throw DataError(what_ + ": truncated at byte " + std::to_string(pos_) + " (need " + std::to_string(n) +
                      " more bytes)");
    }
  }
  std::uint64_t uint(int bytes) {
    need(bytes);
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(b_[pos_ + i]) << (8 * i);
    pos_ += bytes;
    return v;
  }
  std::string text(std::size_t n) {
    need(n);
    std::string s(b_.begin() + static_cast<std::ptrdiff_t>(pos_), b_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
    pos_ += n;
    return s;
  }
  double f64() {
    const std::uint64_t bits = uint(8);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }
  void skip(std::size_t n) {
    need(n);
    pos_ += n;
  }
  [[noreturn]] void fail(const std::string& msg, std::size_t at) const {
    throw DataError(what_ + ": " + msg + " at byte " + std::to_string(at));
  }

 private:
  const Bytes& b_;
  std::string what_;
  std::size_t pos_ = 0;
};

void put_uint(Bytes& out, std::uint64_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_text(Bytes& out, const std::string& s) { out.insert(out.end(), s.begin(), s.end()); }

void put_f64(Bytes& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put_uint(out, bits, 8);
}

}  // namespace

// ---------------------------------------------------------------------------
// WAV

Waveform decode_wav(const Bytes& bytes) {
  Reader r(bytes, "wav");
  if (r.text(4) != "RIFF") r.fail("missing RIFF tag", 0);
  r.uint(4);
  if (r.text(4) != "WAVE") r.fail("missing WAVE tag", 8);
  bool have_fmt = false;
  int rate = 0;
  while (!r.done()) {
    const std::size_t at = r.offset();
    const std::string id = r.text(4);
    const std::size_t size = r.uint(4);
    if (id == "fmt ") {
      if (size < 16) r.fail("fmt chunk too short", at);
      const auto format = r.uint(2), channels = r.uint(2);
      rate = static_cast<int>(r.uint(4));
      r.uint(4);
      r.uint(2);
      const auto bits = r.uint(2);
      if (format != 1 || channels != 1 || bits != 16) {
        r.fail("only mono 16-bit PCM is supported (format " + std::to_string(format) + ", " +
                   std::to_string(channels) + " channels, " + std::to_string(bits) + " bits)",
               at);
      }
      if (rate <= 0) r.fail("non-positive sample rate", at);
      r.skip(size - 16 + (size & 1));
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) r.fail("data chunk before fmt chunk", at);
      if (size % 2) r.fail("odd data chunk size", at);
      Samples<double> s(static_cast<Index>(size / 2));
      for (Index i = 0; i < s.size(); ++i) {
        const auto raw = static_cast<std::int16_t>(static_cast<std::uint16_t>(r.uint(2)));
        s[i] = raw / 32768.0;
      }
      return Waveform{std::move(s), rate};
    } else {
      r.skip(size + (size & 1));
    }
  }
  throw DataError("wav: no data chunk");
}

Bytes encode_wav(const Waveform& w) {
  const std::size_t data = static_cast<std::size_t>(w.size()) * 2;
  Bytes out;
  out.reserve(44 + data);
  put_text(out, "RIFF");
  put_uint(out, 36 + data, 4);
  put_text(out, "WAVEfmt ");
  put_uint(out, 16, 4);
  put_uint(out, 1, 2);
  put_uint(out, 1, 2);
  put_uint(out, static_cast<std::uint64_t>(w.sample_rate), 4);
  put_uint(out, static_cast<std::uint64_t>(w.sample_rate) * 2, 4);
  put_uint(out, 2, 2);
  put_uint(out, 16, 2);
  put_text(out, "data");
  put_uint(out, data, 4);
  for (Index i = 0; i < w.size(); ++i) {
    const double v = std::clamp(std::round(w.samples[i] * 32768.0), -32768.0, 32767.0);
    put_uint(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(v)), 2);
  }
  return out;
}

Waveform read_wav(const std::string& path) {
  try {
    return decode_wav(read_file(path));
  } catch (const DataError& e) {
    throw DataError("'" + path + "': " + e.what());
  }
}

void write_wav(const std::string& path, const Waveform& w) { write_file(path, encode_wav(w)); }

// ---------------------------------------------------------------------------
// PPM / PGM

RgbImage decode_ppm(const Bytes& bytes) {
  std::size_t pos = 0;
  auto fail = [&](const std::string& msg) -> void {
    throw DataError("ppm: " + msg + " at byte " + std::to_string(pos));
  };
  auto skip_space = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto number = [&]() -> long {
    skip_space();
    long v = 0;
    const std::size_t start = pos;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) v = v * 10 + (bytes[pos++] - '0');
    if (pos == start) fail("expected a header number");
    return v;
  };
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '6') fail("not a binary P6 pixmap");
  pos = 2;
  const long w = number(), h = number(), maxval = number();
  if (w <= 0 || h <= 0) fail("non-positive image extent");
  if (maxval <= 0 || maxval > 255) fail("only 8-bit pixmaps are supported (maxval " + std::to_string(maxval) + ")");
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) fail("missing separator before raster");
  ++pos;
  const std::size_t need = static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * 3;
  if (bytes.size() - pos < need) fail("truncated raster (need " + std::to_string(need) + " bytes)");
  RgbImage img(h, w);
  for (long y = 0; y < h; ++y)
    for (long x = 0; x < w; ++x)
      for (Index c = 0; c < 3; ++c) img.channel(c)(y, x) = bytes[pos++] / static_cast<double>(maxval);
  return img;
}

Bytes encode_ppm(const RgbImage& img) {
  const std::string header =
      "P6\n" + std::to_string(img.width()) + " " + std::to_string(img.height()) + "\n255\n";
  Bytes out(header.begin(), header.end());
  for (Index y = 0; y < img.height(); ++y)
    for (Index x = 0; x < img.width(); ++x)
      for (Index c = 0; c < 3; ++c)
        out.push_back(static_cast<std::uint8_t>(std::lround(std::clamp(img.channel(c)(y, x), 0.0, 1.0) * 255.0)));
  return out;
}

RgbImage read_ppm(const std::string& path) {
  try {
    return decode_ppm(read_file(path));
  } catch (const DataError& e) {
    throw DataError("'" + path + "': " + e.what());
  }
}

void write_ppm(const std::string& path, const RgbImage& img) { write_file(path, encode_ppm(img)); }

Bytes encode_pgm_flipped(const Plane& p) {
  const std::string header = "P5\n" + std::to_string(p.cols()) + " " + std::to_string(p.rows()) + "\n255\n";
  Bytes out(header.begin(), header.end());
  for (Index y = p.rows() - 1; y >= 0; --y)
    for (Index x = 0; x < p.cols(); ++x)
      out.push_back(static_cast<std::uint8_t>(std::lround(std::clamp(p(y, x), 0.0, 1.0) * 255.0)));
  return out;
}

// ---------------------------------------------------------------------------
// Checkpoints

Bytes encode_checkpoint(const ModelBundle& m) {
  Bytes out;
  put_text(out, "PXW2");
  put_uint(out, kCheckpointVersion, 4);
  const std::string cfg = m.config.to_text();
  put_uint(out, cfg.size(), 4);
  put_text(out, cfg);
  put_uint(out, m.params.size(), 4);
  for (const Parameter& p : m.params) {
    put_uint(out, p.name.size(), 4);
    put_text(out, p.name);
    put_uint(out, p.value.shape().size(), 4);
    for (Index e : p.value.shape()) put_uint(out, static_cast<std::uint64_t>(e), 8);
    for (Index i = 0; i < p.value.size(); ++i) put_f64(out, p.value[i]);
  }
  return out;
}

ModelBundle decode_checkpoint(const Bytes& bytes) {
  Reader r(bytes, "checkpoint");
  if (r.text(4) != "PXW2") r.fail("bad magic (expected PXW2)", 0);
  const auto version = r.uint(4);
  if (version != kCheckpointVersion) {
    r.fail("unsupported version " + std::to_string(version) + " (this build reads version " +
               std::to_string(kCheckpointVersion) + ")",
           4);
  }
  const std::size_t cfg_at = r.offset();
  const std::string text = r.text(r.uint(4));
  ModelBundle m;
  try {
    m = ModelBundle::create(parse_config(text));
  } catch (const ConfigError& e) {
    r.fail(std::string("invalid config text (") + e.what() + ")", cfg_at);
  }
  m.config = parse_config(text);
  const std::size_t count_at = r.offset();
  const auto count = r.uint(4);
  if (count != m.params.size()) {
    r.fail("parameter count " + std::to_string(count) + " does not match config (" +
               std::to_string(m.params.size()) + ")",
           count_at);
  }
  for (Parameter& p : m.params) {
    const std::size_t at = r.offset();
    const std::string name = r.text(r.uint(4));
    if (name != p.name) r.fail("expected parameter '" + p.name + "', found '" + name + "'", at);
    Shape shape(r.uint(4));
    for (Index& e : shape) e = static_cast<Index>(r.uint(8));
    if (shape != p.value.shape()) {
      r.fail("parameter '" + name + "' has shape " + shape_string(shape) + ", expected " +
                 shape_string(p.value.shape()),
             at);
    }
    r.need(static_cast<std::size_t>(p.value.size()) * 8);
    for (Index i = 0; i < p.value.size(); ++i) p.value[i] = r.f64();
  }
  if (!r.done()) r.fail("trailing bytes", r.offset());
  return m;
}

void save_checkpoint(const ModelBundle& m, const std::string& path) { write_file(path, encode_checkpoint(m)); }

ModelBundle load_checkpoint(const std::string& path) {
  try {
    return decode_checkpoint(read_file(path));
  } catch (const DataError& e) {
    throw DataError("'" + path + "': " + e.what());
  }
}

}  // namespace stegowav
