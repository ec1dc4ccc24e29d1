#include "neuracoustic/wave.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numbers>

#include "neuracoustic/errors.hpp"

namespace neuracoustic {
namespace {

std::uint32_t read_u32le(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) |
         (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t read_u16le(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void put_u32le(std::vector<unsigned char>& v, std::uint32_t x) {
  v.push_back(static_cast<unsigned char>(x & 0xff));
  v.push_back(static_cast<unsigned char>((x >> 8) & 0xff));
  v.push_back(static_cast<unsigned char>((x >> 16) & 0xff));
  v.push_back(static_cast<unsigned char>((x >> 24) & 0xff));
}

void put_u16le(std::vector<unsigned char>& v, std::uint16_t x) {
  v.push_back(static_cast<unsigned char>(x & 0xff));
  v.push_back(static_cast<unsigned char>((x >> 8) & 0xff));
}

float f32_from_le(const unsigned char* p) {
  std::uint32_t u = read_u32le(p);
  float f;
  std::memcpy(&f, &u, sizeof(f));
  return f;
}

}  // namespace

void Waveform::validate() const {
  require_input(sample_rate > 0.0, "waveform sample rate must be positive");
  require_input(!samples.empty(), "waveform has no samples");
  for (double s : samples)
    require_input(std::isfinite(s), "waveform contains non-finite samples");
}

double rms(std::span<const double> x) {
  if (x.empty()) return 0.0;
  long double acc = 0.0L;
  for (double v : x) acc += static_cast<long double>(v) * v;
  return std::sqrt(static_cast<double>(acc / static_cast<long double>(x.size())));
}

Waveform load_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require_input(in.good(), "cannot open WAV file: " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  require_input(bytes.size() >= 44, "corrupt header: file too short: " + path.string());
  require_input(std::memcmp(bytes.data(), "RIFF", 4) == 0 &&
                    std::memcmp(bytes.data() + 8, "WAVE", 4) == 0,
                "corrupt header: not a RIFF/WAVE file: " + path.string());

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  const unsigned char* data = nullptr;
  std::uint32_t data_len = 0;
  bool have_data = false;

  // Walk chunks; chunk bodies are word-aligned.
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const char* id = reinterpret_cast<const char*>(bytes.data() + pos);
    std::uint32_t len = read_u32le(bytes.data() + pos + 4);
    pos += 8;
    require_input(pos + len <= bytes.size(),
                  "corrupt header: chunk extends past end of file: " + path.string());
    if (std::memcmp(id, "fmt ", 4) == 0) {
      require_input(len >= 16, "corrupt header: fmt chunk too short");
      format = read_u16le(bytes.data() + pos);
      channels = read_u16le(bytes.data() + pos + 2);
      rate = read_u32le(bytes.data() + pos + 4);
      bits = read_u16le(bytes.data() + pos + 14);
      if (format == 0xfffe && len >= 40) {
        // WAVE_FORMAT_EXTENSIBLE: first two bytes of the SubFormat GUID hold
        // the actual format tag.
        format = read_u16le(bytes.data() + pos + 24);
      }
      have_fmt = true;
    } else if (std::memcmp(id, "data", 4) == 0) {
      data = bytes.data() + pos;
      data_len = len;
      have_data = true;
    }
    pos += len + (len & 1);
  }

  require_input(have_fmt, "corrupt header: missing fmt chunk: " + path.string());
  require_input(have_data, "corrupt header: missing data chunk: " + path.string());
  require_input(channels >= 1, "corrupt header: zero channels");
  require_input(rate > 0, "corrupt header: zero sample rate");

  std::size_t bytes_per_sample;
  if (format == 1 && bits == 16) {
    bytes_per_sample = 2;
  } else if (format == 3 && bits == 32) {
    bytes_per_sample = 4;
  } else {
    throw InputError("unsupported encoding (need 16-bit PCM or 32-bit float): " +
                     path.string());
  }

  const std::size_t frame_bytes = bytes_per_sample * channels;
  const std::size_t n_frames = data_len / frame_bytes;
  require_input(n_frames > 0, "zero-length audio: " + path.string());

  Waveform w;
  w.sample_rate = static_cast<double>(rate);
  w.samples.resize(n_frames);
  for (std::size_t f = 0; f < n_frames; ++f) {
    double acc = 0.0;
    for (std::uint16_t c = 0; c < channels; ++c) {
      const unsigned char* p = data + f * frame_bytes + c * bytes_per_sample;
      if (bytes_per_sample == 2) {
        const auto raw = static_cast<std::int16_t>(read_u16le(p));
        acc += static_cast<double>(raw) / 32768.0;
      } else {
        acc += static_cast<double>(f32_from_le(p));
      }
    }
    w.samples[f] = acc / static_cast<double>(channels);
  }
  w.validate();
  return w;
}

void write_wav16(const Waveform& w, const std::filesystem::path& path) {
  w.validate();
  const auto n = static_cast<std::uint32_t>(w.samples.size());
  const std::uint32_t data_len = n * 2;
  std::vector<unsigned char> out;
  out.reserve(44 + data_len);
  out.insert(out.end(), {'R', 'I', 'F', 'F'});
  put_u32le(out, 36 + data_len);
  out.insert(out.end(), {'W', 'A', 'V', 'E'});
  out.insert(out.end(), {'f', 'm', 't', ' '});
  put_u32le(out, 16);
  put_u16le(out, 1);  // PCM
  put_u16le(out, 1);  // mono
  const auto rate = static_cast<std::uint32_t>(std::llround(w.sample_rate));
  put_u32le(out, rate);
  put_u32le(out, rate * 2);
  put_u16le(out, 2);
  put_u16le(out, 16);
  out.insert(out.end(), {'d', 'a', 't', 'a'});
  put_u32le(out, data_len);
  for (double s : w.samples) {
    const double clamped = std::clamp(s, -1.0, 1.0);
    const auto q = static_cast<std::int16_t>(std::lround(clamped * 32767.0));
    put_u16le(out, static_cast<std::uint16_t>(q));
  }
  std::ofstream f(path, std::ios::binary);
  require_input(f.good(), "cannot write WAV file: " + path.string());
  f.write(reinterpret_cast<const char*>(out.data()),
          static_cast<std::streamsize>(out.size()));
}

Waveform resample(const Waveform& w, double target_rate_hz) {
  w.validate();
  require_input(target_rate_hz > 0.0, "target sample rate must be positive");
  const double ratio = target_rate_hz / w.sample_rate;
  if (std::abs(ratio - 1.0) < 1e-12) return w;

  const auto n_in = static_cast<std::ptrdiff_t>(w.samples.size());
  const auto n_out = std::max<std::ptrdiff_t>(
      1, std::llround(static_cast<double>(n_in) * ratio));

  // Kernel: sinc scaled to the lower of the two Nyquist limits, Hann-tapered.
  const double cutoff = 0.945 * std::min(1.0, ratio);
  const double half_width = 24.0 / std::min(1.0, ratio);  // in input samples

  Waveform out;
  out.sample_rate = target_rate_hz;
  out.samples.resize(static_cast<std::size_t>(n_out));
  for (std::ptrdiff_t m = 0; m < n_out; ++m) {
    const double t = static_cast<double>(m) / ratio;
    const auto k0 = static_cast<std::ptrdiff_t>(std::ceil(t - half_width));
    const auto k1 = static_cast<std::ptrdiff_t>(std::floor(t + half_width));
    double acc = 0.0, ksum = 0.0;
    for (std::ptrdiff_t k = std::max<std::ptrdiff_t>(0, k0);
         k <= std::min(n_in - 1, k1); ++k) {
      const double tau = t - static_cast<double>(k);
      const double a = std::numbers::pi * cutoff * tau;
      const double sinc = (std::abs(a) < 1e-12) ? 1.0 : std::sin(a) / a;
      const double win =
          0.5 + 0.5 * std::cos(std::numbers::pi * tau / half_width);
      const double h = cutoff * sinc * win;
      acc += w.samples[static_cast<std::size_t>(k)] * h;
      ksum += h;
    }
    // Normalizing by the kernel sum removes the taper droop and keeps in-band
    // amplitudes unchanged; near the edges it renormalizes the clipped support.
    out.samples[static_cast<std::size_t>(m)] =
        (std::abs(ksum) > 1e-9) ? acc / ksum : 0.0;
  }
  return out;
}

}  // namespace neuracoustic
