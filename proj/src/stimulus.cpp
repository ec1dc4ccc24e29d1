#include "neuracoustic/stimulus.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "neuracoustic/errors.hpp"
#include "neuracoustic/fft.hpp"
#include "neuracoustic/rng.hpp"

namespace neuracoustic {

void ReverbSpec::validate() const {
  require_input(rt60_s > 0.0, "reverb rt60 must be positive");
  require_input(ir_length_s >= rt60_s / 2.0,
                "reverb impulse response must be at least rt60/2 long");
}

void StimulusCondition::validate() const {
  require_input(std::isfinite(level_db_spl), "stimulus level must be finite");
  require_input(compression_factor > 0.0 && compression_factor <= 1.0,
                "compression factor must be in (0, 1]");
  if (reverb) reverb->validate();
}

Waveform scale_to_spl(const Waveform& w, double level_db_spl) {
  w.validate();
  const double r = rms(w.samples);
  require_input(r > 0.0, "silent input: cannot scale to a pressure level");
  const double target = kReferencePressurePa * std::pow(10.0, level_db_spl / 20.0);
  Waveform out = w;
  const double g = target / r;
  for (double& s : out.samples) s *= g;
  return out;
}

Waveform mix_at_snr(const Waveform& signal, const Waveform& noise,
                    double snr_db) {
  signal.validate();
  noise.validate();
  require_input(std::abs(signal.sample_rate - noise.sample_rate) < 1e-9,
                "mix_at_snr: sample rates differ");
  require_input(noise.samples.size() >= signal.samples.size(),
                "mix_at_snr: noise shorter than signal");
  const double sr = rms(signal.samples);
  require_input(sr > 0.0, "mix_at_snr: silent signal");
  const std::span<const double> ntrunc(noise.samples.data(),
                                       signal.samples.size());
  const double nr = rms(ntrunc);
  require_input(nr > 0.0, "mix_at_snr: silent noise");
  const double g = sr / (nr * std::pow(10.0, snr_db / 20.0));
  Waveform out = signal;
  for (std::size_t i = 0; i < out.samples.size(); ++i)
    out.samples[i] += g * ntrunc[i];
  return out;
}

Waveform time_compress(const Waveform& w, double factor, double frame_s,
                       double search_s) {
  w.validate();
  require_input(factor > 0.0 && factor <= 1.0,
                "compression factor must be in (0, 1]");
  if (factor == 1.0) return w;

  const double fs = w.sample_rate;
  const auto n_in = static_cast<std::ptrdiff_t>(w.samples.size());
  std::ptrdiff_t frame = std::max<std::ptrdiff_t>(4, std::llround(frame_s * fs));
  frame += frame & 1;  // even, so the synthesis hop is exactly frame/2
  require_input(n_in >= frame, "input shorter than one analysis frame");
  const std::ptrdiff_t hop = frame / 2;
  const auto search = static_cast<std::ptrdiff_t>(std::llround(search_s * fs));

  std::vector<double> window(static_cast<std::size_t>(frame));
  for (std::ptrdiff_t i = 0; i < frame; ++i)
    window[static_cast<std::size_t>(i)] =
        0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                             static_cast<double>(frame));

  const auto n_out = static_cast<std::ptrdiff_t>(
      std::llround(static_cast<double>(n_in) * factor));
  std::vector<double> out(static_cast<std::size_t>(n_out), 0.0);
  std::vector<double> wsum(static_cast<std::size_t>(n_out), 0.0);

  const auto clamp_start = [&](std::ptrdiff_t s) {
    return std::clamp<std::ptrdiff_t>(s, 0, n_in - frame);
  };
  const double* x = w.samples.data();

  std::ptrdiff_t prev_start = 0;
  for (std::ptrdiff_t k = 0;; ++k) {
    const std::ptrdiff_t out_pos = k * hop;
    if (out_pos >= n_out) break;
    const std::ptrdiff_t nominal =
        clamp_start(std::llround(static_cast<double>(out_pos) / factor));
    std::ptrdiff_t chosen = nominal;
    if (k > 0) {
      // The natural continuation of the previous frame is the reference;
      // search around the nominal analysis position for the best match.
      const std::ptrdiff_t ref = clamp_start(prev_start + hop);
      double best = -std::numeric_limits<double>::infinity();
      for (std::ptrdiff_t d = -search; d <= search; ++d) {
        const std::ptrdiff_t cand = nominal + d;
        if (cand < 0 || cand > n_in - frame) continue;
        double num = 0.0, energy = 0.0;
        for (std::ptrdiff_t i = 0; i < frame; ++i) {
          const double a = x[cand + i];
          num += a * x[ref + i];
          energy += a * a;
        }
        const double score = (energy > 0.0) ? num / std::sqrt(energy) : 0.0;
        if (score > best) {
          best = score;
          chosen = cand;
        }
      }
    }
    for (std::ptrdiff_t i = 0; i < frame; ++i) {
      const std::ptrdiff_t o = out_pos + i;
      if (o >= n_out) break;
      const double wv = window[static_cast<std::size_t>(i)];
      out[static_cast<std::size_t>(o)] += wv * x[chosen + i];
      wsum[static_cast<std::size_t>(o)] += wv;
    }
    prev_start = chosen;
  }

  Waveform result;
  result.sample_rate = fs;
  result.samples.resize(out.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    result.samples[i] = (wsum[i] > 1e-9) ? out[i] / wsum[i] : 0.0;
  return result;
}

double reverb_envelope(double t_s, double rt60_s) {
  // exp(-t * 3 ln10 / rt60): amplitude down 60 dB at t = rt60.
  return std::exp(-t_s * (3.0 * std::numbers::ln10) / rt60_s);
}

std::vector<double> reverb_impulse_response(const ReverbSpec& spec,
                                            double sample_rate_hz) {
  spec.validate();
  require_input(sample_rate_hz > 0.0, "sample rate must be positive");
  const auto n = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(spec.ir_length_s * sample_rate_hz)));
  Rng rng(derive_seed(spec.seed, fnv1a64("reverb-ir")));
  std::vector<double> ir(n);
  long double energy = 0.0L;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / sample_rate_hz;
    ir[i] = rng.gaussian() * reverb_envelope(t, spec.rt60_s);
    energy += static_cast<long double>(ir[i]) * ir[i];
  }
  const double norm = 1.0 / std::sqrt(static_cast<double>(energy));
  for (double& v : ir) v *= norm;
  return ir;
}

Waveform add_reverb(const Waveform& w, const ReverbSpec& spec) {
  w.validate();
  const auto ir = reverb_impulse_response(spec, w.sample_rate);
  Waveform out;
  out.sample_rate = w.sample_rate;
  out.samples = fft::convolve(w.samples, ir);
  return out;
}

SpectralShape corpus_spectral_shape(const CorpusManifest& corpus,
                                    double sample_rate_hz) {
  corpus.validate();
  require_input(sample_rate_hz > 0.0, "sample rate must be positive");

  // Each item is resampled to the target rate and normalized to unit RMS so
  // every word weighs equally in the long-term average.
  std::vector<double> concat;
  for (const auto& e : corpus.entries) {
    Waveform w = resample(load_wav(e.path), sample_rate_hz);
    const double r = rms(w.samples);
    if (r <= 0.0) continue;
    for (double s : w.samples) concat.push_back(s / r);
  }
  require_input(!concat.empty(), "corpus is silent; cannot shape noise");

  constexpr std::size_t kWelchWindow = 4096;
  SpectralShape shape;
  shape.magnitude = fft::welch_magnitude(concat, kWelchWindow);
  shape.bin_hz = sample_rate_hz / static_cast<double>(kWelchWindow);
  return shape;
}

Waveform shaped_noise(const SpectralShape& shape, double duration_s,
                      double sample_rate_hz, std::uint64_t seed) {
  require_input(duration_s > 0.0, "noise duration must be positive");
  require_input(sample_rate_hz > 0.0, "sample rate must be positive");
  require_input(shape.magnitude.size() >= 2 && shape.bin_hz > 0.0,
                "spectral shape is empty");

  const auto n = static_cast<std::size_t>(std::llround(duration_s * sample_rate_hz));
  require_input(n > 0, "noise duration rounds to zero samples");

  Rng rng(derive_seed(seed, fnv1a64("speech-shaped-noise")));
  std::vector<double> white(n);
  for (double& v : white) v = rng.gaussian();

  const std::size_t nfft = fft::next_pow2(n);
  auto spec = fft::rfft(white, nfft);
  const double spec_bin_hz = sample_rate_hz / static_cast<double>(nfft);
  for (std::size_t k = 0; k < spec.size(); ++k) {
    const double f = static_cast<double>(k) * spec_bin_hz;
    const double pos = f / shape.bin_hz;
    const auto i0 = static_cast<std::size_t>(pos);
    double g;
    if (i0 + 1 < shape.magnitude.size()) {
      const double frac = pos - static_cast<double>(i0);
      g = shape.magnitude[i0] * (1.0 - frac) + shape.magnitude[i0 + 1] * frac;
    } else {
      g = shape.magnitude.back();
    }
    spec[k] *= g;
  }
  auto samples = fft::irfft(spec, nfft);
  samples.resize(n);

  const double r = rms(samples);
  require_input(r > 0.0, "shaped noise collapsed to silence");
  Waveform out;
  out.sample_rate = sample_rate_hz;
  out.samples = std::move(samples);
  for (double& v : out.samples) v /= r;
  return out;
}

Waveform make_speech_shaped_noise(const CorpusManifest& corpus,
                                  double duration_s, double sample_rate_hz,
                                  std::uint64_t seed) {
  return shaped_noise(corpus_spectral_shape(corpus, sample_rate_hz),
                      duration_s, sample_rate_hz, seed);
}

Waveform apply_condition(const Waveform& w, const StimulusCondition& c) {
  c.validate();
  Waveform cur = w;
  if (c.compression_factor < 1.0)
    cur = time_compress(cur, c.compression_factor);
  if (c.reverb) cur = add_reverb(cur, *c.reverb);
  return scale_to_spl(cur, c.level_db_spl);
}

}  // namespace neuracoustic
