// Test fixtures: deterministic speech-like CVC words, corpus builders and
// scratch directories.
#pragma once

#include <unistd.h>

#include <atomic>
#include <cmath>
#include <filesystem>
#include <numbers>
#include <string>
#include <vector>

#include "neuracoustic/corpus.hpp"
#include "neuracoustic/neurogram.hpp"
#include "neuracoustic/rng.hpp"
#include "neuracoustic/wave.hpp"

namespace fixtures {

class TempDir {
public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("neuracoustic_" + tag + "_" + std::to_string(counter.fetch_add(1)) +
             "_" + std::to_string(static_cast<long long>(::getpid())));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }

private:
  std::filesystem::path path_;
};

// Consonant-vowel-consonant pseudo-word: a fricative-like noise burst, a
// harmonic vowel with formant-shaped envelope, and a stop-like release.
// Spectrally plausible enough for long-term-spectrum and periphery work.
inline neuracoustic::Waveform make_cvc_word(std::uint64_t seed,
                                            double fs = 16000.0,
                                            double duration_s = 0.42) {
  neuracoustic::Rng rng(neuracoustic::derive_seed(seed, 0x57524453ull));
  const double f0 = 105.0 + 40.0 * rng.uniform01();
  const double f1 = 350.0 + 400.0 * rng.uniform01();
  const double f2 = 1000.0 + 1100.0 * rng.uniform01();
  const double f3 = 2400.0 + 700.0 * rng.uniform01();
  const double fric_center = 3200.0 + 1800.0 * rng.uniform01();

  const auto n = static_cast<std::size_t>(std::llround(duration_s * fs));
  const double t_c1 = 0.12 * duration_s;   // first consonant
  const double t_v0 = 0.18 * duration_s;   // vowel onset
  const double t_v1 = 0.72 * duration_s;   // vowel offset
  const double t_c2 = 0.80 * duration_s;   // second consonant onset

  // Vowel spectral envelope: formant bumps on a -6 dB/octave source tilt.
  const auto envelope = [&](double f) {
    const auto bump = [&](double fc, double bw, double g) {
      const double d = (f - fc) / bw;
      return g * std::exp(-0.5 * d * d);
    };
    const double tilt = 1.0 / (1.0 + f / 500.0);
    return tilt * (0.25 + bump(f1, 110.0, 1.0) + bump(f2, 160.0, 0.7) +
                   bump(f3, 220.0, 0.35));
  };

  std::vector<double> harm_freq, harm_amp, harm_phase;
  for (double f = f0; f < std::min(5000.0, fs * 0.45); f += f0) {
    harm_freq.push_back(f);
    harm_amp.push_back(envelope(f));
    harm_phase.push_back(2.0 * std::numbers::pi * rng.uniform01());
  }

  // One-pole resonator state for the fricative noise coloring.
  const double r_pole = 0.96;
  const double theta = 2.0 * std::numbers::pi * fric_center / fs;
  double n1 = 0.0, n2 = 0.0;

  neuracoustic::Waveform w;
  w.sample_rate = fs;
  w.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / fs;
    double s = 0.0;
    // fricative segments with smooth gates
    const double gate1 =
        std::exp(-0.5 * std::pow((t - t_c1 / 2) / (t_c1 / 2.2), 2.0));
    const double gate2 =
        std::exp(-0.5 * std::pow((t - (t_c2 + duration_s) / 2) /
                                     ((duration_s - t_c2) / 2.2),
                                 2.0));
    const double white = rng.gaussian();
    const double colored =
        white + 2.0 * r_pole * std::cos(theta) * n1 - r_pole * r_pole * n2;
    n2 = n1;
    n1 = colored;
    s += 0.10 * colored * (gate1 + 0.8 * gate2);

    // vowel segment with attack/decay
    if (t > t_v0 && t < t_c2) {
      const double attack = std::min(1.0, (t - t_v0) / 0.025);
      const double decay = std::min(1.0, (t_c2 - t) / 0.04);
      const double vibrato = 1.0 + 0.01 * std::sin(2.0 * std::numbers::pi * 5.0 * t);
      double v = 0.0;
      for (std::size_t h = 0; h < harm_freq.size(); ++h)
        v += harm_amp[h] * std::sin(2.0 * std::numbers::pi * harm_freq[h] *
                                        vibrato * t +
                                    harm_phase[h]);
      s += 0.35 * attack * decay * v * (t < t_v1 ? 1.0 : 0.85);
    }
    w.samples[i] = s;
  }
  // Normalize to a sane 16-bit range.
  double peak = 0.0;
  for (double v : w.samples) peak = std::max(peak, std::abs(v));
  for (double& v : w.samples) v *= 0.7 / peak;
  return w;
}

struct BuiltCorpus {
  neuracoustic::CorpusManifest manifest;
  std::filesystem::path manifest_path;
};

inline BuiltCorpus build_corpus(const std::filesystem::path& dir, int n_words,
                                std::uint64_t seed, double fs = 16000.0,
                                double duration_s = 0.42) {
  std::filesystem::create_directories(dir);
  neuracoustic::CorpusManifest m;
  m.description = "synthetic CVC fixture corpus";
  for (int i = 0; i < n_words; ++i) {
    const std::string id = "w" + std::to_string(i);
    const auto wav_path = dir / (id + ".wav");
    neuracoustic::write_wav16(
        make_cvc_word(neuracoustic::derive_seed(seed, i), fs, duration_s),
        wav_path);
    m.entries.push_back({id, "l" + std::to_string(i / 10), wav_path});
  }
  const auto manifest_path = dir / "corpus.json";
  neuracoustic::save_corpus_manifest(m, manifest_path);
  return {m, manifest_path};
}

// Random dense neurogram for similarity-level tests.
inline neuracoustic::Neurogram random_neurogram(std::uint64_t seed,
                                                std::size_t rows,
                                                std::size_t cols,
                                                double scale = 8.0) {
  neuracoustic::Rng rng(seed);
  neuracoustic::Neurogram n;
  n.n_cf = rows;
  n.n_time = cols;
  n.bin_width_s = 6.4e-3;
  n.values.resize(rows * cols);
  for (double& v : n.values) v = scale * rng.uniform01();
  for (std::size_t i = 0; i < rows; ++i)
    n.cf_axis_hz.push_back(125.0 * std::pow(2.0, static_cast<double>(i) / 4.0));
  return n;
}

}  // namespace fixtures
