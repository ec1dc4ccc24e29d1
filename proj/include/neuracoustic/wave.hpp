#pragma once

#include <filesystem>
#include <span>
#include <vector>

namespace neuracoustic {

// Mono series of amplitudes. Dimensionless after loading; pascals after
// calibration (scale_to_spl).
struct Waveform {
  std::vector<double> samples;
  double sample_rate = 0.0;  // Hz

  double duration_s() const {
    return static_cast<double>(samples.size()) / sample_rate;
  }
  void validate() const;  // throws InputError on broken invariants
};

double rms(std::span<const double> x);

// PCM WAV reader: 16-bit integer or 32-bit float, mono or multichannel
// (channels averaged). 16-bit samples are divided by 32768.
Waveform load_wav(const std::filesystem::path& path);

// 16-bit PCM mono writer, used for fixtures and corpus preparation.
void write_wav16(const Waveform& w, const std::filesystem::path& path);

// Band-limited arbitrary-ratio resampling (windowed-sinc interpolation).
Waveform resample(const Waveform& w, double target_rate_hz);

}  // namespace neuracoustic
