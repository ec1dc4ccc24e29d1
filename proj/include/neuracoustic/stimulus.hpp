#pragma once

#include <cstdint>
#include <optional>

#include "neuracoustic/corpus.hpp"
#include "neuracoustic/wave.hpp"

namespace neuracoustic {

// Reference pressure for 0 dB SPL, pascals.
inline constexpr double kReferencePressurePa = 20e-6;

struct ReverbSpec {
  double rt60_s = 0.5;
  double ir_length_s = 0.75;
  std::uint64_t seed = 0;
  void validate() const;
};

struct StimulusCondition {
  double level_db_spl = 65.0;
  double compression_factor = 1.0;  // in (0,1]; 1 = none
  std::optional<ReverbSpec> reverb;
  void validate() const;
};

// Rescales so that rms(out) = 20e-6 * 10^(level/20) pascals.
Waveform scale_to_spl(const Waveform& w, double level_db_spl);

// out = signal + g*noise with g chosen so the signal/noise RMS ratio equals
// snr_db. Noise is truncated to the signal length and must be at least as long.
Waveform mix_at_snr(const Waveform& signal, const Waveform& noise,
                    double snr_db);

// Pitch-preserving time-scale modification (waveform-similarity overlap-add,
// 20 ms frames, alignment search +-5 ms). Output duration = factor * input.
Waveform time_compress(const Waveform& w, double factor,
                       double frame_s = 0.020, double search_s = 0.005);

// Deterministic exponential decay envelope used for the synthetic room
// response: 10^(-3*t/rt60), i.e. -60 dB at t = rt60.
double reverb_envelope(double t_s, double rt60_s);

// Seeded Gaussian noise shaped by reverb_envelope, normalized to unit energy.
std::vector<double> reverb_impulse_response(const ReverbSpec& spec,
                                            double sample_rate_hz);

// Convolution with the synthetic impulse response.
Waveform add_reverb(const Waveform& w, const ReverbSpec& spec);

// Welch-averaged long-term magnitude spectrum of the corpus (each item
// resampled and RMS-normalized before concatenation).
struct SpectralShape {
  std::vector<double> magnitude;  // one-sided, uniformly spaced bins
  double bin_hz = 0.0;
};
SpectralShape corpus_spectral_shape(const CorpusManifest& corpus,
                                    double sample_rate_hz);

// Gaussian noise filtered to the given spectral shape, unit RMS,
// deterministic in seed.
Waveform shaped_noise(const SpectralShape& shape, double duration_s,
                      double sample_rate_hz, std::uint64_t seed);

// Gaussian noise spectrally shaped to the corpus's Welch-averaged long-term
// spectrum, unit RMS, deterministic in seed.
Waveform make_speech_shaped_noise(const CorpusManifest& corpus,
                                  double duration_s, double sample_rate_hz,
                                  std::uint64_t seed);

// compress -> reverberate -> calibrate, in that order.
Waveform apply_condition(const Waveform& w, const StimulusCondition& c);

}  // namespace neuracoustic
