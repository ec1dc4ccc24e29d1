#include <doctest.h>

#include <cmath>
#include <numbers>

#include "neuracoustic/errors.hpp"
#include "neuracoustic/stimulus.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace neuracoustic;

namespace {

Waveform tone(double freq, double fs, double dur, double amp = 0.5) {
  Waveform w;
  w.sample_rate = fs;
  w.samples.resize(static_cast<std::size_t>(dur * fs));
  for (std::size_t i = 0; i < w.samples.size(); ++i)
    w.samples[i] = amp * std::sin(2.0 * std::numbers::pi * freq * i / fs);
  return w;
}

Waveform constant(double value, double fs, std::size_t n) {
  Waveform w;
  w.sample_rate = fs;
  w.samples.assign(n, value);
  return w;
}

}  // namespace

TEST_CASE("scale_to_spl hits the target pressure exactly") {
  const Waveform w = fixtures::make_cvc_word(11, 16000.0, 0.2);
  SUBCASE("0 dB SPL is the reference pressure") {
    CHECK(rms(scale_to_spl(w, 0.0).samples) ==
          doctest::Approx(2.0e-5).epsilon(1e-12));
  }
  SUBCASE("65 dB SPL") {
    const double expected = 20e-6 * std::pow(10.0, 65.0 / 20.0);
    CHECK(expected == doctest::Approx(3.55656e-2).epsilon(1e-5));
    CHECK(rms(scale_to_spl(w, 65.0).samples) ==
          doctest::Approx(expected).epsilon(1e-9));
  }
  SUBCASE("95 dB SPL") {
    const double expected = 20e-6 * std::pow(10.0, 95.0 / 20.0);
    CHECK(expected == doctest::Approx(1.12468).epsilon(1e-5));
    CHECK(rms(scale_to_spl(w, 95.0).samples) ==
          doctest::Approx(expected).epsilon(1e-9));
  }
  SUBCASE("scaling an already scaled waveform is idempotent") {
    const Waveform once = scale_to_spl(w, 65.0);
    const Waveform twice = scale_to_spl(once, 65.0);
    CHECK(rms(twice.samples) ==
          doctest::Approx(rms(once.samples)).epsilon(1e-12));
  }
  SUBCASE("silence is a hard error") {
    CHECK_THROWS_WITH_AS(scale_to_spl(constant(0.0, 16000.0, 100), 65.0),
                         doctest::Contains("silent"), InputError);
  }
}

TEST_CASE("mix_at_snr sets the requested ratio") {
  SUBCASE("0 dB means equal RMS") {
    const Waveform s = tone(440, 16000, 0.5);
    const Waveform n = fixtures::make_cvc_word(5, 16000.0, 0.6);
    const Waveform out = mix_at_snr(s, n, 0.0);
    std::vector<double> added(s.samples.size());
    for (std::size_t i = 0; i < added.size(); ++i)
      added[i] = out.samples[i] - s.samples[i];
    CHECK(rms(added) == doctest::Approx(rms(s.samples)).epsilon(1e-9));
  }
  SUBCASE("+20 dB shrinks the noise gain by 10x") {
    const Waveform s = tone(440, 16000, 0.5);
    const Waveform n = fixtures::make_cvc_word(5, 16000.0, 0.6);
    const auto gain_of = [&](double snr) {
      const Waveform out = mix_at_snr(s, n, snr);
      std::vector<double> added(s.samples.size());
      for (std::size_t i = 0; i < added.size(); ++i)
        added[i] = out.samples[i] - s.samples[i];
      return rms(added);
    };
    CHECK(gain_of(0.0) / gain_of(20.0) == doctest::Approx(10.0).epsilon(1e-6));
  }
  SUBCASE("hand-computed gain for rms 0.1 vs 1.0 at 10 dB") {
    const Waveform s = constant(0.1, 8000.0, 1000);
    Waveform n = constant(1.0, 8000.0, 1000);
    for (std::size_t i = 1; i < n.samples.size(); i += 2) n.samples[i] = -1.0;
    const Waveform out = mix_at_snr(s, n, 10.0);
    const double g = std::abs(out.samples[0] - s.samples[0]);
    CHECK(g == doctest::Approx(0.031623).epsilon(1e-4));
  }
  SUBCASE("post-hoc SNR matches the request") {
    const Waveform s = fixtures::make_cvc_word(21, 16000.0, 0.4);
    const Waveform n = fixtures::make_cvc_word(22, 16000.0, 0.5);
    for (double snr : {-5.0, 3.0, 12.0}) {
      const Waveform out = mix_at_snr(s, n, snr);
      std::vector<double> added(s.samples.size());
      for (std::size_t i = 0; i < added.size(); ++i)
        added[i] = out.samples[i] - s.samples[i];
      const double measured =
          20.0 * std::log10(rms(s.samples) / rms(added));
      CHECK(measured == doctest::Approx(snr).epsilon(1e-9));
    }
  }
  SUBCASE("errors") {
    const Waveform s = tone(440, 16000, 0.1);
    CHECK_THROWS_AS(mix_at_snr(constant(0.0, 16000, 1600), s, 0.0), InputError);
    CHECK_THROWS_AS(mix_at_snr(s, constant(0.0, 16000, 1600), 0.0), InputError);
    CHECK_THROWS_AS(mix_at_snr(s, tone(440, 16000, 0.05), 0.0), InputError);
    CHECK_THROWS_AS(mix_at_snr(s, tone(440, 8000, 0.5), 0.0), InputError);
  }
}

TEST_CASE("time_compress") {
  SUBCASE("factor 1 returns the input bit-identically") {
    const Waveform w = fixtures::make_cvc_word(31, 16000.0, 0.3);
    const Waveform out = time_compress(w, 1.0);
    CHECK(out.samples == w.samples);
  }
  SUBCASE("duration contract at factor 0.65") {
    const Waveform w = fixtures::make_cvc_word(32, 16000.0, 1.0);
    const Waveform out = time_compress(w, 0.65);
    CHECK(out.duration_s() == doctest::Approx(0.65).epsilon(0.031));
  }
  SUBCASE("pitch is preserved, not shifted") {
    const Waveform w = tone(440.0, 16000.0, 1.0);
    const Waveform out = time_compress(w, 0.65);
    // Plain resampling would move the peak to 440/0.65 = 677 Hz.
    const double peak =
        oracles::dominant_frequency(out.samples, 16000.0, 300.0, 700.0, 1.0);
    CHECK(peak == doctest::Approx(440.0).epsilon(5.0 / 440.0));
  }
  SUBCASE("errors") {
    const Waveform w = tone(440.0, 16000.0, 0.005);  // shorter than a frame
    CHECK_THROWS_WITH_AS(time_compress(w, 0.65),
                         doctest::Contains("shorter than one analysis frame"),
                         InputError);
    const Waveform ok = tone(440.0, 16000.0, 0.1);
    CHECK_THROWS_AS(time_compress(ok, 0.0), InputError);
    CHECK_THROWS_AS(time_compress(ok, 1.5), InputError);
  }
}

TEST_CASE("add_reverb") {
  ReverbSpec spec;
  spec.rt60_s = 0.5;
  spec.ir_length_s = 0.75;
  spec.seed = 99;

  SUBCASE("decay envelope is 60 dB down at rt60") {
    CHECK(reverb_envelope(spec.rt60_s, spec.rt60_s) /
              reverb_envelope(0.0, spec.rt60_s) ==
          doctest::Approx(1e-3).epsilon(1e-12));
  }
  SUBCASE("impulse response has unit energy") {
    const auto ir = reverb_impulse_response(spec, 16000.0);
    double e = 0.0;
    for (double v : ir) e += v * v;
    CHECK(e == doctest::Approx(1.0).epsilon(1e-9));
  }
  SUBCASE("empirical decay of the IR is about -60 dB at rt60") {
    const auto ir = reverb_impulse_response(spec, 16000.0);
    const auto window_rms = [&](double t0) {
      const auto a = static_cast<std::size_t>(t0 * 16000.0);
      const auto b = std::min(ir.size(), a + 320);  // 20 ms
      double acc = 0.0;
      for (std::size_t i = a; i < b; ++i) acc += ir[i] * ir[i];
      return std::sqrt(acc / static_cast<double>(b - a));
    };
    const double drop_db =
        20.0 * std::log10(window_rms(spec.rt60_s) / window_rms(0.0));
    CHECK(drop_db == doctest::Approx(-60.0).epsilon(0.07));
  }
  SUBCASE("unit impulse convolves to the IR itself") {
    Waveform impulse = constant(0.0, 16000.0, 400);
    impulse.samples[0] = 1.0;
    const Waveform out = add_reverb(impulse, spec);
    const auto ir = reverb_impulse_response(spec, 16000.0);
    REQUIRE(out.samples.size() == 400 + ir.size() - 1);
    double worst = 0.0;
    for (std::size_t i = 0; i < ir.size(); ++i)
      worst = std::max(worst, std::abs(out.samples[i] - ir[i]));
    CHECK(worst < 1e-9);
  }
  SUBCASE("spec invariants") {
    ReverbSpec bad = spec;
    bad.rt60_s = 0.0;
    CHECK_THROWS_AS(bad.validate(), InputError);
    bad = spec;
    bad.ir_length_s = 0.1;
    CHECK_THROWS_AS(bad.validate(), InputError);
  }
}

TEST_CASE("speech-shaped noise") {
  fixtures::TempDir dir("ssn");
  const auto corpus = fixtures::build_corpus(dir.path(), 6, 777).manifest;

  SUBCASE("deterministic in seed, unit RMS") {
    const Waveform a = make_speech_shaped_noise(corpus, 1.0, 16000.0, 5);
    const Waveform b = make_speech_shaped_noise(corpus, 1.0, 16000.0, 5);
    CHECK(a.samples == b.samples);
    CHECK(rms(a.samples) == doctest::Approx(1.0).epsilon(1e-9));
    const Waveform c = make_speech_shaped_noise(corpus, 1.0, 16000.0, 6);
    CHECK(c.samples != a.samples);
  }
  SUBCASE("third-octave spectrum tracks the corpus within 3 dB") {
    const Waveform noise = make_speech_shaped_noise(corpus, 2.0, 16000.0, 5);
    // Independent spectral route: concatenate the unit-RMS corpus items and
    // probe both signals with Goertzel band powers.
    std::vector<double> concat;
    for (const auto& e : corpus.entries) {
      const Waveform w = load_wav(e.path);
      const double r = rms(w.samples);
      for (double s : w.samples) concat.push_back(s / r);
    }
    const auto ref = oracles::third_octave_shape_db(concat, 16000.0, 200.0, 5000.0);
    const auto got =
        oracles::third_octave_shape_db(noise.samples, 16000.0, 200.0, 5000.0);
    REQUIRE(ref.size() == got.size());
    double worst = 0.0;
    for (std::size_t i = 0; i < ref.size(); ++i)
      worst = std::max(worst, std::abs(ref[i] - got[i]));
    CHECK(worst < 3.0);
  }
  SUBCASE("duration must be positive") {
    CHECK_THROWS_AS(make_speech_shaped_noise(corpus, 0.0, 16000.0, 5),
                    InputError);
  }
}

TEST_CASE("apply_condition calibrates after processing") {
  const Waveform w = fixtures::make_cvc_word(41, 16000.0, 0.5);
  StimulusCondition c;
  c.level_db_spl = 65.0;
  c.compression_factor = 0.65;
  ReverbSpec rs;
  rs.seed = 3;
  c.reverb = rs;
  const Waveform out = apply_condition(w, c);
  CHECK(rms(out.samples) ==
        doctest::Approx(20e-6 * std::pow(10.0, 65.0 / 20.0)).epsilon(1e-9));
  // compressed then lengthened by the reverb tail
  CHECK(out.duration_s() ==
        doctest::Approx(0.5 * 0.65 + rs.ir_length_s).epsilon(0.05));
}
