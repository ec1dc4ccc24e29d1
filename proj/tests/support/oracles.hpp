// Independent reference implementations used to cross-check the library.
// These must stay decoupled from the production code paths they validate:
// direct per-window formula evaluation for the similarity measures and
// Goertzel-based spectral estimates for the DSP contracts.
#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <vector>

#include "neuracoustic/neurogram.hpp"
#include "neuracoustic/similarity.hpp"

namespace oracles {

struct WindowMoments {
  double mu_r, mu_d, var_r, var_d, cov;
};

inline WindowMoments window_moments(const neuracoustic::Neurogram& r,
                                    const neuracoustic::Neurogram& d,
                                    const neuracoustic::WindowKernel& k,
                                    std::size_t f, std::size_t t) {
  WindowMoments m{0, 0, 0, 0, 0};
  for (int df = -1; df <= 1; ++df)
    for (int dt = -1; dt <= 1; ++dt) {
      const double w = k.at(df, dt);
      m.mu_r += w * r.at(f + static_cast<std::size_t>(df + 1) - 1,
                         t + static_cast<std::size_t>(dt + 1) - 1);
      m.mu_d += w * d.at(f + static_cast<std::size_t>(df + 1) - 1,
                         t + static_cast<std::size_t>(dt + 1) - 1);
    }
  for (int df = -1; df <= 1; ++df)
    for (int dt = -1; dt <= 1; ++dt) {
      const double w = k.at(df, dt);
      const double xr = r.at(f + static_cast<std::size_t>(df + 1) - 1,
                             t + static_cast<std::size_t>(dt + 1) - 1) - m.mu_r;
      const double xd = d.at(f + static_cast<std::size_t>(df + 1) - 1,
                             t + static_cast<std::size_t>(dt + 1) - 1) - m.mu_d;
      m.var_r += w * xr * xr;
      m.var_d += w * xd * xd;
      m.cov += w * xr * xd;
    }
  return m;
}

// Classic product-form SSIM with standard (squared) constants; this is the
// textbook formula, written independently of the library's l*c*s route.
inline double direct_ssim(const neuracoustic::Neurogram& r,
                          const neuracoustic::Neurogram& d,
                          const neuracoustic::WindowKernel& k, double L,
                          std::size_t f, std::size_t t) {
  const double c1 = (0.01 * L) * (0.01 * L);
  const double c2 = (0.03 * L) * (0.03 * L);
  const WindowMoments m = window_moments(r, d, k, f, t);
  return ((2.0 * m.mu_r * m.mu_d + c1) * (2.0 * m.cov + c2)) /
         ((m.mu_r * m.mu_r + m.mu_d * m.mu_d + c1) * (m.var_r + m.var_d + c2));
}

// Direct two-component evaluation (luminance * structure).
inline double direct_nsi(const neuracoustic::Neurogram& r,
                         const neuracoustic::Neurogram& d,
                         const neuracoustic::WindowKernel& k, double L,
                         neuracoustic::ConstantsRule rule, std::size_t f,
                         std::size_t t) {
  const double c1 = rule == neuracoustic::ConstantsRule::Paper
                        ? 0.01 * L
                        : (0.01 * L) * (0.01 * L);
  const double c3 = (0.03 * L) * (0.03 * L) / 2.0;
  const WindowMoments m = window_moments(r, d, k, f, t);
  const double lum = (2.0 * m.mu_r * m.mu_d + c1) /
                     (m.mu_r * m.mu_r + m.mu_d * m.mu_d + c1);
  const double str =
      (m.cov + c3) / (std::sqrt(m.var_r) * std::sqrt(m.var_d) + c3);
  return lum * str;
}

// Signal power at one frequency via the Goertzel recurrence (no FFT).
inline double goertzel_power(std::span<const double> x, double fs, double f) {
  const double w = 2.0 * std::numbers::pi * f / fs;
  const double coeff = 2.0 * std::cos(w);
  double s0 = 0.0, s1 = 0.0, s2 = 0.0;
  for (double v : x) {
    s0 = v + coeff * s1 - s2;
    s2 = s1;
    s1 = s0;
  }
  const double power = s1 * s1 + s2 * s2 - coeff * s1 * s2;
  return power / (static_cast<double>(x.size()) * static_cast<double>(x.size()));
}

// Frequency of maximal power, scanned on a uniform grid.
inline double dominant_frequency(std::span<const double> x, double fs,
                                 double f_min, double f_max, double step) {
  double best_f = f_min, best_p = -1.0;
  for (double f = f_min; f <= f_max; f += step) {
    const double p = goertzel_power(x, fs, f);
    if (p > best_p) {
      best_p = p;
      best_f = f;
    }
  }
  return best_f;
}

// Band power integrated on a dense uniform grid, so line spectra (harmonic
// content) and smooth spectra measure comparably.
inline double band_power_db(std::span<const double> x, double fs, double f_lo,
                            double f_hi, double step_hz = 4.0) {
  double acc = 0.0;
  int probes = 0;
  for (double f = f_lo + step_hz / 2; f < f_hi; f += step_hz, ++probes)
    acc += goertzel_power(x, fs, f);
  return 10.0 * std::log10(acc / std::max(1, probes) + 1e-300);
}

// Third-octave band levels between f_min and f_max (band centers and edges
// on the base-2 ladder), normalized to 0 dB mean so only shape remains.
inline std::vector<double> third_octave_shape_db(std::span<const double> x,
                                                 double fs, double f_min,
                                                 double f_max) {
  std::vector<double> levels;
  for (double fc = f_min; fc <= f_max; fc *= std::pow(2.0, 1.0 / 3.0)) {
    const double lo = fc / std::pow(2.0, 1.0 / 6.0);
    const double hi = fc * std::pow(2.0, 1.0 / 6.0);
    levels.push_back(band_power_db(x, fs, lo, hi));
  }
  double mean = 0.0;
  for (double v : levels) mean += v;
  mean /= static_cast<double>(levels.size());
  for (double& v : levels) v -= mean;
  return levels;
}

}  // namespace oracles
