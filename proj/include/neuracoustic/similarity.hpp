#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "neuracoustic/neurogram.hpp"

namespace neuracoustic {

// 3x3 window weights, row-major over (df, dt) offsets {-1, 0, +1}^2.
struct WindowKernel {
  std::array<double, 9> w;
  double at(int df, int dt) const { return w[static_cast<std::size_t>((df + 1) * 3 + (dt + 1))]; }
  void validate() const;
};

// Gaussian weights of radius 0.5, normalized to sum 1.
WindowKernel gaussian_window();

// The luminance constant differs between the source convention
// (C1 = 0.01 L, unsquared) and standard SSIM (C1 = (0.01 L)^2).
enum class ConstantsRule { Paper, Standard };
enum class LMode { ReferenceMax, PairMax, Fixed };

std::string constants_rule_name(ConstantsRule r);
ConstantsRule constants_rule_from_name(const std::string& s);
std::string l_mode_name(LMode m);
LMode l_mode_from_name(const std::string& s);

struct SimilarityConfig {
  ConstantsRule constants_rule = ConstantsRule::Paper;
  LMode l_mode = LMode::ReferenceMax;
  double l_fixed = 1.0;
  // Component exponents, used by ssi() only.
  double alpha = 1.0;
  double beta = 1.0;
  double gamma = 1.0;
  WindowKernel window = gaussian_window();
};

struct Constants {
  double c1, c2, c3;
};
Constants bind_constants(double intensity_range, ConstantsRule rule);

// Intensity range per the configured binding mode.
double bind_intensity_range(const Neurogram& r, const Neurogram& d,
                            const SimilarityConfig& config);

struct LocalStats {
  double mu_r, mu_d, sigma_r, sigma_d, cov_rd;
};

// Weighted window statistics at interior position (f, t). Population form:
// sigma^2 = sum w (x - mu)^2 with weights summing to 1.
LocalStats local_stats(const Neurogram& r, const Neurogram& d,
                       const WindowKernel& kernel, std::size_t f,
                       std::size_t t);

// Dense map over the valid (interior) window positions.
struct WindowGrid {
  std::vector<double> v;  // row-major
  std::size_t rows = 0;
  std::size_t cols = 0;
  double at(std::size_t i, std::size_t j) const { return v[i * cols + j]; }
};

struct SsiResult {
  WindowGrid map;
  double mean = 0.0;
  double l_used = 0.0;
};

// Full three-component similarity l^alpha * c^beta * s^gamma per window.
// With standard constants and unit exponents this is the classic SSIM and
// serves as the oracle cross-validation surface.
SsiResult ssi(const Neurogram& r, const Neurogram& d,
              const SimilarityConfig& config);

// Two-component (luminance * structure) index per window. Values are not
// clamped; anti-correlated structure yields negative entries.
WindowGrid nsi_map(const Neurogram& r, const Neurogram& d,
                   const SimilarityConfig& config);

struct SimilarityResult {
  double nsim = 0.0;
  WindowGrid nsi;
  std::size_t n_windows = 0;
  double l_used = 0.0;
};

// Mean of the NSI map over all evaluated windows (row-major accumulation in
// extended precision, so results are independent of any parallel split).
SimilarityResult nsim(const Neurogram& r, const Neurogram& d,
                      const SimilarityConfig& config);

// Arithmetic mean of the three per-class similarities.
double overall_nsim(double ls, double ms, double hs);

}  // namespace neuracoustic
