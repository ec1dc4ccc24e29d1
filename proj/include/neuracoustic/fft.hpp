#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace neuracoustic::fft {

std::size_t next_pow2(std::size_t n);

// Real-input FFT, length n (any size). Returns n/2+1 spectrum bins.
std::vector<std::complex<double>> rfft(std::span<const double> x,
                                       std::size_t n);

// Inverse of rfft back to n real samples (includes the 1/n scaling).
std::vector<double> irfft(std::span<const std::complex<double>> spec,
                          std::size_t n);

// Linear convolution a*b, length |a|+|b|-1, via zero-padded FFT.
std::vector<double> convolve(std::span<const double> a,
                             std::span<const double> b);

// Welch-averaged one-sided magnitude spectrum: Hann window, 50% overlap.
// Returns window/2+1 magnitudes (sqrt of the averaged periodogram).
// Signals shorter than the window are zero-padded into a single segment.
std::vector<double> welch_magnitude(std::span<const double> x,
                                    std::size_t window);

}  // namespace neuracoustic::fft
