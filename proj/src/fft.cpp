#include "neuracoustic/fft.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numbers>
#include <stdexcept>

namespace neuracoustic::fft {
namespace {

// The FFTW planner is not thread-safe (execution is). Plans are created with
// FFTW_ESTIMATE so the chosen codelet depends only on the transform size and
// buffer alignment, which keeps repeated runs bit-identical.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwBuffer {
  explicit FftwBuffer(std::size_t bytes) : p(fftw_malloc(bytes)) {
    if (!p) throw std::bad_alloc();
  }
  ~FftwBuffer() { fftw_free(p); }
  FftwBuffer(const FftwBuffer&) = delete;
  FftwBuffer& operator=(const FftwBuffer&) = delete;
  void* p;
};

}  // namespace

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

std::vector<std::complex<double>> rfft(std::span<const double> x,
                                       std::size_t n) {
  if (n == 0) throw std::invalid_argument("rfft: zero-length transform");
  FftwBuffer in(sizeof(double) * n);
  FftwBuffer out(sizeof(fftw_complex) * (n / 2 + 1));
  auto* inp = static_cast<double*>(in.p);
  auto* outp = static_cast<fftw_complex*>(out.p);
  const std::size_t m = std::min(n, x.size());
  std::copy_n(x.data(), m, inp);
  std::fill(inp + m, inp + n, 0.0);

  fftw_plan plan;
  {
    std::lock_guard<std::mutex> lock(planner_mutex());
    plan = fftw_plan_dft_r2c_1d(static_cast<int>(n), inp, outp,
                                FFTW_ESTIMATE | FFTW_PRESERVE_INPUT);
  }
  fftw_execute(plan);
  {
    std::lock_guard<std::mutex> lock(planner_mutex());
    fftw_destroy_plan(plan);
  }

  std::vector<std::complex<double>> spec(n / 2 + 1);
  for (std::size_t k = 0; k < spec.size(); ++k)
    spec[k] = std::complex<double>(outp[k][0], outp[k][1]);
  return spec;
}

std::vector<double> irfft(std::span<const std::complex<double>> spec,
                          std::size_t n) {
  if (n == 0 || spec.size() != n / 2 + 1)
    throw std::invalid_argument("irfft: spectrum size does not match n");
  FftwBuffer in(sizeof(fftw_complex) * spec.size());
  FftwBuffer out(sizeof(double) * n);
  auto* inp = static_cast<fftw_complex*>(in.p);
  auto* outp = static_cast<double*>(out.p);
  for (std::size_t k = 0; k < spec.size(); ++k) {
    inp[k][0] = spec[k].real();
    inp[k][1] = spec[k].imag();
  }

  fftw_plan plan;
  {
    std::lock_guard<std::mutex> lock(planner_mutex());
    plan = fftw_plan_dft_c2r_1d(static_cast<int>(n), inp, outp,
                                FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  {
    std::lock_guard<std::mutex> lock(planner_mutex());
    fftw_destroy_plan(plan);
  }

  std::vector<double> x(n);
  const double scale = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = outp[i] * scale;
  return x;
}

std::vector<double> convolve(std::span<const double> a,
                             std::span<const double> b) {
  if (a.empty() || b.empty())
    throw std::invalid_argument("convolve: empty operand");
  const std::size_t n_lin = a.size() + b.size() - 1;
  const std::size_t n = next_pow2(n_lin);
  auto sa = rfft(a, n);
  const auto sb = rfft(b, n);
  for (std::size_t k = 0; k < sa.size(); ++k) sa[k] *= sb[k];
  auto full = irfft(sa, n);
  full.resize(n_lin);
  return full;
}

std::vector<double> welch_magnitude(std::span<const double> x,
                                    std::size_t window) {
  if (window < 4 || (window & 1))
    throw std::invalid_argument("welch_magnitude: window must be even, >= 4");
  std::vector<double> hann(window);
  for (std::size_t i = 0; i < window; ++i)
    hann[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi *
                                   static_cast<double>(i) /
                                   static_cast<double>(window));

  const std::size_t hop = window / 2;
  std::vector<double> psd(window / 2 + 1, 0.0);
  std::vector<double> seg(window);
  std::size_t n_segs = 0;
  for (std::size_t start = 0; start == 0 || start + window <= x.size();
       start += hop) {
    for (std::size_t i = 0; i < window; ++i) {
      const std::size_t j = start + i;
      seg[i] = (j < x.size() ? x[j] : 0.0) * hann[i];
    }
    const auto spec = rfft(seg, window);
    for (std::size_t k = 0; k < psd.size(); ++k) psd[k] += std::norm(spec[k]);
    ++n_segs;
    if (start + window >= x.size()) break;
  }
  std::vector<double> mag(psd.size());
  for (std::size_t k = 0; k < psd.size(); ++k)
    mag[k] = std::sqrt(psd[k] / static_cast<double>(n_segs));
  return mag;
}

}  // namespace neuracoustic::fft
