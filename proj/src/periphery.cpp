#include "neuracoustic/periphery.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>

#include "neuracoustic/errors.hpp"
#include "neuracoustic/rng.hpp"

namespace neuracoustic {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Glasberg & Moore equivalent rectangular bandwidth.
double erb_hz(double f_hz) { return 24.7 * (4.37 * f_hz / 1000.0 + 1.0); }

std::uint64_t fiber_tag(FiberType f) {
  return static_cast<std::uint64_t>(f) + 1;
}

// Per-bin Poisson means (integral of rate over each bin) and their
// precomputed exp(-mean); trailing partial bin dropped.
struct BinMeans {
  std::vector<double> mean;
  std::vector<double> expneg;
};

BinMeans bin_means(std::span<const double> rate, double rate_sample_hz,
                   double bin_width_s) {
  const double ratio = bin_width_s * rate_sample_hz;
  const auto per_bin = static_cast<std::size_t>(std::llround(ratio));
  require_input(per_bin >= 1 &&
                    std::abs(ratio - static_cast<double>(per_bin)) < 1e-6,
                "bin width must be an integer multiple of the sample period");
  const std::size_t n_bins = rate.size() / per_bin;
  const double dt = 1.0 / rate_sample_hz;
  BinMeans bm;
  bm.mean.resize(n_bins);
  bm.expneg.resize(n_bins);
  for (std::size_t b = 0; b < n_bins; ++b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < per_bin; ++i) acc += rate[b * per_bin + i];
    bm.mean[b] = acc * dt;
    bm.expneg[b] = std::exp(-bm.mean[b]);
  }
  return bm;
}

// One independent engine per repetition; draws accumulate into counts.
void accumulate_poisson_reps(const BinMeans& bm, int n_reps,
                             std::uint64_t seed,
                             std::vector<std::uint32_t>& counts) {
  const std::size_t n_bins = bm.mean.size();
  const double* mean = bm.mean.data();
  const double* expneg = bm.expneg.data();
  for (int rep = 0; rep < n_reps; ++rep) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(rep)));
    for (std::size_t b = 0; b < n_bins; ++b) {
      if (mean[b] <= 30.0) {
        counts[b] += rng.poisson_with_expneg(mean[b], expneg[b]);
      } else {
        counts[b] += rng.poisson(mean[b]);
      }
    }
  }
}

}  // namespace

std::string fiber_name(FiberType f) {
  switch (f) {
    case FiberType::LS: return "LS";
    case FiberType::MS: return "MS";
    case FiberType::HS: return "HS";
    case FiberType::Sum: return "SUM";
  }
  throw InputError("unknown fiber type");
}

FiberType fiber_from_name(const std::string& name) {
  if (name == "LS") return FiberType::LS;
  if (name == "MS") return FiberType::MS;
  if (name == "HS") return FiberType::HS;
  if (name == "SUM") return FiberType::Sum;
  throw InputError("unknown fiber type name: " + name);
}

void Audiogram::validate() const {
  require_input(points.size() >= 2, "audiogram needs at least two points");
  for (std::size_t i = 0; i < points.size(); ++i) {
    require_input(points[i].first > 0.0, "audiogram frequency must be positive");
    require_input(points[i].second >= 0.0 && points[i].second <= 120.0,
                  "audiogram thresholds must lie in [0, 120] dB HL");
    if (i > 0)
      require_input(points[i].first > points[i - 1].first,
                    "audiogram frequencies must be strictly increasing");
  }
  require_input(points.front().first <= 250.0 && points.back().first >= 8000.0,
                "audiogram must cover at least 250-8000 Hz");
}

double Audiogram::threshold_at(double f_hz) const {
  validate();
  if (f_hz <= points.front().first) return points.front().second;
  if (f_hz >= points.back().first) return points.back().second;
  const double lf = std::log(f_hz);
  for (std::size_t i = 1; i < points.size(); ++i) {
    if (f_hz <= points[i].first) {
      const double l0 = std::log(points[i - 1].first);
      const double l1 = std::log(points[i].first);
      const double a = (lf - l0) / (l1 - l0);
      return points[i - 1].second +
             a * (points[i].second - points[i - 1].second);
    }
  }
  return points.back().second;
}

Audiogram Audiogram::flat(double db_hl) {
  Audiogram a;
  for (double f : {125.0, 250.0, 500.0, 1000.0, 2000.0, 4000.0, 8000.0})
    a.points.emplace_back(f, db_hl);
  return a;
}

const FiberParams& FiberSet::of(FiberType f) const {
  switch (f) {
    case FiberType::LS: return ls;
    case FiberType::MS: return ms;
    case FiberType::HS: return hs;
    default: throw InputError("no parameters for pooled fiber type");
  }
}

void FiberSet::validate() const {
  require_input(ls.threshold_db > ms.threshold_db &&
                    ms.threshold_db > hs.threshold_db,
                "fiber thresholds must be ordered LS > MS > HS");
  require_input(ls.spont_rate_sp_s < ms.spont_rate_sp_s &&
                    ms.spont_rate_sp_s < hs.spont_rate_sp_s,
                "spontaneous rates must be ordered LS < MS < HS");
  for (const auto* p : {&ls, &ms, &hs}) {
    require_input(p->spont_rate_sp_s >= 0.0, "negative spontaneous rate");
    require_input(p->saturation_rate_sp_s > p->spont_rate_sp_s,
                  "saturation rate must exceed spontaneous rate");
    require_input(p->dynamic_range_db > 0.0, "dynamic range must be positive");
  }
}

int CNDProfile::count(FiberType f) const {
  switch (f) {
    case FiberType::LS: return n_ls;
    case FiberType::MS: return n_ms;
    case FiberType::HS: return n_hs;
    default: return n_ls + n_ms + n_hs;
  }
}

void CNDProfile::validate() const {
  const CNDProfile base = baseline();
  require_input(n_ls >= 0 && n_ms >= 0 && n_hs >= 0,
                "fiber counts must be non-negative");
  require_input(n_ls <= base.n_ls && n_ms <= base.n_ms && n_hs <= base.n_hs,
                "fiber counts cannot exceed the no-degeneration baseline");
}

void PeripheryConfig::validate() const {
  require_input(n_cf >= 2, "need at least two characteristic frequencies");
  require_input(cf_min_hz > 0.0 && cf_min_hz < cf_max_hz,
                "CF range must satisfy 0 < cf_min < cf_max");
  require_input(internal_rate_hz > 0.0, "internal rate must be positive");
  require_input(n_reps >= 1, "need at least one repetition");
  require_input(ft_bin_s > 0.0, "PSTH bin width must be positive");
  require_input(ft_bin_s >= 1.0 / internal_rate_hz,
                "PSTH bin width must be at least one sample period");
  require_input(max_ohc_db > 0.0, "OHC cap must be positive");
  require_input(broadening >= 0.0, "broadening must be non-negative");
  require_input(phase_lock_cutoff_hz > 0.0, "phase-lock cutoff must be positive");
  require_input(drive_ref_pa > 0.0, "drive reference must be positive");
  fibers.validate();
}

std::vector<double> cf_grid(const PeripheryConfig& config) {
  config.validate();
  std::vector<double> cfs(static_cast<std::size_t>(config.n_cf));
  const double l0 = std::log(config.cf_min_hz);
  const double l1 = std::log(config.cf_max_hz);
  for (int i = 0; i < config.n_cf; ++i) {
    const double a = static_cast<double>(i) / static_cast<double>(config.n_cf - 1);
    cfs[static_cast<std::size_t>(i)] = std::exp(l0 + a * (l1 - l0));
  }
  cfs.front() = config.cf_min_hz;
  cfs.back() = config.cf_max_hz;
  return cfs;
}

double ohc_gain_reduction(const Audiogram& audiogram, double cf_hz,
                          double max_ohc_db) {
  return std::min(audiogram.threshold_at(cf_hz), max_ohc_db);
}

std::vector<double> band_drive(const Waveform& pressure, double cf_hz,
                               const Audiogram& audiogram,
                               const PeripheryConfig& config) {
  pressure.validate();
  config.validate();
  const double fs = config.internal_rate_hz;
  require_input(std::abs(pressure.sample_rate - fs) < 1e-6,
                "stimulus must be resampled to the internal rate first");

  const double loss_db = ohc_gain_reduction(audiogram, cf_hz, config.max_ohc_db);
  const double loss_frac = loss_db / config.max_ohc_db;
  const double bw_hz =
      1.019 * erb_hz(cf_hz) * (1.0 + config.broadening * loss_frac);

  // 4th-order gammatone as a cascade of four identical one-pole complex
  // resonators. Gain is normalized so a tone at cf passes at unit amplitude,
  // then reduced by the OHC loss.
  const double dt = 1.0 / fs;
  const std::complex<double> pole =
      std::exp(std::complex<double>(-kTwoPi * bw_hz * dt, kTwoPi * cf_hz * dt));
  const std::complex<double> z = std::exp(std::complex<double>(0.0, kTwoPi * cf_hz * dt));
  const std::complex<double> stage_resp = 1.0 / (1.0 - pole / z);
  const double cascade_mag = std::pow(std::abs(stage_resp), 4);
  const double gain = 2.0 / cascade_mag * std::pow(10.0, -loss_db / 20.0);

  const std::size_t n = pressure.samples.size();
  std::vector<double> drive(n);
  std::complex<double> s1{0.0, 0.0}, s2{0.0, 0.0}, s3{0.0, 0.0}, s4{0.0, 0.0};
  // Phase-locking roll-off: 2nd-order Butterworth low-pass after rectification.
  const double wc = std::tan(std::numbers::pi * config.phase_lock_cutoff_hz * dt);
  const double kq = std::numbers::sqrt2;
  const double norm = 1.0 / (1.0 + kq * wc + wc * wc);
  const double b0 = wc * wc * norm;
  const double b1 = 2.0 * b0;
  const double b2 = b0;
  const double a1 = 2.0 * (wc * wc - 1.0) * norm;
  const double a2 = (1.0 - kq * wc + wc * wc) * norm;
  double x1 = 0.0, x2 = 0.0, y1 = 0.0, y2 = 0.0;

  for (std::size_t i = 0; i < n; ++i) {
    s1 = pressure.samples[i] + pole * s1;
    s2 = s1 + pole * s2;
    s3 = s2 + pole * s3;
    s4 = s3 + pole * s4;
    const double bp = gain * s4.real();
    const double rect = bp > 0.0 ? bp : 0.0;
    const double lp = b0 * rect + b1 * x1 + b2 * x2 - a1 * y1 - a2 * y2;
    x2 = x1;
    x1 = rect;
    y2 = y1;
    y1 = lp;
    drive[i] = lp > 0.0 ? lp : 0.0;
  }
  return drive;
}

std::vector<double> fiber_rate(std::span<const double> drive,
                               const FiberParams& fiber, double drive_ref_pa) {
  require_input(drive_ref_pa > 0.0, "drive reference must be positive");
  const double span = fiber.saturation_rate_sp_s - fiber.spont_rate_sp_s;
  const double slope = 4.0 / fiber.dynamic_range_db;
  std::vector<double> rate(drive.size());
  for (std::size_t i = 0; i < drive.size(); ++i) {
    const double d = drive[i];
    if (d <= 0.0) {
      rate[i] = fiber.spont_rate_sp_s;
      continue;
    }
    const double x_db = 20.0 * std::log10(d / drive_ref_pa);
    const double s = 1.0 / (1.0 + std::exp(-slope * (x_db - fiber.threshold_db)));
    rate[i] = fiber.spont_rate_sp_s + span * s;
  }
  return rate;
}

PSTH spike_psth(std::span<const double> rate, double rate_sample_hz,
                double bin_width_s, int n_reps, std::uint64_t seed) {
  require_input(rate_sample_hz > 0.0, "rate sample frequency must be positive");
  require_input(n_reps >= 1, "need at least one repetition");
  const BinMeans bm = bin_means(rate, rate_sample_hz, bin_width_s);
  PSTH psth;
  psth.counts.assign(bm.mean.size(), 0);
  psth.bin_width_s = bin_width_s;
  accumulate_poisson_reps(bm, n_reps, seed, psth.counts);
  return psth;
}

const std::vector<PSTH>& FiberBank::of(FiberType f) const {
  if (f == FiberType::Sum)
    throw InputError("use FiberBank::summed() for the pooled response");
  return psths[static_cast<std::size_t>(f)];
}

bool FiberBank::is_absent(FiberType f) const {
  return absent[static_cast<std::size_t>(f)];
}

std::vector<PSTH> FiberBank::summed() const {
  std::vector<PSTH> sum = psths[0];
  for (std::size_t c = 1; c < psths.size(); ++c) {
    for (std::size_t i = 0; i < sum.size(); ++i) {
      for (std::size_t b = 0; b < sum[i].counts.size(); ++b)
        sum[i].counts[b] += psths[c][i].counts[b];
    }
  }
  for (auto& p : sum) p.fiber = FiberType::Sum;
  return sum;
}

FiberBank simulate_fiber_bank(const Waveform& stimulus,
                              const Audiogram& audiogram,
                              const CNDProfile& cnd,
                              const PeripheryConfig& config) {
  config.validate();
  cnd.validate();
  require_input(cnd.n_ls + cnd.n_ms + cnd.n_hs > 0,
                "empty fiber population: all counts are zero");

  const auto cfs = cf_grid(config);
  FiberBank bank;
  for (FiberType f : kFiberClasses)
    bank.absent[static_cast<std::size_t>(f)] = (cnd.count(f) == 0);

  for (std::size_t ci = 0; ci < cfs.size(); ++ci) {
    const auto drive = band_drive(stimulus, cfs[ci], audiogram, config);
    for (FiberType f : kFiberClasses) {
      const int count = cnd.count(f);
      PSTH acc;
      acc.cf_hz = cfs[ci];
      acc.fiber = f;
      acc.bin_width_s = config.ft_bin_s;
      if (count == 0) {
        const auto per_bin = static_cast<std::size_t>(
            std::llround(config.ft_bin_s * config.internal_rate_hz));
        acc.counts.assign(drive.size() / per_bin, 0);
      } else {
        // The summed activity of `count` identical independent fibers is an
        // inhomogeneous Poisson process at count * rate (superposition), so
        // one stream per (cf, class) suffices. The inverse-CDF sampler draws
        // exactly one uniform per bin, which keeps the streams of different
        // profiles bin-aligned and monotonically coupled under the shared
        // master seed.
        auto rate = fiber_rate(drive, config.fibers.of(f), config.drive_ref_pa);
        for (double& r : rate) r *= static_cast<double>(count);
        const BinMeans bm =
            bin_means(rate, config.internal_rate_hz, config.ft_bin_s);
        acc.counts.assign(bm.mean.size(), 0);
        const std::uint64_t s = derive_seed(
            config.seed, static_cast<std::uint64_t>(ci), fiber_tag(f));
        accumulate_poisson_reps(bm, config.n_reps, s, acc.counts);
      }
      bank.psths[static_cast<std::size_t>(f)].push_back(std::move(acc));
    }
  }
  return bank;
}

}  // namespace neuracoustic
