#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "neuracoustic/wave.hpp"

namespace neuracoustic {

// Auditory nerve fiber classes, ordered by spontaneous rate. Sum tags
// neurograms built from the pooled activity of all three classes.
enum class FiberType { LS = 0, MS = 1, HS = 2, Sum = 3 };

inline constexpr std::array<FiberType, 3> kFiberClasses = {
    FiberType::LS, FiberType::MS, FiberType::HS};

std::string fiber_name(FiberType f);
FiberType fiber_from_name(const std::string& name);

// Threshold audiogram in dB HL over frequency; interpolated linearly in
// log-frequency and clamped outside the measured range.
struct Audiogram {
  std::vector<std::pair<double, double>> points;  // (frequency_hz, db_hl)

  void validate() const;
  double threshold_at(double f_hz) const;
  static Audiogram flat(double db_hl);
};

// Static rate-level description of one fiber class.
struct FiberParams {
  double spont_rate_sp_s;
  double threshold_db;        // re the drive reference, dB
  double saturation_rate_sp_s;
  double dynamic_range_db;
};

struct FiberSet {
  FiberParams ls{0.1, 28.0, 150.0, 40.0};
  FiberParams ms{4.0, 12.0, 200.0, 30.0};
  FiberParams hs{70.0, 0.0, 250.0, 20.0};
  const FiberParams& of(FiberType f) const;
  void validate() const;  // thresholds LS > MS > HS, sponts LS < MS < HS
};

// Fiber counts per class. The no-degeneration baseline is [5, 5, 12].
struct CNDProfile {
  int n_ls = 5;
  int n_ms = 5;
  int n_hs = 12;

  int count(FiberType f) const;
  void validate() const;
  static CNDProfile baseline() { return {5, 5, 12}; }
};

struct PeripheryConfig {
  int n_cf = 40;
  double cf_min_hz = 125.0;
  double cf_max_hz = 8000.0;
  double internal_rate_hz = 100000.0;
  int n_reps = 50;
  double ft_bin_s = 1e-4;         // base PSTH bin
  double max_ohc_db = 55.0;       // threshold shift attributable to OHC gain
  double broadening = 2.0;        // filter widening at full OHC loss
  double phase_lock_cutoff_hz = 3000.0;
  double drive_ref_pa = 20e-6;    // 0 dB drive reference
  FiberSet fibers;
  std::uint64_t seed = 0;

  void validate() const;
};

struct PSTH {
  std::vector<std::uint32_t> counts;  // summed across repetitions
  double bin_width_s = 0.0;
  double cf_hz = 0.0;
  FiberType fiber = FiberType::Sum;
};

// n_cf log-spaced characteristic frequencies from cf_min to cf_max inclusive.
std::vector<double> cf_grid(const PeripheryConfig& config);

// Threshold shift at cf attributed to OHC gain loss, capped at max_ohc_db.
double ohc_gain_reduction(const Audiogram& audiogram, double cf_hz,
                          double max_ohc_db = 55.0);

// Cochlear band drive: 4th-order gammatone at cf (ERB widened and gain
// reduced with OHC loss), half-wave rectified, low-passed at the
// phase-locking corner. Input must be calibrated in pascals.
std::vector<double> band_drive(const Waveform& pressure, double cf_hz,
                               const Audiogram& audiogram,
                               const PeripheryConfig& config);

// Instantaneous firing rate from drive via a static sigmoid rate-level
// function: spont + (sat-spont) / (1 + exp(-4 (x - thr) / dr)) with
// x = 20 log10(drive / drive_ref).
std::vector<double> fiber_rate(std::span<const double> drive,
                               const FiberParams& fiber, double drive_ref_pa);

// Inhomogeneous Poisson spiking: independent draws per repetition per bin
// with mean = integral of rate over the bin, summed across repetitions.
PSTH spike_psth(std::span<const double> rate, double rate_sample_hz,
                double bin_width_s, int n_reps, std::uint64_t seed);

struct FiberBank {
  // psths[class][cf index]; a class with zero fibers is all-zero and flagged.
  std::array<std::vector<PSTH>, 3> psths;
  std::array<bool, 3> absent{false, false, false};

  const std::vector<PSTH>& of(FiberType f) const;
  bool is_absent(FiberType f) const;
  // Pooled activity of all classes at each CF, tagged FiberType::Sum.
  std::vector<PSTH> summed() const;
};

// Per-class PSTHs of the summed activity of `count` independent fibers at
// every CF. Draws are seeded per (cf, class, fiber, rep), so any partition
// of that space across workers produces identical results.
FiberBank simulate_fiber_bank(const Waveform& stimulus,
                              const Audiogram& audiogram,
                              const CNDProfile& cnd,
                              const PeripheryConfig& config);

}  // namespace neuracoustic
