#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "neuracoustic/periphery.hpp"

namespace neuracoustic {

enum class NeurogramKind { MR, FT };

std::string kind_name(NeurogramKind k);
NeurogramKind kind_from_name(const std::string& name);

struct NeurogramMeta {
  std::string stimulus_id;
  double level_db_spl = 0.0;
  std::string condition;
  std::string profile_id;
  std::uint64_t seed = 0;
};

// CF x time matrix of smoothed spike counts, rows ordered by ascending CF.
struct Neurogram {
  std::vector<double> values;  // row-major, n_cf * n_time
  std::size_t n_cf = 0;
  std::size_t n_time = 0;
  std::vector<double> cf_axis_hz;
  double bin_width_s = 0.0;
  NeurogramKind kind = NeurogramKind::MR;
  FiberType fiber = FiberType::Sum;
  NeurogramMeta meta;

  double at(std::size_t f, std::size_t t) const {
    return values[f * n_time + t];
  }
  double& at(std::size_t f, std::size_t t) { return values[f * n_time + t]; }
  void validate() const;
};

struct NeurogramParams {
  double ft_bin_s = 1e-4;
  double mr_bin_s = 6.4e-3;
  int ft_window_bins = 32;
  int mr_window_bins = 16;
  void validate() const;
};

struct RebinResult {
  PSTH psth;
  bool truncated = false;  // trailing partial bin dropped
};

// Sums counts over consecutive groups; target bin must be an integer
// multiple of the source bin. Total count is preserved over kept bins.
RebinResult rebin(const PSTH& psth, double target_bin_s);

// Rebins to the kind's bin width, then smooths each row with a Hamming
// window normalized to unit DC gain (same-length convolution).
Neurogram build_neurogram(const std::vector<PSTH>& psths_over_cf,
                          NeurogramKind kind, const NeurogramParams& params,
                          const NeurogramMeta& meta);

// Intensity range of a reference neurogram: its maximum value.
double intensity_range(const Neurogram& reference);

// Binary neurogram format: one UTF-8 JSON header line (metadata +
// dimensions), then row-major little-endian 64-bit floats. Round-trips
// bit-exactly.
void write_neurogram(const Neurogram& n, const std::filesystem::path& path);
Neurogram read_neurogram(const std::filesystem::path& path);

// One row per CF, header line carries the time axis.
void write_neurogram_csv(const Neurogram& n, const std::filesystem::path& path);

}  // namespace neuracoustic
