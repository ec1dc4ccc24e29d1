#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "neuracoustic/neurogram.hpp"
#include "neuracoustic/periphery.hpp"
#include "neuracoustic/similarity.hpp"

namespace neuracoustic {

struct StudyParams {
  std::vector<double> levels_db_spl = {50.0, 65.0, 80.0, 95.0};
  std::vector<std::string> conditions = {"clean", "comp65", "comp65_reverb"};
  double compression_factor = 0.65;
  double reverb_rt60_s = 0.5;
  double reverb_ir_s = 0.75;
  double study1_level_db_spl = 65.0;
  // The noise SNR is a config parameter with no claim of matching any
  // particular published test setup.
  bool study1_use_noise = true;
  double study1_snr_db = 10.0;
  bool study2_use_noise = false;
  double study2_snr_db = 10.0;
  // How multi-feature regression combinations are read: "set" supplies the
  // named features side by side, "product" multiplies them into one feature.
  std::string feature_mode = "set";
  void validate() const;
};

// Full resolved run configuration. Seeds are always explicit; nothing in the
// pipeline ever draws from the wall clock.
struct RunConfig {
  PeripheryConfig periphery;
  NeurogramParams neurogram;
  SimilarityConfig similarity;
  StudyParams study;
  std::uint64_t seed = 12345;
  int jobs = 1;
  std::string out_dir = "out";
  void validate() const;
};

RunConfig default_run_config();

// Accepts TOML (a flat [section] key=value subset: strings, numbers,
// booleans, arrays) or JSON, chosen by content sniffing. A config file must
// carry an explicit seed.
RunConfig load_run_config(const std::filesystem::path& path);

nlohmann::json config_to_json(const RunConfig& cfg);
std::string config_to_toml(const RunConfig& cfg);

// Parses the TOML subset into a JSON object (sections become objects).
nlohmann::json toml_subset_to_json(const std::string& text);

}  // namespace neuracoustic
