#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "neuracoustic/config.hpp"
#include "neuracoustic/corpus.hpp"
#include "neuracoustic/neurogram.hpp"
#include "neuracoustic/periphery.hpp"
#include "neuracoustic/svr.hpp"

namespace neuracoustic::studies {

struct HearingProfile {
  std::string id;
  Audiogram audiogram;
  CNDProfile cnd;
  std::string description;
  void validate() const;
};

// Mean threshold at 500/1000/2000/4000 Hz, interpolated where needed.
double pta(const Audiogram& audiogram);

// Relative similarity drop caused by adding neural degeneration to a
// hearing-loss profile: (nsim_no_cnd - nsim_cnd) / nsim_no_cnd.
double cnd_effect(double nsim_no_cnd, double nsim_cnd);

// The sloping-loss audiogram used throughout the degeneration sweep.
Audiogram sloping_loss_audiogram();

// Sloping loss paired with progressively fewer low/medium-spontaneous-rate
// fibers; the no-degeneration row comes first.
std::vector<HearingProfile> default_cnd_profiles();

// JSON: {"profiles": [{"id", "audiogram": [[hz, db], ...],
//                      "cnd": [ls, ms, hs], "description"}, ...]}
std::vector<HearingProfile> load_profiles_json(const std::filesystem::path& path);

// CSV with header profile_id,score; scores in [0, 1].
std::map<std::string, double> load_scores_csv(const std::filesystem::path& path);

struct StudyRecord {
  std::string word_id;
  std::string profile_id;
  double level_db_spl = 0.0;
  std::string condition;
  FiberType fiber = FiberType::Sum;
  NeurogramKind kind = NeurogramKind::MR;
  double nsim = 0.0;
};

struct CNDEffectPoint {
  std::string profile_id;
  double level_db_spl = 0.0;
  std::string condition;
  NeurogramKind kind = NeurogramKind::MR;
  double effect = 0.0;
};

// MR and FT neurograms for each fiber class plus the pooled (SUM) response
// of one (stimulus, profile) simulation.
struct NeurogramSet {
  std::array<Neurogram, 4> mr;  // indexed by FiberType
  std::array<Neurogram, 4> ft;
  const Neurogram& of(NeurogramKind k, FiberType f) const {
    return (k == NeurogramKind::MR ? mr : ft)[static_cast<std::size_t>(f)];
  }
};

NeurogramSet compute_neurograms(const Waveform& calibrated,
                                const HearingProfile& profile,
                                const RunConfig& cfg,
                                const NeurogramMeta& meta);

// The normal-cochlea comparison profile: flat 0 dB HL, full fiber complement.
HearingProfile reference_profile();

// Per-profile averaged MR/FT similarity features at the fixed test level,
// optionally joined with externally measured scores (missing -> NaN).
std::vector<svr::FeatureRow> study1_features(
    const CorpusManifest& corpus, const std::vector<HearingProfile>& profiles,
    const RunConfig& cfg,
    const std::map<std::string, double>* scores = nullptr);

struct Study2Result {
  std::vector<StudyRecord> records;      // one per (word, profile, level,
                                         // condition, fiber class, kind)
  std::vector<CNDEffectPoint> effects;   // word-averaged, per kind
  // Sweep axes in canonical output order.
  std::vector<std::string> word_order;
  std::vector<std::string> profile_order;
  std::vector<double> level_order;
  std::vector<std::string> condition_order;
};

// Full factorial sweep over (word, profile, level, condition). Every cell is
// scored against the normal-cochlea reference hearing the same stimulus with
// the same seed. Completed cells are cached under cache_dir (or
// $NEURACOUSTIC_CACHE_DIR) keyed by content, making interrupted sweeps
// resumable; pass an empty optional to disable caching.
Study2Result study2_sweep(const CorpusManifest& corpus,
                          const std::vector<HearingProfile>& profiles,
                          const RunConfig& cfg,
                          const std::optional<std::filesystem::path>& cache_dir);

// study2_records.csv, cnd_effect.csv and one SVG chart per condition.
// Byte-stable given identical records.
void emit_report(const Study2Result& result,
                 const std::filesystem::path& out_dir);

// Resolved cache directory: override > $NEURACOUSTIC_CACHE_DIR > default.
std::filesystem::path resolve_cache_dir(
    const std::optional<std::filesystem::path>& override_dir,
    const std::filesystem::path& default_dir);

}  // namespace neuracoustic::studies
