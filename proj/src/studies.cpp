#include "neuracoustic/studies.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <limits>
#include <mutex>
#include <thread>

#include <json.hpp>

#include "neuracoustic/errors.hpp"
#include "neuracoustic/rng.hpp"
#include "neuracoustic/similarity.hpp"
#include "neuracoustic/stimulus.hpp"

namespace neuracoustic::studies {
namespace {

// Runs fn(0..n-1) on `jobs` workers pulling from a shared counter. Results
// must be written to per-index slots; the first exception aborts the run.
void parallel_for(std::size_t n, int jobs,
                  const std::function<void(std::size_t)>& fn) {
  if (jobs <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::mutex err_mutex;
  std::exception_ptr error;
  auto worker = [&]() {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      {
        std::lock_guard<std::mutex> lock(err_mutex);
        if (error) return;
      }
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mutex);
        if (!error) error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  const auto width = static_cast<std::size_t>(jobs);
  pool.reserve(width);
  for (std::size_t t = 0; t < width; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(v));
  return buf;
}

nlohmann::json profile_to_json(const HearingProfile& p) {
  nlohmann::json audio = nlohmann::json::array();
  for (const auto& [f, t] : p.audiogram.points) audio.push_back({f, t});
  return {{"id", p.id},
          {"audiogram", audio},
          {"cnd", {p.cnd.n_ls, p.cnd.n_ms, p.cnd.n_hs}}};
}

StimulusCondition condition_from_name(const std::string& name, double level,
                                      const RunConfig& cfg) {
  StimulusCondition c;
  c.level_db_spl = level;
  if (name == "clean") {
    c.compression_factor = 1.0;
  } else if (name == "comp65") {
    c.compression_factor = cfg.study.compression_factor;
  } else if (name == "comp65_reverb") {
    c.compression_factor = cfg.study.compression_factor;
    ReverbSpec spec;
    spec.rt60_s = cfg.study.reverb_rt60_s;
    spec.ir_length_s = cfg.study.reverb_ir_s;
    spec.seed = derive_seed(cfg.seed, fnv1a64("room"));
    c.reverb = spec;
  } else {
    throw InputError("unknown condition name: " + name);
  }
  return c;
}

// Word audio, loaded once and resampled to the periphery rate.
class WordLoader {
public:
  explicit WordLoader(const CorpusManifest& corpus, double rate)
      : corpus_(corpus), rate_(rate) {}

  const Waveform& get(std::size_t index) {
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = cache_.find(index);
    if (it != cache_.end()) return it->second;
    const auto& entry = corpus_.entries.at(index);
    Waveform w = resample(load_wav(entry.path), rate_);
    return cache_.emplace(index, std::move(w)).first->second;
  }

private:
  const CorpusManifest& corpus_;
  double rate_;
  std::mutex mutex_;
  std::map<std::size_t, Waveform> cache_;
};

// Per-cell result cache: one JSON file per completed (word, profile, level,
// condition) cell, written atomically via rename so concurrent workers on
// distinct keys never interfere.
class CellCache {
public:
  explicit CellCache(const std::optional<std::filesystem::path>& dir)
      : dir_(dir) {
    if (dir_) std::filesystem::create_directories(*dir_);
  }

  bool enabled() const { return dir_.has_value(); }

  std::optional<std::array<std::array<double, 2>, 3>> lookup(
      const std::string& key) const {
    if (!dir_) return std::nullopt;
    const auto path = *dir_ / (key + ".json");
    std::ifstream in(path);
    if (!in.good()) return std::nullopt;
    try {
      nlohmann::json j;
      in >> j;
      std::array<std::array<double, 2>, 3> out{};
      for (std::size_t f = 0; f < 3; ++f) {
        const auto& row = j.at("nsim").at(fiber_name(kFiberClasses[f]));
        out[f][0] = row.at("MR").get<double>();
        out[f][1] = row.at("FT").get<double>();
      }
      return out;
    } catch (const std::exception&) {
      return std::nullopt;  // unreadable entries are recomputed
    }
  }

  void store(const std::string& key,
             const std::array<std::array<double, 2>, 3>& values,
             const nlohmann::json& context) const {
    if (!dir_) return;
    nlohmann::json j;
    j["context"] = context;
    for (std::size_t f = 0; f < 3; ++f) {
      j["nsim"][fiber_name(kFiberClasses[f])] = {{"MR", values[f][0]},
                                                 {"FT", values[f][1]}};
    }
    const auto path = *dir_ / (key + ".json");
    const auto tmp = *dir_ / (key + ".tmp");
    {
      std::ofstream out(tmp);
      require_input(out.good(), "cannot write cache entry: " + tmp.string());
      out << j.dump() << "\n";
    }
    std::filesystem::rename(tmp, path);
  }

private:
  std::optional<std::filesystem::path> dir_;
};

// Config subset that affects a single cell's value (worker count and output
// locations must not change cache keys).
nlohmann::json cell_config_json(const RunConfig& cfg) {
  nlohmann::json j = config_to_json(cfg);
  j.erase("jobs");
  j.erase("out_dir");
  j["study"].erase("levels_db_spl");
  j["study"].erase("conditions");
  j["study"].erase("study1_level_db_spl");
  j["study"].erase("study1_use_noise");
  j["study"].erase("study1_snr_db");
  j["study"].erase("feature_mode");
  return j;
}

std::string cell_key(std::uint64_t wav_hash, const HearingProfile& profile,
                     double level, const std::string& condition,
                     const nlohmann::json& config_json, std::uint64_t seed,
                     nlohmann::json* context_out) {
  nlohmann::json key;
  key["wav"] = hex64(wav_hash);
  key["profile"] = profile_to_json(profile);
  key["level_db_spl"] = level;
  key["condition"] = condition;
  key["config"] = config_json;
  key["seed"] = seed;
  if (context_out) *context_out = key;
  return hex64(fnv1a64(key.dump()));
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

// Fixed palette for the per-profile chart lines.
constexpr const char* kPalette[] = {"#4477aa", "#66ccee", "#228833", "#ccbb44",
                                    "#ee6677", "#aa3377", "#bbbbbb", "#000000"};

struct SvgSeries {
  std::string label;
  std::vector<std::pair<double, double>> points;
};

void write_svg_line_chart(const std::filesystem::path& path,
                          const std::string& title, const std::string& x_label,
                          const std::string& y_label,
                          const std::vector<SvgSeries>& series) {
  double xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  bool first = true;
  for (const auto& s : series) {
    for (const auto& [x, y] : s.points) {
      if (first) {
        xmin = xmax = x;
        ymin = ymax = y;
        first = false;
      }
      xmin = std::min(xmin, x);
      xmax = std::max(xmax, x);
      ymin = std::min(ymin, y);
      ymax = std::max(ymax, y);
    }
  }
  ymin = std::min(ymin, 0.0);
  if (xmax - xmin < 1e-12) xmax = xmin + 1.0;
  if (ymax - ymin < 1e-12) ymax = ymin + 1.0;
  ymax += 0.05 * (ymax - ymin);

  const double width = 640, height = 420;
  const double ml = 70, mr = 160, mt = 40, mb = 50;
  const auto px = [&](double x) {
    return ml + (x - xmin) / (xmax - xmin) * (width - ml - mr);
  };
  const auto py = [&](double y) {
    return height - mb - (y - ymin) / (ymax - ymin) * (height - mt - mb);
  };
  const auto f2 = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return std::string(buf);
  };
  const auto f3g = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3g", v);
    return std::string(buf);
  };

  std::ofstream out(path);
  require_input(out.good(), "cannot write chart: " + path.string());
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
      << "\" height=\"" << height << "\" viewBox=\"0 0 " << width << " "
      << height << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << f2(width / 2 - mr / 2) << "\" y=\"24\" font-size=\"15\" "
      << "text-anchor=\"middle\" font-family=\"sans-serif\">" << title
      << "</text>\n";

  // Axes.
  out << "<line x1=\"" << f2(ml) << "\" y1=\"" << f2(height - mb) << "\" x2=\""
      << f2(width - mr) << "\" y2=\"" << f2(height - mb)
      << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << f2(ml) << "\" y1=\"" << f2(mt) << "\" x2=\"" << f2(ml)
      << "\" y2=\"" << f2(height - mb) << "\" stroke=\"black\"/>\n";

  // Ticks: x at each distinct point x, y at 5 even divisions.
  std::vector<double> xticks;
  for (const auto& s : series)
    for (const auto& [x, y] : s.points) xticks.push_back(x);
  std::sort(xticks.begin(), xticks.end());
  xticks.erase(std::unique(xticks.begin(), xticks.end()), xticks.end());
  for (double x : xticks) {
    out << "<line x1=\"" << f2(px(x)) << "\" y1=\"" << f2(height - mb)
        << "\" x2=\"" << f2(px(x)) << "\" y2=\"" << f2(height - mb + 5)
        << "\" stroke=\"black\"/>\n";
    out << "<text x=\"" << f2(px(x)) << "\" y=\"" << f2(height - mb + 20)
        << "\" font-size=\"12\" text-anchor=\"middle\" "
           "font-family=\"sans-serif\">"
        << f3g(x) << "</text>\n";
  }
  for (int i = 0; i <= 5; ++i) {
    const double y = ymin + (ymax - ymin) * i / 5.0;
    out << "<line x1=\"" << f2(ml - 5) << "\" y1=\"" << f2(py(y)) << "\" x2=\""
        << f2(ml) << "\" y2=\"" << f2(py(y)) << "\" stroke=\"black\"/>\n";
    out << "<text x=\"" << f2(ml - 9) << "\" y=\"" << f2(py(y) + 4)
        << "\" font-size=\"12\" text-anchor=\"end\" "
           "font-family=\"sans-serif\">"
        << f3g(y) << "</text>\n";
  }
  out << "<text x=\"" << f2((ml + width - mr) / 2) << "\" y=\""
      << f2(height - 12)
      << "\" font-size=\"13\" text-anchor=\"middle\" "
         "font-family=\"sans-serif\">"
      << x_label << "</text>\n";
  out << "<text x=\"18\" y=\"" << f2((mt + height - mb) / 2)
      << "\" font-size=\"13\" text-anchor=\"middle\" "
         "font-family=\"sans-serif\" transform=\"rotate(-90 18 "
      << f2((mt + height - mb) / 2) << ")\">" << y_label << "</text>\n";

  for (std::size_t s = 0; s < series.size(); ++s) {
    const char* color = kPalette[s % (sizeof(kPalette) / sizeof(kPalette[0]))];
    out << "<polyline fill=\"none\" stroke=\"" << color
        << "\" stroke-width=\"2\" points=\"";
    for (const auto& [x, y] : series[s].points)
      out << f2(px(x)) << "," << f2(py(y)) << " ";
    out << "\"/>\n";
    for (const auto& [x, y] : series[s].points)
      out << "<circle cx=\"" << f2(px(x)) << "\" cy=\"" << f2(py(y))
          << "\" r=\"3\" fill=\"" << color << "\"/>\n";
    const double ly = mt + 18.0 * static_cast<double>(s);
    out << "<line x1=\"" << f2(width - mr + 10) << "\" y1=\"" << f2(ly)
        << "\" x2=\"" << f2(width - mr + 30) << "\" y2=\"" << f2(ly)
        << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    out << "<text x=\"" << f2(width - mr + 36) << "\" y=\"" << f2(ly + 4)
        << "\" font-size=\"12\" font-family=\"sans-serif\">" << series[s].label
        << "</text>\n";
  }
  out << "</svg>\n";
}

}  // namespace

void HearingProfile::validate() const {
  require_input(!id.empty(), "hearing profile needs an id");
  audiogram.validate();
  cnd.validate();
}

double pta(const Audiogram& audiogram) {
  audiogram.validate();
  double acc = 0.0;
  for (double f : {500.0, 1000.0, 2000.0, 4000.0})
    acc += audiogram.threshold_at(f);
  return acc / 4.0;
}

double cnd_effect(double nsim_no_cnd, double nsim_cnd) {
  require_input(nsim_no_cnd > 0.0,
                "cnd_effect: baseline similarity must be positive");
  return (nsim_no_cnd - nsim_cnd) / nsim_no_cnd;
}

Audiogram sloping_loss_audiogram() {
  Audiogram a;
  a.points = {{125.0, 0.0},  {250.0, 0.0},  {500.0, 10.0}, {1000.0, 20.0},
              {2000.0, 23.0}, {4000.0, 45.0}, {8000.0, 75.0}};
  return a;
}

std::vector<HearingProfile> default_cnd_profiles() {
  const Audiogram base = sloping_loss_audiogram();
  std::vector<HearingProfile> out;
  const auto add = [&](const std::string& id, int ls, int ms, int hs,
                       const std::string& desc) {
    out.push_back({id, base, CNDProfile{ls, ms, hs}, desc});
  };
  add("no_cnd", 5, 5, 12, "sloping loss, full fiber complement");
  add("ls_ms_loss_20", 4, 4, 12, "sloping loss, 20% LS/MS fiber loss");
  add("ls_ms_loss_40", 3, 3, 12, "sloping loss, 40% LS/MS fiber loss");
  add("ls_ms_loss_60", 2, 2, 12, "sloping loss, 60% LS/MS fiber loss");
  add("ls_ms_loss_80", 1, 1, 12, "sloping loss, 80% LS/MS fiber loss");
  add("ls_ms_loss_100", 0, 0, 12, "sloping loss, 100% LS/MS fiber loss");
  add("ls_ms_loss_100_hs_20", 0, 0, 10,
      "sloping loss, 100% LS/MS and 20% HS fiber loss");
  return out;
}

std::vector<HearingProfile> load_profiles_json(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  require_input(in.good(), "cannot open profiles file: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw InputError("profiles file is not valid JSON: " + path.string() +
                     ": " + e.what());
  }
  std::vector<HearingProfile> out;
  try {
    for (const auto& p : j.at("profiles")) {
      HearingProfile hp;
      hp.id = p.at("id").get<std::string>();
      for (const auto& pt : p.at("audiogram"))
        hp.audiogram.points.emplace_back(pt.at(0).get<double>(),
                                         pt.at(1).get<double>());
      const auto& cnd = p.at("cnd");
      hp.cnd = CNDProfile{cnd.at(0).get<int>(), cnd.at(1).get<int>(),
                          cnd.at(2).get<int>()};
      hp.description = p.value("description", "");
      hp.validate();
      out.push_back(std::move(hp));
    }
  } catch (const nlohmann::json::exception& e) {
    throw InputError("malformed profiles file " + path.string() + ": " +
                     e.what());
  }
  require_input(!out.empty(), "profiles file lists no profiles: " + path.string());
  return out;
}

std::map<std::string, double> load_scores_csv(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  require_input(in.good(), "cannot open scores file: " + path.string());
  std::string line;
  require_input(static_cast<bool>(std::getline(in, line)),
                "scores file is empty: " + path.string());
  std::map<std::string, double> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    require_input(comma != std::string::npos,
                  "malformed scores row: " + line);
    const std::string id = line.substr(0, comma);
    double score = 0.0;
    try {
      score = std::stod(line.substr(comma + 1));
    } catch (const std::exception&) {
      throw InputError("malformed score value in row: " + line);
    }
    require_input(score >= 0.0 && score <= 1.0,
                  "score out of [0,1] for profile " + id);
    require_input(out.emplace(id, score).second,
                  "duplicate profile in scores file: " + id);
  }
  return out;
}

HearingProfile reference_profile() {
  return {"reference", Audiogram::flat(0.0), CNDProfile::baseline(),
          "normal cochlea: flat 0 dB HL, full fiber complement"};
}

NeurogramSet compute_neurograms(const Waveform& calibrated,
                                const HearingProfile& profile,
                                const RunConfig& cfg,
                                const NeurogramMeta& meta) {
  profile.validate();
  PeripheryConfig pcfg = cfg.periphery;
  pcfg.seed = cfg.seed;
  const FiberBank bank =
      simulate_fiber_bank(calibrated, profile.audiogram, profile.cnd, pcfg);

  NeurogramMeta m = meta;
  m.profile_id = profile.id;
  m.seed = cfg.seed;

  NeurogramSet set;
  for (FiberType f : kFiberClasses) {
    set.mr[static_cast<std::size_t>(f)] =
        build_neurogram(bank.of(f), NeurogramKind::MR, cfg.neurogram, m);
    set.ft[static_cast<std::size_t>(f)] =
        build_neurogram(bank.of(f), NeurogramKind::FT, cfg.neurogram, m);
  }
  const auto sum = bank.summed();
  set.mr[static_cast<std::size_t>(FiberType::Sum)] =
      build_neurogram(sum, NeurogramKind::MR, cfg.neurogram, m);
  set.ft[static_cast<std::size_t>(FiberType::Sum)] =
      build_neurogram(sum, NeurogramKind::FT, cfg.neurogram, m);
  return set;
}

std::vector<svr::FeatureRow> study1_features(
    const CorpusManifest& corpus, const std::vector<HearingProfile>& profiles,
    const RunConfig& cfg, const std::map<std::string, double>* scores) {
  corpus.validate();
  cfg.validate();
  require_input(!profiles.empty(), "study needs at least one profile");
  for (const auto& p : profiles) {
    p.validate();
    require_input(p.cnd.n_ls == CNDProfile::baseline().n_ls &&
                      p.cnd.n_ms == CNDProfile::baseline().n_ms &&
                      p.cnd.n_hs == CNDProfile::baseline().n_hs,
                  "study-1 profiles must carry the full fiber complement "
                  "(profile " + p.id + " does not)");
  }
  if (corpus.entries.size() != 10)
    std::fprintf(stderr,
                 "warning: study-1 corpus has %zu items (10 expected)\n",
                 corpus.entries.size());

  const double rate = cfg.periphery.internal_rate_hz;
  std::optional<SpectralShape> noise_shape;
  if (cfg.study.study1_use_noise)
    noise_shape = corpus_spectral_shape(corpus, rate);

  WordLoader loader(corpus, rate);
  const std::size_t n_words = corpus.entries.size();
  const std::size_t n_profiles = profiles.size();
  // mr/ft sums indexed [word][profile].
  std::vector<std::vector<double>> mr_vals(n_words,
                                           std::vector<double>(n_profiles)),
      ft_vals(n_words, std::vector<double>(n_profiles));

  parallel_for(n_words, cfg.jobs, [&](std::size_t wi) {
    const auto& entry = corpus.entries[wi];
    try {
      StimulusCondition cond;
      cond.level_db_spl = cfg.study.study1_level_db_spl;
      Waveform stim = apply_condition(loader.get(wi), cond);
      if (noise_shape) {
        const Waveform noise =
            shaped_noise(*noise_shape, stim.duration_s() + 1e-3, rate,
                         derive_seed(cfg.seed, fnv1a64("study1-noise"),
                                     fnv1a64(entry.word_id)));
        stim = mix_at_snr(stim, noise, cfg.study.study1_snr_db);
      }
      NeurogramMeta meta;
      meta.stimulus_id = entry.word_id;
      meta.level_db_spl = cond.level_db_spl;
      meta.condition = "clean";
      const NeurogramSet ref =
          compute_neurograms(stim, reference_profile(), cfg, meta);
      for (std::size_t pi = 0; pi < n_profiles; ++pi) {
        const NeurogramSet deg =
            compute_neurograms(stim, profiles[pi], cfg, meta);
        mr_vals[wi][pi] = nsim(ref.of(NeurogramKind::MR, FiberType::Sum),
                               deg.of(NeurogramKind::MR, FiberType::Sum),
                               cfg.similarity)
                              .nsim;
        ft_vals[wi][pi] = nsim(ref.of(NeurogramKind::FT, FiberType::Sum),
                               deg.of(NeurogramKind::FT, FiberType::Sum),
                               cfg.similarity)
                              .nsim;
      }
    } catch (const InputError& e) {
      throw InputError("study-1 word " + entry.word_id + ": " + e.what());
    }
  });

  std::vector<svr::FeatureRow> rows;
  rows.reserve(n_profiles);
  for (std::size_t pi = 0; pi < n_profiles; ++pi) {
    svr::FeatureRow row;
    row.profile_id = profiles[pi].id;
    double mr = 0.0, ft = 0.0;
    for (std::size_t wi = 0; wi < n_words; ++wi) {
      mr += mr_vals[wi][pi];
      ft += ft_vals[wi][pi];
    }
    row.mr_nsim = mr / static_cast<double>(n_words);
    row.ft_nsim = ft / static_cast<double>(n_words);
    row.pta_db = pta(profiles[pi].audiogram);
    row.score = std::numeric_limits<double>::quiet_NaN();
    if (scores) {
      const auto it = scores->find(row.profile_id);
      if (it != scores->end()) row.score = it->second;
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::filesystem::path resolve_cache_dir(
    const std::optional<std::filesystem::path>& override_dir,
    const std::filesystem::path& default_dir) {
  if (override_dir) return *override_dir;
  if (const char* env = std::getenv("NEURACOUSTIC_CACHE_DIR"); env && *env)
    return env;
  return default_dir;
}

Study2Result study2_sweep(
    const CorpusManifest& corpus, const std::vector<HearingProfile>& profiles,
    const RunConfig& cfg,
    const std::optional<std::filesystem::path>& cache_dir) {
  corpus.validate();
  cfg.validate();
  require_input(!profiles.empty(), "study needs at least one profile");
  const CNDProfile base = CNDProfile::baseline();
  std::ptrdiff_t baseline_idx = -1;
  for (std::size_t pi = 0; pi < profiles.size(); ++pi) {
    profiles[pi].validate();
    if (profiles[pi].cnd.n_ls == base.n_ls &&
        profiles[pi].cnd.n_ms == base.n_ms &&
        profiles[pi].cnd.n_hs == base.n_hs && baseline_idx < 0)
      baseline_idx = static_cast<std::ptrdiff_t>(pi);
  }
  require_input(baseline_idx >= 0,
                "study-2 profiles must include the no-degeneration row");

  const double rate = cfg.periphery.internal_rate_hz;
  std::optional<SpectralShape> noise_shape;
  if (cfg.study.study2_use_noise)
    noise_shape = corpus_spectral_shape(corpus, rate);

  const CellCache cache(cache_dir);
  const nlohmann::json config_json = cell_config_json(cfg);

  // Stimulus groups: one job per (word, level, condition); each group scores
  // all profiles against a shared reference simulation.
  struct Group {
    std::size_t word, level, condition;
  };
  std::vector<Group> groups;
  const auto& levels = cfg.study.levels_db_spl;
  const auto& conditions = cfg.study.conditions;
  for (std::size_t wi = 0; wi < corpus.entries.size(); ++wi)
    for (std::size_t li = 0; li < levels.size(); ++li)
      for (std::size_t ci = 0; ci < conditions.size(); ++ci)
        groups.push_back({wi, li, ci});

  // value[group][profile][fiber][kind]
  using CellValues = std::array<std::array<double, 2>, 3>;
  std::vector<std::vector<CellValues>> values(
      groups.size(), std::vector<CellValues>(profiles.size()));

  std::vector<std::uint64_t> wav_hashes(corpus.entries.size());
  for (std::size_t wi = 0; wi < corpus.entries.size(); ++wi)
    wav_hashes[wi] = fnv1a64_file(corpus.entries[wi].path);

  WordLoader loader(corpus, rate);
  parallel_for(groups.size(), cfg.jobs, [&](std::size_t gi) {
    const Group& g = groups[gi];
    const auto& entry = corpus.entries[g.word];
    const double level = levels[g.level];
    const std::string& condition = conditions[g.condition];
    const auto describe = [&](const std::string& profile_id) {
      return "study2 cell (word=" + entry.word_id + ", profile=" + profile_id +
             ", level=" + fmt_double(level) + ", condition=" + condition + ")";
    };

    // Cache probe first: a fully cached group skips the periphery entirely.
    std::vector<std::size_t> missing;
    std::vector<std::string> keys(profiles.size());
    std::vector<nlohmann::json> contexts(profiles.size());
    for (std::size_t pi = 0; pi < profiles.size(); ++pi) {
      keys[pi] = cell_key(wav_hashes[g.word], profiles[pi], level, condition,
                          config_json, cfg.seed, &contexts[pi]);
      if (const auto hit = cache.lookup(keys[pi])) {
        values[gi][pi] = *hit;
      } else {
        missing.push_back(pi);
      }
    }
    if (missing.empty()) return;

    try {
      const StimulusCondition cond = condition_from_name(condition, level, cfg);
      Waveform stim = apply_condition(loader.get(g.word), cond);
      if (noise_shape) {
        const Waveform noise =
            shaped_noise(*noise_shape, stim.duration_s() + 1e-3, rate,
                         derive_seed(cfg.seed, fnv1a64("study2-noise"),
                                     fnv1a64(entry.word_id)));
        stim = mix_at_snr(stim, noise, cfg.study.study2_snr_db);
      }
      NeurogramMeta meta;
      meta.stimulus_id = entry.word_id;
      meta.level_db_spl = level;
      meta.condition = condition;
      const NeurogramSet ref =
          compute_neurograms(stim, reference_profile(), cfg, meta);
      for (std::size_t pi : missing) {
        const NeurogramSet deg =
            compute_neurograms(stim, profiles[pi], cfg, meta);
        CellValues v{};
        for (std::size_t f = 0; f < 3; ++f) {
          const FiberType fiber = kFiberClasses[f];
          v[f][0] = nsim(ref.of(NeurogramKind::MR, fiber),
                         deg.of(NeurogramKind::MR, fiber), cfg.similarity)
                        .nsim;
          v[f][1] = nsim(ref.of(NeurogramKind::FT, fiber),
                         deg.of(NeurogramKind::FT, fiber), cfg.similarity)
                        .nsim;
        }
        values[gi][pi] = v;
        cache.store(keys[pi], v, contexts[pi]);
      }
    } catch (const InputError& e) {
      throw InputError(describe(missing.empty() ? "?" : profiles[missing.front()].id) +
                       ": " + e.what());
    }
  });

  Study2Result result;
  for (const auto& e : corpus.entries) result.word_order.push_back(e.word_id);
  for (const auto& p : profiles) result.profile_order.push_back(p.id);
  result.level_order = levels;
  result.condition_order = conditions;

  // Records in canonical order: condition, profile, level, word, fiber, kind.
  const auto group_index = [&](std::size_t wi, std::size_t li, std::size_t ci) {
    return (wi * levels.size() + li) * conditions.size() + ci;
  };
  for (std::size_t ci = 0; ci < conditions.size(); ++ci)
    for (std::size_t pi = 0; pi < profiles.size(); ++pi)
      for (std::size_t li = 0; li < levels.size(); ++li)
        for (std::size_t wi = 0; wi < corpus.entries.size(); ++wi)
          for (std::size_t f = 0; f < 3; ++f)
            for (std::size_t k = 0; k < 2; ++k) {
              StudyRecord r;
              r.word_id = corpus.entries[wi].word_id;
              r.profile_id = profiles[pi].id;
              r.level_db_spl = levels[li];
              r.condition = conditions[ci];
              r.fiber = kFiberClasses[f];
              r.kind = k == 0 ? NeurogramKind::MR : NeurogramKind::FT;
              r.nsim = values[group_index(wi, li, ci)][pi][f][k];
              result.records.push_back(std::move(r));
            }

  // Word-averaged per-fiber similarities -> overall mean -> effect vs the
  // no-degeneration row, per (condition, profile, level, kind).
  const auto overall = [&](std::size_t pi, std::size_t li, std::size_t ci,
                           std::size_t k) {
    std::array<double, 3> fiber_mean{};
    for (std::size_t f = 0; f < 3; ++f) {
      double acc = 0.0;
      for (std::size_t wi = 0; wi < corpus.entries.size(); ++wi)
        acc += values[group_index(wi, li, ci)][pi][f][k];
      fiber_mean[f] = acc / static_cast<double>(corpus.entries.size());
    }
    return overall_nsim(fiber_mean[0], fiber_mean[1], fiber_mean[2]);
  };
  for (std::size_t ci = 0; ci < conditions.size(); ++ci)
    for (std::size_t pi = 0; pi < profiles.size(); ++pi)
      for (std::size_t li = 0; li < levels.size(); ++li)
        for (std::size_t k = 0; k < 2; ++k) {
          const double base_nsim =
              overall(static_cast<std::size_t>(baseline_idx), li, ci, k);
          CNDEffectPoint pt;
          pt.profile_id = profiles[pi].id;
          pt.level_db_spl = levels[li];
          pt.condition = conditions[ci];
          pt.kind = k == 0 ? NeurogramKind::MR : NeurogramKind::FT;
          pt.effect = cnd_effect(base_nsim, overall(pi, li, ci, k));
          result.effects.push_back(std::move(pt));
        }
  return result;
}

void emit_report(const Study2Result& result,
                 const std::filesystem::path& out_dir) {
  require_input(!result.records.empty(), "no records to report");
  std::filesystem::create_directories(out_dir);

  {
    std::ofstream out(out_dir / "study2_records.csv");
    require_input(out.good(), "cannot write study2_records.csv");
    out << "word_id,profile_id,level_db,condition,fiber,kind,nsim\n";
    for (const auto& r : result.records) {
      out << r.word_id << "," << r.profile_id << "," << fmt_double(r.level_db_spl)
          << "," << r.condition << "," << fiber_name(r.fiber) << ","
          << kind_name(r.kind) << "," << fmt_double(r.nsim) << "\n";
    }
  }
  {
    std::ofstream out(out_dir / "cnd_effect.csv");
    require_input(out.good(), "cannot write cnd_effect.csv");
    out << "profile_id,level_db,condition,kind,cnd_effect\n";
    for (const auto& e : result.effects) {
      out << e.profile_id << "," << fmt_double(e.level_db_spl) << ","
          << e.condition << "," << kind_name(e.kind) << ","
          << fmt_double(e.effect) << "\n";
    }
  }

  for (const auto& condition : result.condition_order) {
    std::vector<SvgSeries> series;
    for (const auto& profile : result.profile_order) {
      SvgSeries s;
      s.label = profile;
      for (double level : result.level_order) {
        for (const auto& e : result.effects) {
          if (e.condition == condition && e.profile_id == profile &&
              e.level_db_spl == level && e.kind == NeurogramKind::MR)
            s.points.emplace_back(level, e.effect);
        }
      }
      series.push_back(std::move(s));
    }
    write_svg_line_chart(out_dir / ("cnd_effect_" + condition + ".svg"),
                         "Mean CND effect (MR), " + condition,
                         "level (dB SPL)", "CND effect", series);
  }
}

}  // namespace neuracoustic::studies
