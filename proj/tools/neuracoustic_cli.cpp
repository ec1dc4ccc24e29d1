// Command-line front end: binds config, corpus and profiles into
// reproducible batch runs. Exit codes: 0 ok, 1 internal failure, 2 bad input.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "neuracoustic/config.hpp"
#include "neuracoustic/errors.hpp"
#include "neuracoustic/neurogram.hpp"
#include "neuracoustic/rng.hpp"
#include "neuracoustic/similarity.hpp"
#include "neuracoustic/studies.hpp"
#include "neuracoustic/stimulus.hpp"
#include "neuracoustic/svr.hpp"

namespace {

using namespace neuracoustic;

struct CommonOpts {
  std::string config_path;
  std::string out_dir;
  int jobs = 0;       // 0 = take from config
  long long seed = -1;  // -1 = take from config
};

RunConfig resolve_config(const CommonOpts& opts) {
  RunConfig cfg = opts.config_path.empty() ? default_run_config()
                                           : load_run_config(opts.config_path);
  if (!opts.out_dir.empty()) cfg.out_dir = opts.out_dir;
  if (opts.jobs > 0) cfg.jobs = opts.jobs;
  if (opts.seed >= 0) {
    cfg.seed = static_cast<std::uint64_t>(opts.seed);
    cfg.periphery.seed = cfg.seed;
  }
  cfg.validate();
  return cfg;
}

void add_common(CLI::App* cmd, CommonOpts& opts, bool with_out = true) {
  cmd->add_option("--config", opts.config_path, "TOML or JSON config file");
  if (with_out) cmd->add_option("--out", opts.out_dir, "output directory");
  cmd->add_option("--jobs", opts.jobs, "worker count (does not affect results)");
  cmd->add_option("--seed", opts.seed, "override the master seed");
}

void write_run_manifest(const RunConfig& cfg, const std::string& command,
                        const std::vector<std::pair<std::string, std::string>>& inputs,
                        const std::filesystem::path& out_dir) {
  nlohmann::json j;
  j["command"] = command;
  j["config"] = config_to_json(cfg);
  j["inputs"] = nlohmann::json::object();
  for (const auto& [name, path] : inputs) {
    char hash[17];
    std::snprintf(hash, sizeof(hash), "%016llx",
                  static_cast<unsigned long long>(fnv1a64_file(path)));
    j["inputs"][name] = {{"path", path}, {"fnv1a64", hash}};
  }
  std::ofstream out(out_dir / "run_manifest.json");
  require_input(out.good(), "cannot write run manifest");
  out << j.dump(2) << "\n";
}

studies::HearingProfile select_profile(const std::string& spec_str,
                                       const std::string& profile_file) {
  if (!profile_file.empty()) {
    const auto profiles = studies::load_profiles_json(profile_file);
    if (spec_str.empty()) return profiles.front();
    for (const auto& p : profiles)
      if (p.id == spec_str) return p;
    throw InputError("profile id '" + spec_str + "' not found in " +
                     profile_file);
  }
  if (spec_str.empty() || spec_str == "flat0")
    return studies::reference_profile();
  if (spec_str == "sloping_loss")
    return {"sloping_loss", studies::sloping_loss_audiogram(),
            CNDProfile::baseline(), "sloping loss, full fiber complement"};
  throw InputError("unknown built-in profile '" + spec_str +
                   "' (use flat0, sloping_loss, or --profiles FILE)");
}

int cmd_neurogram(const std::string& wav_path, const std::string& profile_id,
                  const std::string& profile_file, bool with_csv,
                  const CommonOpts& opts) {
  const RunConfig cfg = resolve_config(opts);
  const auto profile = select_profile(profile_id, profile_file);
  const std::filesystem::path out_dir = cfg.out_dir;
  std::filesystem::create_directories(out_dir);

  Waveform w = resample(load_wav(wav_path), cfg.periphery.internal_rate_hz);
  StimulusCondition cond;
  cond.level_db_spl = cfg.study.study1_level_db_spl;
  const Waveform stim = apply_condition(w, cond);

  NeurogramMeta meta;
  meta.stimulus_id = std::filesystem::path(wav_path).stem().string();
  meta.level_db_spl = cond.level_db_spl;
  meta.condition = "clean";
  const auto set = studies::compute_neurograms(stim, profile, cfg, meta);

  const std::string stem = meta.stimulus_id + "_" + profile.id;
  for (FiberType f :
       {FiberType::LS, FiberType::MS, FiberType::HS, FiberType::Sum}) {
    for (NeurogramKind k : {NeurogramKind::MR, NeurogramKind::FT}) {
      const auto base = stem + "_" + fiber_name(f) + "_" + kind_name(k);
      write_neurogram(set.of(k, f), out_dir / (base + ".ng"));
      if (with_csv)
        write_neurogram_csv(set.of(k, f), out_dir / (base + ".csv"));
    }
  }
  write_run_manifest(cfg, "neurogram", {{"wav", wav_path}}, out_dir);
  std::cout << "wrote 8 neurogram files to " << out_dir.string() << "\n";
  return 0;
}

int cmd_nsim(const std::string& ref_path, const std::string& deg_path,
             const std::string& map_csv, const CommonOpts& opts) {
  const RunConfig cfg = resolve_config(opts);
  const Neurogram ref = read_neurogram(ref_path);
  const Neurogram deg = read_neurogram(deg_path);
  const SimilarityResult res = nsim(ref, deg, cfg.similarity);
  std::printf("nsim=%.6f\n", res.nsim);
  if (!map_csv.empty()) {
    std::ofstream out(map_csv);
    require_input(out.good(), "cannot write NSI map CSV: " + map_csv);
    char buf[64];
    for (std::size_t i = 0; i < res.nsi.rows; ++i) {
      for (std::size_t j = 0; j < res.nsi.cols; ++j) {
        std::snprintf(buf, sizeof(buf), "%.10g", res.nsi.at(i, j));
        out << (j ? "," : "") << buf;
      }
      out << "\n";
    }
  }
  return 0;
}

std::vector<svr::SVRHyperparams> study1_grid() {
  std::vector<svr::SVRHyperparams> grid;
  for (double c : {0.25, 1.0, 2.5, 10.0})
    for (double eps : {0.05, 0.075, 0.1})
      for (svr::Kernel k : {svr::Kernel::Rbf, svr::Kernel::Linear})
        for (svr::GammaMode g : {svr::GammaMode::Auto, svr::GammaMode::Scale}) {
          if (k == svr::Kernel::Linear && g == svr::GammaMode::Scale)
            continue;  // gamma is inert for the linear kernel
          svr::SVRHyperparams hp;
          hp.c = c;
          hp.epsilon = eps;
          hp.kernel = k;
          hp.gamma_mode = g;
          grid.push_back(hp);
        }
  return grid;
}

nlohmann::json cv_report_json(const svr::CVReport& report) {
  nlohmann::json folds = nlohmann::json::array();
  for (const auto& f : report.folds) {
    nlohmann::json fj;
    fj["mse"] = f.mse;
    if (std::isfinite(f.r2)) fj["r2"] = f.r2;
    folds.push_back(fj);
  }
  return {{"folds", folds},
          {"pooled_mse", report.pooled_mse},
          {"pooled_r2", report.pooled_r2},
          {"seed", report.seed}};
}

int cmd_study1(const std::string& corpus_path, const std::string& profiles_path,
               const std::string& scores_path, const CommonOpts& opts) {
  const RunConfig cfg = resolve_config(opts);
  const auto corpus = load_corpus_manifest(corpus_path);
  const auto profiles = studies::load_profiles_json(profiles_path);
  const std::filesystem::path out_dir = cfg.out_dir;
  std::filesystem::create_directories(out_dir);

  std::optional<std::map<std::string, double>> scores;
  if (!scores_path.empty()) scores = studies::load_scores_csv(scores_path);

  const auto rows = studies::study1_features(
      corpus, profiles, cfg, scores ? &*scores : nullptr);
  svr::write_feature_csv(rows, out_dir / "study1_features.csv");

  std::vector<std::pair<std::string, std::string>> inputs = {
      {"corpus", corpus_path}, {"profiles", profiles_path}};
  if (!scores_path.empty()) inputs.emplace_back("scores", scores_path);
  write_run_manifest(cfg, "study1", inputs, out_dir);

  if (!scores) {
    std::cout << "features written; no scores file given, regression skipped\n";
    return 0;
  }

  std::vector<svr::FeatureRow> scored;
  for (const auto& r : rows)
    if (std::isfinite(r.score)) scored.push_back(r);
  require_input(scored.size() >= 6,
                "need at least 6 scored profiles for threefold CV");

  using FS = std::vector<svr::Feature>;
  const std::vector<std::pair<std::string, FS>> feature_sets = {
      {"mr", {svr::Feature::MrNsim}},
      {"ft", {svr::Feature::FtNsim}},
      {"mr_ft", {svr::Feature::MrNsim, svr::Feature::FtNsim}},
      {"mr_ft_pta",
       {svr::Feature::MrNsim, svr::Feature::FtNsim, svr::Feature::PtaDb}}};

  // In product mode a multi-feature combination collapses to one literal
  // product feature, carried in the mr_nsim slot.
  const bool product_mode = cfg.study.feature_mode == "product";
  const auto rows_for = [&](const FS& features) {
    if (!product_mode || features.size() < 2) return scored;
    std::vector<svr::FeatureRow> derived = scored;
    for (auto& r : derived) {
      double prod = 1.0;
      for (const double v : svr::extract_features(r, features)) prod *= v;
      r.mr_nsim = prod;
    }
    return derived;
  };

  nlohmann::json report;
  report["feature_mode"] = cfg.study.feature_mode;
  const auto grid = study1_grid();
  for (const auto& [name, features] : feature_sets) {
    const std::vector<svr::FeatureRow> set_rows = rows_for(features);
    const FS set_features = (product_mode && features.size() >= 2)
                                ? FS{svr::Feature::MrNsim}
                                : features;
    const auto [best_hp, best_report] =
        svr::grid_search(set_rows, set_features, grid, 3, cfg.seed);
    report[name] = {{"hyperparams",
                     {{"c", best_hp.c},
                      {"epsilon", best_hp.epsilon},
                      {"kernel", svr::kernel_name(best_hp.kernel)},
                      {"gamma", svr::gamma_mode_name(best_hp.gamma_mode)}}},
                    {"cv", cv_report_json(best_report)}};
    if (name == "mr_ft_pta") {
      const auto model =
          svr::train_svr(set_rows, set_features, best_hp, cfg.seed);
      svr::write_model_json(model, out_dir / "study1_model.json");
    }
    std::printf("%-10s pooled_mse=%.6f pooled_r2=%.4f\n", name.c_str(),
                best_report.pooled_mse, best_report.pooled_r2);
  }
  std::ofstream out(out_dir / "study1_cv_report.json");
  require_input(out.good(), "cannot write CV report");
  out << report.dump(2) << "\n";
  return 0;
}

int cmd_study2(const std::string& corpus_path, const std::string& profiles_path,
               bool no_cache, const std::string& cache_dir_flag,
               const CommonOpts& opts) {
  const RunConfig cfg = resolve_config(opts);
  const auto corpus = load_corpus_manifest(corpus_path);
  const auto profiles = profiles_path.empty()
                            ? studies::default_cnd_profiles()
                            : studies::load_profiles_json(profiles_path);
  const std::filesystem::path out_dir = cfg.out_dir;
  std::filesystem::create_directories(out_dir);

  std::optional<std::filesystem::path> cache;
  if (!no_cache) {
    cache = studies::resolve_cache_dir(
        cache_dir_flag.empty()
            ? std::nullopt
            : std::optional<std::filesystem::path>(cache_dir_flag),
        out_dir / "cache");
  }

  const auto result = studies::study2_sweep(corpus, profiles, cfg, cache);
  studies::emit_report(result, out_dir);

  std::vector<std::pair<std::string, std::string>> inputs = {
      {"corpus", corpus_path}};
  if (!profiles_path.empty()) inputs.emplace_back("profiles", profiles_path);
  write_run_manifest(cfg, "study2", inputs, out_dir);
  std::cout << "study2: " << result.records.size() << " records written to "
            << out_dir.string() << "\n";
  return 0;
}

// Brute-force product-form structural similarity, kept deliberately separate
// from the library implementation so the two routes cross-check each other.
double direct_ssim_mean(const Neurogram& r, const Neurogram& d,
                        const WindowKernel& k, double L) {
  const double c1 = (0.01 * L) * (0.01 * L);
  const double c2 = (0.03 * L) * (0.03 * L);
  long double acc = 0.0L;
  std::size_t count = 0;
  for (std::size_t f = 1; f + 1 < r.n_cf; ++f) {
    for (std::size_t t = 1; t + 1 < r.n_time; ++t) {
      double mr = 0, md = 0;
      for (int df = -1; df <= 1; ++df)
        for (int dt = -1; dt <= 1; ++dt) {
          const double w = k.at(df, dt);
          mr += w * r.at(f + static_cast<std::size_t>(df + 1) - 1,
                         t + static_cast<std::size_t>(dt + 1) - 1);
          md += w * d.at(f + static_cast<std::size_t>(df + 1) - 1,
                         t + static_cast<std::size_t>(dt + 1) - 1);
        }
      double vr = 0, vd = 0, cov = 0;
      for (int df = -1; df <= 1; ++df)
        for (int dt = -1; dt <= 1; ++dt) {
          const double w = k.at(df, dt);
          const double xr = r.at(f + static_cast<std::size_t>(df + 1) - 1,
                                 t + static_cast<std::size_t>(dt + 1) - 1) - mr;
          const double xd = d.at(f + static_cast<std::size_t>(df + 1) - 1,
                                 t + static_cast<std::size_t>(dt + 1) - 1) - md;
          vr += w * xr * xr;
          vd += w * xd * xd;
          cov += w * xr * xd;
        }
      acc += ((2 * mr * md + c1) * (2 * cov + c2)) /
             ((mr * mr + md * md + c1) * (vr + vd + c2));
      ++count;
    }
  }
  return static_cast<double>(acc / static_cast<long double>(count));
}

int cmd_ssim_check(int pairs, std::uint64_t seed) {
  double worst = 0.0;
  for (int p = 0; p < pairs; ++p) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(p)));
    const std::size_t rows = 3 + rng.next_u64() % 30;
    const std::size_t cols = 3 + rng.next_u64() % 62;
    const auto make = [&]() {
      Neurogram n;
      n.n_cf = rows;
      n.n_time = cols;
      n.bin_width_s = 1e-3;
      n.values.resize(rows * cols);
      for (double& v : n.values) v = rng.uniform01() * 8.0;
      for (std::size_t i = 0; i < rows; ++i)
        n.cf_axis_hz.push_back(100.0 * static_cast<double>(i + 1));
      return n;
    };
    const Neurogram r = make();
    const Neurogram d = make();
    SimilarityConfig cfg;
    cfg.constants_rule = ConstantsRule::Standard;
    const SsiResult mine = ssi(r, d, cfg);
    const double direct = direct_ssim_mean(r, d, cfg.window, mine.l_used);
    worst = std::max(worst, std::abs(mine.mean - direct));
  }
  std::printf("ssim-check: %d pairs, max |ssi - direct| = %.3e\n", pairs, worst);
  if (worst > 1e-12) {
    std::fprintf(stderr, "ssim-check FAILED (tolerance 1e-12)\n");
    return 1;
  }
  return 0;
}

int run(int argc, char** argv) {
  CLI::App app{"auditory-nerve neurogram similarity toolkit"};
  app.require_subcommand(1);

  // neurogram
  CommonOpts ng_opts;
  std::string ng_wav, ng_profile, ng_profile_file;
  bool ng_csv = false;
  auto* ng = app.add_subcommand(
      "neurogram", "simulate one WAV through a profile and write neurograms");
  ng->add_option("--wav", ng_wav, "input WAV file")->required();
  ng->add_option("--profile", ng_profile, "built-in profile name or id");
  ng->add_option("--profiles", ng_profile_file, "profiles JSON file");
  ng->add_flag("--csv", ng_csv, "also export CSV alongside each neurogram");
  add_common(ng, ng_opts);

  // nsim
  CommonOpts ns_opts;
  std::string ns_ref, ns_deg, ns_map;
  auto* ns = app.add_subcommand("nsim", "score a neurogram pair");
  ns->add_option("ref", ns_ref, "reference neurogram file")->required();
  ns->add_option("deg", ns_deg, "degraded neurogram file")->required();
  ns->add_option("--map-csv", ns_map, "write the per-window NSI map");
  add_common(ns, ns_opts, /*with_out=*/false);

  // study1
  CommonOpts s1_opts;
  std::string s1_corpus, s1_profiles, s1_scores;
  auto* s1 = app.add_subcommand("study1", "per-profile features + regression");
  s1->add_option("--corpus", s1_corpus, "corpus manifest JSON")->required();
  s1->add_option("--profiles", s1_profiles, "profiles JSON file")->required();
  s1->add_option("--scores", s1_scores, "profile_id,score CSV");
  add_common(s1, s1_opts);

  // study2
  CommonOpts s2_opts;
  std::string s2_corpus, s2_profiles, s2_cache_dir;
  bool s2_no_cache = false;
  auto* s2 = app.add_subcommand("study2", "degeneration sweep and report");
  s2->add_option("--corpus", s2_corpus, "corpus manifest JSON")->required();
  s2->add_option("--profiles", s2_profiles,
                 "profiles JSON (default: built-in degeneration ladder)");
  s2->add_flag("--no-cache", s2_no_cache, "disable the completed-cell cache");
  s2->add_option("--cache-dir", s2_cache_dir,
                 "cache directory (default: <out>/cache or "
                 "$NEURACOUSTIC_CACHE_DIR)");
  add_common(s2, s2_opts);

  // ssim-check
  int sc_pairs = 100;
  long long sc_seed = 7001;
  auto* sc = app.add_subcommand(
      "ssim-check", "cross-validate the similarity core against a direct "
                    "formula evaluation");
  sc->add_option("--pairs", sc_pairs, "number of random pairs");
  sc->add_option("--seed", sc_seed, "generator seed");

  // defaults
  std::string def_format = "toml";
  auto* def = app.add_subcommand("defaults", "print the default config");
  def->add_option("--format", def_format, "toml or json")
      ->check(CLI::IsMember({"toml", "json"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (ng->parsed())
    return cmd_neurogram(ng_wav, ng_profile, ng_profile_file, ng_csv, ng_opts);
  if (ns->parsed()) return cmd_nsim(ns_ref, ns_deg, ns_map, ns_opts);
  if (s1->parsed()) return cmd_study1(s1_corpus, s1_profiles, s1_scores, s1_opts);
  if (s2->parsed())
    return cmd_study2(s2_corpus, s2_profiles, s2_no_cache, s2_cache_dir, s2_opts);
  if (sc->parsed())
    return cmd_ssim_check(sc_pairs, static_cast<std::uint64_t>(sc_seed));
  if (def->parsed()) {
    const RunConfig cfg = default_run_config();
    if (def_format == "json")
      std::cout << config_to_json(cfg).dump(2) << "\n";
    else
      std::cout << config_to_toml(cfg);
    return 0;
  }
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const neuracoustic::InputError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "internal error: %s\n", e.what());
    return 1;
  }
}
