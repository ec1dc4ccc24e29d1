#include "neuracoustic/config.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include "neuracoustic/errors.hpp"

namespace neuracoustic {
namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

// Strips a trailing comment that is not inside a string literal.
std::string strip_comment(const std::string& s) {
  bool in_str = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '"') in_str = !in_str;
    if (s[i] == '#' && !in_str) return s.substr(0, i);
  }
  return s;
}

nlohmann::json parse_toml_value(const std::string& raw, int line_no) {
  const std::string v = trim(raw);
  require_input(!v.empty(), "missing value on config line " + std::to_string(line_no));
  if (v.front() == '"') {
    require_input(v.size() >= 2 && v.back() == '"',
                  "unterminated string on config line " + std::to_string(line_no));
    return v.substr(1, v.size() - 2);
  }
  if (v == "true") return true;
  if (v == "false") return false;
  if (v.front() == '[') {
    require_input(v.back() == ']',
                  "unterminated array on config line " + std::to_string(line_no));
    nlohmann::json arr = nlohmann::json::array();
    std::string body = v.substr(1, v.size() - 2);
    std::stringstream ss(body);
    std::string item;
    while (std::getline(ss, item, ',')) {
      if (trim(item).empty()) continue;
      arr.push_back(parse_toml_value(item, line_no));
    }
    return arr;
  }
  try {
    std::size_t pos = 0;
    if (v.find_first_of(".eE") == std::string::npos &&
        v.find("inf") == std::string::npos && v.find("nan") == std::string::npos) {
      const long long i = std::stoll(v, &pos);
      require_input(pos == v.size(), "bad number on config line " + std::to_string(line_no));
      return i;
    }
    const double d = std::stod(v, &pos);
    require_input(pos == v.size(), "bad number on config line " + std::to_string(line_no));
    return d;
  } catch (const std::exception&) {
    throw InputError("cannot parse config value '" + v + "' on line " +
                     std::to_string(line_no));
  }
}

nlohmann::json* descend(nlohmann::json& root, const std::string& dotted) {
  nlohmann::json* cur = &root;
  std::stringstream ss(dotted);
  std::string part;
  while (std::getline(ss, part, '.')) {
    part = trim(part);
    require_input(!part.empty(), "empty section name component in config");
    cur = &(*cur)[part];
  }
  return cur;
}

template <typename T>
void bind(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void bind_fiber(const nlohmann::json& j, FiberParams& p) {
  bind(j, "spont_rate_sp_s", p.spont_rate_sp_s);
  bind(j, "threshold_db", p.threshold_db);
  bind(j, "saturation_rate_sp_s", p.saturation_rate_sp_s);
  bind(j, "dynamic_range_db", p.dynamic_range_db);
}

nlohmann::json fiber_to_json(const FiberParams& p) {
  return {{"spont_rate_sp_s", p.spont_rate_sp_s},
          {"threshold_db", p.threshold_db},
          {"saturation_rate_sp_s", p.saturation_rate_sp_s},
          {"dynamic_range_db", p.dynamic_range_db}};
}

}  // namespace

void StudyParams::validate() const {
  require_input(!levels_db_spl.empty(), "study needs at least one level");
  for (double l : levels_db_spl)
    require_input(std::isfinite(l), "study level must be finite");
  require_input(!conditions.empty(), "study needs at least one condition");
  for (const auto& c : conditions)
    require_input(c == "clean" || c == "comp65" || c == "comp65_reverb",
                  "unknown condition name: " + c);
  require_input(compression_factor > 0.0 && compression_factor <= 1.0,
                "compression factor must be in (0, 1]");
  require_input(reverb_rt60_s > 0.0 && reverb_ir_s >= reverb_rt60_s / 2.0,
                "reverb lengths are inconsistent");
  require_input(feature_mode == "set" || feature_mode == "product",
                "feature_mode must be 'set' or 'product'");
}

void RunConfig::validate() const {
  periphery.validate();
  neurogram.validate();
  study.validate();
  require_input(jobs >= 1, "jobs must be at least 1");
  require_input(std::abs(neurogram.ft_bin_s - periphery.ft_bin_s) < 1e-15,
                "neurogram FT bin must match the periphery PSTH bin");
}

RunConfig default_run_config() { return RunConfig{}; }

nlohmann::json toml_subset_to_json(const std::string& text) {
  nlohmann::json root = nlohmann::json::object();
  nlohmann::json* section = &root;
  std::stringstream ss(text);
  std::string line;
  int line_no = 0;
  while (std::getline(ss, line)) {
    ++line_no;
    line = trim(strip_comment(line));
    if (line.empty()) continue;
    if (line.front() == '[') {
      require_input(line.back() == ']',
                    "bad section header on config line " + std::to_string(line_no));
      section = descend(root, line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    require_input(eq != std::string::npos,
                  "expected key = value on config line " + std::to_string(line_no));
    const std::string key = trim(line.substr(0, eq));
    require_input(!key.empty(), "empty key on config line " + std::to_string(line_no));
    (*section)[key] = parse_toml_value(line.substr(eq + 1), line_no);
  }
  return root;
}

namespace {

RunConfig config_from_json(const nlohmann::json& j) {
  RunConfig cfg;
  require_input(j.contains("seed"),
                "config file must carry an explicit seed (no wall-clock seeding)");
  cfg.seed = j.at("seed").get<std::uint64_t>();
  bind(j, "jobs", cfg.jobs);
  bind(j, "out_dir", cfg.out_dir);

  if (j.contains("periphery")) {
    const auto& p = j.at("periphery");
    bind(p, "n_cf", cfg.periphery.n_cf);
    bind(p, "cf_min_hz", cfg.periphery.cf_min_hz);
    bind(p, "cf_max_hz", cfg.periphery.cf_max_hz);
    bind(p, "internal_rate_hz", cfg.periphery.internal_rate_hz);
    bind(p, "n_reps", cfg.periphery.n_reps);
    bind(p, "ft_bin_s", cfg.periphery.ft_bin_s);
    bind(p, "max_ohc_db", cfg.periphery.max_ohc_db);
    bind(p, "broadening", cfg.periphery.broadening);
    bind(p, "phase_lock_cutoff_hz", cfg.periphery.phase_lock_cutoff_hz);
    bind(p, "drive_ref_pa", cfg.periphery.drive_ref_pa);
    if (p.contains("fibers")) {
      const auto& f = p.at("fibers");
      if (f.contains("ls")) bind_fiber(f.at("ls"), cfg.periphery.fibers.ls);
      if (f.contains("ms")) bind_fiber(f.at("ms"), cfg.periphery.fibers.ms);
      if (f.contains("hs")) bind_fiber(f.at("hs"), cfg.periphery.fibers.hs);
    }
  }
  cfg.periphery.seed = cfg.seed;

  if (j.contains("neurogram")) {
    const auto& n = j.at("neurogram");
    bind(n, "ft_bin_s", cfg.neurogram.ft_bin_s);
    bind(n, "mr_bin_s", cfg.neurogram.mr_bin_s);
    bind(n, "ft_window_bins", cfg.neurogram.ft_window_bins);
    bind(n, "mr_window_bins", cfg.neurogram.mr_window_bins);
  }
  // The periphery PSTH bin and the FT neurogram bin are one knob; whichever
  // section set it wins, with the neurogram section taking precedence.
  if (j.contains("neurogram") && j.at("neurogram").contains("ft_bin_s")) {
    cfg.periphery.ft_bin_s = cfg.neurogram.ft_bin_s;
  } else {
    cfg.neurogram.ft_bin_s = cfg.periphery.ft_bin_s;
  }

  if (j.contains("similarity")) {
    const auto& s = j.at("similarity");
    if (s.contains("constants_rule"))
      cfg.similarity.constants_rule =
          constants_rule_from_name(s.at("constants_rule").get<std::string>());
    if (s.contains("l_mode"))
      cfg.similarity.l_mode = l_mode_from_name(s.at("l_mode").get<std::string>());
    bind(s, "l_fixed", cfg.similarity.l_fixed);
    bind(s, "alpha", cfg.similarity.alpha);
    bind(s, "beta", cfg.similarity.beta);
    bind(s, "gamma", cfg.similarity.gamma);
  }

  if (j.contains("study")) {
    const auto& s = j.at("study");
    bind(s, "levels_db_spl", cfg.study.levels_db_spl);
    bind(s, "conditions", cfg.study.conditions);
    bind(s, "compression_factor", cfg.study.compression_factor);
    bind(s, "reverb_rt60_s", cfg.study.reverb_rt60_s);
    bind(s, "reverb_ir_s", cfg.study.reverb_ir_s);
    bind(s, "study1_level_db_spl", cfg.study.study1_level_db_spl);
    bind(s, "study1_use_noise", cfg.study.study1_use_noise);
    bind(s, "study1_snr_db", cfg.study.study1_snr_db);
    bind(s, "study2_use_noise", cfg.study.study2_use_noise);
    bind(s, "study2_snr_db", cfg.study.study2_snr_db);
    bind(s, "feature_mode", cfg.study.feature_mode);
  }

  cfg.validate();
  return cfg;
}

}  // namespace

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  require_input(in.good(), "cannot open config file: " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();

  const auto first = text.find_first_not_of(" \t\r\n");
  const bool looks_json =
      path.extension() == ".json" ||
      (first != std::string::npos && text[first] == '{');
  nlohmann::json j;
  if (looks_json) {
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
      throw InputError("config is not valid JSON: " + path.string() + ": " +
                       e.what());
    }
  } else {
    j = toml_subset_to_json(text);
  }
  try {
    return config_from_json(j);
  } catch (const nlohmann::json::exception& e) {
    throw InputError("malformed config " + path.string() + ": " + e.what());
  }
}

nlohmann::json config_to_json(const RunConfig& cfg) {
  nlohmann::json j;
  j["seed"] = cfg.seed;
  j["jobs"] = cfg.jobs;
  j["out_dir"] = cfg.out_dir;
  j["periphery"] = {
      {"n_cf", cfg.periphery.n_cf},
      {"cf_min_hz", cfg.periphery.cf_min_hz},
      {"cf_max_hz", cfg.periphery.cf_max_hz},
      {"internal_rate_hz", cfg.periphery.internal_rate_hz},
      {"n_reps", cfg.periphery.n_reps},
      {"ft_bin_s", cfg.periphery.ft_bin_s},
      {"max_ohc_db", cfg.periphery.max_ohc_db},
      {"broadening", cfg.periphery.broadening},
      {"phase_lock_cutoff_hz", cfg.periphery.phase_lock_cutoff_hz},
      {"drive_ref_pa", cfg.periphery.drive_ref_pa},
      {"fibers",
       {{"ls", fiber_to_json(cfg.periphery.fibers.ls)},
        {"ms", fiber_to_json(cfg.periphery.fibers.ms)},
        {"hs", fiber_to_json(cfg.periphery.fibers.hs)}}}};
  j["neurogram"] = {{"ft_bin_s", cfg.neurogram.ft_bin_s},
                    {"mr_bin_s", cfg.neurogram.mr_bin_s},
                    {"ft_window_bins", cfg.neurogram.ft_window_bins},
                    {"mr_window_bins", cfg.neurogram.mr_window_bins}};
  j["similarity"] = {{"constants_rule",
                      constants_rule_name(cfg.similarity.constants_rule)},
                     {"l_mode", l_mode_name(cfg.similarity.l_mode)},
                     {"l_fixed", cfg.similarity.l_fixed},
                     {"alpha", cfg.similarity.alpha},
                     {"beta", cfg.similarity.beta},
                     {"gamma", cfg.similarity.gamma}};
  j["study"] = {{"levels_db_spl", cfg.study.levels_db_spl},
                {"conditions", cfg.study.conditions},
                {"compression_factor", cfg.study.compression_factor},
                {"reverb_rt60_s", cfg.study.reverb_rt60_s},
                {"reverb_ir_s", cfg.study.reverb_ir_s},
                {"study1_level_db_spl", cfg.study.study1_level_db_spl},
                {"study1_use_noise", cfg.study.study1_use_noise},
                {"study1_snr_db", cfg.study.study1_snr_db},
                {"study2_use_noise", cfg.study.study2_use_noise},
                {"study2_snr_db", cfg.study.study2_snr_db},
                {"feature_mode", cfg.study.feature_mode}};
  return j;
}

namespace {

void toml_emit_value(std::ostream& out, const nlohmann::json& v) {
  if (v.is_string()) {
    out << '"' << v.get<std::string>() << '"';
  } else if (v.is_array()) {
    out << '[';
    bool first = true;
    for (const auto& e : v) {
      if (!first) out << ", ";
      toml_emit_value(out, e);
      first = false;
    }
    out << ']';
  } else {
    out << v.dump();
  }
}

void toml_emit_table(std::ostream& out, const std::string& prefix,
                     const nlohmann::json& obj) {
  // Scalars first, then sub-tables.
  bool any_scalar = false;
  for (const auto& item : obj.items()) {
    if (!item.value().is_object()) any_scalar = true;
  }
  if (any_scalar && !prefix.empty()) out << "[" << prefix << "]\n";
  for (const auto& [k, v] : obj.items()) {
    if (v.is_object()) continue;
    out << k << " = ";
    toml_emit_value(out, v);
    out << "\n";
  }
  for (const auto& [k, v] : obj.items()) {
    if (!v.is_object()) continue;
    out << "\n";
    toml_emit_table(out, prefix.empty() ? k : prefix + "." + k, v);
  }
}

}  // namespace

std::string config_to_toml(const RunConfig& cfg) {
  std::ostringstream out;
  toml_emit_table(out, "", config_to_json(cfg));
  return out.str();
}

}  // namespace neuracoustic
