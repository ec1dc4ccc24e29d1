#include "neuracoustic/neurogram.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>

#include <json.hpp>

#include "neuracoustic/errors.hpp"

namespace neuracoustic {
namespace {

std::vector<double> hamming_unit_dc(int len) {
  std::vector<double> w(static_cast<std::size_t>(len));
  double sum = 0.0;
  for (int i = 0; i < len; ++i) {
    w[static_cast<std::size_t>(i)] =
        0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                               static_cast<double>(len - 1));
    sum += w[static_cast<std::size_t>(i)];
  }
  for (double& v : w) v /= sum;
  return w;
}

// Same-length circular convolution with a unit-DC-gain kernel: constant rows
// stay constant and total spike mass is conserved exactly, so MR and FT
// neurograms built from one PSTH carry equal mass.
std::vector<double> smooth_row(std::span<const double> row,
                               std::span<const double> kernel) {
  const auto n = static_cast<std::ptrdiff_t>(row.size());
  const auto k = static_cast<std::ptrdiff_t>(kernel.size());
  const std::ptrdiff_t center = (k - 1) / 2;
  std::vector<double> out(row.size(), 0.0);
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::ptrdiff_t j = 0; j < k; ++j) {
      std::ptrdiff_t src = (i + j - center) % n;
      if (src < 0) src += n;
      acc += kernel[static_cast<std::size_t>(j)] *
             row[static_cast<std::size_t>(src)];
    }
    out[static_cast<std::size_t>(i)] = acc;
  }
  return out;
}

void put_f64le(std::string& out, double v) {
  std::uint64_t u;
  std::memcpy(&u, &v, sizeof(u));
  for (int i = 0; i < 8; ++i)
    out.push_back(static_cast<char>((u >> (8 * i)) & 0xff));
}

double get_f64le(const unsigned char* p) {
  std::uint64_t u = 0;
  for (int i = 0; i < 8; ++i)
    u |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  double v;
  std::memcpy(&v, &u, sizeof(v));
  return v;
}

}  // namespace

std::string kind_name(NeurogramKind k) {
  return k == NeurogramKind::MR ? "MR" : "FT";
}

NeurogramKind kind_from_name(const std::string& name) {
  if (name == "MR") return NeurogramKind::MR;
  if (name == "FT") return NeurogramKind::FT;
  throw InputError("unknown neurogram kind: " + name);
}

void Neurogram::validate() const {
  require_input(n_cf >= 1 && n_time >= 1, "neurogram has empty dimensions");
  require_input(values.size() == n_cf * n_time,
                "neurogram value count does not match dimensions");
  require_input(cf_axis_hz.size() == n_cf,
                "neurogram CF axis does not match row count");
  require_input(bin_width_s > 0.0, "neurogram bin width must be positive");
  for (double v : values)
    require_input(v >= 0.0 && std::isfinite(v),
                  "neurogram values must be finite and non-negative");
}

void NeurogramParams::validate() const {
  require_input(ft_bin_s > 0.0 && mr_bin_s > 0.0, "bin widths must be positive");
  require_input(ft_window_bins >= 2 && mr_window_bins >= 2,
                "smoothing windows need at least two bins");
}

RebinResult rebin(const PSTH& psth, double target_bin_s) {
  require_input(psth.bin_width_s > 0.0, "source PSTH bin width must be positive");
  const double ratio = target_bin_s / psth.bin_width_s;
  const auto group = static_cast<std::size_t>(std::llround(ratio));
  require_input(group >= 1 &&
                    std::abs(ratio - static_cast<double>(group)) < 1e-9 * ratio + 1e-12,
                "target bin is not an integer multiple of the source bin");

  RebinResult r;
  r.psth.bin_width_s = target_bin_s;
  r.psth.cf_hz = psth.cf_hz;
  r.psth.fiber = psth.fiber;
  if (group == 1) {
    r.psth.counts = psth.counts;
    return r;
  }
  const std::size_t n_out = psth.counts.size() / group;
  r.truncated = (psth.counts.size() % group) != 0;
  r.psth.counts.resize(n_out);
  for (std::size_t b = 0; b < n_out; ++b) {
    std::uint32_t acc = 0;
    for (std::size_t i = 0; i < group; ++i) acc += psth.counts[b * group + i];
    r.psth.counts[b] = acc;
  }
  return r;
}

Neurogram build_neurogram(const std::vector<PSTH>& psths_over_cf,
                          NeurogramKind kind, const NeurogramParams& params,
                          const NeurogramMeta& meta) {
  params.validate();
  require_input(!psths_over_cf.empty(), "no PSTHs to assemble");
  const double src_bin = psths_over_cf.front().bin_width_s;
  const std::size_t src_len = psths_over_cf.front().counts.size();
  const FiberType fiber = psths_over_cf.front().fiber;
  for (const auto& p : psths_over_cf) {
    require_input(std::abs(p.bin_width_s - src_bin) < 1e-15,
                  "mismatched PSTH bin widths");
    require_input(p.counts.size() == src_len, "mismatched PSTH shapes");
    require_input(p.fiber == fiber, "mismatched PSTH fiber types");
  }

  std::vector<const PSTH*> ordered;
  ordered.reserve(psths_over_cf.size());
  for (const auto& p : psths_over_cf) ordered.push_back(&p);
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const PSTH* a, const PSTH* b) { return a->cf_hz < b->cf_hz; });

  const double target_bin =
      kind == NeurogramKind::FT ? params.ft_bin_s : params.mr_bin_s;
  const int window =
      kind == NeurogramKind::FT ? params.ft_window_bins : params.mr_window_bins;
  const auto kernel = hamming_unit_dc(window);

  Neurogram n;
  n.kind = kind;
  n.fiber = fiber;
  n.meta = meta;
  n.bin_width_s = target_bin;
  n.n_cf = ordered.size();
  for (const PSTH* p : ordered) {
    const RebinResult rb = rebin(*p, target_bin);
    std::vector<double> row(rb.psth.counts.begin(), rb.psth.counts.end());
    row = smooth_row(row, kernel);
    if (n.n_time == 0) {
      n.n_time = row.size();
      require_input(n.n_time >= 1, "PSTH too short for the requested bin width");
      n.values.reserve(n.n_cf * n.n_time);
    }
    n.values.insert(n.values.end(), row.begin(), row.end());
    n.cf_axis_hz.push_back(p->cf_hz);
  }
  n.validate();
  return n;
}

double intensity_range(const Neurogram& reference) {
  reference.validate();
  const double mx = *std::max_element(reference.values.begin(),
                                      reference.values.end());
  require_input(mx > 0.0, "all-zero reference neurogram has no intensity range");
  return mx;
}

void write_neurogram(const Neurogram& n, const std::filesystem::path& path) {
  n.validate();
  nlohmann::json header;
  header["fmt"] = "neurogram/1";
  header["kind"] = kind_name(n.kind);
  header["fiber"] = fiber_name(n.fiber);
  header["n_cf"] = n.n_cf;
  header["n_time"] = n.n_time;
  header["bin_width_s"] = n.bin_width_s;
  header["cf_axis_hz"] = n.cf_axis_hz;
  header["meta"] = {{"stimulus_id", n.meta.stimulus_id},
                    {"level_db_spl", n.meta.level_db_spl},
                    {"condition", n.meta.condition},
                    {"profile_id", n.meta.profile_id},
                    {"seed", n.meta.seed}};

  std::string payload;
  payload.reserve(n.values.size() * 8);
  for (double v : n.values) put_f64le(payload, v);

  std::ofstream out(path, std::ios::binary);
  require_input(out.good(), "cannot write neurogram file: " + path.string());
  out << header.dump() << "\n";
  out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
}

Neurogram read_neurogram(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require_input(in.good(), "cannot open neurogram file: " + path.string());
  std::string line;
  require_input(static_cast<bool>(std::getline(in, line)),
                "neurogram file has no header line: " + path.string());
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw InputError("neurogram header is not valid JSON: " + path.string() +
                     ": " + e.what());
  }
  require_input(header.value("fmt", "") == "neurogram/1",
                "unknown neurogram format version in " + path.string());

  Neurogram n;
  try {
    n.kind = kind_from_name(header.at("kind").get<std::string>());
    n.fiber = fiber_from_name(header.at("fiber").get<std::string>());
    n.n_cf = header.at("n_cf").get<std::size_t>();
    n.n_time = header.at("n_time").get<std::size_t>();
    n.bin_width_s = header.at("bin_width_s").get<double>();
    n.cf_axis_hz = header.at("cf_axis_hz").get<std::vector<double>>();
    const auto& meta = header.at("meta");
    n.meta.stimulus_id = meta.value("stimulus_id", "");
    n.meta.level_db_spl = meta.value("level_db_spl", 0.0);
    n.meta.condition = meta.value("condition", "");
    n.meta.profile_id = meta.value("profile_id", "");
    n.meta.seed = meta.value("seed", std::uint64_t{0});
  } catch (const nlohmann::json::exception& e) {
    throw InputError("malformed neurogram header in " + path.string() + ": " +
                     e.what());
  }
  require_input(n.cf_axis_hz.size() == n.n_cf,
                "header CF axis does not match dimensions: " + path.string());

  const std::size_t n_vals = n.n_cf * n.n_time;
  std::vector<unsigned char> payload(n_vals * 8);
  in.read(reinterpret_cast<char*>(payload.data()),
          static_cast<std::streamsize>(payload.size()));
  require_input(static_cast<std::size_t>(in.gcount()) == payload.size(),
                "payload shorter than header promises: " + path.string());
  n.values.resize(n_vals);
  for (std::size_t i = 0; i < n_vals; ++i)
    n.values[i] = get_f64le(payload.data() + i * 8);
  n.validate();
  return n;
}

void write_neurogram_csv(const Neurogram& n, const std::filesystem::path& path) {
  n.validate();
  std::ofstream out(path);
  require_input(out.good(), "cannot write CSV file: " + path.string());
  char buf[64];
  out << "cf_hz";
  for (std::size_t t = 0; t < n.n_time; ++t) {
    std::snprintf(buf, sizeof(buf), "%.9g",
                  (static_cast<double>(t) + 0.5) * n.bin_width_s);
    out << "," << buf;
  }
  out << "\n";
  for (std::size_t f = 0; f < n.n_cf; ++f) {
    std::snprintf(buf, sizeof(buf), "%.9g", n.cf_axis_hz[f]);
    out << buf;
    for (std::size_t t = 0; t < n.n_time; ++t) {
      std::snprintf(buf, sizeof(buf), "%.9g", n.at(f, t));
      out << "," << buf;
    }
    out << "\n";
  }
}

}  // namespace neuracoustic
