#include "neuracoustic/svr.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "neuracoustic/errors.hpp"
#include "neuracoustic/rng.hpp"

namespace neuracoustic::svr {
namespace {

constexpr double kTau = 1e-12;
constexpr double kTol = 1e-3;
constexpr int kMaxIter = 100000;

double kernel_eval(Kernel k, double gamma, std::span<const double> a,
                   std::span<const double> b) {
  if (k == Kernel::Linear) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
  }
  double d2 = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    d2 += d * d;
  }
  return std::exp(-gamma * d2);
}

struct Standardizer {
  std::vector<double> mean, std;

  void fit(const std::vector<std::vector<double>>& x,
           const std::vector<Feature>& features) {
    const std::size_t n = x.size();
    const std::size_t m = x.front().size();
    mean.assign(m, 0.0);
    std.assign(m, 0.0);
    for (const auto& row : x)
      for (std::size_t j = 0; j < m; ++j) mean[j] += row[j];
    for (double& v : mean) v /= static_cast<double>(n);
    for (const auto& row : x)
      for (std::size_t j = 0; j < m; ++j) {
        const double d = row[j] - mean[j];
        std[j] += d * d;
      }
    for (std::size_t j = 0; j < m; ++j) {
      std[j] = std::sqrt(std[j] / static_cast<double>(n));
      require_input(std[j] > 0.0, "feature " + feature_name(features[j]) +
                                      " has zero variance");
    }
  }

  std::vector<double> apply(std::span<const double> row) const {
    std::vector<double> z(row.size());
    for (std::size_t j = 0; j < row.size(); ++j)
      z[j] = (row[j] - mean[j]) / std[j];
    return z;
  }
};

struct SmoSolution {
  std::vector<double> beta;  // alpha - alpha*, per row
  double bias = 0.0;
  double violation = 0.0;
  int iterations = 0;
};

// SMO on the 2l-variable dual: block [0,l) holds alpha (sign +1), block
// [l,2l) holds alpha* (sign -1). Pair selection is by maximal KKT violation.
SmoSolution solve_epsilon_svr(const std::vector<std::vector<double>>& gram,
                              std::span<const double> y, double c,
                              double epsilon) {
  const std::size_t l = y.size();
  const std::size_t n2 = 2 * l;
  std::vector<double> a(n2, 0.0);
  std::vector<signed char> sign(n2);
  std::vector<double> grad(n2);
  for (std::size_t i = 0; i < l; ++i) {
    sign[i] = +1;
    sign[i + l] = -1;
    grad[i] = epsilon - y[i];
    grad[i + l] = epsilon + y[i];
  }
  const auto kval = [&](std::size_t s, std::size_t t) {
    return gram[s % l][t % l];
  };
  const auto q = [&](std::size_t s, std::size_t t) {
    return static_cast<double>(sign[s] * sign[t]) * kval(s, t);
  };

  double violation = std::numeric_limits<double>::infinity();
  int iter = 0;
  for (; iter < kMaxIter; ++iter) {
    // Maximal violating pair over the feasible ascent/descent sets.
    double gmax = -std::numeric_limits<double>::infinity();
    double gmin = std::numeric_limits<double>::infinity();
    std::ptrdiff_t i = -1, j = -1;
    for (std::size_t t = 0; t < n2; ++t) {
      const double v = -static_cast<double>(sign[t]) * grad[t];
      const bool can_up = (sign[t] == +1) ? (a[t] < c) : (a[t] > 0.0);
      const bool can_down = (sign[t] == +1) ? (a[t] > 0.0) : (a[t] < c);
      if (can_up && v > gmax) {
        gmax = v;
        i = static_cast<std::ptrdiff_t>(t);
      }
      if (can_down && v < gmin) {
        gmin = v;
        j = static_cast<std::ptrdiff_t>(t);
      }
    }
    violation = gmax - gmin;
    if (i < 0 || j < 0 || violation < kTol) break;

    const auto ii = static_cast<std::size_t>(i);
    const auto jj = static_cast<std::size_t>(j);
    const double a_i_old = a[ii];
    const double a_j_old = a[jj];
    double quad = kval(ii, ii) + kval(jj, jj) - 2.0 * kval(ii, jj);
    if (quad <= 0.0) quad = kTau;

    if (sign[ii] != sign[jj]) {
      const double delta = (-grad[ii] - grad[jj]) / quad;
      const double diff = a[ii] - a[jj];
      a[ii] += delta;
      a[jj] += delta;
      if (diff > 0.0) {
        if (a[jj] < 0.0) { a[jj] = 0.0; a[ii] = diff; }
      } else {
        if (a[ii] < 0.0) { a[ii] = 0.0; a[jj] = -diff; }
      }
      if (diff > 0.0) {
        if (a[ii] > c) { a[ii] = c; a[jj] = c - diff; }
      } else {
        if (a[jj] > c) { a[jj] = c; a[ii] = c + diff; }
      }
    } else {
      const double delta = (grad[ii] - grad[jj]) / quad;
      const double sum = a[ii] + a[jj];
      a[ii] -= delta;
      a[jj] += delta;
      if (sum > c) {
        if (a[ii] > c) { a[ii] = c; a[jj] = sum - c; }
      } else {
        if (a[jj] < 0.0) { a[jj] = 0.0; a[ii] = sum; }
      }
      if (sum > c) {
        if (a[jj] > c) { a[jj] = c; a[ii] = sum - c; }
      } else {
        if (a[ii] < 0.0) { a[ii] = 0.0; a[jj] = sum; }
      }
    }

    const double d_i = a[ii] - a_i_old;
    const double d_j = a[jj] - a_j_old;
    if (d_i == 0.0 && d_j == 0.0) break;  // numerically stuck
    for (std::size_t t = 0; t < n2; ++t)
      grad[t] += q(t, ii) * d_i + q(t, jj) * d_j;
  }

  // Bias from the free variables' KKT equalities; falls back to the bound
  // interval midpoint when every variable is at a bound.
  double ub = std::numeric_limits<double>::infinity();
  double lb = -std::numeric_limits<double>::infinity();
  double sum_free = 0.0;
  int n_free = 0;
  for (std::size_t t = 0; t < n2; ++t) {
    const double yg = static_cast<double>(sign[t]) * grad[t];
    if (a[t] >= c) {
      if (sign[t] == -1) ub = std::min(ub, yg); else lb = std::max(lb, yg);
    } else if (a[t] <= 0.0) {
      if (sign[t] == +1) ub = std::min(ub, yg); else lb = std::max(lb, yg);
    } else {
      ++n_free;
      sum_free += yg;
    }
  }
  const double rho = n_free > 0 ? sum_free / static_cast<double>(n_free)
                                : (ub + lb) / 2.0;

  SmoSolution sol;
  sol.beta.resize(l);
  for (std::size_t i2 = 0; i2 < l; ++i2) sol.beta[i2] = a[i2] - a[i2 + l];
  sol.bias = -rho;
  sol.violation = violation;
  sol.iterations = iter;
  return sol;
}

double resolve_gamma(const SVRHyperparams& hp,
                     const std::vector<std::vector<double>>& z) {
  if (hp.kernel == Kernel::Linear) return 0.0;
  const auto m = static_cast<double>(z.front().size());
  switch (hp.gamma_mode) {
    case GammaMode::Auto:
      return 1.0 / m;
    case GammaMode::Fixed:
      return hp.gamma_value;
    case GammaMode::Scale: {
      // 1 / (n_features * var(X)) over all matrix entries.
      double mean = 0.0;
      std::size_t n = 0;
      for (const auto& row : z)
        for (double v : row) {
          mean += v;
          ++n;
        }
      mean /= static_cast<double>(n);
      double var = 0.0;
      for (const auto& row : z)
        for (double v : row) var += (v - mean) * (v - mean);
      var /= static_cast<double>(n);
      return var > 0.0 ? 1.0 / (m * var) : 1.0 / m;
    }
  }
  throw InputError("unknown gamma mode");
}

SVRModel fit_standardized(const std::vector<std::vector<double>>& raw,
                          std::span<const double> y,
                          const std::vector<Feature>& features,
                          const SVRHyperparams& hp) {
  Standardizer st;
  st.fit(raw, features);
  std::vector<std::vector<double>> z;
  z.reserve(raw.size());
  for (const auto& row : raw) z.push_back(st.apply(row));

  const double gamma = resolve_gamma(hp, z);
  const std::size_t l = z.size();
  std::vector<std::vector<double>> gram(l, std::vector<double>(l));
  for (std::size_t i = 0; i < l; ++i)
    for (std::size_t j = 0; j <= i; ++j)
      gram[i][j] = gram[j][i] = kernel_eval(hp.kernel, gamma, z[i], z[j]);

  const SmoSolution sol = solve_epsilon_svr(gram, y, hp.c, hp.epsilon);

  SVRModel model;
  model.hp = hp;
  model.gamma = gamma;
  model.features = features;
  model.feat_mean = st.mean;
  model.feat_std = st.std;
  model.bias = sol.bias;
  model.kkt_residual = sol.violation;
  model.iterations = sol.iterations;
  for (std::size_t i = 0; i < l; ++i) {
    if (sol.beta[i] != 0.0) {
      model.support_vectors.push_back(z[i]);
      model.dual_coefs.push_back(sol.beta[i]);
    }
  }
  return model;
}

}  // namespace

std::string kernel_name(Kernel k) {
  return k == Kernel::Rbf ? "rbf" : "linear";
}

Kernel kernel_from_name(const std::string& s) {
  if (s == "rbf") return Kernel::Rbf;
  if (s == "linear") return Kernel::Linear;
  throw InputError("unknown kernel: " + s);
}

std::string gamma_mode_name(GammaMode g) {
  switch (g) {
    case GammaMode::Auto: return "auto";
    case GammaMode::Scale: return "scale";
    case GammaMode::Fixed: return "fixed";
  }
  throw InputError("unknown gamma mode");
}

GammaMode gamma_mode_from_name(const std::string& s) {
  if (s == "auto") return GammaMode::Auto;
  if (s == "scale") return GammaMode::Scale;
  if (s == "fixed") return GammaMode::Fixed;
  throw InputError("unknown gamma mode: " + s);
}

std::string feature_name(Feature f) {
  switch (f) {
    case Feature::MrNsim: return "mr_nsim";
    case Feature::FtNsim: return "ft_nsim";
    case Feature::PtaDb: return "pta_db";
  }
  throw InputError("unknown feature");
}

Feature feature_from_name(const std::string& s) {
  if (s == "mr_nsim") return Feature::MrNsim;
  if (s == "ft_nsim") return Feature::FtNsim;
  if (s == "pta_db") return Feature::PtaDb;
  throw InputError("unknown feature: " + s);
}

void SVRHyperparams::validate() const {
  require_input(c > 0.0, "C must be positive");
  require_input(epsilon >= 0.0, "epsilon must be non-negative");
  if (gamma_mode == GammaMode::Fixed)
    require_input(gamma_value > 0.0, "fixed gamma must be positive");
}

std::vector<double> extract_features(const FeatureRow& row,
                                     const std::vector<Feature>& features) {
  std::vector<double> x;
  x.reserve(features.size());
  for (Feature f : features) {
    switch (f) {
      case Feature::MrNsim: x.push_back(row.mr_nsim); break;
      case Feature::FtNsim: x.push_back(row.ft_nsim); break;
      case Feature::PtaDb: x.push_back(row.pta_db); break;
    }
  }
  return x;
}

SVRModel train_svr(const std::vector<FeatureRow>& rows,
                   const std::vector<Feature>& features,
                   const SVRHyperparams& hp, std::uint64_t /*seed*/) {
  hp.validate();
  require_input(rows.size() >= 2, "need at least two rows to train");
  require_input(!features.empty(), "feature set is empty");
  std::vector<std::vector<double>> raw;
  std::vector<double> y;
  raw.reserve(rows.size());
  y.reserve(rows.size());
  for (const auto& r : rows) {
    raw.push_back(extract_features(r, features));
    require_input(std::isfinite(r.score), "row " + r.profile_id +
                                              " has no score to regress on");
    y.push_back(r.score);
  }
  return fit_standardized(raw, y, features, hp);
}

double predict(const SVRModel& model, std::span<const double> x) {
  require_input(x.size() == model.feat_mean.size(),
                "feature dimensionality does not match training");
  std::vector<double> z(x.size());
  for (std::size_t j = 0; j < x.size(); ++j)
    z[j] = (x[j] - model.feat_mean[j]) / model.feat_std[j];
  double acc = model.bias;
  for (std::size_t i = 0; i < model.support_vectors.size(); ++i)
    acc += model.dual_coefs[i] *
           kernel_eval(model.hp.kernel, model.gamma, model.support_vectors[i], z);
  return acc;
}

std::pair<double, double> metrics(std::span<const double> y_true,
                                  std::span<const double> y_pred) {
  require_input(y_true.size() == y_pred.size(), "metric input lengths differ");
  require_input(y_true.size() >= 2, "need at least two points for metrics");
  const auto n = static_cast<double>(y_true.size());
  double mean = 0.0;
  for (double v : y_true) mean += v;
  mean /= n;
  double ss_res = 0.0, ss_tot = 0.0;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    ss_res += (y_true[i] - y_pred[i]) * (y_true[i] - y_pred[i]);
    ss_tot += (y_true[i] - mean) * (y_true[i] - mean);
  }
  require_input(ss_tot > 0.0, "zero-variance truth: r^2 undefined");
  return {ss_res / n, 1.0 - ss_res / ss_tot};
}

CVReport kfold_cv(const std::vector<FeatureRow>& rows,
                  const std::vector<Feature>& features,
                  const SVRHyperparams& hp, int k, std::uint64_t seed) {
  hp.validate();
  require_input(k >= 2, "need at least two folds");
  require_input(rows.size() >= static_cast<std::size_t>(k),
                "k exceeds the number of rows");

  // Canonical sort by profile id, then a seeded Fisher-Yates shuffle, so
  // fold assignment is invariant to the caller's row ordering.
  std::vector<std::size_t> order(rows.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return rows[a].profile_id < rows[b].profile_id;
  });
  Rng rng(derive_seed(seed, fnv1a64("kfold-shuffle")));
  for (std::size_t i = order.size() - 1; i > 0; --i) {
    const auto j = static_cast<std::size_t>(rng.next_u64() % (i + 1));
    std::swap(order[i], order[j]);
  }

  const std::size_t n = rows.size();
  const std::size_t base = n / static_cast<std::size_t>(k);
  const std::size_t rem = n % static_cast<std::size_t>(k);

  CVReport report;
  report.seed = seed;
  std::vector<double> pooled_true(n), pooled_pred(n);
  std::size_t start = 0;
  for (int f = 0; f < k; ++f) {
    const std::size_t size = base + (static_cast<std::size_t>(f) < rem ? 1 : 0);
    std::vector<FeatureRow> train;
    std::vector<std::size_t> held;
    train.reserve(n - size);
    for (std::size_t i = 0; i < n; ++i) {
      if (i >= start && i < start + size)
        held.push_back(order[i]);
      else
        train.push_back(rows[order[i]]);
    }
    const SVRModel model = train_svr(train, features, hp, seed);
    double fold_mse = 0.0;
    double fold_mean = 0.0;
    for (std::size_t idx : held) fold_mean += rows[idx].score;
    fold_mean /= static_cast<double>(held.size());
    double fold_tot = 0.0;
    for (std::size_t idx : held) {
      const auto x = extract_features(rows[idx], features);
      const double p = predict(model, x);
      pooled_true[idx] = rows[idx].score;
      pooled_pred[idx] = p;
      fold_mse += (p - rows[idx].score) * (p - rows[idx].score);
      fold_tot += (rows[idx].score - fold_mean) * (rows[idx].score - fold_mean);
    }
    fold_mse /= static_cast<double>(held.size());
    CVReport::Fold fold;
    fold.mse = fold_mse;
    fold.r2 = fold_tot > 0.0
                  ? 1.0 - fold_mse * static_cast<double>(held.size()) / fold_tot
                  : std::numeric_limits<double>::quiet_NaN();
    report.folds.push_back(fold);
    start += size;
  }
  const auto [mse, r2] = metrics(pooled_true, pooled_pred);
  report.pooled_mse = mse;
  report.pooled_r2 = r2;
  return report;
}

std::pair<SVRHyperparams, CVReport> grid_search(
    const std::vector<FeatureRow>& rows, const std::vector<Feature>& features,
    const std::vector<SVRHyperparams>& grid, int k, std::uint64_t seed) {
  require_input(!grid.empty(), "hyperparameter grid is empty");
  std::size_t best = 0;
  CVReport best_report;
  bool have = false;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    CVReport report = kfold_cv(rows, features, grid[g], k, seed);
    const bool better =
        !have || report.pooled_mse < best_report.pooled_mse ||
        (report.pooled_mse == best_report.pooled_mse &&
         (grid[g].c < grid[best].c ||
          (grid[g].c == grid[best].c && grid[g].epsilon > grid[best].epsilon)));
    if (better) {
      best = g;
      best_report = std::move(report);
      have = true;
    }
  }
  return {grid[best], best_report};
}

std::vector<FeatureRow> read_feature_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  require_input(in.good(), "cannot open feature CSV: " + path.string());
  std::string line;
  require_input(static_cast<bool>(std::getline(in, line)),
                "feature CSV is empty: " + path.string());
  std::vector<FeatureRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field;
    FeatureRow r;
    require_input(static_cast<bool>(std::getline(ss, r.profile_id, ',')),
                  "malformed CSV row: " + line);
    const auto next = [&](double& out, bool required) {
      if (!std::getline(ss, field, ',') || field.empty()) {
        require_input(!required, "malformed CSV row: " + line);
        out = std::numeric_limits<double>::quiet_NaN();
        return;
      }
      out = std::stod(field);
    };
    next(r.mr_nsim, true);
    next(r.ft_nsim, true);
    next(r.pta_db, true);
    next(r.score, false);
    rows.push_back(std::move(r));
  }
  return rows;
}

void write_feature_csv(const std::vector<FeatureRow>& rows,
                       const std::filesystem::path& path) {
  std::ofstream out(path);
  require_input(out.good(), "cannot write feature CSV: " + path.string());
  out << "profile_id,mr_nsim,ft_nsim,pta_db,score\n";
  char buf[64];
  for (const auto& r : rows) {
    out << r.profile_id;
    for (double v : {r.mr_nsim, r.ft_nsim, r.pta_db}) {
      std::snprintf(buf, sizeof(buf), "%.10g", v);
      out << "," << buf;
    }
    if (std::isfinite(r.score)) {
      std::snprintf(buf, sizeof(buf), "%.10g", r.score);
      out << "," << buf;
    } else {
      out << ",";
    }
    out << "\n";
  }
}

void write_model_json(const SVRModel& model, const std::filesystem::path& path) {
  nlohmann::json j;
  j["fmt"] = "svr-model/1";
  j["kernel"] = kernel_name(model.hp.kernel);
  j["c"] = model.hp.c;
  j["epsilon"] = model.hp.epsilon;
  j["gamma_mode"] = gamma_mode_name(model.hp.gamma_mode);
  j["gamma"] = model.gamma;
  nlohmann::json feats = nlohmann::json::array();
  for (Feature f : model.features) feats.push_back(feature_name(f));
  j["features"] = feats;
  j["feat_mean"] = model.feat_mean;
  j["feat_std"] = model.feat_std;
  j["support_vectors"] = model.support_vectors;
  j["dual_coefs"] = model.dual_coefs;
  j["bias"] = model.bias;
  j["kkt_residual"] = model.kkt_residual;
  j["iterations"] = model.iterations;
  std::ofstream out(path);
  require_input(out.good(), "cannot write model file: " + path.string());
  out << j.dump(2) << "\n";
}

SVRModel read_model_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  require_input(in.good(), "cannot open model file: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw InputError("model file is not valid JSON: " + path.string() + ": " +
                     e.what());
  }
  require_input(j.value("fmt", "") == "svr-model/1",
                "unknown model format version in " + path.string());
  SVRModel m;
  try {
    m.hp.kernel = kernel_from_name(j.at("kernel").get<std::string>());
    m.hp.c = j.at("c").get<double>();
    m.hp.epsilon = j.at("epsilon").get<double>();
    m.hp.gamma_mode = gamma_mode_from_name(j.at("gamma_mode").get<std::string>());
    m.gamma = j.at("gamma").get<double>();
    for (const auto& f : j.at("features"))
      m.features.push_back(feature_from_name(f.get<std::string>()));
    m.feat_mean = j.at("feat_mean").get<std::vector<double>>();
    m.feat_std = j.at("feat_std").get<std::vector<double>>();
    m.support_vectors =
        j.at("support_vectors").get<std::vector<std::vector<double>>>();
    m.dual_coefs = j.at("dual_coefs").get<std::vector<double>>();
    m.bias = j.at("bias").get<double>();
    m.kkt_residual = j.value("kkt_residual", 0.0);
    m.iterations = j.value("iterations", 0);
  } catch (const nlohmann::json::exception& e) {
    throw InputError("malformed model file " + path.string() + ": " + e.what());
  }
  return m;
}

}  // namespace neuracoustic::svr
