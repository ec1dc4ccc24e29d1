#include "neuracoustic/similarity.hpp"

#include <algorithm>
#include <cmath>

#include "neuracoustic/errors.hpp"

namespace neuracoustic {
namespace {

void check_pair(const Neurogram& r, const Neurogram& d) {
  r.validate();
  d.validate();
  require_input(r.n_cf == d.n_cf && r.n_time == d.n_time,
                "neurogram shape mismatch");
  require_input(r.n_cf >= 3 && r.n_time >= 3,
                "neurogram too small for 3x3 window");
}

}  // namespace

void WindowKernel::validate() const {
  double sum = 0.0;
  for (double v : w) sum += v;
  require_input(std::abs(sum - 1.0) < 1e-12, "window weights must sum to 1");
  for (int i = 0; i < 9; ++i)
    require_input(w[4] >= w[static_cast<std::size_t>(i)],
                  "window center weight must be maximal");
}

WindowKernel gaussian_window() {
  constexpr double radius = 0.5;
  WindowKernel k{};
  double sum = 0.0;
  for (int df = -1; df <= 1; ++df) {
    for (int dt = -1; dt <= 1; ++dt) {
      const double d2 = static_cast<double>(df * df + dt * dt);
      const double v = std::exp(-d2 / (2.0 * radius * radius));
      k.w[static_cast<std::size_t>((df + 1) * 3 + (dt + 1))] = v;
      sum += v;
    }
  }
  for (double& v : k.w) v /= sum;
  return k;
}

std::string constants_rule_name(ConstantsRule r) {
  return r == ConstantsRule::Paper ? "paper" : "standard";
}

ConstantsRule constants_rule_from_name(const std::string& s) {
  if (s == "paper") return ConstantsRule::Paper;
  if (s == "standard") return ConstantsRule::Standard;
  throw InputError("unknown constants rule: " + s);
}

std::string l_mode_name(LMode m) {
  switch (m) {
    case LMode::ReferenceMax: return "reference_max";
    case LMode::PairMax: return "pair_max";
    case LMode::Fixed: return "fixed";
  }
  throw InputError("unknown intensity-range mode");
}

LMode l_mode_from_name(const std::string& s) {
  if (s == "reference_max") return LMode::ReferenceMax;
  if (s == "pair_max") return LMode::PairMax;
  if (s == "fixed") return LMode::Fixed;
  throw InputError("unknown intensity-range mode: " + s);
}

Constants bind_constants(double intensity_range, ConstantsRule rule) {
  require_input(intensity_range > 0.0, "intensity range must be positive");
  Constants c{};
  const double c2 = (0.03 * intensity_range) * (0.03 * intensity_range);
  c.c1 = rule == ConstantsRule::Paper
             ? 0.01 * intensity_range
             : (0.01 * intensity_range) * (0.01 * intensity_range);
  c.c2 = c2;
  c.c3 = c2 / 2.0;
  return c;
}

double bind_intensity_range(const Neurogram& r, const Neurogram& d,
                            const SimilarityConfig& config) {
  switch (config.l_mode) {
    case LMode::ReferenceMax:
      return intensity_range(r);
    case LMode::PairMax:
      return std::max(intensity_range(r),
                      *std::max_element(d.values.begin(), d.values.end()));
    case LMode::Fixed:
      require_input(config.l_fixed > 0.0, "fixed intensity range must be positive");
      return config.l_fixed;
  }
  throw InputError("unknown intensity-range mode");
}

LocalStats local_stats(const Neurogram& r, const Neurogram& d,
                       const WindowKernel& kernel, std::size_t f,
                       std::size_t t) {
  check_pair(r, d);
  require_input(f >= 1 && f + 1 < r.n_cf && t >= 1 && t + 1 < r.n_time,
                "window must lie fully inside the neurogram");

  double mu_r = 0.0, mu_d = 0.0;
  for (int df = -1; df <= 1; ++df) {
    for (int dt = -1; dt <= 1; ++dt) {
      const double w = kernel.at(df, dt);
      mu_r += w * r.at(f + static_cast<std::size_t>(df + 1) - 1,
                       t + static_cast<std::size_t>(dt + 1) - 1);
      mu_d += w * d.at(f + static_cast<std::size_t>(df + 1) - 1,
                       t + static_cast<std::size_t>(dt + 1) - 1);
    }
  }
  double var_r = 0.0, var_d = 0.0, cov = 0.0;
  for (int df = -1; df <= 1; ++df) {
    for (int dt = -1; dt <= 1; ++dt) {
      const double w = kernel.at(df, dt);
      const double xr = r.at(f + static_cast<std::size_t>(df + 1) - 1,
                             t + static_cast<std::size_t>(dt + 1) - 1) - mu_r;
      const double xd = d.at(f + static_cast<std::size_t>(df + 1) - 1,
                             t + static_cast<std::size_t>(dt + 1) - 1) - mu_d;
      var_r += w * xr * xr;
      var_d += w * xd * xd;
      cov += w * xr * xd;
    }
  }
  return {mu_r, mu_d, std::sqrt(std::max(0.0, var_r)),
          std::sqrt(std::max(0.0, var_d)), cov};
}

namespace {

// Shared window sweep: calls fn(stats) for every interior position in
// row-major order.
template <typename Fn>
WindowGrid sweep_windows(const Neurogram& r, const Neurogram& d,
                         const WindowKernel& kernel, Fn&& fn) {
  WindowGrid g;
  g.rows = r.n_cf - 2;
  g.cols = r.n_time - 2;
  g.v.resize(g.rows * g.cols);
  for (std::size_t f = 1; f + 1 < r.n_cf; ++f) {
    for (std::size_t t = 1; t + 1 < r.n_time; ++t) {
      // Inline the 3x3 weighted statistics; this loop dominates scoring.
      double mu_r = 0.0, mu_d = 0.0;
      for (int df = -1; df <= 1; ++df) {
        const std::size_t fr = f + static_cast<std::size_t>(df + 1) - 1;
        const double* rr = r.values.data() + fr * r.n_time + (t - 1);
        const double* dd = d.values.data() + fr * d.n_time + (t - 1);
        for (int dt = 0; dt < 3; ++dt) {
          const double w = kernel.w[static_cast<std::size_t>((df + 1) * 3 + dt)];
          mu_r += w * rr[dt];
          mu_d += w * dd[dt];
        }
      }
      double var_r = 0.0, var_d = 0.0, cov = 0.0;
      for (int df = -1; df <= 1; ++df) {
        const std::size_t fr = f + static_cast<std::size_t>(df + 1) - 1;
        const double* rr = r.values.data() + fr * r.n_time + (t - 1);
        const double* dd = d.values.data() + fr * d.n_time + (t - 1);
        for (int dt = 0; dt < 3; ++dt) {
          const double w = kernel.w[static_cast<std::size_t>((df + 1) * 3 + dt)];
          const double xr = rr[dt] - mu_r;
          const double xd = dd[dt] - mu_d;
          var_r += w * xr * xr;
          var_d += w * xd * xd;
          cov += w * xr * xd;
        }
      }
      const LocalStats stats{mu_r, mu_d, std::sqrt(std::max(0.0, var_r)),
                             std::sqrt(std::max(0.0, var_d)), cov};
      g.v[(f - 1) * g.cols + (t - 1)] = fn(stats);
    }
  }
  return g;
}

double grid_mean(const WindowGrid& g) {
  long double acc = 0.0L;
  for (double v : g.v) acc += v;
  return static_cast<double>(acc / static_cast<long double>(g.v.size()));
}

}  // namespace

SsiResult ssi(const Neurogram& r, const Neurogram& d,
              const SimilarityConfig& config) {
  check_pair(r, d);
  config.window.validate();
  const double L = bind_intensity_range(r, d, config);
  const Constants c = bind_constants(L, config.constants_rule);

  SsiResult res;
  res.l_used = L;
  res.map = sweep_windows(r, d, config.window, [&](const LocalStats& s) {
    const double lum = (2.0 * s.mu_r * s.mu_d + c.c1) /
                       (s.mu_r * s.mu_r + s.mu_d * s.mu_d + c.c1);
    const double con = (2.0 * s.sigma_r * s.sigma_d + c.c2) /
                       (s.sigma_r * s.sigma_r + s.sigma_d * s.sigma_d + c.c2);
    const double str = (s.cov_rd + c.c3) / (s.sigma_r * s.sigma_d + c.c3);
    return std::pow(lum, config.alpha) * std::pow(con, config.beta) *
           std::pow(str, config.gamma);
  });
  res.mean = grid_mean(res.map);
  return res;
}

WindowGrid nsi_map(const Neurogram& r, const Neurogram& d,
                   const SimilarityConfig& config) {
  check_pair(r, d);
  config.window.validate();
  const double L = bind_intensity_range(r, d, config);
  const Constants c = bind_constants(L, config.constants_rule);

  return sweep_windows(r, d, config.window, [&](const LocalStats& s) {
    const double lum = (2.0 * s.mu_r * s.mu_d + c.c1) /
                       (s.mu_r * s.mu_r + s.mu_d * s.mu_d + c.c1);
    const double str = (s.cov_rd + c.c3) / (s.sigma_r * s.sigma_d + c.c3);
    return lum * str;
  });
}

SimilarityResult nsim(const Neurogram& r, const Neurogram& d,
                      const SimilarityConfig& config) {
  SimilarityResult res;
  res.l_used = bind_intensity_range(r, d, config);
  res.nsi = nsi_map(r, d, config);
  res.n_windows = res.nsi.v.size();
  res.nsim = grid_mean(res.nsi);
  return res;
}

double overall_nsim(double ls, double ms, double hs) {
  return (ls + ms + hs) / 3.0;
}

}  // namespace neuracoustic
