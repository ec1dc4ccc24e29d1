#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace neuracoustic::svr {

// One observation: averaged neurogram similarities, pure-tone average and
// the measured task score for a hearing profile.
struct FeatureRow {
  std::string profile_id;
  double mr_nsim = 0.0;
  double ft_nsim = 0.0;
  double pta_db = 0.0;
  double score = 0.0;  // proportion correct, [0, 1]; NaN when not joined yet
};

enum class Kernel { Rbf, Linear };
enum class GammaMode { Auto, Scale, Fixed };
enum class Feature { MrNsim, FtNsim, PtaDb };

std::string kernel_name(Kernel k);
Kernel kernel_from_name(const std::string& s);
std::string gamma_mode_name(GammaMode g);
GammaMode gamma_mode_from_name(const std::string& s);
std::string feature_name(Feature f);
Feature feature_from_name(const std::string& s);

struct SVRHyperparams {
  double c = 1.0;
  double epsilon = 0.1;
  Kernel kernel = Kernel::Rbf;
  GammaMode gamma_mode = GammaMode::Auto;
  double gamma_value = 0.0;  // used when gamma_mode == Fixed
  void validate() const;
};

struct SVRModel {
  SVRHyperparams hp;
  double gamma = 0.0;  // resolved numeric value
  std::vector<Feature> features;
  std::vector<double> feat_mean;  // standardization, per feature
  std::vector<double> feat_std;
  std::vector<std::vector<double>> support_vectors;  // standardized space
  std::vector<double> dual_coefs;                    // alpha - alpha*
  double bias = 0.0;
  double kkt_residual = 0.0;  // final working-set violation
  int iterations = 0;
};

// Epsilon-insensitive SVR fit: standardize features, then solve the dual by
// sequential minimal optimization (maximal-KKT-violation pair selection,
// stop at violation < 1e-3 or 1e5 iterations). Deterministic given row order.
SVRModel train_svr(const std::vector<FeatureRow>& rows,
                   const std::vector<Feature>& features,
                   const SVRHyperparams& hp, std::uint64_t seed);

// Decision function on a raw (unstandardized) feature vector.
double predict(const SVRModel& model, std::span<const double> x);

std::vector<double> extract_features(const FeatureRow& row,
                                     const std::vector<Feature>& features);

struct CVReport {
  struct Fold {
    double mse = 0.0;
    double r2 = 0.0;  // NaN for degenerate (single-row) folds
  };
  std::vector<Fold> folds;
  double pooled_mse = 0.0;
  double pooled_r2 = 0.0;
  std::uint64_t seed = 0;
};

// Seeded shuffle after a canonical sort by profile_id; k contiguous folds
// sized within one of each other; standardization is fit on train folds only.
CVReport kfold_cv(const std::vector<FeatureRow>& rows,
                  const std::vector<Feature>& features,
                  const SVRHyperparams& hp, int k, std::uint64_t seed);

// Minimal pooled MSE wins; ties break to smaller C, then larger epsilon,
// then listing order.
std::pair<SVRHyperparams, CVReport> grid_search(
    const std::vector<FeatureRow>& rows, const std::vector<Feature>& features,
    const std::vector<SVRHyperparams>& grid, int k, std::uint64_t seed);

// (mean squared error, coefficient of determination)
std::pair<double, double> metrics(std::span<const double> y_true,
                                  std::span<const double> y_pred);

std::vector<FeatureRow> read_feature_csv(const std::filesystem::path& path);
void write_feature_csv(const std::vector<FeatureRow>& rows,
                       const std::filesystem::path& path);

void write_model_json(const SVRModel& model, const std::filesystem::path& path);
SVRModel read_model_json(const std::filesystem::path& path);

}  // namespace neuracoustic::svr
