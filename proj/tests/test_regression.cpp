#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "neuracoustic/errors.hpp"
#include "neuracoustic/rng.hpp"
#include "neuracoustic/svr.hpp"
#include "support/fixtures.hpp"

using namespace neuracoustic;
using namespace neuracoustic::svr;

namespace {

// Rows on the exact line score = 0.2 + 0.5 * mr.
std::vector<FeatureRow> line_rows(int n = 12) {
  std::vector<FeatureRow> rows;
  for (int i = 0; i < n; ++i) {
    FeatureRow r;
    r.profile_id = "p" + std::to_string(i < 10 ? i : i + 100);  // vary ids
    r.mr_nsim = static_cast<double>(i) / (n - 1);
    r.ft_nsim = 0.5;  // unused constant would break training; keep off sets
    r.pta_db = 10.0 + i;
    r.score = 0.2 + 0.5 * r.mr_nsim;
    rows.push_back(r);
  }
  return rows;
}

const std::vector<Feature> kMr = {Feature::MrNsim};

}  // namespace

TEST_CASE("train_svr fits an exact line without slack") {
  SVRHyperparams hp;
  hp.kernel = Kernel::Linear;
  hp.c = 100.0;
  hp.epsilon = 0.0;
  const auto rows = line_rows();
  const SVRModel model = train_svr(rows, kMr, hp, 1);
  CHECK(model.kkt_residual < 1e-3);
  for (const auto& r : rows) {
    const double p = predict(model, extract_features(r, kMr));
    CHECK(p == doctest::Approx(r.score).epsilon(1e-6));
  }
  for (double beta : model.dual_coefs) CHECK(std::abs(beta) <= hp.c + 1e-12);
}

TEST_CASE("constant targets collapse to a bias-only model") {
  SVRHyperparams hp;
  hp.kernel = Kernel::Rbf;
  hp.c = 1.0;
  hp.epsilon = 0.05;
  auto rows = line_rows();
  for (auto& r : rows) r.score = 0.42;
  const SVRModel model = train_svr(rows, kMr, hp, 1);
  CHECK(model.support_vectors.empty());  // zero support-vector spread
  for (const auto& r : rows)
    CHECK(predict(model, extract_features(r, kMr)) ==
          doctest::Approx(0.42).epsilon(1e-9));
}

TEST_CASE("vanishing C regularizes to the target mean within epsilon") {
  SVRHyperparams hp;
  hp.kernel = Kernel::Linear;
  hp.c = 1e-6;
  hp.epsilon = 0.05;
  const auto rows = line_rows();
  double mean = 0.0;
  for (const auto& r : rows) mean += r.score;
  mean /= static_cast<double>(rows.size());
  const SVRModel model = train_svr(rows, kMr, hp, 1);
  for (const auto& r : rows) {
    const double p = predict(model, extract_features(r, kMr));
    CHECK(std::abs(p - mean) <= hp.epsilon + 1e-3);
  }
}

TEST_CASE("predict") {
  SUBCASE("linear-kernel models are affine in the features") {
    SVRHyperparams hp;
    hp.kernel = Kernel::Linear;
    hp.c = 10.0;
    hp.epsilon = 0.01;
    const auto rows = line_rows();
    const SVRModel m = train_svr(rows, kMr, hp, 1);
    const auto at = [&](double x) { return predict(m, std::vector{x}); };
    CHECK(at(0.2) + at(0.5) - at(0.0) ==
          doctest::Approx(at(0.7)).epsilon(1e-9));
  }
  SUBCASE("rbf far from all support vectors decays to the bias") {
    SVRHyperparams hp;
    hp.kernel = Kernel::Rbf;
    hp.c = 10.0;
    hp.epsilon = 0.01;
    const auto rows = line_rows();
    const SVRModel m = train_svr(rows, kMr, hp, 1);
    CHECK(predict(m, std::vector{1e6}) ==
          doctest::Approx(m.bias).epsilon(1e-6));
  }
  SUBCASE("dimension mismatch") {
    const SVRModel m = train_svr(line_rows(), kMr, SVRHyperparams{}, 1);
    CHECK_THROWS_AS(predict(m, std::vector{1.0, 2.0}), InputError);
  }
}

TEST_CASE("degenerate features are named in the error") {
  auto rows = line_rows();
  for (auto& r : rows) r.ft_nsim = 0.5;
  CHECK_THROWS_WITH_AS(
      train_svr(rows, {Feature::FtNsim}, SVRHyperparams{}, 1),
      doctest::Contains("ft_nsim"), InputError);
}

TEST_CASE("standardization leaves unit-scale training features") {
  const auto rows = line_rows();
  const std::vector<Feature> features = {Feature::MrNsim, Feature::PtaDb};
  const SVRModel m = train_svr(rows, features, SVRHyperparams{}, 1);
  // Re-standardize the training data with the stored parameters.
  for (std::size_t j = 0; j < features.size(); ++j) {
    double mean = 0.0, var = 0.0;
    for (const auto& r : rows) {
      const double z =
          (extract_features(r, features)[j] - m.feat_mean[j]) / m.feat_std[j];
      mean += z;
    }
    mean /= static_cast<double>(rows.size());
    for (const auto& r : rows) {
      const double z =
          (extract_features(r, features)[j] - m.feat_mean[j]) / m.feat_std[j];
      var += (z - mean) * (z - mean);
    }
    var /= static_cast<double>(rows.size());
    CHECK(std::abs(mean) < 1e-9);
    CHECK(std::abs(std::sqrt(var) - 1.0) < 1e-9);
  }
}

TEST_CASE("metrics") {
  SUBCASE("perfect prediction") {
    const std::vector<double> y = {0.1, 0.5, 0.9};
    const auto [mse, r2] = metrics(y, y);
    CHECK(mse == 0.0);
    CHECK(r2 == 1.0);
  }
  SUBCASE("predicting the mean has zero explanatory power") {
    const std::vector<double> y = {0.0, 1.0};
    const std::vector<double> p = {0.5, 0.5};
    const auto [mse, r2] = metrics(y, p);
    CHECK(mse == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(r2 == doctest::Approx(0.0).epsilon(1e-12));
  }
  SUBCASE("zero-variance truth is an error") {
    const std::vector<double> y = {0.5, 0.5};
    const std::vector<double> p = {0.4, 0.6};
    CHECK_THROWS_AS(metrics(y, p), InputError);
  }
}

TEST_CASE("kfold_cv") {
  SUBCASE("leave-one-out predicts every row exactly once") {
    auto rows = line_rows(6);
    const CVReport report = kfold_cv(rows, kMr, SVRHyperparams{}, 6, 3);
    CHECK(report.folds.size() == 6);
    // pooled metrics exist over all six held-out predictions
    CHECK(std::isfinite(report.pooled_mse));
    for (const auto& f : report.folds) CHECK(std::isfinite(f.mse));
  }
  SUBCASE("perfect linear data earns r2 >= 0.99") {
    SVRHyperparams hp;
    hp.kernel = Kernel::Linear;
    hp.c = 100.0;
    hp.epsilon = 0.0;
    const CVReport report = kfold_cv(line_rows(18), kMr, hp, 3, 3);
    CHECK(report.pooled_r2 >= 0.99);
  }
  SUBCASE("deterministic in the seed") {
    const auto rows = line_rows();
    const CVReport a = kfold_cv(rows, kMr, SVRHyperparams{}, 3, 11);
    const CVReport b = kfold_cv(rows, kMr, SVRHyperparams{}, 3, 11);
    CHECK(a.pooled_mse == b.pooled_mse);
    CHECK(a.pooled_r2 == b.pooled_r2);
    const CVReport c = kfold_cv(rows, kMr, SVRHyperparams{}, 3, 12);
    CHECK(a.pooled_mse != c.pooled_mse);
  }
  SUBCASE("row permutation does not change the metrics") {
    auto rows = line_rows();
    const CVReport a = kfold_cv(rows, kMr, SVRHyperparams{}, 3, 11);
    std::reverse(rows.begin(), rows.end());
    const CVReport b = kfold_cv(rows, kMr, SVRHyperparams{}, 3, 11);
    CHECK(a.pooled_mse == doctest::Approx(b.pooled_mse).epsilon(1e-12));
  }
  SUBCASE("k larger than the row count is an error") {
    CHECK_THROWS_AS(kfold_cv(line_rows(4), kMr, SVRHyperparams{}, 5, 1),
                    InputError);
  }
  SUBCASE("capacity monotonicity on the exact line") {
    SVRHyperparams strong;
    strong.kernel = Kernel::Linear;
    strong.c = 10.0;
    strong.epsilon = 0.0;
    SVRHyperparams weak = strong;
    weak.c = 1e-6;
    const auto rows = line_rows(18);
    CHECK(kfold_cv(rows, kMr, strong, 3, 5).pooled_mse <=
          kfold_cv(rows, kMr, weak, 3, 5).pooled_mse);
  }
}

TEST_CASE("grid_search") {
  const auto rows = line_rows(18);
  SUBCASE("a one-element grid returns that element") {
    SVRHyperparams hp;
    hp.c = 2.5;
    const auto [best, report] = grid_search(rows, kMr, {hp}, 3, 1);
    CHECK(best.c == 2.5);
    CHECK(std::isfinite(report.pooled_mse));
  }
  SUBCASE("a crippled C loses to a working one") {
    SVRHyperparams good;
    good.kernel = Kernel::Linear;
    good.c = 10.0;
    good.epsilon = 0.0;
    SVRHyperparams bad = good;
    bad.c = 1e-9;
    const auto [best, report] = grid_search(rows, kMr, {bad, good}, 3, 1);
    CHECK(best.c == 10.0);
  }
  SUBCASE("ties break to smaller C, then larger epsilon") {
    // constant targets: every hyperparameter setting predicts the constant
    auto flat = rows;
    for (auto& r : flat) r.score = 0.5;
    // r2 requires variance; grid search only compares MSE, but pooled
    // metrics computation needs variance in the truth. Vary one target by
    // an amount inside every epsilon band so predictions stay identical.
    flat[0].score = 0.5 + 1e-9;
    SVRHyperparams a, b, c;
    a.c = 10.0;
    a.epsilon = 0.1;
    b.c = 1.0;
    b.epsilon = 0.1;
    c.c = 1.0;
    c.epsilon = 0.2;
    const auto [best, report] = grid_search(flat, kMr, {a, b, c}, 3, 1);
    CHECK(best.c == 1.0);
    CHECK(best.epsilon == 0.2);
  }
  SUBCASE("empty grid is an error") {
    CHECK_THROWS_AS(grid_search(rows, kMr, {}, 3, 1), InputError);
  }
}

TEST_CASE("feature CSV round trip") {
  fixtures::TempDir dir("svr");
  std::vector<FeatureRow> rows = line_rows(4);
  rows[2].score = std::numeric_limits<double>::quiet_NaN();  // unjoined
  const auto path = dir.path() / "features.csv";
  write_feature_csv(rows, path);
  const auto back = read_feature_csv(path);
  REQUIRE(back.size() == rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(back[i].profile_id == rows[i].profile_id);
    CHECK(back[i].mr_nsim == doctest::Approx(rows[i].mr_nsim).epsilon(1e-9));
    CHECK(back[i].pta_db == doctest::Approx(rows[i].pta_db).epsilon(1e-9));
    if (std::isfinite(rows[i].score))
      CHECK(back[i].score == doctest::Approx(rows[i].score).epsilon(1e-9));
    else
      CHECK_FALSE(std::isfinite(back[i].score));
  }
}

TEST_CASE("model JSON round trip preserves predictions") {
  fixtures::TempDir dir("svr");
  SVRHyperparams hp;
  hp.kernel = Kernel::Rbf;
  hp.c = 2.5;
  hp.epsilon = 0.05;
  hp.gamma_mode = GammaMode::Scale;
  const auto rows = line_rows();
  const SVRModel m = train_svr(rows, kMr, hp, 1);
  const auto path = dir.path() / "model.json";
  write_model_json(m, path);
  const SVRModel r = read_model_json(path);
  for (const auto& row : rows) {
    const auto x = extract_features(row, kMr);
    CHECK(predict(r, x) == doctest::Approx(predict(m, x)).epsilon(1e-12));
  }
}
