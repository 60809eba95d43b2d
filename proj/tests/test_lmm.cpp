#include "test_support.hpp"

#include "mmmi/lmm.hpp"
#include "mmmi/simgen.hpp"

#include <doctest.h>

#include <cmath>

using namespace mmmi;
using mmmi::testing::wide;

namespace {

TrialGenParams homoskedastic(int n_per_arm) {
    TrialGenParams p;
    p.beta[4] = 0.0;
    p.resid_var_drop = p.resid_var_nondrop;
    p.n_per_arm = n_per_arm;
    p.n_dropouts_per_arm = 0;
    return p;
}

LongitudinalDataset complete_trial(const TrialGenParams& p, std::uint64_t seed) {
    Stream s = derive_stream(StreamPath{seed});
    return generate_complete(p, s).data;
}

LongitudinalDataset reversed_rows(const LongitudinalDataset& d) {
    return LongitudinalDataset(d.columns(), d.values().colwise().reverse(), d.mask().colwise().reverse());
}

}  // namespace

TEST_CASE("zero-noise data are interpolated") {
    auto p = homoskedastic(20);
    p.re_cov.setZero();
    p.resid_var_nondrop = p.resid_var_drop = 0.0;
    const auto fit = fit_lmm_ml(complete_trial(p, 1), LmmSpec{});
    REQUIRE(fit.fixed_estimates.size() == 4);
    const double beta[] = {25, -3, 0, -1};
    for (int j = 0; j < 4; ++j) CHECK(std::abs(fit.fixed_estimates(j) - beta[j]) < 1e-8);
    CHECK(fit.resid_var_hat <= 1e-10);
    CHECK(fit.exact_fit);
    CHECK(fit.fixed_names == std::vector<std::string>{"(intercept)", "time", "tx[1]", "tx[1]:time"});
}

TEST_CASE("large-sample recovery and agreement with the GLS oracle") {
    const auto p = homoskedastic(2500);
    const auto d = complete_trial(p, 2);
    const auto fit = fit_lmm_ml(d, LmmSpec{});
    REQUIRE(fit.converged);
    const double beta[] = {25, -3, 0, -1};
    const auto gls = gls_known_variance(d, LmmSpec{}, p.re_cov, p.resid_var_nondrop);
    for (int j = 0; j < 4; ++j) {
        const double se = std::sqrt(fit.fixed_cov(j, j));
        CHECK(std::abs(fit.fixed_estimates(j) - beta[j]) < 3 * se);
        CHECK(std::abs(fit.fixed_estimates(j) - gls.fixed_estimates(j)) < 3 * se);
    }
    const double rel = (fit.re_cov_hat - p.re_cov).norm() / p.re_cov.norm();
    CHECK(rel < 0.10);
    CHECK(fit.resid_var_hat == doctest::Approx(9.0).epsilon(0.05));
}

TEST_CASE("log-likelihood never decreases across accepted steps") {
    TrialGenParams p;
    Stream gs = derive_stream(StreamPath{3});
    Stream ds = derive_stream(StreamPath{4});
    const auto g = generate_complete(p, gs);
    const auto d = apply_dropout(g.data, g.dropout, p.drop_hazard, ds);
    const auto fit = fit_lmm_ml(d, LmmSpec{});
    REQUIRE(fit.converged);
    REQUIRE(fit.loglik_trace.size() >= 2);
    for (std::size_t i = 1; i < fit.loglik_trace.size(); ++i)
        CHECK(fit.loglik_trace[i] >= fit.loglik_trace[i - 1]);
    CHECK(fit.loglik == doctest::Approx(fit.loglik_trace.back()));
    CHECK(std::isfinite(fit.loglik));
    CHECK(fit.gradient_norm < 1e-2);

    // Fixed-effect covariance is symmetric positive definite.
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(fit.fixed_cov);
    CHECK(eig.eigenvalues().minCoeff() > 0);
    CHECK((fit.fixed_cov - fit.fixed_cov.transpose()).norm() < 1e-12);
}

TEST_CASE("row order does not matter") {
    const auto d = complete_trial(homoskedastic(100), 5);
    const auto a = fit_lmm_ml(d, LmmSpec{});
    const auto b = fit_lmm_ml(reversed_rows(d), LmmSpec{});
    CHECK((a.fixed_estimates - b.fixed_estimates).norm() < 1e-8);
    CHECK(std::abs(a.loglik - b.loglik) < 1e-8 * std::abs(a.loglik));
}

TEST_CASE("treatment effect matches the refit with recoded arms") {
    TrialGenParams p;
    Stream gs = derive_stream(StreamPath{6});
    Stream ds = derive_stream(StreamPath{7});
    const auto g = generate_complete(p, gs);
    const auto d = apply_dropout(g.data, g.dropout, p.drop_hazard, ds);

    LmmSpec control_ref;
    LmmSpec treated_ref;
    treated_ref.reference_arm = 1.0;
    const auto a = fit_lmm_ml(d, control_ref);
    const auto b = fit_lmm_ml(d, treated_ref);
    CHECK(b.fixed_names[3] == "tx[0]:time");

    const auto effect = scalar_estimand(a, estimand_weights(a.fixed_names, EstimandKind::treatment_effect));
    const auto control = scalar_estimand(a, estimand_weights(a.fixed_names, EstimandKind::control_slope));
    const auto treated = scalar_estimand(a, estimand_weights(a.fixed_names, EstimandKind::treatment_slope));
    // Under the recoded fit, time is the treated slope and the control slope is time + tx[0]:time.
    const double slope_treated = b.fixed_estimates(1);
    const double slope_control = b.fixed_estimates(1) + b.fixed_estimates(3);
    CHECK(std::abs(effect.q_hat - (slope_treated - slope_control)) < 1e-8);
    CHECK(std::abs(treated.q_hat - slope_treated) < 1e-8);
    CHECK(std::abs(control.q_hat - slope_control) < 1e-8);
    CHECK(effect.u == doctest::Approx(b.fixed_cov(3, 3)).epsilon(1e-6));
}

TEST_CASE("with no between-subject variation the residual variance is RSS / n") {
    // Residuals follow a contrast orthogonal to (1, t), so per-subject lines
    // coincide with the fixed line and G is estimated at zero.
    const double contrast[] = {2, -1, -2, -1, 2};
    std::vector<std::vector<double>> rows;
    double rss = 0.0;
    Stream s = derive_stream(StreamPath{8});
    for (int i = 0; i < 60; ++i) {
        const double tx = i % 2;
        const double a = s.normal();
        std::vector<double> row{double(i + 1), tx};
        for (int t = 0; t < 5; ++t) {
            const double e = a * contrast[t];
            row.push_back(20.0 - 2.0 * t - tx * 0.5 * t + e);
            rss += e * e;
        }
        rows.push_back(row);
    }
    const auto fit = fit_lmm_ml(wide(rows), LmmSpec{});
    REQUIRE(fit.converged);
    CHECK(fit.re_cov_hat.norm() < 1e-4);
    CHECK(std::abs(fit.resid_var_hat - rss / 300.0) <= 1e-6 * rss / 300.0);
}

TEST_CASE("REML inflates the residual variance relative to ML") {
    const auto d = complete_trial(homoskedastic(40), 9);
    LmmSpec reml;
    reml.reml = true;
    const auto ml = fit_lmm_ml(d, LmmSpec{});
    const auto re = fit_lmm_ml(d, reml);
    REQUIRE(re.converged);
    CHECK(re.fixed_cov(1, 1) > ml.fixed_cov(1, 1));
}

TEST_CASE("iteration cap raises a fit error with the trace") {
    const auto d = complete_trial(TrialGenParams{}, 10);
    LmmSpec spec;
    spec.max_iterations = 1;
    try {
        fit_lmm_ml(d, spec);
        FAIL("expected LmmFitError");
    } catch (const LmmFitError& e) {
        CHECK_FALSE(e.trace().empty());
        CHECK(std::string(e.what()).find("no convergence") != std::string::npos);
    }
}

TEST_CASE("rank-deficient design") {
    auto rows = std::vector<std::vector<double>>{};
    for (int i = 0; i < 10; ++i) rows.push_back({double(i + 1), 0.0, 1.0 + i, 2.0 + i, 4.0 - i});
    // Only one arm level: no arm terms, so the design stays full rank.
    CHECK_NOTHROW(fit_lmm_ml(wide(rows), LmmSpec{}));

    std::vector<ColumnInfo> cols{{"id", ColumnRole::subject_id, ColumnType::nominal, 0},
                                 {"one", ColumnRole::covariate, ColumnType::continuous, 0},
                                 {"y_t0", ColumnRole::outcome, ColumnType::continuous, 0},
                                 {"y_t1", ColumnRole::outcome, ColumnType::continuous, 1}};
    Eigen::MatrixXd v(6, 4);
    v << 1, 1, 3, 4, 2, 1, 5, 3, 3, 1, 2, 2, 4, 1, 7, 6, 5, 1, 1, 3, 6, 1, 4, 4;
    LmmSpec spec;
    spec.covariates = {"one"};
    CHECK_THROWS_AS(fit_lmm_ml(LongitudinalDataset(cols, v), spec), NumericError);
}

TEST_CASE("GLS with G = 0 and unit variance is least squares") {
    const auto d = complete_trial(homoskedastic(30), 11);
    const auto data = build_long(d, LmmSpec{});
    Eigen::MatrixXd X(data.n_obs, 4);
    Eigen::VectorXd y(data.n_obs);
    Eigen::Index row = 0;
    for (const auto& s : data.subjects) {
        X.middleRows(row, s.X.rows()) = s.X;
        y.segment(row, s.y.size()) = s.y;
        row += s.X.rows();
    }
    const Eigen::VectorXd ols = X.colPivHouseholderQr().solve(y);
    const auto gls = gls_known_variance(data, Eigen::Matrix2d::Zero(), 1.0);
    CHECK((gls.fixed_estimates - ols).norm() < 1e-9);
    CHECK((gls.fixed_cov - (X.transpose() * X).inverse()).norm() < 1e-10);

    const auto permuted = gls_known_variance(reversed_rows(d), LmmSpec{}, Eigen::Matrix2d::Zero(), 1.0);
    CHECK((permuted.fixed_estimates - gls.fixed_estimates).norm() < 1e-10);
    CHECK_THROWS_AS(gls_known_variance(data, Eigen::Matrix2d::Zero(), 0.0), ConfigError);
}

TEST_CASE("GLS slope is unbiased across replications") {
    const auto p = homoskedastic(150);
    double sum = 0.0, sum_sq = 0.0;
    const int reps = 500;
    for (int r = 0; r < reps; ++r) {
        const auto d = complete_trial(p, 1000 + static_cast<std::uint64_t>(r));
        const auto gls = gls_known_variance(d, LmmSpec{}, p.re_cov, p.resid_var_nondrop);
        const double slope = gls.fixed_estimates(1) + gls.fixed_estimates(3);
        sum += slope;
        sum_sq += slope * slope;
    }
    const double mean = sum / reps;
    const double sd = std::sqrt((sum_sq - reps * mean * mean) / (reps - 1));
    CHECK(std::abs(mean - (-4.0)) < 3 * sd / std::sqrt(double(reps)));
}

TEST_CASE("scalar estimands") {
    LmmFit fit;
    fit.fixed_estimates = Eigen::Vector4d(25, -3, 0, -1);
    fit.fixed_cov = Eigen::Vector4d(0, 0.01, 0, 0.04).asDiagonal();
    const auto est = scalar_estimand(fit, Eigen::Vector4d(0, 1, 0, 1));
    CHECK(est.q_hat == doctest::Approx(-4.0));
    CHECK(est.u == doctest::Approx(0.05));
    const auto zero = scalar_estimand(fit, Eigen::Vector4d::Zero());
    CHECK(zero.q_hat == 0.0);
    CHECK(zero.u == 0.0);
    CHECK_THROWS_AS(scalar_estimand(fit, Eigen::Vector3d(0, 1, 0)), ConfigError);
}

TEST_CASE("named estimand weights") {
    const std::vector<std::string> names{"(intercept)", "time", "tx[1]", "tx[1]:time"};
    CHECK(estimand_weights(names, EstimandKind::treatment_slope) == Eigen::Vector4d(0, 1, 0, 1));
    CHECK(estimand_weights(names, EstimandKind::treatment_effect) == Eigen::Vector4d(0, 0, 0, 1));
    CHECK(estimand_weights(names, EstimandKind::control_slope) == Eigen::Vector4d(0, 1, 0, 0));
    CHECK(estimand_weights(names, EstimandKind::treatment_slope, "tx[1]") == Eigen::Vector4d(0, 1, 0, 1));
    CHECK_THROWS_AS(estimand_weights(names, EstimandKind::treatment_slope, "tx[2]"), ConfigError);
    CHECK(parse_estimand("treatment-effect") == EstimandKind::treatment_effect);
    CHECK_THROWS_AS(parse_estimand("odds-ratio"), ConfigError);
}
