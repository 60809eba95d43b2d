#pragma once

#include "mmmi/dataset.hpp"
#include "mmmi/errors.hpp"
#include "mmmi/types.hpp"

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

namespace mmmi {

/// Random intercept and slope model on long-format data built from a wide
/// dataset. Fixed effects, in order:
///   (intercept), time, arm[a] for each non-reference arm level a,
///   arm[a]:time for each such level, then time-invariant covariates.
struct LmmSpec {
    // Outcome columns (wide); empty means every outcome-role column.
    std::vector<std::string> outcome_columns;
    // Empty means the subject-id role column.
    std::string subject_column;
    // Empty means the group role column if present (no arm terms otherwise).
    std::string arm_column;
    std::optional<double> reference_arm;
    std::vector<std::string> covariates;
    bool reml = false;
    int max_iterations = 500;
    double loglik_rel_tol = 1e-8;
    double param_tol = 1e-6;
};

/// Per-subject blocks of the long-format model.
struct LongData {
    struct Subject {
        Eigen::MatrixXd X;
        Eigen::MatrixXd Z;
        Eigen::VectorXd y;
    };
    std::vector<Subject> subjects;
    std::vector<std::string> fixed_names;
    std::vector<double> arm_levels;  // reference level first
    Eigen::Index n_obs = 0;
};

LongData build_long(const LongitudinalDataset& d, const LmmSpec& spec);

struct LmmFit {
    Eigen::VectorXd fixed_estimates;
    Eigen::MatrixXd fixed_cov;
    Eigen::MatrixXd re_cov_hat;
    double resid_var_hat = 0.0;
    double loglik = 0.0;
    bool converged = false;
    int iterations = 0;
    // Zero residuals: the data are interpolated exactly and loglik is +inf.
    bool exact_fit = false;
    double gradient_norm = 0.0;
    // Log-likelihood after each accepted optimizer step.
    std::vector<double> loglik_trace;
    std::vector<std::string> fixed_names;
};

class LmmFitError : public NumericError {
public:
    LmmFitError(const std::string& what, std::vector<double> trace)
        : NumericError(what), trace_(std::move(trace)) {}
    const std::vector<double>& trace() const noexcept { return trace_; }

private:
    std::vector<double> trace_;
};

/// Maximum likelihood (or REML when spec.reml) fit. The residual variance is
/// profiled out and the optimizer works on the Cholesky factor of G / sigma^2,
/// so G stays PSD and zero-variance boundary fits are reachable.
LmmFit fit_lmm_ml(const LongData& data, const LmmSpec& spec = {});
LmmFit fit_lmm_ml(const LongitudinalDataset& d, const LmmSpec& spec);

struct GlsResult {
    Eigen::VectorXd fixed_estimates;
    Eigen::MatrixXd fixed_cov;
};

/// Closed-form generalized least squares with known G and sigma^2.
GlsResult gls_known_variance(const LongData& data, const Eigen::MatrixXd& G, double sigma2);
GlsResult gls_known_variance(const LongitudinalDataset& d, const LmmSpec& spec, const Eigen::MatrixXd& G,
                             double sigma2);

/// q_hat = w'beta, u = w' cov w.
ScalarEstimate scalar_estimand(const LmmFit& fit, const Eigen::VectorXd& weights);

enum class EstimandKind { treatment_slope, treatment_effect, control_slope };

EstimandKind parse_estimand(const std::string& name);

/// Weight vector over `fixed_names` for a named estimand. `arm_term` selects the
/// arm dummy (e.g. "arm[1]"); empty picks the only non-reference arm.
Eigen::VectorXd estimand_weights(const std::vector<std::string>& fixed_names, EstimandKind kind,
                                 const std::string& arm_term = {});

}  // namespace mmmi
