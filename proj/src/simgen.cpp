#include "mmmi/simgen.hpp"

#include "mmmi/errors.hpp"

#include <cmath>

namespace mmmi {

void TrialGenParams::validate() const {
    for (double b : beta)
        if (!std::isfinite(b)) throw ConfigError("trial: beta entries must be finite");
    if (!re_cov.allFinite() || std::abs(re_cov(0, 1) - re_cov(1, 0)) > 1e-12)
        throw ConfigError("trial: re_cov must be finite and symmetric");
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(re_cov);
    if (eig.eigenvalues().minCoeff() < -1e-12) throw ConfigError("trial: re_cov must be positive semidefinite");
    if (!(resid_var_nondrop >= 0) || !(resid_var_drop >= 0))
        throw ConfigError("trial: residual variances must be >= 0");
    if (n_per_arm < 1) throw ConfigError("trial: n_per_arm must be >= 1");
    if (n_dropouts_per_arm < 0 || n_dropouts_per_arm > n_per_arm)
        throw ConfigError("trial: n_dropouts_per_arm must lie in [0, n_per_arm]");
    if (timepoints < 2) throw ConfigError("trial: timepoints must be >= 2");
    if (static_cast<int>(drop_hazard.size()) != timepoints - 1)
        throw ConfigError("trial: drop_hazard needs timepoints - 1 entries");
    for (double h : drop_hazard)
        if (!(h >= 0 && h <= 1)) throw ConfigError("trial: drop_hazard entries must lie in [0, 1]");
    if (drop_hazard.back() != 1.0) throw ConfigError("trial: final drop_hazard entry must be 1");
}

GeneratedTrial generate_complete(const TrialGenParams& params, Stream& stream) {
    params.validate();
    const int T = params.timepoints;
    const int n = 2 * params.n_per_arm;

    std::vector<ColumnInfo> cols;
    cols.push_back({"id", ColumnRole::subject_id, ColumnType::nominal, 0.0});
    cols.push_back({"tx", ColumnRole::group, ColumnType::binary, 0.0});
    for (int t = 0; t < T; ++t)
        cols.push_back({"y_t" + std::to_string(t), ColumnRole::outcome, ColumnType::continuous, double(t)});

    // Symmetric square root of the random-effect covariance; handles singular G.
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(params.re_cov);
    const Eigen::Matrix2d re_root =
        eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();

    const auto& b = params.beta;
    Eigen::MatrixXd values(n, 2 + T);
    std::vector<bool> dropout(static_cast<std::size_t>(n), false);
    for (int i = 0; i < n; ++i) {
        const int arm = i / params.n_per_arm;
        const bool drop = (i % params.n_per_arm) < params.n_dropouts_per_arm;
        dropout[static_cast<std::size_t>(i)] = drop;

        const Eigen::Vector2d z(stream.normal(), stream.normal());
        const Eigen::Vector2d v = re_root * z;
        const double sd = std::sqrt(drop ? params.resid_var_drop : params.resid_var_nondrop);

        values(i, 0) = i + 1;
        values(i, 1) = arm;
        for (int t = 0; t < T; ++t) {
            const double mean = b[0] + b[1] * t + b[2] * arm + b[3] * arm * t + b[4] * (drop ? t : 0);
            values(i, 2 + t) = mean + v(0) + v(1) * t + sd * stream.normal();
        }
    }
    return {LongitudinalDataset(std::move(cols), std::move(values)), std::move(dropout)};
}

LongitudinalDataset apply_dropout(const LongitudinalDataset& d, const std::vector<bool>& dropout,
                                  const std::vector<double>& drop_hazard, Stream& stream) {
    const auto outcomes = d.outcome_columns();
    if (dropout.size() != static_cast<std::size_t>(d.rows()))
        throw ConfigError("apply_dropout: dropout flags do not align with dataset rows");
    if (drop_hazard.size() + 1 != outcomes.size())
        throw ConfigError("apply_dropout: drop_hazard length " + std::to_string(drop_hazard.size()) +
                          " does not match " + std::to_string(outcomes.size()) + " timepoints");
    for (double h : drop_hazard)
        if (!(h >= 0 && h <= 1)) throw ConfigError("apply_dropout: hazard entries must lie in [0, 1]");

    LongitudinalDataset out = d;
    for (Eigen::Index r = 0; r < d.rows(); ++r) {
        if (!dropout[static_cast<std::size_t>(r)]) continue;
        for (std::size_t j = 1; j < outcomes.size(); ++j) {
            if (stream.uniform() < drop_hazard[j - 1]) {
                for (std::size_t k = j; k < outcomes.size(); ++k) out.set_missing(r, outcomes[k]);
                break;
            }
        }
    }
    return out;
}

double true_target(const TrialGenParams& p) {
    const double drop_share = p.n_per_arm > 0 ? double(p.n_dropouts_per_arm) / double(p.n_per_arm) : 0.0;
    return p.beta[1] + p.beta[3] + drop_share * p.beta[4];
}

std::vector<double> expected_missing_fractions(const TrialGenParams& p) {
    const double drop_share = double(p.n_dropouts_per_arm) / double(p.n_per_arm);
    std::vector<double> out{0.0};
    double still_in = 1.0;
    for (double h : p.drop_hazard) {
        still_in *= (1.0 - h);
        out.push_back(drop_share * (1.0 - still_in));
    }
    return out;
}

}  // namespace mmmi
