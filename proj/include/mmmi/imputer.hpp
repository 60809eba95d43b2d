#pragma once

#include "mmmi/dataset.hpp"
#include "mmmi/errors.hpp"
#include "mmmi/stream.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace mmmi {

enum class ImputeMethod { automatic, monotone, chained };

struct ImputerConfig {
    // Impute each level of this column separately.
    std::optional<std::string> group_by;
    // Columns to impute, in order. Monotone imputation conditions each column on
    // the ones before it; chained imputation conditions on all others.
    std::vector<std::string> column_order;
    // Fully observed columns added to every regression.
    std::vector<std::string> predictors;
    int sweeps = 10;
    double ridge_epsilon = 1e-8;
    ImputeMethod method = ImputeMethod::automatic;

    void validate() const;
};

template <typename Scalar = double>
struct PosteriorDraw {
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> beta;
    Scalar sigma{0};
};

namespace detail {

// Names of the columns that make X rank deficient (beyond the pivoted rank).
std::string offending_columns(const Eigen::MatrixXd& X, const std::vector<std::string>& names);

}  // namespace detail

/// One draw of (beta, sigma) from the posterior of a normal linear regression
/// under the standard noninformative prior:
///   sigma^2 = RSS / chi2(n - p),  beta ~ N(beta_ls, sigma^2 (X'X)^-1).
/// A ridge term ridge_epsilon * tr(X'X)/p * I is added only when X'X is
/// numerically singular; if that fails too, NumericError names the columns.
template <typename DerivedX, typename DerivedY>
PosteriorDraw<typename DerivedX::Scalar> posterior_draw_linear(const Eigen::MatrixBase<DerivedX>& X,
                                                               const Eigen::MatrixBase<DerivedY>& y, Stream& stream,
                                                               double ridge_epsilon = 1e-8,
                                                               const std::vector<std::string>& names = {}) {
    using Scalar = typename DerivedX::Scalar;
    using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

    const Eigen::Index n = X.rows();
    const Eigen::Index p = X.cols();
    if (y.size() != n) throw ConfigError("posterior_draw_linear: X and y row counts differ");
    if (n <= p)
        throw NumericError("singular design: " + std::to_string(n) + " rows for " + std::to_string(p) +
                           " predictors (" + detail::offending_columns(X.template cast<double>(), names) + ")");

    Matrix xtx = X.transpose() * X;
    const Vector xty = X.transpose() * y;

    auto well_conditioned = [](const Eigen::LLT<Matrix>& llt, const Matrix& a) {
        if (llt.info() != Eigen::Success) return false;
        const auto& L = llt.matrixLLT();
        for (Eigen::Index i = 0; i < a.rows(); ++i) {
            const Scalar unexplained = L(i, i) * L(i, i);
            if (!(unexplained > Scalar(1e-12) * a(i, i))) return false;
        }
        return true;
    };

    Eigen::LLT<Matrix> llt(xtx);
    if (!well_conditioned(llt, xtx)) {
        bool rescued = false;
        if (ridge_epsilon > 0) {
            const Scalar scale = xtx.trace() / static_cast<Scalar>(p);
            xtx += Matrix::Identity(p, p) * (Scalar(ridge_epsilon) * scale);
            llt.compute(xtx);
            rescued = well_conditioned(llt, xtx);
        }
        if (!rescued)
            throw NumericError("singular design: rank deficient (" +
                               detail::offending_columns(X.template cast<double>(), names) + ")");
    }

    const Vector beta_ls = llt.solve(xty);
    Scalar rss = (y - X * beta_ls).squaredNorm();
    if (rss <= Scalar(1e-24) * y.squaredNorm()) rss = 0;

    const Scalar chi2 = static_cast<Scalar>(stream.chi_squared(static_cast<double>(n - p)));
    Vector z(p);
    for (Eigen::Index i = 0; i < p; ++i) z(i) = static_cast<Scalar>(stream.normal());

    PosteriorDraw<Scalar> draw;
    draw.sigma = rss > 0 ? std::sqrt(rss / chi2) : Scalar(0);
    draw.beta = beta_ls;
    if (draw.sigma > 0) draw.beta += draw.sigma * llt.matrixU().solve(z);
    return draw;
}

/// True when, in `columns` order, every row is observed up to some column and
/// missing afterwards.
bool is_monotone(const LongitudinalDataset& d, const std::vector<Eigen::Index>& columns);

/// Sequential regression imputation of a monotone pattern. Each stratum draws
/// from its own sub-stream of `path`, keyed by the stratum's group value.
LongitudinalDataset impute_monotone(const LongitudinalDataset& d, const ImputerConfig& cfg, const StreamPath& path);

/// Chained-equations imputation: stratum-mean initialization, then `sweeps`
/// cycles of posterior-draw regressions on all other listed columns.
LongitudinalDataset impute_chained(const LongitudinalDataset& d, const ImputerConfig& cfg, const StreamPath& path);

/// Dispatches on cfg.method (automatic = monotone when the pattern allows).
LongitudinalDataset impute_once(const LongitudinalDataset& d, const ImputerConfig& cfg, const StreamPath& path);

/// `count` independent completed datasets; imputation i uses path/("imputation", i).
std::vector<LongitudinalDataset> generate_ignorable_set(const LongitudinalDataset& d, std::size_t count,
                                                        const ImputerConfig& cfg, const StreamPath& path);

}  // namespace mmmi
