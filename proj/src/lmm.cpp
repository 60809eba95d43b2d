#include "mmmi/lmm.hpp"

#include "mmmi/numfmt.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <map>
#include <numbers>
#include <set>

namespace mmmi {

LongData build_long(const LongitudinalDataset& d, const LmmSpec& spec) {
    std::vector<Eigen::Index> outcomes;
    if (spec.outcome_columns.empty()) {
        outcomes = d.outcome_columns();
    } else {
        for (const auto& name : spec.outcome_columns) outcomes.push_back(d.column_index(name));
        std::stable_sort(outcomes.begin(), outcomes.end(),
                         [&](auto a, auto b) { return d.column(a).time < d.column(b).time; });
    }
    if (outcomes.empty()) throw ConfigError("lmm: no outcome columns");
    for (std::size_t j = 1; j < outcomes.size(); ++j)
        if (!(d.column(outcomes[j]).time > d.column(outcomes[j - 1]).time))
            throw ConfigError("lmm: outcome time codes must be strictly increasing");

    std::optional<Eigen::Index> arm;
    if (!spec.arm_column.empty()) arm = d.column_index(spec.arm_column);
    else arm = d.group_column();

    LongData out;
    out.fixed_names = {"(intercept)", "time"};
    std::vector<double> non_ref;
    if (arm) {
        std::set<double> levels;
        for (Eigen::Index r = 0; r < d.rows(); ++r) {
            if (d.is_missing(r, *arm)) throw DataError("lmm: arm column has missing values");
            levels.insert(d.value(r, *arm));
        }
        const double ref = spec.reference_arm.value_or(*levels.begin());
        if (!levels.count(ref)) throw ConfigError("lmm: reference arm level " + format_shortest(ref) + " not present");
        out.arm_levels.push_back(ref);
        for (double l : levels)
            if (l != ref) non_ref.push_back(l);
        out.arm_levels.insert(out.arm_levels.end(), non_ref.begin(), non_ref.end());
        const std::string base = d.column(*arm).name;
        for (double l : non_ref) out.fixed_names.push_back(base + "[" + format_shortest(l) + "]");
        for (double l : non_ref) out.fixed_names.push_back(base + "[" + format_shortest(l) + "]:time");
    }
    std::vector<Eigen::Index> covs;
    for (const auto& name : spec.covariates) {
        const auto c = d.column_index(name);
        if (d.mask().col(c).any()) throw DataError("lmm: covariate '" + name + "' has missing values");
        covs.push_back(c);
        out.fixed_names.push_back(name);
    }
    const auto p = static_cast<Eigen::Index>(out.fixed_names.size());

    for (Eigen::Index r = 0; r < d.rows(); ++r) {
        std::vector<Eigen::Index> obs;
        for (auto c : outcomes)
            if (!d.is_missing(r, c)) obs.push_back(c);
        if (obs.empty()) continue;
        const auto ni = static_cast<Eigen::Index>(obs.size());
        LongData::Subject s{Eigen::MatrixXd::Zero(ni, p), Eigen::MatrixXd(ni, 2), Eigen::VectorXd(ni)};
        for (Eigen::Index j = 0; j < ni; ++j) {
            const double t = d.column(obs[static_cast<std::size_t>(j)]).time;
            s.y(j) = d.value(r, obs[static_cast<std::size_t>(j)]);
            s.Z(j, 0) = 1.0;
            s.Z(j, 1) = t;
            Eigen::Index k = 0;
            s.X(j, k++) = 1.0;
            s.X(j, k++) = t;
            for (std::size_t a = 0; a < non_ref.size(); ++a)
                s.X(j, k++) = d.value(r, *arm) == non_ref[a] ? 1.0 : 0.0;
            for (std::size_t a = 0; a < non_ref.size(); ++a)
                s.X(j, k++) = d.value(r, *arm) == non_ref[a] ? t : 0.0;
            for (auto c : covs) s.X(j, k++) = d.value(r, c);
        }
        out.n_obs += ni;
        out.subjects.push_back(std::move(s));
    }
    if (out.subjects.empty()) throw DataError("lmm: no observed outcomes");
    return out;
}

namespace {

// Subjects sharing X and Z share their marginal covariance, so the likelihood
// only needs per-pattern counts, means and centered cross-products of y.
struct Pattern {
    Eigen::MatrixXd X;
    Eigen::MatrixXd Z;
    double count = 0;
    Eigen::VectorXd ybar;
    Eigen::MatrixXd centered;  // sum (y - ybar)(y - ybar)'
};

std::vector<double> bits_key(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Z) {
    std::vector<double> key;
    key.reserve(static_cast<std::size_t>(X.size() + Z.size() + 1));
    key.push_back(static_cast<double>(X.rows()));
    key.insert(key.end(), X.data(), X.data() + X.size());
    key.insert(key.end(), Z.data(), Z.data() + Z.size());
    return key;
}

struct BitsLess {
    bool operator()(const std::vector<double>& a, const std::vector<double>& b) const {
        if (a.size() != b.size()) return a.size() < b.size();
        return std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) < 0;
    }
};

std::vector<Pattern> make_patterns(const LongData& data) {
    std::map<std::vector<double>, std::vector<const LongData::Subject*>, BitsLess> groups;
    for (const auto& s : data.subjects) groups[bits_key(s.X, s.Z)].push_back(&s);
    std::vector<Pattern> out;
    out.reserve(groups.size());
    for (const auto& [key, members] : groups) {
        Pattern p;
        p.X = members.front()->X;
        p.Z = members.front()->Z;
        p.count = static_cast<double>(members.size());
        p.ybar = Eigen::VectorXd::Zero(p.X.rows());
        for (const auto* s : members) p.ybar += s->y;
        p.ybar /= p.count;
        p.centered = Eigen::MatrixXd::Zero(p.X.rows(), p.X.rows());
        for (const auto* s : members) {
            const Eigen::VectorXd e = s->y - p.ybar;
            p.centered.noalias() += e * e.transpose();
        }
        out.push_back(std::move(p));
    }
    return out;
}

struct Profile {
    Eigen::VectorXd beta;
    Eigen::MatrixXd xtvx;  // sum X' H^-1 X
    double quad = 0;       // sum r' H^-1 r at beta
    double logdet_h = 0;   // sum log|H_i|
    bool ok = true;
};

// H_i = Z_i D Z_i' + I with D = G / sigma^2.
Profile profile(const std::vector<Pattern>& patterns, const Eigen::MatrixXd& D, Eigen::Index p) {
    Profile pr;
    pr.xtvx = Eigen::MatrixXd::Zero(p, p);
    Eigen::VectorXd xtvy = Eigen::VectorXd::Zero(p);
    std::vector<Eigen::LLT<Eigen::MatrixXd>> factors;
    factors.reserve(patterns.size());
    for (const auto& pat : patterns) {
        Eigen::MatrixXd H = pat.Z * D * pat.Z.transpose();
        H.diagonal().array() += 1.0;
        factors.emplace_back(H);
        const auto& llt = factors.back();
        if (llt.info() != Eigen::Success) {
            pr.ok = false;
            return pr;
        }
        pr.logdet_h += pat.count * 2.0 * llt.matrixLLT().diagonal().array().log().sum();
        const Eigen::MatrixXd hx = llt.solve(pat.X);
        pr.xtvx.noalias() += pat.count * (pat.X.transpose() * hx);
        xtvy.noalias() += pat.count * (hx.transpose() * pat.ybar);
    }
    Eigen::LLT<Eigen::MatrixXd> xllt(pr.xtvx);
    if (xllt.info() != Eigen::Success) throw NumericError("lmm: rank-deficient fixed-effects design");
    pr.beta = xllt.solve(xtvy);
    for (std::size_t i = 0; i < patterns.size(); ++i) {
        const auto& pat = patterns[i];
        const auto& llt = factors[i];
        const Eigen::VectorXd r = pat.ybar - pat.X * pr.beta;
        pr.quad += llt.solve(pat.centered).trace() + pat.count * r.dot(llt.solve(r));
    }
    return pr;
}

void require_full_rank(const std::vector<Pattern>& patterns, Eigen::Index p, const std::vector<std::string>& names) {
    Eigen::MatrixXd xtx = Eigen::MatrixXd::Zero(p, p);
    for (const auto& pat : patterns) xtx.noalias() += pat.count * (pat.X.transpose() * pat.X);
    Eigen::LDLT<Eigen::MatrixXd> ldlt(xtx);
    const Eigen::VectorXd diag = ldlt.vectorD();
    for (Eigen::Index i = 0; i < p; ++i) {
        if (!(diag(i) > 1e-10 * xtx.diagonal().maxCoeff())) {
            std::string cols;
            for (const auto& n : names) cols += (cols.empty() ? "" : ", ") + n;
            throw NumericError("lmm: rank-deficient fixed-effects design (" + cols + ")");
        }
    }
}

constexpr int kRe = 2;
constexpr int kTheta = kRe * (kRe + 1) / 2;
using Theta = Eigen::Matrix<double, kTheta, 1>;

Eigen::MatrixXd relative_cov(const Theta& theta) {
    Eigen::Matrix2d L = Eigen::Matrix2d::Zero();
    L(0, 0) = theta(0);
    L(1, 0) = theta(1);
    L(1, 1) = theta(2);
    return L * L.transpose();
}

struct Objective {
    const std::vector<Pattern>& patterns;
    Eigen::Index p;
    double n_obs;
    bool reml;

    // Profiled deviance (-2 loglik).
    double operator()(const Theta& theta) const {
        const Profile pr = profile(patterns, relative_cov(theta), p);
        if (!pr.ok || !(pr.quad > 0)) return std::numeric_limits<double>::infinity();
        const double log2pi = std::log(2.0 * std::numbers::pi);
        if (!reml) {
            const double s2 = pr.quad / n_obs;
            return n_obs * (log2pi + std::log(s2) + 1.0) + pr.logdet_h;
        }
        const double dof = n_obs - static_cast<double>(p);
        const double s2 = pr.quad / dof;
        Eigen::LLT<Eigen::MatrixXd> xllt(pr.xtvx);
        const double logdet_x = 2.0 * xllt.matrixLLT().diagonal().array().log().sum();
        return dof * (log2pi + std::log(s2) + 1.0) + pr.logdet_h + logdet_x;
    }
};

Theta gradient(const Objective& f, const Theta& x, double fx) {
    Theta g;
    for (int i = 0; i < kTheta; ++i) {
        const double h = 1e-6 * std::max(1.0, std::abs(x(i)));
        Theta xp = x;
        Theta xm = x;
        xp(i) += h;
        xm(i) -= h;
        const double fp = f(xp);
        const double fm = f(xm);
        if (std::isfinite(fp) && std::isfinite(fm)) g(i) = (fp - fm) / (2 * h);
        else if (std::isfinite(fp)) g(i) = (fp - fx) / h;
        else g(i) = (fx - fm) / h;
    }
    return g;
}

LmmFit finish(const std::vector<Pattern>& patterns, const LongData& data, const Theta& theta, bool reml) {
    const auto p = static_cast<Eigen::Index>(data.fixed_names.size());
    const Eigen::MatrixXd D = relative_cov(theta);
    const Profile pr = profile(patterns, D, p);
    const double n = static_cast<double>(data.n_obs);
    const double s2 = pr.quad / (reml ? n - static_cast<double>(p) : n);
    LmmFit fit;
    fit.fixed_names = data.fixed_names;
    fit.fixed_estimates = pr.beta;
    fit.fixed_cov = s2 * pr.xtvx.inverse();
    fit.fixed_cov = 0.5 * (fit.fixed_cov + fit.fixed_cov.transpose()).eval();
    fit.re_cov_hat = s2 * D;
    fit.resid_var_hat = s2;
    return fit;
}

}  // namespace

LmmFit fit_lmm_ml(const LongData& data, const LmmSpec& spec) {
    const auto p = static_cast<Eigen::Index>(data.fixed_names.size());
    const auto patterns = make_patterns(data);
    require_full_rank(patterns, p, data.fixed_names);
    const double n = static_cast<double>(data.n_obs);
    if (n <= static_cast<double>(p)) throw NumericError("lmm: fewer observations than fixed effects");

    // Exact interpolation: every GLS solution coincides with OLS, sigma^2 = 0.
    {
        const Profile ols = profile(patterns, Eigen::MatrixXd::Zero(kRe, kRe), p);
        double ysq = 0;
        for (const auto& pat : patterns) ysq += pat.centered.trace() + pat.count * pat.ybar.squaredNorm();
        if (ols.quad <= 1e-24 * ysq) {
            LmmFit fit;
            fit.fixed_names = data.fixed_names;
            fit.fixed_estimates = ols.beta;
            fit.fixed_cov = Eigen::MatrixXd::Zero(p, p);
            fit.re_cov_hat = Eigen::MatrixXd::Zero(kRe, kRe);
            fit.resid_var_hat = 0.0;
            fit.loglik = std::numeric_limits<double>::infinity();
            fit.converged = true;
            fit.exact_fit = true;
            return fit;
        }
    }

    const Objective f{patterns, p, n, spec.reml};
    Theta x;
    x << 1.0, 0.0, 1.0;
    double fx = f(x);
    if (!std::isfinite(fx)) {
        x << 0.1, 0.0, 0.1;
        fx = f(x);
    }
    if (!std::isfinite(fx)) throw LmmFitError("lmm: objective not finite at the starting point", {});

    std::vector<double> trace{-fx / 2};
    Theta g = gradient(f, x, fx);
    Eigen::Matrix<double, kTheta, kTheta> Hinv = Eigen::Matrix<double, kTheta, kTheta>::Identity();
    bool converged = false;
    int iter = 0;
    for (; iter < spec.max_iterations && !converged; ++iter) {
        Theta dir = -Hinv * g;
        if (!(dir.dot(g) < 0)) {
            Hinv.setIdentity();
            dir = -g;
        }
        // Backtracking (Armijo) line search; accepted steps never lower the loglik.
        double step = 1.0;
        Theta xn;
        double fn = std::numeric_limits<double>::infinity();
        bool accepted = false;
        for (int ls = 0; ls < 60; ++ls) {
            xn = x + step * dir;
            fn = f(xn);
            if (std::isfinite(fn) && fn <= fx + 1e-4 * step * dir.dot(g)) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) {
            if (Hinv.isIdentity()) {
                // No descent step exists at working precision.
                converged = true;
                break;
            }
            Hinv.setIdentity();
            continue;
        }
        const Theta gn = gradient(f, xn, fn);
        const Theta s = xn - x;
        const Theta yv = gn - g;
        const double sy = s.dot(yv);
        if (sy > 1e-12 * s.norm() * yv.norm()) {
            const double rho = 1.0 / sy;
            const auto I = Eigen::Matrix<double, kTheta, kTheta>::Identity();
            Hinv = (I - rho * s * yv.transpose()) * Hinv * (I - rho * yv * s.transpose()) + rho * s * s.transpose();
        }
        const double rel = std::abs(fn - fx) / std::max(1.0, std::abs(fx));
        const double dparam = s.cwiseAbs().maxCoeff();
        x = xn;
        fx = fn;
        g = gn;
        trace.push_back(-fx / 2);
        if (rel < spec.loglik_rel_tol && dparam < spec.param_tol) converged = true;
    }
    if (!converged)
        throw LmmFitError("lmm: no convergence after " + std::to_string(spec.max_iterations) + " iterations",
                          std::move(trace));

    LmmFit fit = finish(patterns, data, x, spec.reml);
    fit.loglik = -fx / 2;
    fit.converged = true;
    fit.iterations = iter;
    fit.gradient_norm = g.norm();
    fit.loglik_trace = std::move(trace);
    return fit;
}

LmmFit fit_lmm_ml(const LongitudinalDataset& d, const LmmSpec& spec) { return fit_lmm_ml(build_long(d, spec), spec); }

GlsResult gls_known_variance(const LongData& data, const Eigen::MatrixXd& G, double sigma2) {
    if (!(sigma2 > 0)) throw ConfigError("gls: sigma2 must be positive");
    if (G.rows() != kRe || G.cols() != kRe) throw ConfigError("gls: G must be 2x2");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(G);
    if (eig.eigenvalues().minCoeff() < -1e-12) throw ConfigError("gls: G must be positive semidefinite");
    const auto p = static_cast<Eigen::Index>(data.fixed_names.size());
    const auto patterns = make_patterns(data);
    require_full_rank(patterns, p, data.fixed_names);
    const Profile pr = profile(patterns, G / sigma2, p);
    if (!pr.ok) throw NumericError("gls: marginal covariance not positive definite");
    return {pr.beta, sigma2 * pr.xtvx.inverse()};
}

GlsResult gls_known_variance(const LongitudinalDataset& d, const LmmSpec& spec, const Eigen::MatrixXd& G,
                             double sigma2) {
    return gls_known_variance(build_long(d, spec), G, sigma2);
}

ScalarEstimate scalar_estimand(const LmmFit& fit, const Eigen::VectorXd& w) {
    if (w.size() != fit.fixed_estimates.size())
        throw ConfigError("estimand: weight vector has " + std::to_string(w.size()) + " entries, model has " +
                          std::to_string(fit.fixed_estimates.size()) + " fixed effects");
    return {w.dot(fit.fixed_estimates), std::max(0.0, w.dot(fit.fixed_cov * w))};
}

EstimandKind parse_estimand(const std::string& name) {
    if (name == "treatment-slope") return EstimandKind::treatment_slope;
    if (name == "treatment-effect") return EstimandKind::treatment_effect;
    if (name == "control-slope") return EstimandKind::control_slope;
    throw ConfigError("unknown estimand '" + name + "' (expected treatment-slope, treatment-effect, control-slope)");
}

Eigen::VectorXd estimand_weights(const std::vector<std::string>& names, EstimandKind kind, const std::string& arm_term) {
    Eigen::VectorXd w = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(names.size()));
    auto index_of = [&](const std::string& n) -> Eigen::Index {
        auto it = std::find(names.begin(), names.end(), n);
        if (it == names.end()) throw ConfigError("estimand: model has no term '" + n + "'");
        return it - names.begin();
    };
    w(index_of("time")) = 1.0;
    if (kind == EstimandKind::control_slope) return w;

    std::string interaction;
    if (!arm_term.empty()) {
        interaction = arm_term + ":time";
    } else {
        std::vector<std::string> candidates;
        for (const auto& n : names)
            if (n.size() > 5 && n.ends_with("]:time")) candidates.push_back(n);
        if (candidates.size() != 1)
            throw ConfigError("estimand: model has " + std::to_string(candidates.size()) +
                              " arm-by-time terms; name the arm explicitly");
        interaction = candidates.front();
    }
    w(index_of(interaction)) = 1.0;
    if (kind == EstimandKind::treatment_effect) w(index_of("time")) = 0.0;
    return w;
}

}  // namespace mmmi
