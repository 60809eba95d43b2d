#pragma once

#include "mmmi/errors.hpp"
#include "mmmi/types.hpp"

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

namespace mmmi {

/// Pooled inference for a scalar estimand. Field names follow the usual
/// nested multiple-imputation notation: q_bar, u_bar, within-model variance w,
/// between-model variance b, total variance t and reference df.
template <typename Scalar = double>
struct BasicPooledInference {
    Scalar q_bar{0};
    std::vector<Scalar> model_means;
    Scalar u_bar{0};
    Scalar w{0};
    Scalar b{0};
    Scalar t{0};
    Scalar df = std::numeric_limits<Scalar>::infinity();
    Scalar ci_lo{0};
    Scalar ci_hi{0};
    Scalar p_value{1};
    Scalar gamma{0};
    Scalar gamma_w{0};
    Scalar gamma_b{0};
    Scalar gamma_ratio{0};
    Scalar level{0.95};
    std::size_t m = 0;
    std::size_t n = 0;

    Scalar se() const { return std::sqrt(t); }
    Scalar ci_width() const { return ci_hi - ci_lo; }
    bool normal_reference() const { return std::isinf(df); }
};

using PooledInference = BasicPooledInference<double>;

template <typename Scalar = double>
struct MissingInformation {
    Scalar gamma{0};
    Scalar gamma_w{0};
    Scalar gamma_b{0};
    Scalar gamma_ratio{0};
};

/// Overall, nonresponse and model-uncertainty rates of missing information.
/// gamma_b is clamped at zero (method-of-moments estimates can go negative);
/// gamma and gamma_w are reported as computed.
template <typename Scalar>
MissingInformation<Scalar> missing_information(Scalar u_bar, Scalar w, Scalar b, std::size_t n) {
    if (!(u_bar > 0) || !std::isfinite(u_bar))
        throw DataError("missing_information: u_bar must be positive and finite");
    if (!(w >= 0) || !(b >= 0) || !std::isfinite(w) || !std::isfinite(b))
        throw DataError("missing_information: w and b must be finite and nonnegative");
    if (n < 1) throw DataError("missing_information: n must be at least 1");

    const Scalar within_weight = Scalar(1) - Scalar(1) / static_cast<Scalar>(n);
    const Scalar extra = b + within_weight * w;
    MissingInformation<Scalar> out;
    out.gamma = extra / (u_bar + extra);
    out.gamma_w = w / (u_bar + w);
    out.gamma_b = std::max(out.gamma - out.gamma_w, Scalar(0));
    out.gamma_ratio = out.gamma > 0 ? out.gamma_b / out.gamma : Scalar(0);
    return out;
}

namespace detail {

template <typename Scalar>
void require_finite(const BasicScalarEstimate<Scalar>& e) {
    if (!std::isfinite(e.q_hat) || !std::isfinite(e.u))
        throw DataError("pooling: non-finite estimate in input");
    if (e.u < 0) throw DataError("pooling: negative complete-data variance in input");
}

// Interval, p-value (two-sided, against zero) for a t_df or normal reference.
template <typename Scalar>
void finish_interval(BasicPooledInference<Scalar>& out) {
    if (!(out.level > 0 && out.level < 1)) throw ConfigError("pooling: level must lie in (0, 1)");
    const Scalar upper_tail = (Scalar(1) - out.level) / Scalar(2);
    Scalar crit;
    if (std::isinf(out.df)) {
        boost::math::normal_distribution<Scalar> ref;
        crit = boost::math::quantile(boost::math::complement(ref, upper_tail));
    } else {
        boost::math::students_t_distribution<Scalar> ref(out.df);
        crit = boost::math::quantile(boost::math::complement(ref, upper_tail));
    }
    const Scalar se = std::sqrt(out.t);
    out.ci_lo = out.q_bar - crit * se;
    out.ci_hi = out.q_bar + crit * se;

    if (se == 0) {
        out.p_value = out.q_bar == 0 ? Scalar(1) : Scalar(0);
        return;
    }
    const Scalar stat = std::abs(out.q_bar) / se;
    if (std::isinf(out.df)) {
        boost::math::normal_distribution<Scalar> ref;
        out.p_value = Scalar(2) * boost::math::cdf(boost::math::complement(ref, stat));
    } else {
        boost::math::students_t_distribution<Scalar> ref(out.df);
        out.p_value = Scalar(2) * boost::math::cdf(boost::math::complement(ref, stat));
    }
}

}  // namespace detail

/// Nested (M models x N imputations) combining rules:
///   T = u_bar + (1 + 1/M) b + (1 - 1/N) w
/// with a t reference whose df combines the two variance components. With N = 1
/// the within-model term has weight zero and contributes nothing to T or 1/df.
template <typename Scalar>
BasicPooledInference<Scalar> pool_nested(const BasicNestedEstimateGrid<Scalar>& grid, Scalar level = Scalar(0.95)) {
    const std::size_t M = grid.m();
    const std::size_t N = grid.n();
    if (M < 2) throw DataError("pool_nested: m ≥ 2 required (got " + std::to_string(M) + ")");
    if (N < 1) throw DataError("pool_nested: n >= 1 required");
    if (grid.cells().size() != M * N) throw DataError("pool_nested: grid is not full");
    for (const auto& e : grid.cells()) detail::require_finite(e);

    const Scalar Ms = static_cast<Scalar>(M);
    const Scalar Ns = static_cast<Scalar>(N);

    BasicPooledInference<Scalar> out;
    out.m = M;
    out.n = N;
    out.level = level;
    out.model_means.assign(M, Scalar(0));

    Scalar sum_q{0};
    Scalar sum_u{0};
    for (std::size_t m = 0; m < M; ++m) {
        Scalar s{0};
        for (std::size_t n = 0; n < N; ++n) {
            s += grid(m, n).q_hat;
            sum_u += grid(m, n).u;
        }
        out.model_means[m] = s / Ns;
        sum_q += s;
    }
    out.q_bar = sum_q / (Ms * Ns);
    out.u_bar = sum_u / (Ms * Ns);

    Scalar ss_within{0};
    Scalar ss_between{0};
    for (std::size_t m = 0; m < M; ++m) {
        for (std::size_t n = 0; n < N; ++n) {
            const Scalar d = grid(m, n).q_hat - out.model_means[m];
            ss_within += d * d;
        }
        const Scalar d = out.model_means[m] - out.q_bar;
        ss_between += d * d;
    }
    out.w = N > 1 ? ss_within / (Ms * (Ns - 1)) : Scalar(0);
    out.b = ss_between / (Ms - 1);

    const Scalar between_term = (Scalar(1) + Scalar(1) / Ms) * out.b;
    const Scalar within_term = (Scalar(1) - Scalar(1) / Ns) * out.w;
    out.t = out.u_bar + between_term + within_term;

    Scalar inv_df{0};
    if (out.t > 0) {
        const Scalar rb = between_term / out.t;
        inv_df += rb * rb / (Ms - 1);
        if (N > 1) {
            const Scalar rw = within_term / out.t;
            inv_df += rw * rw / (Ms * (Ns - 1));
        }
    }
    out.df = inv_df > 0 ? Scalar(1) / inv_df : std::numeric_limits<Scalar>::infinity();

    detail::finish_interval(out);

    if (out.u_bar > 0) {
        const auto info = missing_information(out.u_bar, out.w, out.b, N);
        out.gamma = info.gamma;
        out.gamma_w = info.gamma_w;
        out.gamma_b = info.gamma_b;
        out.gamma_ratio = info.gamma_ratio;
    }
    return out;
}

/// Single-level combining rules over a flat list of estimates. The between
/// variance is reported in `b`; `gamma` is (1 + 1/m) b / T and `w` stays zero.
template <typename Scalar>
BasicPooledInference<Scalar> pool_flat(std::span<const BasicScalarEstimate<Scalar>> estimates,
                                       Scalar level = Scalar(0.95)) {
    const std::size_t m = estimates.size();
    if (m < 2) throw DataError("pool_flat: at least 2 estimates required");
    for (const auto& e : estimates) detail::require_finite(e);
    const Scalar ms = static_cast<Scalar>(m);

    BasicPooledInference<Scalar> out;
    out.m = m;
    out.n = 1;
    out.level = level;
    for (const auto& e : estimates) {
        out.q_bar += e.q_hat;
        out.u_bar += e.u;
    }
    out.q_bar /= ms;
    out.u_bar /= ms;
    Scalar ss{0};
    for (const auto& e : estimates) ss += (e.q_hat - out.q_bar) * (e.q_hat - out.q_bar);
    out.b = ss / (ms - 1);

    const Scalar between_term = (Scalar(1) + Scalar(1) / ms) * out.b;
    out.t = out.u_bar + between_term;
    if (between_term > 0) {
        const Scalar r = out.u_bar / between_term;
        out.df = (ms - 1) * (Scalar(1) + r) * (Scalar(1) + r);
    }
    detail::finish_interval(out);
    if (out.t > 0) {
        out.gamma = between_term / out.t;
        out.gamma_w = out.gamma;
    }
    return out;
}

template <typename Scalar>
BasicPooledInference<Scalar> pool_flat(const std::vector<BasicScalarEstimate<Scalar>>& estimates,
                                       Scalar level = Scalar(0.95)) {
    return pool_flat(std::span<const BasicScalarEstimate<Scalar>>(estimates), level);
}

extern template PooledInference pool_nested<double>(const NestedEstimateGrid&, double);
extern template PooledInference pool_flat<double>(std::span<const ScalarEstimate>, double);

}  // namespace mmmi
