#include "mmmi/engine.hpp"

#include "mmmi/errors.hpp"

#include <algorithm>

namespace mmmi {

void NestedImputationPlan::validate() const {
    if (m_models < 2) throw ConfigError("plan: m_models must be >= 2 for nested pooling");
    if (n_per_model < 1) throw ConfigError("plan: n_per_model must be >= 1");
    mechanism.validate();
    imputer_cfg.validate();
    for (const auto& c : transform_columns)
        if (std::find(imputer_cfg.column_order.begin(), imputer_cfg.column_order.end(), c) ==
            imputer_cfg.column_order.end())
            throw ConfigError("plan: transform column '" + c + "' is not an imputed column");
}

namespace {

bool same_plan(const NestedImputationPlan& a, const NestedImputationPlan& b) {
    return a.m_models == b.m_models && a.n_per_model == b.n_per_model && a.mechanism.dist == b.mechanism.dist &&
           a.mechanism.round_to_observed == b.mechanism.round_to_observed &&
           a.mechanism.clamp_range == b.mechanism.clamp_range && a.transform_columns == b.transform_columns &&
           a.imputer_cfg.column_order == b.imputer_cfg.column_order &&
           a.imputer_cfg.predictors == b.imputer_cfg.predictors && a.imputer_cfg.group_by == b.imputer_cfg.group_by &&
           a.imputer_cfg.sweeps == b.imputer_cfg.sweeps && a.imputer_cfg.ridge_epsilon == b.imputer_cfg.ridge_epsilon &&
           a.imputer_cfg.method == b.imputer_cfg.method && a.master_seed == b.master_seed;
}

}  // namespace

bool operator==(const NestedManifest& a, const NestedManifest& b) {
    return a.master_seed == b.master_seed && same_plan(a.plan, b.plan) && a.multipliers == b.multipliers &&
           a.ignorable_index == b.ignorable_index && a.sign_flips == b.sign_flips;
}

std::vector<double> draw_model_multipliers(const NestedImputationPlan& plan, const StreamPath& base) {
    std::vector<double> ks(plan.m_models);
    for (std::size_t m = 0; m < plan.m_models; ++m) {
        Stream s = derive_stream(base.child("model", static_cast<std::int64_t>(m)));
        ks[m] = draw_multiplier(plan.mechanism.dist, s);
    }
    return ks;
}

NestedImputation nested_impute(const LongitudinalDataset& d, const NestedImputationPlan& plan,
                               const StreamPath& base) {
    plan.validate();
    require_valid(d);

    const std::size_t M = plan.m_models;
    const std::size_t N = plan.n_per_model;

    std::vector<Eigen::Index> transform_cols;
    for (const auto& name : plan.transform_columns) transform_cols.push_back(d.column_index(name));
    std::optional<Eigen::Index> group;
    if (plan.imputer_cfg.group_by) group = d.column_index(*plan.imputer_cfg.group_by);
    const ObservedPool pool = ObservedPool::build(d, transform_cols, group);

    NestedImputation out;
    out.manifest.master_seed = base.master_seed;
    out.manifest.plan = plan;
    out.manifest.multipliers = draw_model_multipliers(plan, base);
    out.manifest.ignorable_index.resize(M * N);
    out.datasets.resize(M);

    std::vector<LongitudinalDataset> ignorable_set =
        generate_ignorable_set(d, M * N, plan.imputer_cfg, base.child("ignorable", 0));
    for (std::size_t m = 0; m < M; ++m) {
        out.datasets[m].reserve(N);
        for (std::size_t n = 0; n < N; ++n) {
            const std::size_t j = N * m + n;
            out.manifest.ignorable_index[j] = j;
            LongitudinalDataset ignorable = std::move(ignorable_set[j]);
            if (plan.mechanism.round_to_observed)
                ignorable = round_imputations(ignorable, d.mask(), pool, transform_cols);
            auto transformed =
                transform_imputations(ignorable, d.mask(), out.manifest.multipliers[m], plan.mechanism, pool,
                                      transform_cols);
            out.manifest.sign_flips += transformed.sign_flips;
            out.datasets[m].push_back(std::move(transformed.data));
        }
    }
    return out;
}

NestedImputation nested_impute(const LongitudinalDataset& d, const NestedImputationPlan& plan) {
    return nested_impute(d, plan, StreamPath{plan.master_seed, {}});
}

}  // namespace mmmi
