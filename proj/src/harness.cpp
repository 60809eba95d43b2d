#include "mmmi/harness.hpp"

#include "mmmi/errors.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

namespace mmmi {

void ScenarioConfig::validate() const {
    if (replications < 1) throw ConfigError("scenario: replications must be >= 1");
    if (!std::isfinite(truth)) throw ConfigError("scenario: truth must be finite");
    if (!(level > 0 && level < 1)) throw ConfigError("scenario: level must lie in (0, 1)");
    trial.validate();
    plan.validate();
}

ReplicationOutcome run_replication(const ScenarioConfig& cfg, std::size_t rep) {
    ReplicationOutcome out;
    out.rep = rep;
    try {
        const StreamPath base = StreamPath{cfg.seed, {}}.child("rep", static_cast<std::int64_t>(rep));
        Stream gen = derive_stream(base.child("generate", 0));
        GeneratedTrial trial = generate_complete(cfg.trial, gen);
        Stream drop = derive_stream(base.child("dropout", 0));
        const LongitudinalDataset observed = apply_dropout(trial.data, trial.dropout, cfg.trial.drop_hazard, drop);

        const NestedImputation nested = nested_impute(observed, cfg.plan, base.child("impute", 0));

        const std::size_t M = cfg.plan.m_models;
        const std::size_t N = cfg.plan.n_per_model;
        NestedEstimateGrid grid(M, N);
        Eigen::VectorXd weights = cfg.weights;
        for (std::size_t m = 0; m < M; ++m) {
            for (std::size_t n = 0; n < N; ++n) {
                const LmmFit fit = fit_lmm_ml(build_long(nested.datasets[m][n], cfg.lmm), cfg.lmm);
                if (weights.size() == 0) weights = estimand_weights(fit.fixed_names, EstimandKind::treatment_slope);
                grid(m, n) = scalar_estimand(fit, weights);
            }
        }
        PooledInference pooled = pool_nested(grid, cfg.level);
        out.covered = pooled.ci_lo <= cfg.truth && cfg.truth <= pooled.ci_hi;
        out.pooled = std::move(pooled);
    } catch (const std::exception& e) {
        out.error = e.what();
    }
    return out;
}

ScenarioMetrics summarize(const ScenarioConfig& cfg, const std::vector<ReplicationOutcome>& outcomes) {
    ScenarioMetrics s;
    s.id = cfg.id;
    s.ignorability = cfg.ignorability;
    s.uncertainty = cfg.uncertainty;
    s.dist = cfg.plan.mechanism.dist;
    s.truth = cfg.truth;

    double sum_est = 0, sum_sq = 0, sum_cov = 0, sum_width = 0;
    double sum_g = 0, sum_gw = 0, sum_gb = 0, sum_ratio = 0;
    std::string first_error;
    for (const auto& o : outcomes) {
        if (!o.pooled) {
            ++s.replications_failed;
            if (first_error.empty()) first_error = "rep " + std::to_string(o.rep) + ": " + o.error;
            continue;
        }
        const auto& p = *o.pooled;
        ++s.replications_completed;
        sum_est += p.q_bar;
        sum_sq += (p.q_bar - cfg.truth) * (p.q_bar - cfg.truth);
        sum_cov += o.covered ? 1.0 : 0.0;
        sum_width += p.ci_width();
        sum_g += p.gamma;
        sum_gw += p.gamma_w;
        sum_gb += p.gamma_b;
        sum_ratio += p.gamma_ratio;
    }
    if (s.replications_completed > 0) {
        const double r = static_cast<double>(s.replications_completed);
        s.mean_estimate = sum_est / r;
        s.percent_bias = 100.0 * (s.mean_estimate - cfg.truth) / cfg.truth;
        s.rmse = std::sqrt(sum_sq / r);
        s.coverage = sum_cov / r;
        s.ci_width = sum_width / r;
        s.mean_gamma = sum_g / r;
        s.mean_gamma_w = sum_gw / r;
        s.mean_gamma_b = sum_gb / r;
        s.mean_ratio = sum_ratio / r;
    }
    const double total = static_cast<double>(outcomes.size());
    if (total > 0 && static_cast<double>(s.replications_failed) > 0.05 * total)
        s.error_summary = std::to_string(s.replications_failed) + " of " + std::to_string(outcomes.size()) +
                          " replications failed; first: " + first_error;
    return s;
}

ScenarioMetrics run_scenario(const ScenarioConfig& cfg, unsigned threads) {
    cfg.validate();
    std::vector<ReplicationOutcome> outcomes(cfg.replications);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t r = next++; r < cfg.replications; r = next++) outcomes[r] = run_replication(cfg, r);
    };
    const unsigned n_workers = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(cfg.replications)));
    if (n_workers == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned i = 0; i < n_workers; ++i) pool.emplace_back(worker);
    }
    return summarize(cfg, outcomes);
}

std::vector<ScenarioMetrics> run_grid(const std::vector<ScenarioConfig>& grid, unsigned threads) {
    std::vector<ScenarioMetrics> rows;
    rows.reserve(grid.size());
    for (const auto& cfg : grid) rows.push_back(run_scenario(cfg, threads));
    return rows;
}

const std::vector<ScenarioCell>& table1_cells() {
    static const std::vector<ScenarioCell> cells = [] {
        struct Level {
            const char* key;
            const char* label;
            double value;
        };
        const Level ignorability[] = {{"mar", "MAR", 1.0}, {"weak", "Weak NMAR", 1.3},
                                      {"strong", "Strong NMAR", 1.7}, {"misspec", "Misspecified NMAR", 0.8}};
        const Level uncertainty[] = {{"none", "None", 0.0}, {"mild", "Mild", 0.1},
                                     {"moderate", "Moderate", 0.3}, {"ample", "Ample", 0.5}};
        std::vector<ScenarioCell> out;
        for (const auto& ig : ignorability)
            for (const auto& un : uncertainty)
                out.push_back({std::string(ig.key) + "-" + un.key, ig.label, un.label, ig.value, un.value});
        return out;
    }();
    return cells;
}

ScenarioConfig make_scenario(const ScenarioCell& cell, const TrialGenParams& trial, std::size_t replications,
                             std::uint64_t seed, std::size_t m_models, std::size_t n_per_model) {
    ScenarioConfig cfg;
    cfg.id = cell.id;
    cfg.ignorability = cell.ignorability;
    cfg.uncertainty = cell.uncertainty;
    cfg.trial = trial;
    cfg.replications = replications;
    cfg.seed = seed;
    cfg.truth = true_target(trial);

    cfg.plan.m_models = m_models;
    cfg.plan.n_per_model = n_per_model;
    cfg.plan.master_seed = seed;
    cfg.plan.mechanism.dist = MultiplierDistribution::normal(cell.mean, cell.sd);
    cfg.plan.imputer_cfg.group_by = "tx";
    cfg.plan.imputer_cfg.method = ImputeMethod::monotone;
    for (int t = 0; t < trial.timepoints; ++t) {
        const std::string name = "y_t" + std::to_string(t);
        cfg.plan.imputer_cfg.column_order.push_back(name);
        cfg.plan.transform_columns.push_back(name);
    }
    return cfg;
}

std::vector<ScenarioCell> select_cells(const std::vector<std::string>& ids) {
    std::vector<ScenarioCell> out;
    for (const auto& id : ids) {
        if (id == "table1") {
            const auto& all = table1_cells();
            out.insert(out.end(), all.begin(), all.end());
            continue;
        }
        const auto& all = table1_cells();
        auto it = std::find_if(all.begin(), all.end(), [&](const ScenarioCell& c) { return c.id == id; });
        if (it == all.end()) throw ConfigError("unknown scenario '" + id + "'");
        out.push_back(*it);
    }
    return out;
}

}  // namespace mmmi
