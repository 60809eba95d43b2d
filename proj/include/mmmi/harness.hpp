#pragma once

#include "mmmi/engine.hpp"
#include "mmmi/lmm.hpp"
#include "mmmi/pooling.hpp"
#include "mmmi/simgen.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace mmmi {

struct ScenarioConfig {
    std::string id;            // e.g. "mar-none"
    std::string ignorability;  // e.g. "MAR"
    std::string uncertainty;   // e.g. "None"
    TrialGenParams trial;
    NestedImputationPlan plan;
    LmmSpec lmm;
    std::size_t replications = 1000;
    // Empty: treatment-arm slope of the fitted model.
    Eigen::VectorXd weights;
    double truth = -3.0;
    double level = 0.95;
    std::uint64_t seed = 0;

    void validate() const;
};

struct ReplicationOutcome {
    std::size_t rep = 0;
    std::optional<PooledInference> pooled;
    bool covered = false;
    std::string error;  // non-empty when the replication failed
};

struct ScenarioMetrics {
    std::string id;
    std::string ignorability;
    std::string uncertainty;
    MultiplierDistribution dist;
    double truth = 0;
    double mean_estimate = 0;
    double percent_bias = 0;
    double rmse = 0;
    double coverage = 0;
    double ci_width = 0;
    double mean_gamma = 0;
    double mean_gamma_w = 0;
    double mean_gamma_b = 0;
    double mean_ratio = 0;
    std::size_t replications_completed = 0;
    std::size_t replications_failed = 0;
    // Set when more than 5% of replications failed.
    std::string error_summary;
};

/// Streams for replication r: seed/("rep", r)/{("generate"), ("dropout"), ("impute")}.
ReplicationOutcome run_replication(const ScenarioConfig& cfg, std::size_t rep);

/// Reduces replication outcomes in replication order.
/// percent_bias = 100 (mean estimate - truth) / truth.
ScenarioMetrics summarize(const ScenarioConfig& cfg, const std::vector<ReplicationOutcome>& outcomes);

ScenarioMetrics run_scenario(const ScenarioConfig& cfg, unsigned threads = 1);

std::vector<ScenarioMetrics> run_grid(const std::vector<ScenarioConfig>& grid, unsigned threads = 1);

// Ignorability x uncertainty grid: means 1.0 / 1.3 / 1.7 / 0.8 crossed with
// normal sds 0 / 0.1 / 0.3 / 0.5.
struct ScenarioCell {
    std::string id;
    std::string ignorability;
    std::string uncertainty;
    double mean;
    double sd;
};

const std::vector<ScenarioCell>& table1_cells();

/// Simulation defaults: per-arm monotone imputation of all outcomes, every
/// outcome transformed, M = 100, N = 2.
ScenarioConfig make_scenario(const ScenarioCell& cell, const TrialGenParams& trial, std::size_t replications,
                             std::uint64_t seed, std::size_t m_models = 100, std::size_t n_per_model = 2);

/// Looks up cells by id ("mar-none", ...); "table1" expands to all 16.
std::vector<ScenarioCell> select_cells(const std::vector<std::string>& ids);

}  // namespace mmmi
