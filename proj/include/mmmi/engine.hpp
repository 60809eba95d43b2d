#pragma once

#include "mmmi/dataset.hpp"
#include "mmmi/imputer.hpp"
#include "mmmi/mechanism.hpp"
#include "mmmi/stream.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace mmmi {

struct NestedImputationPlan {
    std::size_t m_models = 100;
    std::size_t n_per_model = 2;
    MechanismSpec mechanism;
    ImputerConfig imputer_cfg;
    // Columns whose imputations are transformed by the multiplier.
    std::vector<std::string> transform_columns;
    std::uint64_t master_seed = 0;

    void validate() const;
};

struct NestedManifest {
    std::uint64_t master_seed = 0;
    NestedImputationPlan plan;
    std::vector<double> multipliers;           // k_1..k_M
    std::vector<std::size_t> ignorable_index;  // row-major (m, n) -> ignorable imputation used
    std::size_t sign_flips = 0;

    friend bool operator==(const NestedManifest& a, const NestedManifest& b);
};

struct NestedImputation {
    // datasets[m][n]
    std::vector<std::vector<LongitudinalDataset>> datasets;
    NestedManifest manifest;
};

/// Stage one: M*N ignorable imputations. Stage two: k_m ~ p(k) per model and
/// dataset (m, n) = transform(ignorable imputation N*m + n, k_m) (0-based).
/// Streams: base/("ignorable", 0)/("imputation", j) and base/("model", m).
NestedImputation nested_impute(const LongitudinalDataset& d, const NestedImputationPlan& plan,
                               const StreamPath& base);

/// Uses StreamPath{plan.master_seed}.
NestedImputation nested_impute(const LongitudinalDataset& d, const NestedImputationPlan& plan);

/// Multipliers k_1..k_M for a plan, drawn from base/("model", m).
std::vector<double> draw_model_multipliers(const NestedImputationPlan& plan, const StreamPath& base);

}  // namespace mmmi
