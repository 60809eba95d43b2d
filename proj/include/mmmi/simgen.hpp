#pragma once

#include "mmmi/dataset.hpp"
#include "mmmi/stream.hpp"

#include <Eigen/Dense>

#include <array>
#include <vector>

namespace mmmi {

/// Pattern-mixture trial generator:
///   y_ij = b0 + b1 t_j + b2 Tx_i + b3 Tx_i t_j + b4 Drop_i t_j + v0_i + v1_i t_j + e_ij
/// with (v0, v1) ~ N(0, re_cov) and Var(e_ij) depending on Drop_i.
struct TrialGenParams {
    std::array<double, 5> beta{25.0, -3.0, 0.0, -1.0, 1.5};
    Eigen::Matrix2d re_cov = (Eigen::Matrix2d() << 4.0, -0.1, -0.1, 1.0).finished();
    double resid_var_nondrop = 9.0;
    double resid_var_drop = 16.0;
    int n_per_arm = 150;
    int n_dropouts_per_arm = 100;
    int timepoints = 5;
    // Conditional dropout probability at timepoints 1..timepoints-1 among
    // dropout-group members still in the study.
    std::vector<double> drop_hazard{0.25, 0.50, 0.75, 1.0};

    void validate() const;
};

struct GeneratedTrial {
    LongitudinalDataset data;
    // Drop_i per subject row.
    std::vector<bool> dropout;
};

/// Columns: id (subject id), tx (group, 0/1), y_t0..y_t{T-1}. Rows are arm 0
/// then arm 1; the first n_dropouts_per_arm subjects of each arm form the
/// dropout group.
GeneratedTrial generate_complete(const TrialGenParams& params, Stream& stream);

/// Monotone dropout: each dropout-group subject leaves at the first timepoint
/// whose hazard draw succeeds, and all later outcomes are masked.
LongitudinalDataset apply_dropout(const LongitudinalDataset& d, const std::vector<bool>& dropout,
                                  const std::vector<double>& drop_hazard, Stream& stream);

/// Marginal treatment-arm slope: b1 + b3 + (dropouts / n) b4.
double true_target(const TrialGenParams& params);

/// Expected marginal missing fraction at each timepoint (0 at baseline).
std::vector<double> expected_missing_fractions(const TrialGenParams& params);

}  // namespace mmmi
