#pragma once

#include "mmmi/dataset.hpp"
#include "mmmi/stream.hpp"
#include "mmmi/types.hpp"

#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <utility>
#include <vector>

namespace mmmi {

struct MechanismSpec {
    MultiplierDistribution dist = MultiplierDistribution::normal(1.0, 0.0);
    bool round_to_observed = false;
    std::optional<std::pair<double, double>> clamp_range;

    void validate() const;
};

/// Nonignorable value from an ignorable one: (k - 1)|y| + y. Reduces to k*y for
/// y >= 0 and is nondecreasing in k for every y.
template <typename Scalar>
constexpr Scalar apply_multiplier(Scalar y, Scalar k) {
    using std::abs;
    return (k - Scalar(1)) * abs(y) + y;
}

double draw_multiplier(const MultiplierDistribution& dist, Stream& stream);

/// Normal family: mean = midpoint, sd = (upper - lower) / 4, treating the bounds
/// as a 95% interval. Uniform family: the bounds are the support.
MultiplierDistribution elicit_multiplier(double lower, double upper, MultiplierFamily family);

/// Sorted observed values per column and per stratum, used when rounding
/// transformed imputations back onto observed support.
class ObservedPool {
public:
    ObservedPool() = default;

    /// Pools the observed cells of `columns`, split by the values of
    /// `group_column` when given.
    static ObservedPool build(const LongitudinalDataset& d, const std::vector<Eigen::Index>& columns,
                              std::optional<Eigen::Index> group_column);

    /// Empty when the column/stratum has no observed values.
    const std::vector<double>& values(Eigen::Index column, double stratum) const;
    std::optional<Eigen::Index> group_column() const noexcept { return group_column_; }

private:
    std::optional<Eigen::Index> group_column_;
    std::map<Eigen::Index, std::map<double, std::vector<double>>> pools_;
};

/// Nearest value in a sorted pool; ties go to the smaller value.
double nearest_observed(const std::vector<double>& sorted_pool, double v);

struct TransformResult {
    LongitudinalDataset data;
    // Cells whose sign changed under the multiplier (possible for k > 2, y < 0).
    std::size_t sign_flips = 0;
};

/// Applies the multiplier to every cell of `columns` that was missing in
/// `original_mask`, then the optional clamp and round-to-observed steps.
/// Cells observed in `original_mask` are never touched.
TransformResult transform_imputations(const LongitudinalDataset& completed, const MissingMask& original_mask,
                                      double k, const MechanismSpec& spec, const ObservedPool& pool,
                                      const std::vector<Eigen::Index>& columns);

/// Round-to-observed only (no multiplier), for ignorable imputations.
LongitudinalDataset round_imputations(const LongitudinalDataset& completed, const MissingMask& original_mask,
                                      const ObservedPool& pool, const std::vector<Eigen::Index>& columns);

}  // namespace mmmi
