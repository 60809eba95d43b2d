#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace mmmi {

enum class MultiplierFamily { normal, uniform, point };

/// Distribution of the multiplier k. normal: (mean, sd); uniform: (lower, upper);
/// point: (value, unused).
struct MultiplierDistribution {
    MultiplierFamily family = MultiplierFamily::point;
    double param1 = 1.0;
    double param2 = 0.0;

    static MultiplierDistribution normal(double mean, double sd) { return {MultiplierFamily::normal, mean, sd}; }
    static MultiplierDistribution uniform(double lo, double hi) { return {MultiplierFamily::uniform, lo, hi}; }
    static MultiplierDistribution point(double value) { return {MultiplierFamily::point, value, 0.0}; }

    /// Throws ConfigError when the parameters violate the family's constraints.
    void validate() const;
    bool degenerate() const noexcept;

    friend bool operator==(const MultiplierDistribution&, const MultiplierDistribution&) = default;
};

std::string to_string(MultiplierFamily f);
MultiplierFamily parse_family(const std::string& name);

/// Complete-data point estimate and its variance.
template <typename Scalar = double>
struct BasicScalarEstimate {
    Scalar q_hat{0};
    Scalar u{0};
};

using ScalarEstimate = BasicScalarEstimate<double>;

/// M models x N imputations of estimates, row-major by model.
template <typename Scalar = double>
class BasicNestedEstimateGrid {
public:
    BasicNestedEstimateGrid() = default;
    BasicNestedEstimateGrid(std::size_t m, std::size_t n) : m_(m), n_(n), cells_(m * n) {}

    std::size_t m() const noexcept { return m_; }
    std::size_t n() const noexcept { return n_; }

    BasicScalarEstimate<Scalar>& operator()(std::size_t model, std::size_t rep) { return cells_[model * n_ + rep]; }
    const BasicScalarEstimate<Scalar>& operator()(std::size_t model, std::size_t rep) const {
        return cells_[model * n_ + rep];
    }

    const std::vector<BasicScalarEstimate<Scalar>>& cells() const noexcept { return cells_; }

private:
    std::size_t m_ = 0;
    std::size_t n_ = 0;
    std::vector<BasicScalarEstimate<Scalar>> cells_;
};

using NestedEstimateGrid = BasicNestedEstimateGrid<double>;

}  // namespace mmmi
