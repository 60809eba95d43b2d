#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace mmmi {

enum class ColumnRole { outcome, covariate, group, subject_id };
enum class ColumnType { continuous, binary, nominal };

struct ColumnInfo {
    std::string name;
    ColumnRole role = ColumnRole::covariate;
    ColumnType type = ColumnType::continuous;
    // Time code for outcome columns; unused otherwise.
    double time = 0.0;
};

using MissingMask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

/// Value stored in masked cells. Never read by analysis code.
inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

/// Wide-format table: one row per subject, one column per variable, with a
/// missingness mask (true = missing).
class LongitudinalDataset {
public:
    LongitudinalDataset() = default;
    LongitudinalDataset(std::vector<ColumnInfo> columns, Eigen::MatrixXd values, MissingMask mask);

    /// Fully observed dataset.
    LongitudinalDataset(std::vector<ColumnInfo> columns, Eigen::MatrixXd values);

    Eigen::Index rows() const noexcept { return values_.rows(); }
    Eigen::Index cols() const noexcept { return values_.cols(); }

    const std::vector<ColumnInfo>& columns() const noexcept { return columns_; }
    const ColumnInfo& column(Eigen::Index c) const { return columns_.at(static_cast<std::size_t>(c)); }

    std::optional<Eigen::Index> find_column(const std::string& name) const;
    /// Throws ConfigError naming the column when absent.
    Eigen::Index column_index(const std::string& name) const;

    std::optional<Eigen::Index> subject_id_column() const;
    std::optional<Eigen::Index> group_column() const;
    /// Outcome columns ordered by time code.
    std::vector<Eigen::Index> outcome_columns() const;

    bool is_missing(Eigen::Index r, Eigen::Index c) const { return mask_(r, c); }
    double value(Eigen::Index r, Eigen::Index c) const { return values_(r, c); }

    void set_value(Eigen::Index r, Eigen::Index c, double v) {
        values_(r, c) = v;
        mask_(r, c) = false;
    }
    void set_missing(Eigen::Index r, Eigen::Index c) {
        values_(r, c) = kMissing;
        mask_(r, c) = true;
    }

    const Eigen::MatrixXd& values() const noexcept { return values_; }
    const MissingMask& mask() const noexcept { return mask_; }

    std::size_t missing_count() const { return static_cast<std::size_t>(mask_.count()); }

    /// Observed values of one column in row order.
    std::vector<double> observed(Eigen::Index c) const;

private:
    std::vector<ColumnInfo> columns_;
    Eigen::MatrixXd values_;
    MissingMask mask_;
};

struct ValidationReport {
    std::vector<std::string> issues;
    bool ok() const noexcept { return issues.empty(); }
};

ValidationReport validate_dataset(const LongitudinalDataset& d);

/// Throws DataError listing every issue when the dataset is invalid.
void require_valid(const LongitudinalDataset& d);

/// True if `a` and `b` agree in layout, mask, and every observed value (bitwise).
bool identical(const LongitudinalDataset& a, const LongitudinalDataset& b);

}  // namespace mmmi
