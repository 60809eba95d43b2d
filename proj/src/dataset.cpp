#include "mmmi/dataset.hpp"

#include "mmmi/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <map>
#include <numeric>
#include <sstream>

namespace mmmi {

LongitudinalDataset::LongitudinalDataset(std::vector<ColumnInfo> columns, Eigen::MatrixXd values,
                                         MissingMask mask)
    : columns_(std::move(columns)), values_(std::move(values)), mask_(std::move(mask)) {
    if (static_cast<Eigen::Index>(columns_.size()) != values_.cols())
        throw ConfigError("dataset: column metadata does not match value matrix width");
    if (mask_.rows() != values_.rows() || mask_.cols() != values_.cols())
        throw ConfigError("dataset: mask shape does not match value matrix");
    for (Eigen::Index r = 0; r < values_.rows(); ++r)
        for (Eigen::Index c = 0; c < values_.cols(); ++c)
            if (mask_(r, c)) values_(r, c) = kMissing;
}

LongitudinalDataset::LongitudinalDataset(std::vector<ColumnInfo> columns, Eigen::MatrixXd values)
    : LongitudinalDataset(std::move(columns), values,
                          MissingMask::Constant(values.rows(), values.cols(), false)) {}

std::optional<Eigen::Index> LongitudinalDataset::find_column(const std::string& name) const {
    for (std::size_t i = 0; i < columns_.size(); ++i)
        if (columns_[i].name == name) return static_cast<Eigen::Index>(i);
    return std::nullopt;
}

Eigen::Index LongitudinalDataset::column_index(const std::string& name) const {
    if (auto c = find_column(name)) return *c;
    throw ConfigError("unknown column '" + name + "'");
}

std::optional<Eigen::Index> LongitudinalDataset::subject_id_column() const {
    for (std::size_t i = 0; i < columns_.size(); ++i)
        if (columns_[i].role == ColumnRole::subject_id) return static_cast<Eigen::Index>(i);
    return std::nullopt;
}

std::optional<Eigen::Index> LongitudinalDataset::group_column() const {
    for (std::size_t i = 0; i < columns_.size(); ++i)
        if (columns_[i].role == ColumnRole::group) return static_cast<Eigen::Index>(i);
    return std::nullopt;
}

std::vector<Eigen::Index> LongitudinalDataset::outcome_columns() const {
    std::vector<Eigen::Index> out;
    for (std::size_t i = 0; i < columns_.size(); ++i)
        if (columns_[i].role == ColumnRole::outcome) out.push_back(static_cast<Eigen::Index>(i));
    std::stable_sort(out.begin(), out.end(), [&](Eigen::Index a, Eigen::Index b) {
        return columns_[static_cast<std::size_t>(a)].time < columns_[static_cast<std::size_t>(b)].time;
    });
    return out;
}

std::vector<double> LongitudinalDataset::observed(Eigen::Index c) const {
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(rows()));
    for (Eigen::Index r = 0; r < rows(); ++r)
        if (!mask_(r, c)) out.push_back(values_(r, c));
    return out;
}

namespace {

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

}  // namespace

ValidationReport validate_dataset(const LongitudinalDataset& d) {
    ValidationReport report;
    const auto& mask = d.mask();
    const auto& values = d.values();

    std::map<std::string, int> seen_names;
    for (const auto& col : d.columns())
        if (++seen_names[col.name] == 2) report.issues.push_back("duplicate column name '" + col.name + "'");

    for (Eigen::Index c = 0; c < d.cols(); ++c) {
        const auto& col = d.column(c);
        for (Eigen::Index r = 0; r < d.rows(); ++r) {
            if (mask(r, c) && !std::isnan(values(r, c))) {
                report.issues.push_back("column '" + col.name + "' row " + std::to_string(r) +
                                        ": missing cell does not hold the sentinel");
            } else if (!mask(r, c) && !std::isfinite(values(r, c))) {
                report.issues.push_back("column '" + col.name + "' row " + std::to_string(r) +
                                        ": observed value is not finite");
            }
        }
    }

    int id_columns = 0;
    int group_columns = 0;
    for (Eigen::Index c = 0; c < d.cols(); ++c) {
        const auto& col = d.column(c);
        if (col.role == ColumnRole::subject_id) {
            ++id_columns;
            std::map<double, int> counts;
            for (Eigen::Index r = 0; r < d.rows(); ++r) {
                if (mask(r, c)) {
                    report.issues.push_back("subject-id column '" + col.name + "' has a missing entry at row " +
                                            std::to_string(r));
                    continue;
                }
                if (++counts[values(r, c)] == 2)
                    report.issues.push_back("subject-id column '" + col.name + "' has duplicated id " +
                                            fmt(values(r, c)));
            }
        } else if (col.role == ColumnRole::group) {
            ++group_columns;
            const auto n_missing = mask.col(c).count();
            if (n_missing > 0)
                report.issues.push_back("group column '" + col.name + "' has " + std::to_string(n_missing) +
                                        " missing entries");
        }
    }
    if (id_columns > 1) report.issues.push_back("more than one subject-id column");
    if (group_columns > 1) report.issues.push_back("more than one group column");
    return report;
}

void require_valid(const LongitudinalDataset& d) {
    auto report = validate_dataset(d);
    if (report.ok()) return;
    std::string msg = "invalid dataset:";
    for (const auto& issue : report.issues) msg += "\n  " + issue;
    throw DataError(msg);
}

bool identical(const LongitudinalDataset& a, const LongitudinalDataset& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
    for (Eigen::Index c = 0; c < a.cols(); ++c)
        if (a.column(c).name != b.column(c).name) return false;
    if ((a.mask() != b.mask()).any()) return false;
    for (Eigen::Index c = 0; c < a.cols(); ++c)
        for (Eigen::Index r = 0; r < a.rows(); ++r) {
            if (a.is_missing(r, c)) continue;
            const double x = a.value(r, c);
            const double y = b.value(r, c);
            if (std::memcmp(&x, &y, sizeof(double)) != 0) return false;
        }
    return true;
}

}  // namespace mmmi
