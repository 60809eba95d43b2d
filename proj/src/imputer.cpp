#include "mmmi/imputer.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <map>
#include <sstream>

namespace mmmi {

namespace detail {

std::string offending_columns(const Eigen::MatrixXd& X, const std::vector<std::string>& names) {
    auto name_of = [&](Eigen::Index j) {
        return static_cast<std::size_t>(j) < names.size() ? names[static_cast<std::size_t>(j)]
                                                          : "column " + std::to_string(j);
    };
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
    qr.setThreshold(1e-10);
    const Eigen::Index rank = qr.rank();
    std::string out;
    const auto& perm = qr.colsPermutation().indices();
    for (Eigen::Index i = rank; i < X.cols(); ++i) {
        if (!out.empty()) out += ", ";
        out += name_of(perm(i));
    }
    if (out.empty()) {
        for (Eigen::Index j = 0; j < X.cols(); ++j) {
            if (!out.empty()) out += ", ";
            out += name_of(j);
        }
    }
    return "offending columns: " + out;
}

}  // namespace detail

void ImputerConfig::validate() const {
    if (sweeps < 1) throw ConfigError("imputer: sweeps must be >= 1");
    if (!(ridge_epsilon >= 0)) throw ConfigError("imputer: ridge_epsilon must be >= 0");
    if (column_order.empty()) throw ConfigError("imputer: column_order is empty");
}

namespace {

struct Resolved {
    std::vector<Eigen::Index> order;
    std::vector<Eigen::Index> predictors;
    std::optional<Eigen::Index> group;
    // Strata keyed by group value; rows in dataset order.
    std::map<double, std::vector<Eigen::Index>> strata;
};

Resolved resolve(const LongitudinalDataset& d, const ImputerConfig& cfg) {
    cfg.validate();
    Resolved r;
    for (const auto& name : cfg.column_order) {
        const auto c = d.column_index(name);
        if (d.column(c).type != ColumnType::continuous)
            throw ConfigError("imputer: column '" + name + "' is not continuous");
        if (std::find(r.order.begin(), r.order.end(), c) != r.order.end())
            throw ConfigError("imputer: column '" + name + "' listed twice");
        r.order.push_back(c);
    }
    for (const auto& name : cfg.predictors) {
        const auto c = d.column_index(name);
        if (d.mask().col(c).any())
            throw DataError("imputer: predictor column '" + name + "' has missing values");
        r.predictors.push_back(c);
    }
    if (cfg.group_by) {
        r.group = d.column_index(*cfg.group_by);
        if (d.mask().col(*r.group).any())
            throw DataError("imputer: group column '" + *cfg.group_by + "' has missing values");
    }
    for (Eigen::Index row = 0; row < d.rows(); ++row) {
        double key = r.group ? d.value(row, *r.group) : 0.0;
        if (key == 0.0) key = 0.0;  // fold -0 into +0
        r.strata[key].push_back(row);
    }
    return r;
}

std::int64_t stratum_tag(double key) { return std::bit_cast<std::int64_t>(key); }

// Design for imputing `target` within `rows`: intercept, predictors, then `conditioning`.
Eigen::MatrixXd design(const LongitudinalDataset& d, const std::vector<Eigen::Index>& rows,
                       const std::vector<Eigen::Index>& predictors, const std::vector<Eigen::Index>& conditioning) {
    const auto p = static_cast<Eigen::Index>(1 + predictors.size() + conditioning.size());
    Eigen::MatrixXd X(static_cast<Eigen::Index>(rows.size()), p);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        Eigen::Index j = 0;
        X(ii, j++) = 1.0;
        for (auto c : predictors) X(ii, j++) = d.value(rows[i], c);
        for (auto c : conditioning) X(ii, j++) = d.value(rows[i], c);
    }
    return X;
}

std::vector<std::string> design_names(const LongitudinalDataset& d, const std::vector<Eigen::Index>& predictors,
                                      const std::vector<Eigen::Index>& conditioning) {
    std::vector<std::string> names{"(intercept)"};
    for (auto c : predictors) names.push_back(d.column(c).name);
    for (auto c : conditioning) names.push_back(d.column(c).name);
    return names;
}

// Regress `target` on the design over `observed_rows` and fill `missing_rows`.
void impute_column(LongitudinalDataset& out, Eigen::Index target, const std::vector<Eigen::Index>& observed_rows,
                   const std::vector<Eigen::Index>& missing_rows, const std::vector<Eigen::Index>& predictors,
                   const std::vector<Eigen::Index>& conditioning, double ridge_epsilon, Stream& stream,
                   const std::string& stratum_label) {
    const Eigen::MatrixXd X = design(out, observed_rows, predictors, conditioning);
    Eigen::VectorXd y(static_cast<Eigen::Index>(observed_rows.size()));
    for (std::size_t i = 0; i < observed_rows.size(); ++i) y(static_cast<Eigen::Index>(i)) = out.value(observed_rows[i], target);

    PosteriorDraw<double> draw;
    try {
        draw = posterior_draw_linear(X, y, stream, ridge_epsilon, design_names(out, predictors, conditioning));
    } catch (const NumericError& e) {
        throw NumericError("imputing '" + out.column(target).name + "'" + stratum_label + ": " + e.what());
    }
    const Eigen::MatrixXd Xmis = design(out, missing_rows, predictors, conditioning);
    const Eigen::VectorXd mean = Xmis * draw.beta;
    for (std::size_t i = 0; i < missing_rows.size(); ++i) {
        const double z = stream.normal();
        out.set_value(missing_rows[i], target, mean(static_cast<Eigen::Index>(i)) + draw.sigma * z);
    }
}

std::string stratum_label(const LongitudinalDataset& d, const Resolved& r, double key) {
    if (!r.group) return "";
    std::ostringstream os;
    os << " in stratum " << d.column(*r.group).name << "=" << key;
    return os.str();
}

}  // namespace

bool is_monotone(const LongitudinalDataset& d, const std::vector<Eigen::Index>& columns) {
    for (Eigen::Index r = 0; r < d.rows(); ++r) {
        bool dropped = false;
        for (auto c : columns) {
            if (d.is_missing(r, c)) dropped = true;
            else if (dropped) return false;
        }
    }
    return true;
}

LongitudinalDataset impute_monotone(const LongitudinalDataset& d, const ImputerConfig& cfg, const StreamPath& path) {
    const Resolved r = resolve(d, cfg);
    if (!is_monotone(d, r.order))
        throw DataError("impute_monotone: missingness is not monotone in column_order; use chained imputation");

    LongitudinalDataset out = d;
    for (const auto& [key, rows] : r.strata) {
        Stream stream = derive_stream(path.child("stratum", stratum_tag(key)));
        std::vector<Eigen::Index> earlier;
        for (auto c : r.order) {
            std::vector<Eigen::Index> obs;
            std::vector<Eigen::Index> mis;
            for (auto row : rows) (d.is_missing(row, c) ? mis : obs).push_back(row);
            if (!mis.empty())
                impute_column(out, c, obs, mis, r.predictors, earlier, cfg.ridge_epsilon, stream,
                              stratum_label(d, r, key));
            earlier.push_back(c);
        }
    }
    return out;
}

LongitudinalDataset impute_chained(const LongitudinalDataset& d, const ImputerConfig& cfg, const StreamPath& path) {
    const Resolved r = resolve(d, cfg);
    LongitudinalDataset out = d;
    for (const auto& [key, rows] : r.strata) {
        const std::string label = stratum_label(d, r, key);
        std::vector<std::vector<Eigen::Index>> obs(r.order.size());
        std::vector<std::vector<Eigen::Index>> mis(r.order.size());
        for (std::size_t j = 0; j < r.order.size(); ++j) {
            const auto c = r.order[j];
            for (auto row : rows) (d.is_missing(row, c) ? mis[j] : obs[j]).push_back(row);
            if (mis[j].empty()) continue;
            if (obs[j].empty())
                throw DataError("impute_chained: column '" + d.column(c).name + "' has no observed values" + label);
            double mean = 0.0;
            for (auto row : obs[j]) mean += d.value(row, c);
            mean /= static_cast<double>(obs[j].size());
            for (auto row : mis[j]) out.set_value(row, c, mean);
        }

        Stream stream = derive_stream(path.child("stratum", stratum_tag(key)));
        for (int sweep = 0; sweep < cfg.sweeps; ++sweep) {
            for (std::size_t j = 0; j < r.order.size(); ++j) {
                if (mis[j].empty()) continue;
                std::vector<Eigen::Index> others;
                for (std::size_t k = 0; k < r.order.size(); ++k)
                    if (k != j) others.push_back(r.order[k]);
                impute_column(out, r.order[j], obs[j], mis[j], r.predictors, others, cfg.ridge_epsilon, stream, label);
            }
        }
    }
    return out;
}

LongitudinalDataset impute_once(const LongitudinalDataset& d, const ImputerConfig& cfg, const StreamPath& path) {
    switch (cfg.method) {
        case ImputeMethod::monotone: return impute_monotone(d, cfg, path);
        case ImputeMethod::chained: return impute_chained(d, cfg, path);
        case ImputeMethod::automatic: break;
    }
    std::vector<Eigen::Index> order;
    for (const auto& name : cfg.column_order) order.push_back(d.column_index(name));
    return is_monotone(d, order) ? impute_monotone(d, cfg, path) : impute_chained(d, cfg, path);
}

std::vector<LongitudinalDataset> generate_ignorable_set(const LongitudinalDataset& d, std::size_t count,
                                                        const ImputerConfig& cfg, const StreamPath& path) {
    std::vector<LongitudinalDataset> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i)
        out.push_back(impute_once(d, cfg, path.child("imputation", static_cast<std::int64_t>(i))));
    return out;
}

}  // namespace mmmi
