#include "mmmi/mechanism.hpp"

#include "mmmi/errors.hpp"

#include <algorithm>

namespace mmmi {

std::string to_string(MultiplierFamily f) {
    switch (f) {
        case MultiplierFamily::normal: return "normal";
        case MultiplierFamily::uniform: return "uniform";
        case MultiplierFamily::point: return "point";
    }
    return "unknown";
}

MultiplierFamily parse_family(const std::string& name) {
    if (name == "normal") return MultiplierFamily::normal;
    if (name == "uniform") return MultiplierFamily::uniform;
    if (name == "point") return MultiplierFamily::point;
    throw ConfigError("unknown multiplier family '" + name + "' (expected normal, uniform or point)");
}

void MultiplierDistribution::validate() const {
    if (!std::isfinite(param1) || !std::isfinite(param2))
        throw ConfigError("multiplier distribution parameters must be finite");
    switch (family) {
        case MultiplierFamily::normal:
            if (param2 < 0) throw ConfigError("normal multiplier: sd must be >= 0");
            break;
        case MultiplierFamily::uniform:
            if (param1 > param2) throw ConfigError("uniform multiplier: lower bound exceeds upper bound");
            break;
        case MultiplierFamily::point:
            break;
    }
}

bool MultiplierDistribution::degenerate() const noexcept {
    switch (family) {
        case MultiplierFamily::normal: return param2 == 0;
        case MultiplierFamily::uniform: return param1 == param2;
        case MultiplierFamily::point: return true;
    }
    return true;
}

void MechanismSpec::validate() const {
    dist.validate();
    if (clamp_range && clamp_range->first > clamp_range->second)
        throw ConfigError("mechanism clamp_range: lo exceeds hi");
}

double draw_multiplier(const MultiplierDistribution& dist, Stream& stream) {
    switch (dist.family) {
        case MultiplierFamily::normal:
            return dist.param2 == 0 ? dist.param1 : dist.param1 + dist.param2 * stream.normal();
        case MultiplierFamily::uniform:
            return dist.param1 == dist.param2 ? dist.param1 : stream.uniform(dist.param1, dist.param2);
        case MultiplierFamily::point:
            return dist.param1;
    }
    return dist.param1;
}

MultiplierDistribution elicit_multiplier(double lower, double upper, MultiplierFamily family) {
    if (!std::isfinite(lower) || !std::isfinite(upper)) throw ConfigError("elicit: bounds must be finite");
    if (lower > upper) throw ConfigError("elicit: lower bound exceeds upper bound");
    switch (family) {
        case MultiplierFamily::normal:
            return MultiplierDistribution::normal((lower + upper) / 2.0, (upper - lower) / 4.0);
        case MultiplierFamily::uniform:
            return MultiplierDistribution::uniform(lower, upper);
        case MultiplierFamily::point:
            if (lower != upper) throw ConfigError("elicit: point family needs lower == upper");
            return MultiplierDistribution::point(lower);
    }
    return MultiplierDistribution::point(lower);
}

ObservedPool ObservedPool::build(const LongitudinalDataset& d, const std::vector<Eigen::Index>& columns,
                                 std::optional<Eigen::Index> group_column) {
    ObservedPool pool;
    pool.group_column_ = group_column;
    for (Eigen::Index c : columns) {
        auto& by_stratum = pool.pools_[c];
        for (Eigen::Index r = 0; r < d.rows(); ++r) {
            if (d.is_missing(r, c)) continue;
            const double stratum = group_column ? d.value(r, *group_column) : 0.0;
            by_stratum[stratum].push_back(d.value(r, c));
        }
        for (auto& [stratum, vals] : by_stratum) {
            std::sort(vals.begin(), vals.end());
            vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
        }
    }
    return pool;
}

const std::vector<double>& ObservedPool::values(Eigen::Index column, double stratum) const {
    static const std::vector<double> empty;
    auto it = pools_.find(column);
    if (it == pools_.end()) return empty;
    auto jt = it->second.find(stratum);
    return jt == it->second.end() ? empty : jt->second;
}

double nearest_observed(const std::vector<double>& pool, double v) {
    if (pool.empty()) throw ConfigError("round_to_observed: empty observed pool");
    auto it = std::lower_bound(pool.begin(), pool.end(), v);
    if (it == pool.begin()) return *it;
    if (it == pool.end()) return pool.back();
    const double above = *it;
    const double below = *(it - 1);
    return (above - v) < (v - below) ? above : below;
}

namespace {

void check_mask(const LongitudinalDataset& completed, const MissingMask& original_mask) {
    if (original_mask.rows() != completed.rows() || original_mask.cols() != completed.cols())
        throw DataError("transform: original mask does not conform to the completed dataset");
}

double round_cell(const LongitudinalDataset& d, const ObservedPool& pool, Eigen::Index r, Eigen::Index c, double v) {
    const double stratum = pool.group_column() ? d.value(r, *pool.group_column()) : 0.0;
    const auto& vals = pool.values(c, stratum);
    if (vals.empty())
        throw ConfigError("round_to_observed: column '" + d.column(c).name + "' has no observed values in stratum");
    return nearest_observed(vals, v);
}

}  // namespace

TransformResult transform_imputations(const LongitudinalDataset& completed, const MissingMask& original_mask,
                                      double k, const MechanismSpec& spec, const ObservedPool& pool,
                                      const std::vector<Eigen::Index>& columns) {
    check_mask(completed, original_mask);
    TransformResult out{completed, 0};
    auto& d = out.data;
    for (Eigen::Index c : columns) {
        for (Eigen::Index r = 0; r < d.rows(); ++r) {
            if (!original_mask(r, c)) continue;
            if (d.is_missing(r, c))
                throw DataError("transform: cell in column '" + d.column(c).name + "' has not been imputed");
            const double y = d.value(r, c);
            double v = apply_multiplier(y, k);
            if ((y > 0 && v < 0) || (y < 0 && v > 0)) ++out.sign_flips;
            if (spec.clamp_range) v = std::clamp(v, spec.clamp_range->first, spec.clamp_range->second);
            if (spec.round_to_observed) v = round_cell(d, pool, r, c, v);
            d.set_value(r, c, v);
        }
    }
    return out;
}

LongitudinalDataset round_imputations(const LongitudinalDataset& completed, const MissingMask& original_mask,
                                      const ObservedPool& pool, const std::vector<Eigen::Index>& columns) {
    check_mask(completed, original_mask);
    LongitudinalDataset d = completed;
    for (Eigen::Index c : columns)
        for (Eigen::Index r = 0; r < d.rows(); ++r)
            if (original_mask(r, c) && !d.is_missing(r, c)) d.set_value(r, c, round_cell(d, pool, r, c, d.value(r, c)));
    return d;
}

}  // namespace mmmi
