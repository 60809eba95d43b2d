#include "mmmi/engine.hpp"
#include "mmmi/errors.hpp"
#include "mmmi/simgen.hpp"

#include <doctest.h>

#include <set>

using namespace mmmi;

namespace {

LongitudinalDataset trial(std::uint64_t seed) {
    TrialGenParams p;
    Stream gs = derive_stream(StreamPath{seed}.child("generate", 0));
    Stream ds = derive_stream(StreamPath{seed}.child("dropout", 0));
    const auto g = generate_complete(p, gs);
    return apply_dropout(g.data, g.dropout, p.drop_hazard, ds);
}

NestedImputationPlan plan(std::size_t M, std::size_t N, MultiplierDistribution dist) {
    NestedImputationPlan p;
    p.m_models = M;
    p.n_per_model = N;
    p.mechanism.dist = dist;
    p.imputer_cfg.group_by = "tx";
    for (int t = 0; t < 5; ++t) p.imputer_cfg.column_order.push_back("y_t" + std::to_string(t));
    p.transform_columns = p.imputer_cfg.column_order;
    p.master_seed = 99;
    return p;
}

}  // namespace

TEST_CASE("identity mechanism returns the ignorable imputations") {
    const auto d = trial(1);
    const auto pl = plan(2, 1, MultiplierDistribution::normal(1.0, 0.0));
    const StreamPath base{pl.master_seed};
    const auto nested = nested_impute(d, pl, base);
    const auto ignorable = generate_ignorable_set(d, 2, pl.imputer_cfg, base.child("ignorable", 0));
    REQUIRE(nested.datasets.size() == 2);
    CHECK(identical(nested.datasets[0][0], ignorable[0]));
    CHECK(identical(nested.datasets[1][0], ignorable[1]));
    CHECK(nested.manifest.multipliers == std::vector<double>{1.0, 1.0});
}

TEST_CASE("models share their multiplier across the N imputations") {
    const auto d = trial(2);
    const auto pl = plan(100, 2, MultiplierDistribution::normal(1.3, 0.5));
    const StreamPath base{pl.master_seed};
    const auto nested = nested_impute(d, pl, base);
    const auto ignorable = generate_ignorable_set(d, 200, pl.imputer_cfg, base.child("ignorable", 0));
    REQUIRE(nested.datasets.size() == 100);
    REQUIRE(nested.manifest.multipliers.size() == 100);
    CHECK(std::set<double>(nested.manifest.multipliers.begin(), nested.manifest.multipliers.end()).size() > 90);

    const Eigen::Index y4 = d.column_index("y_t4");
    for (std::size_t m = 0; m < 100; ++m) {
        REQUIRE(nested.datasets[m].size() == 2);
        const double k = nested.manifest.multipliers[m];
        for (std::size_t n = 0; n < 2; ++n) {
            const std::size_t j = 2 * m + n;
            CHECK(nested.manifest.ignorable_index[j] == j);
            // Every masked cell is the block-assigned ignorable value times k_m.
            for (Eigen::Index r = 0; r < d.rows(); ++r) {
                if (!d.is_missing(r, y4)) continue;
                REQUIRE(nested.datasets[m][n].value(r, y4) == apply_multiplier(ignorable[j].value(r, y4), k));
            }
        }
    }
    CHECK(nested.manifest.multipliers == draw_model_multipliers(pl, base));
}

TEST_CASE("nested imputation is deterministic") {
    const auto d = trial(3);
    const auto pl = plan(5, 2, MultiplierDistribution::uniform(0.8, 1.6));
    const auto a = nested_impute(d, pl);
    const auto b = nested_impute(d, pl);
    CHECK(a.manifest == b.manifest);
    for (std::size_t m = 0; m < 5; ++m)
        for (std::size_t n = 0; n < 2; ++n) CHECK(identical(a.datasets[m][n], b.datasets[m][n]));
    auto other = pl;
    other.master_seed = 100;
    CHECK_FALSE(nested_impute(d, other).manifest == a.manifest);
}

TEST_CASE("rounded nested imputations stay on the observed support") {
    const auto d = trial(4);
    auto pl = plan(2, 2, MultiplierDistribution::normal(1.2, 0.1));
    pl.mechanism.round_to_observed = true;
    const auto nested = nested_impute(d, pl);
    const Eigen::Index y3 = d.column_index("y_t3");
    for (const auto& row : nested.datasets)
        for (const auto& imp : row)
            for (Eigen::Index r = 0; r < d.rows(); ++r) {
                if (!d.is_missing(r, y3)) continue;
                bool found = false;
                for (Eigen::Index s = 0; s < d.rows() && !found; ++s)
                    found = !d.is_missing(s, y3) && d.value(s, 1) == d.value(r, 1) && d.value(s, y3) == imp.value(r, y3);
                REQUIRE(found);
            }
}

TEST_CASE("plan validation") {
    auto pl = plan(1, 2, MultiplierDistribution::normal(1, 0));
    CHECK_THROWS_AS(pl.validate(), ConfigError);
    pl = plan(2, 0, MultiplierDistribution::normal(1, 0));
    CHECK_THROWS_AS(pl.validate(), ConfigError);
    pl = plan(2, 1, MultiplierDistribution::normal(1, 0));
    pl.transform_columns.push_back("income");
    CHECK_THROWS_AS(pl.validate(), ConfigError);
    CHECK_THROWS_AS(nested_impute(trial(5), pl), ConfigError);
}
