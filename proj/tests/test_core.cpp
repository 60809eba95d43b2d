#include "test_support.hpp"

#include "mmmi/dataset.hpp"
#include "mmmi/errors.hpp"
#include "mmmi/stream.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstring>

using namespace mmmi;
using mmmi::testing::NA;
using mmmi::testing::wide;

TEST_CASE("philox known answers") {
    // Reference vectors for Philox4x32-10.
    const auto zero = Philox4x32::block({0u, 0u, 0u, 0u}, 0ull);
    CHECK(zero[0] == 0x6627e8d5u);
    CHECK(zero[1] == 0xe169c58du);
    CHECK(zero[2] == 0xbc57ac4cu);
    CHECK(zero[3] == 0x9b00dbd8u);

    const auto ones = Philox4x32::block({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, ~0ull);
    CHECK(ones[0] == 0x408f276du);
    CHECK(ones[1] == 0x41c83b0eu);
    CHECK(ones[2] == 0xa20bc7c6u);
    CHECK(ones[3] == 0x6d5451fdu);

    const auto pi = Philox4x32::block({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u},
                                      (0x299f31d0ull << 32) | 0xa4093822ull);
    CHECK(pi[0] == 0xd16cfe09u);
    CHECK(pi[1] == 0x94fdccebu);
    CHECK(pi[2] == 0x5001e420u);
    CHECK(pi[3] == 0x24126ea1u);
}

TEST_CASE("philox engine walks the counter") {
    Philox4x32 eng(0);
    CHECK(eng() == 0xe169c58d6627e8d5ull);
    CHECK(eng() == 0x9b00dbd8bc57ac4cull);
    CHECK(eng.block_counter() == 1);
    eng();
    CHECK(eng.block_counter() == 2);
}

TEST_CASE("same path gives identical draws") {
    const StreamPath p = StreamPath{42}.child("rep", 3).child("impute", 0);
    Stream a = derive_stream(p);
    Stream b = derive_stream(p);
    for (int i = 0; i < 1000; ++i) {
        const double x = a.normal();
        const double y = b.normal();
        REQUIRE(std::memcmp(&x, &y, sizeof x) == 0);
    }
}

TEST_CASE("sibling streams are uncorrelated") {
    const StreamPath base = StreamPath{2024}.child("rep", 0);
    Stream a = derive_stream(base.child("x", 0));
    Stream b = derive_stream(base.child("x", 1));
    const int n = 1'000'000;
    double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
    for (int i = 0; i < n; ++i) {
        const double x = a.normal();
        const double y = b.normal();
        sa += x;
        sb += y;
        saa += x * x;
        sbb += y * y;
        sab += x * y;
    }
    const double cov = sab / n - (sa / n) * (sb / n);
    const double corr = cov / std::sqrt((saa / n - (sa / n) * (sa / n)) * (sbb / n - (sb / n) * (sb / n)));
    CHECK(std::abs(corr) < 0.01);
}

TEST_CASE("stream keys") {
    const StreamPath empty{7};
    CHECK(stream_key(empty) == stream_key(StreamPath{7}));
    CHECK(stream_key(empty) != stream_key(StreamPath{8}));
    CHECK(stream_key(empty.child("a", 0)) != stream_key(empty.child("a", 1)));
    CHECK(stream_key(empty.child("a", 0)) != stream_key(empty.child("b", 0)));
    CHECK(stream_key(empty.child("a", 0).child("b", 1)) != stream_key(empty.child("b", 1).child("a", 0)));
    Stream s = derive_stream(empty);
    const double u = s.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
}

TEST_CASE("uniform and chi-squared moments") {
    Stream s = derive_stream(StreamPath{11});
    double su = 0, sc = 0;
    const int n = 200'000;
    for (int i = 0; i < n; ++i) {
        su += s.uniform(2.0, 4.0);
        sc += s.chi_squared(5.0);
    }
    CHECK(su / n == doctest::Approx(3.0).epsilon(0.005));
    CHECK(sc / n == doctest::Approx(5.0).epsilon(0.01));
}

TEST_CASE("valid dataset has an empty report") {
    const auto d = wide({{1, 0, 10, 11}, {2, 1, 12, NA}});
    CHECK(validate_dataset(d).ok());
    CHECK_NOTHROW(require_valid(d));
    CHECK(d.missing_count() == 1);
    CHECK(d.outcome_columns() == std::vector<Eigen::Index>{2, 3});
    CHECK(d.subject_id_column() == 0);
    CHECK(d.group_column() == 1);
    CHECK(d.observed(3) == std::vector<double>{11});
}

TEST_CASE("duplicate subject ids are reported with the id") {
    const auto d = wide({{1, 0, 10}, {7, 1, 12}, {7, 1, 13}});
    const auto report = validate_dataset(d);
    REQUIRE_FALSE(report.ok());
    const bool named = std::any_of(report.issues.begin(), report.issues.end(), [](const std::string& s) {
        return s.find("id") != std::string::npos && s.find('7') != std::string::npos;
    });
    CHECK(named);
    CHECK_THROWS_AS(require_valid(d), DataError);
}

TEST_CASE("missing group value is flagged") {
    const auto d = wide({{1, 0, 10}, {2, NA, 12}});
    const auto report = validate_dataset(d);
    REQUIRE(report.issues.size() == 1);
    CHECK(report.issues.front().find("tx") != std::string::npos);
}

TEST_CASE("missing subject id and sentinel violations") {
    auto d = wide({{1, 0, 10}, {NA, 1, 12}});
    CHECK_FALSE(validate_dataset(d).ok());

    // An observed cell holding NaN breaks the sentinel invariant.
    std::vector<ColumnInfo> cols{{"id", ColumnRole::subject_id, ColumnType::nominal, 0},
                                 {"y_t0", ColumnRole::outcome, ColumnType::continuous, 0}};
    Eigen::MatrixXd v(1, 2);
    v << 1, std::nan("");
    const LongitudinalDataset bad(cols, v, MissingMask::Constant(1, 2, false));
    CHECK_FALSE(validate_dataset(bad).ok());
}

TEST_CASE("validation has no side effects") {
    const auto d = wide({{1, 0, 10, NA}, {1, 1, 12, 3}});
    const auto copy = d;
    (void)validate_dataset(d);
    CHECK(identical(d, copy));
}

TEST_CASE("column lookup") {
    const auto d = wide({{1, 0, 10}});
    CHECK(d.column_index("y_t0") == 2);
    CHECK_FALSE(d.find_column("nope").has_value());
    CHECK_THROWS_AS(d.column_index("nope"), ConfigError);
}

TEST_CASE("set_value and set_missing keep the mask in step") {
    auto d = wide({{1, 0, 10, NA}});
    d.set_value(0, 3, 4.5);
    CHECK_FALSE(d.is_missing(0, 3));
    CHECK(d.value(0, 3) == 4.5);
    d.set_missing(0, 2);
    CHECK(d.is_missing(0, 2));
    CHECK(std::isnan(d.value(0, 2)));
}
