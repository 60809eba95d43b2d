#include "mmmi/config.hpp"
#include "mmmi/csv_io.hpp"
#include "mmmi/errors.hpp"
#include "mmmi/numfmt.hpp"

#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <functional>
#include <sstream>

using namespace mmmi;

namespace {

CsvTable parse(const std::string& text) {
    std::istringstream in(text);
    return parse_csv(in);
}

std::string write(const CsvTable& t) {
    std::ostringstream out;
    write_csv(out, t);
    return out.str();
}

std::string message_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const std::exception& e) {
        return e.what();
    }
    return "";
}

}  // namespace

TEST_CASE("csv round trip with quoting") {
    const std::string text = "id,note,y_t0\n1,\"a, b\",2.5\n2,\"say \"\"hi\"\"\",\n";
    const auto t = parse(text);
    REQUIRE(t.rows.size() == 2);
    CHECK(t.rows[0][1] == "a, b");
    CHECK(t.rows[1][1] == "say \"hi\"");
    CHECK(t.rows[1][2].empty());
    CHECK(write(t) == text);
}

TEST_CASE("csv tolerates CRLF and blank lines") {
    const auto t = parse("id,y_t0\r\n1,2\r\n\r\n3,4\r\n");
    REQUIRE(t.rows.size() == 2);
    CHECK(t.rows[1][1] == "4");
}

TEST_CASE("csv structural errors") {
    CHECK_THROWS_AS(parse(""), DataError);
    CHECK_THROWS_AS(parse("id,y_t0\n1\n"), DataError);
    CHECK_THROWS_AS(parse("id,y_t0\n1,\"2\n"), DataError);
}

TEST_CASE("dataset from csv: roles, missing cells, bad numbers") {
    DatasetSchema schema;
    schema.group = "tx";
    const auto loaded = dataset_from_csv(parse("id,tx,age,y_t0,y_t4\n1,0,30,10,\n2,1,41,12.5,9\n"), schema);
    const auto& d = loaded.data;
    CHECK(d.column(0).role == ColumnRole::subject_id);
    CHECK(d.column(1).role == ColumnRole::group);
    CHECK(d.column(2).role == ColumnRole::covariate);
    CHECK(d.column(4).role == ColumnRole::outcome);
    CHECK(d.column(4).time == 4.0);
    CHECK(d.is_missing(0, 4));
    CHECK(std::isnan(d.value(0, 4)));
    CHECK(d.value(1, 3) == 12.5);

    const auto msg = message_of([&] { dataset_from_csv(parse("id,y_t0\n1,abc\n"), DatasetSchema{}); });
    CHECK(msg.find("'abc' is not a number") != std::string::npos);
    CHECK_THROWS_AS(dataset_from_csv(parse("id,y_t0\n1,abc\n"), DatasetSchema{}), DataError);

    DatasetSchema missing_group;
    missing_group.group = "arm";
    CHECK_THROWS_AS(dataset_from_csv(parse("id,y_t0\n1,2\n"), missing_group), ConfigError);
}

TEST_CASE("explicit outcome list needs time codes") {
    DatasetSchema schema;
    schema.outcomes = {"base", "wk12"};
    schema.time_codes = {{"base", 0.0}, {"wk12", 12.0}};
    const auto d = dataset_from_csv(parse("id,base,wk12,other\n1,2,3,4\n"), schema).data;
    CHECK(d.column(2).time == 12.0);
    CHECK(d.column(3).role == ColumnRole::covariate);

    schema.time_codes.erase("wk12");
    CHECK_THROWS_AS(dataset_from_csv(parse("id,base,wk12\n1,2,3\n"), schema), ConfigError);
}

TEST_CASE("observed cells are written back verbatim") {
    const auto loaded = dataset_from_csv(parse("id,y_t0,y_t1\n001,1.50,\n2,+3,0.1\n"), DatasetSchema{});
    auto d = loaded.data;
    d.set_value(0, 2, 0.1 + 0.2);
    std::ostringstream out;
    write_dataset_csv(out, d, &loaded.raw);
    CHECK(out.str() == "id,y_t0,y_t1\n001,1.50,0.30000000000000004\n2,+3,0.1\n");

    std::ostringstream plain;
    write_dataset_csv(plain, loaded.data);
    CHECK(plain.str() == "id,y_t0,y_t1\n1,1.5,\n2,3,0.1\n");
}

TEST_CASE("shortest formatting round-trips") {
    for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 1e21, 123456789.125, 5e-324}) {
        const auto s = format_shortest(v);
        CHECK(std::strtod(s.c_str(), nullptr) == v);
    }
    CHECK(format_shortest(2.0) == "2");
    CHECK(format_shortest(0.1) == "0.1");
}

TEST_CASE("schema parsing") {
    const auto s = parse_schema(Json::parse(R"({"subject_id":"pid","group":"arm","outcomes":["a","b"],
        "time_codes":{"a":0,"b":6},"types":{"arm":"binary","site":"nominal"}})"));
    CHECK(s.subject_id == "pid");
    CHECK(*s.group == "arm");
    CHECK(s.time_codes.at("b") == 6.0);
    CHECK(s.types.at("site") == ColumnType::nominal);

    CHECK(message_of([] { parse_schema(Json::parse(R"({"grup":"arm"})")); }).find("'grup'") != std::string::npos);
    CHECK_THROWS_AS(parse_schema(Json::parse(R"({"types":{"x":"ordinal"}})")), ConfigError);
    CHECK_THROWS_AS(parse_schema(Json::parse(R"({"time_codes":{"x":"zero"}})")), ConfigError);
    CHECK_THROWS_AS(parse_schema(Json::parse("[1,2]")), ConfigError);
}

TEST_CASE("plan parsing and serialization") {
    const auto j = Json::parse(R"({
        "m_models": 4, "n_per_model": 3,
        "mechanism": {"family": "normal", "mean": 1.3, "sd": 0.1, "round_to_observed": true, "clamp": [0, 63]},
        "imputer": {"method": "monotone", "group_by": "tx", "column_order": ["y_t0", "y_t1"], "sweeps": 5},
        "transform_columns": ["y_t1"]})");
    const auto p = parse_plan(j);
    CHECK(p.m_models == 4);
    CHECK(p.n_per_model == 3);
    CHECK(p.mechanism.dist == MultiplierDistribution::normal(1.3, 0.1));
    CHECK(p.mechanism.round_to_observed);
    CHECK(p.mechanism.clamp_range->second == 63.0);
    CHECK(p.imputer_cfg.method == ImputeMethod::monotone);
    CHECK(p.imputer_cfg.sweeps == 5);
    CHECK(p.transform_columns == std::vector<std::string>{"y_t1"});

    const auto back = parse_plan(to_json(p));
    CHECK(to_json(back) == to_json(p));

    auto bad = j;
    bad["mechanism"]["sd"] = "wide";
    const auto msg = message_of([&] { parse_plan(bad); });
    CHECK(msg.find("plan.mechanism.sd") != std::string::npos);

    bad = j;
    bad["mechanism"]["sd"] = -1;
    CHECK_THROWS_AS(parse_plan(bad), ConfigError);

    bad = j;
    bad["m_models"] = 1;
    CHECK_THROWS_AS(parse_plan(bad), ConfigError);

    bad = j;
    bad["imputer"]["method"] = "hotdeck";
    CHECK_THROWS_AS(parse_plan(bad), ConfigError);

    bad = j;
    bad["extra"] = 1;
    CHECK(message_of([&] { parse_plan(bad); }).find("'extra'") != std::string::npos);

    bad = j;
    bad.erase("mechanism");
    CHECK_THROWS_AS(parse_plan(bad), ConfigError);
}

TEST_CASE("mechanism families") {
    const auto u = parse_mechanism(Json::parse(R"({"family":"uniform","lower":1,"upper":2})"), "m");
    CHECK(u.dist == MultiplierDistribution::uniform(1, 2));
    const auto pt = parse_mechanism(Json::parse(R"({"family":"point","value":1.7})"), "m");
    CHECK(pt.dist == MultiplierDistribution::point(1.7));
    CHECK(to_json(pt.dist) == Json::parse(R"({"family":"point","value":1.7})"));
    CHECK_THROWS_AS(parse_mechanism(Json::parse(R"({"family":"uniform","lower":2,"upper":1})"), "m"), ConfigError);
    CHECK_THROWS_AS(parse_mechanism(Json::parse(R"({"family":"cauchy"})"), "m"), ConfigError);
    CHECK_THROWS_AS(parse_mechanism(Json::parse(R"({"family":"point","value":1,"clamp":[0]})"), "m"), ConfigError);
}

TEST_CASE("trial and simulate config parsing") {
    const auto t = parse_trial(Json::parse(R"({"n_per_arm": 50, "n_dropouts_per_arm": 20})"));
    CHECK(t.n_per_arm == 50);
    CHECK(t.n_dropouts_per_arm == 20);
    CHECK(t.beta == TrialGenParams{}.beta);
    CHECK(parse_trial(to_json(t)).n_per_arm == 50);
    CHECK_THROWS_AS(parse_trial(Json::parse(R"({"beta":[1,2]})")), ConfigError);
    CHECK_THROWS_AS(parse_trial(Json::parse(R"({"re_cov":[[1,0]]})")), ConfigError);
    CHECK_THROWS_AS(parse_trial(Json::parse(R"({"n_per_arm": -3})")), ConfigError);

    const auto o = parse_simulate_config(Json::parse(R"({"m_models": 5, "n_per_model": 2, "replications": 7})"));
    CHECK(o.m_models == 5);
    CHECK(*o.replications == 7);
    CHECK_THROWS_AS(parse_simulate_config(Json::parse(R"({"level": 1.5})")), ConfigError);
    CHECK_THROWS_AS(parse_simulate_config(Json::parse(R"({"m_models": 1})")), ConfigError);
}

TEST_CASE("lmm spec parsing") {
    const auto s = parse_lmm(Json::parse(R"({"arm":"tx","reference_arm":1,"covariates":["age"],"reml":true})"), "model");
    CHECK(s.arm_column == "tx");
    CHECK(*s.reference_arm == 1.0);
    CHECK(s.covariates == std::vector<std::string>{"age"});
    CHECK(s.reml);
    CHECK(message_of([] { parse_lmm(Json::parse(R"({"reml":"yes"})"), "model"); }).find("model.reml") !=
          std::string::npos);
}
