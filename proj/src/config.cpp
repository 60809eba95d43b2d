#include "mmmi/config.hpp"

#include "mmmi/errors.hpp"

#include <fstream>
#include <set>

namespace mmmi {

namespace {

void check_object(const Json& j, const std::string& context) {
    if (!j.is_object()) throw ConfigError(context + ": expected an object");
}

void check_keys(const Json& j, std::initializer_list<const char*> allowed, const std::string& context) {
    check_object(j, context);
    const std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [key, value] : j.items())
        if (!ok.count(key)) throw ConfigError(context + ": unknown key '" + key + "'");
}

std::string field(const std::string& context, const std::string& key) {
    return context.empty() ? key : context + "." + key;
}

template <typename T>
T get(const Json& j, const std::string& key, const std::string& context) {
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError(field(context, key) + ": missing or has the wrong type");
    }
}

template <typename T>
void get_if(const Json& j, const std::string& key, const std::string& context, T& out) {
    if (j.contains(key)) out = get<T>(j, key, context);
}

double get_number(const Json& j, const std::string& key, const std::string& context) {
    if (!j.contains(key) || !j.at(key).is_number()) throw ConfigError(field(context, key) + ": expected a number");
    return j.at(key).get<double>();
}

std::size_t get_count(const Json& j, const std::string& key, const std::string& context) {
    if (!j.contains(key) || !j.at(key).is_number_integer() || j.at(key).get<long long>() < 0)
        throw ConfigError(field(context, key) + ": expected a nonnegative integer");
    return j.at(key).get<std::size_t>();
}

ColumnType parse_type(const std::string& s, const std::string& context) {
    if (s == "continuous") return ColumnType::continuous;
    if (s == "binary") return ColumnType::binary;
    if (s == "nominal") return ColumnType::nominal;
    throw ConfigError(context + ": unknown column type '" + s + "'");
}

}  // namespace

Json load_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
    try {
        return Json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("config '" + path.string() + "': " + e.what());
    }
}

DatasetSchema parse_schema(const Json& j) {
    const std::string ctx = "schema";
    check_keys(j, {"subject_id", "group", "outcomes", "time_codes", "types"}, ctx);
    DatasetSchema s;
    get_if(j, "subject_id", ctx, s.subject_id);
    if (j.contains("group")) s.group = get<std::string>(j, "group", ctx);
    get_if(j, "outcomes", ctx, s.outcomes);
    if (j.contains("time_codes")) {
        check_object(j.at("time_codes"), field(ctx, "time_codes"));
        for (const auto& [k, v] : j.at("time_codes").items()) {
            if (!v.is_number()) throw ConfigError(field(ctx, "time_codes." + k) + ": expected a number");
            s.time_codes[k] = v.get<double>();
        }
    }
    if (j.contains("types")) {
        check_object(j.at("types"), field(ctx, "types"));
        for (const auto& [k, v] : j.at("types").items()) {
            if (!v.is_string()) throw ConfigError(field(ctx, "types." + k) + ": expected a string");
            s.types[k] = parse_type(v.get<std::string>(), field(ctx, "types." + k));
        }
    }
    return s;
}

MechanismSpec parse_mechanism(const Json& j, const std::string& ctx) {
    check_keys(j, {"family", "mean", "sd", "lower", "upper", "value", "round_to_observed", "clamp"}, ctx);
    MechanismSpec m;
    const auto family = parse_family(get<std::string>(j, "family", ctx));
    switch (family) {
        case MultiplierFamily::normal:
            m.dist = MultiplierDistribution::normal(get_number(j, "mean", ctx), get_number(j, "sd", ctx));
            break;
        case MultiplierFamily::uniform:
            m.dist = MultiplierDistribution::uniform(get_number(j, "lower", ctx), get_number(j, "upper", ctx));
            break;
        case MultiplierFamily::point:
            m.dist = MultiplierDistribution::point(get_number(j, "value", ctx));
            break;
    }
    get_if(j, "round_to_observed", ctx, m.round_to_observed);
    if (j.contains("clamp")) {
        const auto& c = j.at("clamp");
        if (!c.is_array() || c.size() != 2 || !c[0].is_number() || !c[1].is_number())
            throw ConfigError(field(ctx, "clamp") + ": expected [lo, hi]");
        m.clamp_range = std::make_pair(c[0].get<double>(), c[1].get<double>());
    }
    try {
        m.validate();
    } catch (const ConfigError& e) {
        throw ConfigError(ctx + ": " + e.what());
    }
    return m;
}

ImputerConfig parse_imputer(const Json& j, const std::string& ctx) {
    check_keys(j, {"method", "group_by", "column_order", "predictors", "sweeps", "ridge_epsilon"}, ctx);
    ImputerConfig c;
    if (j.contains("method")) {
        const auto m = get<std::string>(j, "method", ctx);
        if (m == "auto") c.method = ImputeMethod::automatic;
        else if (m == "monotone") c.method = ImputeMethod::monotone;
        else if (m == "chained") c.method = ImputeMethod::chained;
        else throw ConfigError(field(ctx, "method") + ": expected auto, monotone or chained");
    }
    if (j.contains("group_by")) c.group_by = get<std::string>(j, "group_by", ctx);
    c.column_order = get<std::vector<std::string>>(j, "column_order", ctx);
    get_if(j, "predictors", ctx, c.predictors);
    if (j.contains("sweeps")) c.sweeps = static_cast<int>(get_count(j, "sweeps", ctx));
    if (j.contains("ridge_epsilon")) c.ridge_epsilon = get_number(j, "ridge_epsilon", ctx);
    try {
        c.validate();
    } catch (const ConfigError& e) {
        throw ConfigError(ctx + ": " + e.what());
    }
    return c;
}

NestedImputationPlan parse_plan(const Json& j) {
    const std::string ctx = "plan";
    check_keys(j, {"m_models", "n_per_model", "mechanism", "imputer", "transform_columns"}, ctx);
    NestedImputationPlan p;
    if (j.contains("m_models")) p.m_models = get_count(j, "m_models", ctx);
    if (j.contains("n_per_model")) p.n_per_model = get_count(j, "n_per_model", ctx);
    if (!j.contains("mechanism")) throw ConfigError("plan.mechanism: missing");
    p.mechanism = parse_mechanism(j.at("mechanism"), field(ctx, "mechanism"));
    if (!j.contains("imputer")) throw ConfigError("plan.imputer: missing");
    p.imputer_cfg = parse_imputer(j.at("imputer"), field(ctx, "imputer"));
    p.transform_columns = get<std::vector<std::string>>(j, "transform_columns", ctx);
    if (p.m_models < 2) throw ConfigError("plan.m_models: must be >= 2");
    if (p.n_per_model < 1) throw ConfigError("plan.n_per_model: must be >= 1");
    try {
        p.validate();
    } catch (const ConfigError& e) {
        throw ConfigError(std::string(e.what()));
    }
    return p;
}

TrialGenParams parse_trial(const Json& j, TrialGenParams t) {
    const std::string ctx = "trial";
    check_keys(j,
               {"beta", "re_cov", "resid_var_nondrop", "resid_var_drop", "n_per_arm", "n_dropouts_per_arm",
                "timepoints", "drop_hazard"},
               ctx);
    if (j.contains("beta")) {
        const auto b = get<std::vector<double>>(j, "beta", ctx);
        if (b.size() != 5) throw ConfigError("trial.beta: expected 5 coefficients");
        std::copy(b.begin(), b.end(), t.beta.begin());
    }
    if (j.contains("re_cov")) {
        const auto g = get<std::vector<std::vector<double>>>(j, "re_cov", ctx);
        if (g.size() != 2 || g[0].size() != 2 || g[1].size() != 2) throw ConfigError("trial.re_cov: expected 2x2");
        t.re_cov << g[0][0], g[0][1], g[1][0], g[1][1];
    }
    if (j.contains("resid_var_nondrop")) t.resid_var_nondrop = get_number(j, "resid_var_nondrop", ctx);
    if (j.contains("resid_var_drop")) t.resid_var_drop = get_number(j, "resid_var_drop", ctx);
    if (j.contains("n_per_arm")) t.n_per_arm = static_cast<int>(get_count(j, "n_per_arm", ctx));
    if (j.contains("n_dropouts_per_arm")) t.n_dropouts_per_arm = static_cast<int>(get_count(j, "n_dropouts_per_arm", ctx));
    if (j.contains("timepoints")) t.timepoints = static_cast<int>(get_count(j, "timepoints", ctx));
    get_if(j, "drop_hazard", ctx, t.drop_hazard);
    try {
        t.validate();
    } catch (const ConfigError& e) {
        throw ConfigError(std::string(e.what()));
    }
    return t;
}

LmmSpec parse_lmm(const Json& j, const std::string& ctx) {
    check_keys(j, {"outcomes", "subject_id", "arm", "reference_arm", "covariates", "reml", "max_iterations"}, ctx);
    LmmSpec s;
    get_if(j, "outcomes", ctx, s.outcome_columns);
    get_if(j, "subject_id", ctx, s.subject_column);
    get_if(j, "arm", ctx, s.arm_column);
    if (j.contains("reference_arm")) s.reference_arm = get_number(j, "reference_arm", ctx);
    get_if(j, "covariates", ctx, s.covariates);
    get_if(j, "reml", ctx, s.reml);
    if (j.contains("max_iterations")) s.max_iterations = static_cast<int>(get_count(j, "max_iterations", ctx));
    return s;
}

SimulateOptions parse_simulate_config(const Json& j) {
    const std::string ctx = "simulate";
    check_keys(j, {"trial", "m_models", "n_per_model", "level", "replications"}, ctx);
    SimulateOptions o;
    if (j.contains("trial")) o.trial = parse_trial(j.at("trial"));
    if (j.contains("m_models")) o.m_models = get_count(j, "m_models", ctx);
    if (j.contains("n_per_model")) o.n_per_model = get_count(j, "n_per_model", ctx);
    if (j.contains("level")) o.level = get_number(j, "level", ctx);
    if (j.contains("replications")) o.replications = get_count(j, "replications", ctx);
    if (o.m_models < 2) throw ConfigError("simulate.m_models: must be >= 2");
    if (o.n_per_model < 1) throw ConfigError("simulate.n_per_model: must be >= 1");
    if (!(o.level > 0 && o.level < 1)) throw ConfigError("simulate.level: must lie in (0, 1)");
    return o;
}

Json to_json(const MultiplierDistribution& d) {
    switch (d.family) {
        case MultiplierFamily::normal: return {{"family", "normal"}, {"mean", d.param1}, {"sd", d.param2}};
        case MultiplierFamily::uniform: return {{"family", "uniform"}, {"lower", d.param1}, {"upper", d.param2}};
        case MultiplierFamily::point: return {{"family", "point"}, {"value", d.param1}};
    }
    return {};
}

Json to_json(const NestedImputationPlan& p) {
    Json mech = to_json(p.mechanism.dist);
    mech["round_to_observed"] = p.mechanism.round_to_observed;
    if (p.mechanism.clamp_range) mech["clamp"] = {p.mechanism.clamp_range->first, p.mechanism.clamp_range->second};

    Json imp;
    switch (p.imputer_cfg.method) {
        case ImputeMethod::automatic: imp["method"] = "auto"; break;
        case ImputeMethod::monotone: imp["method"] = "monotone"; break;
        case ImputeMethod::chained: imp["method"] = "chained"; break;
    }
    if (p.imputer_cfg.group_by) imp["group_by"] = *p.imputer_cfg.group_by;
    imp["column_order"] = p.imputer_cfg.column_order;
    imp["predictors"] = p.imputer_cfg.predictors;
    imp["sweeps"] = p.imputer_cfg.sweeps;
    imp["ridge_epsilon"] = p.imputer_cfg.ridge_epsilon;

    return {{"m_models", p.m_models},
            {"n_per_model", p.n_per_model},
            {"mechanism", mech},
            {"imputer", imp},
            {"transform_columns", p.transform_columns}};
}

Json to_json(const TrialGenParams& t) {
    return {{"beta", t.beta},
            {"re_cov", {{t.re_cov(0, 0), t.re_cov(0, 1)}, {t.re_cov(1, 0), t.re_cov(1, 1)}}},
            {"resid_var_nondrop", t.resid_var_nondrop},
            {"resid_var_drop", t.resid_var_drop},
            {"n_per_arm", t.n_per_arm},
            {"n_dropouts_per_arm", t.n_dropouts_per_arm},
            {"timepoints", t.timepoints},
            {"drop_hazard", t.drop_hazard}};
}

}  // namespace mmmi
