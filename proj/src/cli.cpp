#include "mmmi/cli.hpp"

#include "mmmi/config.hpp"
#include "mmmi/csv_io.hpp"
#include "mmmi/engine.hpp"
#include "mmmi/errors.hpp"
#include "mmmi/harness.hpp"
#include "mmmi/lmm.hpp"
#include "mmmi/mechanism.hpp"
#include "mmmi/numfmt.hpp"
#include "mmmi/pooling.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <regex>
#include <sstream>

namespace fs = std::filesystem;

namespace mmmi {

namespace {

struct GlobalOptions {
    std::optional<std::uint64_t> seed;
    unsigned threads = 1;
    std::string out_dir = ".";
};

void add_globals(CLI::App* cmd, GlobalOptions& g) {
    cmd->add_option("--seed", g.seed, "Master seed (u64)");
    cmd->add_option("--threads", g.threads, "Worker threads")->check(CLI::PositiveNumber);
    cmd->add_option("--out", g.out_dir, "Output directory");
}

std::uint64_t require_seed(const GlobalOptions& g, const std::string& command) {
    if (!g.seed) throw ConfigError(command + ": --seed is required");
    return *g.seed;
}

fs::path ensure_dir(const std::string& dir) {
    fs::path p(dir);
    std::error_code ec;
    fs::create_directories(p, ec);
    if (ec) throw DataError("cannot create output directory '" + dir + "': " + ec.message());
    return p;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write '" + path.string() + "'");
    out << text;
}

std::string dist_label(const MultiplierDistribution& d) {
    switch (d.family) {
        case MultiplierFamily::normal: return "N(" + format_shortest(d.param1) + "," + format_shortest(d.param2) + ")";
        case MultiplierFamily::uniform: return "U(" + format_shortest(d.param1) + "," + format_shortest(d.param2) + ")";
        case MultiplierFamily::point: return "Point(" + format_shortest(d.param1) + ")";
    }
    return "";
}

std::string fixed4(double v) {
    if (!std::isfinite(v)) return format_shortest(v);
    std::ostringstream os;
    os << std::fixed << std::setprecision(4) << v;
    return os.str();
}

// ---------------------------------------------------------------- simulate

struct SimulateArgs {
    std::string scenarios;
    std::string grid;
    std::optional<std::size_t> reps;
    std::optional<std::size_t> m_models;
    std::optional<std::size_t> n_per_model;
    std::string config;
};

CsvTable metrics_table(const std::vector<ScenarioMetrics>& rows) {
    CsvTable t;
    t.header = {"scenario", "ignorability", "uncertainty", "model_dist", "pb", "rmse", "coverage", "ci_width",
                "gamma", "gamma_w", "gamma_b", "gamma_b_over_gamma", "mean_estimate", "truth", "reps_completed",
                "reps_failed", "error"};
    for (const auto& m : rows) {
        t.rows.push_back({m.id, m.ignorability, m.uncertainty, dist_label(m.dist), format_shortest(m.percent_bias),
                          format_shortest(m.rmse), format_shortest(m.coverage), format_shortest(m.ci_width),
                          format_shortest(m.mean_gamma), format_shortest(m.mean_gamma_w),
                          format_shortest(m.mean_gamma_b), format_shortest(m.mean_ratio),
                          format_shortest(m.mean_estimate), format_shortest(m.truth),
                          std::to_string(m.replications_completed), std::to_string(m.replications_failed),
                          m.error_summary});
    }
    return t;
}

int cmd_simulate(const SimulateArgs& a, const GlobalOptions& g, std::ostream& out) {
    const auto start = std::chrono::steady_clock::now();
    const std::uint64_t seed = require_seed(g, "simulate");

    SimulateOptions opts;
    if (!a.config.empty()) opts = parse_simulate_config(load_json(a.config));
    if (a.m_models) opts.m_models = *a.m_models;
    if (a.n_per_model) opts.n_per_model = *a.n_per_model;
    const std::size_t reps = a.reps.value_or(opts.replications.value_or(1000));
    if (reps < 1) throw ConfigError("simulate: --reps must be >= 1");

    std::vector<std::string> ids;
    if (!a.grid.empty()) {
        if (a.grid != "table1") throw ConfigError("simulate: unknown grid '" + a.grid + "' (expected table1)");
        ids.push_back("table1");
    }
    if (!a.scenarios.empty()) {
        std::stringstream ss(a.scenarios);
        std::string id;
        while (std::getline(ss, id, ','))
            if (!id.empty()) ids.push_back(id);
    }
    if (ids.empty()) throw ConfigError("simulate: give --scenarios or --grid");

    std::vector<ScenarioConfig> grid;
    for (const auto& cell : select_cells(ids)) {
        auto cfg = make_scenario(cell, opts.trial, reps, seed, opts.m_models, opts.n_per_model);
        cfg.level = opts.level;
        cfg.validate();
        grid.push_back(std::move(cfg));
    }

    const auto rows = run_grid(grid, g.threads);
    const fs::path dir = ensure_dir(g.out_dir);
    {
        std::ostringstream csv;
        write_csv(csv, metrics_table(rows));
        write_text(dir / "metrics.csv", csv.str());
    }

    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    Json log;
    log["tool"] = "mmmi";
    log["version"] = MMMI_VERSION;
    log["command"] = "simulate";
    log["master_seed"] = seed;
    log["replications"] = reps;
    log["m_models"] = opts.m_models;
    log["n_per_model"] = opts.n_per_model;
    log["level"] = opts.level;
    log["trial"] = to_json(opts.trial);
    log["threads"] = g.threads;
    log["seconds"] = seconds;
    Json scen = Json::array();
    for (const auto& r : rows)
        scen.push_back({{"scenario", r.id},
                        {"reps_completed", r.replications_completed},
                        {"reps_failed", r.replications_failed},
                        {"error", r.error_summary}});
    log["scenarios"] = scen;
    write_text(dir / "run_log.json", log.dump(2) + "\n");

    out << std::left << std::setw(18) << "scenario" << std::setw(12) << "dist" << std::right;
    for (const char* h : {"PB", "RMSE", "Cvg", "Width", "gamma", "gamma_w", "gamma_b", "ratio"})
        out << std::setw(10) << h;
    out << '\n';
    bool any_error = false;
    for (const auto& r : rows) {
        out << std::left << std::setw(18) << r.id << std::setw(12) << dist_label(r.dist) << std::right;
        for (double v : {r.percent_bias, r.rmse, 100.0 * r.coverage, r.ci_width, r.mean_gamma, r.mean_gamma_w,
                         r.mean_gamma_b, r.mean_ratio})
            out << std::setw(10) << fixed4(v);
        out << '\n';
        if (!r.error_summary.empty()) any_error = true;
    }
    return any_error ? static_cast<int>(ExitCode::numeric) : 0;
}

// ---------------------------------------------------------------- impute

struct ImputeArgs {
    std::string input;
    std::string schema;
    std::string plan;
};

std::string imputed_name(std::size_t m, std::size_t n) {
    return "imp_m" + std::to_string(m + 1) + "_n" + std::to_string(n + 1) + ".csv";
}

int cmd_impute(const ImputeArgs& a, const GlobalOptions& g, std::ostream& out) {
    const auto start = std::chrono::steady_clock::now();
    const std::uint64_t seed = require_seed(g, "impute");
    Json schema_json = a.schema.empty() ? Json(nullptr) : load_json(a.schema);
    const DatasetSchema schema = schema_json.is_null() ? DatasetSchema{} : parse_schema(schema_json);
    NestedImputationPlan plan = parse_plan(load_json(a.plan));
    plan.master_seed = seed;

    const LoadedDataset loaded = read_dataset_csv(a.input, schema);
    const NestedImputation nested = nested_impute(loaded.data, plan);

    const fs::path dir = ensure_dir(g.out_dir);
    Json files = Json::array();
    for (std::size_t m = 0; m < plan.m_models; ++m) {
        for (std::size_t n = 0; n < plan.n_per_model; ++n) {
            const std::string name = imputed_name(m, n);
            std::ostringstream csv;
            write_dataset_csv(csv, nested.datasets[m][n], &loaded.raw);
            write_text(dir / name, csv.str());
            files.push_back({{"model", m + 1},
                             {"rep", n + 1},
                             {"file", name},
                             {"k", nested.manifest.multipliers[m]},
                             {"ignorable_index", nested.manifest.ignorable_index[plan.n_per_model * m + n]}});
        }
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    Json manifest;
    manifest["tool"] = "mmmi";
    manifest["version"] = MMMI_VERSION;
    manifest["master_seed"] = seed;
    manifest["input"] = fs::absolute(a.input).string();
    manifest["schema"] = schema_json;
    manifest["plan"] = to_json(plan);
    manifest["multipliers"] = nested.manifest.multipliers;
    manifest["sign_flips"] = nested.manifest.sign_flips;
    manifest["files"] = files;
    manifest["seconds"] = seconds;
    write_text(dir / "manifest.json", manifest.dump(2) + "\n");

    out << "wrote " << files.size() << " imputed datasets and manifest.json to " << dir.string() << '\n';
    if (nested.manifest.sign_flips > 0)
        out << "note: " << nested.manifest.sign_flips << " imputed values changed sign under the multiplier\n";
    return 0;
}

// ---------------------------------------------------------------- reports

CsvTable pooled_report(const PooledInference& p) {
    CsvTable t;
    t.header = {"est", "se", "lci", "uci", "p_value", "gamma", "gamma_w", "gamma_b", "gamma_b_over_gamma"};
    t.rows.push_back({format_shortest(p.q_bar), format_shortest(p.se()), format_shortest(p.ci_lo),
                      format_shortest(p.ci_hi), format_shortest(p.p_value), format_shortest(p.gamma),
                      format_shortest(p.gamma_w), format_shortest(p.gamma_b), format_shortest(p.gamma_ratio)});
    return t;
}

void print_report(std::ostream& out, const PooledInference& p) {
    const char* labels[] = {"Est.", "SE", "LCI", "UCI", "p-val.", "gamma", "gamma_w", "gamma_b", "gamma_b/gamma"};
    const double values[] = {p.q_bar, p.se(), p.ci_lo, p.ci_hi, p.p_value, p.gamma, p.gamma_w, p.gamma_b, p.gamma_ratio};
    for (const char* l : labels) out << std::setw(14) << l;
    out << '\n';
    for (double v : values) out << std::setw(14) << fixed4(v);
    out << '\n';
    out << "M=" << p.m << " N=" << p.n << " df=" << format_shortest(p.df) << " level=" << format_shortest(p.level)
        << '\n';
}

void write_report(const GlobalOptions& g, const PooledInference& p) {
    const fs::path dir = ensure_dir(g.out_dir);
    std::ostringstream csv;
    write_csv(csv, pooled_report(p));
    write_text(dir / "report.csv", csv.str());
}

// ---------------------------------------------------------------- analyze-pool

struct AnalyzeArgs {
    std::string manifest;
    std::vector<std::string> files;
    std::string schema;
    std::string model;
    std::string estimand;
    std::vector<double> weights;
    std::string arm;
    double level = 0.95;
};

struct GridFile {
    std::size_t model;
    std::size_t rep;
    fs::path path;
};

std::vector<GridFile> files_from_manifest(const fs::path& manifest_path, Json& schema_out) {
    const Json j = load_json(manifest_path);
    if (!j.contains("files") || !j.at("files").is_array()) throw ConfigError("manifest.files: missing");
    if (j.contains("schema")) schema_out = j.at("schema");
    std::vector<GridFile> out;
    for (const auto& f : j.at("files")) {
        try {
            out.push_back({f.at("model").get<std::size_t>(), f.at("rep").get<std::size_t>(),
                           manifest_path.parent_path() / f.at("file").get<std::string>()});
        } catch (const nlohmann::json::exception&) {
            throw ConfigError("manifest.files: entries need model, rep and file");
        }
    }
    return out;
}

std::vector<GridFile> files_from_names(const std::vector<std::string>& names) {
    static const std::regex re(R"(imp_m(\d+)_n(\d+)\.csv)");
    std::vector<GridFile> out;
    for (const auto& name : names) {
        std::smatch match;
        const std::string base = fs::path(name).filename().string();
        if (!std::regex_match(base, match, re))
            throw ConfigError("analyze-pool: file '" + name + "' is not named imp_m{model}_n{rep}.csv");
        out.push_back({std::stoul(match[1].str()), std::stoul(match[2].str()), name});
    }
    return out;
}

// Arranges labelled cells into a full M x N grid (models and reps sorted).
template <typename Cell>
std::vector<std::vector<Cell>> arrange(const std::vector<std::pair<std::pair<std::size_t, std::size_t>, Cell>>& cells) {
    std::map<std::size_t, std::map<std::size_t, Cell>> by_model;
    for (const auto& [key, cell] : cells)
        if (!by_model[key.first].emplace(key.second, cell).second)
            throw DataError("duplicate entry for model " + std::to_string(key.first) + " rep " +
                            std::to_string(key.second));
    std::vector<std::vector<Cell>> out;
    std::optional<std::size_t> width;
    for (const auto& [model, reps] : by_model) {
        if (width && *width != reps.size())
            throw DataError("grid is not full: model " + std::to_string(model) + " has " +
                            std::to_string(reps.size()) + " reps, expected " + std::to_string(*width));
        width = reps.size();
        std::vector<Cell> row;
        for (const auto& [rep, cell] : reps) row.push_back(cell);
        out.push_back(std::move(row));
    }
    return out;
}

int cmd_analyze_pool(const AnalyzeArgs& a, const GlobalOptions& g, std::ostream& out) {
    Json schema_json = nullptr;
    std::vector<GridFile> files;
    if (!a.manifest.empty()) files = files_from_manifest(a.manifest, schema_json);
    else files = files_from_names(a.files);
    if (files.empty()) throw ConfigError("analyze-pool: give --manifest or imputed files");
    if (!a.schema.empty()) schema_json = load_json(a.schema);
    const DatasetSchema schema = schema_json.is_null() ? DatasetSchema{} : parse_schema(schema_json);
    const LmmSpec spec = a.model.empty() ? LmmSpec{} : parse_lmm(load_json(a.model), "model");
    if (!a.estimand.empty() && !a.weights.empty())
        throw ConfigError("analyze-pool: give either --estimand or --weights, not both");

    std::vector<std::pair<std::pair<std::size_t, std::size_t>, fs::path>> labelled;
    for (const auto& f : files) labelled.push_back({{f.model, f.rep}, f.path});
    const auto layout = arrange(labelled);

    NestedEstimateGrid grid(layout.size(), layout.front().size());
    for (std::size_t m = 0; m < layout.size(); ++m) {
        for (std::size_t n = 0; n < layout[m].size(); ++n) {
            const LoadedDataset ds = read_dataset_csv(layout[m][n], schema);
            const LmmFit fit = fit_lmm_ml(build_long(ds.data, spec), spec);
            Eigen::VectorXd w;
            if (!a.weights.empty()) {
                w = Eigen::Map<const Eigen::VectorXd>(a.weights.data(), static_cast<Eigen::Index>(a.weights.size()));
            } else {
                const auto kind = parse_estimand(a.estimand.empty() ? "treatment-slope" : a.estimand);
                w = estimand_weights(fit.fixed_names, kind, a.arm);
            }
            grid(m, n) = scalar_estimand(fit, w);
        }
    }
    const PooledInference pooled = pool_nested(grid, a.level);
    print_report(out, pooled);
    write_report(g, pooled);
    return 0;
}

// ---------------------------------------------------------------- pool

struct PoolArgs {
    std::string estimates;
    bool flat = false;
    double level = 0.95;
};

int cmd_pool(const PoolArgs& a, const GlobalOptions& g, std::ostream& out) {
    const CsvTable t = read_csv(a.estimates);
    auto col = [&](const std::string& name) {
        auto it = std::find(t.header.begin(), t.header.end(), name);
        if (it == t.header.end()) throw DataError("pool: estimates CSV lacks column '" + name + "'");
        return static_cast<std::size_t>(it - t.header.begin());
    };
    const auto cm = col("model"), cr = col("rep"), cq = col("q_hat"), cu = col("u");
    auto number = [](const std::string& s, const std::string& what) {
        try {
            std::size_t pos = 0;
            const double v = std::stod(s, &pos);
            if (pos != s.size()) throw std::invalid_argument(s);
            return v;
        } catch (const std::exception&) {
            throw DataError("pool: bad " + what + " value '" + s + "'");
        }
    };
    std::vector<std::pair<std::pair<std::size_t, std::size_t>, ScalarEstimate>> cells;
    std::vector<ScalarEstimate> flat;
    for (const auto& row : t.rows) {
        const ScalarEstimate e{number(row[cq], "q_hat"), number(row[cu], "u")};
        flat.push_back(e);
        cells.push_back({{static_cast<std::size_t>(number(row[cm], "model")),
                          static_cast<std::size_t>(number(row[cr], "rep"))},
                         e});
    }
    PooledInference pooled;
    if (a.flat) {
        pooled = pool_flat(flat, a.level);
    } else {
        const auto layout = arrange(cells);
        if (layout.size() < 2) throw DataError("pool: m ≥ 2 required (found " + std::to_string(layout.size()) + " model)");
        NestedEstimateGrid grid(layout.size(), layout.front().size());
        for (std::size_t m = 0; m < layout.size(); ++m)
            for (std::size_t n = 0; n < layout[m].size(); ++n) grid(m, n) = layout[m][n];
        pooled = pool_nested(grid, a.level);
    }
    print_report(out, pooled);
    out << "Q_bar=" << format_shortest(pooled.q_bar) << " U_bar=" << format_shortest(pooled.u_bar)
        << " W=" << format_shortest(pooled.w) << " B=" << format_shortest(pooled.b)
        << " T=" << format_shortest(pooled.t) << '\n';
    write_report(g, pooled);
    return 0;
}

// ---------------------------------------------------------------- elicit

struct ElicitArgs {
    double lower = 0;
    double upper = 0;
    std::string family = "normal";
};

int cmd_elicit(const ElicitArgs& a, std::ostream& out) {
    const auto d = elicit_multiplier(a.lower, a.upper, parse_family(a.family));
    switch (d.family) {
        case MultiplierFamily::normal:
            out << "normal mean=" << format_shortest(d.param1) << " sd=" << format_shortest(d.param2) << '\n';
            break;
        case MultiplierFamily::uniform:
            out << "uniform lower=" << format_shortest(d.param1) << " upper=" << format_shortest(d.param2) << '\n';
            break;
        case MultiplierFamily::point:
            out << "point value=" << format_shortest(d.param1) << '\n';
            break;
    }
    return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Multiple-model multiple imputation for nonignorable missing data", "mmmi"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(MMMI_VERSION));

    GlobalOptions g;

    SimulateArgs sim;
    auto* simulate = app.add_subcommand("simulate", "Run Monte Carlo scenarios of the longitudinal trial");
    add_globals(simulate, g);
    simulate->add_option("--scenarios", sim.scenarios, "Comma-separated scenario ids (e.g. mar-none,strong-ample)");
    simulate->add_option("--grid", sim.grid, "Named scenario grid (table1)");
    simulate->add_option("--reps", sim.reps, "Replications per scenario");
    simulate->add_option("--m", sim.m_models, "Models per replication");
    simulate->add_option("--n", sim.n_per_model, "Imputations per model");
    simulate->add_option("--config", sim.config, "JSON config (trial parameters, M, N, level)");

    ImputeArgs imp;
    auto* impute = app.add_subcommand("impute", "Write M x N nested imputations of a dataset CSV");
    add_globals(impute, g);
    impute->add_option("--input", imp.input, "Dataset CSV")->required();
    impute->add_option("--schema", imp.schema, "Sidecar JSON naming column roles");
    impute->add_option("--plan", imp.plan, "Plan JSON")->required();

    AnalyzeArgs ana;
    auto* analyze = app.add_subcommand("analyze-pool", "Fit the mixed model to each imputed file and pool");
    add_globals(analyze, g);
    analyze->add_option("--manifest", ana.manifest, "manifest.json written by impute");
    analyze->add_option("files", ana.files, "Imputed files named imp_m{model}_n{rep}.csv");
    analyze->add_option("--schema", ana.schema, "Sidecar JSON (default: the manifest's)");
    analyze->add_option("--model", ana.model, "Model JSON (outcomes, arm, covariates, reml)");
    analyze->add_option("--estimand", ana.estimand, "treatment-slope | treatment-effect | control-slope");
    analyze->add_option("--weights", ana.weights, "Explicit fixed-effect weights")->delimiter(',');
    analyze->add_option("--arm", ana.arm, "Arm term, e.g. tx[1]");
    analyze->add_option("--level", ana.level, "Confidence level");

    PoolArgs pool;
    auto* pool_cmd = app.add_subcommand("pool", "Pool an estimates CSV (model,rep,q_hat,u)");
    add_globals(pool_cmd, g);
    pool_cmd->add_option("estimates", pool.estimates, "Estimates CSV")->required();
    pool_cmd->add_flag("--flat", pool.flat, "Single-level pooling of all rows");
    pool_cmd->add_option("--level", pool.level, "Confidence level");

    ElicitArgs eli;
    auto* elicit = app.add_subcommand("elicit", "Multiplier distribution from expert bounds");
    add_globals(elicit, g);
    elicit->add_option("lower", eli.lower)->required();
    elicit->add_option("upper", eli.upper)->required();
    elicit->add_option("family", eli.family, "normal | uniform | point");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForVersion&) {
        out << MMMI_VERSION << '\n';
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return static_cast<int>(ExitCode::config);
    }

    try {
        if (simulate->parsed()) return cmd_simulate(sim, g, out);
        if (impute->parsed()) return cmd_impute(imp, g, out);
        if (analyze->parsed()) return cmd_analyze_pool(ana, g, out);
        if (pool_cmd->parsed()) return cmd_pool(pool, g, out);
        if (elicit->parsed()) return cmd_elicit(eli, out);
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return static_cast<int>(e.exit_code());
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return static_cast<int>(ExitCode::numeric);
    }
    return static_cast<int>(ExitCode::config);
}

}  // namespace mmmi
