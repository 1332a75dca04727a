// bisbm command-line interface: simulation, z-score construction, fitting,
// model selection, testing, evaluation, and replicated experiments.
//
// Exit codes: 0 success, 2 usage error, 3 data/validation error,
// 4 numerical failure. Errors print one structured line on stderr.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "bisbm/csv.hpp"
#include "bisbm/experiment.hpp"
#include "bisbm/inference.hpp"
#include "bisbm/model.hpp"
#include "bisbm/selection.hpp"
#include "bisbm/simulate.hpp"
#include "bisbm/stats.hpp"
#include "bisbm/testing.hpp"
#include "bisbm/version.hpp"

using json = nlohmann::json;
namespace fs = std::filesystem;
using namespace bisbm;

namespace {

// ---------------------------------------------------------------------------
// config plumbing: JSON document with flag overrides (flags win)
// ---------------------------------------------------------------------------

struct ConfigDoc {
    json doc = json::object();

    static ConfigDoc load(const std::string& path, const std::vector<std::string>& known_keys) {
        ConfigDoc cfg;
        if (path.empty()) return cfg;
        std::ifstream in(path);
        if (!in) throw ParseError("cannot open config file: " + path);
        try {
            in >> cfg.doc;
        } catch (const json::exception& e) {
            throw ParseError(std::string("config is not valid JSON: ") + e.what());
        }
        if (!cfg.doc.is_object()) throw ValidationError("config root must be a JSON object");
        for (const auto& [key, value] : cfg.doc.items()) {
            (void)value;
            bool known = false;
            for (const std::string& k : known_keys)
                if (k == key) {
                    known = true;
                    break;
                }
            if (!known) throw ValidationError("unknown config key: " + key);
        }
        return cfg;
    }

    template <typename T>
    void apply(const CLI::Option* opt, const std::string& key, T& target) const {
        if (opt != nullptr && opt->count() > 0) return;  // flag wins
        if (!doc.contains(key)) return;
        try {
            target = doc.at(key).get<T>();
        } catch (const json::exception&) {
            throw ValidationError("config key '" + key + "' has the wrong type");
        }
    }
};

void ensure_out_dir(const std::string& out) {
    if (out.empty()) throw ValidationError("an output directory is required (--out)");
    fs::create_directories(out);
}

std::string join_path(const std::string& dir, const std::string& name) {
    return (fs::path(dir) / name).string();
}

std::vector<double> parse_alphas(const std::string& csv) {
    std::vector<double> alphas;
    std::stringstream ss(csv);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        try {
            alphas.push_back(std::stod(tok));
        } catch (...) {
            throw ValidationError("bad alpha list entry: '" + tok + "'");
        }
    }
    if (alphas.empty()) throw ValidationError("alpha list is empty");
    return alphas;
}

// ---------------------------------------------------------------------------
// params.json (de)serialization
// ---------------------------------------------------------------------------

json matrix_to_json(const Matrix& m) {
    json rows = json::array();
    for (int i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

Matrix matrix_from_json(const json& rows, const std::string& what) {
    if (!rows.is_array() || rows.empty() || !rows[0].is_array())
        throw ValidationError(what + " must be an array of arrays");
    Matrix m(static_cast<int>(rows.size()), static_cast<int>(rows[0].size()));
    for (int i = 0; i < m.rows(); ++i) {
        if (static_cast<int>(rows[static_cast<std::size_t>(i)].size()) != m.cols())
            throw ValidationError(what + " rows have inconsistent widths");
        for (int j = 0; j < m.cols(); ++j)
            m(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)].get<double>();
    }
    return m;
}

json params_to_json(const ModelParams& p) {
    json out;
    out["alpha1"] = std::vector<double>(p.alpha1.data(), p.alpha1.data() + p.alpha1.size());
    out["alpha2"] = std::vector<double>(p.alpha2.data(), p.alpha2.data() + p.alpha2.size());
    out["pi"] = matrix_to_json(p.pi);
    out["mu"] = matrix_to_json(p.alt_params.mu);
    out["sigma_sq"] = matrix_to_json(p.alt_params.sigma_sq);
    out["sigma0_sq"] = p.null_params.sigma0_sq;
    return out;
}

ModelParams params_from_json(const json& doc) {
    for (const auto& [key, value] : doc.items()) {
        (void)value;
        if (key != "alpha1" && key != "alpha2" && key != "pi" && key != "mu" && key != "sigma_sq" &&
            key != "sigma0_sq")
            throw ValidationError("unknown params key: " + key);
    }
    ModelParams p;
    const std::vector<double> a1 = doc.at("alpha1").get<std::vector<double>>();
    const std::vector<double> a2 = doc.at("alpha2").get<std::vector<double>>();
    p.alpha1 = Eigen::Map<const Vector>(a1.data(), static_cast<int>(a1.size()));
    p.alpha2 = Eigen::Map<const Vector>(a2.data(), static_cast<int>(a2.size()));
    p.pi = matrix_from_json(doc.at("pi"), "pi");
    p.alt_params.mu = matrix_from_json(doc.at("mu"), "mu");
    p.alt_params.sigma_sq = matrix_from_json(doc.at("sigma_sq"), "sigma_sq");
    p.null_params.sigma0_sq = doc.at("sigma0_sq").get<double>();
    p.validate();
    return p;
}

ModelParams load_params(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open params file: " + path);
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw ParseError(std::string("params file is not valid JSON: ") + e.what());
    }
    return params_from_json(doc);
}

void write_json(const std::string& path, const json& doc) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot open file for writing: " + path);
    out << doc.dump(2) << '\n';
}

void write_manifest(const std::string& out_dir, const std::string& command, const json& resolved) {
    json manifest;
    manifest["command"] = command;
    manifest["config"] = resolved;
    manifest["library_version"] = kLibraryVersion;
    manifest["rng_contract"] = kRngContract;
    write_json(join_path(out_dir, "run-manifest.json"), manifest);
}

MembershipVector load_membership(const std::string& path, Side side) {
    MembershipVector m;
    m.side = side;
    m.labels = read_labels(path);
    return m;
}

// shortest round-trip formatting shared with csv.hpp
std::string csv_double(double v) { return bisbm::detail::format_double(v); }

void write_fit_outputs(const std::string& out, const FitResult& result) {
    write_json(join_path(out, "params.json"), params_to_json(result.params));
    write_labels(join_path(out, "z1.csv"), result.z1_hat);
    write_labels(join_path(out, "z2.csv"), result.z2_hat);
    std::ofstream trace(join_path(out, "elbo_trace.csv"));
    for (double v : result.elbo_trace) trace << csv_double(v) << '\n';
}

// ---------------------------------------------------------------------------
// subcommands
// ---------------------------------------------------------------------------

int cmd_simulate(const std::string& config_path, const CLI::Option* opt_scenario,
                 const CLI::Option* opt_n1, const CLI::Option* opt_n2, const CLI::Option* opt_seed,
                 const CLI::Option* opt_params, const CLI::Option* opt_out, std::string scenario,
                 int n1, int n2, std::uint64_t seed, std::string params_path, std::string out) {
    const ConfigDoc cfg = ConfigDoc::load(
        config_path, {"scenario", "n1", "n2", "seed", "params", "out"});
    cfg.apply(opt_scenario, "scenario", scenario);
    cfg.apply(opt_n1, "n1", n1);
    cfg.apply(opt_n2, "n2", n2);
    cfg.apply(opt_seed, "seed", seed);
    cfg.apply(opt_params, "params", params_path);
    cfg.apply(opt_out, "out", out);
    ensure_out_dir(out);

    ReplicateData rep;
    json resolved{{"n1", n1}, {"n2", n2}, {"seed", seed}, {"out", out}};
    if (!params_path.empty()) {
        const ModelParams params = load_params(params_path);
        Dimensions dims{n1, n2, params.b1(), params.b2()};
        rep.truth = sample_bisbm(dims, params, seed);
        rep.x = sample_observations(rep.truth, params, seed);
        resolved["params"] = params_path;
    } else {
        ScenarioSpec spec;
        if (scenario == "a")
            spec = scenario_a(n1, n2);
        else if (scenario == "b")
            spec = scenario_b(n1, n2);
        else if (scenario == "c")
            spec = scenario_c(n1);
        else
            throw ValidationError("unknown scenario: " + scenario);
        rep = generate_replicate(spec, seed);
        resolved["scenario"] = scenario;
    }

    write_matrix(join_path(out, "observations.csv"), rep.x.values);
    write_adjacency(join_path(out, "truth_adjacency.csv"), rep.truth.a.entries);
    write_labels(join_path(out, "truth_z1.csv"), rep.truth.z1);
    write_labels(join_path(out, "truth_z2.csv"), rep.truth.z2);
    write_manifest(out, "simulate", resolved);
    std::cout << "simulate: wrote " << rep.x.rows() << "x" << rep.x.cols() << " dataset to " << out
              << "\n";
    return 0;
}

struct ZscoreArgs {
    std::string y1, y2, y1b, y2b;
    std::string apply_mclr = "none";  // none|y1|y2|both
    std::string out;
};

int cmd_zscore(const std::string& config_path, CLI::App* sub, ZscoreArgs args) {
    const ConfigDoc cfg =
        ConfigDoc::load(config_path, {"y1", "y2", "group2-y1", "group2-y2", "mclr", "out"});
    cfg.apply(sub->get_option("--y1"), "y1", args.y1);
    cfg.apply(sub->get_option("--y2"), "y2", args.y2);
    cfg.apply(sub->get_option("--group2-y1"), "group2-y1", args.y1b);
    cfg.apply(sub->get_option("--group2-y2"), "group2-y2", args.y2b);
    cfg.apply(sub->get_option("--mclr"), "mclr", args.apply_mclr);
    cfg.apply(sub->get_option("--out"), "out", args.out);
    ensure_out_dir(args.out);
    if (args.y1.empty() || args.y2.empty())
        throw ValidationError("zscore needs --y1 and --y2 abundance files");

    auto load_block = [&](const std::string& path, bool is_y1) {
        Matrix values = read_abundance(path).values;
        const bool wants_mclr =
            args.apply_mclr == "both" || (is_y1 ? args.apply_mclr == "y1" : args.apply_mclr == "y2");
        if (wants_mclr) {
            const MclrResult m = mclr(values);
            for (int row : m.all_zero_rows)
                std::cerr << "bisbm: warning kind=mclr msg=\"row " << row + 1 << " of " << path
                          << " has no positive entries\"\n";
            return m.values;
        }
        return values;
    };

    PairedData group1;
    group1.y1 = load_block(args.y1, true);
    group1.y2 = load_block(args.y2, false);

    ZScoreMatrix z;
    std::size_t degenerate = 0;
    const bool two_sample = !args.y1b.empty() || !args.y2b.empty();
    if (two_sample) {
        if (args.y1b.empty() || args.y2b.empty())
            throw ValidationError("two-sample zscore needs both --group2-y1 and --group2-y2");
        PairedData group2;
        group2.y1 = load_block(args.y1b, true);
        group2.y2 = load_block(args.y2b, false);
        TwoSampleResult r = two_sample_z(group1, group2);
        z = std::move(r.z);
        degenerate = r.degenerate.size();
    } else {
        PearsonResult r = pearson_z(group1);
        z = std::move(r.z);
        degenerate = r.stats.degenerate.size();
    }
    if (degenerate > 0)
        std::cerr << "bisbm: warning kind=degenerate msg=\"" << degenerate
                  << " entries had near-zero variance and were set to 0\"\n";

    write_matrix(join_path(args.out, "z.csv"), z.values);
    json resolved{{"y1", args.y1},   {"y2", args.y2},       {"group2-y1", args.y1b},
                  {"group2-y2", args.y2b}, {"mclr", args.apply_mclr}, {"out", args.out}};
    write_manifest(args.out, "zscore", resolved);
    std::cout << "zscore: wrote " << z.rows() << "x" << z.cols() << " matrix ("
              << (two_sample ? "two-sample" : "one-sample") << ") to " << args.out << "\n";
    return 0;
}

struct FitArgs {
    std::string input;
    int b1 = 1, b2 = 1;
    FitOptions opts;
    std::string out;
};

void apply_fit_option_config(const ConfigDoc& cfg, CLI::App* sub, FitOptions& opts) {
    cfg.apply(sub->get_option("--seed"), "seed", opts.seed);
    cfg.apply(sub->get_option("--restarts"), "restarts", opts.n_restarts);
    cfg.apply(sub->get_option("--max-iters"), "max-iters", opts.max_outer_iters);
    cfg.apply(sub->get_option("--inner-iters"), "inner-iters", opts.inner_iters);
    cfg.apply(sub->get_option("--tol"), "tol", opts.elbo_rel_tol);
}

json fit_options_json(const FitOptions& opts) {
    return json{{"seed", opts.seed},
                {"restarts", opts.n_restarts},
                {"max-iters", opts.max_outer_iters},
                {"inner-iters", opts.inner_iters},
                {"tol", opts.elbo_rel_tol}};
}

int cmd_fit(const std::string& config_path, CLI::App* sub, FitArgs args) {
    const ConfigDoc cfg = ConfigDoc::load(
        config_path, {"input", "b1", "b2", "seed", "restarts", "max-iters", "inner-iters", "tol", "out"});
    cfg.apply(sub->get_option("--input"), "input", args.input);
    cfg.apply(sub->get_option("--b1"), "b1", args.b1);
    cfg.apply(sub->get_option("--b2"), "b2", args.b2);
    cfg.apply(sub->get_option("--out"), "out", args.out);
    apply_fit_option_config(cfg, sub, args.opts);
    ensure_out_dir(args.out);
    if (args.input.empty()) throw ValidationError("fit needs --input");

    const ZScoreMatrix x(read_matrix(args.input, MatrixKind::z));
    const Dimensions dims{x.rows(), x.cols(), args.b1, args.b2};
    const FitResult result = fit(x, dims, args.opts);
    write_fit_outputs(args.out, result);

    json resolved = fit_options_json(args.opts);
    resolved["input"] = args.input;
    resolved["b1"] = args.b1;
    resolved["b2"] = args.b2;
    resolved["out"] = args.out;
    write_manifest(args.out, "fit", resolved);
    std::cout << "fit: elbo=" << result.state.elbo << " converged=" << (result.converged ? 1 : 0)
              << " restarts=" << args.opts.n_restarts << " chosen=" << result.restart_index << "\n";
    return 0;
}

struct SelectArgs {
    std::string input;
    SelectionGrid grid;
    FitOptions opts;
    std::string out;
};

int cmd_select(const std::string& config_path, CLI::App* sub, SelectArgs args) {
    const ConfigDoc cfg = ConfigDoc::load(
        config_path, {"input", "b1-min", "b1-max", "b2-min", "b2-max", "seed", "restarts", "max-iters",
                      "inner-iters", "tol", "out"});
    cfg.apply(sub->get_option("--input"), "input", args.input);
    cfg.apply(sub->get_option("--b1-min"), "b1-min", args.grid.b1_min);
    cfg.apply(sub->get_option("--b1-max"), "b1-max", args.grid.b1_max);
    cfg.apply(sub->get_option("--b2-min"), "b2-min", args.grid.b2_min);
    cfg.apply(sub->get_option("--b2-max"), "b2-max", args.grid.b2_max);
    cfg.apply(sub->get_option("--out"), "out", args.out);
    apply_fit_option_config(cfg, sub, args.opts);
    ensure_out_dir(args.out);
    if (args.input.empty()) throw ValidationError("select needs --input");

    const ZScoreMatrix x(read_matrix(args.input, MatrixKind::z));
    const SelectionResult result = select_model(x, args.grid, args.opts);

    std::ofstream table(join_path(args.out, "icl_table.csv"));
    table << "b1,b2,icl,elbo_complete,penalty,converged,failed,error\n";
    for (const SelectionRecord& rec : result.table) {
        table << rec.b1 << ',' << rec.b2 << ',';
        if (rec.failed)
            table << ",,,0,1," << rec.error << '\n';
        else
            table << csv_double(rec.icl) << ',' << csv_double(rec.elbo_complete) << ','
                  << csv_double(rec.penalty) << ',' << (rec.fit.converged ? 1 : 0) << ",0,\n";
    }
    table.close();
    write_fit_outputs(args.out, result.best.fit);

    json resolved = fit_options_json(args.opts);
    resolved["input"] = args.input;
    resolved["b1-min"] = args.grid.b1_min;
    resolved["b1-max"] = args.grid.b1_max;
    resolved["b2-min"] = args.grid.b2_min;
    resolved["b2-max"] = args.grid.b2_max;
    resolved["out"] = args.out;
    write_manifest(args.out, "select", resolved);
    std::cout << "select: best b1=" << result.best.b1 << " b2=" << result.best.b2
              << " icl=" << result.best.icl << "\n";
    return 0;
}

struct TestArgs {
    std::string input, params, z1, z2;
    double alpha = 0.1;
    std::string out;
};

int cmd_test(const std::string& config_path, CLI::App* sub, TestArgs args) {
    const ConfigDoc cfg =
        ConfigDoc::load(config_path, {"input", "params", "z1", "z2", "alpha", "out"});
    cfg.apply(sub->get_option("--input"), "input", args.input);
    cfg.apply(sub->get_option("--params"), "params", args.params);
    cfg.apply(sub->get_option("--z1"), "z1", args.z1);
    cfg.apply(sub->get_option("--z2"), "z2", args.z2);
    cfg.apply(sub->get_option("--alpha"), "alpha", args.alpha);
    cfg.apply(sub->get_option("--out"), "out", args.out);
    ensure_out_dir(args.out);
    if (args.input.empty() || args.params.empty() || args.z1.empty() || args.z2.empty())
        throw ValidationError("test needs --input, --params, --z1 and --z2");

    const ZScoreMatrix x(read_matrix(args.input, MatrixKind::z));
    const ModelParams params = load_params(args.params);
    const MembershipVector z1 = load_membership(args.z1, Side::row);
    const MembershipVector z2 = load_membership(args.z2, Side::column);

    const DecisionReport report = test_edges(l_values(x, z1, z2, params), args.alpha);
    write_matrix(join_path(args.out, "lvalues.csv"), report.l_values.values);
    write_adjacency(join_path(args.out, "decisions.csv"), report.decisions);
    write_json(join_path(args.out, "report.json"),
               json{{"alpha", report.alpha},
                    {"tau", report.tau},
                    {"est_mfdr", report.est_mfdr},
                    {"n_rejected", report.n_rejected}});

    json resolved{{"input", args.input}, {"params", args.params}, {"z1", args.z1},
                  {"z2", args.z2},       {"alpha", args.alpha},   {"out", args.out}};
    write_manifest(args.out, "test", resolved);
    std::cout << "test: tau=" << report.tau << " est_mfdr=" << report.est_mfdr
              << " rejected=" << report.n_rejected << "\n";
    return 0;
}

int cmd_evaluate(const std::string& config_path, CLI::App* sub, std::string decisions_path,
                 std::string truth_path, std::string out) {
    const ConfigDoc cfg = ConfigDoc::load(config_path, {"decisions", "truth", "out"});
    cfg.apply(sub->get_option("--decisions"), "decisions", decisions_path);
    cfg.apply(sub->get_option("--truth"), "truth", truth_path);
    cfg.apply(sub->get_option("--out"), "out", out);
    if (decisions_path.empty() || truth_path.empty())
        throw ValidationError("evaluate needs --decisions and --truth");

    const Matrix d = read_matrix(decisions_path, MatrixKind::adjacency);
    const Matrix t = read_matrix(truth_path, MatrixKind::adjacency);
    AdjacencyMatrix truth;
    truth.entries = t.cast<int>();
    const EvalMetrics metrics = evaluate(d.cast<int>(), truth);

    std::cout << "fdp=" << metrics.fdp << " tdp=" << metrics.tdp
              << " rejected=" << metrics.n_rejected << "\n";
    if (!out.empty()) {
        ensure_out_dir(out);
        write_json(join_path(out, "metrics.json"), json{{"fdp", metrics.fdp},
                                                        {"tdp", metrics.tdp},
                                                        {"n_rejected", metrics.n_rejected}});
        write_manifest(out, "evaluate",
                       json{{"decisions", decisions_path}, {"truth", truth_path}, {"out", out}});
    }
    return 0;
}

struct ExperimentArgs {
    std::string scenario = "a";
    int n1 = 150, n2 = 200;
    int reps = 50;
    std::string alphas = "0.05,0.1";
    std::uint64_t seed = 0;
    bool select = false;
    SelectionGrid grid;
    FitOptions opts;
    std::string out;
};

int cmd_experiment(const std::string& config_path, CLI::App* sub, ExperimentArgs args) {
    const ConfigDoc cfg = ConfigDoc::load(
        config_path, {"scenario", "n1", "n2", "reps", "alphas", "seed", "select", "b1-min", "b1-max",
                      "b2-min", "b2-max", "restarts", "max-iters", "inner-iters", "tol", "out"});
    cfg.apply(sub->get_option("--scenario"), "scenario", args.scenario);
    cfg.apply(sub->get_option("--n1"), "n1", args.n1);
    cfg.apply(sub->get_option("--n2"), "n2", args.n2);
    cfg.apply(sub->get_option("--reps"), "reps", args.reps);
    cfg.apply(sub->get_option("--alphas"), "alphas", args.alphas);
    cfg.apply(sub->get_option("--seed"), "seed", args.seed);
    cfg.apply(sub->get_option("--select"), "select", args.select);
    cfg.apply(sub->get_option("--b1-min"), "b1-min", args.grid.b1_min);
    cfg.apply(sub->get_option("--b1-max"), "b1-max", args.grid.b1_max);
    cfg.apply(sub->get_option("--b2-min"), "b2-min", args.grid.b2_min);
    cfg.apply(sub->get_option("--b2-max"), "b2-max", args.grid.b2_max);
    cfg.apply(sub->get_option("--restarts"), "restarts", args.opts.n_restarts);
    cfg.apply(sub->get_option("--max-iters"), "max-iters", args.opts.max_outer_iters);
    cfg.apply(sub->get_option("--inner-iters"), "inner-iters", args.opts.inner_iters);
    cfg.apply(sub->get_option("--tol"), "tol", args.opts.elbo_rel_tol);
    cfg.apply(sub->get_option("--out"), "out", args.out);
    ensure_out_dir(args.out);

    ScenarioSpec spec;
    if (args.scenario == "a")
        spec = scenario_a(args.n1, args.n2);
    else if (args.scenario == "b")
        spec = scenario_b(args.n1, args.n2);
    else if (args.scenario == "c")
        spec = scenario_c(args.n1);
    else
        throw ValidationError("unknown scenario: " + args.scenario);

    ExperimentOptions opts;
    opts.reps = args.reps;
    opts.alphas = parse_alphas(args.alphas);
    opts.seed = args.seed;
    opts.use_selection = args.select;
    opts.grid = args.grid;
    opts.fit_opts = args.opts;
    const ExperimentSummary summary = run_experiment(spec, opts);

    std::ofstream sum(join_path(args.out, "summary.csv"));
    sum << "method,alpha,mean_fdp,mean_tdp,reps,wall_sec\n";
    std::ofstream roc(join_path(args.out, "roc.csv"));
    roc << "method,alpha,mean_fdp,mean_tdp\n";
    for (const SummaryRow& row : summary.rows) {
        sum << row.method << ',' << csv_double(row.alpha) << ',' << csv_double(row.mean_fdp) << ','
            << csv_double(row.mean_tdp) << ',' << row.reps << ',' << csv_double(row.wall_sec) << '\n';
        roc << row.method << ',' << csv_double(row.alpha) << ',' << csv_double(row.mean_fdp) << ','
            << csv_double(row.mean_tdp) << '\n';
    }

    json resolved = fit_options_json(args.opts);
    resolved["scenario"] = args.scenario;
    resolved["n1"] = args.n1;
    resolved["n2"] = args.n2;
    resolved["reps"] = args.reps;
    resolved["alphas"] = args.alphas;
    resolved["seed"] = args.seed;
    resolved["select"] = args.select;
    resolved["out"] = args.out;
    write_manifest(args.out, "experiment", resolved);

    for (const SummaryRow& row : summary.rows)
        std::cout << "experiment: method=" << row.method << " alpha=" << row.alpha
                  << " fdr=" << row.mean_fdp << " tdr=" << row.mean_tdp << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"bipartite noisy stochastic block model: fitting, model selection and FDR-controlled testing"};
    app.require_subcommand(1);

    std::string config_path;
    app.add_option("--config", config_path, "JSON config file (flags override its keys)")
        ->configurable(false);

    // simulate
    auto* sim = app.add_subcommand("simulate", "generate a latent graph and observations");
    std::string sim_scenario = "a", sim_params, sim_out;
    int sim_n1 = 150, sim_n2 = 200;
    std::uint64_t sim_seed = 0;
    auto* sim_opt_scenario = sim->add_option("--scenario", sim_scenario, "scenario a, b or c");
    auto* sim_opt_n1 = sim->add_option("--n1", sim_n1, "row count");
    auto* sim_opt_n2 = sim->add_option("--n2", sim_n2, "column count (ignored for scenario c)");
    auto* sim_opt_seed = sim->add_option("--seed", sim_seed, "generator seed");
    auto* sim_opt_params = sim->add_option("--params", sim_params, "custom biSBM params.json instead of a scenario");
    auto* sim_opt_out = sim->add_option("--out", sim_out, "output directory");

    // zscore
    auto* zsc = app.add_subcommand("zscore", "build the z-score matrix from paired abundance data");
    ZscoreArgs zargs;
    zsc->add_option("--y1", zargs.y1, "group-1 microbe abundance CSV (header + sample IDs)");
    zsc->add_option("--y2", zargs.y2, "group-1 metabolite abundance CSV");
    zsc->add_option("--group2-y1", zargs.y1b, "group-2 microbe CSV (enables the two-sample statistic)");
    zsc->add_option("--group2-y2", zargs.y2b, "group-2 metabolite CSV");
    zsc->add_option("--mclr", zargs.apply_mclr, "apply mCLR to: none|y1|y2|both")
        ->check(CLI::IsMember({"none", "y1", "y2", "both"}));
    zsc->add_option("--out", zargs.out, "output directory");

    // fit
    auto* fit_cmd = app.add_subcommand("fit", "variational EM fit at fixed block counts");
    FitArgs fargs;
    fit_cmd->add_option("--input", fargs.input, "z-score CSV");
    fit_cmd->add_option("--b1", fargs.b1, "row block count");
    fit_cmd->add_option("--b2", fargs.b2, "column block count");
    fit_cmd->add_option("--seed", fargs.opts.seed, "fit seed");
    fit_cmd->add_option("--restarts", fargs.opts.n_restarts, "number of restarts");
    fit_cmd->add_option("--max-iters", fargs.opts.max_outer_iters, "outer iteration cap");
    fit_cmd->add_option("--inner-iters", fargs.opts.inner_iters, "fixed-point sweeps per E-step");
    fit_cmd->add_option("--tol", fargs.opts.elbo_rel_tol, "relative ELBO tolerance");
    fit_cmd->add_option("--out", fargs.out, "output directory");

    // select
    auto* sel = app.add_subcommand("select", "ICL grid search over block counts");
    SelectArgs sargs;
    sel->add_option("--input", sargs.input, "z-score CSV");
    sel->add_option("--b1-min", sargs.grid.b1_min, "grid lower bound for b1");
    sel->add_option("--b1-max", sargs.grid.b1_max, "grid upper bound for b1");
    sel->add_option("--b2-min", sargs.grid.b2_min, "grid lower bound for b2");
    sel->add_option("--b2-max", sargs.grid.b2_max, "grid upper bound for b2");
    sel->add_option("--seed", sargs.opts.seed, "fit seed");
    sel->add_option("--restarts", sargs.opts.n_restarts, "number of restarts");
    sel->add_option("--max-iters", sargs.opts.max_outer_iters, "outer iteration cap");
    sel->add_option("--inner-iters", sargs.opts.inner_iters, "fixed-point sweeps per E-step");
    sel->add_option("--tol", sargs.opts.elbo_rel_tol, "relative ELBO tolerance");
    sel->add_option("--out", sargs.out, "output directory");

    // test
    auto* tst = app.add_subcommand("test", "FDR-controlled decisions from a fitted model");
    TestArgs targs;
    tst->add_option("--input", targs.input, "z-score CSV");
    tst->add_option("--params", targs.params, "params.json from fit/select");
    tst->add_option("--z1", targs.z1, "row memberships CSV");
    tst->add_option("--z2", targs.z2, "column memberships CSV");
    tst->add_option("--alpha", targs.alpha, "nominal mFDR level");
    tst->add_option("--out", targs.out, "output directory");

    // evaluate
    auto* eva = app.add_subcommand("evaluate", "compare decisions against a known truth");
    std::string eva_decisions, eva_truth, eva_out;
    eva->add_option("--decisions", eva_decisions, "0/1 decision CSV");
    eva->add_option("--truth", eva_truth, "0/1 adjacency CSV");
    eva->add_option("--out", eva_out, "optional output directory for metrics.json");

    // experiment
    auto* exp = app.add_subcommand("experiment", "replicated scenario pipeline with baselines");
    ExperimentArgs eargs;
    exp->add_option("--scenario", eargs.scenario, "scenario a, b or c");
    exp->add_option("--n1", eargs.n1, "row count");
    exp->add_option("--n2", eargs.n2, "column count");
    exp->add_option("--reps", eargs.reps, "replicate count");
    exp->add_option("--alphas", eargs.alphas, "comma-separated nominal levels");
    exp->add_option("--seed", eargs.seed, "base seed; replicate r uses seed + r");
    exp->add_flag("--select", eargs.select, "use ICL selection instead of the scenario block counts");
    exp->add_option("--b1-min", eargs.grid.b1_min, "selection grid bound");
    exp->add_option("--b1-max", eargs.grid.b1_max, "selection grid bound");
    exp->add_option("--b2-min", eargs.grid.b2_min, "selection grid bound");
    exp->add_option("--b2-max", eargs.grid.b2_max, "selection grid bound");
    exp->add_option("--restarts", eargs.opts.n_restarts, "fit restarts");
    exp->add_option("--max-iters", eargs.opts.max_outer_iters, "outer iteration cap");
    exp->add_option("--inner-iters", eargs.opts.inner_iters, "fixed-point sweeps per E-step");
    exp->add_option("--tol", eargs.opts.elbo_rel_tol, "relative ELBO tolerance");
    exp->add_option("--out", eargs.out, "output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "bisbm: error kind=usage msg=\"" << e.what() << "\"\n";
        return 2;
    }

    try {
        if (sim->parsed())
            return cmd_simulate(config_path, sim_opt_scenario, sim_opt_n1, sim_opt_n2, sim_opt_seed,
                                sim_opt_params, sim_opt_out, sim_scenario, sim_n1, sim_n2, sim_seed,
                                sim_params, sim_out);
        if (zsc->parsed()) return cmd_zscore(config_path, zsc, zargs);
        if (fit_cmd->parsed()) return cmd_fit(config_path, fit_cmd, fargs);
        if (sel->parsed()) return cmd_select(config_path, sel, sargs);
        if (tst->parsed()) return cmd_test(config_path, tst, targs);
        if (eva->parsed())
            return cmd_evaluate(config_path, eva, eva_decisions, eva_truth, eva_out);
        if (exp->parsed()) return cmd_experiment(config_path, exp, eargs);
        std::cerr << "bisbm: error kind=usage msg=\"no subcommand\"\n";
        return 2;
    } catch (const FitError& e) {
        std::cerr << "bisbm: error kind=numerical msg=\"" << e.what() << "\"\n";
        return 4;
    } catch (const Error& e) {
        std::cerr << "bisbm: error kind=data msg=\"" << e.what() << "\"\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "bisbm: error kind=internal msg=\"" << e.what() << "\"\n";
        return 4;
    }
}
