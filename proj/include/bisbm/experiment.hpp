#ifndef BISBM_EXPERIMENT_HPP
#define BISBM_EXPERIMENT_HPP

#include <chrono>
#include <cstdint>
#include <string>
#include <vector>

#include "bisbm/inference.hpp"
#include "bisbm/model.hpp"
#include "bisbm/parallel.hpp"
#include "bisbm/selection.hpp"
#include "bisbm/simulate.hpp"
#include "bisbm/testing.hpp"

namespace bisbm {

enum class Scenario { a, b, c };

inline const char* scenario_name(Scenario s) {
    switch (s) {
        case Scenario::a: return "a";
        case Scenario::b: return "b";
        case Scenario::c: return "c";
    }
    return "?";
}

inline Scenario scenario_from_name(const std::string& name) {
    if (name == "a") return Scenario::a;
    if (name == "b") return Scenario::b;
    if (name == "c") return Scenario::c;
    throw ValidationError("unknown scenario: " + name);
}

/// Data-generating design of one simulation scenario plus the block counts
/// the fitting step uses when model selection is off.
struct ScenarioSpec {
    Scenario kind = Scenario::a;
    int n1 = 150;
    int n2 = 200;  // ignored for scenario c, where n2 is emergent
    ModelParams gen_params;
    PAConfig pa;       // scenario c growth process
    int fit_b1 = 3;
    int fit_b2 = 3;
};

/// Three planted biclusters per side; dense diagonal blocks carry the weak
/// alternative mean, sparse off-diagonal blocks the strong one. Alternatives
/// are N(mu, 0.25).
inline ScenarioSpec scenario_a(int n1 = 150, int n2 = 200) {
    ScenarioSpec spec;
    spec.kind = Scenario::a;
    spec.n1 = n1;
    spec.n2 = n2;
    spec.fit_b1 = 3;
    spec.fit_b2 = 3;

    ModelParams& p = spec.gen_params;
    p.alpha1 = Vector::Constant(3, 1.0 / 3.0);
    p.alpha2 = Vector::Constant(3, 1.0 / 3.0);
    p.pi = Matrix::Constant(3, 3, 0.1);
    p.alt_params.mu = Matrix::Constant(3, 3, 3.0);
    for (int q = 0; q < 3; ++q) {
        p.pi(q, q) = 0.8;
        p.alt_params.mu(q, q) = 1.0;
    }
    p.alt_params.sigma_sq = Matrix::Constant(3, 3, 0.25);
    p.null_params.sigma0_sq = 1.0;
    return spec;
}

namespace detail {

// single-block observation layer N(2, 1) over a fixed latent graph
inline ModelParams fixed_graph_params() {
    ModelParams p;
    p.alpha1 = Vector::Ones(1);
    p.alpha2 = Vector::Ones(1);
    p.pi = Matrix::Constant(1, 1, 0.5);  // unused: the graph is fixed
    p.alt_params.mu = Matrix::Constant(1, 1, 2.0);
    p.alt_params.sigma_sq = Matrix::Constant(1, 1, 1.0);
    p.null_params.sigma0_sq = 1.0;
    return p;
}

}  // namespace detail

/// Fully nested latent graph with one generalist per side.
inline ScenarioSpec scenario_b(int n1 = 150, int n2 = 200) {
    ScenarioSpec spec;
    spec.kind = Scenario::b;
    spec.n1 = n1;
    spec.n2 = n2;
    spec.gen_params = detail::fixed_graph_params();
    spec.fit_b1 = 2;
    spec.fit_b2 = 2;
    return spec;
}

/// Bipartite preferential-attachment latent graph.
inline ScenarioSpec scenario_c(int n1 = 150) {
    ScenarioSpec spec;
    spec.kind = Scenario::c;
    spec.n1 = n1;
    spec.n2 = 0;
    spec.pa.n1 = n1;
    spec.gen_params = detail::fixed_graph_params();
    spec.fit_b1 = 3;
    spec.fit_b2 = 1;
    return spec;
}

struct ReplicateData {
    LatentTruth truth;
    ZScoreMatrix x;
};

/// One dataset of the scenario, fully determined by the seed.
inline ReplicateData generate_replicate(const ScenarioSpec& spec, std::uint64_t seed) {
    ReplicateData rep;
    switch (spec.kind) {
        case Scenario::a: {
            Dimensions dims{spec.n1, spec.n2, spec.gen_params.b1(), spec.gen_params.b2()};
            rep.truth = sample_bisbm(dims, spec.gen_params, seed);
            break;
        }
        case Scenario::b: {
            rep.truth.a = nested_graph(spec.n1, spec.n2);
            break;
        }
        case Scenario::c: {
            rep.truth.a = preferential_attachment(spec.pa, seed);
            break;
        }
    }
    if (spec.kind != Scenario::a) {
        rep.truth.z1.side = Side::row;
        rep.truth.z2.side = Side::column;
        rep.truth.z1.labels.assign(static_cast<std::size_t>(rep.truth.a.rows()), 1);
        rep.truth.z2.labels.assign(static_cast<std::size_t>(rep.truth.a.cols()), 1);
    }
    rep.x = sample_observations(rep.truth, spec.gen_params, seed);
    return rep;
}

struct ExperimentOptions {
    int reps = 50;
    std::vector<double> alphas = {0.05, 0.1};
    std::uint64_t seed = 0;
    std::vector<std::string> methods = {"bisbm", "bh", "storey", "sc"};
    bool use_selection = false;  // ICL grid search instead of the scenario's fixed (b1, b2)
    SelectionGrid grid;
    FitOptions fit_opts;

    void validate() const {
        if (reps < 1) throw InputError("ExperimentOptions: reps must be >= 1");
        if (alphas.empty()) throw InputError("ExperimentOptions: needs at least one alpha");
        for (double a : alphas)
            if (!(a > 0.0 && a <= 1.0)) throw InputError("ExperimentOptions: alpha must lie in (0, 1]");
    }
};

struct SummaryRow {
    std::string method;
    double alpha = 0.0;
    double mean_fdp = 0.0;  // empirical FDR
    double mean_tdp = 0.0;  // empirical TDR
    int reps = 0;
    double wall_sec = 0.0;  // total method time across replicates
};

struct ExperimentSummary {
    std::vector<SummaryRow> rows;  // method-major, alphas in option order
};

namespace detail {

struct ReplicateOutcome {
    // indexed [method][alpha]
    std::vector<std::vector<EvalMetrics>> metrics;
    std::vector<double> seconds;  // per method
};

inline ReplicateOutcome run_replicate(const ScenarioSpec& spec, const ExperimentOptions& opts,
                                      std::uint64_t seed) {
    using clock = std::chrono::steady_clock;
    const ReplicateData rep = generate_replicate(spec, seed);
    const std::vector<double> flat_z(rep.x.values.data(), rep.x.values.data() + rep.x.values.size());

    ReplicateOutcome out;
    out.metrics.resize(opts.methods.size());
    out.seconds.assign(opts.methods.size(), 0.0);

    for (std::size_t mth = 0; mth < opts.methods.size(); ++mth) {
        const std::string& method = opts.methods[mth];
        const auto started = clock::now();
        std::vector<EvalMetrics>& per_alpha = out.metrics[mth];

        if (method == "bisbm") {
            FitOptions fit_opts = opts.fit_opts;
            fit_opts.seed = seed;
            FitResult fitted;
            if (opts.use_selection) {
                fitted = select_model(rep.x, opts.grid, fit_opts).best.fit;
            } else {
                Dimensions dims{rep.x.rows(), rep.x.cols(), spec.fit_b1, spec.fit_b2};
                fitted = fit(rep.x, dims, fit_opts);
            }
            const LValueMatrix lvals = l_values(rep.x, fitted.z1_hat, fitted.z2_hat, fitted.params);
            for (double alpha : opts.alphas) {
                const ThresholdResult thr = mfdr_threshold(lvals, alpha);
                per_alpha.push_back(evaluate(decide(lvals, thr.tau), rep.truth.a));
            }
        } else if (method == "bh" || method == "storey") {
            std::vector<double> p(flat_z.size());
            for (std::size_t k = 0; k < flat_z.size(); ++k) p[k] = p_from_z(flat_z[k]);
            for (double alpha : opts.alphas) {
                const std::vector<int> reject =
                    method == "bh" ? bh(p, alpha) : storey(p, alpha, 0.5);
                IntMatrix decisions =
                    Eigen::Map<const IntMatrix>(reject.data(), rep.x.rows(), rep.x.cols());
                per_alpha.push_back(evaluate(decisions, rep.truth.a));
            }
        } else if (method == "sc") {
            const std::vector<double> lfdr = lfdr_values(flat_z);
            for (double alpha : opts.alphas) {
                const ThresholdResult thr = mfdr_threshold(lfdr, alpha);
                IntMatrix decisions(rep.x.rows(), rep.x.cols());
                for (int i = 0; i < rep.x.rows(); ++i)
                    for (int j = 0; j < rep.x.cols(); ++j)
                        decisions(i, j) =
                            lfdr[static_cast<std::size_t>(j) * rep.x.rows() + i] <= thr.tau ? 1 : 0;
                per_alpha.push_back(evaluate(decisions, rep.truth.a));
            }
        } else {
            throw ValidationError("unknown method: " + method);
        }
        out.seconds[mth] = std::chrono::duration<double>(clock::now() - started).count();
    }
    return out;
}

}  // namespace detail

/// Replicated scenario run. Replicates execute concurrently with seeds
/// seed + rep; per-replicate results land in their own slot and the summary
/// is reduced afterwards in replicate order, so it does not depend on
/// scheduling.
inline ExperimentSummary run_experiment(const ScenarioSpec& spec, const ExperimentOptions& opts) {
    opts.validate();
    std::vector<detail::ReplicateOutcome> outcomes(static_cast<std::size_t>(opts.reps));
    detail::parallel_tasks(opts.reps, detail::worker_count(), [&](int r) {
        outcomes[static_cast<std::size_t>(r)] =
            detail::run_replicate(spec, opts, opts.seed + static_cast<std::uint64_t>(r));
    });

    ExperimentSummary summary;
    for (std::size_t mth = 0; mth < opts.methods.size(); ++mth) {
        double seconds = 0.0;
        for (const auto& rep : outcomes) seconds += rep.seconds[mth];
        for (std::size_t a = 0; a < opts.alphas.size(); ++a) {
            SummaryRow row;
            row.method = opts.methods[mth];
            row.alpha = opts.alphas[a];
            row.reps = opts.reps;
            row.wall_sec = seconds;
            for (const auto& rep : outcomes) {
                row.mean_fdp += rep.metrics[mth][a].fdp;
                row.mean_tdp += rep.metrics[mth][a].tdp;
            }
            row.mean_fdp /= opts.reps;
            row.mean_tdp /= opts.reps;
            summary.rows.push_back(std::move(row));
        }
    }
    return summary;
}

}  // namespace bisbm

#endif  // BISBM_EXPERIMENT_HPP
