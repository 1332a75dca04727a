#include <catch2/catch.hpp>

#include <cstdlib>

#include "bisbm/experiment.hpp"

using namespace bisbm;

TEST_CASE("scenario replicates are seeded and shaped correctly", "[experiment]") {
    SECTION("scenario a draws a planted block model") {
        const ScenarioSpec spec = scenario_a(30, 40);
        const ReplicateData rep = generate_replicate(spec, 5);
        CHECK(rep.x.rows() == 30);
        CHECK(rep.x.cols() == 40);
        CHECK(rep.truth.a.rows() == 30);
        const ReplicateData again = generate_replicate(spec, 5);
        CHECK(rep.x.values == again.x.values);
        CHECK(rep.truth.a.entries == again.truth.a.entries);
    }
    SECTION("scenario b uses the fixed nested graph") {
        const ScenarioSpec spec = scenario_b(20, 25);
        const ReplicateData rep = generate_replicate(spec, 1);
        CHECK(rep.truth.a.entries == nested_graph(20, 25).entries);
        CHECK(rep.truth.z1.labels == std::vector<int>(20, 1));
    }
    SECTION("scenario c has an emergent column count") {
        const ScenarioSpec spec = scenario_c(40);
        const ReplicateData rep = generate_replicate(spec, 2);
        CHECK(rep.truth.a.rows() == 40);
        // one fresh type-II vertex per edge at rate 1 - lambda = 0.2, from
        // degrees averaging 4, so n2 lands near 0.8 * n1
        CHECK(rep.truth.a.cols() > 40 / 2);
        CHECK(rep.truth.a.cols() < 2 * 40);
        CHECK(rep.x.cols() == rep.truth.a.cols());
    }
}

TEST_CASE("experiment summary is independent of worker count", "[experiment]") {
    const ScenarioSpec spec = scenario_b(20, 25);
    ExperimentOptions opts;
    opts.reps = 4;
    opts.alphas = {0.05, 0.2};
    opts.seed = 11;
    opts.methods = {"bh", "storey"};

    setenv("BISBM_THREADS", "1", 1);
    const ExperimentSummary serial = run_experiment(spec, opts);
    setenv("BISBM_THREADS", "4", 1);
    const ExperimentSummary parallel = run_experiment(spec, opts);
    unsetenv("BISBM_THREADS");

    REQUIRE(serial.rows.size() == parallel.rows.size());
    REQUIRE(serial.rows.size() == 4);
    for (std::size_t k = 0; k < serial.rows.size(); ++k) {
        CHECK(serial.rows[k].method == parallel.rows[k].method);
        CHECK(serial.rows[k].alpha == parallel.rows[k].alpha);
        CHECK(serial.rows[k].mean_fdp == parallel.rows[k].mean_fdp);
        CHECK(serial.rows[k].mean_tdp == parallel.rows[k].mean_tdp);
        CHECK(serial.rows[k].mean_fdp >= 0.0);
        CHECK(serial.rows[k].mean_fdp <= 1.0);
        CHECK(serial.rows[k].mean_tdp >= 0.0);
        CHECK(serial.rows[k].mean_tdp <= 1.0);
        CHECK(serial.rows[k].reps == 4);
    }
    CHECK_THROWS_AS(run_experiment(spec, [] {
                        ExperimentOptions bad;
                        bad.reps = 0;
                        return bad;
                    }()),
                    InputError);
}
