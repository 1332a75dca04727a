#ifndef BISBM_SIMULATE_HPP
#define BISBM_SIMULATE_HPP

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <vector>

#include "bisbm/model.hpp"
#include "bisbm/rng.hpp"

namespace bisbm {

/// Ground truth of one simulated dataset: memberships and the latent graph.
struct LatentTruth {
    MembershipVector z1;
    MembershipVector z2;
    AdjacencyMatrix a;
};

/// Bipartite preferential-attachment growth process. n2 is emergent.
struct PAConfig {
    int n1 = 150;
    double lambda = 0.8;  // per-edge probability of reusing an existing type-II vertex
    std::vector<int> degree_choices = {2, 3, 4, 5, 6};

    void validate() const {
        if (n1 < 1) throw DimensionError("PAConfig: n1 must be >= 1");
        if (lambda < 0.0 || lambda > 1.0) throw InputError("PAConfig: lambda must lie in [0, 1]");
        if (degree_choices.empty()) throw InputError("PAConfig: degree_choices must be nonempty");
        for (int d : degree_choices)
            if (d < 1) throw InputError("PAConfig: degrees must be >= 1");
    }
};

/// Draw memberships i.i.d. from alpha1/alpha2, then each edge independently
/// Bernoulli(pi[q][l]) given the memberships.
inline LatentTruth sample_bisbm(const Dimensions& dims, const ModelParams& params, std::uint64_t seed) {
    dims.validate();
    params.validate();
    CounterRng rng(seed);

    LatentTruth out;
    out.z1.side = Side::row;
    out.z2.side = Side::column;
    out.z1.labels.resize(static_cast<std::size_t>(dims.n1));
    out.z2.labels.resize(static_cast<std::size_t>(dims.n2));
    for (int i = 0; i < dims.n1; ++i) out.z1.labels[static_cast<std::size_t>(i)] = rng.categorical(params.alpha1) + 1;
    for (int j = 0; j < dims.n2; ++j) out.z2.labels[static_cast<std::size_t>(j)] = rng.categorical(params.alpha2) + 1;

    out.a.entries.resize(dims.n1, dims.n2);
    for (int i = 0; i < dims.n1; ++i) {
        const int q = out.z1.block_index(i);
        for (int j = 0; j < dims.n2; ++j) {
            const int l = out.z2.block_index(j);
            out.a.entries(i, j) = rng.bernoulli(params.pi(q, l)) ? 1 : 0;
        }
    }
    return out;
}

/// Observation layer: x_ij ~ N(0, sigma0_sq) off-edge, N(mu_ql, sigma_sq_ql) on-edge.
inline ZScoreMatrix sample_observations(const LatentTruth& truth, const ModelParams& params, std::uint64_t seed) {
    params.validate();
    const int n1 = truth.a.rows();
    const int n2 = truth.a.cols();
    if (truth.z1.size() != n1 || truth.z2.size() != n2)
        throw DimensionError("sample_observations: truth components are inconsistent");
    truth.z1.validate(params.b1());
    truth.z2.validate(params.b2());

    CounterRng rng(seed, 1);
    const double sd0 = std::sqrt(params.null_params.sigma0_sq);
    ZScoreMatrix x;
    x.values.resize(n1, n2);
    for (int i = 0; i < n1; ++i) {
        const int q = truth.z1.block_index(i);
        for (int j = 0; j < n2; ++j) {
            if (truth.a.entries(i, j) == 1) {
                const int l = truth.z2.block_index(j);
                x.values(i, j) = rng.normal(params.alt_params.mu(q, l), std::sqrt(params.alt_params.sigma_sq(q, l)));
            } else {
                x.values(i, j) = rng.normal(0.0, sd0);
            }
        }
    }
    return x;
}

/// Fully nested bipartite graph with a single generalist per vertex type:
/// the first row connects to every column, the first column to every row,
/// and no other edges exist. Every neighborhood is a prefix of the
/// generalist's, so the containment ordering is exact, and a two-block
/// model describes the graph perfectly (generalist-specialist blocks full,
/// specialist-specialist block empty).
inline AdjacencyMatrix nested_graph(int n1, int n2) {
    if (n1 < 2 || n2 < 2) throw DimensionError("nested_graph: requires n1 >= 2 and n2 >= 2");
    AdjacencyMatrix a;
    a.entries.resize(n1, n2);
    for (int i = 0; i < n1; ++i)
        for (int j = 0; j < n2; ++j) a.entries(i, j) = (i == 0 || j == 0) ? 1 : 0;
    return a;
}

/// Grow a bipartite graph one type-I vertex at a time. Each new vertex draws
/// its degree uniformly from degree_choices; every edge either creates a
/// fresh type-II vertex (prob 1-lambda) or attaches to an existing one with
/// probability proportional to current degree, never creating multi-edges.
/// When every existing type-II vertex is already adjacent, a fresh vertex is
/// created instead.
inline AdjacencyMatrix preferential_attachment(const PAConfig& config, std::uint64_t seed) {
    config.validate();
    CounterRng rng(seed, 2);

    std::vector<std::vector<int>> neighbors(static_cast<std::size_t>(config.n1));
    std::vector<double> degree2;  // degree of each type-II vertex
    const int n_choices = static_cast<int>(config.degree_choices.size());

    for (int i = 0; i < config.n1; ++i) {
        const int d = config.degree_choices[static_cast<std::size_t>(rng.uniform_int(n_choices))];
        std::vector<char> adjacent(degree2.size(), 0);
        for (int e = 0; e < d; ++e) {
            bool reuse = rng.bernoulli(config.lambda);
            int target = -1;
            if (reuse) {
                // mass over type-II vertices not already adjacent to vertex i
                double total = 0.0;
                std::vector<double> w(degree2.size(), 0.0);
                for (std::size_t v = 0; v < degree2.size(); ++v)
                    if (!adjacent[v]) {
                        w[v] = degree2[v];
                        total += w[v];
                    }
                if (total > 0.0)
                    target = rng.weighted(w, total);
            }
            if (target < 0) {
                target = static_cast<int>(degree2.size());
                degree2.push_back(0.0);
                adjacent.push_back(0);
            }
            neighbors[static_cast<std::size_t>(i)].push_back(target);
            adjacent[static_cast<std::size_t>(target)] = 1;
            degree2[static_cast<std::size_t>(target)] += 1.0;
        }
    }

    AdjacencyMatrix a;
    a.entries = IntMatrix::Zero(config.n1, static_cast<int>(degree2.size()));
    for (int i = 0; i < config.n1; ++i)
        for (int j : neighbors[static_cast<std::size_t>(i)]) a.entries(i, j) = 1;
    return a;
}

}  // namespace bisbm

#endif  // BISBM_SIMULATE_HPP
