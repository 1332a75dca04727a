#ifndef BISBM_RNG_HPP
#define BISBM_RNG_HPP

#include <cmath>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "bisbm/errors.hpp"

namespace bisbm {

// Counter-based generator behind every simulator (contract "bisbm-rng-v1").
//
// Output words are splitmix64 finalizations of seed-offset counters, so the
// stream depends only on (seed, stream, draw index) and is identical across
// platforms and releases. The draw order consumed by each sampler below is
// part of the contract: changing it would silently break stored fixtures.
class CounterRng {
  public:
    explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0)
        : base_(mix64(seed ^ mix64(stream + 0x9E3779B97F4A7C15ull))) {}

    // Deterministic child stream, used to give restarts/replicates
    // independent substreams of one user-facing seed.
    static CounterRng derive(std::uint64_t seed, std::uint64_t salt) {
        return CounterRng(seed, salt + 1);
    }

    std::uint64_t next_u64() { return mix64(base_ + 0x9E3779B97F4A7C15ull * ++counter_); }

    // uniform in [0, 1), 53 usable bits
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Box-Muller; the spare value is cached, so normals are consumed in pairs.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 0.0) u1 = uniform();  // log(0) guard, probability 2^-53
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double t = 2.0 * M_PI * u2;
        spare_ = r * std::sin(t);
        has_spare_ = true;
        return r * std::cos(t);
    }

    double normal(double mean, double sd) { return mean + sd * normal(); }

    bool bernoulli(double p) { return uniform() < p; }

    // uniform over {0, ..., n-1}
    int uniform_int(int n) {
        if (n <= 0) throw IndexError("uniform_int: n must be positive");
        const int k = static_cast<int>(uniform() * static_cast<double>(n));
        return k >= n ? n - 1 : k;
    }

    // draw from a probability vector (entries >= 0, summing to ~1)
    int categorical(const Eigen::VectorXd& probs) {
        const double u = uniform();
        double acc = 0.0;
        for (int k = 0; k < probs.size(); ++k) {
            acc += probs[k];
            if (u < acc) return k;
        }
        return static_cast<int>(probs.size()) - 1;
    }

    // weighted draw over indices 0..w.size()-1; total must be > 0
    int weighted(const std::vector<double>& w, double total) {
        const double u = uniform() * total;
        double acc = 0.0;
        for (std::size_t k = 0; k < w.size(); ++k) {
            acc += w[k];
            if (u < acc) return static_cast<int>(k);
        }
        return static_cast<int>(w.size()) - 1;
    }

  private:
    static std::uint64_t mix64(std::uint64_t z) {
        z += 0x9E3779B97F4A7C15ull;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    std::uint64_t base_;
    std::uint64_t counter_ = 0;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace bisbm

#endif  // BISBM_RNG_HPP
