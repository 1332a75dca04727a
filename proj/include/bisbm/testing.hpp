#ifndef BISBM_TESTING_HPP
#define BISBM_TESTING_HPP

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "bisbm/model.hpp"

namespace bisbm {

/// Structured l-values for every (i, j) pair.
struct LValueMatrix {
    Matrix values;  // entries in [0, 1]

    int rows() const { return static_cast<int>(values.rows()); }
    int cols() const { return static_cast<int>(values.cols()); }
};

/// Outcome of thresholding the l-values at nominal level alpha.
struct DecisionReport {
    LValueMatrix l_values;
    double tau = -1.0;        // -1 means "reject nothing"
    IntMatrix decisions;      // phi_ij = 1(l_ij <= tau)
    double est_mfdr = 0.0;
    double alpha = 0.0;
    long n_rejected = 0;
};

struct EvalMetrics {
    double fdp = 0.0;
    double tdp = 0.0;
    long n_rejected = 0;
};

struct ThresholdResult {
    double tau = -1.0;
    double est_mfdr = 0.0;
};

/// two-sided p-value under N(0,1): p = 2 (1 - Phi(|z|)) = erfc(|z| / sqrt 2)
inline double p_from_z(double z) {
    if (!std::isfinite(z)) throw InputError("p_from_z: non-finite z");
    return std::erfc(std::abs(z) / M_SQRT2);
}

/// l_ij evaluated at the estimated memberships and parameters.
inline LValueMatrix l_values(const ZScoreMatrix& x, const MembershipVector& z1, const MembershipVector& z2,
                             const ModelParams& params) {
    if (z1.size() != x.rows() || z2.size() != x.cols())
        throw DimensionError("l_values: membership lengths do not match the matrix");
    z1.validate(params.b1());
    z2.validate(params.b2());

    LValueMatrix out;
    out.values.resize(x.rows(), x.cols());
    for (int i = 0; i < x.rows(); ++i) {
        const int q = z1.block_index(i);
        for (int j = 0; j < x.cols(); ++j)
            out.values(i, j) = l_value(x.values(i, j), q, z2.block_index(j), params);
    }
    return out;
}

/// Largest threshold whose plug-in mFDR estimate (the mean of the rejected
/// l-values) stays at or below alpha. Candidate thresholds are the distinct
/// observed l-values, so ties at tau are rejected as a group; tau = -1 when
/// even the smallest group fails.
inline ThresholdResult mfdr_threshold(std::vector<double> l, double alpha) {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw InputError("mfdr_threshold: alpha must lie in (0, 1]");
    ThresholdResult out;
    if (l.empty()) return out;
    std::sort(l.begin(), l.end());

    double running = 0.0;
    for (std::size_t k = 0; k < l.size(); ++k) {
        running += l[k];
        if (k + 1 < l.size() && l[k + 1] == l[k]) continue;  // close the tie group
        const double mean = running / static_cast<double>(k + 1);
        if (mean <= alpha) {
            out.tau = l[k];
            out.est_mfdr = mean;
        }
    }
    return out;
}

inline ThresholdResult mfdr_threshold(const LValueMatrix& l, double alpha) {
    std::vector<double> flat(l.values.data(), l.values.data() + l.values.size());
    return mfdr_threshold(std::move(flat), alpha);
}

inline IntMatrix decide(const LValueMatrix& l, double tau) {
    return (l.values.array() <= tau).cast<int>().matrix();
}

/// l-values -> thresholded decision report at level alpha.
inline DecisionReport test_edges(LValueMatrix l, double alpha) {
    DecisionReport report;
    report.alpha = alpha;
    const ThresholdResult thr = mfdr_threshold(l, alpha);
    report.tau = thr.tau;
    report.est_mfdr = thr.est_mfdr;
    report.decisions = decide(l, thr.tau);
    report.n_rejected = report.decisions.sum();
    report.l_values = std::move(l);
    return report;
}

/// Benjamini-Hochberg step-up: reject every p <= p_(k*) where
/// k* = max{k : p_(k) <= k alpha / m}.
inline std::vector<int> bh(const std::vector<double>& p, double alpha) {
    const std::size_t m = p.size();
    std::vector<int> reject(m, 0);
    if (m == 0) return reject;
    for (double v : p)
        if (!(v >= 0.0 && v <= 1.0)) throw InputError("bh: p-values must lie in [0, 1]");

    std::vector<double> sorted(p);
    std::sort(sorted.begin(), sorted.end());
    double threshold = -1.0;
    for (std::size_t k = m; k >= 1; --k) {
        if (sorted[k - 1] <= static_cast<double>(k) * alpha / static_cast<double>(m)) {
            threshold = sorted[k - 1];
            break;
        }
    }
    if (threshold >= 0.0)
        for (std::size_t i = 0; i < m; ++i) reject[i] = p[i] <= threshold ? 1 : 0;
    return reject;
}

/// Adaptive BH with Storey's null-proportion estimate
/// pi0 = min(1, #{p > lambda} / ((1 - lambda) m)), applied at level alpha/pi0.
inline std::vector<int> storey(const std::vector<double>& p, double alpha, double lambda_tune = 0.5) {
    if (!(lambda_tune >= 0.0 && lambda_tune < 1.0))
        throw InputError("storey: lambda must lie in [0, 1)");
    const std::size_t m = p.size();
    if (m == 0) return {};
    std::size_t above = 0;
    for (double v : p)
        if (v > lambda_tune) ++above;
    const double pi0 =
        std::min(1.0, static_cast<double>(above) / ((1.0 - lambda_tune) * static_cast<double>(m)));
    if (pi0 == 0.0) return std::vector<int>(m, 1);  // no mass above lambda: everything clears step-up
    return bh(p, alpha / pi0);
}

namespace detail {

// Gaussian KDE on a fixed grid (Silverman bandwidth), evaluated by linear
// interpolation. Plenty of resolution for lfdr at the sample sizes used here.
struct KernelDensity {
    std::vector<double> grid;
    std::vector<double> density;
    double lo = 0.0, step = 1.0;

    static KernelDensity fit(const std::vector<double>& z, int n_bins = 2048) {
        const std::size_t m = z.size();
        double mean = 0.0;
        for (double v : z) mean += v;
        mean /= static_cast<double>(m);
        double var = 0.0;
        for (double v : z) var += (v - mean) * (v - mean);
        var /= static_cast<double>(m);
        std::vector<double> sorted(z);
        std::sort(sorted.begin(), sorted.end());
        const double iqr = sorted[static_cast<std::size_t>(0.75 * (m - 1))] -
                           sorted[static_cast<std::size_t>(0.25 * (m - 1))];
        double spread = std::sqrt(var);
        if (iqr > 0.0) spread = std::min(spread, iqr / 1.34);
        double h = 0.9 * spread * std::pow(static_cast<double>(m), -0.2);
        if (!(h > 0.0)) h = 1e-3;

        KernelDensity kd;
        kd.lo = sorted.front() - 4.0 * h;
        const double hi = sorted.back() + 4.0 * h;
        kd.step = (hi - kd.lo) / (n_bins - 1);
        std::vector<double> counts(static_cast<std::size_t>(n_bins), 0.0);
        for (double v : z) {
            // split mass between the two nearest grid points
            const double pos = (v - kd.lo) / kd.step;
            const int b = std::min(n_bins - 2, std::max(0, static_cast<int>(pos)));
            const double frac = pos - b;
            counts[static_cast<std::size_t>(b)] += 1.0 - frac;
            counts[static_cast<std::size_t>(b) + 1] += frac;
        }
        const int radius = std::max(1, static_cast<int>(std::ceil(5.0 * h / kd.step)));
        std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
        for (int k = -radius; k <= radius; ++k)
            kernel[static_cast<std::size_t>(k + radius)] =
                std::exp(-0.5 * (k * kd.step) * (k * kd.step) / (h * h));
        double norm = 0.0;
        for (double w : kernel) norm += w;
        norm *= static_cast<double>(m) * kd.step;

        kd.density.assign(static_cast<std::size_t>(n_bins), 0.0);
        for (int b = 0; b < n_bins; ++b) {
            if (counts[static_cast<std::size_t>(b)] == 0.0) continue;
            const int from = std::max(0, b - radius);
            const int to = std::min(n_bins - 1, b + radius);
            for (int t = from; t <= to; ++t)
                kd.density[static_cast<std::size_t>(t)] +=
                    counts[static_cast<std::size_t>(b)] * kernel[static_cast<std::size_t>(t - b + radius)];
        }
        for (double& v : kd.density) v /= norm;
        return kd;
    }

    double operator()(double v) const {
        const double pos = (v - lo) / step;
        const int n = static_cast<int>(density.size());
        if (pos <= 0.0) return density.front();
        if (pos >= n - 1) return density.back();
        const int b = static_cast<int>(pos);
        const double frac = pos - b;
        return density[static_cast<std::size_t>(b)] * (1.0 - frac) +
               density[static_cast<std::size_t>(b) + 1] * frac;
    }
};

}  // namespace detail

/// Empirical local fdr with the null density granted as N(0,1):
/// lfdr_i = min(1, pi0_hat phi(z_i) / f_hat(z_i)), with f_hat a Gaussian KDE
/// (Silverman bandwidth) and pi0_hat the Storey estimate at lambda = 0.5 on
/// two-sided p-values.
inline std::vector<double> lfdr_values(const std::vector<double>& z) {
    if (z.empty()) return {};
    for (double v : z)
        if (!std::isfinite(v)) throw InputError("lfdr_values: non-finite z");

    std::size_t above = 0;
    for (double v : z)
        if (p_from_z(v) > 0.5) ++above;
    const double pi0 = std::min(1.0, static_cast<double>(above) / (0.5 * static_cast<double>(z.size())));

    const detail::KernelDensity kde = detail::KernelDensity::fit(z);
    const NullParams std_null;
    std::vector<double> lfdr(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) {
        const double f = std::max(kde(z[i]), 1e-300);
        lfdr[i] = std::min(1.0, pi0 * std::exp(log_null_density(z[i], std_null)) / f);
    }
    return lfdr;
}

/// Sun-and-Cai style baseline: threshold the lfdr values by the same
/// running-mean rule used for structured l-values.
inline std::vector<int> lfdr_threshold(const std::vector<double>& z, double alpha) {
    const std::vector<double> lfdr = lfdr_values(z);
    const ThresholdResult thr = mfdr_threshold(lfdr, alpha);
    std::vector<int> reject(z.size(), 0);
    for (std::size_t i = 0; i < lfdr.size(); ++i) reject[i] = lfdr[i] <= thr.tau ? 1 : 0;
    return reject;
}

/// Per-dataset false/true discovery proportions against the latent graph.
inline EvalMetrics evaluate(const IntMatrix& decisions, const AdjacencyMatrix& truth) {
    if (decisions.rows() != truth.entries.rows() || decisions.cols() != truth.entries.cols())
        throw DimensionError("evaluate: decision and truth shapes differ");
    long rejected = 0, false_rej = 0, true_rej = 0, edges = 0;
    for (int i = 0; i < decisions.rows(); ++i)
        for (int j = 0; j < decisions.cols(); ++j) {
            const bool edge = truth.entries(i, j) == 1;
            edges += edge;
            if (decisions(i, j) == 1) {
                ++rejected;
                if (edge)
                    ++true_rej;
                else
                    ++false_rej;
            }
        }
    EvalMetrics m;
    m.n_rejected = rejected;
    m.fdp = static_cast<double>(false_rej) / static_cast<double>(std::max(rejected, 1L));
    m.tdp = static_cast<double>(true_rej) / static_cast<double>(std::max(edges, 1L));
    return m;
}

/// Adjusted Rand index between two labelings (permutation invariant).
inline double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b) {
    if (a.size() != b.size()) throw DimensionError("adjusted_rand_index: length mismatch");
    const std::size_t n = a.size();
    if (n == 0) return 1.0;
    const int ka = *std::max_element(a.begin(), a.end());
    const int kb = *std::max_element(b.begin(), b.end());
    Matrix table = Matrix::Zero(ka + 1, kb + 1);
    for (std::size_t i = 0; i < n; ++i) table(a[i], b[i]) += 1.0;

    auto choose2 = [](double v) { return v * (v - 1.0) / 2.0; };
    double sum_cells = 0.0, sum_rows = 0.0, sum_cols = 0.0;
    for (int i = 0; i <= ka; ++i)
        for (int j = 0; j <= kb; ++j) sum_cells += choose2(table(i, j));
    for (int i = 0; i <= ka; ++i) sum_rows += choose2(table.row(i).sum());
    for (int j = 0; j <= kb; ++j) sum_cols += choose2(table.col(j).sum());
    const double expected = sum_rows * sum_cols / choose2(static_cast<double>(n));
    const double max_index = 0.5 * (sum_rows + sum_cols);
    if (max_index == expected) return 1.0;  // both clusterings trivial
    return (sum_cells - expected) / (max_index - expected);
}

}  // namespace bisbm

#endif  // BISBM_TESTING_HPP
