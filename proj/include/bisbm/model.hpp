#ifndef BISBM_MODEL_HPP
#define BISBM_MODEL_HPP

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bisbm/errors.hpp"

namespace bisbm {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using IntMatrix = Eigen::MatrixXi;

inline constexpr double kPiClampLo = 1e-10;
inline constexpr double kPiClampHi = 1.0 - 1e-10;
inline constexpr double kVarianceFloor = 1e-8;

/// Problem sizes: n1 row nodes x n2 column nodes, B1 x B2 blocks.
struct Dimensions {
    int n1 = 0;
    int n2 = 0;
    int b1 = 1;
    int b2 = 1;

    void validate() const {
        if (n1 < 1 || n2 < 1) throw DimensionError("Dimensions: n1 and n2 must be >= 1");
        if (b1 < 1 || b2 < 1) throw DimensionError("Dimensions: b1 and b2 must be >= 1");
        if (b1 > n1 || b2 > n2) throw DimensionError("Dimensions: block counts cannot exceed node counts");
    }
};

/// Observed test-statistic matrix; every entry must be finite.
struct ZScoreMatrix {
    Matrix values;

    ZScoreMatrix() = default;
    explicit ZScoreMatrix(Matrix v) : values(std::move(v)) {}

    int rows() const { return static_cast<int>(values.rows()); }
    int cols() const { return static_cast<int>(values.cols()); }

    void validate() const {
        if (!values.allFinite())
            throw InputError("ZScoreMatrix: non-finite entry");
    }
};

/// Null observation density N(0, sigma0_sq); the mean is fixed at zero and
/// never estimated, so the family has a single free parameter.
struct NullParams {
    double sigma0_sq = 1.0;
    static constexpr int d0 = 1;

    void validate() const {
        if (!(sigma0_sq > 0.0)) throw InputError("NullParams: sigma0_sq must be > 0");
    }
};

/// Alternative densities N(mu_ql, sigma_sq_ql), one pair per block pair.
struct AltParams {
    Matrix mu;        // B1 x B2
    Matrix sigma_sq;  // B1 x B2
    static constexpr int d1 = 2;

    void validate() const {
        if (mu.rows() != sigma_sq.rows() || mu.cols() != sigma_sq.cols())
            throw DimensionError("AltParams: mu and sigma_sq shapes differ");
        if ((sigma_sq.array() <= 0.0).any())
            throw InputError("AltParams: every sigma_sq entry must be > 0");
    }
};

/// Complete parameter set (alpha1, alpha2, Pi, nu0, nu).
struct ModelParams {
    Vector alpha1;         // length B1, simplex
    Vector alpha2;         // length B2, simplex
    Matrix pi;             // B1 x B2, entries in [0, 1]
    NullParams null_params;
    AltParams alt_params;

    int b1() const { return static_cast<int>(alpha1.size()); }
    int b2() const { return static_cast<int>(alpha2.size()); }

    void validate() const {
        if ((alpha1.array() < 0.0).any() || (alpha2.array() < 0.0).any())
            throw InputError("ModelParams: mixing proportions must be >= 0");
        if (std::abs(alpha1.sum() - 1.0) > 1e-12 || std::abs(alpha2.sum() - 1.0) > 1e-12)
            throw InputError("ModelParams: mixing proportions must sum to 1");
        if (pi.rows() != b1() || pi.cols() != b2())
            throw DimensionError("ModelParams: pi shape does not match block counts");
        if ((pi.array() < 0.0).any() || (pi.array() > 1.0).any())
            throw InputError("ModelParams: pi entries must lie in [0, 1]");
        null_params.validate();
        alt_params.validate();
        if (alt_params.mu.rows() != b1() || alt_params.mu.cols() != b2())
            throw DimensionError("ModelParams: alternative parameter shape does not match block counts");
    }
};

enum class Side { row, column };

/// Hard block assignment for one vertex type. Labels are 1-based, matching
/// the on-disk format; block_index() gives the 0-based view used internally.
struct MembershipVector {
    Side side = Side::row;
    std::vector<int> labels;  // values in 1..B

    int size() const { return static_cast<int>(labels.size()); }
    int block_index(int i) const { return labels[static_cast<std::size_t>(i)] - 1; }

    void validate(int n_blocks) const {
        for (int v : labels)
            if (v < 1 || v > n_blocks) throw IndexError("MembershipVector: label out of range");
    }
};

/// Binary bipartite adjacency.
struct AdjacencyMatrix {
    IntMatrix entries;  // 0/1

    int rows() const { return static_cast<int>(entries.rows()); }
    int cols() const { return static_cast<int>(entries.cols()); }

    void validate() const {
        if (((entries.array() != 0) && (entries.array() != 1)).any())
            throw InputError("AdjacencyMatrix: entries must be 0 or 1");
    }
};

inline double log_normal_pdf(double x, double mean, double variance) {
    return -0.5 * std::log(2.0 * M_PI * variance) - (x - mean) * (x - mean) / (2.0 * variance);
}

/// log g0(x; nu0) = log N(x; 0, sigma0_sq)
inline double log_null_density(double x, const NullParams& params) {
    return log_normal_pdf(x, 0.0, params.sigma0_sq);
}

/// log g(x; nu_ql) = log N(x; mu_ql, sigma_sq_ql); q, l are 0-based.
inline double log_alt_density(double x, int q, int l, const AltParams& params) {
    if (q < 0 || q >= params.mu.rows() || l < 0 || l >= params.mu.cols())
        throw IndexError("log_alt_density: block index out of range");
    return log_normal_pdf(x, params.mu(q, l), params.sigma_sq(q, l));
}

namespace detail {

// sigmoid(a - b) without overflow; exact 0/1 only in the limit
inline double stable_sigmoid_diff(double a, double b) {
    const double t = a - b;
    if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
    const double e = std::exp(t);
    return e / (1.0 + e);
}

// log(e^a + e^b)
inline double log_add_exp(double a, double b) {
    const double m = a > b ? a : b;
    return m + std::log1p(std::exp(-std::abs(a - b)));
}

}  // namespace detail

/// rho = pi*g / (pi*g + (1-pi)*g0), the posterior edge probability given the
/// block pair. Evaluated through log-space differences so it stays defined
/// for |x| far in either tail; pi exactly 0 or 1 short-circuits.
inline double edge_responsibility(double x, int q, int l, const ModelParams& params) {
    const double pi = params.pi(q, l);
    if (pi <= 0.0) return 0.0;
    if (pi >= 1.0) return 1.0;
    const double a = std::log(pi) + log_alt_density(x, q, l, params.alt_params);
    const double b = std::log1p(-pi) + log_null_density(x, params.null_params);
    return detail::stable_sigmoid_diff(a, b);
}

/// Structured l-value: posterior probability that no edge is present,
/// l = (1-pi)*g0 / (pi*g + (1-pi)*g0). Computed on its own stable path
/// rather than as 1 - edge_responsibility so l near 0 keeps full precision.
inline double l_value(double x, int q, int l, const ModelParams& params) {
    const double pi = params.pi(q, l);
    if (pi <= 0.0) return 1.0;
    if (pi >= 1.0) return 0.0;
    const double a = std::log(pi) + log_alt_density(x, q, l, params.alt_params);
    const double b = std::log1p(-pi) + log_null_density(x, params.null_params);
    return detail::stable_sigmoid_diff(b, a);
}

}  // namespace bisbm

#endif  // BISBM_MODEL_HPP
