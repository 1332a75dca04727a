#ifndef BISBM_STATS_HPP
#define BISBM_STATS_HPP

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "bisbm/model.hpp"

namespace bisbm {

/// Paired abundance blocks: rows are the same m individuals in both matrices.
struct PairedData {
    Matrix y1;  // m x n1
    Matrix y2;  // m x n2

    int m() const { return static_cast<int>(y1.rows()); }
    int n1() const { return static_cast<int>(y1.cols()); }
    int n2() const { return static_cast<int>(y2.cols()); }

    void validate() const {
        if (y1.rows() != y2.rows()) throw DimensionError("PairedData: sample counts differ");
        if (y1.rows() < 3) throw InputError("PairedData: needs at least 3 samples");
        if (!y1.allFinite() || !y2.allFinite()) throw InputError("PairedData: non-finite entry");
    }
};

/// Pearson estimates and the variance terms feeding the z-statistics.
struct CorrelationStats {
    Matrix rho_hat;  // n1 x n2, entries in [-1, 1]
    Matrix s;        // n1 x n2, entries >= 0
    std::vector<std::pair<int, int>> degenerate;  // entries zeroed for s < 1e-12
};

struct PearsonResult {
    ZScoreMatrix z;
    CorrelationStats stats;
};

struct TwoSampleResult {
    ZScoreMatrix z;
    std::vector<std::pair<int, int>> degenerate;
};

struct MclrResult {
    Matrix values;
    std::vector<int> all_zero_rows;  // rows left untouched, reported as warnings
};

/// Center and scale each column to mean 0, variance 1 under the 1/m
/// (population) convention used throughout the statistic formulas.
inline Matrix standardize_columns(const Matrix& y) {
    const int m = static_cast<int>(y.rows());
    Matrix out(y.rows(), y.cols());
    for (int j = 0; j < y.cols(); ++j) {
        const double mean = y.col(j).mean();
        const double var = (y.col(j).array() - mean).square().sum() / m;
        if (!(var > 0.0))
            throw ZeroVarianceError("standardize_columns: column " + std::to_string(j) +
                                    " has zero variance");
        out.col(j) = (y.col(j).array() - mean) / std::sqrt(var);
    }
    return out;
}

namespace detail {

// rho_hat = Y1~' Y2~ / m and s via the cross-moment identity
//   m s = 4 S22 - 4 rho (S21 + S12) + rho^2 (m + 2 m rho + m),
// with S22 = sum a^2 b^2, S21 = sum a^2 b, S12 = sum a b^2 over samples.
inline void pearson_terms(const Matrix& t1, const Matrix& t2, Matrix& rho, Matrix& s) {
    const double m = static_cast<double>(t1.rows());
    rho = (t1.transpose() * t2) / m;
    const Matrix sq1 = t1.array().square();
    const Matrix sq2 = t2.array().square();
    const Matrix s22 = sq1.transpose() * sq2;
    const Matrix s21 = sq1.transpose() * t2;
    const Matrix s12 = t1.transpose() * sq2;
    s = (4.0 * s22.array() - 4.0 * rho.array() * (s21.array() + s12.array())) / m +
        rho.array().square() * (2.0 + 2.0 * rho.array());
    s = s.array().max(0.0);  // clear tiny negative rounding residue
}

}  // namespace detail

/// One-sample statistics x_ij = 2 rho_hat_ij / sqrt(s_ij / m) after column
/// standardization. A pathological pair with s < 1e-12 yields x = 0 and a
/// degenerate flag instead of aborting the matrix.
inline PearsonResult pearson_z(const PairedData& data) {
    data.validate();
    const Matrix t1 = standardize_columns(data.y1);
    const Matrix t2 = standardize_columns(data.y2);

    PearsonResult out;
    detail::pearson_terms(t1, t2, out.stats.rho_hat, out.stats.s);

    const double m = static_cast<double>(data.m());
    out.z.values.resize(data.n1(), data.n2());
    for (int i = 0; i < data.n1(); ++i)
        for (int j = 0; j < data.n2(); ++j) {
            const double s = out.stats.s(i, j);
            if (s < 1e-12) {
                out.z.values(i, j) = 0.0;
                out.stats.degenerate.emplace_back(i, j);
            } else {
                out.z.values(i, j) = 2.0 * out.stats.rho_hat(i, j) / std::sqrt(s / m);
            }
        }
    return out;
}

/// Two-sample statistic for H0: rho(1) = rho(2),
/// x_ij = 2 (rho1 - rho2) / sqrt(s1/m1 + s2/m2), each group standardized
/// and estimated on its own.
inline TwoSampleResult two_sample_z(const PairedData& group1, const PairedData& group2) {
    group1.validate();
    group2.validate();
    if (group1.n1() != group2.n1() || group1.n2() != group2.n2())
        throw DimensionError("two_sample_z: feature counts differ between groups");

    Matrix rho1, s1, rho2, s2;
    detail::pearson_terms(standardize_columns(group1.y1), standardize_columns(group1.y2), rho1, s1);
    detail::pearson_terms(standardize_columns(group2.y1), standardize_columns(group2.y2), rho2, s2);

    const double m1 = static_cast<double>(group1.m());
    const double m2 = static_cast<double>(group2.m());
    TwoSampleResult out;
    out.z.values.resize(group1.n1(), group1.n2());
    for (int i = 0; i < group1.n1(); ++i)
        for (int j = 0; j < group1.n2(); ++j) {
            const double denom = s1(i, j) / m1 + s2(i, j) / m2;
            if (denom < 1e-12) {
                out.z.values(i, j) = 0.0;
                out.degenerate.emplace_back(i, j);
            } else {
                out.z.values(i, j) = 2.0 * (rho1(i, j) - rho2(i, j)) / std::sqrt(denom);
            }
        }
    return out;
}

/// Modified centered log-ratio: within each row, positive entries become
/// log(value) minus the mean log over that row's positive entries; zeros
/// stay exactly zero. Rows with no positive entry are reported.
inline MclrResult mclr(const Matrix& counts) {
    if ((counts.array() < 0.0).any()) throw InputError("mclr: entries must be nonnegative");
    MclrResult out;
    out.values = Matrix::Zero(counts.rows(), counts.cols());
    for (int i = 0; i < counts.rows(); ++i) {
        double log_sum = 0.0;
        int n_pos = 0;
        for (int j = 0; j < counts.cols(); ++j)
            if (counts(i, j) > 0.0) {
                log_sum += std::log(counts(i, j));
                ++n_pos;
            }
        if (n_pos == 0) {
            out.all_zero_rows.push_back(i);
            continue;
        }
        const double log_mean = log_sum / n_pos;
        for (int j = 0; j < counts.cols(); ++j)
            if (counts(i, j) > 0.0) out.values(i, j) = std::log(counts(i, j)) - log_mean;
    }
    return out;
}

}  // namespace bisbm

#endif  // BISBM_STATS_HPP
