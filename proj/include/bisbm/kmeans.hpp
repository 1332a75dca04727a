#ifndef BISBM_KMEANS_HPP
#define BISBM_KMEANS_HPP

#include <cstdint>
#include <limits>
#include <set>
#include <vector>

#include "bisbm/model.hpp"
#include "bisbm/rng.hpp"

namespace bisbm::detail {

struct KMeansResult {
    std::vector<int> labels;  // 0-based cluster of each point
    bool used_fallback = false;
};

inline int count_distinct_rows(const Matrix& points) {
    std::set<std::vector<double>> seen;
    for (int i = 0; i < points.rows(); ++i) {
        std::vector<double> row(points.cols());
        for (int j = 0; j < points.cols(); ++j) row[static_cast<std::size_t>(j)] = points(i, j);
        seen.insert(row);
        if (static_cast<int>(seen.size()) >= points.rows()) break;
    }
    return static_cast<int>(seen.size());
}

namespace impl {

// one k-means++ seeding followed by Lloyd iterations; returns the
// within-cluster sum of squares
inline double lloyd_once(const Matrix& points, int k, CounterRng& rng, int max_iters,
                         std::vector<int>& labels) {
    const int n = static_cast<int>(points.rows());
    Matrix centers(k, points.cols());
    centers.row(0) = points.row(rng.uniform_int(n));
    Vector dist2 = (points.rowwise() - centers.row(0)).rowwise().squaredNorm();
    for (int c = 1; c < k; ++c) {
        const double total = dist2.sum();
        int pick;
        if (total > 0.0) {
            double u = rng.uniform() * total;
            pick = n - 1;
            for (int i = 0; i < n; ++i) {
                u -= dist2[i];
                if (u < 0.0) {
                    pick = i;
                    break;
                }
            }
        } else {
            pick = rng.uniform_int(n);
        }
        centers.row(c) = points.row(pick);
        dist2 = dist2.cwiseMin((points.rowwise() - centers.row(c)).rowwise().squaredNorm());
    }

    labels.assign(static_cast<std::size_t>(n), -1);
    for (int iter = 0; iter < max_iters; ++iter) {
        bool changed = false;
        for (int i = 0; i < n; ++i) {
            int best = 0;
            double best_d = std::numeric_limits<double>::infinity();
            for (int c = 0; c < k; ++c) {
                const double d = (points.row(i) - centers.row(c)).squaredNorm();
                if (d < best_d) {
                    best_d = d;
                    best = c;
                }
            }
            if (labels[static_cast<std::size_t>(i)] != best) {
                labels[static_cast<std::size_t>(i)] = best;
                changed = true;
            }
        }
        if (!changed) break;

        for (int c = 0; c < k; ++c) {
            Eigen::RowVectorXd sum = Eigen::RowVectorXd::Zero(points.cols());
            int count = 0;
            for (int i = 0; i < n; ++i)
                if (labels[static_cast<std::size_t>(i)] == c) {
                    sum += points.row(i);
                    ++count;
                }
            if (count > 0) {
                centers.row(c) = sum / count;
            } else {
                // reseed an empty cluster at the point farthest from its center
                int far = 0;
                double far_d = -1.0;
                for (int i = 0; i < n; ++i) {
                    const double d =
                        (points.row(i) - centers.row(labels[static_cast<std::size_t>(i)])).squaredNorm();
                    if (d > far_d) {
                        far_d = d;
                        far = i;
                    }
                }
                centers.row(c) = points.row(far);
            }
        }
    }
    double wcss = 0.0;
    for (int i = 0; i < n; ++i)
        wcss += (points.row(i) - centers.row(labels[static_cast<std::size_t>(i)])).squaredNorm();
    return wcss;
}

}  // namespace impl

// Lloyd's algorithm on the rows of `points`, best of n_init k-means++
// seedings by within-cluster sum of squares. Degenerate inputs (fewer
// distinct rows than clusters) fall back to seed-shuffled balanced labels so
// the caller always gets k nonempty groups.
inline KMeansResult kmeans_rows(const Matrix& points, int k, CounterRng& rng, int max_iters = 60,
                                int n_init = 8) {
    const int n = static_cast<int>(points.rows());
    KMeansResult result;
    result.labels.assign(static_cast<std::size_t>(n), 0);
    if (k <= 1) return result;

    if (count_distinct_rows(points) < k) {
        for (int i = 0; i < n; ++i) result.labels[static_cast<std::size_t>(i)] = i % k;
        for (int i = n - 1; i > 0; --i)
            std::swap(result.labels[static_cast<std::size_t>(i)],
                      result.labels[static_cast<std::size_t>(rng.uniform_int(i + 1))]);
        result.used_fallback = true;
        return result;
    }

    double best_wcss = std::numeric_limits<double>::infinity();
    std::vector<int> labels;
    for (int attempt = 0; attempt < n_init; ++attempt) {
        const double wcss = impl::lloyd_once(points, k, rng, max_iters, labels);
        if (wcss < best_wcss) {
            best_wcss = wcss;
            result.labels = labels;
        }
    }
    return result;
}

}  // namespace bisbm::detail

#endif  // BISBM_KMEANS_HPP
