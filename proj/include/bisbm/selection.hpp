#ifndef BISBM_SELECTION_HPP
#define BISBM_SELECTION_HPP

#include <cmath>
#include <string>
#include <vector>

#include "bisbm/inference.hpp"
#include "bisbm/model.hpp"
#include "bisbm/parallel.hpp"

namespace bisbm {

/// One grid cell of the block-count search.
struct SelectionRecord {
    int b1 = 0;
    int b2 = 0;
    double icl = 0.0;
    double elbo_complete = 0.0;  // E_Q[log L(X, A, Z1, Z2; theta_hat)]
    double penalty = 0.0;
    bool failed = false;
    std::string error;
    FitResult fit;
};

struct SelectionGrid {
    int b1_min = 1;
    int b1_max = 5;
    int b2_min = 1;
    int b2_max = 5;

    void validate() const {
        if (b1_min < 1 || b2_min < 1 || b1_max < b1_min || b2_max < b2_min)
            throw InputError("SelectionGrid: ranges must be nonempty with lower bound >= 1");
    }
};

struct SelectionResult {
    SelectionRecord best;
    std::vector<SelectionRecord> table;  // grid order: b1 outer, b2 inner
};

/// BIC-style penalty
///   (b1-1) log n1 + (b2-1) log n2 + [d0 + (1+d1) b1 b2] log(n1 n2)
/// in natural log. Only n1/n2 of `dims` participate.
inline double icl_penalty(const Dimensions& dims, int b1, int b2, int d0, int d1) {
    const double ln1 = std::log(static_cast<double>(dims.n1));
    const double ln2 = std::log(static_cast<double>(dims.n2));
    return (b1 - 1) * ln1 + (b2 - 1) * ln2 +
           (d0 + (1 + d1) * static_cast<double>(b1) * b2) * (ln1 + ln2);
}

namespace detail {

// H(Q) = -E_Q[log Q]: membership entropies plus the conditional Bernoulli
// entropies of A under the factorized variational distribution.
inline double variational_entropy(const VariationalState& state) {
    double h = 0.0;
    for (int i = 0; i < state.n1(); ++i)
        for (int q = 0; q < state.b1(); ++q) h -= xlogy(state.beta1(i, q), state.beta1(i, q));
    for (int j = 0; j < state.n2(); ++j)
        for (int l = 0; l < state.b2(); ++l) h -= xlogy(state.beta2(j, l), state.beta2(j, l));
    for (int q = 0; q < state.b1(); ++q)
        for (int l = 0; l < state.b2(); ++l) {
            const Matrix& r = state.rho_at(q, l);
            for (int i = 0; i < state.n1(); ++i) {
                const double b = state.beta1(i, q);
                if (b == 0.0) continue;
                for (int j = 0; j < state.n2(); ++j) {
                    const double w = b * state.beta2(j, l);
                    if (w == 0.0) continue;
                    h -= w * (xlogy(r(i, j), r(i, j)) + xlogy(1.0 - r(i, j), 1.0 - r(i, j)));
                }
            }
        }
    return h;
}

}  // namespace detail

/// ICL of a finished fit: the expected complete-data log-likelihood
/// E_Q[log L] = ELBO - H(Q) minus the BIC penalty. The entropy subtraction
/// is what makes diffuse posteriors score worse than crisp ones.
inline SelectionRecord icl_score(const ZScoreMatrix& x, const FitResult& fit) {
    SelectionRecord rec;
    rec.b1 = fit.params.b1();
    rec.b2 = fit.params.b2();
    rec.fit = fit;

    const double bound = elbo(x, fit.params, fit.state);
    const double entropy = detail::variational_entropy(fit.state);
    rec.elbo_complete = bound - entropy;

    Dimensions dims{x.rows(), x.cols(), rec.b1, rec.b2};
    rec.penalty = icl_penalty(dims, rec.b1, rec.b2, NullParams::d0, AltParams::d1);
    rec.icl = rec.elbo_complete - rec.penalty;
    return rec;
}

namespace detail {

// argmax ICL over non-failed records; exact ties break toward smaller
// b1 + b2, then smaller b1. Order of the table does not matter.
inline const SelectionRecord* pick_best(const std::vector<SelectionRecord>& table) {
    const SelectionRecord* best = nullptr;
    for (const SelectionRecord& rec : table) {
        if (rec.failed) continue;
        if (!best || rec.icl > best->icl ||
            (rec.icl == best->icl && (rec.b1 + rec.b2 < best->b1 + best->b2 ||
                                      (rec.b1 + rec.b2 == best->b1 + best->b2 && rec.b1 < best->b1))))
            best = &rec;
    }
    return best;
}

}  // namespace detail

/// Exhaustive grid search over (b1, b2). Cells run independently (worker
/// count capped by BISBM_THREADS); a failed cell is recorded and excluded.
/// Ties break toward smaller b1+b2, then smaller b1.
inline SelectionResult select_model(const ZScoreMatrix& x, const SelectionGrid& grid,
                                    const FitOptions& opts) {
    grid.validate();
    x.validate();

    std::vector<std::pair<int, int>> cells;
    for (int b1 = grid.b1_min; b1 <= grid.b1_max; ++b1)
        for (int b2 = grid.b2_min; b2 <= grid.b2_max; ++b2) cells.emplace_back(b1, b2);

    SelectionResult result;
    result.table.resize(cells.size());
    detail::parallel_tasks(static_cast<int>(cells.size()), detail::worker_count(), [&](int idx) {
        const auto [b1, b2] = cells[static_cast<std::size_t>(idx)];
        SelectionRecord& rec = result.table[static_cast<std::size_t>(idx)];
        rec.b1 = b1;
        rec.b2 = b2;
        try {
            Dimensions dims{x.rows(), x.cols(), b1, b2};
            rec = icl_score(x, fit(x, dims, opts));
        } catch (const Error& e) {
            rec.failed = true;
            rec.error = e.what();
        }
    });

    const SelectionRecord* best = detail::pick_best(result.table);
    if (!best) throw FitError("select_model: every grid cell failed");
    result.best = *best;
    return result;
}

}  // namespace bisbm

#endif  // BISBM_SELECTION_HPP
