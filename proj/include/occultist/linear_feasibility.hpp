#pragma once

#include "occultist/matrix.hpp"

#include <algorithm>
#include <cstddef>
#include <optional>
#include <stdexcept>

namespace occultist {

class DimensionMismatchError : public std::runtime_error {
public:
    explicit DimensionMismatchError(const std::string& what) : std::runtime_error(what) {}
};

/// Relation of a homogeneous row ⟨a, x⟩ ? 0. Strict positivity is encoded by
/// the scale-invariant normalization ⟨a, x⟩ ≥ 1.
enum class Rel { Geq0, Geq1, Eq0 };

struct LinConstraint {
    Vec coeff;
    Rel rel = Rel::Geq0;
};

struct LinFeasProblem {
    std::size_t dim = 0;
    std::vector<LinConstraint> constraints;

    void add(Vec c, Rel r) { constraints.push_back({std::move(c), r}); }
};

/// Feasible: `witness` satisfies every constraint. Infeasible: `farkas` holds
/// one multiplier per constraint (nonnegative on inequality rows, free on
/// equality rows) with  Σ yᵢ aᵢ = 0  and  Σ_{rel=Geq1} yᵢ > 0.
struct FeasVerdict {
    bool feasible = false;
    Vec witness;
    Vec farkas;
};

inline bool replay_witness(const LinFeasProblem& p, const Vec& w) {
    if (w.size() != p.dim) return false;
    for (const auto& c : p.constraints) {
        Rat v = dot(c.coeff, w);
        if (c.rel == Rel::Geq0 && v < 0) return false;
        if (c.rel == Rel::Geq1 && v < 1) return false;
        if (c.rel == Rel::Eq0 && v != 0) return false;
    }
    return true;
}

inline bool replay_farkas(const LinFeasProblem& p, const Vec& y) {
    if (y.size() != p.constraints.size()) return false;
    Vec comb(p.dim, Rat(0));
    Rat rhs = 0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const auto& c = p.constraints[i];
        if (c.rel != Rel::Eq0 && y[i] < 0) return false;
        for (std::size_t j = 0; j < p.dim; ++j) comb[j] += y[i] * c.coeff[j];
        if (c.rel == Rel::Geq1) rhs += y[i];
    }
    return is_zero(comb) && rhs > 0;
}

/// Exact phase-one simplex with Bland's rule. Deterministic.
inline FeasVerdict feasible(const LinFeasProblem& p) {
    const std::size_t d = p.dim, m = p.constraints.size();
    for (const auto& c : p.constraints)
        if (c.coeff.size() != d) throw DimensionMismatchError("constraint row has wrong size");

    // Columns: u_0..u_{d-1}, v_0..v_{d-1} (x = u - v), one surplus per
    // inequality row, one artificial per row. Rows: a·(u-v) - s (+ z) = b.
    std::vector<std::size_t> surplus_col(m, SIZE_MAX);
    std::size_t ncols = 2 * d;
    for (std::size_t i = 0; i < m; ++i)
        if (p.constraints[i].rel != Rel::Eq0) surplus_col[i] = ncols++;
    const std::size_t art0 = ncols;
    ncols += m;

    std::vector<Vec> tab(m, Vec(ncols + 1, Rat(0)));  // last column = rhs
    for (std::size_t i = 0; i < m; ++i) {
        const auto& c = p.constraints[i];
        for (std::size_t j = 0; j < d; ++j) {
            tab[i][j] = c.coeff[j];
            tab[i][d + j] = -c.coeff[j];
        }
        if (surplus_col[i] != SIZE_MAX) tab[i][surplus_col[i]] = -1;
        tab[i][art0 + i] = 1;
        tab[i][ncols] = c.rel == Rel::Geq1 ? Rat(1) : Rat(0);
    }

    // Reduced-cost row for minimizing the sum of artificials, with the
    // artificial basis eliminated: red_j = c_j - Σ_i tab[i][j].
    Vec red(ncols + 1, Rat(0));
    for (std::size_t j = 0; j <= ncols; ++j) {
        Rat s = 0;
        for (std::size_t i = 0; i < m; ++i) s += tab[i][j];
        red[j] = (j >= art0 && j < art0 + m ? Rat(1) : Rat(0)) - s;
    }

    std::vector<std::size_t> basis(m);
    for (std::size_t i = 0; i < m; ++i) basis[i] = art0 + i;

    for (;;) {
        std::size_t enter = SIZE_MAX;
        for (std::size_t j = 0; j < ncols; ++j)
            if (red[j] < 0) { enter = j; break; }  // Bland: lowest index
        if (enter == SIZE_MAX) break;

        std::size_t leave = SIZE_MAX;
        Rat best_ratio = 0;
        for (std::size_t i = 0; i < m; ++i) {
            if (tab[i][enter] <= 0) continue;
            Rat ratio = tab[i][ncols] / tab[i][enter];
            if (leave == SIZE_MAX || ratio < best_ratio ||
                (ratio == best_ratio && basis[i] < basis[leave])) {
                leave = i;
                best_ratio = ratio;
            }
        }
        if (leave == SIZE_MAX) break;  // unbounded improving ray; cannot occur in phase one

        Rat piv = tab[leave][enter];
        for (auto& x : tab[leave]) x /= piv;
        for (std::size_t i = 0; i < m; ++i) {
            if (i == leave || tab[i][enter] == 0) continue;
            Rat f = tab[i][enter];
            for (std::size_t j = 0; j <= ncols; ++j) tab[i][j] -= f * tab[leave][j];
        }
        if (red[enter] != 0) {
            Rat f = red[enter];
            for (std::size_t j = 0; j <= ncols; ++j) red[j] -= f * tab[leave][j];
        }
        basis[leave] = enter;
    }

    // Objective value = -red[rhs] (the row was reduced starting from 0).
    Rat objective = -red[ncols];

    FeasVerdict v;
    if (objective == 0) {
        v.feasible = true;
        v.witness.assign(d, Rat(0));
        for (std::size_t i = 0; i < m; ++i) {
            if (basis[i] < d) v.witness[basis[i]] += tab[i][ncols];
            else if (basis[i] < 2 * d) v.witness[basis[i] - d] -= tab[i][ncols];
        }
    } else {
        v.feasible = false;
        // Simplex multipliers from the artificial columns: y_i = 1 - red[art_i].
        v.farkas.assign(m, Rat(0));
        for (std::size_t i = 0; i < m; ++i) v.farkas[i] = Rat(1) - red[art0 + i];
    }
    return v;
}

}  // namespace occultist
