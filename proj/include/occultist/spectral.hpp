#pragma once

#include "occultist/matrix.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <utility>

namespace occultist {

enum class Tri { True, False, Indeterminate };

inline const char* tri_name(Tri t) {
    switch (t) {
        case Tri::True: return "true";
        case Tri::False: return "false";
        default: return "indeterminate";
    }
}

struct SpectralReport {
    enum class Mode { Exact, Numeric };
    Mode mode = Mode::Numeric;
    bool fully_split = false;
    std::vector<std::pair<Rat, int>> rational_eigenvalues;  // value, multiplicity
    Tri proximal = Tri::Indeterminate;
    Tri biproximal = Tri::Indeterminate;
    Vec attracting_point;
    Vec repelling_hyperplane;
    double modulus_gap = 0.0;  // |λ1| - |λ2|, numeric diagnostic
};

namespace detail {

inline double rat_to_double(const Rat& r) { return r.convert_to<double>(); }

/// Best rational with denominator ≤ bound approximating x (continued fractions).
inline Rat reconstruct_rational(double x, long long den_bound = 1000000000LL) {
    bool neg = x < 0;
    double v = std::fabs(x);
    Int p0 = 0, q0 = 1, p1 = 1, q1 = 0;
    for (int it = 0; it < 64; ++it) {
        double fl = std::floor(v);
        if (fl > 9e17) break;
        Int a = static_cast<long long>(fl);
        Int p2 = a * p1 + p0, q2 = a * q1 + q0;
        if (q2 > den_bound) break;
        p0 = p1; q0 = q1; p1 = p2; q1 = q2;
        double frac = v - fl;
        if (frac < 1e-15) break;
        v = 1.0 / frac;
    }
    if (q1 == 0) return Rat(0);
    Rat r(p1, q1);
    return neg ? -r : r;
}

inline Rat poly_eval(const std::vector<Rat>& p, const Rat& x) {
    Rat acc = 0;
    for (std::size_t i = p.size(); i-- > 0;) acc = acc * x + p[i];
    return acc;
}

/// Divides p by (x - r); requires p(r) == 0. Coefficients low to high.
inline std::vector<Rat> poly_deflate(const std::vector<Rat>& p, const Rat& r) {
    std::size_t n = p.size() - 1;
    std::vector<Rat> q(n, Rat(0));
    Rat carry = p[n];
    for (std::size_t i = n; i-- > 0;) {
        q[i] = carry;
        carry = p[i] + carry * r;
    }
    return q;  // carry == p(r) == 0
}

inline std::vector<double> numeric_real_roots(const std::vector<Rat>& p) {
    std::size_t n = p.size() - 1;
    std::vector<double> out;
    if (n == 0) return out;
    Eigen::MatrixXd comp = Eigen::MatrixXd::Zero(n, n);
    double lead = rat_to_double(p[n]);
    for (std::size_t i = 0; i < n; ++i) comp(i, n - 1) = -rat_to_double(p[i]) / lead;
    for (std::size_t i = 1; i < n; ++i) comp(i, i - 1) = 1.0;
    Eigen::EigenSolver<Eigen::MatrixXd> es(comp, false);
    for (std::size_t i = 0; i < n; ++i) {
        auto ev = es.eigenvalues()(i);
        double scale = std::max(1.0, std::abs(ev.real()));
        if (std::abs(ev.imag()) < 1e-8 * scale) out.push_back(ev.real());
    }
    return out;
}

inline bool is_perfect_square(const Rat& r, Rat& root) {
    if (r < 0) return false;
    Int ns = sqrt(numerator(r)), ds = sqrt(denominator(r));
    if (ns * ns == numerator(r) && ds * ds == denominator(r)) {
        root = Rat(ns, ds);
        return true;
    }
    return false;
}

}  // namespace detail

/// Extracts all rational roots (with multiplicity) of a polynomial over Q.
/// Returns the roots and leaves the nonsplit remainder degree in `rest_degree`.
inline std::vector<std::pair<Rat, int>> rational_roots(std::vector<Rat> p,
                                                       std::size_t& rest_degree) {
    std::vector<std::pair<Rat, int>> roots;
    auto add_root = [&](const Rat& r) {
        for (auto& e : roots)
            if (e.first == r) { ++e.second; return; }
        roots.push_back({r, 1});
    };
    bool progress = true;
    while (progress && p.size() > 1) {
        progress = false;
        std::size_t deg = p.size() - 1;
        if (deg == 1) {
            add_root(-p[0] / p[1]);
            p = {Rat(1)};
            progress = true;
            continue;
        }
        if (deg == 2) {
            Rat disc = p[1] * p[1] - 4 * p[2] * p[0], s;
            if (detail::is_perfect_square(disc, s)) {
                add_root((-p[1] + s) / (2 * p[2]));
                add_root((-p[1] - s) / (2 * p[2]));
                p = {Rat(1)};
                progress = true;
            }
            continue;
        }
        for (double cand : detail::numeric_real_roots(p)) {
            Rat r = detail::reconstruct_rational(cand);
            if (detail::poly_eval(p, r) == 0) {
                add_root(r);
                p = detail::poly_deflate(p, r);
                progress = true;
                break;
            }
        }
    }
    rest_degree = p.size() - 1;
    return roots;
}

namespace detail {

inline Tri proximal_exact(const RMat& m, const std::vector<std::pair<Rat, int>>& roots,
                          Vec* point, Vec* hyperplane) {
    // Unique eigenvalue of maximal modulus, simple.
    Rat best_sq = -1;
    const std::pair<Rat, int>* best = nullptr;
    bool tie = false;
    for (const auto& e : roots) {
        Rat sq = e.first * e.first;
        if (sq > best_sq) { best_sq = sq; best = &e; tie = false; }
        else if (sq == best_sq) tie = true;
    }
    if (!best || tie || best->second != 1) return Tri::False;
    if (point || hyperplane) {
        RMat shifted = m;
        for (std::size_t i = 0; i < m.n; ++i) shifted.at(i, i) -= best->first;
        if (point) {
            auto ker = kernel_of_rows(mat_rows(shifted), m.n);
            if (!ker.empty()) *point = canonical_line(ker[0]);
        }
        if (hyperplane) {
            auto kert = kernel_of_rows(mat_rows(mat_transpose(shifted)), m.n);
            if (!kert.empty()) *hyperplane = canonical_line(kert[0]);
        }
    }
    return Tri::True;
}

inline Tri proximal_numeric(const RMat& m, double tol, double& gap) {
    Eigen::MatrixXd dm(m.n, m.n);
    for (std::size_t i = 0; i < m.n; ++i)
        for (std::size_t j = 0; j < m.n; ++j) dm(i, j) = rat_to_double(m.at(i, j));
    Eigen::EigenSolver<Eigen::MatrixXd> es(dm, false);
    std::vector<double> mods(m.n);
    for (std::size_t i = 0; i < m.n; ++i) mods[i] = std::abs(es.eigenvalues()(i));
    std::sort(mods.rbegin(), mods.rend());
    gap = mods.size() > 1 ? mods[0] - mods[1] : mods[0];
    double scale = std::max(1.0, mods[0]);
    if (gap < tol * scale) return Tri::Indeterminate;
    return Tri::True;
}

}  // namespace detail

inline SpectralReport spectral_report(const RMat& m, double tol = 1e-9) {
    SpectralReport rep;
    std::size_t rest = 0;
    auto poly = char_poly(m);
    rep.rational_eigenvalues = rational_roots(poly, rest);
    rep.fully_split = (rest == 0);
    if (rep.fully_split) {
        rep.mode = SpectralReport::Mode::Exact;
        rep.proximal =
            detail::proximal_exact(m, rep.rational_eigenvalues, &rep.attracting_point,
                                   &rep.repelling_hyperplane);
    } else {
        rep.mode = SpectralReport::Mode::Numeric;
        rep.proximal = detail::proximal_numeric(m, tol, rep.modulus_gap);
    }

    RMat inv;
    try {
        inv = mat_inverse(m);
    } catch (const SingularMatrixError&) {
        rep.biproximal = Tri::False;
        return rep;
    }
    Tri inv_prox;
    std::size_t rest_inv = 0;
    auto poly_inv = char_poly(inv);
    auto roots_inv = rational_roots(poly_inv, rest_inv);
    if (rest_inv == 0) {
        inv_prox = detail::proximal_exact(inv, roots_inv, nullptr, nullptr);
    } else {
        double g;
        inv_prox = detail::proximal_numeric(inv, tol, g);
    }
    if (rep.proximal == Tri::False || inv_prox == Tri::False) rep.biproximal = Tri::False;
    else if (rep.proximal == Tri::True && inv_prox == Tri::True) rep.biproximal = Tri::True;
    else rep.biproximal = Tri::Indeterminate;
    return rep;
}

/// log(σ1/σ2) of m, computed numerically from the spectrum of mᵀm.
inline double singular_log_ratio(const RMat& m) {
    if (m.n < 2) return 0.0;
    Eigen::MatrixXd dm(m.n, m.n);
    for (std::size_t i = 0; i < m.n; ++i)
        for (std::size_t j = 0; j < m.n; ++j) dm(i, j) = detail::rat_to_double(m.at(i, j));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(dm.transpose() * dm);
    auto ev = es.eigenvalues();  // ascending
    double l1 = ev(m.n - 1), l2 = ev(m.n - 2);
    if (l2 <= 0) return 0.0;
    return 0.5 * std::log(l1 / l2);
}

}  // namespace occultist
