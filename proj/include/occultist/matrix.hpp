#pragma once

#include "occultist/rational.hpp"

#include <cstddef>
#include <stdexcept>

namespace occultist {

class SingularMatrixError : public std::runtime_error {
public:
    explicit SingularMatrixError(const std::string& what) : std::runtime_error(what) {}
};

/// Dense square matrix over Q, row-major.
struct RMat {
    std::size_t n = 0;
    std::vector<Rat> a;

    RMat() = default;
    explicit RMat(std::size_t dim) : n(dim), a(dim * dim, Rat(0)) {}

    Rat& at(std::size_t i, std::size_t j) { return a[i * n + j]; }
    const Rat& at(std::size_t i, std::size_t j) const { return a[i * n + j]; }

    static RMat identity(std::size_t dim) {
        RMat m(dim);
        for (std::size_t i = 0; i < dim; ++i) m.at(i, i) = 1;
        return m;
    }

    bool operator==(const RMat& o) const { return n == o.n && a == o.a; }
    bool operator!=(const RMat& o) const { return !(*this == o); }
};

inline RMat mat_mul(const RMat& x, const RMat& y) {
    RMat r(x.n);
    for (std::size_t i = 0; i < x.n; ++i)
        for (std::size_t k = 0; k < x.n; ++k) {
            const Rat& xik = x.at(i, k);
            if (xik == 0) continue;
            for (std::size_t j = 0; j < x.n; ++j) r.at(i, j) += xik * y.at(k, j);
        }
    return r;
}

inline Vec mat_apply(const RMat& m, const Vec& v) {
    Vec r(m.n, Rat(0));
    for (std::size_t i = 0; i < m.n; ++i)
        for (std::size_t j = 0; j < m.n; ++j)
            if (m.at(i, j) != 0) r[i] += m.at(i, j) * v[j];
    return r;
}

/// Applies the transpose: covectors transform by m^T when points transform by m^{-1}.
inline Vec mat_apply_transpose(const RMat& m, const Vec& v) {
    Vec r(m.n, Rat(0));
    for (std::size_t j = 0; j < m.n; ++j)
        for (std::size_t i = 0; i < m.n; ++i)
            if (m.at(i, j) != 0) r[j] += m.at(i, j) * v[i];
    return r;
}

inline RMat mat_transpose(const RMat& m) {
    RMat r(m.n);
    for (std::size_t i = 0; i < m.n; ++i)
        for (std::size_t j = 0; j < m.n; ++j) r.at(j, i) = m.at(i, j);
    return r;
}

inline RMat mat_inverse(const RMat& m) {
    std::size_t n = m.n;
    RMat work = m;
    RMat inv = RMat::identity(n);
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        while (piv < n && work.at(piv, col) == 0) ++piv;
        if (piv == n) throw SingularMatrixError("matrix is singular");
        if (piv != col)
            for (std::size_t j = 0; j < n; ++j) {
                std::swap(work.at(piv, j), work.at(col, j));
                std::swap(inv.at(piv, j), inv.at(col, j));
            }
        Rat d = work.at(col, col);
        for (std::size_t j = 0; j < n; ++j) {
            work.at(col, j) /= d;
            inv.at(col, j) /= d;
        }
        for (std::size_t i = 0; i < n; ++i) {
            if (i == col || work.at(i, col) == 0) continue;
            Rat f = work.at(i, col);
            for (std::size_t j = 0; j < n; ++j) {
                work.at(i, j) -= f * work.at(col, j);
                inv.at(i, j) -= f * inv.at(col, j);
            }
        }
    }
    return inv;
}

inline Rat mat_det(const RMat& m) {
    std::size_t n = m.n;
    RMat work = m;
    Rat det = 1;
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        while (piv < n && work.at(piv, col) == 0) ++piv;
        if (piv == n) return Rat(0);
        if (piv != col) {
            for (std::size_t j = 0; j < n; ++j) std::swap(work.at(piv, j), work.at(col, j));
            det = -det;
        }
        det *= work.at(col, col);
        Rat d = work.at(col, col);
        for (std::size_t i = col + 1; i < n; ++i) {
            if (work.at(i, col) == 0) continue;
            Rat f = work.at(i, col) / d;
            for (std::size_t j = col; j < n; ++j) work.at(i, j) -= f * work.at(col, j);
        }
    }
    return det;
}

inline RMat mat_pow(const RMat& m, long k) {
    RMat base = k >= 0 ? m : mat_inverse(m);
    unsigned long e = k >= 0 ? static_cast<unsigned long>(k) : static_cast<unsigned long>(-k);
    RMat r = RMat::identity(m.n);
    while (e) {
        if (e & 1) r = mat_mul(r, base);
        base = mat_mul(base, base);
        e >>= 1;
    }
    return r;
}

/// Monic characteristic polynomial det(tI - m), coefficients low to high
/// (size n+1, leading coefficient 1), by Faddeev-LeVerrier.
inline std::vector<Rat> char_poly(const RMat& m) {
    std::size_t n = m.n;
    std::vector<Rat> c(n + 1, Rat(0));
    c[n] = 1;
    RMat mk(n);  // zero
    for (std::size_t k = 1; k <= n; ++k) {
        // M_k = m * M_{k-1} + c_{n-k+1} * I
        RMat t = mat_mul(m, mk);
        for (std::size_t i = 0; i < n; ++i) t.at(i, i) += c[n - k + 1];
        mk = t;
        RMat prod = mat_mul(m, mk);
        Rat tr = 0;
        for (std::size_t i = 0; i < n; ++i) tr += prod.at(i, i);
        c[n - k] = -tr / Rat(static_cast<long>(k));
    }
    return c;
}

/// Canonical representative of the projective class of m: primitive integer
/// entries, first nonzero entry positive.
inline RMat projective_canonical(const RMat& m) {
    RMat r = m;
    Vec flat(m.a.begin(), m.a.end());
    Vec c = canonical_line(flat);
    r.a.assign(c.begin(), c.end());
    return r;
}

/// Equality in PGL up to scaling by any nonzero rational.
inline bool projectively_equal(const RMat& x, const RMat& y) {
    return x.n == y.n && projective_canonical(x) == projective_canonical(y);
}

/// Row-reduces a copy of `rows` and returns its rank.
inline std::size_t rank_of_rows(std::vector<Vec> rows) {
    if (rows.empty()) return 0;
    std::size_t cols = rows[0].size(), r = 0;
    for (std::size_t c = 0; c < cols && r < rows.size(); ++c) {
        std::size_t piv = r;
        while (piv < rows.size() && rows[piv][c] == 0) ++piv;
        if (piv == rows.size()) continue;
        std::swap(rows[piv], rows[r]);
        for (std::size_t i = 0; i < rows.size(); ++i) {
            if (i == r || rows[i][c] == 0) continue;
            Rat f = rows[i][c] / rows[r][c];
            for (std::size_t j = c; j < cols; ++j) rows[i][j] -= f * rows[r][j];
        }
        ++r;
    }
    return r;
}

/// Basis of { x : R x = 0 } for the row system `rows` over Q^dim.
inline std::vector<Vec> kernel_of_rows(std::vector<Vec> rows, std::size_t dim) {
    std::vector<std::size_t> pivot_col;
    std::size_t r = 0;
    for (std::size_t c = 0; c < dim && r < rows.size(); ++c) {
        std::size_t piv = r;
        while (piv < rows.size() && rows[piv][c] == 0) ++piv;
        if (piv == rows.size()) continue;
        std::swap(rows[piv], rows[r]);
        Rat d = rows[r][c];
        for (std::size_t j = 0; j < dim; ++j) rows[r][j] /= d;
        for (std::size_t i = 0; i < rows.size(); ++i) {
            if (i == r || rows[i][c] == 0) continue;
            Rat f = rows[i][c];
            for (std::size_t j = 0; j < dim; ++j) rows[i][j] -= f * rows[r][j];
        }
        pivot_col.push_back(c);
        ++r;
    }
    std::vector<bool> is_pivot(dim, false);
    for (auto c : pivot_col) is_pivot[c] = true;
    std::vector<Vec> basis;
    for (std::size_t f = 0; f < dim; ++f) {
        if (is_pivot[f]) continue;
        Vec v(dim, Rat(0));
        v[f] = 1;
        for (std::size_t i = 0; i < pivot_col.size(); ++i) v[pivot_col[i]] = -rows[i][f];
        basis.push_back(v);
    }
    return basis;
}

inline std::vector<Vec> mat_rows(const RMat& m) {
    std::vector<Vec> rows(m.n, Vec(m.n));
    for (std::size_t i = 0; i < m.n; ++i)
        for (std::size_t j = 0; j < m.n; ++j) rows[i][j] = m.at(i, j);
    return rows;
}

inline std::string mat_to_string(const RMat& m) {
    std::string s = "[";
    for (std::size_t i = 0; i < m.n; ++i) {
        if (i) s += "; ";
        for (std::size_t j = 0; j < m.n; ++j) {
            if (j) s += " ";
            s += rat_to_string(m.at(i, j));
        }
    }
    return s + "]";
}

}  // namespace occultist
