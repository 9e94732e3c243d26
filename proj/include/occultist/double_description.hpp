#pragma once

#include "occultist/linear_feasibility.hpp"

#include <algorithm>
#include <stdexcept>

namespace occultist {

class DimensionTooLargeError : public std::runtime_error {
public:
    explicit DimensionTooLargeError(const std::string& what) : std::runtime_error(what) {}
};

inline bool vec_less(const Vec& a, const Vec& b) {
    return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

/// V-representation of a cone: extreme rays plus a lineality basis.
struct DDCone {
    std::vector<Vec> rays;
    std::vector<Vec> lineality;
};

/// Double description of { x : ⟨h, x⟩ ≥ 0 for all rows } by incremental
/// insertion, with the algebraic (rank) adjacency test.
inline DDCone dd_solve(const std::vector<Vec>& rows, std::size_t dim) {
    std::vector<Vec> lin;
    for (std::size_t i = 0; i < dim; ++i) {
        Vec e(dim, Rat(0));
        e[i] = 1;
        lin.push_back(e);
    }
    std::vector<Vec> rays;
    std::vector<Vec> processed;

    auto tight_rank = [&](const Vec& p, const Vec& n) {
        std::vector<Vec> tight;
        for (const auto& h : processed)
            if (dot(h, p) == 0 && dot(h, n) == 0) tight.push_back(h);
        return rank_of_rows(tight);
    };

    for (const auto& h : rows) {
        if (is_zero(h)) continue;

        // If some lineality direction is cut, it becomes a ray.
        std::size_t cut = SIZE_MAX;
        for (std::size_t i = 0; i < lin.size(); ++i)
            if (dot(h, lin[i]) != 0) { cut = i; break; }
        if (cut != SIZE_MAX) {
            Vec l = lin[cut];
            Rat hl = dot(h, l);
            if (hl < 0) { for (auto& x : l) x = -x; hl = -hl; }
            lin.erase(lin.begin() + cut);
            for (auto& v : lin) {
                Rat hv = dot(h, v);
                if (hv != 0) v = primitive(sub(v, scale(l, hv / hl)));
            }
            for (auto& r : rays) {
                Rat hr = dot(h, r);
                if (hr != 0) r = primitive(sub(r, scale(l, hr / hl)));
            }
            rays.push_back(primitive(l));
            processed.push_back(h);
            std::sort(rays.begin(), rays.end(), vec_less);
            rays.erase(std::unique(rays.begin(), rays.end()), rays.end());
            continue;
        }

        std::vector<Vec> pos, zero, neg;
        for (const auto& r : rays) {
            Rat v = dot(h, r);
            if (v > 0) pos.push_back(r);
            else if (v == 0) zero.push_back(r);
            else neg.push_back(r);
        }
        if (neg.empty()) { processed.push_back(h); continue; }

        std::vector<Vec> next = pos;
        next.insert(next.end(), zero.begin(), zero.end());
        const std::size_t need = dim - lin.size() - 2;
        for (const auto& p : pos)
            for (const auto& n : neg) {
                if (tight_rank(p, n) != need) continue;
                Vec w = primitive(sub(scale(n, dot(h, p)), scale(p, dot(h, n))));
                if (!is_zero(w)) next.push_back(w);
            }
        std::sort(next.begin(), next.end(), vec_less);
        next.erase(std::unique(next.begin(), next.end()), next.end());
        rays = std::move(next);
        processed.push_back(h);
    }

    for (auto& l : lin) l = primitive(l);
    std::sort(rays.begin(), rays.end(), vec_less);
    return {rays, lin};
}

/// Converts between the generator and facet descriptions of a closed cone.
/// For a salient full-dimensional cone the result is the minimal set of the
/// other kind; spans that are not full-dimensional contribute ± pairs for the
/// lineality of the dual.
inline std::vector<Vec> dd_convert(const std::vector<Vec>& input, std::size_t dim,
                                   std::size_t dim_cap = 10) {
    if (dim > dim_cap) throw DimensionTooLargeError("dimension exceeds the configured bound");
    DDCone dual = dd_solve(input, dim);
    std::vector<Vec> out = dual.rays;
    for (const auto& l : dual.lineality) {
        out.push_back(l);
        Vec neg = l;
        for (auto& x : neg) x = -x;
        out.push_back(primitive(neg));
    }
    std::sort(out.begin(), out.end(), vec_less);
    return out;
}

/// Minimal (extreme-ray) generating set of cone(gens).
inline std::vector<Vec> extreme_rays(const std::vector<Vec>& gens, std::size_t dim,
                                     std::size_t dim_cap = 10) {
    return dd_convert(dd_convert(gens, dim, dim_cap), dim, dim_cap);
}

}  // namespace occultist
