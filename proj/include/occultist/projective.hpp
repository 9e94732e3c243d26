#pragma once

#include "occultist/double_description.hpp"

#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <utility>

namespace occultist {

class NotProperlyConvex : public std::runtime_error {
public:
    explicit NotProperlyConvex(const std::string& what) : std::runtime_error(what) {}
};

/// The input rays span a line only because of inconsistent sign choices; a
/// re-signed lift would be properly convex, but the hull depends on the lift,
/// so we refuse to guess.
class SignAmbiguous : public NotProperlyConvex {
public:
    explicit SignAmbiguous(const std::string& what) : NotProperlyConvex(what) {}
};

class NoCommonChart : public std::runtime_error {
public:
    explicit NoCommonChart(const std::string& what) : std::runtime_error(what) {}
};

class PointNotInterior : public std::runtime_error {
public:
    explicit PointNotInterior(const std::string& what) : std::runtime_error(what) {}
};

class DegenerateSampling : public std::runtime_error {
public:
    explicit DegenerateSampling(const std::string& what) : std::runtime_error(what) {}
};

/// Point of projective space, stored as the canonical lift of its line.
struct ProjPoint {
    Vec rep;
    ProjPoint() = default;
    explicit ProjPoint(Vec v) : rep(canonical_line(v)) {}
    bool operator==(const ProjPoint& o) const { return rep == o.rep; }
};

/// Projective hyperplane, a canonical covector.
struct ProjHyp {
    Vec rep;
    ProjHyp() = default;
    explicit ProjHyp(Vec v) : rep(canonical_line(v)) {}
    bool operator==(const ProjHyp& o) const { return rep == o.rep; }
};

/// Projective transformation, canonical modulo positive scaling.
struct ProjMap {
    RMat mat;
    ProjMap() : mat(RMat::identity(1)) {}
    explicit ProjMap(RMat m) : mat(std::move(m)) {
        mat_inverse(mat);  // throws SingularMatrixError when not invertible
        Vec flat(mat.a.begin(), mat.a.end());
        flat = primitive(flat);
        std::copy(flat.begin(), flat.end(), mat.a.begin());
    }
    ProjMap inverse() const { return ProjMap(mat_inverse(mat)); }
    ProjPoint operator()(const ProjPoint& p) const { return ProjPoint(mat_apply(mat, p.rep)); }
    ProjHyp operator()(const ProjHyp& h) const {
        return ProjHyp(mat_apply_transpose(mat_inverse(mat), h.rep));
    }
    bool operator==(const ProjMap& o) const { return projectively_equal(mat, o.mat); }
};

/// Properly convex projective polytope, held as one fixed salient cone lift.
/// Generators are the sorted canonical extreme rays. Facets are derived on
/// first use and shared between copies; lower-dimensional bodies carry their
/// affine-span equalities as ± covector pairs in the facet list.
class ConePolytope {
public:
    std::size_t dim = 0;
    std::vector<Vec> generators;
    Vec salient_witness;

    ConePolytope() : cache_(std::make_shared<FacetCache>()) {}

    const std::vector<Vec>& facets() const {
        std::call_once(cache_->flag, [&] { cache_->facets = dd_convert(generators, dim); });
        return cache_->facets;
    }

    void set_facets(std::vector<Vec> f) const {
        std::call_once(cache_->flag, [&] { cache_->facets = std::move(f); });
    }

    bool operator==(const ConePolytope& o) const {
        return dim == o.dim && generators == o.generators;
    }

private:
    struct FacetCache {
        std::once_flag flag;
        std::vector<Vec> facets;
    };
    std::shared_ptr<FacetCache> cache_;
};

namespace detail {

/// Strictly positive functional on all rays, or nothing.
inline std::optional<Vec> salience_witness(const std::vector<Vec>& rays, std::size_t dim) {
    LinFeasProblem lp;
    lp.dim = dim;
    for (const auto& g : rays) lp.add(g, Rel::Geq1);
    auto v = feasible(lp);
    if (!v.feasible) return std::nullopt;
    return v.witness;
}

inline Vec negated(Vec v) {
    for (auto& x : v) x = -x;
    return v;
}

/// Splits a facet list into inequality rows and one representative per
/// equality (±) pair.
struct FacetSplit {
    std::vector<Vec> ineq;
    std::vector<Vec> eq;
};

inline FacetSplit split_facets(const std::vector<Vec>& facets) {
    std::set<Vec, bool (*)(const Vec&, const Vec&)> pool(vec_less);
    for (const auto& f : facets) pool.insert(f);
    FacetSplit out;
    std::set<Vec, bool (*)(const Vec&, const Vec&)> used(vec_less);
    for (const auto& f : facets) {
        if (used.count(f)) continue;
        Vec nf = negated(f);
        if (pool.count(nf)) {
            out.eq.push_back(f);
            used.insert(f);
            used.insert(nf);
        } else {
            out.ineq.push_back(f);
            used.insert(f);
        }
    }
    return out;
}

/// Adds the relative-interior constraints of a body, with a sign applied to
/// the body's lift: equality rows vanish, proper facet rows are >= 1.
inline void add_relint_rows(LinFeasProblem& lp, const ConePolytope& p, int sign) {
    auto sp = split_facets(p.facets());
    for (const auto& f : sp.eq) lp.add(f, Rel::Eq0);
    for (const auto& f : sp.ineq) {
        Vec row = f;
        if (sign < 0) row = negated(row);
        lp.add(row, Rel::Geq1);
    }
}

inline bool relint_meet(const ConePolytope& p, const ConePolytope& q) {
    for (int sign : {1, -1}) {
        LinFeasProblem lp;
        lp.dim = p.dim;
        add_relint_rows(lp, p, 1);
        add_relint_rows(lp, q, sign);
        if (feasible(lp).feasible) return true;
    }
    return false;
}

/// cone(p) ⊆ cone(q) after applying `sign` to q's lift.
inline bool cone_subset(const ConePolytope& p, const ConePolytope& q, int sign) {
    for (const auto& f : q.facets()) {
        for (const auto& g : p.generators) {
            Rat v = dot(f, g);
            if (sign < 0) v = -v;
            if (v < 0) return false;
        }
    }
    return true;
}

}  // namespace detail

/// Builds a body from the given cone lifts. The lift is honored as written:
/// rays that cannot be separated from the origin by a strict functional make
/// the projectivization improper.
inline ConePolytope make_body(const std::vector<Vec>& rays, std::size_t dim) {
    if (rays.empty()) throw NotProperlyConvex("no rays given");
    std::vector<Vec> prim;
    for (const auto& r : rays) {
        if (r.size() != dim) throw DimensionMismatchError("ray has wrong dimension");
        if (is_zero(r)) throw NotProperlyConvex("zero ray");
        prim.push_back(primitive(r));
    }
    auto witness = detail::salience_witness(prim, dim);
    if (!witness) {
        for (std::size_t i = 0; i < prim.size(); ++i)
            for (std::size_t j = i + 1; j < prim.size(); ++j)
                if (prim[i] == detail::negated(prim[j]))
                    throw NotProperlyConvex("antipodal rays span a line");
        throw SignAmbiguous(
            "rays are not contained in an open half-space; a consistent "
            "re-signing of the lifts may exist but would change the hull");
    }
    ConePolytope p;
    p.dim = dim;
    p.generators = extreme_rays(prim, dim);
    p.salient_witness = *witness;
    return p;
}

inline ConePolytope make_body(const std::vector<ProjPoint>& points, std::size_t dim) {
    std::vector<Vec> rays;
    for (const auto& pt : points) rays.push_back(pt.rep);
    return make_body(rays, dim);
}

/// Dual body: covectors strictly positive on the closed cone. Only defined
/// for full-dimensional bodies (otherwise the dual contains a line).
inline ConePolytope dual(const ConePolytope& p) {
    if (rank_of_rows(p.generators) != p.dim)
        throw NotProperlyConvex("dual of a lower-dimensional body");
    ConePolytope d;
    d.dim = p.dim;
    d.generators = p.facets();
    d.set_facets(p.generators);
    Vec w(p.dim, Rat(0));
    for (const auto& g : p.generators) w = add(w, g);
    d.salient_witness = w;
    return d;
}

namespace detail {

/// Greedy chart search for large families: signs are fixed one body at a
/// time, keeping the accumulated system feasible. Exact whenever every body
/// overlaps some earlier body (e.g. tree truncations in breadth-first order),
/// since an overlap forces the relative sign; otherwise it may miss a chart
/// that an exhaustive sign search would find.
inline std::optional<std::pair<Vec, std::vector<int>>> common_chart_greedy(
    const std::vector<ConePolytope>& bodies) {
    const std::size_t k = bodies.size();
    std::vector<int> signs(k, 1);
    LinFeasProblem lp;
    lp.dim = bodies[0].dim;
    Vec witness;
    for (std::size_t j = 0; j < k; ++j) {
        bool ok = false;
        for (int s : {1, -1}) {
            LinFeasProblem trial = lp;
            for (const auto& g : bodies[j].generators) trial.add(s < 0 ? negated(g) : g, Rel::Geq1);
            auto v = feasible(trial);
            if (v.feasible) {
                signs[j] = s;
                lp = std::move(trial);
                witness = v.witness;
                ok = true;
                break;
            }
        }
        if (!ok) return std::nullopt;
    }
    return std::make_pair(witness, signs);
}

/// Chart search with an explicit per-body sign choice (first body fixed +).
inline std::optional<std::pair<Vec, std::vector<int>>> common_chart_signed(
    const std::vector<ConePolytope>& bodies) {
    if (bodies.empty()) return std::nullopt;
    if (bodies.size() > 16) return common_chart_greedy(bodies);
    const std::size_t k = bodies.size();
    for (std::size_t mask = 0; mask < (std::size_t{1} << (k - 1)); ++mask) {
        std::vector<int> signs(k, 1);
        for (std::size_t j = 1; j < k; ++j)
            if (mask & (std::size_t{1} << (j - 1))) signs[j] = -1;
        LinFeasProblem lp;
        lp.dim = bodies[0].dim;
        for (std::size_t j = 0; j < k; ++j)
            for (const auto& g : bodies[j].generators)
                lp.add(signs[j] < 0 ? negated(g) : g, Rel::Geq1);
        auto v = feasible(lp);
        if (v.feasible) return std::make_pair(v.witness, signs);
    }
    return std::nullopt;
}

}  // namespace detail

/// A hyperplane at infinity whose complement is an affine chart holding the
/// closures of all bodies, up to a per-body choice of lift.
inline std::optional<ProjHyp> find_common_chart(const std::vector<ConePolytope>& bodies) {
    auto r = detail::common_chart_signed(bodies);
    if (!r) return std::nullopt;
    return ProjHyp(r->first);
}

/// Convex hull of the union, taken in a common affine chart.
inline ConePolytope hull_union(const ConePolytope& p, const ConePolytope& q) {
    auto chart = detail::common_chart_signed({p, q});
    if (!chart) throw NoCommonChart("no affine chart contains both bodies");
    std::vector<Vec> gens;
    for (const auto& g : p.generators) gens.push_back(g);
    for (const auto& g : q.generators)
        gens.push_back(chart->second[1] < 0 ? detail::negated(g) : g);
    ConePolytope out;
    out.dim = p.dim;
    out.generators = extreme_rays(gens, p.dim);
    out.salient_witness = chart->first;
    return out;
}

/// Intersection with open (relative-interior) semantics: nothing unless the
/// relative interiors meet under some sign pairing; otherwise the closed
/// intersection under that pairing.
inline std::optional<ConePolytope> intersect(const ConePolytope& p, const ConePolytope& q) {
    for (int sign : {1, -1}) {
        LinFeasProblem lp;
        lp.dim = p.dim;
        detail::add_relint_rows(lp, p, 1);
        detail::add_relint_rows(lp, q, sign);
        if (!feasible(lp).feasible) continue;
        std::vector<Vec> rows = p.facets();
        for (const auto& f : q.facets())
            rows.push_back(sign < 0 ? detail::negated(f) : f);
        ConePolytope out;
        out.dim = p.dim;
        out.generators = dd_convert(rows, p.dim);
        auto w = detail::salience_witness(out.generators, p.dim);
        if (!w) continue;  // intersection cone contains a line; not a body
        out.salient_witness = *w;
        return out;
    }
    return std::nullopt;
}

/// Equality of ray sets as projective point sets, ignoring lift signs.
inline bool same_projective_rays(std::vector<Vec> a, std::vector<Vec> b) {
    for (auto& v : a) v = canonical_line(v);
    for (auto& v : b) v = canonical_line(v);
    std::sort(a.begin(), a.end(), vec_less);
    a.erase(std::unique(a.begin(), a.end()), a.end());
    std::sort(b.begin(), b.end(), vec_less);
    b.erase(std::unique(b.begin(), b.end()), b.end());
    return a == b;
}

enum class Relation { DisjointOpen, Overlapping, SubsetOpen, Equal };

/// Open-interior containment relation between two bodies, up to projective
/// sign pairing.
inline Relation relate(const ConePolytope& p, const ConePolytope& q) {
    bool pq = detail::cone_subset(p, q, 1) || detail::cone_subset(p, q, -1);
    bool qp = detail::cone_subset(q, p, 1) || detail::cone_subset(q, p, -1);
    if (pq && qp) return Relation::Equal;
    // Closure containment alone is not open containment for bodies of lower
    // dimension sitting inside a boundary face, hence the interior-meet check.
    bool meet = detail::relint_meet(p, q);
    if (pq && meet) return Relation::SubsetOpen;
    if (meet) return Relation::Overlapping;
    return Relation::DisjointOpen;
}

/// Image of a body under a projective transformation.
inline ConePolytope apply(const ProjMap& g, const ConePolytope& p) {
    ConePolytope out;
    out.dim = p.dim;
    for (const auto& v : p.generators) out.generators.push_back(primitive(mat_apply(g.mat, v)));
    std::sort(out.generators.begin(), out.generators.end(), vec_less);
    RMat invt = mat_transpose(mat_inverse(g.mat));
    out.salient_witness = mat_apply(invt, p.salient_witness);
    return out;
}

/// Hilbert distance inside a body: exact cross-ratio, floating log.
inline std::pair<Rat, double> hilbert_distance(const ConePolytope& p, const ProjPoint& x,
                                               const ProjPoint& y) {
    auto lift = [&](const Vec& v) {
        Rat s = dot(p.salient_witness, v);
        if (s == 0) throw PointNotInterior("point is outside the cone lift");
        Vec out = v;
        if (s < 0) { out = detail::negated(out); s = -s; }
        for (auto& c : out) c /= s;  // affine chart <witness, .> = 1
        return out;
    };
    Vec xh = lift(x.rep), yh = lift(y.rep);

    auto sp = detail::split_facets(p.facets());
    for (const auto& f : sp.eq)
        if (dot(f, xh) != 0 || dot(f, yh) != 0)
            throw PointNotInterior("point is off the body's span");
    for (const auto& f : sp.ineq)
        if (dot(f, xh) <= 0 || dot(f, yh) <= 0)
            throw PointNotInterior("point is not strictly inside");

    if (xh == yh) return {Rat(1), 0.0};

    // Boundary parameters along x + t(y - x): a at the largest root below 0,
    // b at the smallest root above 1.
    std::optional<Rat> ta, tb;
    for (const auto& f : sp.ineq) {
        Rat fx = dot(f, xh), fy = dot(f, yh);
        if (fx == fy) continue;
        Rat t = fx / (fx - fy);
        if (t < 0 && (!ta || t > *ta)) ta = t;
        if (t > 1 && (!tb || t < *tb)) tb = t;
    }
    if (!ta || !tb) throw PointNotInterior("chord does not exit the body on both sides");

    // Cross-ratio [a; x; y; b] normalized so that [0; 1; t; inf] = t.
    Rat cr = ((Rat(1) - *ta) * *tb) / ((-*ta) * (*tb - Rat(1)));
    return {cr, 0.5 * std::log(cr.convert_to<double>())};
}

/// Polytopal sandwich around a smooth convex body: certified inner hull of
/// exact boundary samples and certified outer cone of exact supports.
struct ApproxBody {
    ConePolytope inner;
    ConePolytope outer;
    std::string label;
};

inline ApproxBody sandwich_smooth_body(const std::function<bool(const Vec&)>& membership,
                                       const std::function<Vec(std::size_t)>& boundary_sample,
                                       const std::function<Vec(std::size_t)>& support_sample,
                                       std::size_t n_samples, std::size_t dim,
                                       const std::string& label) {
    std::vector<Vec> pts, sups;
    for (std::size_t i = 0; i < n_samples; ++i) {
        Vec b = boundary_sample(i);
        if (!membership(b)) throw DegenerateSampling("boundary sample rejected by membership");
        pts.push_back(primitive(b));
        sups.push_back(primitive(support_sample(i)));
    }
    if (rank_of_rows(pts) != dim)
        throw DegenerateSampling("inner hull is not full-dimensional");

    ApproxBody out;
    out.label = label;
    out.inner = make_body(pts, dim);

    ConePolytope outer;
    outer.dim = dim;
    outer.generators = dd_convert(sups, dim);
    outer.set_facets(extreme_rays(sups, dim));
    auto w = detail::salience_witness(outer.generators, dim);
    if (!w) throw DegenerateSampling("outer cone is not properly convex");
    outer.salient_witness = *w;
    out.outer = outer;

    for (const auto& g : out.inner.generators)
        for (const auto& f : out.outer.facets())
            if (dot(f, g) < 0) throw DegenerateSampling("inner hull escapes a support");
    return out;
}

}  // namespace occultist
