#pragma once

#include "occultist/parallel.hpp"
#include "occultist/projective.hpp"

#include <array>
#include <sstream>

namespace occultist {

class PreconditionFailed : public std::runtime_error {
public:
    explicit PreconditionFailed(const std::string& what) : std::runtime_error(what) {}
};

enum class OccultMode { Full, Weak };

/// Certificate for the three-body blocking predicate. Full mode demands that
/// every hyperplane meeting the closures of the outer bodies meets the open
/// middle body; weak mode lets the hyperplane graze the middle body's closure.
struct OccultCertificate {
    enum class Verdict { Holds, Fails };
    Verdict verdict = Verdict::Fails;
    OccultMode mode = OccultMode::Full;
    bool o1_ok = false;
    bool o2_ok = false;
    std::string failure_reason;
    // One entry per generator-index tuple (i, j over A; p, q over C).
    std::vector<std::pair<std::array<std::size_t, 4>, FeasVerdict>> o3_subproblems;
    std::optional<ProjHyp> counterexample_hyperplane;
};

namespace detail {

/// LP for one index tuple: a hyperplane X that is nonnegative on B's cone
/// (strictly somewhere, or strictly everywhere in weak mode) while touching
/// both signs on the outer bodies' generators.
inline LinFeasProblem o3_problem(const std::vector<Vec>& agens, const std::vector<Vec>& bgens,
                                 const std::vector<Vec>& cgens, std::size_t dim, OccultMode mode,
                                 std::size_t i, std::size_t j, std::size_t p, std::size_t q) {
    LinFeasProblem lp;
    lp.dim = dim;
    if (mode == OccultMode::Full) {
        Vec sum(dim, Rat(0));
        for (const auto& b : bgens) {
            lp.add(b, Rel::Geq0);
            sum = add(sum, b);
        }
        lp.add(sum, Rel::Geq1);  // X does not vanish on all of B
    } else {
        for (const auto& b : bgens) lp.add(b, Rel::Geq1);
    }
    lp.add(negated(agens[i]), Rel::Geq0);
    lp.add(agens[j], Rel::Geq0);
    lp.add(negated(cgens[p]), Rel::Geq0);
    lp.add(cgens[q], Rel::Geq0);
    return lp;
}

struct O3Result {
    bool holds = true;
    std::vector<std::pair<std::array<std::size_t, 4>, FeasVerdict>> subproblems;
    std::optional<Vec> counterexample;
};

/// Blocking condition alone: sound for any salient lifts, since sign flips of
/// a body correspond to swapping the roles of its index pair.
inline O3Result o3_check(const ConePolytope& a, const ConePolytope& b, const ConePolytope& c,
                         OccultMode mode) {
    const auto& ag = a.generators;
    const auto& cg = c.generators;
    const std::size_t na = ag.size(), nc = cg.size();
    const std::size_t total = na * na * nc * nc;

    O3Result out;
    out.subproblems.resize(total);
    std::vector<char> feas(total, 0);
    parallel_for(total, [&](std::size_t t) {
        std::size_t rest = t;
        std::size_t q = rest % nc; rest /= nc;
        std::size_t p = rest % nc; rest /= nc;
        std::size_t j = rest % na; rest /= na;
        std::size_t i = rest;
        auto lp = o3_problem(ag, b.generators, cg, a.dim, mode, i, j, p, q);
        auto v = feasible(lp);
        feas[t] = v.feasible ? 1 : 0;
        out.subproblems[t] = {{i, j, p, q}, std::move(v)};
    });
    for (std::size_t t = 0; t < total; ++t) {
        if (feas[t]) {
            out.holds = false;
            out.counterexample = out.subproblems[t].second.witness;
            break;
        }
    }
    return out;
}

}  // namespace detail

/// Exact replay of a failure witness: the hyperplane must touch both signs on
/// each outer body's generators and stay one-signed on the middle body (with
/// at least one strict value in full mode, all strict in weak mode).
inline bool replay_counterexample(const ConePolytope& a, const ConePolytope& b,
                                  const ConePolytope& c, OccultMode mode, const Vec& x) {
    auto meets_closure = [&](const ConePolytope& p) {
        bool le = false, ge = false;
        for (const auto& g : p.generators) {
            Rat v = dot(x, g);
            if (v <= 0) le = true;
            if (v >= 0) ge = true;
        }
        return le && ge;
    };
    if (!meets_closure(a) || !meets_closure(c)) return false;
    bool nonneg = true, nonpos = true, strict_pos = false, strict_neg = false;
    bool all_pos = true, all_neg = true;
    for (const auto& g : b.generators) {
        Rat v = dot(x, g);
        if (v < 0) { nonneg = false; all_pos = false; }
        if (v > 0) { nonpos = false; all_neg = false; }
        if (v > 0) strict_pos = true;
        if (v < 0) strict_neg = true;
        if (v == 0) { all_pos = false; all_neg = false; }
    }
    if (mode == OccultMode::Full) return (nonneg && strict_pos) || (nonpos && strict_neg);
    return all_pos || all_neg;
}

inline OccultCertificate occultation_check(const ConePolytope& a, const ConePolytope& b,
                                           const ConePolytope& c, OccultMode mode) {
    if (!find_common_chart({a, b, c}))
        throw NoCommonChart("occultation triple has no common affine chart");

    OccultCertificate cert;
    cert.mode = mode;

    auto rab = relate(a, b);
    auto rcb = relate(c, b);
    cert.o1_ok = rab != Relation::SubsetOpen && rab != Relation::Equal &&
                 rcb != Relation::SubsetOpen && rcb != Relation::Equal;
    cert.o2_ok = rab != Relation::DisjointOpen && relate(b, c) != Relation::DisjointOpen &&
                 relate(a, c) == Relation::DisjointOpen;

    // O3 is evaluated even when O1/O2 already failed, so a witnessing
    // hyperplane is reported whenever one exists.
    auto o3 = detail::o3_check(a, b, c, mode);
    cert.o3_subproblems = std::move(o3.subproblems);
    if (!o3.holds) cert.counterexample_hyperplane = ProjHyp(*o3.counterexample);

    if (!cert.o1_ok)
        cert.failure_reason = "O1: an outer body is contained in the middle body";
    else if (!cert.o2_ok)
        cert.failure_reason = "O2: overlap pattern violated (need A~B, B~C, A disjoint C)";
    else if (!o3.holds)
        cert.failure_reason = "O3: a hyperplane meets both outer closures and misses the middle";
    else
        cert.verdict = OccultCertificate::Verdict::Holds;
    return cert;
}

/// Conservative check for sandwiched smooth bodies. Holds is sound for the
/// true smooth triple; Fails only means "not certified at this resolution".
inline OccultCertificate approx_occultation_check(const ApproxBody& a, const ApproxBody& b,
                                                  const ApproxBody& c,
                                                  OccultMode mode = OccultMode::Full) {
    OccultCertificate cert;
    cert.mode = mode;

    auto rab = relate(a.inner, b.outer);
    auto rcb = relate(c.inner, b.outer);
    cert.o1_ok = rab != Relation::SubsetOpen && rab != Relation::Equal &&
                 rcb != Relation::SubsetOpen && rcb != Relation::Equal;
    if (!cert.o1_ok) {
        cert.failure_reason = "O1 not certified: inner outer-body inside the middle's outer hull";
        return cert;
    }
    cert.o2_ok = relate(a.inner, b.inner) != Relation::DisjointOpen &&
                 relate(b.inner, c.inner) != Relation::DisjointOpen &&
                 relate(a.outer, c.outer) == Relation::DisjointOpen;
    if (!cert.o2_ok) {
        cert.failure_reason = "O2 not certified at this sandwich resolution";
        return cert;
    }
    auto o3 = detail::o3_check(a.outer, b.inner, c.outer, mode);
    cert.o3_subproblems = std::move(o3.subproblems);
    if (o3.holds) {
        cert.verdict = OccultCertificate::Verdict::Holds;
    } else {
        cert.failure_reason = "O3 not certified at this sandwich resolution";
        cert.counterexample_hyperplane = ProjHyp(*o3.counterexample);
    }
    return cert;
}

namespace detail {

/// Re-lifts bodies into one common chart so their cones can be combined.
struct ChartAligned {
    Vec chart;
    std::vector<ConePolytope> bodies;
};

inline ChartAligned chart_align(const std::vector<ConePolytope>& bodies) {
    auto r = common_chart_signed(bodies);
    if (!r) throw NoCommonChart("bodies admit no common affine chart");
    ChartAligned out;
    out.chart = r->first;
    for (std::size_t k = 0; k < bodies.size(); ++k) {
        if (r->second[k] > 0) {
            out.bodies.push_back(bodies[k]);
            continue;
        }
        ConePolytope flip;
        flip.dim = bodies[k].dim;
        for (const auto& g : bodies[k].generators) flip.generators.push_back(negated(g));
        std::sort(flip.generators.begin(), flip.generators.end(), vec_less);
        flip.salient_witness = out.chart;
        out.bodies.push_back(flip);
    }
    return out;
}

inline ConePolytope cone_hull(const std::vector<const ConePolytope*>& parts, std::size_t dim,
                              const Vec& chart) {
    std::vector<Vec> gens;
    for (const auto* p : parts)
        for (const auto& g : p->generators) gens.push_back(g);
    ConePolytope out;
    out.dim = dim;
    out.generators = extreme_rays(gens, dim);
    out.salient_witness = chart;
    return out;
}

}  // namespace detail

/// Hulls and exact consequences of a weakly blocking triple: the middle body
/// screens the two outer ones from each other inside the joint hull.
struct InvisibilityResult {
    ConePolytope hull_abc;
    ConePolytope hull_ab;
    ConePolytope hull_bc;
    bool chart_ok = false;
    bool union_ok = false;         // hull_abc = hull_ab ∪ hull_bc
    bool intersection_ok = false;  // hull_ab ∩ hull_bc = b
    bool proper_ok = false;        // a ⊄ hull_bc and c ⊄ hull_ab
};

inline InvisibilityResult invisibility(const ConePolytope& a, const ConePolytope& b,
                                       const ConePolytope& c) {
    auto weak = occultation_check(a, b, c, OccultMode::Weak);
    if (weak.verdict != OccultCertificate::Verdict::Holds)
        throw PreconditionFailed("weak occultation does not hold for the triple");

    auto aligned = detail::chart_align({a, b, c});
    const auto& A = aligned.bodies[0];
    const auto& B = aligned.bodies[1];
    const auto& C = aligned.bodies[2];

    InvisibilityResult res;
    res.chart_ok = true;
    res.hull_ab = detail::cone_hull({&A, &B}, a.dim, aligned.chart);
    res.hull_bc = detail::cone_hull({&B, &C}, a.dim, aligned.chart);
    res.hull_abc = detail::cone_hull({&A, &B, &C}, a.dim, aligned.chart);

    // Union: no point of the joint hull escapes both partial hulls, checked
    // per facet pair; scale invariance turns "strictly negative" into <= -1.
    res.union_ok = true;
    for (const auto& g : res.hull_abc.generators) {
        bool in_ab = true, in_bc = true;
        for (const auto& f : res.hull_ab.facets())
            if (dot(f, g) < 0) { in_ab = false; break; }
        for (const auto& f : res.hull_bc.facets())
            if (dot(f, g) < 0) { in_bc = false; break; }
        if (!in_ab && !in_bc) res.union_ok = false;
    }
    if (res.union_ok) {
        for (const auto& f1 : res.hull_ab.facets()) {
            for (const auto& f2 : res.hull_bc.facets()) {
                LinFeasProblem lp;
                lp.dim = a.dim;
                for (const auto& f : res.hull_abc.facets()) lp.add(f, Rel::Geq0);
                lp.add(detail::negated(f1), Rel::Geq1);
                lp.add(detail::negated(f2), Rel::Geq1);
                if (feasible(lp).feasible) {
                    res.union_ok = false;
                    break;
                }
            }
            if (!res.union_ok) break;
        }
    }

    auto meet = intersect(res.hull_ab, res.hull_bc);
    res.intersection_ok = meet.has_value() && same_projective_rays(meet->generators, B.generators);

    auto ra = relate(A, res.hull_bc);
    auto rc = relate(C, res.hull_ab);
    res.proper_ok = ra != Relation::SubsetOpen && ra != Relation::Equal &&
                    rc != Relation::SubsetOpen && rc != Relation::Equal;
    return res;
}

/// A triple together with its freshly computed certificate.
struct CertifiedTriple {
    ConePolytope a, b, c;
    OccultCertificate cert;
};

/// Merges the middles of two chained blocking triples, re-verifying both
/// merged configurations instead of trusting the statement.
inline std::pair<CertifiedTriple, CertifiedTriple> derive_lining_up(const ConePolytope& a,
                                                                    const ConePolytope& b,
                                                                    const ConePolytope& c,
                                                                    const ConePolytope& d) {
    auto h1 = occultation_check(a, b, c, OccultMode::Full);
    if (h1.verdict != OccultCertificate::Verdict::Holds)
        throw PreconditionFailed("first triple (a,b,c) does not hold in full mode");
    auto h2 = occultation_check(b, c, d, OccultMode::Full);
    if (h2.verdict != OccultCertificate::Verdict::Holds)
        throw PreconditionFailed("second triple (b,c,d) does not hold in full mode");

    ConePolytope bc = hull_union(b, c);
    ConePolytope cd = hull_union(c, d);
    CertifiedTriple t1{a, bc, d, occultation_check(a, bc, d, OccultMode::Full)};
    CertifiedTriple t2{a, b, cd, occultation_check(a, b, cd, OccultMode::Full)};
    return {t1, t2};
}

/// Three blocking triples around one middle body merge into a single one.
inline CertifiedTriple derive_valence3(const ConePolytope& a, const ConePolytope& b,
                                       const ConePolytope& c, const ConePolytope& d) {
    for (auto [x, z] : {std::pair{&a, &c}, {&a, &d}, {&c, &d}}) {
        auto h = occultation_check(*x, b, *z, OccultMode::Full);
        if (h.verdict != OccultCertificate::Verdict::Holds)
            throw PreconditionFailed("a hypothesis triple does not hold in full mode");
    }
    ConePolytope bc = hull_union(b, c);
    return {a, bc, d, occultation_check(a, bc, d, OccultMode::Full)};
}

}  // namespace occultist
