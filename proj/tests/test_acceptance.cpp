// Acceptance suite: one pass/fail line per criterion, exit code = number of
// failed criteria. Run directly or through ctest.

#include <chrono>
#include <cmath>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "occultist/cli.hpp"

using namespace occultist;

namespace {

using V = OccultCertificate::Verdict;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

Vec v3(const Rat& a, const Rat& b, const Rat& c) { return {a, b, c}; }

Vec dehomog(const Vec& g) {
    Vec out = g;
    for (auto& x : out) x /= g.back();
    return out;
}

// Random point of the closed body, as a rational convex combination of its
// generators in the chart where they are normalized.
Vec closure_sample(std::mt19937& rng, const ConePolytope& p) {
    std::uniform_int_distribution<int> coeff(0, 4);
    Vec x(p.dim, Rat(0));
    Rat total = 0;
    for (const auto& g : p.generators) {
        Rat w = coeff(rng);
        x = add(x, scale(dehomog(g), w));
        total += w;
    }
    if (total == 0) return dehomog(p.generators[0]);
    for (auto& c : x) c /= total;
    return x;
}

// Exact oracle: does the projective line through chart points p, q meet the
// open body with the given facet list? Each facet value is linear in the line
// parameter, so the answer is an interval intersection.
bool line_meets_open(const std::vector<Vec>& facets, const Vec& p, const Vec& q) {
    bool has_lo = false, has_hi = false;
    Rat lo, hi;
    for (const auto& f : facets) {
        Rat a = dot(f, p);
        Rat d = dot(f, q) - a;
        if (d == 0) {
            if (a <= 0) return false;
            continue;
        }
        Rat t0 = -a / d;
        if (d > 0) {
            if (!has_lo || t0 > lo) { lo = t0; has_lo = true; }
        } else {
            if (!has_hi || t0 < hi) { hi = t0; has_hi = true; }
        }
    }
    if (has_lo && has_hi) return lo < hi;
    return true;
}

Rat rnd_r(std::mt19937& rng) {  // random rational in [0, 1], denominator 8
    std::uniform_int_distribution<int> num(0, 8);
    return Rat(num(rng), 8);
}

struct Criterion {
    int failures = 0;
    void report(int n, bool ok, const std::string& detail) {
        std::cout << "criterion " << n << ": " << (ok ? "pass" : "fail");
        if (!detail.empty()) std::cout << " (" << detail << ")";
        std::cout << "\n" << std::flush;
        if (!ok) ++failures;
    }
    void run(int n, const std::string& what, bool (*fn)(std::string&)) {
        std::string detail = what;
        bool ok = false;
        try {
            ok = fn(detail);
        } catch (const std::exception& ex) {
            detail = what + "; exception: " + ex.what();
        }
        report(n, ok, detail);
    }
};

// 1. occultation_check vs. exact line sampling on 200 seeded box triples.
bool crit_oracle(std::string& detail) {
    auto t0 = Clock::now();
    std::mt19937 rng(12345);
    const int n_triples = 200, n_lines = 10000;
    for (int i = 0; i < n_triples; ++i) {
        auto t = gallery::random_occultation_triple(rng, i % 2 == 0);
        auto cert = occultation_check(t.a, t.b, t.c, OccultMode::Full);
        auto bf = t.b.facets();
        bool blocked = true;
        int sampled = 0;
        // generator pair lines first: they carry the tangency witnesses
        for (const auto& ga : t.a.generators) {
            for (const auto& gc : t.c.generators) {
                ++sampled;
                if (!line_meets_open(bf, dehomog(ga), dehomog(gc))) blocked = false;
            }
        }
        while (sampled < n_lines && blocked) {
            ++sampled;
            if (!line_meets_open(bf, closure_sample(rng, t.a), closure_sample(rng, t.c)))
                blocked = false;
        }
        if ((cert.verdict == V::Holds) != blocked) {
            detail = "disagreement at triple " + std::to_string(i);
            return false;
        }
    }
    double dt = seconds_since(t0);
    std::ostringstream os;
    os << n_triples << " triples, " << n_lines << " lines each, " << int(dt) << " s";
    detail = os.str();
    return dt < 120.0;
}

// 2. invisibility consequences on 100 weak-occultation triples.
bool crit_invisibility(std::string& detail) {
    std::mt19937 rng(2026);
    for (int i = 0; i < 100; ++i) {
        auto t = gallery::random_occultation_triple(rng, false);
        auto res = invisibility(t.a, t.b, t.c);
        if (!res.chart_ok || !res.union_ok || !res.intersection_ok || !res.proper_ok) {
            detail = "invisibility item fails at triple " + std::to_string(i);
            return false;
        }
    }
    detail = "100/100 hull, intersection and non-absorption checks";
    return true;
}

// 3. lining-up and valence-3 derivations on 100 quadruples each, plus the
// weak-only configuration rejecting the full precondition.
bool crit_derivations(std::string& detail) {
    std::mt19937 rng(777);
    using gallery::chart_box;
    for (int i = 0; i < 100; ++i) {
        // chain a - b - c - d with tall middles of equal height
        Rat wa = 1 + rnd_r(rng);
        Rat oa = wa / 2;
        Rat x3 = wa + 1 + rnd_r(rng);
        Rat x2 = x3 + Rat(1, 2) + rnd_r(rng);
        Rat x5 = x2 + Rat(1, 2) + rnd_r(rng);
        Rat x4 = x5 + Rat(1, 2) + rnd_r(rng);
        Rat x6 = x4 + 1 + rnd_r(rng);
        Rat e = 1 + rnd_r(rng);
        auto a = chart_box(0, wa, 0, 1);
        auto b = chart_box(oa, x2, -e, 1 + e);
        auto c = chart_box(x3, x4, -e, 1 + e);
        auto d = chart_box(x5, x6, 0, 1);
        auto [t1, t2] = derive_lining_up(a, b, c, d);
        if (t1.cert.verdict != V::Holds || t2.cert.verdict != V::Holds) {
            detail = "lining-up derivation fails at quadruple " + std::to_string(i);
            return false;
        }
    }
    for (int i = 0; i < 100; ++i) {
        // three bodies poking out of one large middle: left, top, right
        Rat e = Rat(1, 2) + rnd_r(rng) / 2;
        Rat wb = 3 + rnd_r(rng);
        Rat h = 1 + e + Rat(1, 2) + rnd_r(rng) / 2;
        Rat mid = wb / 2;
        auto b = gallery::chart_box(0, wb, -e, 1 + e);
        auto a = gallery::chart_box(Rat(-1, 8), Rat(1, 2), 0, 1);
        auto c = gallery::chart_box(mid - Rat(1, 4), mid + Rat(1, 4), Rat(1, 2), h);
        auto d = gallery::chart_box(wb - Rat(1, 2), wb + Rat(1, 8), 0, 1);
        auto merged = derive_valence3(a, b, c, d);
        if (merged.cert.verdict != V::Holds) {
            detail = "valence-3 derivation fails at quadruple " + std::to_string(i);
            return false;
        }
    }
    // a weak-only first triple must be rejected by the full precondition
    auto weak = gallery::random_occultation_triple(rng, false);
    try {
        derive_lining_up(weak.a, weak.b, weak.c, weak.c);
        detail = "weak-only configuration was not rejected";
        return false;
    } catch (const PreconditionFailed&) {
    }
    detail = "100 + 100 derived triples hold; weak-only configuration rejected";
    return true;
}

// 4. tree conclusions at depth 4 on the free product scene, and detection of
// single-body mutations.
bool crit_tree(std::string& detail) {
    auto scene = gallery::build_free_product_scene(gallery::default_free_product_params());
    auto t = expand_tree(scene.gog, 4);
    auto conc = verify_tree_conclusions(t);
    if (!conc.common_chart) {
        detail = "no common chart at depth 4";
        return false;
    }
    // overwrite an inner body with its neighbor: adjacency conclusion breaks
    auto broken = t;
    broken.nodes[1].body = broken.nodes[0].body;
    bool caught1 = false;
    try {
        verify_tree_conclusions(broken);
    } catch (const ConclusionViolated&) {
        caught1 = true;
    }
    // duplicate one leaf onto another: disjointness conclusion breaks
    auto leafy = t;
    leafy.nodes.back().body = leafy.nodes[leafy.nodes.size() - 2].body;
    bool caught2 = false;
    try {
        verify_tree_conclusions(leafy);
    } catch (const ConclusionViolated&) {
        caught2 = true;
    }
    std::ostringstream os;
    os << t.nodes.size() << " nodes, " << conc.node_pairs << " node pairs, " << conc.edge_pairs
       << " edge pairs; mutations detected";
    detail = os.str();
    return caught1 && caught2;
}

// 5. exactness of the triangle example.
bool crit_triangle(std::string& detail) {
    auto scene = gallery::triangle_scene();
    const auto& T = scene.bodies.at("T");
    const auto& C = scene.bodies.at("C");
    const auto& h = scene.maps.at("h");
    if (!(apply(h, C) == C)) {
        detail = "core body is not invariant";
        return false;
    }
    RMat m = RMat::identity(3);
    m.at(0, 0) = Rat(1, 4);
    m.at(1, 1) = 2;
    m.at(2, 2) = 2;
    if (spectral_report(m).proximal != Tri::False) {
        detail = "diag(1/4, 2, 2) was reported proximal";
        return false;
    }
    std::mt19937 rng(55);
    std::uniform_int_distribution<int> pos(1, 9);
    for (int i = 0; i < 20; ++i) {
        Vec x = {Rat(pos(rng)), Rat(pos(rng)), Rat(pos(rng))};
        Vec y = {Rat(pos(rng)), Rat(pos(rng)), Rat(pos(rng))};
        auto before = hilbert_distance(T, ProjPoint(x), ProjPoint(y));
        auto after = hilbert_distance(T, ProjPoint(mat_apply(h.mat, x)),
                                      ProjPoint(mat_apply(h.mat, y)));
        if (before.first != after.first) {
            detail = "cross ratio not invariant at pair " + std::to_string(i);
            return false;
        }
    }
    detail = "core invariance, non-proximality, 20 exact isometry pairs";
    return true;
}

// 6. Hilbert metric value in the open simplex against the simplex formula.
bool crit_hilbert(std::string& detail) {
    auto T = make_body({v3(1, 0, 0), v3(0, 1, 0), v3(0, 0, 1)}, 3);
    Vec x = {1, 1, 1};
    Vec y = {4, Rat(1, 2), Rat(1, 2)};
    auto [cross, dist] = hilbert_distance(T, ProjPoint(x), ProjPoint(y));
    if (cross != 8) {
        detail = "cross ratio is " + rat_to_string(cross) + ", expected 8";
        return false;
    }
    if (std::abs(dist - 0.5 * std::log(8.0)) > 1e-12) {
        detail = "distance deviates from ln(8)/2";
        return false;
    }
    Rat best = 1;
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j) {
            Rat r = (x[i] * y[j]) / (x[j] * y[i]);
            if (r > best) best = r;
        }
    double oracle = 0.5 * std::log(best.convert_to<double>());
    if (std::abs(dist - oracle) > 1e-12) {
        detail = "distance deviates from the simplex formula";
        return false;
    }
    detail = "cross ratio 8 exact, distance matches ln(8)/2 and the simplex formula";
    return true;
}

RMat rand_sl2(std::mt19937& rng) {
    std::uniform_int_distribution<int> num(-3, 3);
    std::uniform_int_distribution<int> den(1, 3);
    auto shear = [&](bool upper) {
        RMat s = RMat::identity(2);
        s.at(upper ? 0 : 1, upper ? 1 : 0) = Rat(num(rng), den(rng));
        return s;
    };
    return mat_mul(mat_mul(shear(true), shear(false)), mat_mul(shear(true), shear(false)));
}

// 7. symmetric square dimensions, multiplicativity, and cone mapping.
bool crit_sym_square(std::string& detail) {
    if (gallery::sym_dim(2) != 3 || gallery::sym_dim(3) != 6) {
        detail = "symmetric square dimensions are wrong";
        return false;
    }
    std::mt19937 rng(99);
    for (int i = 0; i < 100; ++i) {
        RMat g = rand_sl2(rng), h = rand_sl2(rng);
        if (!(gallery::sym_square(mat_mul(g, h)) ==
              mat_mul(gallery::sym_square(g), gallery::sym_square(h)))) {
            detail = "multiplicativity fails at pair " + std::to_string(i);
            return false;
        }
    }
    auto coarse = gallery::pd_cone_body(2, 8);
    auto refined = gallery::pd_cone_body(2, 16);
    auto outer_facets = refined.outer.facets();
    for (int i = 0; i < 5; ++i) {
        RMat s = gallery::sym_square(rand_sl2(rng));
        for (const auto& x : coarse.inner.generators) {
            Vec y = mat_apply(s, x);
            for (const auto& f : outer_facets) {
                if (dot(f, y) < 0) {
                    detail = "a mapped inner generator escapes the refined outer body";
                    return false;
                }
            }
        }
    }
    detail = "n_2 = 3, n_3 = 6, 100 multiplicative pairs, cone mapping preserved";
    return true;
}

// 8. thickening membership against the exact power comparison at the identity.
bool crit_thickening(std::string& detail) {
    for (std::size_t d : {std::size_t(2), std::size_t(3)}) {
        Vec base = gallery::sym_to_coords(RMat::identity(d));
        for (int k = 0; k < 50; ++k) {
            Rat t = Rat(k - 25, 12);
            Vec x = base;
            x.push_back(t);
            Rat p = 1;
            for (std::size_t e = 0; e <= d; ++e) p *= abs(t);
            bool expect = p <= 1;  // det of the identity block is 1
            if (gallery::thickened_membership(x, d) != expect) {
                detail = "membership mismatch at d = " + std::to_string(d) +
                         ", t = " + rat_to_string(t);
                return false;
            }
        }
    }
    detail = "100 exact membership decisions match, d = 2 and 3";
    return true;
}

// 9. confinement certificates replay as direct occultation checks at the two
// powers just past the window.
bool crit_confinement(std::string& detail) {
    auto scene = gallery::build_free_product_scene(gallery::default_free_product_params());
    const auto& gog = scene.gog;
    int replayed = 0;
    for (const auto& [vname, v] : gog.vertices) {
        if (v.kind != GroupKind::Cyclic || !v.confinement) continue;
        std::vector<ConePolytope> edge_bodies;
        for (const auto& e : gog.oriented_edges)
            if (e.origin == vname)
                edge_bodies.push_back(apply(e.g, gog.vertices.at(e.target).body));
        // the certificate itself must hold before it is replayed
        auto cc = confinement_certificate(v.generator, edge_bodies, v.confinement->u_plus,
                                          v.confinement->u_minus, v.confinement->window + 1,
                                          &v.body, &edge_bodies);
        if (!cc.holds) {
            detail = "confinement certificate fails at vertex " + vname;
            return false;
        }
        for (long k : {long(v.confinement->window) + 1, long(v.confinement->window) + 2}) {
            for (long sk : {k, -k}) {
                ProjMap gk(mat_pow(v.generator.mat, sk));
                for (const auto& ei : edge_bodies) {
                    for (const auto& ej : edge_bodies) {
                        auto oc = occultation_check(ei, v.body, apply(gk, ej), OccultMode::Full);
                        if (oc.verdict != V::Holds) {
                            detail = "replay fails at vertex " + vname + ", power " +
                                     std::to_string(sk);
                            return false;
                        }
                        ++replayed;
                    }
                }
            }
        }
    }
    detail = std::to_string(replayed) + " direct checks past the window hold";
    return replayed > 0;
}

// 10. divergence of normal-form words on the free product scene.
bool crit_divergence(std::string& detail) {
    auto scene = gallery::build_free_product_scene(gallery::default_free_product_params());
    auto rep = divergence_report(scene.gog, 5);
    if (rep.identity_collision) {
        detail = "a non-identity word equals the identity";
        return false;
    }
    if (rep.rows.size() != 6) {
        detail = "unexpected row count";
        return false;
    }
    for (std::size_t m = 2; m <= 5; ++m) {
        if (!(rep.rows[m].min_log_ratio > rep.rows[m - 1].min_log_ratio)) {
            detail = "min log ratio not increasing at length " + std::to_string(m);
            return false;
        }
    }
    std::ostringstream os;
    os << rep.words_enumerated << " words, min log ratio rises from "
       << rep.rows[1].min_log_ratio << " to " << rep.rows[5].min_log_ratio;
    detail = os.str();
    return true;
}

// 11. transversal flag for the diagonal lattice, found fast and replayed from
// its serialization.
bool crit_soifer(std::string& detail) {
    auto t0 = Clock::now();
    auto flag = gallery::soifer_transversality(3, 6);
    double dt = seconds_since(t0);
    if (!(flag.margin > 0)) {
        detail = "margin is not positive";
        return false;
    }
    cli::json doc;
    doc["point"] = cli::vec_to_json(flag.x.rep);
    doc["hyperplane"] = cli::vec_to_json(flag.X.rep);
    doc["margin"] = rat_to_string(flag.margin);
    cli::json loaded = cli::json::parse(doc.dump());
    Vec phi = cli::vec_from_json(loaded.at("hyperplane"), "$.hyperplane");
    Rat stored = cli::rat_from_json(loaded.at("margin"), "$.margin");
    Rat replay = 0;
    bool first = true;
    for (const auto& p : gallery::soifer_orbit(3, 6)) {
        Rat m = gallery::flag_margin(phi, p);
        if (first || m < replay) { replay = m; first = false; }
    }
    if (replay != stored || !(replay > 0)) {
        detail = "replayed margin disagrees with the serialized one";
        return false;
    }
    std::ostringstream os;
    os << "margin " << rat_to_string(stored) << " found in " << dt << " s and replayed";
    detail = os.str();
    return dt < 60.0;
}

// 12. double duality round-trips with freshly recomputed facets.
bool crit_duality(std::string& detail) {
    std::mt19937 rng(4242);
    std::uniform_int_distribution<int> num(0, 5);
    std::uniform_int_distribution<int> scl(1, 5);
    int done = 0;
    for (std::size_t dim = 2; dim <= 5; ++dim) {
        for (int i = 0; i < 25; ++i) {
            std::vector<Vec> gens;
            Vec origin(dim, Rat(0));
            origin.back() = 1;
            gens.push_back(origin);
            for (std::size_t k = 0; k + 1 < dim; ++k) {
                Vec v(dim, Rat(0));
                v[k] = scl(rng);
                v.back() = 1;
                gens.push_back(v);
            }
            for (int extra = 0; extra < 2; ++extra) {
                Vec v(dim, Rat(0));
                for (std::size_t k = 0; k + 1 < dim; ++k) v[k] = Rat(num(rng), scl(rng));
                v.back() = 1;
                gens.push_back(v);
            }
            auto p = make_body(gens, dim);
            auto d = dual(p);
            // rebuild the dual from scratch so its facets are recomputed
            auto q = make_body(d.generators, dim);
            auto dd = dual(q);
            if (!same_projective_rays(dd.generators, p.generators)) {
                detail = "double dual differs in dimension " + std::to_string(dim);
                return false;
            }
            ++done;
        }
    }
    detail = std::to_string(done) + " bodies round-trip exactly, dimensions 2 to 5";
    return true;
}

}  // namespace

int main() {
    Criterion c;
    c.run(1, "occultation oracle equivalence", crit_oracle);
    c.run(2, "invisibility consequences", crit_invisibility);
    c.run(3, "lining-up and valence-3 derivations", crit_derivations);
    c.run(4, "tree conclusions at depth 4", crit_tree);
    c.run(5, "triangle example exactness", crit_triangle);
    c.run(6, "Hilbert metric value", crit_hilbert);
    c.run(7, "symmetric square", crit_sym_square);
    c.run(8, "thickening formula", crit_thickening);
    c.run(9, "confinement soundness", crit_confinement);
    c.run(10, "divergence diagnostic", crit_divergence);
    c.run(11, "diagonal lattice transversality", crit_soifer);
    c.run(12, "double duality round-trips", crit_duality);
    return c.failures;
}
