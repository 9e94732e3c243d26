#pragma once

#include "occultist/graph_of_groups.hpp"
#include "occultist/occultation.hpp"
#include "occultist/spectral.hpp"

#include <random>

namespace occultist {

struct OccultTriple {
    ConePolytope a, b, c;
};

class ChopNotPyramidal : public std::runtime_error {
public:
    explicit ChopNotPyramidal(const std::string& what) : std::runtime_error(what) {}
};

class ApexOutside : public std::runtime_error {
public:
    explicit ApexOutside(const std::string& what) : std::runtime_error(what) {}
};

class NoFlagFound : public std::runtime_error {
public:
    explicit NoFlagFound(const std::string& what) : std::runtime_error(what) {}
};

/// Point-hyperplane pair with a certified separation margin from an orbit.
struct FlagPair {
    ProjPoint x;
    ProjHyp X;
    Rat margin;
};

class AssemblyFailed : public std::runtime_error {
public:
    explicit AssemblyFailed(const std::string& what) : std::runtime_error(what) {}
};

/// A named bundle of bodies and maps together with the graph of groups they
/// instantiate. Builders fill the metadata with the flags they checked.
struct Scene {
    std::size_t dim = 0;
    std::map<std::string, ConePolytope> bodies;
    std::map<std::string, ApproxBody> approx_bodies;
    std::map<std::string, ProjMap> maps;
    GraphOfGroups gog;
    std::map<std::string, std::string> metadata;
};

namespace gallery {

// ---- symmetric square -----------------------------------------------------
//
// Coordinates on symmetric d x d matrices: the d diagonal entries first, then
// the off-diagonal entries M_ij (i < j) in lexicographic order. With these
// coordinates the action M -> g M g^T is integral whenever g is integral.

inline std::size_t sym_dim(std::size_t d) { return d * (d + 1) / 2; }

inline std::size_t sym_index(std::size_t d, std::size_t i, std::size_t j) {
    if (i == j) return i;
    if (i > j) std::swap(i, j);
    // offset of pair (i, j), i < j, after the d diagonal slots
    std::size_t off = 0;
    for (std::size_t r = 0; r < i; ++r) off += d - 1 - r;
    return d + off + (j - i - 1);
}

inline RMat sym_from_coords(const Vec& x, std::size_t d) {
    RMat m(d);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) m.at(i, j) = x[sym_index(d, i, j)];
    return m;
}

inline Vec sym_to_coords(const RMat& m) {
    std::size_t d = m.n;
    Vec x(sym_dim(d));
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = i; j < d; ++j) x[sym_index(d, i, j)] = m.at(i, j);
    return x;
}

/// Matrix of M -> g M g^T in the fixed coordinates.
inline RMat sym_square(const RMat& g) {
    std::size_t d = g.n, n = sym_dim(d);
    RMat out(n);
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = i; j < d; ++j) {
            // image of the basis matrix with 1 at (i,j) and (j,i)
            RMat e(d);
            e.at(i, j) = 1;
            e.at(j, i) = 1;
            RMat img = mat_mul(mat_mul(g, e), mat_transpose(g));
            Vec col = sym_to_coords(img);
            std::size_t c = sym_index(d, i, j);
            for (std::size_t r = 0; r < n; ++r) out.at(r, c) = col[r];
        }
    }
    return out;
}

/// Block extension by the one-dimensional trivial summand.
inline RMat sym_square_plus(const RMat& g) {
    RMat s = sym_square(g);
    RMat out(s.n + 1);
    for (std::size_t i = 0; i < s.n; ++i)
        for (std::size_t j = 0; j < s.n; ++j) out.at(i, j) = s.at(i, j);
    out.at(s.n, s.n) = 1;
    return out;
}

/// Exact positive semidefiniteness via the sign pattern of the
/// characteristic polynomial (all eigenvalues are real here).
inline bool is_psd(const RMat& m) {
    auto p = char_poly(m);  // coefficients low to high, monic
    std::size_t n = m.n;
    for (std::size_t k = 0; k <= n; ++k) {
        Rat c = p[n - k];  // coefficient of t^(n-k)
        if ((k % 2 == 0 && c < 0) || (k % 2 == 1 && c > 0)) return false;
    }
    return true;
}

/// Deterministic primitive integer direction vectors, one per projective
/// class, in lexicographic order.
inline std::vector<Vec> direction_samples(std::size_t d, std::size_t count) {
    std::vector<Vec> out;
    for (int radius = 1; out.size() < count && radius <= 6; ++radius) {
        std::vector<int> idx(d, -radius);
        for (;;) {
            Vec v(d);
            for (std::size_t i = 0; i < d; ++i) v[i] = idx[i];
            if (!is_zero(v)) {
                Vec p = canonical_line(v);
                if (std::find(out.begin(), out.end(), p) == out.end()) out.push_back(p);
            }
            std::size_t pos = 0;
            while (pos < d && idx[pos] == radius) idx[pos++] = -radius;
            if (pos == d) break;
            ++idx[pos];
            if (out.size() >= count) break;
        }
    }
    if (out.size() < count) throw DegenerateSampling("not enough direction samples");
    return out;
}

/// Certified sandwich of the positive semidefinite cone in sym coordinates.
inline ApproxBody pd_cone_body(std::size_t d, std::size_t n_samples) {
    if (n_samples < sym_dim(d) + 1) throw DegenerateSampling("too few samples");
    auto dirs = direction_samples(d, n_samples);
    auto membership = [d](const Vec& x) { return is_psd(sym_from_coords(x, d)); };
    auto boundary = [&, d](std::size_t i) {
        // rank-one point v v^T
        const Vec& v = dirs[i];
        Vec x(sym_dim(d));
        for (std::size_t a = 0; a < d; ++a)
            for (std::size_t b = a; b < d; ++b) x[sym_index(d, a, b)] = v[a] * v[b];
        return x;
    };
    auto support = [&, d](std::size_t i) {
        // the functional M -> v^T M v, nonnegative on the cone
        const Vec& v = dirs[i];
        Vec c(sym_dim(d));
        for (std::size_t a = 0; a < d; ++a)
            for (std::size_t b = a; b < d; ++b)
                c[sym_index(d, a, b)] = (a == b) ? Rat(v[a] * v[a]) : Rat(2 * v[a] * v[b]);
        return c;
    };
    return sandwich_smooth_body(membership, boundary, support, n_samples, sym_dim(d), "psd");
}

// ---- thickened positive definite body --------------------------------------
//
// The thickening pairs M with a slab coordinate t bounded by a concave
// 1-homogeneous function of M. At the cone level the correct exponent is
// |t| <= det(M)^(1/d), which is 1-homogeneous; on the det(M) = 1 slice this
// classifies exactly like |t|^(d+1) <= det(M).

inline bool thickened_membership(const Vec& x, std::size_t d) {
    Vec mcoords(x.begin(), x.end() - 1);
    RMat m = sym_from_coords(mcoords, d);
    if (!is_psd(m)) return false;
    Rat t = x.back();
    Rat td = 1;
    for (std::size_t k = 0; k < d; ++k) td *= abs(t);
    return td <= mat_det(m);
}

inline ApproxBody thickened_pd_body(std::size_t d, std::size_t n_samples) {
    std::size_t nd = sym_dim(d);
    // PD sample matrices with det a perfect d-th power, so both the inner
    // points (M, +-r) and the tangent supports are exactly rational.
    std::vector<std::pair<RMat, Rat>> samples;  // (matrix, r with r^d = det)
    {
        auto push_diag = [&](const std::vector<int>& diag, int r) {
            RMat m(d);
            for (std::size_t i = 0; i < d; ++i) m.at(i, i) = diag[i];
            samples.push_back({m, Rat(r)});
        };
        if (d == 2) {
            push_diag({1, 1}, 1);
            push_diag({4, 1}, 2);
            push_diag({1, 4}, 2);
            push_diag({4, 4}, 4);
            push_diag({9, 1}, 3);
            push_diag({1, 9}, 3);
            push_diag({9, 4}, 6);
            push_diag({4, 9}, 6);
            // rotated samples: det 4, conjugates of diag(4,1) by shears of
            // both signs, so the off-diagonal coordinate is spanned both ways
            for (int s : {1, -1}) {
                RMat m(2);
                m.at(0, 0) = 10;
                m.at(0, 1) = 4 * s;
                m.at(1, 0) = 4 * s;
                m.at(1, 1) = 2;
                samples.push_back({m, Rat(2)});
            }
        } else {
            push_diag(std::vector<int>(d, 1), 1);
            for (std::size_t i = 0; i < d; ++i) {
                std::vector<int> diag(d, 1);
                diag[i] = 1 << d;  // det = 2^d
                push_diag(diag, 2);
            }
            std::vector<int> big(d, 4);
            push_diag(big, 4);
            // sheared samples so the inner hull spans the off-diagonal
            // coordinates: (I + E_ij)(I + E_ij)^T has det 1
            for (std::size_t i = 0; i < d; ++i) {
                for (std::size_t j = i + 1; j < d; ++j) {
                    for (int s : {1, -1}) {
                        RMat m = RMat::identity(d);
                        m.at(i, i) = 2;
                        m.at(i, j) = s;
                        m.at(j, i) = s;
                        samples.push_back({m, Rat(1)});
                    }
                }
            }
        }
    }
    while (samples.size() > n_samples) samples.pop_back();
    if (samples.size() * 3 < nd + 2) throw DegenerateSampling("too few thickening samples");

    std::vector<Vec> inner_pts;
    std::vector<Vec> supports;
    for (const auto& [m, r] : samples) {
        Vec base = sym_to_coords(m);
        for (const Rat& t : {Rat(0), r, Rat(-r)}) {
            Vec p = base;
            p.push_back(t);
            inner_pts.push_back(primitive(p));
        }
        // tangent of det^(1/d) at m: +-t <= (r/d) tr(m^{-1} M)
        RMat inv = mat_inverse(m);
        Vec grad(nd);
        for (std::size_t a = 0; a < d; ++a)
            for (std::size_t b = a; b < d; ++b)
                grad[sym_index(d, a, b)] =
                    (a == b ? inv.at(a, a) : inv.at(a, b) + inv.at(b, a)) * r / Rat(d);
        for (int s : {1, -1}) {
            Vec c = grad;
            c.push_back(Rat(-s));
            supports.push_back(primitive(c));
        }
    }
    // PSD-side supports keep the M block inside the cone.
    for (const auto& v : direction_samples(d, nd + 2)) {
        Vec c(nd + 1, Rat(0));
        for (std::size_t a = 0; a < d; ++a)
            for (std::size_t b = a; b < d; ++b)
                c[sym_index(d, a, b)] = (a == b) ? Rat(v[a] * v[a]) : Rat(2 * v[a] * v[b]);
        supports.push_back(primitive(c));
    }

    auto membership = [d](const Vec& x) { return thickened_membership(x, d); };
    auto boundary = [&](std::size_t i) { return inner_pts[i % inner_pts.size()]; };
    auto support = [&](std::size_t i) { return supports[i % supports.size()]; };
    std::size_t n = std::max(inner_pts.size(), supports.size());
    return sandwich_smooth_body(membership, boundary, support, n, nd + 1, "thickened-pd");
}

// ---- pyramid replacement ----------------------------------------------------

/// Replaces the vertex pyramid beyond `chop` (one body vertex strictly on the
/// negative side) by the smaller pyramid over the same base with apex
/// `apex_new`, for every element of `orbit` in turn.
inline ConePolytope pyramid_replace(const ConePolytope& body, const ProjHyp& chop,
                                    const ProjPoint& apex_new,
                                    const std::vector<ProjMap>& orbit) {
    ConePolytope cur = body;
    for (const auto& g : orbit) {
        Vec h = mat_apply_transpose(mat_inverse(g.mat), chop.rep);
        Vec apex = mat_apply(g.mat, apex_new.rep);

        // orient h so exactly one generator is strictly negative
        auto count_neg = [&](const Vec& hh) {
            int neg = 0, zero = 0;
            for (const auto& gen : cur.generators) {
                Rat v = dot(hh, gen);
                if (v < 0) ++neg;
                if (v == 0) ++zero;
            }
            return std::pair{neg, zero};
        };
        auto [neg, zero] = count_neg(h);
        if (zero > 0) throw ChopNotPyramidal("chop passes through a vertex");
        if (neg != 1) {
            h = detail::negated(h);
            auto [neg2, zero2] = count_neg(h);
            (void)zero2;
            if (neg2 != 1) throw ChopNotPyramidal("chop does not isolate one vertex");
        }

        // apex_new must be in the closed body, strictly on the apex side
        Rat wa = dot(cur.salient_witness, apex);
        if (wa == 0) throw ApexOutside("apex lift is orthogonal to the witness");
        if (wa < 0) apex = detail::negated(apex);
        for (const auto& f : cur.facets())
            if (dot(f, apex) < 0) throw ApexOutside("new apex is outside the body");
        if (dot(h, apex) >= 0) throw ApexOutside("new apex is not beyond the chop");

        // base of the pyramid: body cut by the chop hyperplane
        std::vector<Vec> rows = cur.facets();
        rows.push_back(h);
        rows.push_back(detail::negated(h));
        std::vector<Vec> base = dd_convert(rows, cur.dim);

        std::vector<Vec> gens;
        for (const auto& gen : cur.generators)
            if (dot(h, gen) > 0) gens.push_back(gen);
        for (const auto& b : base) gens.push_back(b);
        gens.push_back(primitive(apex));

        ConePolytope next;
        next.dim = cur.dim;
        next.generators = extreme_rays(gens, cur.dim);
        next.salient_witness = cur.salient_witness;
        cur = next;
    }
    return cur;
}

// ---- diagonal lattice transversality ---------------------------------------

/// Orbit of [1 : ... : 1] under the rank d-1 diagonal lattice with rational
/// base 2, truncated to exponent vectors of max-norm at most N. Points are
/// returned as primitive integer vectors.
inline std::vector<Vec> soifer_orbit(std::size_t d, int N) {
    std::vector<Vec> pts;
    std::vector<int> k(d - 1, -N);
    for (;;) {
        int s = 0;
        for (int v : k) s += v;
        bool all_zero = true;
        for (int v : k)
            if (v != 0) all_zero = false;
        if (!all_zero) {
            // exponents a_j = d*k_j - s for j < d-1, a_{d-1} = -s
            std::vector<long> a(d);
            long amin = 0;
            for (std::size_t j = 0; j + 1 < d; ++j) {
                a[j] = long(d) * k[j] - s;
                amin = std::min(amin, a[j]);
            }
            a[d - 1] = -s;
            amin = std::min(amin, a[d - 1]);
            Vec p(d);
            for (std::size_t j = 0; j < d; ++j) p[j] = pow(Int(2), unsigned(a[j] - amin));
            pts.push_back(p);
        }
        std::size_t pos = 0;
        while (pos < d - 1 && k[pos] == N) k[pos++] = -N;
        if (pos == d - 1) break;
        ++k[pos];
    }
    return pts;
}

inline Rat l1_norm(const Vec& v) {
    Rat s = 0;
    for (const auto& x : v) s += abs(x);
    return s;
}

/// Exact normalized margin of a covector against one point.
inline Rat flag_margin(const Vec& phi, const Vec& p) {
    return abs(dot(phi, p)) / (l1_norm(phi) * l1_norm(p));
}

/// Searches for a hyperplane through [1 : ... : 1] with positive exact margin
/// to every truncated non-identity orbit point; deterministic enumeration,
/// best margin wins, lowest index breaks ties.
inline FlagPair soifer_transversality(std::size_t d, int N, std::size_t budget = 100000) {
    auto orbit = soifer_orbit(d, N);
    Vec ones(d, Rat(1));

    std::optional<Vec> best;
    Rat best_margin = 0;
    std::size_t tried = 0;
    const int B = 3;
    std::vector<int> c(d, -B);
    for (;;) {
        int sum = 0;
        for (int v : c) sum += v;
        if (sum == 0) {
            Vec phi(d);
            bool nonzero = false;
            for (std::size_t i = 0; i < d; ++i) {
                phi[i] = c[i];
                if (c[i] != 0) nonzero = true;
            }
            if (nonzero && ++tried <= budget) {
                Rat m;
                bool positive = true;
                bool first = true;
                for (const auto& p : orbit) {
                    Rat mm = flag_margin(phi, p);
                    if (mm == 0) { positive = false; break; }
                    if (first || mm < m) { m = mm; first = false; }
                }
                if (positive && m > best_margin) {
                    best = canonical_line(phi);
                    best_margin = m;
                }
            }
        }
        std::size_t pos = 0;
        while (pos < d && c[pos] == B) c[pos++] = -B;
        if (pos == d || tried > budget) break;
        ++c[pos];
    }
    if (!best) throw NoFlagFound("no hyperplane with positive margin within budget");
    return FlagPair{ProjPoint(ones), ProjHyp(*best), best_margin};
}

inline ConePolytope chart_box(const Rat& x0, const Rat& x1, const Rat& y0, const Rat& y1) {
    return make_body({Vec{x0, y0, Rat(1)}, Vec{x1, y0, Rat(1)}, Vec{x0, y1, Rat(1)},
                      Vec{x1, y1, Rat(1)}},
                     3);
}

/// Random boxes along a line in the chart x3 = 1: outer boxes with unit
/// height, middle box overlapping both and overflowing vertically. The
/// overflow guarantees full occultation; with overflow = false the shared
/// tangent lines y = 0 and y = 1 defeat full mode while weak mode survives.
inline OccultTriple random_occultation_triple(std::mt19937& rng, bool overflow = true) {
    auto r = [&](int lo, int hi) {
        std::uniform_int_distribution<int> num(lo, hi);
        std::uniform_int_distribution<int> den(1, 3);
        int d = den(rng);
        return Rat(num(rng) * d + int(rng() % std::size_t(d)), d);
    };
    Rat wa = Rat(1) + r(0, 2);               // right edge of A
    Rat oa = wa * Rat(1, 2);                 // left edge of B, inside A
    Rat x3 = wa + Rat(1) + r(0, 2);          // left edge of C, past A
    Rat x2 = x3 + Rat(1, 2) + r(0, 1);       // right edge of B, inside C
    Rat x4 = x2 + Rat(1) + r(0, 2);          // right edge of C, past B
    Rat e = overflow ? Rat(1) + r(0, 1) : Rat(0);
    OccultTriple t;
    t.a = chart_box(0, wa, 0, 1);
    t.b = chart_box(oa, x2, -e, Rat(1) + e);
    t.c = chart_box(x3, x4, 0, 1);
    return t;
}

// ---- naively convex cocompact triangle ------------------------------------

/// Triangle scene: the projectivized positive orthant T carries the cyclic
/// group generated by h = diag(4, 1/2, 1/2), which fixes b1 and the line
/// (b2, b3) pointwise. The group preserves the segment C from b1 to an
/// interval on that line and acts cocompactly on it even though h^{-1} is
/// not proximal.
inline Scene triangle_scene() {
    Scene s;
    s.dim = 3;
    Vec b1 = {Rat(1), Rat(0), Rat(0)};
    Vec b2 = {Rat(0), Rat(1), Rat(0)};
    Vec b3 = {Rat(0), Rat(0), Rat(1)};
    Vec i0 = {Rat(0), Rat(1), Rat(3)};
    Vec i1 = {Rat(0), Rat(3), Rat(1)};
    RMat hm = RMat::identity(3);
    hm.at(0, 0) = 4;
    hm.at(1, 1) = Rat(1, 2);
    hm.at(2, 2) = Rat(1, 2);
    ProjMap h(hm);
    ConePolytope triangle = make_body({b1, b2, b3}, 3);
    ConePolytope interval = make_body({i0, i1}, 3);
    ConePolytope core = make_body({b1, i0, i1}, 3);

    auto flag = [](bool b) { return std::string(b ? "true" : "false"); };
    auto fixed = [&](const Vec& p) { return primitive(mat_apply(hm, p)) == primitive(p); };
    s.metadata["triangle_invariant"] = flag(apply(h, triangle) == triangle);
    s.metadata["core_invariant"] = flag(apply(h, core) == core);
    s.metadata["line_fixed_pointwise"] =
        flag(fixed(b2) && fixed(b3) && fixed(Vec{Rat(0), Rat(2), Rat(5)}));
    SpectralReport rep = spectral_report(mat_inverse(hm));
    s.metadata["inverse_proximal"] = flag(rep.proximal == Tri::True);

    s.bodies["T"] = triangle;
    s.bodies["I"] = interval;
    s.bodies["C"] = core;
    s.maps["h"] = h;

    s.gog.dim = 3;
    s.gog.base_vertex = "v";
    VertexGroupSpec v;
    v.kind = GroupKind::Cyclic;
    v.generator = h;
    v.body = triangle;
    v.cc_body = core;
    s.gog.vertices["v"] = v;
    validate_gog(s.gog);
    return s;
}

// ---- free product assembly -------------------------------------------------

/// One cyclic factor of the free product: the generator, its invariant chain
/// body, the chop/apex data used to re-tip the body, the placement map that
/// carries the re-tipped body over the central body, and confinement data.
struct CyclicFactorSpec {
    ProjMap generator;
    ConePolytope body;
    ProjHyp chop;
    ProjPoint apex;
    ProjMap placement;
    ConfinementSpec confinement;
};

struct FreeProductParams {
    CyclicFactorSpec factor0;
    CyclicFactorSpec factor1;
    ProjMap bridge;
    int power = 3;
    ConePolytope center;
};

/// Exchanging the two factors reverses the roles of the bridge's attracting
/// and repelling directions, so the bridge is inverted along with the swap.
inline FreeProductParams swap_factors(const FreeProductParams& p) {
    return FreeProductParams{p.factor1, p.factor0, p.bridge.inverse(), p.power, p.center};
}

/// Frozen default instance in dimension 3. The two generators are conjugates
/// of diag(9, 1, 1/9) and every constant below was found by bounded search
/// over rational candidates, then fixed once the whole scene certified.
inline FreeProductParams default_free_product_params() {
    auto v3 = [](const Rat& a, const Rat& b, const Rat& c) { return Vec{a, b, c}; };
    FreeProductParams p;

    RMat bridge = RMat::identity(3);
    bridge.at(0, 0) = 3;
    bridge.at(2, 2) = Rat(1, 3);
    p.bridge = ProjMap(bridge);
    p.power = 3;
    // pencil from the origin through (1, +-1) out to the ideal point [1:0:0]
    p.center = make_body({v3(0, 0, 1), v3(1, 1, 1), v3(1, -1, 1), v3(1, 0, 0)}, 3);

    RMat sig(3);
    sig.at(0, 2) = 1;
    sig.at(1, 1) = 1;
    sig.at(2, 0) = 1;
    ProjMap sigma(sig);

    RMat gen = RMat::identity(3);
    gen.at(0, 0) = 81;
    gen.at(1, 1) = 9;
    p.factor0.generator = ProjMap(gen);
    // chain on the parabola y^2 = x with a spike at (3, 2); the spike is the
    // pyramid that gets re-tipped
    std::vector<Vec> chain = {v3(0, 0, 1), v3(1, 0, 0), v3(3, 2, 1)};
    Rat x = Rat(1, 6561), y = Rat(1, 81);
    for (int k = -2; k <= 3; ++k) {
        chain.push_back(v3(x, y, 1));
        chain.push_back(v3(x, -y, 1));
        x *= 81;
        y *= 9;
    }
    p.factor0.body = make_body(chain, 3);
    p.factor0.chop = ProjHyp(v3(Rat(1, 4), -1, 1));
    p.factor0.apex = ProjPoint(v3(Rat(3079, 1000), Rat(959, 500), 1));
    // columns: the images of the three coordinate points; the second column
    // keeps both the ideal line and the plane x = 0 away from the chain body
    RMat g0(3);
    g0.at(0, 0) = 1550; g0.at(0, 1) = -1924; g0.at(0, 2) = 1400;
    g0.at(1, 0) = 1050; g0.at(1, 1) = -57;   g0.at(1, 2) = -750;
    g0.at(2, 0) = 500;  g0.at(2, 1) = 320;   g0.at(2, 2) = 500;
    p.factor0.placement = ProjMap(g0);

    ConfinementSpec cf;
    cf.u_plus = make_body({v3(100, 6, 1), v3(100, -6, 1), v3(100, 6, -1), v3(100, -6, -1)}, 3);
    cf.u_minus = make_body({v3(Rat(1, 4), Rat(1, 16), 1), v3(Rat(1, 4), Rat(-1, 16), 1),
                            v3(Rat(-1, 4), Rat(1, 16), 1), v3(Rat(-1, 4), Rat(-1, 16), 1)},
                           3);
    cf.window = 2;
    cf.inner_witness = v3(Rat(117, 40), 0, 1);
    cf.outer_witness = v3(Rat(61, 20), Rat(3, 2), 1);
    cf.escape_plus = v3(0, -1, 729);
    cf.escape_minus = v3(81, -1, 0);
    p.factor0.confinement = cf;

    // the second factor is the mirror image under the coordinate swap sigma
    p.factor1.generator = ProjMap(mat_mul(mat_mul(sig, gen), sig));
    p.factor1.body = apply(sigma, p.factor0.body);
    p.factor1.chop = ProjHyp(mat_apply(sig, p.factor0.chop.rep));
    p.factor1.apex = ProjPoint(mat_apply(sig, p.factor0.apex.rep));
    p.factor1.placement = ProjMap(mat_mul(mat_mul(sig, g0), sig));
    ConfinementSpec cf1;
    cf1.u_plus = apply(sigma, cf.u_plus);
    cf1.u_minus = apply(sigma, cf.u_minus);
    cf1.window = cf.window;
    cf1.inner_witness = mat_apply(sig, *cf.inner_witness);
    cf1.outer_witness = mat_apply(sig, *cf.outer_witness);
    cf1.escape_plus = mat_apply(sig, *cf.escape_plus);
    cf1.escape_minus = mat_apply(sig, *cf.escape_minus);
    p.factor1.confinement = cf1;
    return p;
}

/// Builds the three-vertex graph of groups of the free product together with
/// the scene bodies, without verifying any hypothesis. Throws AssemblyFailed
/// only if the pyramid replacement itself is ill-posed.
inline Scene build_free_product_scene(const FreeProductParams& p) {
    ConePolytope body0, body1;
    try {
        body0 = pyramid_replace(p.factor0.body, p.factor0.chop, p.factor0.apex,
                                {ProjMap(RMat::identity(3))});
        body1 = pyramid_replace(p.factor1.body, p.factor1.chop, p.factor1.apex,
                                {ProjMap(RMat::identity(3))});
    } catch (const std::exception& ex) {
        throw AssemblyFailed(std::string("pyramid replacement: ") + ex.what());
    }

    const RMat& beta = p.bridge.mat;
    RMat bn = mat_pow(beta, p.power);
    RMat bni = mat_pow(beta, -p.power);
    RMat e0 = mat_mul(bni, mat_inverse(p.factor0.placement.mat));
    RMat e1 = mat_mul(bn, mat_inverse(p.factor1.placement.mat));

    GraphOfGroups gog;
    gog.dim = 3;
    gog.base_vertex = "w";
    VertexGroupSpec w;
    w.kind = GroupKind::Finite;
    w.elements = {ProjMap(RMat::identity(3))};
    w.body = p.center;
    gog.vertices["w"] = w;
    VertexGroupSpec v0;
    v0.kind = GroupKind::Cyclic;
    v0.generator = p.factor0.generator;
    v0.confinement = p.factor0.confinement;
    v0.body = body0;
    gog.vertices["v0"] = v0;
    VertexGroupSpec v1;
    v1.kind = GroupKind::Cyclic;
    v1.generator = p.factor1.generator;
    v1.confinement = p.factor1.confinement;
    v1.body = body1;
    gog.vertices["v1"] = v1;
    auto add_edge = [&gog](const std::string& name, const std::string& target, const RMat& g) {
        OrientedEdge fwd;
        fwd.name = name;
        fwd.reverse_name = name + "_rev";
        fwd.origin = "w";
        fwd.target = target;
        fwd.g = ProjMap(g);
        gog.oriented_edges.push_back(fwd);
        OrientedEdge rev;
        rev.name = name + "_rev";
        rev.reverse_name = name;
        rev.origin = target;
        rev.target = "w";
        rev.g = ProjMap(mat_inverse(g));
        gog.oriented_edges.push_back(rev);
    };
    add_edge("e0", "v0", e0);
    add_edge("e1", "v1", e1);

    Scene s;
    s.dim = 3;
    s.gog = gog;
    s.bodies["center"] = p.center;
    s.bodies["factor0"] = body0;
    s.bodies["factor1"] = body1;
    s.bodies["wing0"] = apply(ProjMap(e0), body0);
    s.bodies["wing1"] = apply(ProjMap(e1), body1);
    s.maps["gamma0"] = p.factor0.generator;
    s.maps["gamma1"] = p.factor1.generator;
    s.maps["bridge"] = p.bridge;
    s.maps["g0"] = p.factor0.placement;
    s.maps["g1"] = p.factor1.placement;
    s.metadata["power"] = std::to_string(p.power);
    return s;
}

/// Builds the free product scene, then verifies every combination hypothesis
/// including the confinement certificates. Throws AssemblyFailed naming the
/// first failing sub-certificate.
inline Scene assemble_free_product_scene(const FreeProductParams& p) {
    Scene s = build_free_product_scene(p);
    try {
        validate_gog(s.gog);
    } catch (const std::exception& ex) {
        throw AssemblyFailed(std::string("graph validation: ") + ex.what());
    }
    CombinationReport rep;
    try {
        rep = verify_hypotheses(s.gog);
    } catch (const std::exception& ex) {
        throw AssemblyFailed(std::string("hypothesis verification: ") + ex.what());
    }
    if (!rep.holds) {
        std::string detail;
        for (const auto& hc : rep.hypothesis_checks) {
            if (hc.cert.verdict != OccultCertificate::Verdict::Holds) {
                detail = "occultation at vertex " + hc.vertex + ", edges (" + hc.edge_a + ", " +
                         hc.edge_c + "), element " + hc.gamma + ": " + hc.cert.failure_reason;
                break;
            }
        }
        if (detail.empty()) {
            for (const auto& [vname, cc] : rep.confinements) {
                if (!cc.holds) {
                    detail = "confinement at vertex " + vname;
                    break;
                }
            }
        }
        if (detail.empty()) detail = rep.failure;
        throw AssemblyFailed("hypothesis verification: " + detail);
    }
    if (!rep.certificate) throw AssemblyFailed("verification report is not a certificate");
    s.metadata["verified"] = "true";
    return s;
}

inline Scene assemble_free_product_scene() {
    return assemble_free_product_scene(default_free_product_params());
}

}  // namespace gallery
}  // namespace occultist
