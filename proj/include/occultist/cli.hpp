#pragma once

#include "occultist/gallery.hpp"
#include "occultist/graph_of_groups.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

namespace occultist {
namespace cli {

using json = nlohmann::json;

class ParseError : public std::runtime_error {
public:
    explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

class SchemaError : public std::runtime_error {
public:
    explicit SchemaError(const std::string& what) : std::runtime_error(what) {}
};

class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

class UnknownCommand : public std::runtime_error {
public:
    explicit UnknownCommand(const std::string& what) : std::runtime_error(what) {}
};

// ---- rational / vector / matrix (de)serialization ---------------------------
//
// Rationals travel as JSON integers when they fit in 64 bits and as strings
// "p/q" (or "p") otherwise. Parsing accepts both forms everywhere.

inline json rat_to_json(const Rat& r) {
    if (denominator(r) == 1) {
        const Int& n = numerator(r);
        if (n >= Int(std::numeric_limits<std::int64_t>::min()) &&
            n <= Int(std::numeric_limits<std::int64_t>::max()))
            return n.convert_to<std::int64_t>();
    }
    return rat_to_string(r);
}

inline Rat rat_from_json(const json& j, const std::string& path) {
    if (j.is_number_integer()) return Rat(j.get<std::int64_t>());
    if (j.is_string()) {
        try {
            return parse_rat(j.get<std::string>());
        } catch (const RationalParseError& ex) {
            throw SchemaError(path + ": " + ex.what());
        }
    }
    throw SchemaError(path + ": expected an integer or a rational string");
}

inline json vec_to_json(const Vec& v) {
    json a = json::array();
    for (const auto& x : v) a.push_back(rat_to_json(x));
    return a;
}

inline Vec vec_from_json(const json& j, const std::string& path) {
    if (!j.is_array()) throw SchemaError(path + ": expected an array of rationals");
    Vec v;
    for (std::size_t i = 0; i < j.size(); ++i)
        v.push_back(rat_from_json(j[i], path + "[" + std::to_string(i) + "]"));
    return v;
}

inline json mat_to_json(const RMat& m) {
    json rows = json::array();
    for (std::size_t i = 0; i < m.n; ++i) {
        json row = json::array();
        for (std::size_t k = 0; k < m.n; ++k) row.push_back(rat_to_json(m.at(i, k)));
        rows.push_back(row);
    }
    return rows;
}

inline RMat mat_from_json(const json& j, const std::string& path) {
    if (!j.is_array() || j.empty()) throw SchemaError(path + ": expected a square matrix");
    RMat m(j.size());
    for (std::size_t i = 0; i < j.size(); ++i) {
        Vec row = vec_from_json(j[i], path + "[" + std::to_string(i) + "]");
        if (row.size() != m.n) throw SchemaError(path + ": matrix rows have unequal lengths");
        for (std::size_t k = 0; k < m.n; ++k) m.at(i, k) = row[k];
    }
    return m;
}

inline ProjMap map_from_json(const json& j, const std::string& path) {
    try {
        return ProjMap(mat_from_json(j, path));
    } catch (const SchemaError&) {
        throw;
    } catch (const std::exception& ex) {
        throw ValidationError(path + ": " + ex.what());
    }
}

inline json body_to_json(const ConePolytope& b) {
    json gens = json::array();
    for (const auto& g : b.generators) gens.push_back(vec_to_json(g));
    return gens;
}

inline ConePolytope body_from_json(const json& j, std::size_t dim, const std::string& path) {
    if (!j.is_array()) throw SchemaError(path + ": expected an array of generators");
    std::vector<Vec> gens;
    for (std::size_t i = 0; i < j.size(); ++i) {
        Vec g = vec_from_json(j[i], path + "[" + std::to_string(i) + "]");
        if (g.size() != dim)
            throw SchemaError(path + ": generator length does not match ambient_dim");
        gens.push_back(std::move(g));
    }
    try {
        return make_body(gens, dim);
    } catch (const std::exception& ex) {
        throw ValidationError(path + ": " + ex.what());
    }
}

// ---- graph of groups (de)serialization --------------------------------------

inline std::string kind_to_string(GroupKind k) {
    switch (k) {
        case GroupKind::Finite: return "finite";
        case GroupKind::Cyclic: return "cyclic";
        default: return "bounded_words";
    }
}

inline GroupKind kind_from_string(const std::string& s, const std::string& path) {
    if (s == "finite") return GroupKind::Finite;
    if (s == "cyclic") return GroupKind::Cyclic;
    if (s == "bounded_words") return GroupKind::BoundedWords;
    throw SchemaError(path + ": unknown group kind \"" + s + "\"");
}

inline std::string edge_kind_to_string(EdgeGroupKind k) {
    switch (k) {
        case EdgeGroupKind::Trivial: return "trivial";
        case EdgeGroupKind::Finite: return "finite";
        default: return "cyclic";
    }
}

inline EdgeGroupKind edge_kind_from_string(const std::string& s, const std::string& path) {
    if (s == "trivial") return EdgeGroupKind::Trivial;
    if (s == "finite") return EdgeGroupKind::Finite;
    if (s == "cyclic") return EdgeGroupKind::Cyclic;
    throw SchemaError(path + ": unknown edge group kind \"" + s + "\"");
}

inline const json& field(const json& j, const std::string& key, const std::string& path) {
    if (!j.is_object() || !j.contains(key))
        throw SchemaError(path + ": missing field \"" + key + "\"");
    return j.at(key);
}

inline json confinement_to_json(const ConfinementSpec& c) {
    json j;
    j["u_plus"] = body_to_json(c.u_plus);
    j["u_minus"] = body_to_json(c.u_minus);
    j["window"] = c.window;
    if (c.inner_witness) j["inner_witness"] = vec_to_json(*c.inner_witness);
    if (c.outer_witness) j["outer_witness"] = vec_to_json(*c.outer_witness);
    if (c.escape_plus) j["escape_plus"] = vec_to_json(*c.escape_plus);
    if (c.escape_minus) j["escape_minus"] = vec_to_json(*c.escape_minus);
    return j;
}

inline ConfinementSpec confinement_from_json(const json& j, std::size_t dim,
                                             const std::string& path) {
    ConfinementSpec c;
    c.u_plus = body_from_json(field(j, "u_plus", path), dim, path + ".u_plus");
    c.u_minus = body_from_json(field(j, "u_minus", path), dim, path + ".u_minus");
    const json& w = field(j, "window", path);
    if (!w.is_number_integer()) throw SchemaError(path + ".window: expected an integer");
    c.window = w.get<int>();
    if (j.contains("inner_witness"))
        c.inner_witness = vec_from_json(j.at("inner_witness"), path + ".inner_witness");
    if (j.contains("outer_witness"))
        c.outer_witness = vec_from_json(j.at("outer_witness"), path + ".outer_witness");
    if (j.contains("escape_plus"))
        c.escape_plus = vec_from_json(j.at("escape_plus"), path + ".escape_plus");
    if (j.contains("escape_minus"))
        c.escape_minus = vec_from_json(j.at("escape_minus"), path + ".escape_minus");
    return c;
}

inline json vertex_to_json(const VertexGroupSpec& v) {
    json j;
    j["kind"] = kind_to_string(v.kind);
    j["body"] = body_to_json(v.body);
    if (v.cc_body) j["cc_body"] = body_to_json(*v.cc_body);
    switch (v.kind) {
        case GroupKind::Finite: {
            json els = json::array();
            for (const auto& e : v.elements) els.push_back(mat_to_json(e.mat));
            j["elements"] = els;
            break;
        }
        case GroupKind::Cyclic:
            j["generator"] = mat_to_json(v.generator.mat);
            if (v.confinement) j["confinement"] = confinement_to_json(*v.confinement);
            break;
        case GroupKind::BoundedWords: {
            json gens = json::array();
            for (const auto& g : v.generators) gens.push_back(mat_to_json(g.mat));
            j["generators"] = gens;
            j["max_word_length"] = v.max_word_length;
            break;
        }
    }
    return j;
}

inline VertexGroupSpec vertex_from_json(const json& j, std::size_t dim, const std::string& path) {
    VertexGroupSpec v;
    const json& k = field(j, "kind", path);
    if (!k.is_string()) throw SchemaError(path + ".kind: expected a string");
    v.kind = kind_from_string(k.get<std::string>(), path + ".kind");
    v.body = body_from_json(field(j, "body", path), dim, path + ".body");
    if (j.contains("cc_body"))
        v.cc_body = body_from_json(j.at("cc_body"), dim, path + ".cc_body");
    switch (v.kind) {
        case GroupKind::Finite: {
            const json& els = field(j, "elements", path);
            if (!els.is_array()) throw SchemaError(path + ".elements: expected an array");
            for (std::size_t i = 0; i < els.size(); ++i)
                v.elements.push_back(
                    map_from_json(els[i], path + ".elements[" + std::to_string(i) + "]"));
            break;
        }
        case GroupKind::Cyclic:
            v.generator = map_from_json(field(j, "generator", path), path + ".generator");
            if (j.contains("confinement"))
                v.confinement =
                    confinement_from_json(j.at("confinement"), dim, path + ".confinement");
            break;
        case GroupKind::BoundedWords: {
            const json& gens = field(j, "generators", path);
            if (!gens.is_array()) throw SchemaError(path + ".generators: expected an array");
            for (std::size_t i = 0; i < gens.size(); ++i)
                v.generators.push_back(
                    map_from_json(gens[i], path + ".generators[" + std::to_string(i) + "]"));
            const json& m = field(j, "max_word_length", path);
            if (!m.is_number_integer())
                throw SchemaError(path + ".max_word_length: expected an integer");
            v.max_word_length = m.get<int>();
            break;
        }
    }
    return v;
}

inline json edge_group_to_json(const EdgeGroupSpec& g) {
    json j;
    j["kind"] = edge_kind_to_string(g.kind);
    switch (g.kind) {
        case EdgeGroupKind::Trivial: break;
        case EdgeGroupKind::Finite: {
            json o = json::array(), t = json::array();
            for (const auto& e : g.origin_elements) o.push_back(mat_to_json(e.mat));
            for (const auto& e : g.target_elements) t.push_back(mat_to_json(e.mat));
            j["origin_elements"] = o;
            j["target_elements"] = t;
            break;
        }
        case EdgeGroupKind::Cyclic:
            j["origin_generator"] = mat_to_json(g.origin_generator.mat);
            j["target_generator"] = mat_to_json(g.target_generator.mat);
            j["exponent_cap"] = g.exponent_cap;
            break;
    }
    return j;
}

inline EdgeGroupSpec edge_group_from_json(const json& j, const std::string& path) {
    EdgeGroupSpec g;
    const json& k = field(j, "kind", path);
    if (!k.is_string()) throw SchemaError(path + ".kind: expected a string");
    g.kind = edge_kind_from_string(k.get<std::string>(), path + ".kind");
    switch (g.kind) {
        case EdgeGroupKind::Trivial: break;
        case EdgeGroupKind::Finite: {
            const json& o = field(j, "origin_elements", path);
            const json& t = field(j, "target_elements", path);
            if (!o.is_array() || !t.is_array())
                throw SchemaError(path + ": element lists must be arrays");
            for (std::size_t i = 0; i < o.size(); ++i)
                g.origin_elements.push_back(
                    map_from_json(o[i], path + ".origin_elements[" + std::to_string(i) + "]"));
            for (std::size_t i = 0; i < t.size(); ++i)
                g.target_elements.push_back(
                    map_from_json(t[i], path + ".target_elements[" + std::to_string(i) + "]"));
            break;
        }
        case EdgeGroupKind::Cyclic:
            g.origin_generator =
                map_from_json(field(j, "origin_generator", path), path + ".origin_generator");
            g.target_generator =
                map_from_json(field(j, "target_generator", path), path + ".target_generator");
            if (j.contains("exponent_cap")) {
                if (!j.at("exponent_cap").is_number_integer())
                    throw SchemaError(path + ".exponent_cap: expected an integer");
                g.exponent_cap = j.at("exponent_cap").get<int>();
            }
            break;
    }
    return g;
}

inline json gog_to_json(const GraphOfGroups& g) {
    json j;
    j["dim"] = g.dim;
    j["base_vertex"] = g.base_vertex;
    json verts;
    for (const auto& [name, v] : g.vertices) verts[name] = vertex_to_json(v);
    j["vertices"] = verts.is_null() ? json::object() : verts;
    json edges = json::array();
    for (const auto& e : g.oriented_edges) {
        json je;
        je["name"] = e.name;
        je["reverse_name"] = e.reverse_name;
        je["origin"] = e.origin;
        je["target"] = e.target;
        je["g"] = mat_to_json(e.g.mat);
        je["group"] = edge_group_to_json(e.group);
        edges.push_back(je);
    }
    j["edges"] = edges;
    return j;
}

inline GraphOfGroups gog_from_json(const json& j, std::size_t dim, const std::string& path) {
    GraphOfGroups g;
    g.dim = dim;
    const json& bv = field(j, "base_vertex", path);
    if (!bv.is_string()) throw SchemaError(path + ".base_vertex: expected a string");
    g.base_vertex = bv.get<std::string>();
    const json& verts = field(j, "vertices", path);
    if (!verts.is_object()) throw SchemaError(path + ".vertices: expected an object");
    for (const auto& [name, vj] : verts.items())
        g.vertices[name] = vertex_from_json(vj, dim, path + ".vertices." + name);
    const json& edges = field(j, "edges", path);
    if (!edges.is_array()) throw SchemaError(path + ".edges: expected an array");
    for (std::size_t i = 0; i < edges.size(); ++i) {
        const json& je = edges[i];
        std::string ep = path + ".edges[" + std::to_string(i) + "]";
        OrientedEdge e;
        auto str = [&](const char* key) {
            const json& f = field(je, key, ep);
            if (!f.is_string()) throw SchemaError(ep + "." + key + ": expected a string");
            return f.get<std::string>();
        };
        e.name = str("name");
        e.reverse_name = str("reverse_name");
        e.origin = str("origin");
        e.target = str("target");
        e.g = map_from_json(field(je, "g", ep), ep + ".g");
        if (je.contains("group")) e.group = edge_group_from_json(je.at("group"), ep + ".group");
        g.oriented_edges.push_back(std::move(e));
    }
    return g;
}

// ---- scene documents ---------------------------------------------------------

inline json serialize_scene(const Scene& s) {
    json j;
    j["version"] = 1;
    j["ambient_dim"] = s.dim;
    json bodies = json::object();
    for (const auto& [name, b] : s.bodies) bodies[name] = body_to_json(b);
    j["bodies"] = bodies;
    if (!s.approx_bodies.empty()) {
        json ab = json::object();
        for (const auto& [name, b] : s.approx_bodies) {
            json e;
            e["inner"] = body_to_json(b.inner);
            e["outer"] = body_to_json(b.outer);
            e["label"] = b.label;
            ab[name] = e;
        }
        j["approx_bodies"] = ab;
    }
    json maps = json::object();
    for (const auto& [name, m] : s.maps) maps[name] = mat_to_json(m.mat);
    j["maps"] = maps;
    if (!s.gog.vertices.empty()) j["graph_of_groups"] = gog_to_json(s.gog);
    json meta = json::object();
    for (const auto& [k, v] : s.metadata) meta[k] = v;
    j["metadata"] = meta;
    return j;
}

inline Scene parse_scene_json(const json& doc) {
    if (!doc.is_object()) throw SchemaError("$: document must be an object");
    const json& ver = field(doc, "version", "$");
    if (!ver.is_number_integer() || ver.get<int>() != 1)
        throw SchemaError("$.version: only version 1 is supported");
    const json& dim = field(doc, "ambient_dim", "$");
    if (!dim.is_number_integer() || dim.get<int>() < 1)
        throw SchemaError("$.ambient_dim: expected a positive integer");
    Scene s;
    s.dim = dim.get<std::size_t>();
    if (doc.contains("bodies")) {
        const json& bodies = doc.at("bodies");
        if (!bodies.is_object()) throw SchemaError("$.bodies: expected an object");
        for (const auto& [name, bj] : bodies.items())
            s.bodies[name] = body_from_json(bj, s.dim, "$.bodies." + name);
    }
    if (doc.contains("approx_bodies")) {
        const json& ab = doc.at("approx_bodies");
        if (!ab.is_object()) throw SchemaError("$.approx_bodies: expected an object");
        for (const auto& [name, bj] : ab.items()) {
            std::string p = "$.approx_bodies." + name;
            ApproxBody b;
            b.inner = body_from_json(field(bj, "inner", p), s.dim, p + ".inner");
            b.outer = body_from_json(field(bj, "outer", p), s.dim, p + ".outer");
            if (bj.contains("label")) b.label = bj.at("label").get<std::string>();
            s.approx_bodies[name] = b;
        }
    }
    if (doc.contains("maps")) {
        const json& maps = doc.at("maps");
        if (!maps.is_object()) throw SchemaError("$.maps: expected an object");
        for (const auto& [name, mj] : maps.items()) {
            RMat m = mat_from_json(mj, "$.maps." + name);
            if (m.n != s.dim)
                throw SchemaError("$.maps." + name + ": size does not match ambient_dim");
            s.maps[name] = map_from_json(mj, "$.maps." + name);
        }
    }
    if (doc.contains("graph_of_groups") && !doc.at("graph_of_groups").is_null()) {
        s.gog = gog_from_json(doc.at("graph_of_groups"), s.dim, "$.graph_of_groups");
        try {
            validate_gog(s.gog);
        } catch (const std::exception& ex) {
            throw ValidationError(std::string("$.graph_of_groups: ") + ex.what());
        }
    }
    if (doc.contains("metadata")) {
        const json& meta = doc.at("metadata");
        if (!meta.is_object()) throw SchemaError("$.metadata: expected an object");
        for (const auto& [k, v] : meta.items()) {
            if (!v.is_string()) throw SchemaError("$.metadata." + k + ": expected a string");
            s.metadata[k] = v.get<std::string>();
        }
    }
    return s;
}

inline Scene parse_scene(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open scene file " + path);
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& ex) {
        throw ParseError(path + ": " + ex.what());
    }
    return parse_scene_json(doc);
}

// ---- report emission ---------------------------------------------------------

inline void render_text(const json& j, const std::string& indent, std::ostream& os) {
    if (j.is_object()) {
        for (const auto& [k, v] : j.items()) {
            if (v.is_object() || v.is_array()) {
                os << indent << k << ":\n";
                render_text(v, indent + "  ", os);
            } else {
                os << indent << k << ": " << (v.is_string() ? v.get<std::string>() : v.dump())
                   << "\n";
            }
        }
    } else if (j.is_array()) {
        for (const auto& v : j) {
            if (v.is_object() || v.is_array()) {
                os << indent << "-\n";
                render_text(v, indent + "  ", os);
            } else {
                os << indent << "- "
                   << (v.is_string() ? v.get<std::string>() : v.dump()) << "\n";
            }
        }
    } else {
        os << indent << (j.is_string() ? j.get<std::string>() : j.dump()) << "\n";
    }
}

/// Serializes a report. Reports always carry "report_version": 1.
inline std::string emit_report(json report, const std::string& format) {
    if (!report.is_object()) report = json::object();
    report["report_version"] = 1;
    if (format == "json") return report.dump(2) + "\n";
    std::ostringstream os;
    render_text(report, "", os);
    return os.str();
}

inline json occult_cert_json(const OccultCertificate& c) {
    json j;
    j["verdict"] = c.verdict == OccultCertificate::Verdict::Holds ? "Holds" : "Fails";
    j["mode"] = c.mode == OccultMode::Full ? "full" : "weak";
    j["o1_ok"] = c.o1_ok;
    j["o2_ok"] = c.o2_ok;
    if (!c.failure_reason.empty()) j["failure_reason"] = c.failure_reason;
    j["o3_subproblems"] = c.o3_subproblems.size();
    if (c.counterexample_hyperplane)
        j["counterexample_hyperplane"] = vec_to_json(c.counterexample_hyperplane->rep);
    return j;
}

inline json combination_report_json(const CombinationReport& rep) {
    json j;
    j["verdict"] = rep.holds ? "Holds" : "Fails";
    j["certificate"] = rep.certificate;
    if (!rep.failure.empty()) j["failure"] = rep.failure;
    json checks = json::array();
    for (const auto& hc : rep.hypothesis_checks) {
        json c;
        c["vertex"] = hc.vertex;
        c["edge_a"] = hc.edge_a;
        c["edge_c"] = hc.edge_c;
        c["gamma"] = hc.gamma;
        c["certificate"] = occult_cert_json(hc.cert);
        checks.push_back(c);
    }
    j["hypothesis_checks"] = checks;
    json confs = json::array();
    for (const auto& [name, cc] : rep.confinements) {
        json c;
        c["vertex"] = name;
        c["window"] = cc.n;
        c["holds"] = cc.holds;
        c["nesting_checks"] = cc.nesting_checks;
        c["target_checks"] = cc.target_checks;
        json amb = json::array();
        for (const auto& a : cc.ambient_checks) amb.push_back(occult_cert_json(a));
        c["ambient_checks"] = amb;
        confs.push_back(c);
    }
    j["confinements"] = confs;
    json inv = json::object();
    for (const auto& [k, v] : rep.body_invariance) inv[k] = v;
    j["body_invariance"] = inv;
    return j;
}

// ---- commands ------------------------------------------------------------------

struct CmdResult {
    json report;
    int exit_code = 0;
};

inline const ConePolytope& named_body(const Scene& s, const std::string& name) {
    auto it = s.bodies.find(name);
    if (it == s.bodies.end()) throw SchemaError("scene has no body named \"" + name + "\"");
    return it->second;
}

inline CmdResult cmd_occult_check(const Scene& s, const std::string& a, const std::string& b,
                                  const std::string& c, bool weak) {
    auto cert = occultation_check(named_body(s, a), named_body(s, b), named_body(s, c),
                                  weak ? OccultMode::Weak : OccultMode::Full);
    CmdResult r;
    r.report["command"] = "occult check";
    r.report["bodies"] = json::array({a, b, c});
    r.report["certificate"] = occult_cert_json(cert);
    r.report["verdict"] = cert.verdict == OccultCertificate::Verdict::Holds ? "Holds" : "Fails";
    r.exit_code = cert.verdict == OccultCertificate::Verdict::Holds ? 0 : 1;
    return r;
}

inline CmdResult cmd_tree_build(const Scene& s, std::size_t depth) {
    if (s.gog.vertices.empty()) throw ValidationError("scene has no graph of groups");
    auto t = expand_tree(s.gog, depth);
    CmdResult r;
    r.report["command"] = "tree build";
    r.report["depth"] = t.depth;
    r.report["windowed"] = t.windowed;
    json nodes = json::array();
    for (const auto& n : t.nodes) {
        json nj;
        nj["word"] = n.word;
        nj["vertex"] = n.vertex;
        nj["depth"] = n.depth;
        nj["parent"] = n.parent;
        if (!n.incoming_edge.empty()) nj["incoming_edge"] = n.incoming_edge;
        nodes.push_back(nj);
    }
    r.report["nodes"] = nodes;
    json edges = json::array();
    for (const auto& [x, y] : t.edges) edges.push_back(json::array({x, y}));
    r.report["edges"] = edges;
    try {
        auto conc = verify_tree_conclusions(t);
        r.report["conclusions"] = {{"node_pairs", conc.node_pairs},
                                   {"edge_pairs", conc.edge_pairs},
                                   {"common_chart", conc.common_chart},
                                   {"verdict", "Holds"}};
        r.exit_code = 0;
    } catch (const ConclusionViolated& ex) {
        r.report["conclusions"] = {{"verdict", "Fails"}, {"violation", ex.what()}};
        r.exit_code = 1;
    }
    return r;
}

inline CmdResult cmd_combine_verify(const Scene& s, bool cc) {
    if (s.gog.vertices.empty()) throw ValidationError("scene has no graph of groups");
    CmdResult r;
    r.report["command"] = cc ? "combine verify --cc" : "combine verify";
    if (cc) {
        auto rep = cc_hypothesis_check(s.gog);
        r.report["omega_report"] = combination_report_json(rep.omega_report);
        r.report["interior_report"] = combination_report_json(rep.interior_report);
        json faces = json::array();
        for (const auto& f : rep.faces)
            faces.push_back(
                {{"vertex", f.vertex}, {"facet", vec_to_json(f.facet)}, {"kind", f.kind}});
        r.report["faces"] = faces;
        r.report["bisaturated"] = rep.bisaturated;
        r.report["strict_convexity"] = rep.strict_convexity;
        r.report["verdict"] = rep.holds ? "Holds" : "Fails";
        bool certificate =
            rep.omega_report.certificate && rep.interior_report.certificate;
        r.exit_code = !rep.holds ? 1 : (certificate ? 0 : 2);
    } else {
        auto rep = verify_hypotheses(s.gog);
        r.report = combination_report_json(rep);
        r.report["command"] = "combine verify";
        auto it = s.metadata.find("power");
        if (it != s.metadata.end()) r.report["power"] = it->second;
        r.exit_code = !rep.holds ? 1 : (rep.certificate ? 0 : 2);
    }
    return r;
}

inline Vec parse_point_arg(const std::string& arg, std::size_t dim, const std::string& what) {
    Vec v;
    std::string tok;
    std::istringstream in(arg);
    while (std::getline(in, tok, ',')) {
        try {
            v.push_back(parse_rat(tok));
        } catch (const RationalParseError& ex) {
            throw SchemaError(what + ": " + ex.what());
        }
    }
    if (v.size() != dim)
        throw SchemaError(what + ": expected " + std::to_string(dim) +
                          " comma-separated rationals");
    return v;
}

inline CmdResult cmd_hilbert(const Scene& s, const std::string& body, const std::string& xs,
                             const std::string& ys) {
    const ConePolytope& b = named_body(s, body);
    Vec x = parse_point_arg(xs, s.dim, "X");
    Vec y = parse_point_arg(ys, s.dim, "Y");
    auto [cross, dist] = hilbert_distance(b, ProjPoint(x), ProjPoint(y));
    CmdResult r;
    r.report["command"] = "hilbert dist";
    r.report["body"] = body;
    r.report["cross_ratio"] = rat_to_string(cross);
    r.report["distance"] = dist;
    return r;
}

inline CmdResult cmd_diverge(const Scene& s, std::size_t max_len) {
    if (s.gog.vertices.empty()) throw ValidationError("scene has no graph of groups");
    auto rep = divergence_report(s.gog, max_len);
    CmdResult r;
    r.report["command"] = "diverge";
    json rows = json::array();
    for (const auto& row : rep.rows)
        rows.push_back({{"length", row.length},
                        {"min_log_ratio", row.min_log_ratio},
                        {"min_identity_dist", row.min_identity_dist},
                        {"words", row.words}});
    r.report["rows"] = rows;
    r.report["identity_collision"] = rep.identity_collision;
    r.report["words_enumerated"] = rep.words_enumerated;
    return r;
}

inline CmdResult cmd_example(const std::string& name, const std::string& emit_path) {
    CmdResult r;
    r.report["command"] = "example run";
    r.report["name"] = name;
    Scene scene;
    bool pass = true;
    if (name == "triangle") {
        scene = gallery::triangle_scene();
        json flags = json::object();
        for (const auto& [k, v] : scene.metadata) flags[k] = v;
        r.report["flags"] = flags;
        pass = scene.metadata.at("triangle_invariant") == "true" &&
               scene.metadata.at("core_invariant") == "true" &&
               scene.metadata.at("line_fixed_pointwise") == "true" &&
               scene.metadata.at("inverse_proximal") == "false";
        auto [cross, dist] = hilbert_distance(
            scene.bodies.at("T"), ProjPoint(Vec{1, 1, 1}),
            ProjPoint(Vec{4, Rat(1, 2), Rat(1, 2)}));
        r.report["hilbert_cross_ratio"] = rat_to_string(cross);
        r.report["hilbert_distance"] = dist;
        pass = pass && cross == 8;
    } else if (name == "pd-cone") {
        scene.dim = gallery::sym_dim(2);
        auto body = gallery::pd_cone_body(2, 8);
        scene.approx_bodies["pd2"] = body;
        Vec id = gallery::sym_to_coords(RMat::identity(2));
        bool inner_ok = true, outer_ok = true;
        for (const auto& f : body.inner.facets())
            if (dot(f, id) <= 0) inner_ok = false;
        for (const auto& f : body.outer.facets())
            if (dot(f, id) <= 0) outer_ok = false;
        r.report["identity_strictly_inside_inner"] = inner_ok;
        r.report["identity_strictly_inside_outer"] = outer_ok;
        auto thick = gallery::thickened_pd_body(2, 16);
        Vec half = id, two = id;
        half.push_back(Rat(1, 2));
        two.push_back(Rat(2));
        bool half_in = gallery::thickened_membership(half, 2);
        bool two_out = !gallery::thickened_membership(two, 2);
        r.report["thickened_half_inside"] = half_in;
        r.report["thickened_two_outside"] = two_out;
        scene.metadata["label"] = body.label;
        pass = inner_ok && outer_ok && half_in && two_out;
    } else if (name == "soifer") {
        auto flag = gallery::soifer_transversality(3, 6);
        scene.dim = 3;
        scene.metadata["margin"] = rat_to_string(flag.margin);
        scene.metadata["hyperplane"] = [&] {
            std::string s;
            for (std::size_t i = 0; i < flag.X.rep.size(); ++i) {
                if (i) s += ",";
                s += rat_to_string(flag.X.rep[i]);
            }
            return s;
        }();
        r.report["margin"] = rat_to_string(flag.margin);
        r.report["point"] = vec_to_json(flag.x.rep);
        r.report["hyperplane"] = vec_to_json(flag.X.rep);
        r.report["incident"] = dot(flag.X.rep, flag.x.rep) == 0;
        pass = flag.margin > 0;
    } else if (name == "free-product") {
        try {
            scene = gallery::assemble_free_product_scene();
            r.report["verdict"] = "Holds";
            r.report["power"] = scene.metadata.at("power");
        } catch (const AssemblyFailed& ex) {
            r.report["verdict"] = "Fails";
            r.report["failure"] = ex.what();
            pass = false;
        }
    } else {
        throw UnknownCommand("unknown example \"" + name + "\"");
    }
    r.report["pass"] = pass;
    r.exit_code = pass ? 0 : 1;
    if (!emit_path.empty()) {
        std::ofstream out(emit_path);
        if (!out) throw ParseError("cannot write scene file " + emit_path);
        out << serialize_scene(scene).dump(2) << "\n";
        r.report["emitted"] = emit_path;
    }
    return r;
}

// ---- plotting -----------------------------------------------------------------

namespace detail {

inline std::string fmt(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", x);
    return buf;
}

struct ChartPolygon {
    std::string name;
    std::vector<std::pair<double, double>> pts;  // convex, ordered by angle
};

struct ChartSegment {
    std::string name;
    std::pair<double, double> a, b;
};

/// Projects a body's generators into the affine chart {x : <chart, x> = 1},
/// dropping the coordinate where |chart| is largest. Generators with
/// non-positive pairing are clipped. Returns false when nothing survives.
inline bool chart_polygon(const ConePolytope& body, const Vec& chart, const std::string& name,
                          ChartPolygon& out, bool& clipped) {
    std::size_t drop = 0;
    Rat best = abs(chart[0]);
    for (std::size_t i = 1; i < chart.size(); ++i)
        if (abs(chart[i]) > best) { best = abs(chart[i]); drop = i; }
    out.name = name;
    out.pts.clear();
    for (const auto& g : body.generators) {
        Rat s = dot(chart, g);
        if (s <= 0) { clipped = true; continue; }
        std::vector<double> coords;
        for (std::size_t i = 0; i < g.size(); ++i)
            if (i != drop) coords.push_back(Rat(g[i] / s).convert_to<double>());
        out.pts.emplace_back(coords[0], coords[1]);
    }
    if (out.pts.empty()) return false;
    double cx = 0, cy = 0;
    for (auto [x, y] : out.pts) { cx += x; cy += y; }
    cx /= double(out.pts.size());
    cy /= double(out.pts.size());
    std::sort(out.pts.begin(), out.pts.end(), [&](const auto& p, const auto& q) {
        double ap = std::atan2(p.second - cy, p.first - cx);
        double aq = std::atan2(q.second - cy, q.first - cx);
        if (ap != aq) return ap < aq;
        return p < q;
    });
    return true;
}

inline std::pair<double, double> centroid(const ChartPolygon& p) {
    double cx = 0, cy = 0;
    for (auto [x, y] : p.pts) { cx += x; cy += y; }
    return {cx / double(p.pts.size()), cy / double(p.pts.size())};
}

inline std::string render_svg(const std::vector<ChartPolygon>& polys,
                              const std::vector<ChartSegment>& segs) {
    double x0 = 0, x1 = 1, y0 = 0, y1 = 1;
    bool first = true;
    auto grow = [&](double x, double y) {
        if (first) { x0 = x1 = x; y0 = y1 = y; first = false; return; }
        x0 = std::min(x0, x); x1 = std::max(x1, x);
        y0 = std::min(y0, y); y1 = std::max(y1, y);
    };
    for (const auto& p : polys)
        for (auto [x, y] : p.pts) grow(x, y);
    for (const auto& s : segs) { grow(s.a.first, s.a.second); grow(s.b.first, s.b.second); }
    double pad = 0.05 * std::max(x1 - x0, y1 - y0) + 0.05;
    x0 -= pad; x1 += pad; y0 -= pad; y1 += pad;
    // SVG's y axis points down; flip about the box midline
    auto fy = [&](double y) { return y0 + y1 - y; };
    std::ostringstream os;
    os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
       << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" viewBox=\"" << fmt(x0)
       << " " << fmt(y0) << " " << fmt(x1 - x0) << " " << fmt(y1 - y0)
       << "\" width=\"640\" height=\"480\">\n";
    for (const auto& p : polys) {
        os << "  <polygon id=\"" << p.name << "\" fill=\"none\" stroke=\"black\" stroke-width=\""
           << fmt((x1 - x0) / 400.0) << "\" points=\"";
        for (std::size_t i = 0; i < p.pts.size(); ++i) {
            if (i) os << " ";
            os << fmt(p.pts[i].first) << "," << fmt(fy(p.pts[i].second));
        }
        os << "\"/>\n";
    }
    for (const auto& s : segs)
        os << "  <line id=\"" << s.name << "\" stroke=\"gray\" stroke-width=\""
           << fmt((x1 - x0) / 800.0) << "\" x1=\"" << fmt(s.a.first) << "\" y1=\""
           << fmt(fy(s.a.second)) << "\" x2=\"" << fmt(s.b.first) << "\" y2=\""
           << fmt(fy(s.b.second)) << "\"/>\n";
    os << "</svg>\n";
    return os.str();
}

inline std::string render_csv(const std::vector<ChartPolygon>& polys,
                              const std::vector<ChartSegment>& segs) {
    std::ostringstream os;
    os << "name,x,y,kind\n";
    for (const auto& p : polys)
        for (auto [x, y] : p.pts)
            os << p.name << "," << fmt(x) << "," << fmt(y) << ",vertex\n";
    for (const auto& s : segs) {
        os << s.name << "," << fmt(s.a.first) << "," << fmt(s.a.second) << ",edge\n";
        os << s.name << "," << fmt(s.b.first) << "," << fmt(s.b.second) << ",edge\n";
    }
    return os.str();
}

}  // namespace detail

/// Plots the scene's named bodies, or (with depth >= 0) the bodies of a tree
/// truncation with its adjacency segments, into an SVG or CSV file. Bodies not
/// contained in the chart half-space are clipped with a warning.
inline CmdResult cmd_plot(const Scene& s, const std::string& chart_arg, const std::string& out,
                          long depth, std::ostream& warn) {
    if (s.dim != 3)
        throw ValidationError("plotting requires ambient dimension 3 (a 2-D chart)");
    Vec chart = parse_point_arg(chart_arg, s.dim, "--chart");
    std::vector<detail::ChartPolygon> polys;
    std::vector<detail::ChartSegment> segs;
    json warnings = json::array();
    auto add_body = [&](const ConePolytope& b, const std::string& name) -> bool {
        detail::ChartPolygon p;
        bool clipped = false;
        bool any = detail::chart_polygon(b, chart, name, p, clipped);
        if (clipped) {
            std::string msg = "body " + name + (any ? " clipped by the chart"
                                                    : " lies entirely outside the chart");
            warn << "warning: " << msg << "\n";
            warnings.push_back(msg);
        }
        if (any) polys.push_back(std::move(p));
        return any;
    };
    if (depth >= 0) {
        if (s.gog.vertices.empty()) throw ValidationError("scene has no graph of groups");
        auto t = expand_tree(s.gog, std::size_t(depth));
        std::vector<std::ptrdiff_t> poly_of(t.nodes.size(), -1);
        for (std::size_t i = 0; i < t.nodes.size(); ++i)
            if (add_body(t.nodes[i].body, t.nodes[i].word))
                poly_of[i] = std::ptrdiff_t(polys.size()) - 1;
        for (const auto& [a, b] : t.edges) {
            if (poly_of[a] < 0 || poly_of[b] < 0) continue;
            detail::ChartSegment seg;
            seg.name = t.nodes[a].word + "--" + t.nodes[b].word;
            seg.a = detail::centroid(polys[std::size_t(poly_of[a])]);
            seg.b = detail::centroid(polys[std::size_t(poly_of[b])]);
            segs.push_back(std::move(seg));
        }
    } else {
        for (const auto& [name, b] : s.bodies) add_body(b, name);
    }
    bool svg = out.size() >= 4 && out.substr(out.size() - 4) == ".svg";
    bool csv = out.size() >= 4 && out.substr(out.size() - 4) == ".csv";
    if (!svg && !csv) throw SchemaError("--out must end in .svg or .csv");
    std::ofstream f(out, std::ios::binary);
    if (!f) throw ParseError("cannot write " + out);
    f << (svg ? detail::render_svg(polys, segs) : detail::render_csv(polys, segs));
    CmdResult r;
    r.report["command"] = "plot emit";
    r.report["out"] = out;
    r.report["polygons"] = polys.size();
    r.report["segments"] = segs.size();
    r.report["warnings"] = warnings;
    return r;
}

// ---- entry point ----------------------------------------------------------------

inline int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"exact occultation-position toolkit"};
    app.require_subcommand(1);
    app.fallthrough();
    std::string scene_path, format = "text";
    app.add_option("--scene", scene_path, "scene JSON file");
    app.add_option("--format", format, "report format")
        ->check(CLI::IsMember({"json", "text"}));

    auto* occ = app.add_subcommand("occult", "occultation predicates");
    auto* occ_check = occ->add_subcommand("check", "check a triple of named bodies");
    std::vector<std::string> triple;
    bool weak = false;
    occ_check->add_option("bodies", triple, "names A B C")->expected(3);
    occ_check->add_flag("--weak", weak, "weak mode");

    auto* tree = app.add_subcommand("tree", "covering tree truncations");
    auto* tree_build = tree->add_subcommand("build", "expand and check a truncation");
    std::size_t depth = 1;
    tree_build->add_option("--depth", depth, "truncation depth")->required();

    auto* combine = app.add_subcommand("combine", "combination theorem hypotheses");
    auto* combine_verify = combine->add_subcommand("verify", "verify all hypotheses");
    bool cc = false;
    combine_verify->add_flag("--cc", cc, "also check convex cocompactness data");

    auto* hil = app.add_subcommand("hilbert", "Hilbert metric");
    auto* hil_dist = hil->add_subcommand("dist", "distance between two interior points");
    std::string hil_body, hil_x, hil_y;
    hil_dist->add_option("body", hil_body, "body name")->required();
    hil_dist->add_option("x", hil_x, "point, comma-separated rationals")->required();
    hil_dist->add_option("y", hil_y, "point, comma-separated rationals")->required();

    auto* diverge = app.add_subcommand("diverge", "divergence diagnostics");
    std::size_t max_len = 3;
    diverge->add_option("--max-len", max_len, "maximum normal-form length")->required();

    auto* example = app.add_subcommand("example", "built-in example scenes");
    auto* example_run = example->add_subcommand("run", "build and check one example");
    std::string example_name, emit_path;
    example_run->add_option("name", example_name, "triangle | pd-cone | soifer | free-product")
        ->required();
    example_run->add_option("--emit", emit_path, "also write the scene to this file");

    auto* plot = app.add_subcommand("plot", "chart plots");
    auto* plot_emit = plot->add_subcommand("emit", "write an SVG or CSV plot");
    std::string chart, plot_out;
    long plot_depth = -1;
    plot_emit->add_option("--chart", chart, "chart covector, comma-separated rationals")
        ->required();
    plot_emit->add_option("--out", plot_out, "output file (.svg or .csv)")->required();
    plot_emit->add_option("--depth", plot_depth, "plot a tree truncation of this depth");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e, out, err);
        return code == 0 ? 0 : 2;
    }

    try {
        auto scene = [&]() -> Scene {
            if (scene_path.empty()) throw ParseError("this command requires --scene FILE");
            return parse_scene(scene_path);
        };
        CmdResult res;
        if (occ_check->parsed())
            res = cmd_occult_check(scene(), triple[0], triple[1], triple[2], weak);
        else if (tree_build->parsed())
            res = cmd_tree_build(scene(), depth);
        else if (combine_verify->parsed())
            res = cmd_combine_verify(scene(), cc);
        else if (hil_dist->parsed())
            res = cmd_hilbert(scene(), hil_body, hil_x, hil_y);
        else if (diverge->parsed())
            res = cmd_diverge(scene(), max_len);
        else if (example_run->parsed())
            res = cmd_example(example_name, emit_path);
        else if (plot_emit->parsed())
            res = cmd_plot(scene(), chart, plot_out, plot_depth, err);
        else
            throw UnknownCommand("no command given; see --help");
        out << emit_report(res.report, format);
        return res.exit_code;
    } catch (const std::exception& ex) {
        err << "error: " << ex.what() << "\n";
        return 2;
    }
}

}  // namespace cli
}  // namespace occultist
