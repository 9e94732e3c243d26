#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "occultist/cli.hpp"

using namespace occultist;
using cli::json;

namespace {

std::string fixture(const std::string& name) {
    return std::string(OCCULTIST_FIXTURE_DIR) + "/v1/" + name;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

std::string temp_file(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

struct CliRun {
    int code;
    std::string out;
    std::string err;
};

CliRun run(std::vector<std::string> args) {
    args.insert(args.begin(), "occultist");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    int code = cli::run_cli(int(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

}  // namespace

TEST_CASE("rationals serialize as integers or p/q strings") {
    CHECK(cli::rat_to_json(Rat(5)) == json(5));
    CHECK(cli::rat_to_json(Rat(-3)) == json(-3));
    CHECK(cli::rat_to_json(Rat(1, 3)) == json("1/3"));
    CHECK(cli::rat_to_json(Rat(-7, 2)) == json("-7/2"));
    // wider than 64 bits must fall back to the string form
    Rat big("123456789012345678901234567890");
    json bj = cli::rat_to_json(big);
    CHECK(bj.is_string());
    CHECK(cli::rat_from_json(bj, "$") == big);

    CHECK(cli::rat_from_json(json(7), "$") == Rat(7));
    CHECK(cli::rat_from_json(json("22/7"), "$") == Rat(22, 7));
    CHECK_THROWS_AS(cli::rat_from_json(json("1/0"), "$"), cli::SchemaError);
    CHECK_THROWS_AS(cli::rat_from_json(json(1.5), "$"), cli::SchemaError);
    CHECK_THROWS_AS(cli::rat_from_json(json("abc"), "$"), cli::SchemaError);
}

TEST_CASE("a minimal scene document parses") {
    json doc = {{"version", 1},
                {"ambient_dim", 3},
                {"bodies", {{"A", {{1, 0, 1}, {0, 1, 1}, {0, 0, 1}}}}}};
    Scene s = cli::parse_scene_json(doc);
    CHECK(s.dim == 3);
    REQUIRE(s.bodies.count("A") == 1);
    CHECK(s.maps.empty());
    CHECK(s.gog.vertices.empty());
}

TEST_CASE("schema errors carry a JSON path") {
    json doc = {{"version", 1},
                {"ambient_dim", 3},
                {"bodies", {{"A", {{"1/0", 0, 1}, {0, 1, 1}, {1, 0, 1}}}}}};
    try {
        cli::parse_scene_json(doc);
        FAIL("expected SchemaError");
    } catch (const cli::SchemaError& ex) {
        CHECK(std::string(ex.what()).find("$.bodies.A[0][0]") != std::string::npos);
    }

    CHECK_THROWS_AS(cli::parse_scene_json(json{{"ambient_dim", 3}}), cli::SchemaError);
    CHECK_THROWS_AS(cli::parse_scene_json(json{{"version", 2}, {"ambient_dim", 3}}),
                    cli::SchemaError);
    CHECK_THROWS_AS(cli::parse_scene_json(json::array()), cli::SchemaError);

    // a singular matrix is rejected when building the map
    json bad_map = {{"version", 1},
                    {"ambient_dim", 2},
                    {"maps", {{"m", {{1, 1}, {1, 1}}}}}};
    CHECK_THROWS_AS(cli::parse_scene_json(bad_map), cli::ValidationError);
}

TEST_CASE("file level errors are ParseError") {
    CHECK_THROWS_AS(cli::parse_scene("/nonexistent/scene.json"), cli::ParseError);
    std::string path = temp_file("occ_cli_bad.json");
    { std::ofstream(path) << "{ not json"; }
    CHECK_THROWS_AS(cli::parse_scene(path), cli::ParseError);
    std::remove(path.c_str());
}

TEST_CASE("a broken graph of groups is a ValidationError") {
    json doc = json::parse(slurp(fixture("triangle.json")));
    doc["graph_of_groups"]["base_vertex"] = "nope";
    CHECK_THROWS_AS(cli::parse_scene_json(doc), cli::ValidationError);
}

TEST_CASE("the triangle fixture round-trips and matches the built-in scene") {
    std::string raw = slurp(fixture("triangle.json"));
    Scene s = cli::parse_scene(fixture("triangle.json"));

    // serializing the parsed scene reproduces the file byte for byte
    CHECK(cli::serialize_scene(s).dump(2) + "\n" == raw);

    // and the file agrees with the scene the gallery builds
    Scene t = gallery::triangle_scene();
    CHECK(cli::serialize_scene(t).dump(2) + "\n" == raw);

    REQUIRE(s.bodies.count("T") == 1);
    REQUIRE(s.maps.count("h") == 1);
    REQUIRE(s.gog.vertices.count("v") == 1);
    CHECK(s.gog.vertices.at("v").kind == GroupKind::Cyclic);
    CHECK(relate(s.bodies.at("T"), t.bodies.at("T")) == Relation::Equal);
    CHECK(s.metadata.at("triangle_invariant") == "true");
}

TEST_CASE("the free product fixture round-trips through the parser") {
    std::string raw = slurp(fixture("free_product.json"));
    Scene s = cli::parse_scene(fixture("free_product.json"));
    CHECK(cli::serialize_scene(s).dump(2) + "\n" == raw);
    CHECK(s.gog.vertices.size() == 3);
    CHECK(s.gog.oriented_edges.size() == 4);
    CHECK(s.metadata.at("power") == "3");
}

TEST_CASE("emit_report stamps the version and renders both formats") {
    std::string js = cli::emit_report(json::object(), "json");
    CHECK(js == "{\n  \"report_version\": 1\n}\n");
    json report = {{"verdict", "Holds"}, {"nested", {{"k", 3}}}};
    std::string txt = cli::emit_report(report, "text");
    CHECK(txt.find("report_version: 1") != std::string::npos);
    CHECK(txt.find("verdict: Holds") != std::string::npos);
    CHECK(txt.find("k: 3") != std::string::npos);
}

TEST_CASE("occult check maps verdicts to exit codes") {
    std::string scene = fixture("three_boxes.json");

    auto holds = run({"--scene", scene, "--format", "json", "occult", "check", "A", "B", "C"});
    CHECK(holds.code == 0);
    json jr = json::parse(holds.out);
    CHECK(jr["verdict"] == "Holds");
    CHECK(jr["report_version"] == 1);

    auto fails = run({"--scene", scene, "--format", "json",
                      "occult", "check", "A", "B_small", "C"});
    CHECK(fails.code == 1);
    json jf = json::parse(fails.out);
    CHECK(jf["verdict"] == "Fails");
    CHECK(jf["certificate"].contains("counterexample_hyperplane"));

    auto missing = run({"--scene", scene, "occult", "check", "A", "nosuch", "C"});
    CHECK(missing.code == 2);
    CHECK(missing.err.find("error:") != std::string::npos);

    auto no_scene = run({"occult", "check", "A", "B", "C"});
    CHECK(no_scene.code == 2);
}

TEST_CASE("hilbert dist reports the exact cross ratio") {
    auto r = run({"--scene", fixture("triangle.json"), "--format", "json",
                  "hilbert", "dist", "T", "1,1,1", "4,1/2,1/2"});
    REQUIRE(r.code == 0);
    json j = json::parse(r.out);
    CHECK(j["cross_ratio"] == "8");
    CHECK(j["distance"].get<double>() == Catch::Approx(0.5 * std::log(8.0)).epsilon(1e-12));

    auto bad = run({"--scene", fixture("triangle.json"), "hilbert", "dist", "T", "1,1", "4,1,1"});
    CHECK(bad.code == 2);
}

TEST_CASE("tree build succeeds on the triangle scene") {
    auto r = run({"--scene", fixture("triangle.json"), "--format", "json",
                  "tree", "build", "--depth", "1"});
    REQUIRE(r.code == 0);
    json j = json::parse(r.out);
    CHECK(j["conclusions"]["verdict"] == "Holds");

    auto no_gog = run({"--scene", fixture("three_boxes.json"), "tree", "build", "--depth", "1"});
    CHECK(no_gog.code == 2);
}

TEST_CASE("diverge tabulates word lengths on the free product scene") {
    auto r = run({"--scene", fixture("free_product.json"), "--format", "json",
                  "diverge", "--max-len", "2"});
    REQUIRE(r.code == 0);
    json j = json::parse(r.out);
    REQUIRE(j["rows"].size() == 3);
    CHECK(j["identity_collision"] == false);
    CHECK(j["rows"][2]["min_log_ratio"].get<double>() >
          j["rows"][1]["min_log_ratio"].get<double>());
}

TEST_CASE("example run pd-cone passes") {
    auto r = run({"--format", "json", "example", "run", "pd-cone"});
    REQUIRE(r.code == 0);
    json j = json::parse(r.out);
    CHECK(j["pass"] == true);

    auto unknown = run({"example", "run", "nosuch"});
    CHECK(unknown.code == 2);
}

TEST_CASE("plot emit is byte deterministic and well formed") {
    std::string scene = fixture("three_boxes.json");
    std::string svg1 = temp_file("occ_plot.svg");
    std::string csv = temp_file("occ_plot.csv");

    auto r1 = run({"--scene", scene, "--format", "json",
                   "plot", "emit", "--chart", "0,0,1", "--out", svg1});
    REQUIRE(r1.code == 0);
    std::string body1 = slurp(svg1);
    auto r2 = run({"--scene", scene, "--format", "json",
                   "plot", "emit", "--chart", "0,0,1", "--out", svg1});
    REQUIRE(r2.code == 0);
    CHECK(r1.out == r2.out);
    CHECK(body1 == slurp(svg1));
    CHECK(body1.find("version=\"1.1\"") != std::string::npos);
    CHECK(body1.find("<polygon id=\"A\"") != std::string::npos);
    json j1 = json::parse(r1.out);
    CHECK(j1["polygons"] == 4);
    CHECK(j1["segments"] == 0);

    auto rc = run({"--scene", scene, "--format", "json",
                   "plot", "emit", "--chart", "0,0,1", "--out", csv});
    REQUIRE(rc.code == 0);
    std::string csv_body = slurp(csv);
    CHECK(csv_body.rfind("name,x,y,kind\n", 0) == 0);
    CHECK(csv_body.find(",vertex\n") != std::string::npos);

    auto bad = run({"--scene", scene, "plot", "emit", "--chart", "0,0,1", "--out", "x.txt"});
    CHECK(bad.code == 2);

    std::remove(svg1.c_str());
    std::remove(svg2.c_str());
    std::remove(csv.c_str());
}

TEST_CASE("plot emit renders tree truncations with adjacency segments") {
    std::string svg = temp_file("occ_tree_plot.svg");
    auto r = run({"--scene", fixture("free_product.json"), "--format", "json",
                  "plot", "emit", "--chart", "0,0,1", "--depth", "1", "--out", svg});
    REQUIRE(r.code == 0);
    json j = json::parse(r.out);
    CHECK(j["polygons"].get<int>() >= 3);
    CHECK(j["segments"].get<int>() >= 2);
    CHECK(slurp(svg).find("<line") != std::string::npos);
    std::remove(svg.c_str());
}

TEST_CASE("argument errors exit with code 2") {
    CHECK(run({}).code == 2);
    CHECK(run({"frobnicate"}).code == 2);
    CHECK(run({"--format", "yaml", "example", "run", "triangle"}).code == 2);
    CHECK(run({"occult", "check", "A"}).code == 2);
}
