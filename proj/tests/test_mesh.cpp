#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "spc/error.hpp"
#include "spc/mesh.hpp"
#include "spc/meshgen.hpp"

using namespace spc;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name) {
    static const fs::path dir = [] {
        fs::path p = fs::temp_directory_path() / "spc_mesh_tests";
        fs::create_directories(p);
        return p;
    }();
    return dir / name;
}

void write_text(const fs::path& p, const std::string& text) {
    std::ofstream out(p);
    out << text;
}

Mesh unit_triangle() {
    Mesh m;
    m.dim = 2;
    m.coords = {0, 0, 1, 0, 0, 1};
    m.elems = {0, 1, 2};
    m.elem_body = {0};
    m.finalize();
    return m;
}

} // namespace

TEST_CASE("load smallest valid mesh") {
    auto p = temp_file("tri.msh");
    write_text(p, "dim 2\nnodes 3\n0 0\n1 0\n0 1\nelements 1\n0 0 1 2\n");
    Mesh m = load_mesh(p.string());
    CHECK(m.n_nodes() == 3);
    CHECK(m.n_elems() == 1);
    CHECK(m.n_bodies == 1);
    CHECK(element_signed_volume(m, nullptr, 0) == doctest::Approx(0.5));
}

TEST_CASE("inverted tetrahedron is rejected with the element named") {
    auto p = temp_file("badtet.msh");
    // Swapping two nodes of a unit tet flips the signed volume.
    write_text(p, "dim 3\nnodes 4\n0 0 0\n1 0 0\n0 1 0\n0 0 1\nelements 1\n0 0 2 1 3\n");
    CHECK_THROWS_WITH_AS(load_mesh(p.string()),
                         doctest::Contains("element 0"), Error);
}

TEST_CASE("parse errors carry line numbers") {
    auto p = temp_file("trunc.msh");
    write_text(p, "dim 2\nnodes 2\n0 0\n1 oops\nelements 0\n");
    CHECK_THROWS_WITH_AS(load_mesh(p.string()), doctest::Contains(":4"), ParseError);
}

TEST_CASE("nodes shared between bodies are rejected") {
    auto p = temp_file("mixed.msh");
    write_text(p, "dim 2\nnodes 4\n0 0\n1 0\n0 1\n1 1\nelements 2\n0 0 1 2\n1 1 3 2\n");
    CHECK_THROWS_WITH_AS(load_mesh(p.string()), doctest::Contains("shared between bodies"), Error);
}

TEST_CASE("compression scene round-trips through the file format") {
    auto parts = meshgen::compress2d_scene(0.05);
    Mesh scene = meshgen::merge(parts);
    auto p = temp_file("scene.msh");
    save_mesh(scene, p.string());
    Mesh re = load_mesh(p.string());
    CHECK(re.n_nodes() == scene.n_nodes());
    CHECK(re.n_elems() == scene.n_elems());
    CHECK(re.n_bodies == 6);
    CHECK(re.coords == scene.coords);
    CHECK(re.elems == scene.elems);
}

TEST_CASE("boundary of a single triangle") {
    Mesh m = unit_triangle();
    BoundaryInfo b = extract_boundary(m);
    CHECK(b.exterior_faces.size() == 3);
    CHECK(b.exterior_nodes.size() == 3);
}

TEST_CASE("two triangles sharing an edge") {
    Mesh m = meshgen::rect(0, 0, 1, 1, 1, 1);
    BoundaryInfo b = extract_boundary(m);
    CHECK(b.exterior_faces.size() == 4);
    CHECK(b.exterior_nodes.size() == 4);
}

TEST_CASE("structured n x n square has 4n exterior edges") {
    for (int n : {2, 5, 8}) {
        Mesh m = meshgen::rect(0, 0, 1, 1, n, n);
        BoundaryInfo b = extract_boundary(m);
        CHECK(static_cast<int>(b.exterior_faces.size()) == 4 * n);
    }
}

TEST_CASE("extract_boundary is independent of element order") {
    Mesh m = meshgen::rect(0, 0, 2, 1, 6, 3);
    BoundaryInfo b1 = extract_boundary(m);

    std::vector<int> perm(m.n_elems());
    for (int i = 0; i < m.n_elems(); ++i) perm[i] = i;
    std::mt19937 rng(7);
    std::shuffle(perm.begin(), perm.end(), rng);
    Mesh p = m;
    for (int e = 0; e < m.n_elems(); ++e) {
        for (int a = 0; a < 3; ++a) p.elems[3 * e + a] = m.elems[3 * perm[e] + a];
        p.elem_body[e] = m.elem_body[perm[e]];
    }
    p.finalize();
    BoundaryInfo b2 = extract_boundary(p);
    CHECK(b1.exterior_nodes == b2.exterior_nodes);
    CHECK(b1.exterior_faces.size() == b2.exterior_faces.size());

    BoundaryInfo b3 = extract_boundary(m);  // idempotence
    CHECK(b3.exterior_faces == b1.exterior_faces);
    CHECK(b3.exterior_nodes == b1.exterior_nodes);
}

TEST_CASE("watertight tet boundaries have Euler characteristic 2") {
    for (const Mesh& m : {meshgen::box3d(0, 0, 0, 1, 1, 0.5, 3, 3, 2),
                          meshgen::cylinder3d(1.0, 2.0, 0.4)}) {
        BoundaryInfo b = extract_boundary(m);
        std::set<int> verts;
        std::set<std::pair<int, int>> edges;
        for (const auto& [e, f] : b.exterior_faces) {
            auto fn = face_nodes(m, e, f);
            for (int k = 0; k < 3; ++k) {
                verts.insert(fn[k]);
                int a = fn[k], bb = fn[(k + 1) % 3];
                edges.insert({std::min(a, bb), std::max(a, bb)});
            }
        }
        const auto V = static_cast<long>(verts.size());
        const auto E = static_cast<long>(edges.size());
        const auto F = static_cast<long>(b.exterior_faces.size());
        CHECK(V - E + F == 2);
    }
}

TEST_CASE("zero displacement keeps current coordinates at reference") {
    Mesh m = meshgen::disk(1.0, 0.25);
    Configuration cfg = Configuration::zero(m);
    for (int n = 0; n < m.n_nodes(); ++n)
        CHECK((current_coords(m, cfg, n) - m.node(n)).norm() == 0.0);
}

TEST_CASE("snapshot writes and round-trips") {
    Mesh m = unit_triangle();
    Configuration cfg = Configuration::zero(m);
    std::vector<double> phi(m.n_nodes(), 1.0);
    auto p = temp_file("snap.vtk");

    SUBCASE("unit triangle with phi = 1") {
        write_snapshot(m, cfg, {{"phi", phi}}, p.string());
        Snapshot s = read_snapshot(p.string());
        CHECK(s.n_points == 3);
        REQUIRE(s.scalars.count("phi") == 1);
        CHECK(s.scalars["phi"] == phi);
    }
    SUBCASE("mismatched field length is an error") {
        std::vector<double> bad(2, 0.0);
        CHECK_THROWS_WITH_AS(write_snapshot(m, cfg, {{"phi", bad}}, p.string()),
                             doctest::Contains("phi"), Error);
    }
    SUBCASE("deformed coordinates round-trip to 12 significant digits") {
        std::mt19937 rng(3);
        std::uniform_real_distribution<double> unif(-0.1, 0.1);
        for (double& u : cfg.u) u = unif(rng);
        write_snapshot(m, cfg, {{"phi", phi}}, p.string());
        Snapshot s = read_snapshot(p.string());
        for (int n = 0; n < m.n_nodes(); ++n) {
            DVec x = current_coords(m, cfg, n);
            for (int c = 0; c < 2; ++c) {
                double got = s.points[3 * n + c];
                CHECK(std::abs(got - x[c]) <= 1e-12 * std::max(1.0, std::abs(x[c])));
            }
            CHECK(s.points[3 * n + 2] == 0.0);
        }
    }
}

TEST_CASE("generators produce positively oriented elements") {
    for (const Mesh& m :
         {meshgen::disk(1.0, 0.1), meshgen::cone3d(1.87, 3.27, 0.5),
          meshgen::wedge3d(3.2, 3.2, 30.0, 0.6), meshgen::cylinder3d(1.43, 7.15, 0.7)}) {
        for (int e = 0; e < m.n_elems(); ++e)
            REQUIRE(element_signed_volume(m, nullptr, e) > 0.0);
    }
}

TEST_CASE("extruded meshes are conforming: exterior faces lie on the geometric boundary") {
    Mesh m = meshgen::cylinder3d(0.8, 1.5, 0.3);
    BoundaryInfo b = extract_boundary(m);
    for (const auto& [e, f] : b.exterior_faces) {
        auto fn = face_nodes(m, e, f);
        int on_boundary = 0;
        for (int k = 0; k < 3; ++k) {
            DVec x = m.node(fn[k]);
            double r = std::hypot(x[0], x[1]);
            if (r > 0.8 - 1e-9 || x[2] < 1e-9 || x[2] > 1.5 - 1e-9) ++on_boundary;
        }
        CHECK(on_boundary == 3);
    }
}
