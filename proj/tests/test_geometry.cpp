#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "hvibem/geometry.hpp"

using namespace hvibem;

namespace {

PolygonSpec unit_square() {
    PolygonSpec spec;
    spec.vertices = {{0, 0}, {1, 0}, {1, 1}, {0, 1}};
    spec.gamma_s_arcs = {{0, 1}};
    return spec;
}

PolygonSpec regular_ngon(int n, double radius) {
    PolygonSpec spec;
    spec.vertices.resize(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) {
        const double th = 2.0 * M_PI * k / n;
        spec.vertices[static_cast<std::size_t>(k)] = {radius * std::cos(th), radius * std::sin(th)};
    }
    spec.gamma_s_arcs = {{0, n / 2}};
    return spec;
}

}  // namespace

TEST_CASE("coarsest square split") {
    const Mesh2D mesh = build_mesh(unit_square(), 0.6);
    CHECK(mesh.triangles.size() >= 2);
    CHECK(mesh.area() == doctest::Approx(1.0).epsilon(1e-12));
    bool has_s = false, has_t = false;
    for (const auto& e : mesh.boundary_edges) (e.part == BoundaryPart::S ? has_s : has_t) = true;
    CHECK(has_s);
    CHECK(has_t);
    CHECK(mesh.h <= 0.6 + 1e-12);
}

TEST_CASE("uniform refinement roughly doubles the boundary") {
    const Mesh2D coarse = build_mesh(unit_square(), 0.2);
    const Mesh2D fine = build_mesh(unit_square(), 0.1);
    const double ratio = static_cast<double>(fine.n_boundary) / coarse.n_boundary;
    CHECK(ratio > 1.8);
    CHECK(ratio < 2.2);
}

TEST_CASE("16-gon chords stay under the target") {
    const Mesh2D mesh = build_mesh(regular_ngon(16, 0.5), 0.2);
    for (const auto& e : mesh.boundary_edges) {
        const double len = norm(mesh.nodes[static_cast<std::size_t>(e.b)] -
                                mesh.nodes[static_cast<std::size_t>(e.a)]);
        CHECK(len < 0.2);
    }
    // chord of the 16-gon: 2 R sin(pi/16)
    CHECK(2.0 * 0.5 * std::sin(M_PI / 16.0) == doctest::Approx(0.19509).epsilon(1e-4));
}

TEST_CASE("capacity rescaling") {
    const Mesh2D small = build_mesh(unit_square(), 0.4);  // diameter sqrt(2) >= 1
    auto [scaled, s] = rescale_for_capacity(small);
    CHECK(scaled.diameter() < 1.0);
    CHECK(s < 1.0);

    PolygonSpec tiny = unit_square();
    for (Vec2& v : tiny.vertices) v = 0.5 * v;  // diameter 0.707
    const Mesh2D ok = build_mesh(tiny, 0.3);
    auto [same, s1] = rescale_for_capacity(ok);
    CHECK(s1 == 1.0);
    CHECK(same.diameter() == doctest::Approx(ok.diameter()));

    const Mesh2D big = build_mesh(regular_ngon(16, 2.0), 1.2);  // diameter 4
    auto [shrunk, s2] = rescale_for_capacity(big);
    CHECK(shrunk.diameter() < 1.0);
    CHECK(s2 < 0.25);
}

TEST_CASE("dof maps: side interior nodes and junction exclusion") {
    const Mesh2D mesh = build_mesh(unit_square(), 0.15);
    const DofMaps maps = dof_maps(mesh);
    // contact nodes are exactly the bottom-side nodes strictly between the corners
    for (int id : maps.gamma_s_dofs) {
        const Vec2 p = mesh.nodes[static_cast<std::size_t>(id)];
        CHECK(p.y == doctest::Approx(0.0).epsilon(1e-12));
        CHECK(p.x > 1e-12);
        CHECK(p.x < 1.0 - 1e-12);
    }
    int bottom_interior = 0;
    for (int k = 0; k < mesh.n_boundary; ++k) {
        const Vec2 p = mesh.nodes[static_cast<std::size_t>(k)];
        if (std::abs(p.y) < 1e-12 && p.x > 1e-12 && p.x < 1.0 - 1e-12) ++bottom_interior;
    }
    CHECK(static_cast<int>(maps.gamma_s_dofs.size()) == bottom_interior);
}

TEST_CASE("junction nodes go to the complement side") {
    PolygonSpec spec = unit_square();
    spec.gamma_s_arcs = {{0, 3}};  // everything except the last edge
    const Mesh2D mesh = build_mesh(spec, 0.3);
    const DofMaps maps = dof_maps(mesh);
    for (int id : maps.gamma_s_dofs) {
        const int k = id;  // boundary nodes come first in mesh order
        const BoundaryPart prev =
            mesh.boundary_edges[static_cast<std::size_t>((k + mesh.n_boundary - 1) % mesh.n_boundary)].part;
        const BoundaryPart next = mesh.boundary_edges[static_cast<std::size_t>(k)].part;
        CHECK(prev == BoundaryPart::S);
        CHECK(next == BoundaryPart::S);
    }
}

TEST_CASE("16-gon with 8 contact edges has 7 contact dofs") {
    const Mesh2D mesh = build_mesh(regular_ngon(16, 0.5), 0.5);  // no subdivision
    CHECK(mesh.n_boundary == 16);
    const DofMaps maps = dof_maps(mesh);
    CHECK(maps.gamma_s_dofs.size() == 7);
}

TEST_CASE("part lengths add up to the perimeter") {
    const PolygonSpec spec = unit_square();
    const Mesh2D mesh = build_mesh(spec, 0.17);
    double len_s = 0.0, len_t = 0.0;
    for (const auto& e : mesh.boundary_edges) {
        const double len = norm(mesh.nodes[static_cast<std::size_t>(e.b)] -
                                mesh.nodes[static_cast<std::size_t>(e.a)]);
        (e.part == BoundaryPart::S ? len_s : len_t) += len;
    }
    CHECK(len_s + len_t == doctest::Approx(spec.perimeter()).epsilon(1e-12));
    CHECK(len_s == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("outward normals point away from the centroid") {
    for (int ngon : {4, 7, 16}) {
        const Mesh2D mesh = build_mesh(regular_ngon(ngon, 0.5), 0.35);
        const BoundaryMesh bm = BoundaryMesh::from_mesh(mesh);
        Vec2 centroid{0, 0};
        for (const Vec2& p : bm.nodes) centroid = centroid + (1.0 / bm.n_panels()) * p;
        for (int k = 0; k < bm.n_panels(); ++k) {
            const Vec2 mid = 0.5 * (bm.panel_start(k) + bm.panel_end(k));
            CHECK(dot(bm.outward_normal(k), mid - centroid) > 0.0);
        }
    }
}

TEST_CASE("expand and restrict contact coefficients is the identity") {
    const Mesh2D mesh = build_mesh(unit_square(), 0.2);
    const DofMaps maps = dof_maps(mesh);
    // expansion by zero then restriction reads back the same values
    std::vector<double> v(maps.gamma_s_dofs.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = 0.3 * static_cast<double>(i) - 1.0;
    std::vector<double> full(static_cast<std::size_t>(mesh.n_boundary), 0.0);
    for (std::size_t i = 0; i < v.size(); ++i)
        full[static_cast<std::size_t>(maps.gamma_s_local[i])] = v[i];
    for (std::size_t i = 0; i < v.size(); ++i)
        CHECK(full[static_cast<std::size_t>(maps.gamma_s_local[i])] == v[i]);
    // and the expansion vanishes on the closure of the complement
    for (int k = 0; k < mesh.n_boundary; ++k) {
        const bool is_gamma_s = std::find(maps.gamma_s_local.begin(), maps.gamma_s_local.end(), k) !=
                                maps.gamma_s_local.end();
        if (!is_gamma_s) CHECK(full[static_cast<std::size_t>(k)] == 0.0);
    }
}

TEST_CASE("mesh text format round trip") {
    const Mesh2D mesh = build_mesh(unit_square(), 0.3);
    std::stringstream ss;
    write_mesh(ss, mesh);
    const Mesh2D back = read_mesh(ss);
    REQUIRE(back.nodes.size() == mesh.nodes.size());
    REQUIRE(back.triangles.size() == mesh.triangles.size());
    CHECK(back.n_boundary == mesh.n_boundary);
    for (std::size_t i = 0; i < mesh.nodes.size(); ++i) {
        CHECK(back.nodes[i].x == mesh.nodes[i].x);
        CHECK(back.nodes[i].y == mesh.nodes[i].y);
    }
    for (std::size_t i = 0; i < mesh.boundary_edges.size(); ++i)
        CHECK(back.boundary_edges[i].part == mesh.boundary_edges[i].part);
}

TEST_CASE("error paths") {
    PolygonSpec bad;
    bad.vertices = {{0, 0}, {1, 0}};
    bad.gamma_s_arcs = {{0, 1}};
    CHECK_THROWS_AS(build_mesh(bad, 0.5), std::invalid_argument);

    PolygonSpec cw = unit_square();
    std::reverse(cw.vertices.begin(), cw.vertices.end());
    CHECK_THROWS_AS(build_mesh(cw, 0.5), std::invalid_argument);

    PolygonSpec all = unit_square();
    all.gamma_s_arcs = {{0, 0}};
    CHECK_THROWS_AS(build_mesh(all, 0.5), std::invalid_argument);

    CHECK_THROWS_AS(build_mesh(unit_square(), -1.0), std::invalid_argument);

    // too coarse: the contact side has no interior node
    const Mesh2D coarse = build_mesh(unit_square(), 1.4);
    if (coarse.n_boundary == 4) CHECK_THROWS_AS(dof_maps(coarse), std::runtime_error);
}
