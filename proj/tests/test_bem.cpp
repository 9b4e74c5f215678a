#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "hvibem/bem.hpp"

using namespace hvibem;

namespace {

// exterior harmonic with decay at infinity, for the density oracle
double dipole(Vec2 p, Vec2 z0) {
    const double dx = p.x - z0.x, dy = p.y - z0.y;
    return dx / (dx * dx + dy * dy);
}
Vec2 dipole_grad(Vec2 p, Vec2 z0) {
    const double dx = p.x - z0.x, dy = p.y - z0.y;
    const double r2 = dx * dx + dy * dy;
    return {(r2 - 2.0 * dx * dx) / (r2 * r2), -2.0 * dx * dy / (r2 * r2)};
}

double circle_mode_error(int n_panels, int mode, double R) {
    const BoundaryMesh bm = BoundaryMesh::circle(R, n_panels);
    const BoundaryOperatorSet ops = assemble_boundary_operators(bm);
    const SteklovOperator st = assemble_steklov(ops);
    Eigen::VectorXd v(n_panels);
    for (int k = 0; k < n_panels; ++k) v(k) = std::cos(mode * 2.0 * M_PI * k / n_panels);
    const double ev = v.dot(st.S * v) / v.dot(ops.mass_p1 * v);
    return std::abs(ev - circle_steklov_oracle(R, mode)) / circle_steklov_oracle(R, mode);
}

}  // namespace

TEST_CASE("operator symmetries and kernels") {
    const BoundaryMesh bm = BoundaryMesh::circle(0.25, 48);
    const BoundaryOperatorSet ops = assemble_boundary_operators(bm);
    CHECK((ops.V - ops.V.transpose()).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((ops.W - ops.W.transpose()).cwiseAbs().maxCoeff() <= 1e-12);
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(48);
    CHECK((ops.W * ones).cwiseAbs().maxCoeff() <= 1e-10);

    const SteklovOperator st = assemble_steklov(ops);
    CHECK((st.S - st.S.transpose()).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK(st.asymmetry_defect <= 1e-8);
    CHECK((st.S * ones).cwiseAbs().maxCoeff() <= 1e-10);  // constants in the kernel
    // Galerkin ellipticity of the single layer after rescaling
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(ops.V);
    CHECK(es.eigenvalues().minCoeff() > 0.0);
}

TEST_CASE("single layer Fourier symbol on the circle") {
    const double R = 0.25;
    const int n = 64;
    const BoundaryMesh bm = BoundaryMesh::circle(R, n);
    const BoundaryOperatorSet ops = assemble_boundary_operators(bm);
    Eigen::VectorXd psi(n);
    double mass = 0.0;
    for (int k = 0; k < n; ++k) {
        psi(k) = std::cos(2.0 * M_PI * (k + 0.5) / n);
        mass += ops.panel_len(k) * psi(k) * psi(k);
    }
    const double sym = psi.dot(ops.V * psi) / mass;
    CHECK(std::abs(sym - R / 2.0) / (R / 2.0) < 0.02);
}

TEST_CASE("circle Steklov eigenvalues against the oracle") {
    CHECK(circle_steklov_oracle(0.5, 1) == doctest::Approx(2.0));
    CHECK(circle_steklov_oracle(0.5, 0) == doctest::Approx(0.0));
    CHECK(circle_steklov_oracle(0.25, 3) == doctest::Approx(12.0));
    CHECK_THROWS_AS(circle_steklov_oracle(-1.0, 1), std::invalid_argument);

    CHECK(circle_mode_error(128, 1, 0.25) < 0.02);
    CHECK(circle_mode_error(128, 2, 0.25) < 0.03);
    // observed convergence order at least one
    for (int mode = 1; mode <= 4; ++mode) {
        const double e64 = circle_mode_error(64, mode, 0.25);
        const double e128 = circle_mode_error(128, mode, 0.25);
        CHECK(std::log2(e64 / e128) >= 1.0);
    }
}

TEST_CASE("discrete coercivity constant") {
    const double R = 0.25;
    for (int n : {48, 96}) {
        const BoundaryMesh bm = BoundaryMesh::circle(R, n);
        const BoundaryOperatorSet ops = assemble_boundary_operators(bm);
        SteklovOperator st = assemble_steklov(ops);
        const double c = discrete_cS(st, ops);
        CHECK(c == st.c_S_discrete);
        CHECK(c > 0.0);
        // on the circle S acts like twice the hypersingular part, so the
        // quotient against W + mass stays below 2
        CHECK(c < 2.0);
    }
    // square fixture, pre- and post-rescaling
    PolygonSpec spec;
    spec.vertices = {{0, 0}, {4, 0}, {4, 4}, {0, 4}};
    spec.gamma_s_arcs = {{0, 1}};
    const Mesh2D big = build_mesh(spec, 1.0);
    CHECK_THROWS_AS(assemble_boundary_operators(BoundaryMesh::from_mesh(big)),
                    std::invalid_argument);  // diameter >= 1 refused
    auto [scaled, s] = rescale_for_capacity(big);
    CHECK(s < 0.25);
    const BoundaryOperatorSet ops = assemble_boundary_operators(BoundaryMesh::from_mesh(scaled));
    SteklovOperator st = assemble_steklov(ops);
    CHECK(discrete_cS(st, ops) > 0.0);
}

TEST_CASE("exterior Neumann density against an analytic field") {
    const Vec2 z0{0.05, 0.02};
    double prev = -1.0;
    for (int n : {32, 64, 128}) {
        const BoundaryMesh bm = BoundaryMesh::circle(0.25, n);
        const BoundaryOperatorSet ops = assemble_boundary_operators(bm);
        const SteklovOperator st = assemble_steklov(ops);
        Eigen::VectorXd v(n);
        for (int k = 0; k < n; ++k) v(k) = dipole(bm.nodes[static_cast<std::size_t>(k)], z0);
        const Eigen::VectorXd psi = st.neumann_density(v);
        CHECK(std::abs(ops.panel_len.dot(psi)) < 1e-10);  // zero total flux
        CHECK(std::abs(st.radiation_constant(v)) < 1e-8);  // the exact field decays to zero
        double err2 = 0.0, len = 0.0;
        for (int k = 0; k < n; ++k) {
            const Vec2 mid = 0.5 * (bm.panel_start(k) + bm.panel_end(k));
            const double exact = dot(dipole_grad(mid, z0), bm.outward_normal(k));
            err2 += bm.panel_length(k) * std::pow(psi(k) - exact, 2);
            len += bm.panel_length(k);
        }
        const double err = std::sqrt(err2 / len);
        if (prev > 0.0) CHECK(prev / err > 2.5);  // about second order
        prev = err;
    }
}

TEST_CASE("radiation constant of a constant trace") {
    const BoundaryMesh bm = BoundaryMesh::circle(0.25, 64);
    const BoundaryOperatorSet ops = assemble_boundary_operators(bm);
    const SteklovOperator st = assemble_steklov(ops);
    const Eigen::VectorXd c = Eigen::VectorXd::Constant(64, 2.5);
    CHECK(st.radiation_constant(c) == doctest::Approx(2.5).epsilon(1e-10));
    CHECK(st.neumann_density(c).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("matrix dump format") {
    Eigen::MatrixXd m(2, 2);
    m << 1.0 / 3.0, -2.0, 0.125, 1e-17;
    std::ostringstream os;
    dump_matrix_csv(os, m);
    std::istringstream is(os.str());
    std::string line;
    std::getline(is, line);
    double a = 0.0, b = 0.0;
    CHECK(sscanf(line.c_str(), "%lf,%lf", &a, &b) == 2);
    CHECK(a == 1.0 / 3.0);  // 17 significant digits round-trip
    CHECK(b == -2.0);
}
