#include "hvibem/fixtures.hpp"

#include <cmath>
#include <stdexcept>

namespace hvibem {

namespace {

// Unit square with the contact part on the bottom edge, rescaled to
// diameter 0.8 so the single layer operator stays definite.
FixtureSetup square_base(const std::string& name, double h) {
    PolygonSpec spec;
    spec.vertices = {{0, 0}, {1, 0}, {1, 1}, {0, 1}};
    spec.gamma_s_arcs = {{0, 1}};
    Mesh2D raw = build_mesh(spec, h);
    auto [scaled, s] = rescale_for_capacity(raw);
    FixtureSetup fx;
    fx.name = name;
    fx.mesh = std::make_shared<Mesh2D>(std::move(scaled));
    fx.dofs = dof_maps(*fx.mesh);
    fx.capacity_scale = s;
    return fx;
}

// Regular polygon approximating a circle of radius 0.25; the contact part
// is the lower half.
FixtureSetup circle_base(const std::string& name, int n_gon, double h) {
    PolygonSpec spec;
    spec.vertices.resize(static_cast<std::size_t>(n_gon));
    for (int k = 0; k < n_gon; ++k) {
        const double th = 2.0 * M_PI * k / n_gon;
        spec.vertices[static_cast<std::size_t>(k)] = {0.25 * std::cos(th), 0.25 * std::sin(th)};
    }
    spec.gamma_s_arcs = {{n_gon / 2, n_gon}};  // arc from angle pi to 2 pi
    spec.gamma_s_arcs[0].second = 0;           // wraps to vertex 0
    Mesh2D raw = build_mesh(spec, h);
    FixtureSetup fx;
    fx.name = name;
    fx.mesh = std::make_shared<Mesh2D>(std::move(raw));
    fx.dofs = dof_maps(*fx.mesh);
    return fx;
}

FixtureSetup tiny_base(const std::string& name) {
    // Hand-built 5-node square with one contact dof: 6 dofs total.
    auto mesh = std::make_shared<Mesh2D>();
    mesh->nodes = {{0, 0}, {0.3, 0}, {0.6, 0}, {0.6, 0.6}, {0, 0.6}};
    mesh->triangles = {{0, 1, 4}, {1, 2, 3}, {1, 3, 4}};
    mesh->boundary_edges = {{0, 1, BoundaryPart::S},
                            {1, 2, BoundaryPart::S},
                            {2, 3, BoundaryPart::T},
                            {3, 4, BoundaryPart::T},
                            {4, 0, BoundaryPart::T}};
    mesh->n_boundary = 5;
    mesh->h = std::sqrt(0.36 + 0.09);
    mesh->validate();
    FixtureSetup fx;
    fx.name = name;
    fx.mesh = mesh;
    fx.dofs = dof_maps(*mesh);
    return fx;
}

// Boundary datum with zero mean on the square (0,L)^2: positive toward the
// contact side, negative on top.
ProblemData square_data(double side, double q0, double f0) {
    ProblemData d;
    d.q = [side, q0](Vec2 p) { return q0 * (1.0 - 2.0 * p.y / side); };
    d.f = [side, f0](Vec2 p) { return f0 * std::sin(2.0 * M_PI * p.x / side); };
    return d;
}

}  // namespace

std::vector<std::pair<std::string, std::string>> list_fixtures() {
    return {
        {"square-linear", "square, p == 1, friction off; linear coupling oracle"},
        {"square-nonmonotone", "canonical fixture: rational p, slip-weakening friction on the bottom edge"},
        {"square-obstacle", "square-nonmonotone plus a bilateral box on the interior values"},
        {"circle-spectral", "polygonal circle R = 0.25; boundary operator spectral oracle"},
        {"circle-nonmonotone", "circle with friction on the lower half"},
        {"tiny-stick", "6-dof hand-built square, load inside the friction jump (stick state)"},
        {"tiny-slide", "6-dof hand-built square, load beyond the friction bound (slide state)"},
        {"ocp1-inverse-crime", "distributed control recovery with manufactured target"},
        {"ocp2-boundary", "boundary control with manufactured target"},
        {"ocp3-inverse-crime", "simultaneous distributed-boundary control recovery"},
        {"ocp4-obstacle", "obstacle control with manufactured target and known active set"},
        {"stability-linear", "base problem for the linear-form perturbation study"},
        {"stability-obstacle", "base problem for the obstacle perturbation study"},
    };
}

FixtureSetup make_fixture(const std::string& name, double h_override) {
    const double h = h_override;
    if (name == "square-linear") {
        FixtureSetup fx = square_base(name, h > 0 ? h : 0.12);
        fx.nl = NonlinearityP::linear(1.0);
        fx.law = FrictionLaw(2.0, 1.0, 1.0);
        fx.friction_enabled = false;
        const double side = fx.capacity_scale;
        fx.data = square_data(side, 2.0, 1.5);
        return fx;
    }
    if (name == "square-nonmonotone" || name == "stability-linear" || name == "stability-obstacle") {
        FixtureSetup fx = square_base(name, h > 0 ? h : (name == "square-nonmonotone" ? 0.10 : 0.14));
        fx.nl = NonlinearityP::rational(2.0, 1.0);
        fx.law = FrictionLaw(2.0, 1.0, 1.0);
        const double side = fx.capacity_scale;
        fx.data = square_data(side, 4.0, 1.0);
        return fx;
    }
    if (name == "square-obstacle") {
        FixtureSetup fx = square_base(name, h > 0 ? h : 0.12);
        fx.nl = NonlinearityP::rational(2.0, 1.0);
        fx.law = FrictionLaw(2.0, 1.0, 1.0);
        const double side = fx.capacity_scale;
        fx.data = square_data(side, 4.0, 1.0);
        fx.F.has_box = true;
        const int n = static_cast<int>(fx.mesh->nodes.size());
        fx.F.box_lo = Eigen::VectorXd::Constant(n, -0.04);
        fx.F.box_hi = Eigen::VectorXd::Constant(n, 0.04);
        return fx;
    }
    if (name == "circle-spectral") {
        FixtureSetup fx = circle_base(name, 64, h > 0 ? h : 0.05);
        fx.nl = NonlinearityP::linear(1.0);
        fx.law = FrictionLaw(2.0, 1.0, 1.0);
        fx.friction_enabled = false;
        fx.data.q = [](Vec2 p) { return 3.0 * p.y; };  // odd, zero mean on the circle
        fx.data.f = [](Vec2) { return 0.0; };
        return fx;
    }
    if (name == "circle-nonmonotone") {
        FixtureSetup fx = circle_base(name, 32, h > 0 ? h : 0.06);
        fx.nl = NonlinearityP::rational(2.0, 1.0);
        fx.law = FrictionLaw(2.0, 1.0, 1.0);
        fx.data.q = [](Vec2 p) { return -14.0 * p.y; };  // pushes the contact half
        fx.data.f = [](Vec2 p) { return 2.0 * p.x; };
        return fx;
    }
    if (name == "tiny-stick" || name == "tiny-slide") {
        FixtureSetup fx = tiny_base(name);
        fx.nl = NonlinearityP::rational(2.0, 1.0);
        fx.law = FrictionLaw(2.0, 1.0, 1.0);
        const double q0 = name == "tiny-stick" ? 0.8 : 40.0;
        fx.data.q = [q0](Vec2 p) { return q0 * (1.0 - 2.0 * p.y / 0.6); };
        fx.data.f = [](Vec2 p) { return p.x - 0.3; };
        return fx;
    }
    throw std::invalid_argument("make_fixture: unknown fixture '" + name + "'");
}

HviProblem make_fixture_problem(const FixtureSetup& setup) {
    if (!setup.nl || !setup.law) throw std::invalid_argument("make_fixture_problem: incomplete setup");
    HviProblem problem = assemble_problem(setup.mesh, setup.dofs, *setup.nl, *setup.law, setup.data,
                                          setup.F, setup.friction_enabled);
    if (problem.gauge_active() && !problem.data_compatible()) {
        // Shift the volume load by a constant; quadrature already made the
        // analytic zero-mean data nearly balanced, this zeroes the defect.
        Eigen::VectorXd lu = problem.lambda_net().head(problem.n_u());
        if (problem.extended_F().linear_u.size()) lu += problem.extended_F().linear_u;
        const Eigen::VectorXd m = problem.interior().lumped_mass();
        lu -= (lu.sum() / m.sum()) * m;
        Eigen::VectorXd lv = problem.lambda_net().tail(problem.n_v());
        if (problem.extended_F().linear_v.size()) lv += problem.extended_F().linear_v;
        problem.set_lambda(lu, lv);
    }
    return problem;
}

ControlFixture make_control_fixture(const std::string& name, double h_override) {
    ControlFixture cf;
    const double h = h_override > 0 ? h_override : 0.2;
    if (name == "ocp1-inverse-crime") {
        cf.base = make_fixture("square-nonmonotone", h);
        cf.kind = ControlKind::Distributed;
        cf.rho = 1e-8;
        const int np = cf.grid.nx * cf.grid.ny;
        cf.true_control.resize(np);
        for (int iy = 0; iy < cf.grid.ny; ++iy)
            for (int ix = 0; ix < cf.grid.nx; ++ix) {
                const double dx = ix - 0.5 * (cf.grid.nx - 1);
                const double dy = iy - 0.5 * (cf.grid.ny - 1);
                cf.true_control(iy * cf.grid.nx + ix) = 2.0 * std::exp(-0.8 * (dx * dx + dy * dy));
            }
        return cf;
    }
    if (name == "ocp2-boundary") {
        cf.base = make_fixture("square-nonmonotone", h);
        cf.kind = ControlKind::Boundary;
        cf.rho = 1e-8;
        cf.true_control.resize(cf.grid.n_boundary_segments);
        for (int s = 0; s < cf.grid.n_boundary_segments; ++s)
            cf.true_control(s) = 1.5 * std::cos(2.0 * M_PI * s / cf.grid.n_boundary_segments);
        return cf;
    }
    if (name == "ocp3-inverse-crime") {
        ControlFixture f1 = make_control_fixture("ocp1-inverse-crime", h);
        ControlFixture f2 = make_control_fixture("ocp2-boundary", h);
        cf.base = f1.base;
        cf.kind = ControlKind::DistributedBoundary;
        cf.rho = 1e-8;
        cf.true_control.resize(f1.true_control.size() + f2.true_control.size());
        cf.true_control << f1.true_control, f2.true_control;
        return cf;
    }
    if (name == "ocp4-obstacle") {
        cf.base = make_fixture("square-nonmonotone", h);
        cf.kind = ControlKind::Obstacle;
        // Near-zero regularization keeps inactive bounds from drifting into
        // grazing contact; the clamp level 0.42 sits inside a wide gap of
        // the unconstrained nodal values, so the active set is insensitive
        // to small recovery errors of the bound.
        cf.rho = 1e-12;
        cf.grid.nx = 2;
        cf.grid.ny = 2;
        const int np = cf.grid.nx * cf.grid.ny;
        cf.true_control.resize(2 * np);
        cf.true_control.head(np).setConstant(-0.5);
        cf.true_control.tail(np).setConstant(0.42);
        return cf;
    }
    throw std::invalid_argument("make_control_fixture: unknown fixture '" + name + "'");
}

}  // namespace hvibem
