#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "hvibem/fixtures.hpp"
#include "hvibem/stability.hpp"

using namespace hvibem;

namespace {

Eigen::VectorXd random_vector(int n, unsigned seed, double amp = 1.0) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> dist(-amp, amp);
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) v(i) = dist(rng);
    return v;
}

// gauge-subspace sample: mean-zero interior block
Eigen::VectorXd gauge_sample(const HviProblem& p, unsigned seed, double amp = 1.0) {
    return p.gauge_fix(random_vector(p.n_dofs(), seed, amp));
}

}  // namespace

TEST_CASE("load assembly against boundary mass row sums") {
    FixtureSetup fx = make_fixture("square-linear", 0.25);
    fx.data.f = nullptr;
    fx.data.q = [](Vec2) { return 1.0; };
    HviProblem problem = assemble_problem(fx.mesh, fx.dofs, *fx.nl, *fx.law, fx.data, fx.F, false);
    const Eigen::MatrixXd& M = problem.boundary_ops().mass_p1;
    const Eigen::VectorXd rows = M * Eigen::VectorXd::Ones(problem.n_boundary());
    for (int k = 0; k < problem.n_boundary(); ++k)
        CHECK(problem.lambda_net()(k) == doctest::Approx(rows(k)).epsilon(1e-12));
    for (int i = 0; i < problem.n_v(); ++i) {
        const int gl = problem.dofs().gamma_s_local[static_cast<std::size_t>(i)];
        CHECK(problem.lambda_net()(problem.n_u() + i) == doctest::Approx(rows(gl)).epsilon(1e-12));
    }
}

TEST_CASE("linear reduction matches the direct coupled solve") {
    FixtureSetup fx = make_fixture("square-linear", 0.18);
    HviProblem problem = make_fixture_problem(fx);
    const HviSolution sol = problem.solve();
    REQUIRE(sol.converged);

    // independent path: stiffness + Steklov blocks + mean gauge, one solve
    const int n = problem.n_u(), ns = problem.n_v(), nb = problem.n_boundary();
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(n + ns, n + ns);
    H.topLeftCorner(n, n) = problem.interior().stiffness();
    const Eigen::MatrixXd& S = problem.steklov().S;
    H.topLeftCorner(nb, nb) += S;
    for (int i = 0; i < ns; ++i) {
        const int gi = problem.dofs().gamma_s_local[static_cast<std::size_t>(i)];
        H.block(0, n + i, nb, 1) += S.col(gi);
        H.block(n + i, 0, 1, nb) += S.row(gi);
        for (int j = 0; j < ns; ++j)
            H(n + i, n + j) += S(gi, problem.dofs().gamma_s_local[static_cast<std::size_t>(j)]);
    }
    Eigen::VectorXd m = Eigen::VectorXd::Zero(n + ns);
    m.head(n) = problem.interior().lumped_mass();
    H += m * m.transpose() / m.head(n).sum();
    const Eigen::VectorXd direct = problem.gauge_fix(H.ldlt().solve(problem.lambda_net()));

    const Eigen::VectorXd diff = problem.stack(sol.u, sol.v) - direct;
    CHECK(problem.e_norm(diff) <= 1e-10 * problem.e_norm(direct));
}

TEST_CASE("smallness report") {
    FixtureSetup fx = make_fixture("square-nonmonotone", 0.2);

    SUBCASE("small alpha leaves the full coercivity margin") {
        fx.law = FrictionLaw(2.0, 1.0, 1e-8);
        HviProblem problem = make_fixture_problem(fx);
        const SmallnessReport rep = problem.smallness_check();
        CHECK(rep.c_J == doctest::Approx(1e-8));
        CHECK(rep.margin == doctest::Approx(rep.c_A_discrete).epsilon(1e-6));
        CHECK(rep.unique_certified);
    }
    SUBCASE("canonical law certifies with positive margin") {
        HviProblem problem = make_fixture_problem(fx);
        const SmallnessReport rep = problem.smallness_check();
        CHECK(rep.c_A_discrete > 0.0);
        CHECK(rep.gamma_norm_sq > 0.0);
        CHECK(rep.margin > 0.0);
        CHECK(rep.unique_certified);
    }
    SUBCASE("inflated alpha loses the certificate but the solver still runs") {
        fx.law = FrictionLaw(2.0, 1.0, 25.0);
        HviProblem problem = make_fixture_problem(fx);
        const SmallnessReport rep = problem.smallness_check();
        CHECK(rep.margin < 0.0);
        CHECK_FALSE(rep.unique_certified);
        const HviSolution sol = problem.solve();
        CHECK_FALSE(sol.smallness_satisfied);
        CHECK(sol.residual <= 1e-8 * problem.scale());
    }
}

TEST_CASE("uniqueness under the margin: random starts agree") {
    FixtureSetup fx = make_fixture("square-nonmonotone", 0.2);
    HviProblem problem = make_fixture_problem(fx);
    REQUIRE(problem.smallness_check().unique_certified);

    SolveOptions opts;
    const HviSolution ref = problem.solve(opts);
    REQUIRE(ref.converged);
    for (unsigned seed = 1; seed <= 2; ++seed) {
        SolveOptions o2 = opts;
        o2.start = random_vector(problem.n_dofs(), seed, 0.5);
        const HviSolution sol = problem.solve(o2);
        REQUIRE(sol.converged);
        const Eigen::VectorXd diff = problem.stack(sol.u, sol.v) - problem.stack(ref.u, ref.v);
        CHECK(problem.e_norm(diff) <= 1e-8);
    }
}

TEST_CASE("tiny fixtures match the brute-force oracle") {
    for (const char* name : {"tiny-stick", "tiny-slide"}) {
        CAPTURE(name);
        FixtureSetup fx = make_fixture(name);
        HviProblem problem = make_fixture_problem(fx);
        REQUIRE(problem.n_dofs() <= 6);
        const HviSolution sol = problem.solve();
        REQUIRE(sol.converged);
        const HviSolution oracle = brute_force_oracle(problem);
        const Eigen::VectorXd diff = problem.stack(sol.u, sol.v) - problem.stack(oracle.u, oracle.v);
        CHECK(problem.e_norm(diff) <= 1e-6);
        CHECK(sol.energy <= oracle.energy + 1e-9);
    }
    // stick fixture really sticks, slide fixture really slides
    HviProblem stick = make_fixture_problem(make_fixture("tiny-stick"));
    CHECK(stick.solve().v.cwiseAbs().maxCoeff() < 1e-9);
    HviProblem slide = make_fixture_problem(make_fixture("tiny-slide"));
    CHECK(slide.solve().v.cwiseAbs().maxCoeff() > 0.1);
}

TEST_CASE("brute force refuses large problems") {
    HviProblem problem = make_fixture_problem(make_fixture("square-nonmonotone", 0.3));
    CHECK(problem.n_dofs() > 6);
    CHECK_THROWS_AS(brute_force_oracle(problem), std::invalid_argument);
}

TEST_CASE("brute force quadratic case against normal equations") {
    FixtureSetup fx = make_fixture("tiny-stick");
    fx.nl = NonlinearityP::linear(1.0);
    fx.friction_enabled = false;
    HviProblem problem = make_fixture_problem(fx);
    const HviSolution oracle = brute_force_oracle(problem);
    const HviSolution sol = problem.solve();
    const Eigen::VectorXd diff = problem.stack(sol.u, sol.v) - problem.stack(oracle.u, oracle.v);
    CHECK(problem.e_norm(diff) <= 1e-8);
}

TEST_CASE("pinned box forces the pinned values") {
    FixtureSetup fx = make_fixture("tiny-slide");
    const int n = static_cast<int>(fx.mesh->nodes.size());
    fx.F.has_box = true;
    fx.F.box_lo = Eigen::VectorXd::Zero(n);
    fx.F.box_hi = Eigen::VectorXd::Zero(n);
    HviProblem problem = make_fixture_problem(fx);
    const HviSolution sol = problem.solve();
    REQUIRE(sol.converged);
    CHECK(sol.u.cwiseAbs().maxCoeff() == 0.0);
    // v still solves its reduced problem: oracle agreement
    const HviSolution oracle = brute_force_oracle(problem);
    CHECK(std::abs(sol.v(0) - oracle.v(0)) <= 1e-6);
}

TEST_CASE("bifunction properties") {
    FixtureSetup fx = make_fixture("square-nonmonotone", 0.25);
    HviProblem problem = make_fixture_problem(fx);
    const SmallnessReport rep = problem.smallness_check();
    REQUIRE(rep.margin > 0.0);

    for (unsigned seed = 0; seed < 40; ++seed) {
        const Eigen::VectorXd v = gauge_sample(problem, 2 * seed);
        const Eigen::VectorXd w = gauge_sample(problem, 2 * seed + 1);
        CHECK(problem.bifunction_phi(v, v) == 0.0);
        const double sym = problem.bifunction_phi(v, w) + problem.bifunction_phi(w, v);
        CHECK(sym <= -rep.margin * problem.e_norm_sq(v - w) + 1e-12);
        // convexity in the second argument: midpoint inequality
        const Eigen::VectorXd w2 = gauge_sample(problem, 1000 + seed);
        const double mid = problem.bifunction_phi(v, 0.5 * (w + w2));
        CHECK(mid <= 0.5 * problem.bifunction_phi(v, w) + 0.5 * problem.bifunction_phi(v, w2) + 1e-12);
    }
}

TEST_CASE("inner solve behavior") {
    FixtureSetup fx = make_fixture("square-nonmonotone", 0.25);
    HviProblem problem = make_fixture_problem(fx);

    SUBCASE("singleton intervals reduce to a smooth solve") {
        // anchor away from zero: every Clarke interval is a singleton
        const Eigen::VectorXd anchor = Eigen::VectorXd::Constant(problem.n_v(), 0.5);
        double res = 0.0;
        SolveOptions opts;
        const Eigen::VectorXd x =
            problem.inner_convex_solve(anchor, Eigen::VectorXd::Zero(problem.n_dofs()), opts, &res);
        CHECK(res <= opts.inner_tol * problem.scale());
        CHECK(x.allFinite());
    }
    SUBCASE("energy decreases monotonically along accepted steps") {
        SolveOptions opts;
        bool monotone = false;
        double res = 0.0;
        problem.inner_convex_solve(Eigen::VectorXd::Zero(problem.n_v()),
                                   Eigen::VectorXd::Zero(problem.n_dofs()), opts, &res, &monotone);
        CHECK(monotone);
    }
}

TEST_CASE("contraction certificate on the canonical fixture") {
    FixtureSetup fx = make_fixture("square-nonmonotone", 0.16);
    HviProblem problem = make_fixture_problem(fx);
    const SmallnessReport rep = problem.smallness_check();
    REQUIRE(rep.margin > 0.0);
    const HviSolution sol = problem.solve();
    REQUIRE(sol.converged);
    REQUIRE(sol.contraction_factors.size() >= 3);
    const double bound = rep.c_J * rep.gamma_norm_sq / rep.c_A_discrete + 0.1;
    for (std::size_t k = 0; k + 1 < sol.contraction_factors.size(); ++k)
        CHECK(sol.contraction_factors[k] <= bound);
    CHECK(sol.residual <= 1e-8 * problem.scale());
}

TEST_CASE("incompatible data is rejected without a box") {
    FixtureSetup fx = make_fixture("square-nonmonotone", 0.3);
    HviProblem problem = make_fixture_problem(fx);
    Eigen::VectorXd lu = problem.lambda_net().head(problem.n_u());
    lu.array() += 1.0;  // net volume source: unbalanced exterior flux
    problem.set_lambda(lu, problem.lambda_net().tail(problem.n_v()));
    CHECK_FALSE(problem.data_compatible());
    CHECK_THROWS_AS(problem.solve(), std::runtime_error);
}

TEST_CASE("box solutions stay in the box and satisfy complementarity") {
    FixtureSetup fx = make_fixture("square-obstacle", 0.2);
    HviProblem problem = make_fixture_problem(fx);
    const HviSolution sol = problem.solve();
    REQUIRE(sol.converged);
    const ExtendedF& F = problem.extended_F();
    for (int i = 0; i < problem.n_u(); ++i) {
        CHECK(sol.u(i) >= F.box_lo(i) - 1e-14);
        CHECK(sol.u(i) <= F.box_hi(i) + 1e-14);
    }
    const auto rep = problem.complementarity_report(sol);
    CHECK(rep.n_lower_active + rep.n_upper_active > 0);  // fixture binds
    const double tol = 1e-8 * problem.scale();
    CHECK(rep.max_free_abs <= tol);
    CHECK(rep.min_lower >= -tol);
    CHECK(rep.max_upper <= tol);
}

TEST_CASE("balanced zero data gives the zero gauge representative") {
    FixtureSetup fx = make_fixture("square-nonmonotone", 0.3);
    fx.data.f = nullptr;
    fx.data.q = nullptr;
    HviProblem problem = make_fixture_problem(fx);
    const HviSolution sol = problem.solve();
    REQUIRE(sol.converged);
    CHECK(problem.e_norm(problem.stack(sol.u, sol.v)) <= 1e-10);
}
