// Acceptance suite: runs every criterion at its stated tolerance and prints
// one pass/fail line per criterion. Exit status is the number of failures.
#include <Eigen/Dense>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <random>
#include <vector>

#include "hvibem/exterior.hpp"
#include "hvibem/fixtures.hpp"
#include "hvibem/stability.hpp"

using namespace hvibem;

namespace {

int g_failures = 0;

void report(int id, bool pass, const char* label, const std::string& detail) {
    std::printf("[%s] criterion %2d: %s (%s)\n", pass ? "PASS" : "FAIL", id, label, detail.c_str());
    if (!pass) ++g_failures;
}

std::string fmt(const char* f, ...) {
    char buf[512];
    va_list args;
    va_start(args, f);
    vsnprintf(buf, sizeof(buf), f, args);
    va_end(args);
    return std::string(buf);
}

Eigen::VectorXd random_vector(int n, unsigned seed, double amp = 1.0) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> dist(-amp, amp);
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) v(i) = dist(rng);
    return v;
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

void criterion_1_bem_spectra() {
    bool pass = true;
    double worst = 0.0, min_order = 1e9;
    for (int mode = 1; mode <= 4; ++mode) {
        const double e128 = circle_mode_error(128, mode, 0.25);
        const double e64 = circle_mode_error(64, mode, 0.25);
        worst = std::max(worst, e128);
        min_order = std::min(min_order, std::log2(e64 / e128));
        pass = pass && e128 <= 0.03 && std::log2(e64 / e128) >= 1.0;
    }
    report(1, pass, "BEM spectral oracle |n|/R",
           fmt("worst rel err %.2e at 128 panels, observed order %.2f", worst, min_order));
}

void criterion_2_linear_reduction() {
    HviProblem problem = make_fixture_problem(make_fixture("square-linear", 0.15));
    const HviSolution sol = problem.solve();
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
    // compare gauge representatives: the reference solve pins the constant
    // direction only weakly through the rank-one term
    const Eigen::VectorXd direct = problem.gauge_fix(H.ldlt().solve(problem.lambda_net()));
    const double rel = problem.e_norm(problem.stack(sol.u, sol.v) - direct) / problem.e_norm(direct);
    report(2, sol.converged && rel <= 1e-10, "linear reduction against the direct coupled solve",
           fmt("relative E-norm error %.2e", rel));
}

void criterion_3_brute_force() {
    bool pass = true;
    std::string detail;
    for (const char* name : {"tiny-stick", "tiny-slide"}) {
        HviProblem problem = make_fixture_problem(make_fixture(name));
        const HviSolution sol = problem.solve();
        const HviSolution oracle = brute_force_oracle(problem);
        const double d = problem.e_norm(problem.stack(sol.u, sol.v) - problem.stack(oracle.u, oracle.v));
        pass = pass && sol.converged && d <= 1e-6;
        detail += fmt("%s %.2e ", name, d);
    }
    report(3, pass, "brute-force equivalence on the tiny fixtures", detail);
}

void criterion_4_contraction() {
    HviProblem problem = make_fixture_problem(make_fixture("square-nonmonotone", 0.16));
    const SmallnessReport rep = problem.smallness_check();
    bool pass = rep.margin > 0.0;
    const double bound = rep.c_J * rep.gamma_norm_sq / rep.c_A_discrete + 0.1;

    SolveOptions opts;
    const HviSolution ref = problem.solve(opts);
    pass = pass && ref.converged;
    double worst_theta = 0.0;
    for (std::size_t k = 0; k < ref.contraction_factors.size(); ++k) {
        if (ref.step_norms[k + 1] <= 10.0 * opts.outer_tol * problem.scale()) continue;
        worst_theta = std::max(worst_theta, ref.contraction_factors[k]);
        pass = pass && ref.contraction_factors[k] <= bound;
    }
    double worst_gap = 0.0;
    for (unsigned s = 1; s <= 5; ++s) {
        SolveOptions o2 = opts;
        o2.start = random_vector(problem.n_dofs(), s, 0.5);
        const HviSolution sol = problem.solve(o2);
        const double d = problem.e_norm(problem.stack(sol.u, sol.v) - problem.stack(ref.u, ref.v));
        worst_gap = std::max(worst_gap, d);
        pass = pass && sol.converged && d <= 1e-8;
    }
    report(4, pass, "contraction certificate and uniqueness surrogate",
           fmt("margin %.3f, theta <= %.3f (bound %.3f), start spread %.2e", rep.margin, worst_theta,
               bound, worst_gap));
}

void criterion_5_bifunction() {
    HviProblem problem = make_fixture_problem(make_fixture("square-nonmonotone", 0.2));
    const SmallnessReport rep = problem.smallness_check();
    bool pass = rep.margin > 0.0;
    int violations = 0;
    double worst = 0.0;
    for (unsigned s = 0; s < 500; ++s) {
        const Eigen::VectorXd v = problem.gauge_fix(random_vector(problem.n_dofs(), 3 * s));
        const Eigen::VectorXd w = problem.gauge_fix(random_vector(problem.n_dofs(), 3 * s + 1));
        if (problem.bifunction_phi(v, v) != 0.0) ++violations;
        const double sym = problem.bifunction_phi(v, w) + problem.bifunction_phi(w, v);
        const double slack = sym + rep.margin * problem.e_norm_sq(v - w);
        worst = std::max(worst, slack);
        if (slack > 1e-12) ++violations;
        const Eigen::VectorXd w2 = problem.gauge_fix(random_vector(problem.n_dofs(), 3 * s + 2));
        const double mid = problem.bifunction_phi(v, 0.5 * (w + w2)) -
                           0.5 * problem.bifunction_phi(v, w) - 0.5 * problem.bifunction_phi(v, w2);
        if (mid > 1e-12) ++violations;
    }
    pass = pass && violations == 0;
    report(5, pass, "equilibrium bifunction: diagonal, strong monotonicity, convexity",
           fmt("500 samples, %d violations, worst monotonicity slack %.2e", violations, worst));
}

void criterion_6_superpotential() {
    const FrictionLaw law(2.0, 1.0, 1.0);
    const double c_j1 = 2.0, c_j2 = 0.0, c_J = 1.0;
    bool pass = std::abs(law.one_sided_lipschitz_cJ() - c_J) < 1e-15;
    double worst_cc1 = -1e300;
    for (int i = -160; i <= 160; ++i) {
        const double y1 = 0.025 * i;
        const ClarkeInterval iv = law.clarke_interval(y1);
        for (double eta : {iv.lo, iv.hi}) {
            if (std::abs(eta) > c_j1 * (1.0 + std::abs(y1)) + 1e-12) pass = false;
            if (eta * y1 < -c_j2 * std::abs(y1) - 1e-12) pass = false;
        }
        for (int j = -160; j <= 160; ++j) {
            if (i == j) continue;
            const double y2 = 0.025 * j;
            const double lhs = law.j0(y1, y2 - y1) + law.j0(y2, y1 - y2);
            worst_cc1 = std::max(worst_cc1, lhs / ((y1 - y2) * (y1 - y2)));
        }
        // support-function identity against 64 sampled interval points
        for (double z : {-1.7, -0.3, 0.4, 2.1}) {
            double best = -1e300;
            for (int k = 0; k < 64; ++k)
                best = std::max(best, (iv.lo + (iv.hi - iv.lo) * k / 63.0) * z);
            if (std::abs(best - law.j0(y1, z)) > 1e-12) pass = false;
        }
    }
    pass = pass && worst_cc1 <= c_J + 1e-9;
    report(6, pass, "superpotential calculus with closed-form constants",
           fmt("one-sided Lipschitz sampled max %.6f vs c_J %.1f", worst_cc1, c_J));
}

void criterion_7_stability() {
    bool pass = true;
    std::string detail;
    {
        HviProblem problem = make_fixture_problem(make_fixture("stability-linear", 0.2));
        Eigen::VectorXd pu(problem.n_u()), pv(problem.n_v());
        for (int i = 0; i < pu.size(); ++i) pu(i) = std::sin(1.7 * i + 0.3);
        for (int i = 0; i < pv.size(); ++i) pv(i) = std::cos(2.3 * i);
        const auto seq = make_linear_sequence(problem, problem.extended_F(), 0.5 * pu, 0.05 * pv,
                                              [](int n) { return 0.5 * std::pow(10.0, 1.0 - n); }, 8);
        const StabilityReport rep = run_stability_experiment(problem, seq);
        for (std::size_t i = 0; i + 1 < rep.errors.size(); ++i)
            pass = pass && rep.errors[i + 1] <= rep.errors[i] + 1e-14;
        pass = pass && rep.errors.back() <= 1e-6 * problem.scale();
        double max_norm = 0.0;
        for (double s : rep.state_norms) max_norm = std::max(max_norm, s);
        pass = pass && max_norm <= rep.limit_state_norm + rep.errors.front() + 1e-9;
        detail += fmt("linear final %.2e (tol %.2e); ", rep.errors.back(), 1e-6 * problem.scale());
    }
    {
        HviProblem problem = make_fixture_problem(make_fixture("stability-obstacle", 0.2));
        const int n = problem.n_u();
        const Eigen::VectorXd lo = Eigen::VectorXd::Constant(n, -0.04);
        const Eigen::VectorXd hi = Eigen::VectorXd::Constant(n, 0.04);
        Eigen::VectorXd plo(n), phi(n);
        for (int i = 0; i < n; ++i) {
            plo(i) = -0.03 * (0.5 + 0.5 * std::sin(0.9 * i));
            phi(i) = 0.03 * (0.5 + 0.5 * std::cos(1.3 * i));
        }
        const auto seq = make_obstacle_sequence(lo, hi, plo, phi,
                                                [](int n2) { return std::pow(4.0, -(n2 - 1)); }, 8);
        const StabilityReport rep = run_stability_experiment(problem, seq);
        for (std::size_t i = 0; i + 1 < rep.errors.size(); ++i)
            pass = pass && rep.errors[i + 1] <= rep.errors[i] + 1e-14;
        pass = pass && rep.errors.back() <= 1e-3 * rep.errors.front();
        double max_norm = 0.0;
        for (double s : rep.state_norms) max_norm = std::max(max_norm, s);
        pass = pass && max_norm <= rep.limit_state_norm + rep.errors.front() + 1e-9;
        detail += fmt("obstacle final/initial %.2e", rep.errors.back() / rep.errors.front());
    }
    report(7, pass, "perturbation stability of the solution map", detail);
}

void criterion_8_complementarity() {
    HviProblem problem = make_fixture_problem(make_fixture("square-obstacle", 0.15));
    const HviSolution sol = problem.solve();
    const auto rep = problem.complementarity_report(sol);
    const double tol = 1e-8 * problem.scale();
    const bool pass = sol.converged && rep.max_free_abs <= tol && rep.min_lower >= -tol &&
                      rep.max_upper <= tol && rep.n_lower_active + rep.n_upper_active > 0;
    report(8, pass, "three-case obstacle complementarity",
           fmt("free %.2e, lower %.2e, upper %.2e, active %d+%d", rep.max_free_abs, rep.min_lower,
               rep.max_upper, rep.n_lower_active, rep.n_upper_active));
}

void criterion_9_control() {
    bool pass = true;
    std::string detail;
    SolveOptions so;
    so.check_residual = false;

    auto nonincreasing = [](const std::vector<double>& t) {
        for (std::size_t i = 0; i + 1 < t.size(); ++i)
            if (t[i + 1] > t[i] + 1e-14) return false;
        return true;
    };

    {  // distributed inverse crime, 5 percent
        const ControlFixture cf = make_control_fixture("ocp1-inverse-crime");
        HviProblem base = make_fixture_problem(cf.base);
        ControlDriver driver(base, ControlDriver::inverse_crime_setup(base, cf.kind, cf.true_control,
                                                                      cf.rho, cf.grid, so));
        MinimizeOptions mo;
        mo.state_opts = so;
        mo.max_evals = 6000;
        const ControlResult res = driver.minimize(mo);
        const double rel = driver.relative_control_error(res.control, cf.true_control);
        pass = pass && rel <= 0.05 && nonincreasing(res.cost_trajectory);
        detail += fmt("ocp1 %.3f; ", rel);
    }
    {  // simultaneous distributed-boundary, 10 percent
        const ControlFixture cf = make_control_fixture("ocp3-inverse-crime");
        HviProblem base = make_fixture_problem(cf.base);
        ControlDriver driver(base, ControlDriver::inverse_crime_setup(base, cf.kind, cf.true_control,
                                                                      cf.rho, cf.grid, so));
        MinimizeOptions mo;
        mo.state_opts = so;
        mo.max_evals = 9000;
        const ControlResult res = driver.minimize(mo);
        const double rel = driver.relative_control_error(res.control, cf.true_control);
        pass = pass && rel <= 0.10 && nonincreasing(res.cost_trajectory);
        detail += fmt("ocp3 %.3f; ", rel);
    }
    {  // obstacle control: recovered active set matches the target state
        const ControlFixture cf = make_control_fixture("ocp4-obstacle");
        HviProblem base = make_fixture_problem(cf.base);
        const ControlSpec spec = ControlDriver::inverse_crime_setup(base, cf.kind, cf.true_control,
                                                                    cf.rho, cf.grid, so);
        ControlDriver driver(base, spec);
        MinimizeOptions mo;
        mo.state_opts = so;
        mo.max_evals = 6000;
        Eigen::VectorXd start(cf.true_control.size());
        const int np = cf.grid.nx * cf.grid.ny;
        start.head(np).setConstant(-0.5);
        start.tail(np).setConstant(0.5);
        mo.start = start;
        const ControlResult res = driver.minimize(mo);
        pass = pass && nonincreasing(res.cost_trajectory);

        // target active set from the true control
        const HviSolution true_state = driver.control_to_state(cf.true_control, so);
        Eigen::VectorXd tlo, thi, rlo, rhi;
        driver.split_obstacle(driver.project_admissible(cf.true_control), tlo, thi);
        driver.split_obstacle(driver.project_admissible(res.control), rlo, rhi);
        int mismatches = 0;
        for (int i = 0; i < base.n_u(); ++i) {
            const bool t_lo = true_state.u(i) <= tlo(i) + 1e-7;
            const bool t_hi = true_state.u(i) >= thi(i) - 1e-7;
            const bool r_lo = res.final_state.u(i) <= rlo(i) + 1e-7;
            const bool r_hi = res.final_state.u(i) >= rhi(i) - 1e-7;
            if (t_lo != r_lo || t_hi != r_hi) ++mismatches;
        }
        pass = pass && mismatches == 0;
        detail += fmt("ocp4 active-set mismatches %d; ", mismatches);
    }
    {  // landscape: 20 restarts cluster within one percent
        const ControlFixture cf = make_control_fixture("ocp1-inverse-crime");
        HviProblem base = make_fixture_problem(cf.base);
        ControlDriver driver(base, ControlDriver::inverse_crime_setup(base, cf.kind, cf.true_control,
                                                                      1e-2, cf.grid, so));
        std::vector<double> best;
        for (unsigned s = 0; s < 20; ++s) {
            MinimizeOptions mo;
            mo.state_opts = so;
            mo.max_evals = 1200;
            mo.start = random_vector(driver.control_dim(), 100 + s, 1.0);
            const ControlResult res = driver.minimize(mo);
            pass = pass && nonincreasing(res.cost_trajectory);
            best.push_back(res.final_cost);
        }
        std::sort(best.begin(), best.end());
        const double spread = (best.back() - best.front()) / std::max(best[best.size() / 2], 1e-300);
        pass = pass && spread <= 0.01;
        detail += fmt("restart spread %.4f", spread);
    }
    report(9, pass, "optimal control recovery and landscape", detail);
}

void criterion_10_equivalence_loop() {
    FixtureSetup coarse_fx = make_fixture("circle-nonmonotone", 0.08);
    FixtureSetup fine_fx = make_fixture("circle-nonmonotone", 0.04);
    HviProblem coarse = make_fixture_problem(coarse_fx);
    HviProblem fine = make_fixture_problem(fine_fx);
    SolveOptions so;
    so.certify = false;
    const HviSolution sc = coarse.solve(so);
    const HviSolution sf = fine.solve(so);
    const TransmissionReport rc = transmission_residuals(sc, coarse, coarse_fx.data);
    const TransmissionReport rf = transmission_residuals(sf, fine, fine_fx.data);

    const double neumann_ratio = rc.neumann_residual / rf.neumann_residual;
    const double inclusion_ratio = rc.inclusion_residual / rf.inclusion_residual;
    bool pass = sc.converged && sf.converged && neumann_ratio >= 1.5 && inclusion_ratio >= 1.5 &&
                rc.dirichlet_jump == 0.0 && rf.dirichlet_jump == 0.0;

    const CauchyData data = reconstruct_u2(sf, fine);
    const double scale = std::max(1.0, data.dirichlet.cwiseAbs().maxCoeff());
    double worst_lap = 0.0;
    for (Vec2 c : {Vec2{0.6, 0.3}, Vec2{-0.5, -0.4}, Vec2{0.0, 0.7}})
        worst_lap = std::max(worst_lap,
                             std::abs(fd_laplacian(fine.boundary_ops().bm, data, c, 0.01,
                                                   fine.mesh().h)));
    pass = pass && worst_lap <= 1e-3 * scale;
    report(10, pass, "equivalence loop residuals under refinement",
           fmt("neumann ratio %.2f, inclusion ratio %.2f, jump %.1e, fd laplacian %.2e",
               neumann_ratio, inclusion_ratio, std::max(rc.dirichlet_jump, rf.dirichlet_jump),
               worst_lap));
}

}  // namespace

int main() {
    criterion_1_bem_spectra();
    criterion_2_linear_reduction();
    criterion_3_brute_force();
    criterion_4_contraction();
    criterion_5_bifunction();
    criterion_6_superpotential();
    criterion_7_stability();
    criterion_8_complementarity();
    criterion_9_control();
    criterion_10_equivalence_loop();
    if (g_failures == 0)
        std::printf("all acceptance criteria passed\n");
    else
        std::printf("%d acceptance criteria FAILED\n", g_failures);
    return g_failures;
}
