// Experiment front-end: solve / stability / control / field / spectra / list.
#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "hvibem/config.hpp"
#include "hvibem/exterior.hpp"
#include "hvibem/fixtures.hpp"
#include "hvibem/stability.hpp"

using namespace hvibem;
using ordered_json = nlohmann::ordered_json;

namespace {

struct CliArgs {
    std::string config_path;
    std::string fixture;
    std::string out_dir;
    std::string mesh_in;
    std::string mesh_out;
    long long seed = -1;
    int workers = 0;
    bool dump_operators = false;
};

Config load_config(const CliArgs& args) {
    Config cfg = args.config_path.empty() ? Config() : Config::parse_file(args.config_path);
    if (!args.fixture.empty()) cfg.set("fixture", args.fixture);
    if (!args.out_dir.empty()) cfg.set("out", args.out_dir);
    if (args.seed >= 0) cfg.set("seed", std::to_string(args.seed));
    if (args.workers > 0) cfg.set("workers", std::to_string(args.workers));
    return cfg;
}

void write_text(const std::filesystem::path& p, const std::string& text) {
    std::ofstream os(p);
    if (!os) throw std::runtime_error("cannot write '" + p.string() + "'");
    os << text;
}

std::filesystem::path prepare_out(const Config& cfg, const RunConfig& rc) {
    std::filesystem::path out(rc.out_dir);
    std::filesystem::create_directories(out);
    write_text(out / "resolved_config.txt", cfg.resolved());
    return out;
}

FixtureSetup fixture_with_overrides(const RunConfig& rc) {
    FixtureSetup fx = make_fixture(rc.fixture, rc.h);
    if (rc.mu1 >= 0.0)
        fx.law = FrictionLaw(rc.mu1, rc.mu2, rc.alpha > 0.0 ? rc.alpha : fx.law->alpha());
    else if (rc.alpha > 0.0)
        fx.law = FrictionLaw(fx.law->mu1(), fx.law->mu2(), rc.alpha);
    if (rc.nl_a >= 0.0)
        fx.nl = rc.nl_b > 0.0 ? NonlinearityP::rational(rc.nl_a, rc.nl_b)
                              : NonlinearityP::linear(rc.nl_a);
    return fx;
}

SolveOptions solve_options(const RunConfig& rc) {
    SolveOptions so;
    so.outer_tol = rc.outer_tol;
    so.inner_tol = rc.inner_tol;
    so.max_outer = rc.max_outer;
    so.seed = rc.seed;
    return so;
}

ordered_json vector_json(const Eigen::VectorXd& v) {
    ordered_json a = ordered_json::array();
    for (int i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
}

int cmd_list() {
    for (const auto& [name, desc] : list_fixtures()) std::cout << name << " : " << desc << "\n";
    return 0;
}

int cmd_solve(const CliArgs& args) {
    const Config cfg = load_config(args);
    const RunConfig rc = RunConfig::from_config(cfg);
    FixtureSetup fx = fixture_with_overrides(rc);
    if (!args.mesh_in.empty()) {
        std::ifstream in(args.mesh_in);
        if (!in) throw ConfigError("cannot open mesh file '" + args.mesh_in + "'");
        fx.mesh = std::make_shared<Mesh2D>(read_mesh(in));
        fx.dofs = dof_maps(*fx.mesh);
    }
    const auto out = prepare_out(cfg, rc);
    if (!args.mesh_out.empty()) {
        std::ofstream os(args.mesh_out);
        write_mesh(os, *fx.mesh);
    }

    HviProblem problem = make_fixture_problem(fx);
    const SmallnessReport rep = problem.smallness_check();
    const HviSolution sol = problem.solve(solve_options(rc));

    ordered_json j;
    j["fixture"] = rc.fixture;
    j["n_u"] = problem.n_u();
    j["n_v"] = problem.n_v();
    j["converged"] = sol.converged;
    j["outer_iterations"] = sol.outer_iterations;
    j["diagnostics"]["c_A"] = rep.c_A_discrete;
    j["diagnostics"]["gamma_norm_sq"] = rep.gamma_norm_sq;
    j["diagnostics"]["c_J"] = rep.c_J;
    j["diagnostics"]["margin"] = rep.margin;
    j["diagnostics"]["unique_certified"] = rep.unique_certified;
    j["diagnostics"]["theta"] = sol.contraction_factors;
    j["diagnostics"]["step_norms"] = sol.step_norms;
    j["diagnostics"]["residual"] = sol.residual;
    j["diagnostics"]["inner_first_order_residual"] = sol.inner_first_order_residual;
    j["energy"] = sol.energy;
    j["u"] = vector_json(sol.u);
    j["v"] = vector_json(sol.v);
    write_text(out / "solution.json", j.dump(2) + "\n");

    if (!sol.converged) {
        std::cerr << "solve did not converge\n";
        return 3;
    }
    std::cout << "solution written to " << (out / "solution.json").string() << "\n";
    return 0;
}

int cmd_stability(const CliArgs& args) {
    const Config cfg = load_config(args);
    RunConfig rc = RunConfig::from_config(cfg);
    if (rc.fixture == "square-nonmonotone")
        rc.fixture = rc.stability_kind == "obstacle" ? "stability-obstacle" : "stability-linear";
    const auto out = prepare_out(cfg, rc);
    const FixtureSetup fx = fixture_with_overrides(rc);
    HviProblem problem = make_fixture_problem(fx);

    MoscoSequence seq;
    if (rc.stability_kind == "linear") {
        Eigen::VectorXd pu(problem.n_u()), pv(problem.n_v());
        for (int i = 0; i < pu.size(); ++i) pu(i) = std::sin(1.7 * i + 0.3);
        for (int i = 0; i < pv.size(); ++i) pv(i) = std::cos(2.3 * i);
        seq = make_linear_sequence(problem, problem.extended_F(), 0.5 * pu, 0.05 * pv,
                                   [](int n) { return 0.5 * std::pow(10.0, 1.0 - n); }, rc.stability_N);
    } else {
        const int n = problem.n_u();
        Eigen::VectorXd lo = Eigen::VectorXd::Constant(n, -0.04);
        Eigen::VectorXd hi = Eigen::VectorXd::Constant(n, 0.04);
        Eigen::VectorXd plo(n), phi(n);
        for (int i = 0; i < n; ++i) {
            plo(i) = -0.03 * (0.5 + 0.5 * std::sin(0.9 * i));
            phi(i) = 0.03 * (0.5 + 0.5 * std::cos(1.3 * i));
        }
        seq = make_obstacle_sequence(lo, hi, plo, phi,
                                     [](int n2) { return std::pow(4.0, -(n2 - 1)); }, rc.stability_N);
    }
    const StabilityReport rep = run_stability_experiment(problem, seq, solve_options(rc), rc.workers);

    std::ostringstream csv;
    csv.precision(17);
    csv << "n,error,state_norm,active_set_size\n";
    for (std::size_t i = 0; i < rep.errors.size(); ++i)
        csv << (i + 1) << "," << rep.errors[i] << "," << rep.state_norms[i] << ","
            << rep.active_set_sizes[i] << "\n";
    write_text(out / "stability.csv", csv.str());
    std::cout << "stability table written to " << (out / "stability.csv").string() << "\n";
    return 0;
}

int cmd_control(const CliArgs& args) {
    const Config cfg = load_config(args);
    RunConfig rc = RunConfig::from_config(cfg);
    const std::string name = rc.control_kind == "1"   ? "ocp1-inverse-crime"
                             : rc.control_kind == "2" ? "ocp2-boundary"
                             : rc.control_kind == "3" ? "ocp3-inverse-crime"
                                                      : "ocp4-obstacle";
    if (rc.fixture == "square-nonmonotone") rc.fixture = name;
    const auto out = prepare_out(cfg, rc);

    ControlFixture cf = make_control_fixture(name, rc.h);
    if (rc.control_rho > 0.0) cf.rho = rc.control_rho;
    HviProblem base = make_fixture_problem(cf.base);
    SolveOptions so = solve_options(rc);
    so.check_residual = false;

    auto run_once = [&](double rho) {
        ControlSpec spec =
            ControlDriver::inverse_crime_setup(base, cf.kind, cf.true_control, rho, cf.grid, so);
        ControlDriver driver(base, spec);
        MinimizeOptions mo;
        mo.state_opts = so;
        mo.max_evals = rc.control_max_evals;
        return driver.minimize(mo);
    };

    const ControlResult result = run_once(cf.rho);
    ControlSpec err_spec;
    err_spec.kind = cf.kind;
    err_spec.grid = cf.grid;
    err_spec.rho = cf.rho;
    err_spec.target_u = Eigen::VectorXd::Zero(base.n_u());
    err_spec.target_v = Eigen::VectorXd::Zero(base.n_v());
    const ControlDriver err_driver(base, err_spec);
    const double rel_err = err_driver.relative_control_error(result.control, cf.true_control);

    ordered_json j;
    j["kind"] = rc.control_kind;
    j["rho"] = cf.rho;
    j["control"] = vector_json(result.control);
    j["true_control"] = vector_json(cf.true_control);
    j["relative_control_error"] = rel_err;
    j["cost_trajectory"] = result.cost_trajectory;
    j["final_cost"] = result.final_cost;
    j["final_misfit"] = result.final_misfit;
    j["state_solves"] = result.state_solves;
    j["budget_exhausted"] = result.budget_exhausted;
    write_text(out / "control_result.json", j.dump(2) + "\n");

    if (rc.control_rho_sweep) {
        std::ostringstream csv;
        csv.precision(17);
        csv << "rho,final_cost,final_misfit,control_error\n";
        for (double rho : {1e-2, 1e-4, 1e-8}) {
            const ControlResult r2 = run_once(rho);
            const double e2 = err_driver.relative_control_error(r2.control, cf.true_control);
            csv << rho << "," << r2.final_cost << "," << r2.final_misfit << "," << e2 << "\n";
        }
        write_text(out / "rho_sweep.csv", csv.str());
    }
    std::cout << "control result written to " << (out / "control_result.json").string() << "\n";
    return 0;
}

int cmd_field(const CliArgs& args) {
    const Config cfg = load_config(args);
    const RunConfig rc = RunConfig::from_config(cfg);
    const auto out = prepare_out(cfg, rc);
    const FixtureSetup fx = fixture_with_overrides(rc);
    HviProblem problem = make_fixture_problem(fx);
    const HviSolution sol = problem.solve(solve_options(rc));
    if (!sol.converged) {
        std::cerr << "solve did not converge\n";
        return 3;
    }
    const CauchyData cauchy = reconstruct_u2(sol, problem);
    const BoundaryMesh& bm = problem.boundary_ops().bm;

    Vec2 lo = bm.nodes[0], hi = bm.nodes[0];
    for (const Vec2& p : bm.nodes) {
        lo.x = std::min(lo.x, p.x);
        lo.y = std::min(lo.y, p.y);
        hi.x = std::max(hi.x, p.x);
        hi.y = std::max(hi.y, p.y);
    }
    const double diam = bm.diameter();
    const Vec2 c{0.5 * (lo.x + hi.x), 0.5 * (lo.y + hi.y)};
    const double half = 1.5 * diam;
    const double clearance = std::max(problem.mesh().h, 0.03 * diam);

    std::ostringstream csv;
    csv.precision(17);
    csv << "x,y,u2\n";
    const int g = rc.field_grid;
    for (int iy = 0; iy < g; ++iy)
        for (int ix = 0; ix < g; ++ix) {
            const Vec2 p{c.x - half + 2.0 * half * ix / (g - 1),
                         c.y - half + 2.0 * half * iy / (g - 1)};
            try {
                const Eigen::VectorXd val = evaluate_exterior(bm, cauchy, {p}, clearance);
                csv << p.x << "," << p.y << "," << val(0) << "\n";
            } catch (const std::invalid_argument&) {
                // inside the domain or too close to it; skip the grid point
            }
        }
    write_text(out / "field.csv", csv.str());
    std::cout << "field written to " << (out / "field.csv").string() << "\n";
    return 0;
}

int cmd_spectra(const CliArgs& args) {
    const Config cfg = load_config(args);
    const RunConfig rc = RunConfig::from_config(cfg);
    const auto out = prepare_out(cfg, rc);

    const double R = 0.25;
    const BoundaryMesh bm = BoundaryMesh::circle(R, rc.spectra_panels);
    const BoundaryOperatorSet ops = assemble_boundary_operators(bm);
    const SteklovOperator st = assemble_steklov(ops);

    std::ostringstream csv;
    csv.precision(17);
    csv << "mode,eigenvalue,oracle,rel_err\n";
    for (int mode = 0; mode <= 6; ++mode) {
        Eigen::VectorXd v(rc.spectra_panels);
        for (int k = 0; k < rc.spectra_panels; ++k)
            v(k) = mode == 0 ? 1.0 : std::cos(mode * 2.0 * M_PI * k / rc.spectra_panels);
        const double num = v.dot(st.S * v);
        const double den = v.dot(ops.mass_p1 * v);
        const double ev = num / den;
        const double oracle = circle_steklov_oracle(R, mode);
        csv << mode << "," << ev << "," << oracle << ","
            << (mode == 0 ? std::abs(ev) : std::abs(ev - oracle) / oracle) << "\n";
    }
    write_text(out / "spectra.csv", csv.str());
    if (args.dump_operators) {
        for (const auto& [name, mat] :
             {std::pair<const char*, const Eigen::MatrixXd*>{"V", &ops.V},
              {"K", &ops.K},
              {"W", &ops.W},
              {"S", &st.S}}) {
            std::ofstream os(out / (std::string(name) + ".csv"));
            dump_matrix_csv(os, *mat);
        }
    }
    std::cout << "spectra written to " << (out / "spectra.csv").string() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"FEM-BEM solver for a nonsmooth interface problem with a stability and control lab"};
    app.require_subcommand(1);
    app.fallthrough();

    CliArgs args;
    app.add_option("--config", args.config_path, "configuration file (key = value lines)");
    app.add_option("--fixture", args.fixture, "fixture name (see 'list')");
    app.add_option("--out", args.out_dir, "output directory");
    app.add_option("--seed", args.seed, "random seed for sampled diagnostics");
    app.add_option("--workers", args.workers, "worker budget for independent solves");

    auto* solve = app.add_subcommand("solve", "assemble and solve a fixture");
    solve->add_option("--mesh", args.mesh_in, "import a mesh in the plain-text format");
    solve->add_option("--export-mesh", args.mesh_out, "export the fixture mesh");
    auto* stability = app.add_subcommand("stability", "perturbation stability experiment");
    auto* control = app.add_subcommand("control", "optimal control experiment");
    auto* field = app.add_subcommand("field", "evaluate the exterior field on a grid");
    auto* spectra = app.add_subcommand("spectra", "boundary operator spectra on the circle");
    spectra->add_flag("--dump-operators", args.dump_operators,
                      "write the Galerkin matrices as CSV for cross-validation");
    auto* list = app.add_subcommand("list", "list shipped fixtures");

    CLI11_PARSE(app, argc, argv);

    try {
        if (list->parsed()) return cmd_list();
        if (solve->parsed()) return cmd_solve(args);
        if (stability->parsed()) return cmd_stability(args);
        if (control->parsed()) return cmd_control(args);
        if (field->parsed()) return cmd_field(args);
        if (spectra->parsed()) return cmd_spectra(args);
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "solve failure: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
