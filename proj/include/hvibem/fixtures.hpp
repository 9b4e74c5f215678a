#pragma once

#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hvibem/control.hpp"
#include "hvibem/hvi.hpp"

namespace hvibem {

/// Everything needed to assemble one of the shipped example problems.
struct FixtureSetup {
    std::string name;
    std::shared_ptr<Mesh2D> mesh;
    DofMaps dofs;
    std::optional<NonlinearityP> nl;
    std::optional<FrictionLaw> law;
    ProblemData data;
    ExtendedF F;
    bool friction_enabled = true;
    double capacity_scale = 1.0;  // applied domain rescale factor
};

std::vector<std::pair<std::string, std::string>> list_fixtures();

/// h_override <= 0 keeps the fixture default mesh size.
FixtureSetup make_fixture(const std::string& name, double h_override = 0.0);

/// Assembles the problem and balances the load against the constant
/// direction (exact in the discrete pairing) unless a box is present.
HviProblem make_fixture_problem(const FixtureSetup& setup);

struct ControlFixture {
    FixtureSetup base;
    ControlKind kind = ControlKind::Distributed;
    ControlGrid grid;
    double rho = 1e-8;
    Eigen::VectorXd true_control;
};

/// ocp1-inverse-crime, ocp2-boundary, ocp3-inverse-crime, ocp4-obstacle.
ControlFixture make_control_fixture(const std::string& name, double h_override = 0.0);

}  // namespace hvibem
