#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "hvibem/hvi.hpp"

namespace hvibem {

enum class ControlKind { Distributed, Boundary, DistributedBoundary, Obstacle };

/// Coarse control discretization: an nx-by-ny patch grid over the domain
/// bounding box for volume quantities, and arc-length segments for
/// boundary quantities. Volume and boundary control bases are balanced
/// against the constant direction; obstacle bases are plain indicators.
struct ControlGrid {
    int nx = 4;
    int ny = 4;
    int n_boundary_segments = 8;
};

struct ControlSpec {
    ControlKind kind = ControlKind::Distributed;
    Eigen::VectorXd target_u;
    Eigen::VectorXd target_v;
    double rho = 1e-4;
    ControlGrid grid;
};

struct MinimizeOptions {
    int max_evals = 4000;
    double fd_step = 1e-5;
    double grad_tol = 1e-7;
    double step_tol = 1e-11;
    std::optional<Eigen::VectorXd> start;
    SolveOptions state_opts;
};

struct ControlResult {
    Eigen::VectorXd control;
    std::vector<double> cost_trajectory;  // accepted iterates, nonincreasing
    double final_cost = 0.0;
    double final_misfit = 0.0;
    HviSolution final_state;
    int state_solves = 0;
    bool budget_exhausted = false;
};

/// Driver around the control-to-state map of a fixed template problem.
class ControlDriver {
  public:
    ControlDriver(const HviProblem& base, ControlSpec spec);

    int control_dim() const;
    const ControlSpec& spec() const { return spec_; }
    /// Nodal prolongation of the volume part of a control vector.
    Eigen::VectorXd prolong_f(const Eigen::VectorXd& c) const;
    Eigen::VectorXd prolong_q(const Eigen::VectorXd& c) const;
    void split_obstacle(const Eigen::VectorXd& c, Eigen::VectorXd& lo_nodal,
                        Eigen::VectorXd& hi_nodal) const;
    /// Feasibility projection for the obstacle kind (lo <= hi patchwise).
    Eigen::VectorXd project_admissible(const Eigen::VectorXd& c) const;

    HviSolution control_to_state(const Eigen::VectorXd& c, const SolveOptions& opts = {}) const;
    double cost(const Eigen::VectorXd& c, const SolveOptions& opts = {}) const;
    double control_norm_sq(const Eigen::VectorXd& c) const;
    /// Relative distance of two controls in the prolonged field metric (the
    /// balanced bases make patchwise constants invisible by construction).
    double relative_control_error(const Eigen::VectorXd& c, const Eigen::VectorXd& c_ref) const;

    ControlResult minimize(const MinimizeOptions& opts = {}) const;

    /// Builds the target from a known control, making near-zero misfit
    /// attainable by construction.
    static ControlSpec inverse_crime_setup(const HviProblem& base, ControlKind kind,
                                           const Eigen::VectorXd& true_control, double rho,
                                           const ControlGrid& grid = {},
                                           const SolveOptions& opts = {});

  private:
    const HviProblem* base_;
    ControlSpec spec_;
    Eigen::MatrixXd Pf_;     // patch -> nodal f values, balanced columns
    Eigen::MatrixXd Pq_;     // segment -> boundary nodal q values, balanced
    Eigen::MatrixXd Pobs_;   // patch -> nodal obstacle values
    Eigen::VectorXd base_lambda_u_, base_lambda_v_;
    Eigen::MatrixXd h2_metric_;  // discrete H2 surrogate for obstacle costs

    void apply_control(HviProblem& work, const Eigen::VectorXd& c) const;
};

}  // namespace hvibem
