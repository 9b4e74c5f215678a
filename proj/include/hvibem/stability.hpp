#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "hvibem/hvi.hpp"

namespace hvibem {

/// Family F_n -> F of convex perturbations. In fixed finite dimensions the
/// two epi-convergence hypotheses collapse to strong data convergence, so
/// members are generated by decaying data perturbations.
struct MoscoSequence {
    enum class Kind { LinearForm, Obstacle };
    Kind kind = Kind::LinearForm;
    int N = 8;
    std::function<ExtendedF(int)> member;  // n = 1..N
    ExtendedF limit;
};

/// Balances a linear u-functional against the constant interior direction
/// by shifting with a multiple of the mass functional.
Eigen::VectorXd balance_u_functional(const HviProblem& problem, const Eigen::VectorXd& g);

MoscoSequence make_linear_sequence(const HviProblem& problem, const ExtendedF& limit,
                                   const Eigen::VectorXd& perturb_u, const Eigen::VectorXd& perturb_v,
                                   const std::function<double(int)>& decay, int N);

MoscoSequence make_obstacle_sequence(const Eigen::VectorXd& box_lo, const Eigen::VectorXd& box_hi,
                                     const Eigen::VectorXd& perturb_lo, const Eigen::VectorXd& perturb_hi,
                                     const std::function<double(int)>& decay, int N);

/// Nodewise clamp max(lo, min(hi, u)): the recovery-sequence construction
/// for converging obstacle constraints.
Eigen::VectorXd mosco_recovery_cut(const Eigen::VectorXd& u, const Eigen::VectorXd& box_lo,
                                   const Eigen::VectorXd& box_hi);

struct StabilityReport {
    std::vector<double> errors;       // ||state(F_n) - state(F)||_E
    std::vector<double> state_norms;  // ||state(F_n)||_E
    std::vector<int> active_set_sizes;
    double limit_state_norm = 0.0;
    bool monotone_tail = true;
    double rate_estimate = 0.0;  // median error ratio, recorded not asserted
};

StabilityReport run_stability_experiment(const HviProblem& base, const MoscoSequence& seq,
                                         const SolveOptions& opts = {}, int workers = 1);

}  // namespace hvibem
