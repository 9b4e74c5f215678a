#include "hvibem/stability.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <thread>

namespace hvibem {

Eigen::VectorXd balance_u_functional(const HviProblem& problem, const Eigen::VectorXd& g) {
    const Eigen::VectorXd m = problem.interior().lumped_mass();
    if (g.size() != m.size()) throw std::invalid_argument("balance_u_functional: size mismatch");
    return g - (g.sum() / m.sum()) * m;
}

MoscoSequence make_linear_sequence(const HviProblem& problem, const ExtendedF& limit,
                                   const Eigen::VectorXd& perturb_u, const Eigen::VectorXd& perturb_v,
                                   const std::function<double(int)>& decay, int N) {
    if (N < 1) throw std::invalid_argument("make_linear_sequence: N must be positive");
    MoscoSequence seq;
    seq.kind = MoscoSequence::Kind::LinearForm;
    seq.N = N;
    seq.limit = limit;
    const Eigen::VectorXd du = balance_u_functional(problem, perturb_u);
    const Eigen::VectorXd dv = perturb_v;
    const int n_u = problem.n_u();
    const int n_v = problem.n_v();
    seq.member = [limit, du, dv, decay, n_u, n_v](int n) {
        ExtendedF F = limit;
        if (F.linear_u.size() == 0) F.linear_u = Eigen::VectorXd::Zero(n_u);
        if (F.linear_v.size() == 0) F.linear_v = Eigen::VectorXd::Zero(n_v);
        F.linear_u += decay(n) * du;
        F.linear_v += decay(n) * dv;
        return F;
    };
    return seq;
}

MoscoSequence make_obstacle_sequence(const Eigen::VectorXd& box_lo, const Eigen::VectorXd& box_hi,
                                     const Eigen::VectorXd& perturb_lo, const Eigen::VectorXd& perturb_hi,
                                     const std::function<double(int)>& decay, int N) {
    if (N < 1) throw std::invalid_argument("make_obstacle_sequence: N must be positive");
    for (int i = 0; i < box_lo.size(); ++i)
        if (!(box_lo(i) <= box_hi(i)))
            throw std::invalid_argument("make_obstacle_sequence: limit box violates lo <= hi");
    MoscoSequence seq;
    seq.kind = MoscoSequence::Kind::Obstacle;
    seq.N = N;
    seq.limit.has_box = true;
    seq.limit.box_lo = box_lo;
    seq.limit.box_hi = box_hi;
    seq.member = [box_lo, box_hi, perturb_lo, perturb_hi, decay](int n) {
        ExtendedF F;
        F.has_box = true;
        F.box_lo = box_lo + decay(n) * perturb_lo;
        F.box_hi = box_hi + decay(n) * perturb_hi;
        for (int i = 0; i < F.box_lo.size(); ++i)
            F.box_lo(i) = std::min(F.box_lo(i), F.box_hi(i));
        return F;
    };
    return seq;
}

Eigen::VectorXd mosco_recovery_cut(const Eigen::VectorXd& u, const Eigen::VectorXd& box_lo,
                                   const Eigen::VectorXd& box_hi) {
    if (u.size() != box_lo.size() || u.size() != box_hi.size())
        throw std::invalid_argument("mosco_recovery_cut: size mismatch");
    Eigen::VectorXd out(u.size());
    for (int i = 0; i < u.size(); ++i) {
        if (!(box_lo(i) <= box_hi(i))) throw std::invalid_argument("mosco_recovery_cut: lo > hi");
        out(i) = std::max(box_lo(i), std::min(box_hi(i), u(i)));
    }
    return out;
}

StabilityReport run_stability_experiment(const HviProblem& base, const MoscoSequence& seq,
                                         const SolveOptions& opts, int workers) {
    StabilityReport rep;
    HviProblem work = base;
    work.smallness_check();  // fill the cache before the copies below

    work.set_extended_F(seq.limit);
    const HviSolution limit_sol = work.solve(opts);
    if (!limit_sol.converged) throw std::runtime_error("run_stability_experiment: limit solve failed");
    const Eigen::VectorXd x_limit = work.stack(limit_sol.u, limit_sol.v);
    rep.limit_state_norm = work.e_norm(x_limit);

    rep.errors.assign(static_cast<std::size_t>(seq.N), 0.0);
    rep.state_norms.assign(static_cast<std::size_t>(seq.N), 0.0);
    rep.active_set_sizes.assign(static_cast<std::size_t>(seq.N), 0);
    std::vector<std::string> failures(static_cast<std::size_t>(seq.N));

    auto run_member = [&](int n) {
        try {
            HviProblem member = work;
            member.set_extended_F(seq.member(n));
            SolveOptions warm = opts;
            warm.start = x_limit;  // members shrink toward the limit state
            const HviSolution sol = member.solve(warm);
            if (!sol.converged) throw std::runtime_error("member solve did not converge");
            const Eigen::VectorXd x = member.stack(sol.u, sol.v);
            rep.errors[static_cast<std::size_t>(n - 1)] = member.e_norm(x - x_limit);
            rep.state_norms[static_cast<std::size_t>(n - 1)] = member.e_norm(x);

            int active = 0;
            if (seq.kind == MoscoSequence::Kind::Obstacle) {
                const ExtendedF& F = member.extended_F();
                for (int i = 0; i < member.n_u(); ++i) {
                    const double span = std::max(1.0, F.box_hi(i) - F.box_lo(i));
                    if (sol.u(i) <= F.box_lo(i) + 1e-10 * span ||
                        sol.u(i) >= F.box_hi(i) - 1e-10 * span)
                        ++active;
                }
            }
            rep.active_set_sizes[static_cast<std::size_t>(n - 1)] = active;
        } catch (const std::exception& e) {
            failures[static_cast<std::size_t>(n - 1)] = e.what();
        }
    };

    workers = std::max(1, workers);
    if (workers == 1) {
        for (int n = 1; n <= seq.N; ++n) run_member(n);
    } else {
        for (int n0 = 1; n0 <= seq.N; n0 += workers) {
            std::vector<std::thread> pool;
            for (int n = n0; n <= std::min(seq.N, n0 + workers - 1); ++n)
                pool.emplace_back(run_member, n);
            for (auto& t : pool) t.join();
        }
    }
    for (const std::string& f : failures)
        if (!f.empty()) throw std::runtime_error("run_stability_experiment: " + f);

    for (std::size_t i = rep.errors.size() / 2; i + 1 < rep.errors.size(); ++i)
        if (rep.errors[i + 1] > rep.errors[i] * 1.05 + 1e-14) rep.monotone_tail = false;

    std::vector<double> ratios;
    for (std::size_t i = 0; i + 1 < rep.errors.size(); ++i)
        if (rep.errors[i] > 1e-300) ratios.push_back(rep.errors[i + 1] / rep.errors[i]);
    if (!ratios.empty()) {
        std::sort(ratios.begin(), ratios.end());
        rep.rate_estimate = ratios[ratios.size() / 2];
    }
    return rep;
}

}  // namespace hvibem
