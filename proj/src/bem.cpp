#include "hvibem/bem.hpp"

#include <cmath>
#include <ostream>
#include <stdexcept>

namespace hvibem {

namespace {

constexpr double kInv2Pi = 0.15915494309189535;  // 1/(2 pi)

// 8-point Gauss-Legendre rule on [0,1].
constexpr int kGaussN = 8;
constexpr double kGaussX[kGaussN] = {
    0.019855071751231856, 0.101666761293186630, 0.237233795041835507, 0.408282678752175097,
    0.591717321247824903, 0.762766204958164493, 0.898333238706813370, 0.980144928248768144};
constexpr double kGaussW[kGaussN] = {
    0.050614268145188129, 0.111190517226687235, 0.156853322938943644, 0.181341891689180991,
    0.181341891689180991, 0.156853322938943644, 0.111190517226687235, 0.050614268145188129};

// integral of (1/2) log(s^2 + b^2) ds
double log_antiderivative(double s, double b) {
    if (b == 0.0) return s == 0.0 ? 0.0 : s * std::log(std::abs(s)) - s;
    return 0.5 * s * std::log(s * s + b * b) - s + b * std::atan(s / b);
}

// integral over the panel parameter t in [0, L] of log|x - y(t)|, with the
// field point expressed in panel coordinates (a along, b across).
double inner_log_integral(double a, double b, double L) {
    return log_antiderivative(L - a, b) - log_antiderivative(-a, b);
}

struct PanelFrame {
    Vec2 origin;
    Vec2 dir;   // unit tangent
    double len;
};

PanelFrame frame_of(const BoundaryMesh& bm, int k) {
    PanelFrame f;
    f.origin = bm.panel_start(k);
    const Vec2 d = bm.panel_end(k) - bm.panel_start(k);
    f.len = norm(d);
    f.dir = (1.0 / f.len) * d;
    return f;
}

}  // namespace

BoundaryOperatorSet assemble_boundary_operators(const BoundaryMesh& bm) {
    const int n = bm.n_panels();
    if (n < 3) throw std::invalid_argument("assemble_boundary_operators: too few panels");
    if (bm.diameter() >= 1.0)
        throw std::invalid_argument(
            "assemble_boundary_operators: boundary diameter must be < 1; rescale first");

    BoundaryOperatorSet ops;
    ops.bm = bm;
    ops.V = Eigen::MatrixXd::Zero(n, n);
    ops.K = Eigen::MatrixXd::Zero(n, n);
    ops.M = Eigen::MatrixXd::Zero(n, n);
    ops.mass_p1 = Eigen::MatrixXd::Zero(n, n);
    ops.panel_len.resize(n);

    std::vector<PanelFrame> frames(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) frames[static_cast<std::size_t>(k)] = frame_of(bm, k);

    for (int k = 0; k < n; ++k) {
        const PanelFrame& fk = frames[static_cast<std::size_t>(k)];
        ops.panel_len(k) = fk.len;
        const int k1 = (k + 1) % n;
        ops.M(k, k) += 0.5 * fk.len;
        ops.M(k, k1) += 0.5 * fk.len;
        ops.mass_p1(k, k) += fk.len / 3.0;
        ops.mass_p1(k1, k1) += fk.len / 3.0;
        ops.mass_p1(k, k1) += fk.len / 6.0;
        ops.mass_p1(k1, k) += fk.len / 6.0;
    }

    // Outer Gauss points on panel k against analytic inner integrals on
    // panel l. The double layer kernel lives in the panel-l frame, where
    // (x - y) . n_l is the constant cross-panel offset.
    for (int k = 0; k < n; ++k) {
        const PanelFrame& fk = frames[static_cast<std::size_t>(k)];
        for (int l = 0; l < n; ++l) {
            const PanelFrame& fl = frames[static_cast<std::size_t>(l)];
            const Vec2 nl{fl.dir.y, -fl.dir.x};
            const int l1 = (l + 1) % n;

            if (l == k) {
                // Self pair: the outer integral of the inner log integral
                // has the closed form L^2 log L - (3/2) L^2, and the double
                // layer kernel vanishes on a flat panel.
                const double L = fk.len;
                ops.V(k, k) += -kInv2Pi * (L * L * std::log(L) - 1.5 * L * L);
                continue;
            }

            double v_acc = 0.0, k0_acc = 0.0, k1_acc = 0.0;
            for (int q = 0; q < kGaussN; ++q) {
                const Vec2 x = fk.origin + (kGaussX[q] * fk.len) * fk.dir;
                const Vec2 w{x.x - fl.origin.x, x.y - fl.origin.y};
                const double a = dot(w, fl.dir);
                const double b = dot(w, nl);
                v_acc += kGaussW[q] * inner_log_integral(a, b, fl.len);

                if (std::abs(b) > 1e-14) {
                    const double atl = std::atan((fl.len - a) / b);
                    const double at0 = std::atan(-a / b);
                    const double i0 = (atl - at0) / b;
                    const double i1 = 0.5 * std::log(((fl.len - a) * (fl.len - a) + b * b) /
                                                     (a * a + b * b)) +
                                      a * i0;
                    // P1 shapes 1 - t/L and t/L on the source panel.
                    k0_acc += kGaussW[q] * b * (i0 - i1 / fl.len);
                    k1_acc += kGaussW[q] * b * (i1 / fl.len);
                }
            }
            ops.V(k, l) += -kInv2Pi * fk.len * v_acc;
            ops.K(k, l) += kInv2Pi * fk.len * k0_acc;
            ops.K(k, l1) += kInv2Pi * fk.len * k1_acc;
        }
    }
    ops.V = 0.5 * (ops.V + ops.V.transpose().eval());

    // Hypersingular part by integration by parts: the arc-length derivative
    // of a P1 trace is P0, so W = D^T V D with the panel difference map D.
    Eigen::MatrixXd D = Eigen::MatrixXd::Zero(n, n);
    for (int k = 0; k < n; ++k) {
        D(k, k) = -1.0 / ops.panel_len(k);
        D(k, (k + 1) % n) = 1.0 / ops.panel_len(k);
    }
    ops.W = D.transpose() * ops.V * D;
    ops.W = 0.5 * (ops.W + ops.W.transpose().eval());
    return ops;
}

SteklovOperator assemble_steklov(const BoundaryOperatorSet& ops) {
    const int n = ops.n_panels();
    SteklovOperator st;
    st.B = 0.5 * ops.M - ops.K;

    Eigen::LLT<Eigen::MatrixXd> llt(ops.V);
    if (llt.info() != Eigen::Success)
        throw std::runtime_error(
            "assemble_steklov: single layer factorization failed (capacity violation or broken assembly)");

    st.Vinv_B = llt.solve(st.B);
    st.Vinv_b = llt.solve(ops.panel_len);
    st.b_Vinv_b = ops.panel_len.dot(st.Vinv_b);
    if (!(st.b_Vinv_b > 0.0))
        throw std::runtime_error("assemble_steklov: single layer lost definiteness");

    const Eigen::VectorXd c = st.B.transpose() * st.Vinv_b;  // = B^T V^{-1} b
    Eigen::MatrixXd S = ops.W + st.B.transpose() * st.Vinv_B - (c * c.transpose()) / st.b_Vinv_b;
    st.asymmetry_defect = (S - S.transpose()).cwiseAbs().maxCoeff();
    st.S = 0.5 * (S + S.transpose());
    (void)n;
    return st;
}

double SteklovOperator::radiation_constant(const Eigen::VectorXd& v) const {
    return Vinv_b.dot(B * v) / b_Vinv_b;
}

Eigen::VectorXd SteklovOperator::neumann_density(const Eigen::VectorXd& v) const {
    return radiation_constant(v) * Vinv_b - Vinv_B * v;
}

double circle_steklov_oracle(double radius, int mode) {
    if (!(radius > 0.0) || mode < 0) throw std::invalid_argument("circle_steklov_oracle: bad arguments");
    return mode == 0 ? 0.0 : static_cast<double>(mode) / radius;
}

double discrete_cS(SteklovOperator& st, const BoundaryOperatorSet& ops) {
    const int n = static_cast<int>(st.S.rows());
    // Orthonormal basis of the complement of the constant vector.
    Eigen::MatrixXd one = Eigen::MatrixXd::Ones(n, 1);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(one);
    Eigen::MatrixXd Q = qr.householderQ();
    Eigen::MatrixXd C = Q.rightCols(n - 1);

    const Eigen::MatrixXd N = ops.W + ops.mass_p1;
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(
        C.transpose() * st.S * C, C.transpose() * N * C);
    if (es.info() != Eigen::Success) throw std::runtime_error("discrete_cS: eigensolver failed");
    st.c_S_discrete = es.eigenvalues().minCoeff();
    return st.c_S_discrete;
}

void dump_matrix_csv(std::ostream& os, const Eigen::MatrixXd& m) {
    os.precision(17);
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            if (j) os << ",";
            os << m(i, j);
        }
        os << "\n";
    }
}

}  // namespace hvibem
