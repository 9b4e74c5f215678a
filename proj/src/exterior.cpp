#include "hvibem/exterior.hpp"

#include <cmath>
#include <stdexcept>

namespace hvibem {

namespace {

constexpr double kInv2Pi = 0.15915494309189535;

constexpr int kGaussN = 8;
constexpr double kGaussX[kGaussN] = {
    0.019855071751231856, 0.101666761293186630, 0.237233795041835507, 0.408282678752175097,
    0.591717321247824903, 0.762766204958164493, 0.898333238706813370, 0.980144928248768144};
constexpr double kGaussW[kGaussN] = {
    0.050614268145188129, 0.111190517226687235, 0.156853322938943644, 0.181341891689180991,
    0.181341891689180991, 0.156853322938943644, 0.111190517226687235, 0.050614268145188129};

bool inside_polygon(const std::vector<Vec2>& poly, Vec2 p) {
    bool inside = false;
    const int n = static_cast<int>(poly.size());
    for (int i = 0, j = n - 1; i < n; j = i++) {
        const Vec2& a = poly[static_cast<std::size_t>(i)];
        const Vec2& b = poly[static_cast<std::size_t>(j)];
        if ((a.y > p.y) != (b.y > p.y)) {
            const double xi = (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x;
            if (p.x < xi) inside = !inside;
        }
    }
    return inside;
}

double dist_to_boundary(const BoundaryMesh& bm, Vec2 p) {
    double dmin = std::numeric_limits<double>::max();
    for (int k = 0; k < bm.n_panels(); ++k) {
        const Vec2 a = bm.panel_start(k), b = bm.panel_end(k);
        const Vec2 ab = b - a;
        double t = dot(p - a, ab) / dot(ab, ab);
        t = std::clamp(t, 0.0, 1.0);
        dmin = std::min(dmin, norm(p - (a + t * ab)));
    }
    return dmin;
}

double potential_at(const BoundaryMesh& bm, const CauchyData& data, Vec2 x) {
    double val = data.a;
    const int np = bm.n_panels();
    for (int k = 0; k < np; ++k) {
        const Vec2 a = bm.panel_start(k), b = bm.panel_end(k);
        const double len = bm.panel_length(k);
        const Vec2 nrm = bm.outward_normal(k);
        const double v0 = data.dirichlet(k);
        const double v1 = data.dirichlet((k + 1) % np);
        double acc = 0.0;
        for (int q = 0; q < kGaussN; ++q) {
            const Vec2 y = a + kGaussX[q] * (b - a);
            const Vec2 r = x - y;
            const double r2 = dot(r, r);
            const double trace = v0 + kGaussX[q] * (v1 - v0);
            // double layer of the P1 trace minus single layer of the P0 density
            acc += kGaussW[q] * (trace * dot(r, nrm) / r2 + 0.5 * data.neumann(k) * std::log(r2));
        }
        val += kInv2Pi * len * acc;
    }
    return val;
}

}  // namespace

Eigen::VectorXd evaluate_exterior(const BoundaryMesh& bm, const CauchyData& data,
                                  const std::vector<Vec2>& points, double min_dist) {
    if (data.dirichlet.size() != bm.n_panels() || data.neumann.size() != bm.n_panels())
        throw std::invalid_argument("evaluate_exterior: Cauchy data size mismatch");
    Eigen::VectorXd out(static_cast<Eigen::Index>(points.size()));
    for (std::size_t i = 0; i < points.size(); ++i) {
        const Vec2 p = points[i];
        if (inside_polygon(bm.nodes, p))
            throw std::invalid_argument("evaluate_exterior: point lies inside the domain");
        if (dist_to_boundary(bm, p) <= min_dist)
            throw std::invalid_argument("evaluate_exterior: point too close to the boundary");
        out(static_cast<Eigen::Index>(i)) = potential_at(bm, data, p);
    }
    return out;
}

CauchyData reconstruct_u2(const HviSolution& sol, const HviProblem& problem) {
    CauchyData data;
    const Eigen::VectorXd x = problem.stack(sol.u, sol.v);
    data.dirichlet = problem.boundary_comb(x);
    data.neumann = problem.steklov().neumann_density(data.dirichlet);
    data.a = problem.steklov().radiation_constant(data.dirichlet);

    // Far-circle average of the raw potential; zero in exact arithmetic
    // because the density carries no net flux.
    const BoundaryMesh& bm = problem.boundary_ops().bm;
    Vec2 centroid{0.0, 0.0};
    for (const Vec2& p : bm.nodes) centroid = centroid + (1.0 / bm.n_panels()) * p;
    const double rho = 6.0 * bm.diameter();
    double acc = 0.0;
    const int nsamp = 32;
    for (int s = 0; s < nsamp; ++s) {
        const double th = 2.0 * M_PI * s / nsamp;
        const Vec2 p{centroid.x + rho * std::cos(th), centroid.y + rho * std::sin(th)};
        acc += potential_at(bm, data, p) - data.a;
    }
    data.far_field_defect = std::abs(acc / nsamp);
    return data;
}

TransmissionReport transmission_residuals(const HviSolution& sol, const HviProblem& problem,
                                          const ProblemData& data, int n_arcs) {
    TransmissionReport rep;
    const Mesh2D& mesh = problem.mesh();
    const DofMaps& dofs = problem.dofs();
    const int nb = mesh.n_boundary;
    const CauchyData cauchy = reconstruct_u2(sol, problem);

    // Trace jump on the non-contact part: the contact trace extends by
    // zero, so the jump is identically zero by construction; evaluate it
    // anyway from the assembled boundary trace.
    const Eigen::VectorXd comb = cauchy.dirichlet;
    for (int k = 0; k < nb; ++k) {
        const BoundaryPart prev = mesh.boundary_edges[static_cast<std::size_t>((k + nb - 1) % nb)].part;
        const BoundaryPart next = mesh.boundary_edges[static_cast<std::size_t>(k)].part;
        if (prev == BoundaryPart::T || next == BoundaryPart::T)
            rep.dirichlet_jump = std::max(rep.dirichlet_jump, std::abs(comb(k) - sol.u(k)));
    }

    // Elementwise interior conormal flux per boundary edge.
    Eigen::VectorXd flux(nb);
    flux.setZero();
    const NonlinearityP& nl = problem.interior().nonlinearity();
    for (int k = 0; k < nb; ++k) {
        const int a = k, b = (k + 1) % nb;
        bool found = false;
        for (const auto& t : mesh.triangles) {
            int ia = -1, ib = -1;
            for (int j = 0; j < 3; ++j) {
                if (t[static_cast<std::size_t>(j)] == a) ia = j;
                if (t[static_cast<std::size_t>(j)] == b) ib = j;
            }
            if (ia < 0 || ib < 0) continue;
            const Vec2 p0 = mesh.nodes[static_cast<std::size_t>(t[0])];
            const Vec2 p1 = mesh.nodes[static_cast<std::size_t>(t[1])];
            const Vec2 p2 = mesh.nodes[static_cast<std::size_t>(t[2])];
            const double twice_area = cross(p1 - p0, p2 - p0);
            const std::array<Vec2, 3> grad{(1.0 / twice_area) * Vec2{p1.y - p2.y, p2.x - p1.x},
                                           (1.0 / twice_area) * Vec2{p2.y - p0.y, p0.x - p2.x},
                                           (1.0 / twice_area) * Vec2{p0.y - p1.y, p1.x - p0.x}};
            Vec2 gu{0.0, 0.0};
            for (int j = 0; j < 3; ++j)
                gu = gu + sol.u(t[static_cast<std::size_t>(j)]) * grad[static_cast<std::size_t>(j)];
            const Vec2 tangent = mesh.nodes[static_cast<std::size_t>(b)] - mesh.nodes[static_cast<std::size_t>(a)];
            const double len = norm(tangent);
            const Vec2 nrm{tangent.y / len, -tangent.x / len};
            flux(k) = nl.p(norm(gu)) * dot(gu, nrm);
            found = true;
            break;
        }
        if (!found) throw std::runtime_error("transmission_residuals: boundary edge without triangle");
    }

    // Flux balance p du1/dn - du2/dn - q integrated over fixed arcs.
    if (n_arcs < 1) throw std::invalid_argument("transmission_residuals: n_arcs must be positive");
    std::vector<double> cum(static_cast<std::size_t>(nb + 1), 0.0);
    for (int k = 0; k < nb; ++k)
        cum[static_cast<std::size_t>(k + 1)] =
            cum[static_cast<std::size_t>(k)] + norm(mesh.nodes[static_cast<std::size_t>((k + 1) % nb)] -
                                                    mesh.nodes[static_cast<std::size_t>(k)]);
    const double total_len = cum[static_cast<std::size_t>(nb)];
    std::vector<double> arc_int(static_cast<std::size_t>(n_arcs), 0.0);
    std::vector<double> arc_len(static_cast<std::size_t>(n_arcs), 0.0);
    for (int k = 0; k < nb; ++k) {
        const double mid_s = 0.5 * (cum[static_cast<std::size_t>(k)] + cum[static_cast<std::size_t>(k + 1)]);
        const int a = std::min(n_arcs - 1, static_cast<int>(mid_s / total_len * n_arcs));
        const double len = cum[static_cast<std::size_t>(k + 1)] - cum[static_cast<std::size_t>(k)];
        const Vec2 midp = 0.5 * (mesh.nodes[static_cast<std::size_t>(k)] +
                                 mesh.nodes[static_cast<std::size_t>((k + 1) % nb)]);
        const double qv = data.q ? data.q(midp) : 0.0;
        arc_int[static_cast<std::size_t>(a)] += len * (flux(k) - cauchy.neumann(k) - qv);
        arc_len[static_cast<std::size_t>(a)] += len;
    }
    double acc = 0.0;
    for (int a = 0; a < n_arcs; ++a) {
        if (arc_len[static_cast<std::size_t>(a)] <= 0.0) continue;
        const double mean = arc_int[static_cast<std::size_t>(a)] / arc_len[static_cast<std::size_t>(a)];
        acc += arc_len[static_cast<std::size_t>(a)] * mean * mean;
    }
    rep.neumann_residual = std::sqrt(acc / total_len);

    // Inclusion on the contact part: nodal traction against the Clarke
    // interval of the friction law at the computed jump.
    if (problem.friction().enabled()) {
        double w_acc = 0.0, w_sum = 0.0;
        for (int i = 0; i < problem.n_v(); ++i) {
            const int k = dofs.gamma_s_local[static_cast<std::size_t>(i)];
            const double len_prev = norm(mesh.nodes[static_cast<std::size_t>(k)] -
                                         mesh.nodes[static_cast<std::size_t>((k + nb - 1) % nb)]);
            const double len_next = norm(mesh.nodes[static_cast<std::size_t>((k + 1) % nb)] -
                                         mesh.nodes[static_cast<std::size_t>(k)]);
            const double traction = (len_prev * flux((k + nb - 1) % nb) + len_next * flux(k)) /
                                    (len_prev + len_next);
            const ClarkeInterval iv = problem.friction().law_at(i).clarke_interval(sol.v(i));
            double d = 0.0;
            if (traction < iv.lo) d = iv.lo - traction;
            if (traction > iv.hi) d = traction - iv.hi;
            rep.inclusion_max = std::max(rep.inclusion_max, d);
            const double w = 0.5 * (len_prev + len_next);
            w_acc += w * d * d;
            w_sum += w;
        }
        if (w_sum > 0.0) rep.inclusion_residual = std::sqrt(w_acc / w_sum);
    }
    return rep;
}

double fd_laplacian(const BoundaryMesh& bm, const CauchyData& data, Vec2 center, double spacing,
                    double min_dist) {
    const std::vector<Vec2> pts{center,
                                {center.x + spacing, center.y},
                                {center.x - spacing, center.y},
                                {center.x, center.y + spacing},
                                {center.x, center.y - spacing}};
    const Eigen::VectorXd u = evaluate_exterior(bm, data, pts, min_dist);
    return (u(1) + u(2) + u(3) + u(4) - 4.0 * u(0)) / (spacing * spacing);
}

}  // namespace hvibem
