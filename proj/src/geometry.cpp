#include "hvibem/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace hvibem {

double norm(Vec2 a) { return std::hypot(a.x, a.y); }

namespace {

double polygon_signed_area(const std::vector<Vec2>& v) {
    double s = 0.0;
    const int n = static_cast<int>(v.size());
    for (int i = 0; i < n; ++i) {
        const Vec2& p = v[static_cast<std::size_t>(i)];
        const Vec2& q = v[static_cast<std::size_t>((i + 1) % n)];
        s += cross(p, q);
    }
    return 0.5 * s;
}

bool segments_properly_intersect(Vec2 a, Vec2 b, Vec2 c, Vec2 d) {
    const double d1 = cross(b - a, c - a);
    const double d2 = cross(b - a, d - a);
    const double d3 = cross(d - c, a - c);
    const double d4 = cross(d - c, b - c);
    return ((d1 > 0) != (d2 > 0)) && ((d3 > 0) != (d4 > 0));
}

bool point_in_polygon(const std::vector<Vec2>& poly, Vec2 p) {
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

double dist_point_segment(Vec2 p, Vec2 a, Vec2 b) {
    const Vec2 ab = b - a;
    const double len2 = dot(ab, ab);
    double t = len2 > 0.0 ? dot(p - a, ab) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    return norm(p - (a + t * ab));
}

// Incremental Bowyer-Watson on a super-triangle. Quadratic in the point
// count, which is fine at the mesh sizes this library targets.
std::vector<std::array<int, 3>> delaunay(const std::vector<Vec2>& pts) {
    struct Tri {
        int a, b, c;
        Vec2 cc;      // circumcenter
        double r2;    // squared circumradius
    };
    const int n = static_cast<int>(pts.size());
    if (n < 3) throw std::invalid_argument("delaunay: need at least 3 points");

    double lo_x = pts[0].x, hi_x = pts[0].x, lo_y = pts[0].y, hi_y = pts[0].y;
    for (const Vec2& p : pts) {
        lo_x = std::min(lo_x, p.x);
        hi_x = std::max(hi_x, p.x);
        lo_y = std::min(lo_y, p.y);
        hi_y = std::max(hi_y, p.y);
    }
    const double span = std::max({hi_x - lo_x, hi_y - lo_y, 1e-12});
    const Vec2 mid{0.5 * (lo_x + hi_x), 0.5 * (lo_y + hi_y)};

    std::vector<Vec2> v(pts);
    v.push_back({mid.x - 30.0 * span, mid.y - 20.0 * span});
    v.push_back({mid.x + 30.0 * span, mid.y - 20.0 * span});
    v.push_back({mid.x, mid.y + 30.0 * span});

    auto make_tri = [&v](int a, int b, int c) {
        Tri t{a, b, c, {}, 0.0};
        const Vec2 A = v[static_cast<std::size_t>(a)];
        const Vec2 B = v[static_cast<std::size_t>(b)];
        const Vec2 C = v[static_cast<std::size_t>(c)];
        const double d = 2.0 * cross(B - A, C - A);
        if (std::abs(d) < 1e-30)
            throw std::runtime_error("delaunay: degenerate triangle while meshing");
        const double a2 = dot(A, A), b2 = dot(B, B), c2 = dot(C, C);
        t.cc.x = (a2 * (B.y - C.y) + b2 * (C.y - A.y) + c2 * (A.y - B.y)) / d;
        t.cc.y = (a2 * (C.x - B.x) + b2 * (A.x - C.x) + c2 * (B.x - A.x)) / d;
        t.r2 = dot(A - t.cc, A - t.cc);
        return t;
    };

    std::vector<Tri> tris;
    tris.push_back(make_tri(n, n + 1, n + 2));

    for (int ip = 0; ip < n; ++ip) {
        const Vec2 p = v[static_cast<std::size_t>(ip)];
        std::vector<int> bad;
        for (int it = 0; it < static_cast<int>(tris.size()); ++it) {
            const Tri& t = tris[static_cast<std::size_t>(it)];
            const Vec2 d = p - t.cc;
            if (dot(d, d) < t.r2 * (1.0 - 1e-12)) bad.push_back(it);
        }
        // Cavity boundary: edges of bad triangles not shared by two bad ones.
        std::map<std::pair<int, int>, int> edge_count;
        auto add_edge = [&edge_count](int a, int b) {
            auto key = std::minmax(a, b);
            edge_count[{key.first, key.second}]++;
        };
        for (int it : bad) {
            const Tri& t = tris[static_cast<std::size_t>(it)];
            add_edge(t.a, t.b);
            add_edge(t.b, t.c);
            add_edge(t.c, t.a);
        }
        std::vector<std::array<int, 2>> boundary;
        for (int it : bad) {
            const Tri& t = tris[static_cast<std::size_t>(it)];
            const std::array<std::array<int, 2>, 3> es{{{t.a, t.b}, {t.b, t.c}, {t.c, t.a}}};
            for (const auto& e : es) {
                auto key = std::minmax(e[0], e[1]);
                if (edge_count[{key.first, key.second}] == 1) boundary.push_back(e);
            }
        }
        std::sort(bad.rbegin(), bad.rend());
        for (int it : bad) tris.erase(tris.begin() + it);
        for (const auto& e : boundary) {
            // Orient the new triangle counterclockwise.
            const Vec2 A = v[static_cast<std::size_t>(e[0])];
            const Vec2 B = v[static_cast<std::size_t>(e[1])];
            if (cross(B - A, p - A) > 0.0)
                tris.push_back(make_tri(e[0], e[1], ip));
            else
                tris.push_back(make_tri(e[1], e[0], ip));
        }
    }

    std::vector<std::array<int, 3>> out;
    for (const Tri& t : tris) {
        if (t.a >= n || t.b >= n || t.c >= n) continue;
        out.push_back({t.a, t.b, t.c});
    }
    return out;
}

double tri_diameter(const Vec2& a, const Vec2& b, const Vec2& c) {
    return std::max({norm(a - b), norm(b - c), norm(c - a)});
}

// Deterministic jitter in [-1,1]^2 from an integer pair.
Vec2 hash_jitter(std::int64_t i, std::int64_t j) {
    std::uint64_t h = static_cast<std::uint64_t>(i) * 0x9E3779B97F4A7C15ull ^
                      static_cast<std::uint64_t>(j) * 0xC2B2AE3D27D4EB4Full;
    h ^= h >> 33;
    h *= 0xFF51AFD7ED558CCDull;
    h ^= h >> 33;
    const double u = static_cast<double>(h & 0xFFFFFFFFull) / 4294967295.0;
    const double w = static_cast<double>((h >> 32) & 0xFFFFFFFFull) / 4294967295.0;
    return {2.0 * u - 1.0, 2.0 * w - 1.0};
}

struct BoundaryLayout {
    std::vector<Vec2> nodes;             // cyclic
    std::vector<BoundaryPart> part;      // per sub-edge
};

BoundaryLayout subdivide_boundary(const PolygonSpec& spec, double h_target) {
    BoundaryLayout out;
    const int nv = static_cast<int>(spec.vertices.size());
    for (int e = 0; e < nv; ++e) {
        const Vec2 a = spec.vertices[static_cast<std::size_t>(e)];
        const Vec2 b = spec.vertices[static_cast<std::size_t>((e + 1) % nv)];
        const double len = norm(b - a);
        const int nseg = std::max(1, static_cast<int>(std::ceil(len / h_target - 1e-12)));
        const BoundaryPart p = spec.edge_on_gamma_s(e) ? BoundaryPart::S : BoundaryPart::T;
        for (int s = 0; s < nseg; ++s) {
            const double t = static_cast<double>(s) / nseg;
            out.nodes.push_back(a + t * (b - a));
            out.part.push_back(p);
        }
    }
    return out;
}

Mesh2D mesh_from_points(const PolygonSpec& spec, const BoundaryLayout& bl,
                        const std::vector<Vec2>& interior) {
    Mesh2D mesh;
    mesh.nodes = bl.nodes;
    mesh.n_boundary = static_cast<int>(bl.nodes.size());
    mesh.nodes.insert(mesh.nodes.end(), interior.begin(), interior.end());

    auto tris = delaunay(mesh.nodes);

    // Keep triangles whose centroid lies in the polygon (Delaunay of the
    // point cloud covers the convex hull; this trims concavities).
    std::vector<std::array<int, 3>> kept;
    for (const auto& t : tris) {
        const Vec2 c = (1.0 / 3.0) * (mesh.nodes[static_cast<std::size_t>(t[0])] +
                                      mesh.nodes[static_cast<std::size_t>(t[1])] +
                                      mesh.nodes[static_cast<std::size_t>(t[2])]);
        if (point_in_polygon(spec.vertices, c)) kept.push_back(t);
    }
    mesh.triangles = std::move(kept);

    // The boundary polyline must appear as triangulation edges.
    std::set<std::pair<int, int>> edges;
    for (const auto& t : mesh.triangles) {
        for (int k = 0; k < 3; ++k) {
            auto key = std::minmax(t[static_cast<std::size_t>(k)], t[static_cast<std::size_t>((k + 1) % 3)]);
            edges.insert({key.first, key.second});
        }
    }
    for (int k = 0; k < mesh.n_boundary; ++k) {
        const int a = k, b = (k + 1) % mesh.n_boundary;
        auto key = std::minmax(a, b);
        if (edges.find({key.first, key.second}) == edges.end())
            throw std::runtime_error("build_mesh: triangulation does not conform to the boundary");
        mesh.boundary_edges.push_back({a, b, bl.part[static_cast<std::size_t>(k)]});
    }

    mesh.h = 0.0;
    for (const auto& t : mesh.triangles) {
        mesh.h = std::max(mesh.h, tri_diameter(mesh.nodes[static_cast<std::size_t>(t[0])],
                                               mesh.nodes[static_cast<std::size_t>(t[1])],
                                               mesh.nodes[static_cast<std::size_t>(t[2])]));
    }
    mesh.validate();
    return mesh;
}

}  // namespace

void PolygonSpec::validate() const {
    const int nv = static_cast<int>(vertices.size());
    if (nv < 3) throw std::invalid_argument("PolygonSpec: need at least 3 vertices");
    const double area = polygon_signed_area(vertices);
    if (area <= 0.0)
        throw std::invalid_argument("PolygonSpec: vertices must be counterclockwise and non-degenerate");
    for (int i = 0; i < nv; ++i) {
        const Vec2 a = vertices[static_cast<std::size_t>(i)];
        const Vec2 b = vertices[static_cast<std::size_t>((i + 1) % nv)];
        if (norm(b - a) < 1e-14) throw std::invalid_argument("PolygonSpec: repeated vertex");
        for (int j = i + 1; j < nv; ++j) {
            const Vec2 c = vertices[static_cast<std::size_t>(j)];
            const Vec2 d = vertices[static_cast<std::size_t>((j + 1) % nv)];
            if (j == i || (j + 1) % nv == i || (i + 1) % nv == j) continue;
            if (segments_properly_intersect(a, b, c, d))
                throw std::invalid_argument("PolygonSpec: polygon is self-intersecting");
        }
    }
    if (gamma_s_arcs.empty())
        throw std::invalid_argument("PolygonSpec: contact part must be nonempty");
    std::vector<bool> on_s(static_cast<std::size_t>(nv), false);
    for (const auto& arc : gamma_s_arcs) {
        if (arc.first < 0 || arc.first >= nv || arc.second < 0 || arc.second >= nv ||
            arc.first == arc.second)
            throw std::invalid_argument("PolygonSpec: invalid contact arc");
        for (int e = arc.first; e != arc.second; e = (e + 1) % nv) {
            if (on_s[static_cast<std::size_t>(e)])
                throw std::invalid_argument("PolygonSpec: contact arcs overlap");
            on_s[static_cast<std::size_t>(e)] = true;
        }
    }
    if (std::all_of(on_s.begin(), on_s.end(), [](bool b) { return b; }))
        throw std::invalid_argument("PolygonSpec: contact part must leave a nonempty complement");
}

bool PolygonSpec::edge_on_gamma_s(int edge) const {
    const int nv = static_cast<int>(vertices.size());
    for (const auto& arc : gamma_s_arcs)
        for (int e = arc.first; e != arc.second; e = (e + 1) % nv)
            if (e == edge) return true;
    return false;
}

double PolygonSpec::perimeter() const {
    double s = 0.0;
    const int nv = static_cast<int>(vertices.size());
    for (int i = 0; i < nv; ++i)
        s += norm(vertices[static_cast<std::size_t>((i + 1) % nv)] - vertices[static_cast<std::size_t>(i)]);
    return s;
}

double Mesh2D::diameter() const {
    double d = 0.0;
    for (int i = 0; i < n_boundary; ++i)
        for (int j = i + 1; j < n_boundary; ++j)
            d = std::max(d, norm(nodes[static_cast<std::size_t>(i)] - nodes[static_cast<std::size_t>(j)]));
    return d;
}

double Mesh2D::area() const {
    double s = 0.0;
    for (const auto& t : triangles) {
        const Vec2 a = nodes[static_cast<std::size_t>(t[0])];
        const Vec2 b = nodes[static_cast<std::size_t>(t[1])];
        const Vec2 c = nodes[static_cast<std::size_t>(t[2])];
        s += 0.5 * cross(b - a, c - a);
    }
    return s;
}

void Mesh2D::validate() const {
    if (n_boundary < 3 || static_cast<int>(nodes.size()) < n_boundary)
        throw std::runtime_error("Mesh2D: bad boundary node count");
    for (const auto& t : triangles) {
        const Vec2 a = nodes[static_cast<std::size_t>(t[0])];
        const Vec2 b = nodes[static_cast<std::size_t>(t[1])];
        const Vec2 c = nodes[static_cast<std::size_t>(t[2])];
        if (cross(b - a, c - a) <= 0.0)
            throw std::runtime_error("Mesh2D: non-positive triangle area");
    }
    if (static_cast<int>(boundary_edges.size()) != n_boundary)
        throw std::runtime_error("Mesh2D: boundary edge count mismatch");
    bool has_s = false, has_t = false;
    for (const auto& e : boundary_edges) {
        (e.part == BoundaryPart::S ? has_s : has_t) = true;
        if (e.a < 0 || e.a >= n_boundary || e.b != (e.a + 1) % n_boundary)
            throw std::runtime_error("Mesh2D: boundary edges must form the node cycle");
    }
    if (!has_s || !has_t)
        throw std::runtime_error("Mesh2D: both boundary parts must be nonempty");
}

Mesh2D build_mesh(const PolygonSpec& spec, double h_target) {
    spec.validate();
    if (!(h_target > 0.0)) throw std::invalid_argument("build_mesh: h_target must be positive");

    double g = 0.82 * h_target;
    for (int attempt = 0; attempt < 6; ++attempt) {
        const BoundaryLayout bl = subdivide_boundary(spec, h_target);

        double lo_x = spec.vertices[0].x, hi_x = lo_x, lo_y = spec.vertices[0].y, hi_y = lo_y;
        for (const Vec2& p : spec.vertices) {
            lo_x = std::min(lo_x, p.x);
            hi_x = std::max(hi_x, p.x);
            lo_y = std::min(lo_y, p.y);
            hi_y = std::max(hi_y, p.y);
        }
        const double row_h = g * 0.8660254037844386;
        std::vector<Vec2> interior;
        const std::int64_t n_rows = static_cast<std::int64_t>((hi_y - lo_y) / row_h) + 2;
        const std::int64_t n_cols = static_cast<std::int64_t>((hi_x - lo_x) / g) + 2;
        for (std::int64_t r = 0; r <= n_rows; ++r) {
            const double y = lo_y + static_cast<double>(r) * row_h;
            const double x_off = (r % 2 == 0) ? 0.0 : 0.5 * g;
            for (std::int64_t c = 0; c <= n_cols; ++c) {
                Vec2 p{lo_x + x_off + static_cast<double>(c) * g, y};
                const Vec2 jit = hash_jitter(r, c);
                p.x += 0.06 * g * jit.x;
                p.y += 0.06 * g * jit.y;
                if (!point_in_polygon(spec.vertices, p)) continue;
                double dmin = std::numeric_limits<double>::max();
                const int nb = static_cast<int>(bl.nodes.size());
                for (int k = 0; k < nb; ++k) {
                    dmin = std::min(dmin, dist_point_segment(p, bl.nodes[static_cast<std::size_t>(k)],
                                                             bl.nodes[static_cast<std::size_t>((k + 1) % nb)]));
                    if (dmin < 0.5 * g) break;
                }
                if (dmin >= 0.5 * g) interior.push_back(p);
            }
        }

        Mesh2D mesh = mesh_from_points(spec, bl, interior);
        if (mesh.h <= h_target * (1.0 + 1e-12)) return mesh;
        g *= 0.75;  // sparse pocket produced an oversize element; densify and retry
    }
    throw std::runtime_error("build_mesh: could not reach the requested element size");
}

std::pair<Mesh2D, double> rescale_for_capacity(const Mesh2D& mesh) {
    const double diam = mesh.diameter();
    if (diam < 1.0) return {mesh, 1.0};
    const double s = 0.8 / diam;
    Mesh2D out = mesh;
    for (Vec2& p : out.nodes) p = s * p;
    out.h *= s;
    return {out, s};
}

DofMaps dof_maps(const Mesh2D& mesh) {
    mesh.validate();
    DofMaps maps;
    maps.n_interior = static_cast<int>(mesh.nodes.size());
    const int nb = mesh.n_boundary;
    maps.boundary_dofs.resize(static_cast<std::size_t>(nb));
    maps.trace_map.resize(static_cast<std::size_t>(nb));
    for (int k = 0; k < nb; ++k) {
        maps.boundary_dofs[static_cast<std::size_t>(k)] = k;
        maps.trace_map[static_cast<std::size_t>(k)] = k;
    }
    // A boundary node carries a contact dof only if both incident edges are
    // on the contact part; junction nodes stay pinned to zero.
    for (int k = 0; k < nb; ++k) {
        const BoundaryPart prev = mesh.boundary_edges[static_cast<std::size_t>((k + nb - 1) % nb)].part;
        const BoundaryPart next = mesh.boundary_edges[static_cast<std::size_t>(k)].part;
        if (prev == BoundaryPart::S && next == BoundaryPart::S) {
            maps.gamma_s_dofs.push_back(k);
            maps.gamma_s_local.push_back(k);
        }
    }
    if (maps.gamma_s_dofs.empty())
        throw std::runtime_error("dof_maps: contact part has no interior node; refine the mesh");
    return maps;
}

void write_mesh(std::ostream& os, const Mesh2D& mesh) {
    os << "nodes " << mesh.nodes.size() << " triangles " << mesh.triangles.size() << " bedges "
       << mesh.boundary_edges.size() << "\n";
    os.precision(17);
    for (const Vec2& p : mesh.nodes) os << p.x << " " << p.y << "\n";
    for (const auto& t : mesh.triangles) os << t[0] << " " << t[1] << " " << t[2] << "\n";
    for (const auto& e : mesh.boundary_edges)
        os << e.a << " " << e.b << " " << (e.part == BoundaryPart::S ? "S" : "T") << "\n";
}

Mesh2D read_mesh(std::istream& is) {
    std::string kw_nodes, kw_tris, kw_bedges;
    std::size_t n = 0, m = 0, k = 0;
    is >> kw_nodes >> n >> kw_tris >> m >> kw_bedges >> k;
    if (!is || kw_nodes != "nodes" || kw_tris != "triangles" || kw_bedges != "bedges")
        throw std::runtime_error("read_mesh: bad header");
    Mesh2D mesh;
    mesh.nodes.resize(n);
    for (Vec2& p : mesh.nodes) is >> p.x >> p.y;
    mesh.triangles.resize(m);
    for (auto& t : mesh.triangles) is >> t[0] >> t[1] >> t[2];
    mesh.boundary_edges.resize(k);
    for (auto& e : mesh.boundary_edges) {
        std::string label;
        is >> e.a >> e.b >> label;
        if (label == "S")
            e.part = BoundaryPart::S;
        else if (label == "T")
            e.part = BoundaryPart::T;
        else
            throw std::runtime_error("read_mesh: boundary label must be S or T");
    }
    if (!is) throw std::runtime_error("read_mesh: truncated file");
    mesh.n_boundary = static_cast<int>(k);
    for (const auto& t : mesh.triangles) {
        mesh.h = std::max(mesh.h, tri_diameter(mesh.nodes[static_cast<std::size_t>(t[0])],
                                               mesh.nodes[static_cast<std::size_t>(t[1])],
                                               mesh.nodes[static_cast<std::size_t>(t[2])]));
    }
    mesh.validate();
    return mesh;
}

BoundaryMesh BoundaryMesh::from_mesh(const Mesh2D& mesh) {
    BoundaryMesh bm;
    bm.nodes.assign(mesh.nodes.begin(), mesh.nodes.begin() + mesh.n_boundary);
    bm.part.resize(static_cast<std::size_t>(mesh.n_boundary));
    for (const auto& e : mesh.boundary_edges) bm.part[static_cast<std::size_t>(e.a)] = e.part;
    return bm;
}

BoundaryMesh BoundaryMesh::circle(double radius, int n_panels) {
    if (!(radius > 0.0) || n_panels < 3)
        throw std::invalid_argument("BoundaryMesh::circle: bad radius or panel count");
    BoundaryMesh bm;
    bm.nodes.resize(static_cast<std::size_t>(n_panels));
    bm.part.assign(static_cast<std::size_t>(n_panels), BoundaryPart::T);
    for (int k = 0; k < n_panels; ++k) {
        const double th = 2.0 * M_PI * static_cast<double>(k) / n_panels;
        bm.nodes[static_cast<std::size_t>(k)] = {radius * std::cos(th), radius * std::sin(th)};
    }
    return bm;
}

double BoundaryMesh::panel_length(int k) const { return norm(panel_end(k) - panel_start(k)); }

Vec2 BoundaryMesh::outward_normal(int k) const {
    const Vec2 t = panel_end(k) - panel_start(k);
    const double len = norm(t);
    return {t.y / len, -t.x / len};
}

double BoundaryMesh::diameter() const {
    double d = 0.0;
    const int n = n_panels();
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            d = std::max(d, norm(nodes[static_cast<std::size_t>(i)] - nodes[static_cast<std::size_t>(j)]));
    return d;
}

double BoundaryMesh::total_length() const {
    double s = 0.0;
    for (int k = 0; k < n_panels(); ++k) s += panel_length(k);
    return s;
}

}  // namespace hvibem
