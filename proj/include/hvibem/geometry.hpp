#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace hvibem {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
};

inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
inline Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
double norm(Vec2 a);

enum class BoundaryPart { S, T };

/// Polygonal domain with a marked contact part of the boundary.
/// Vertices are counterclockwise; each arc (i,j) marks the boundary run
/// from vertex i to vertex j (counterclockwise) as the contact part.
struct PolygonSpec {
    std::vector<Vec2> vertices;
    std::vector<std::pair<int, int>> gamma_s_arcs;

    void validate() const;                  // throws std::invalid_argument
    bool edge_on_gamma_s(int edge) const;   // edge k runs vertex k -> k+1
    double perimeter() const;
};

struct BoundaryEdge {
    int a = 0;
    int b = 0;
    BoundaryPart part = BoundaryPart::T;
};

/// Conforming P1 triangulation. Nodes [0, n_boundary) are the boundary
/// nodes in one cyclic counterclockwise traversal; the rest are interior.
/// Triangles are counterclockwise so the outward normal of a boundary
/// edge is (t.y, -t.x)/|t| for tangent t.
struct Mesh2D {
    std::vector<Vec2> nodes;
    std::vector<std::array<int, 3>> triangles;
    std::vector<BoundaryEdge> boundary_edges;
    int n_boundary = 0;
    double h = 0.0;  // max element diameter

    double diameter() const;  // over boundary nodes
    double area() const;
    void validate() const;
};

/// Index maps between the interior space (all nodes), the boundary trace
/// space, and the contact trace space. Contact dofs exclude the S/T
/// junction nodes, so any expanded coefficient vector vanishes on the
/// closure of the non-contact part.
struct DofMaps {
    int n_interior = 0;
    std::vector<int> boundary_dofs;   // mesh node ids, cyclic order
    std::vector<int> gamma_s_dofs;    // mesh node ids, subset of boundary_dofs
    std::vector<int> gamma_s_local;   // positions of gamma_s_dofs inside boundary_dofs
    std::vector<int> trace_map;       // boundary position -> mesh node id
};

Mesh2D build_mesh(const PolygonSpec& spec, double h_target);

/// Scales the mesh so its diameter drops below 1, which keeps the single
/// layer operator positive definite in 2D. Returns the (possibly
/// unchanged) mesh and the applied scale factor.
std::pair<Mesh2D, double> rescale_for_capacity(const Mesh2D& mesh);

DofMaps dof_maps(const Mesh2D& mesh);

// Plain-text mesh exchange format:
//   nodes N triangles M bedges K
//   x y                (N lines)
//   i j k              (M lines)
//   i j S|T            (K lines)
void write_mesh(std::ostream& os, const Mesh2D& mesh);
Mesh2D read_mesh(std::istream& is);

/// Closed boundary polyline used by the boundary operator assembly.
/// Panel k runs from node k to node (k+1) mod n.
struct BoundaryMesh {
    std::vector<Vec2> nodes;
    std::vector<BoundaryPart> part;  // per panel

    static BoundaryMesh from_mesh(const Mesh2D& mesh);
    static BoundaryMesh circle(double radius, int n_panels);

    int n_panels() const { return static_cast<int>(nodes.size()); }
    Vec2 panel_start(int k) const { return nodes[static_cast<std::size_t>(k)]; }
    Vec2 panel_end(int k) const { return nodes[static_cast<std::size_t>((k + 1) % n_panels())]; }
    double panel_length(int k) const;
    Vec2 outward_normal(int k) const;
    double diameter() const;
    double total_length() const;
};

}  // namespace hvibem
