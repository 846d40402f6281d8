#pragma once

#include <array>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "displab/errors.hpp"

namespace displab {

using Vec2 = Eigen::Vector2d;

/// Periodicity cell: the unit square minus one circular obstacle.
/// `obstacle_radius == 0` selects the unperforated square (used by the
/// convergence and compatibility test modes).  The measured fields are the
/// *discrete* measures of the polygonal mesh and are filled by
/// build_cell_mesh; eta = surface_length / fluid_area.
struct CellGeometry {
    Vec2 obstacle_center{0.5, 0.5};
    double obstacle_radius = 0.2;

    double fluid_area = 0.0;
    double surface_length = 0.0;
    double eta = 0.0;
};

/// Conforming P1 triangle mesh of the fluid region.
///
/// Invariants (enforced by the builder and re-validated on import):
///  - triangles are positively oriented and non-degenerate;
///  - no node lies strictly inside the obstacle;
///  - boundary_loop walks the obstacle circle exactly once, counter-clockwise
///    around the obstacle center (empty when obstacle_radius == 0);
///  - periodic_pairs is a bijection {left}->{right}, {bottom}->{top} between
///    outer-edge nodes with equal tangential coordinate (corners chain);
///  - V - E + F == 0 with an obstacle, == 1 without (annulus / disk).
struct CellMesh {
    std::vector<Vec2> nodes;
    std::vector<std::array<int, 3>> triangles;
    std::vector<int> boundary_loop;                  ///< obstacle node ids in loop order
    std::vector<std::array<int, 2>> periodic_pairs;  ///< {master, slave} = {left/bottom, right/top}
    double h = 0.0;                                  ///< effective uniform spacing 1/n

    int num_nodes() const { return static_cast<int>(nodes.size()); }
    int num_triangles() const { return static_cast<int>(triangles.size()); }

    double triangle_area(int t) const {
        const auto& tri = triangles[t];
        const Vec2 e1 = nodes[tri[1]] - nodes[tri[0]];
        const Vec2 e2 = nodes[tri[2]] - nodes[tri[0]];
        return 0.5 * (e1.x() * e2.y() - e1.y() * e2.x());
    }
    Vec2 centroid(int t) const {
        const auto& tri = triangles[t];
        return (nodes[tri[0]] + nodes[tri[1]] + nodes[tri[2]]) / 3.0;
    }
};

/// Obstacle boundary as a closed polygonal curve with per-segment frames.
/// Segment k joins loop node k to loop node (k+1) % size.  Tangents follow
/// the loop orientation; normals are unit, point into the obstacle (exterior
/// to the fluid region), and are orthogonal to the segment chord.
struct SurfaceMesh {
    std::vector<int> nodes;        ///< bulk node ids in loop order
    std::vector<double> lengths;   ///< chord length per segment
    std::vector<Vec2> tangents;    ///< unit chord direction per segment
    std::vector<Vec2> normals;     ///< unit exterior normal per segment
    double total_length = 0.0;

    int num_nodes() const { return static_cast<int>(nodes.size()); }
    int num_segments() const { return static_cast<int>(nodes.size()); }
    bool empty() const { return nodes.empty(); }
};

/// Build the cell mesh at spacing ~h (snapped to 1/n with n = round(1/h)).
/// Outer-edge nodes are uniform and identical on opposite edges; obstacle
/// nodes sit exactly on the circle at uniform angles; the interior is a
/// staggered lattice kept clear of the circle, Delaunay-triangulated.
/// Fills the measured fields of `geometry` from the resulting mesh.
/// Throws: geometry error (infeasible obstacle, h too coarse), topology
/// error (boundary loop or pairing broken — should not happen for feasible
/// inputs and is checked rather than assumed).
CellMesh build_cell_mesh(CellGeometry& geometry, double h);

/// Extract the obstacle boundary curve with frame data from a built mesh.
/// Returns an empty SurfaceMesh when the mesh has no obstacle.
SurfaceMesh extract_surface_mesh(const CellMesh& mesh, const CellGeometry& geometry);

/// Discrete measures of the mesh: {fluid area, obstacle boundary length}.
std::pair<double, double> measure(const CellMesh& mesh);

/// Validate all CellMesh invariants against the geometry; throws a topology
/// error naming the first violated invariant.  Used after construction and
/// after import.
void validate_mesh(const CellMesh& mesh, const CellGeometry& geometry);

/// Plain-text mesh (de)serialization: node / triangle / boundary-loop /
/// periodic-pair tables plus the generating geometry.  Import re-validates
/// every invariant and fails with an input or topology error diagnostic.
void write_mesh(std::ostream& out, const CellMesh& mesh, const CellGeometry& geometry);
void write_mesh_file(const std::string& path, const CellMesh& mesh, const CellGeometry& geometry);
std::pair<CellMesh, CellGeometry> read_mesh(std::istream& in);
std::pair<CellMesh, CellGeometry> read_mesh_file(const std::string& path);

}  // namespace displab
