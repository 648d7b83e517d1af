#pragma once

#include <array>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "spc/types.hpp"

namespace spc {

/// Simplicial mesh: 3-node triangles (dim 2) or 4-node tetrahedra (dim 3).
/// Node coordinates are the reference configuration. Every element carries a
/// body id; nodes inherit the body of their elements and may not be shared
/// across bodies.
struct Mesh {
    int dim = 2;
    std::vector<double> coords;  // node-major reference coordinates
    std::vector<int> elems;      // connectivity, (dim+1) entries per element
    std::vector<int> elem_body;  // body id per element
    std::vector<int> node_body;  // induced body id per node (set by finalize)
    int n_bodies = 0;

    int n_nodes() const { return dim ? static_cast<int>(coords.size()) / dim : 0; }
    int n_elems() const { return static_cast<int>(elem_body.size()); }
    int nodes_per_elem() const { return dim + 1; }
    const int* elem(int e) const { return &elems[static_cast<size_t>(e) * (dim + 1)]; }

    DVec node(int i) const;
    NodeMat elem_ref_coords(int e) const;

    /// Validates connectivity and reference volumes, induces node_body.
    /// Throws Error on invalid indices, non-positive volume, or nodes shared
    /// between bodies.
    void finalize();
};

/// Nodal displacements over a mesh; current coordinates are reference plus
/// displacement.
struct Configuration {
    std::vector<double> u;  // node-major, same layout as Mesh::coords

    static Configuration zero(const Mesh& m) {
        Configuration c;
        c.u.assign(m.coords.size(), 0.0);
        return c;
    }
};

DVec current_coords(const Mesh&, const Configuration&, int node);
NodeMat elem_cur_coords(const Mesh&, const Configuration&, int e);

/// Signed simplex volume (area in 2D). Pass nullptr for the reference
/// configuration.
double element_signed_volume(const Mesh&, const Configuration*, int e);

/// Nodes of local face f of element e: all element nodes except local node f.
/// In 2D the third entry is -1.
std::array<int, 3> face_nodes(const Mesh&, int e, int f);

struct BoundaryInfo {
    std::vector<std::array<int, 2>> exterior_faces;     // (element, local face)
    std::vector<std::vector<int>> body_exterior_nodes;  // sorted, per body
    std::vector<int> exterior_nodes;                    // all bodies, sorted
    std::vector<char> is_exterior;                      // per node
};

/// Exterior faces are faces referenced by exactly one element; exterior nodes
/// are the nodes of those faces.
BoundaryInfo extract_boundary(const Mesh&);

/// Mesh file format:
///   dim <2|3>
///   nodes <N>
///   <d floats per line>
///   elements <M>
///   <body_id> <n1> ... <n(d+1)>   (0-based node indices)
Mesh load_mesh(const std::string& path);
void save_mesh(const Mesh&, const std::string& path);

/// Legacy ASCII VTK unstructured grid snapshot of the deformed configuration.
/// Writes the displacement as a vector field plus the named nodal scalars.
/// Scalar arrays must be sized to the node count.
void write_snapshot(const Mesh&, const Configuration&,
                    const std::vector<std::pair<std::string, std::vector<double>>>& scalars,
                    const std::string& path);

struct Snapshot {
    int n_points = 0;
    std::vector<double> points;  // 3 components per point
    std::map<std::string, std::vector<double>> scalars;
};

/// Minimal reader for files produced by write_snapshot (round-trip checks).
Snapshot read_snapshot(const std::string& path);

} // namespace spc
