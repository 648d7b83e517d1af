#pragma once

#include <string>
#include <vector>

#include "spc/mesh.hpp"

namespace spc::meshgen {

/// Structured triangulated rectangle [x0,x1] x [y0,y1] with nx x ny cells and
/// parity-alternating diagonals. grade_x != 1 applies a geometric progression
/// to the column widths (ratio of last to first cell width equals grade_x).
Mesh rect(double x0, double y0, double x1, double y1, int nx, int ny, int body = 0,
          double grade_x = 1.0);
Mesh rect_h(double x0, double y0, double x1, double y1, double h, int body = 0,
            double grade_x = 1.0);

/// Disk of given radius meshed by mapping a structured square grid with the
/// concentric (max-norm to Euclidean-norm) map.
Mesh disk(double radius, double h, int body = 0);

/// Structured box split into six tetrahedra per cell (Kuhn subdivision).
Mesh box3d(double x0, double y0, double z0, double x1, double y1, double z1, int nx, int ny,
           int nz, int body = 0);
Mesh box3d_h(double x0, double y0, double z0, double x1, double y1, double z1, double h,
             int body = 0);

/// Solids of extrusion along z (prisms split with the global-min-index rule so
/// neighboring prisms stay conforming).
Mesh cylinder3d(double radius, double length, double h, int body = 0);
Mesh cone3d(double radius, double height, double h, int body = 0);  // tip slightly truncated
Mesh wedge3d(double radius, double width, double sweep_deg, double h, int body = 0,
             double tilt_deg = 0.0);

/// Remap the extrusion axis (z) onto x or y by a cyclic coordinate
/// permutation; orientation is preserved.
void map_extrusion_axis(Mesh&, char axis);

Mesh merge(const std::vector<Mesh>& parts);
void translate(Mesh&, double dx, double dy, double dz = 0.0);

/// Two-dimensional compression scene: a deformable punch (body 0) above four
/// deformable squares (bodies 2..5) inside a rigid U-shaped container
/// (body 1).
std::vector<Mesh> compress2d_scene(double h);
Mesh compress2d_part(const std::string& part, double h);

/// Two stacked blocks for the contact patch test: wide uniform bottom block
/// (body 0) and a narrower top block (body 1) with graded interface spacing.
std::vector<Mesh> patch2d_scene(double h_bottom, double h_top, double grade);
Mesh patch2d_part(const std::string& part, double h_bottom, double h_top, double grade);

/// Build a mesh from a generator spec string used by scenario files, e.g.
///   "rect 0 0 1 0.2 h=0.01 grade=2"
///   "disk 1.0 h=0.02"
///   "compress2d punch h=0.02"
///   "patch2d top h=0.05 htop=0.069 grade=2"
///   "box3d 0 0 0 1 1 0.5 h=0.25"
///   "cylinder3d 1.43 7.15 h=0.5" / "cone3d 1.87 3.27 h=0.5" /
///   "wedge3d 3.2 3.2 30 h=0.5"
Mesh from_spec(const std::string& spec, int body);

} // namespace spc::meshgen
