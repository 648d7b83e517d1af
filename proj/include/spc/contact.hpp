#pragma once

#include <array>

#include "spc/adf.hpp"
#include "spc/mesh.hpp"
#include "spc/types.hpp"

namespace spc {

enum class Weighting { none, edge_projection };

struct ContactParams {
    double kappa = 1.0;
    Weighting weighting = Weighting::none;
    double containment_tol = 1e-12;  // slack on N_K in [0,1] during detection
};

/// Binding of an incident exterior node to a containing element of another
/// body. xi and weight are stamped at detection time; the element re-derives
/// xi from the current coordinates when evaluated.
struct TargetAssignment {
    int node = -1;
    int elem = -1;
    DVec xi;
    double weight = 1.0;  // tributary boundary measure (1 when unweighted)
    double g = 0.0;       // gap at detection time (0 when no field was given)
};

/// Parent coordinates of point x inside the simplex spanned by xN
/// (closed-form inversion of the affine map). Returns false when the simplex
/// is degenerate.
bool project_to_simplex(const NodeMat& xN, const DVec& xI, DVec& xi);

/// First and second derivatives of the projection with respect to the stacked
/// coordinates x_C = [x_N | x_I] of size n = d(d+2).
struct ProjectionDerivatives {
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, 3, 15> A;  // d x n
    std::array<LMat, 3> second;  // per xi component, n x n, symmetric
};
bool projection_derivatives(const NodeMat& xN, const DVec& xI, ProjectionDerivatives&);

/// Courant-Beltrami penalty contact element over the stacked dofs
/// [target nodes | incident node], with the target's nodal phi values frozen.
/// The residual is the exact gradient of P = -(kappa_eff/3) min(0, g)^3, so
/// the incident node receives kappa_eff * min(0,g)^2 * grad g and the target
/// nodes consistent reactions; the stiffness is its exact Jacobian.
struct ContactEval {
    bool ok = true;       // false: interpolated phi <= 0 (treat as step failure)
    bool active = false;  // g < 0
    double g = 0.0;
    double phi = 1.0;
    DVec grad_g;    // d g / d x_I (the incident block of the full gradient)
    LVec residual;  // n entries
    LMat stiffness; // n x n
};
ContactEval contact_element(const Mesh&, const Configuration&, const ScalarField&,
                            const TargetAssignment&, const ContactParams&);

/// Tributary boundary measure per node in the given configuration: half the
/// adjacent exterior edge lengths in 2D, a third of the adjacent exterior
/// face areas in 3D. Zero for interior nodes.
std::vector<double> tributary_boundary_measure(const Mesh&, const Configuration&,
                                               const BoundaryInfo&);

/// kappa, scaled by the incident node's tributary measure when edge-projection
/// weighting is on.
double effective_kappa(const ContactParams&, double weight);

} // namespace spc
