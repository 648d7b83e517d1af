#pragma once

#include "spc/mesh.hpp"
#include "spc/types.hpp"

namespace spc {

struct MaterialParams {
    double E = 1.0;   // Young's modulus
    double nu = 0.3;  // Poisson ratio

    double mu() const { return E / (2.0 * (1.0 + nu)); }
    double chi() const { return E * nu / ((1.0 + nu) * (1.0 - 2.0 * nu)); }
};

/// Compressible Neo-Hookean energy
///   psi(C) = mu/2 (C:I - 3) - mu log sqrt(det C) + chi/2 log^2 sqrt(det C).
/// C is the right Cauchy-Green tensor; in 2D (plane strain) pass the 3x3
/// embedding with C33 = 1. Throws Error if C is not SPD.
double strain_energy(const Eigen::Matrix3d& C, const MaterialParams&);

/// Second Piola-Kirchhoff stress S = 2 dpsi/dC.
Eigen::Matrix3d second_pk_stress(const Eigen::Matrix3d& C, const MaterialParams&);

/// Directional derivative of S along a symmetric increment dC.
Eigen::Matrix3d tangent_apply(const Eigen::Matrix3d& C, const MaterialParams&,
                              const Eigen::Matrix3d& dC);

/// Total-Lagrangian residual and consistent stiffness of one linear simplex
/// (one-point quadrature, exact for the constant-gradient integrand).
/// Local dof order is node-major (node, component). Returns false when the
/// element is inverted (det F <= 0).
bool element_residual_stiffness(const Mesh&, const Configuration&, int e, const MaterialParams&,
                                LVec& residual, LMat& stiffness);

/// Deformation gradient embedded in 3x3 (F33 = 1 for plane strain) plus its
/// determinant in d dimensions; shared by the element and by diagnostics.
bool deformation_gradient(const Mesh&, const Configuration&, int e, Eigen::Matrix3d& F3,
                          double& detF);

/// Strain energy integrated over one element (reference volume times psi).
double element_strain_energy(const Mesh&, const Configuration&, int e, const MaterialParams&);

} // namespace spc
