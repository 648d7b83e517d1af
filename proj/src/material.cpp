#include "spc/material.hpp"

#include <cmath>

#include "spc/error.hpp"
#include "spc/fem.hpp"

namespace spc {

namespace {

double log_det_spd(const Eigen::Matrix3d& C) {
    Eigen::LLT<Eigen::Matrix3d> llt(C);
    if (llt.info() != Eigen::Success) throw Error("right Cauchy-Green tensor is not SPD");
    const auto& L = llt.matrixLLT();
    return 2.0 * (std::log(L(0, 0)) + std::log(L(1, 1)) + std::log(L(2, 2)));
}

} // namespace

double strain_energy(const Eigen::Matrix3d& C, const MaterialParams& p) {
    const double logJ = 0.5 * log_det_spd(C);  // log sqrt(det C)
    return 0.5 * p.mu() * (C.trace() - 3.0) - p.mu() * logJ + 0.5 * p.chi() * logJ * logJ;
}

Eigen::Matrix3d second_pk_stress(const Eigen::Matrix3d& C, const MaterialParams& p) {
    const double logJ = 0.5 * log_det_spd(C);
    Eigen::Matrix3d Cinv = C.inverse();
    return p.mu() * (Eigen::Matrix3d::Identity() - Cinv) + p.chi() * logJ * Cinv;
}

Eigen::Matrix3d tangent_apply(const Eigen::Matrix3d& C, const MaterialParams& p,
                              const Eigen::Matrix3d& dC) {
    const double logJ = 0.5 * log_det_spd(C);
    Eigen::Matrix3d Cinv = C.inverse();
    Eigen::Matrix3d CidCCi = Cinv * dC * Cinv;
    // dS = (mu - chi logJ) Cinv dC Cinv + chi/2 tr(Cinv dC) Cinv
    return (p.mu() - p.chi() * logJ) * CidCCi + 0.5 * p.chi() * (Cinv * dC).trace() * Cinv;
}

bool deformation_gradient(const Mesh& m, const Configuration& cfg, int e, Eigen::Matrix3d& F3,
                          double& detF) {
    const int d = m.dim;
    NodeMat X = m.elem_ref_coords(e);
    NodeMat x = elem_cur_coords(m, cfg, e);
    DMat J0(d, d), J(d, d);
    for (int k = 0; k < d; ++k)
        for (int c = 0; c < d; ++c) {
            J0(c, k) = X(k + 1, c) - X(0, c);
            J(c, k) = x(k + 1, c) - x(0, c);
        }
    DMat F = J * J0.inverse();
    F3.setIdentity();
    for (int i = 0; i < d; ++i)
        for (int c = 0; c < d; ++c) F3(i, c) = F(i, c);
    detF = F.determinant();
    return detF > 0.0;
}

double element_strain_energy(const Mesh& m, const Configuration& cfg, int e,
                             const MaterialParams& p) {
    Eigen::Matrix3d F3;
    double detF;
    if (!deformation_gradient(m, cfg, e, F3, detF)) throw Error("inverted element");
    const double V0 = element_signed_volume(m, nullptr, e);
    return V0 * strain_energy(F3.transpose() * F3, p);
}

bool element_residual_stiffness(const Mesh& m, const Configuration& cfg, int e,
                                const MaterialParams& p, LVec& residual, LMat& stiffness) {
    const int d = m.dim;
    const int ndof = d * (d + 1);

    Eigen::Matrix3d F3;
    double detF;
    if (!deformation_gradient(m, cfg, e, F3, detF)) return false;

    NodeMat X = m.elem_ref_coords(e);
    DMat J0(d, d);
    for (int k = 0; k < d; ++k)
        for (int c = 0; c < d; ++c) J0(c, k) = X(k + 1, c) - X(0, c);
    ShapeEval s = shape_simplex(DVec::Zero(d), d);
    // Reference-gradient rows B_a = dN_a/dX, constant over the element.
    LMat B = s.dN_dxi * J0.inverse();

    const double V0 = element_signed_volume(m, nullptr, e);
    Eigen::Matrix3d C3 = F3.transpose() * F3;
    Eigen::Matrix3d S3 = second_pk_stress(C3, p);

    DMat F = F3.topLeftCorner(d, d);
    DMat S = S3.topLeftCorner(d, d);
    DMat P = F * S;  // first Piola-Kirchhoff, in-plane block

    residual.resize(ndof);
    for (int a = 0; a <= d; ++a)
        for (int i = 0; i < d; ++i) {
            double v = 0.0;
            for (int J = 0; J < d; ++J) v += P(i, J) * B(a, J);
            residual[a * d + i] = V0 * v;
        }

    // Columns of the stiffness: perturb dof (b, j), dF = e_j x B_b.
    stiffness.resize(ndof, ndof);
    Eigen::Matrix3d dF3 = Eigen::Matrix3d::Zero();
    for (int b = 0; b <= d; ++b)
        for (int j = 0; j < d; ++j) {
            dF3.setZero();
            for (int c = 0; c < d; ++c) dF3(j, c) = B(b, c);
            Eigen::Matrix3d dC3 = F3.transpose() * dF3 + dF3.transpose() * F3;
            Eigen::Matrix3d dS3 = tangent_apply(C3, p, dC3);
            DMat dP = dF3.topLeftCorner(d, d) * S + F * dS3.topLeftCorner(d, d);
            for (int a = 0; a <= d; ++a)
                for (int i = 0; i < d; ++i) {
                    double v = 0.0;
                    for (int J = 0; J < d; ++J) v += dP(i, J) * B(a, J);
                    stiffness(a * d + i, b * d + j) = V0 * v;
                }
        }
    return true;
}

} // namespace spc
