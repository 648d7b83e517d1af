#include "spc/contact.hpp"

#include <cmath>

#include "spc/error.hpp"
#include "spc/fem.hpp"

namespace spc {

namespace {

// Edge matrix of the target simplex (column k is x_{k+1} - x_0) and its
// inverse; false when numerically singular.
bool edge_inverse(const NodeMat& xN, DMat& G, double* det_out = nullptr) {
    const int d = static_cast<int>(xN.cols());
    DMat D(d, d);
    for (int k = 0; k < d; ++k)
        for (int c = 0; c < d; ++c) D(c, k) = xN(k + 1, c) - xN(0, c);
    double det = D.determinant();
    if (det_out) *det_out = det;
    double scale = D.cwiseAbs().maxCoeff();
    if (scale <= 0.0 || std::abs(det) < 1e-30 * std::pow(scale, d)) return false;
    G = D.inverse();
    return true;
}

} // namespace

bool project_to_simplex(const NodeMat& xN, const DVec& xI, DVec& xi) {
    DMat G;
    if (!edge_inverse(xN, G)) return false;
    xi = G * (xI - xN.row(0).transpose());
    return true;
}

bool projection_derivatives(const NodeMat& xN, const DVec& xI, ProjectionDerivatives& out) {
    const int d = static_cast<int>(xN.cols());
    const int n = d * (d + 2);
    DMat G;
    if (!edge_inverse(xN, G)) return false;
    DVec xi = G * (xI - xN.row(0).transpose());
    ShapeEval s = shape_simplex(xi, d);

    // d xi = G [ d x_I - sum_K N_K d x_K ]; column a of A follows with
    // d x_C = e_a.
    out.A.resize(d, n);
    for (int a = 0; a < n; ++a) {
        const int node = a / d, comp = a % d;
        if (node <= d)
            out.A.col(a) = -s.N[node] * G.col(comp);
        else
            out.A.col(a) = G.col(comp);
    }

    // Second derivative: differentiate column a along e_b. The edge-matrix
    // variation contributes -G (d_b D) A_a; the shape-value variation
    // contributes -(dN_node_a . A_b) G e_{comp_a} for target columns.
    for (int i = 0; i < d; ++i) out.second[i].setZero(n, n);
    DMat dD(d, d);
    for (int b = 0; b < n; ++b) {
        const int nb = b / d, cb = b % d;
        dD.setZero();
        if (nb == 0)
            dD.row(cb).setConstant(-1.0);
        else if (nb <= d)
            dD(cb, nb - 1) = 1.0;
        DMat GdD = G * dD;
        for (int a = 0; a < n; ++a) {
            const int na = a / d, ca = a % d;
            DVec col = -GdD * out.A.col(a);
            if (na <= d) {
                double slope = 0.0;
                for (int k = 0; k < d; ++k) slope += s.dN_dxi(na, k) * out.A(k, b);
                col -= slope * G.col(ca);
            }
            for (int i = 0; i < d; ++i) out.second[i](a, b) = col[i];
        }
    }
    return true;
}

ContactEval contact_element(const Mesh& m, const Configuration& cfg, const ScalarField& field,
                            const TargetAssignment& ta, const ContactParams& params) {
    const int d = m.dim;
    const int n = d * (d + 2);
    ContactEval ev;
    ev.residual.setZero(n);
    ev.stiffness.setZero(n, n);
    ev.grad_g = DVec::Zero(d);

    NodeMat xN = elem_cur_coords(m, cfg, ta.elem);
    DVec xI = current_coords(m, cfg, ta.node);
    ProjectionDerivatives pd;
    if (!projection_derivatives(xN, xI, pd)) {
        ev.ok = false;  // degenerate target; let the step fail
        return ev;
    }
    DMat G;
    edge_inverse(xN, G);
    DVec xi = G * (xI - xN.row(0).transpose());
    ShapeEval s = shape_simplex(xi, d);

    const int* en = m.elem(ta.elem);
    double phi = 0.0;
    DVec grad_phi_xi = DVec::Zero(d);
    for (int a = 0; a <= d; ++a) {
        const double pa = field.phi[en[a]];
        phi += s.N[a] * pa;
        for (int k = 0; k < d; ++k) grad_phi_xi[k] += s.dN_dxi(a, k) * pa;
    }
    if (!(phi > 0.0)) {
        ev.ok = false;
        return ev;
    }
    ev.phi = phi;

    const double sg = field.sign * field.gamma;
    ev.g = sg * std::log(phi);
    // Spatial gradient through the incident block of A (equals j^{-T} dphi/dxi).
    LVec dphi = (grad_phi_xi.transpose() * pd.A).transpose();  // n
    for (int c = 0; c < d; ++c) ev.grad_g[c] = (sg / phi) * dphi[d * (d + 1) + c];

    if (ev.g >= 0.0) return ev;  // open gap: exactly zero force and stiffness
    ev.active = true;

    const double kappa = effective_kappa(params, ta.weight);
    LVec grad_g = (sg / phi) * dphi;

    // Hessian of g over x_C: the parent-space phi gradient is constant, so
    // only the projection curvature and the rank-one log term survive.
    LMat hess_phi(n, n);
    hess_phi.setZero();
    for (int i = 0; i < d; ++i) hess_phi += grad_phi_xi[i] * pd.second[i];
    LMat hess_g = (sg / phi) * hess_phi - (sg / (phi * phi)) * (dphi * dphi.transpose());

    ev.residual = -kappa * ev.g * ev.g * grad_g;
    ev.stiffness = -2.0 * kappa * ev.g * (grad_g * grad_g.transpose()) - kappa * ev.g * ev.g * hess_g;
    return ev;
}

std::vector<double> tributary_boundary_measure(const Mesh& m, const Configuration& cfg,
                                               const BoundaryInfo& boundary) {
    std::vector<double> w(m.n_nodes(), 0.0);
    for (const auto& [e, f] : boundary.exterior_faces) {
        auto fn = face_nodes(m, e, f);
        double measure;
        if (m.dim == 2) {
            measure = (current_coords(m, cfg, fn[1]) - current_coords(m, cfg, fn[0])).norm();
        } else {
            Eigen::Vector3d a = current_coords(m, cfg, fn[1]) - current_coords(m, cfg, fn[0]);
            Eigen::Vector3d b = current_coords(m, cfg, fn[2]) - current_coords(m, cfg, fn[0]);
            measure = 0.5 * a.cross(b).norm();
        }
        for (int k = 0; k < m.dim; ++k) w[fn[k]] += measure / m.dim;
    }
    return w;
}

double effective_kappa(const ContactParams& p, double weight) {
    return p.weighting == Weighting::edge_projection ? p.kappa * weight : p.kappa;
}

} // namespace spc
