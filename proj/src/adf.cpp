#include "spc/adf.hpp"

#include <algorithm>
#include <cmath>

#include "spc/error.hpp"

namespace spc {

AdfSolver::AdfSolver(const Mesh& m, const BoundaryInfo& boundary, int body, const AdfParams& p)
    : AdfSolver(m, boundary.body_exterior_nodes.at(body), body, p) {}

AdfSolver::AdfSolver(const Mesh& m, std::vector<int> dirichlet_nodes, int body, const AdfParams& p)
    : mesh_(m), dirichlet_(std::move(dirichlet_nodes)), params_(p), body_(body) {
    if (dirichlet_.empty()) throw Error("adf: body " + std::to_string(body) + " has no boundary nodes");

    for (int e = 0; e < m.n_elems(); ++e)
        if (m.elem_body[e] == body) body_elems_.push_back(e);
    if (body_elems_.empty()) throw Error("adf: body " + std::to_string(body) + " has no elements");

    std::vector<char> active(m.n_nodes(), 0);
    for (int e : body_elems_)
        for (int a = 0; a <= m.dim; ++a) active[m.elem(e)[a]] = 1;
    is_dirichlet_.assign(m.n_nodes(), 0);
    for (int n : dirichlet_) is_dirichlet_[n] = 1;
    dofs_.build(active, is_dirichlet_);

    std::vector<std::vector<int>> blocks;
    blocks.reserve(body_elems_.size());
    for (int e : body_elems_) {
        std::vector<int> blk(m.dim + 1);
        for (int a = 0; a <= m.dim; ++a) blk[a] = dofs_[m.elem(e)[a]];
        blocks.push_back(std::move(blk));
    }
    sys_.build_pattern(dofs_.n_free, blocks);
    solver_.set_pattern(sys_);
}

ScalarField AdfSolver::solve(const Configuration& cfg) {
    const int d = mesh_.dim;
    const double c_L = params_.c_L();
    sys_.begin_assembly();

    LMat ke(d + 1, d + 1);
    std::vector<int> dofs(d + 1);
    std::vector<double> presc(d + 1, 1.0);  // phi = 1 on the boundary
    for (int e : body_elems_) {
        double vol = element_signed_volume(mesh_, &cfg, e);
        if (vol <= 0.0)
            throw StepError("adf: element " + std::to_string(e) +
                            " degenerate in deformed configuration");
        ShapeEval s = shape_at(mesh_, cfg, e, DVec::Zero(d));
        LMat B = s.dN_dxi * s.j.inverse();  // spatial gradients, constant
        ke = c_L * vol * (B * B.transpose());
        ke += simplex_mass_matrix(d, vol);
        for (int a = 0; a <= d; ++a) dofs[a] = dofs_[mesh_.elem(e)[a]];
        sys_.add_block(dofs, ke, presc);
    }

    Vec x = solver_.solve(sys_);

    ScalarField f;
    f.phi.assign(mesh_.n_nodes(), 0.0);
    f.body = body_;
    f.c_L = c_L;
    f.gamma = params_.gamma();
    f.sign = params_.sign;
    for (int n = 0; n < mesh_.n_nodes(); ++n) {
        if (is_dirichlet_[n])
            f.phi[n] = 1.0;
        else if (dofs_[n] >= 0)
            f.phi[n] = x[dofs_[n]];
    }
    return f;
}

GapEval eval_gap(const Mesh& m, const Configuration& cfg, const ScalarField& f, int elem,
                 const DVec& xi) {
    const int d = m.dim;
    ShapeEval s = shape_at(m, cfg, elem, xi);
    const int* en = m.elem(elem);
    double phi = 0.0;
    DVec grad_phi_xi = DVec::Zero(d);
    for (int a = 0; a <= d; ++a) {
        const double pa = f.phi[en[a]];
        phi += s.N[a] * pa;
        for (int k = 0; k < d; ++k) grad_phi_xi[k] += s.dN_dxi(a, k) * pa;
    }
    if (!(phi > 0.0))
        throw FieldError("gap evaluation at phi = " + std::to_string(phi) +
                         " (field corrupt or evaluated off-body)");

    GapEval out;
    out.phi = phi;
    out.g = f.sign * f.gamma * std::log(phi);
    DVec grad_phi = s.j.inverse().transpose() * grad_phi_xi;  // spatial gradient
    out.grad = (f.sign * f.gamma / phi) * grad_phi;
    // lap(phi) vanishes inside a linear element, leaving the rank-one term.
    out.hess = (-f.sign * f.gamma / (phi * phi)) * (grad_phi * grad_phi.transpose());
    return out;
}

std::vector<VaradhanRow> varadhan_limit_check(
    const Mesh& m, const Configuration& cfg, const std::vector<int>& dirichlet_nodes, int body,
    const std::vector<double>& lc_sweep, const std::function<double(const DVec&)>& exact_distance,
    const AdfParams& base) {
    std::vector<VaradhanRow> table;
    std::vector<char> is_bc(m.n_nodes(), 0);
    for (int n : dirichlet_nodes) is_bc[n] = 1;

    for (double lc : lc_sweep) {
        AdfParams p = base;
        p.l_c = lc;
        AdfSolver solver(m, dirichlet_nodes, body, p);
        ScalarField f = solver.solve(cfg);

        VaradhanRow row;
        row.l_c = lc;
        row.min_phi = 1.0;
        for (int n = 0; n < m.n_nodes(); ++n) {
            if (m.node_body[n] != body) continue;
            row.min_phi = std::min(row.min_phi, f.phi[n]);
            if (is_bc[n]) continue;
            double adf;
            if (f.phi[n] > 0.0)
                adf = -f.gamma * std::log(f.phi[n]);  // unsigned ADF
            else
                adf = std::numeric_limits<double>::infinity();
            row.max_err = std::max(row.max_err, std::abs(adf - exact_distance(current_coords(m, cfg, n))));
        }
        row.warning = !(row.min_phi > 0.0);
        if (!table.empty() && row.max_err > table.back().max_err) row.warning = true;
        table.push_back(row);
    }
    return table;
}

} // namespace spc
