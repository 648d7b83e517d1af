#pragma once

#include <functional>
#include <vector>

#include "spc/fem.hpp"
#include "spc/mesh.hpp"

namespace spc {

enum class GapNorm {
    sqrt_cl,  // gamma = l_c = sqrt(c_L); recovers exact distance on a half space
    paper     // gamma = c_L as printed
};

struct AdfParams {
    double l_c = 0.2;
    GapNorm norm = GapNorm::sqrt_cl;
    int sign = +1;  // '+': interior points get a negative gap

    double c_L() const { return l_c * l_c; }
    double gamma() const { return norm == GapNorm::sqrt_cl ? l_c : l_c * l_c; }
};

/// Nodal solution of c_L lap(phi) = phi on one body's deformed configuration
/// with phi = 1 on its boundary, plus the transform parameters that turn it
/// into a signed gap.
struct ScalarField {
    std::vector<double> phi;  // full node array; meaningful on the body's nodes
    int body = 0;
    double c_L = 0.0;
    double gamma = 0.0;
    int sign = +1;
};

/// Per-body screened Poisson solver. The sparsity pattern and symbolic
/// factorization are built once; each solve reassembles on the current
/// deformed configuration.
class AdfSolver {
public:
    /// Dirichlet nodes default to the body's exterior nodes.
    AdfSolver(const Mesh&, const BoundaryInfo&, int body, const AdfParams&);
    AdfSolver(const Mesh&, std::vector<int> dirichlet_nodes, int body, const AdfParams&);

    ScalarField solve(const Configuration&);

    const std::vector<int>& dirichlet_nodes() const { return dirichlet_; }

private:
    const Mesh& mesh_;
    std::vector<int> body_elems_;
    std::vector<int> dirichlet_;
    std::vector<char> is_dirichlet_;
    DofMap dofs_;
    SparseSystem sys_;
    SpdSolver solver_;
    AdfParams params_;
    int body_;
};

struct GapEval {
    double g = 0.0;
    DVec grad;   // spatial gradient, unit magnitude where the field is exact
    DMat hess;   // spatial Hessian; the lap(phi) term vanishes in linear elements
    double phi = 1.0;
};

/// Signed gap g = sign * gamma * log(phi) and its spatial derivatives at a
/// parent point of an element carrying the field. Throws FieldError when the
/// interpolated phi is not positive.
GapEval eval_gap(const Mesh&, const Configuration&, const ScalarField&, int elem, const DVec& xi);

struct VaradhanRow {
    double l_c = 0.0;
    double max_err = 0.0;  // max |ADF - exact distance| over non-Dirichlet nodes
    double min_phi = 0.0;
    bool warning = false;  // phi lost positivity or the error grew vs the previous row
};

/// Error table of the ADF against an exact distance function for a sweep of
/// decreasing l_c values (largest first by convention).
std::vector<VaradhanRow> varadhan_limit_check(
    const Mesh&, const Configuration&, const std::vector<int>& dirichlet_nodes, int body,
    const std::vector<double>& lc_sweep, const std::function<double(const DVec&)>& exact_distance,
    const AdfParams& base);

} // namespace spc
