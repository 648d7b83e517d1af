#pragma once

#include <memory>
#include <span>
#include <vector>

#include <Eigen/SparseCore>

#include "spc/mesh.hpp"
#include "spc/types.hpp"

namespace spc {

/// Shape values, parent gradients, and the Jacobian of the deformed
/// configuration at a parent point.
struct ShapeEval {
    LVec N;       // d+1 values
    LMat dN_dxi;  // (d+1) x d, constant for linear simplices
    DMat j;       // dx/dxi in the deformed configuration
    double det_j = 1.0;
};

/// Parent-space part only: barycentric-linear shapes on the unit simplex with
/// N1 = 1 - sum(xi). j is left as the identity.
ShapeEval shape_simplex(const DVec& xi, int d);

/// Full evaluation on element e in the deformed configuration.
ShapeEval shape_at(const Mesh&, const Configuration&, int e, const DVec& xi);

/// Consistent simplex mass matrix entries: V * (1 + delta_KL) / ((d+1)(d+2)).
LMat simplex_mass_matrix(int d, double volume);

/// Dense numbering of unconstrained entries; constrained or inactive entries
/// map to -1.
struct DofMap {
    std::vector<int> index;
    int n_free = 0;

    void build(const std::vector<char>& active, const std::vector<char>& constrained);
    int operator[](size_t i) const { return index[i]; }
};

/// Row-compressed sparse operator plus right-hand side. The pattern is built
/// once from connectivity blocks; assembling an entry outside the pattern is
/// an error (it signals a missed connectivity update). Assembly is sequential
/// and therefore bit-deterministic.
class SparseSystem {
public:
    /// Symbolic build from dof blocks (all-to-all coupling within a block).
    /// Negative dof ids are ignored.
    void build_pattern(int n, const std::vector<std::vector<int>>& blocks);

    void begin_assembly();
    void add(int i, int j, double v);
    void add_rhs(int i, double v) { rhs_[i] += v; }

    /// Scatter a local matrix. dofs may contain -1 (constrained); if
    /// `prescribed` is non-empty it supplies values at constrained entries and
    /// the usual right-hand-side correction -K_fc * x_c is applied.
    void add_block(std::span<const int> dofs, const LMat& k,
                   std::span<const double> prescribed = {});

    int n() const { return n_; }
    int nnz() const { return static_cast<int>(col_idx_.size()); }
    const std::vector<int>& row_ptr() const { return row_ptr_; }
    const std::vector<int>& col_idx() const { return col_idx_; }
    const std::vector<double>& values() const { return vals_; }
    const Vec& rhs() const { return rhs_; }
    Vec& rhs() { return rhs_; }

    /// Multiply the assembled matrix by x (for residual checks).
    Vec multiply(const Vec& x) const;

private:
    int find(int i, int j) const;

    int n_ = 0;
    std::vector<int> row_ptr_, col_idx_;
    std::vector<double> vals_;
    Vec rhs_;
};

/// Direct SPD solve (sparse LDLT) meeting a relative-residual contract of
/// 1e-10. The symbolic factorization is reused until the pattern changes.
class SpdSolver {
public:
    SpdSolver();
    ~SpdSolver();
    SpdSolver(SpdSolver&&) noexcept;
    SpdSolver& operator=(SpdSolver&&) noexcept;

    /// Bind to (and symbolically factor) the system's current pattern.
    void set_pattern(const SparseSystem&);

    /// Factorize current values and solve for the current rhs.
    /// Throws SolveError on numerical failure or residual violation.
    Vec solve(const SparseSystem&);

private:
    Eigen::SparseMatrix<double> a_;   // column-major copy of the pattern
    std::vector<int> gather_;         // csr value index for each csc slot
    std::unique_ptr<class SpdSolverImpl> impl_;
    bool analyzed_ = false;
};

} // namespace spc
