#include "spc/fem.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/SparseCholesky>

#include "spc/error.hpp"

namespace spc {

ShapeEval shape_simplex(const DVec& xi, int d) {
    ShapeEval s;
    s.N.resize(d + 1);
    s.N[0] = 1.0;
    for (int k = 0; k < d; ++k) {
        s.N[k + 1] = xi[k];
        s.N[0] -= xi[k];
    }
    s.dN_dxi.setZero(d + 1, d);
    for (int k = 0; k < d; ++k) {
        s.dN_dxi(0, k) = -1.0;
        s.dN_dxi(k + 1, k) = 1.0;
    }
    s.j = DMat::Identity(d, d);
    s.det_j = 1.0;
    return s;
}

ShapeEval shape_at(const Mesh& m, const Configuration& cfg, int e, const DVec& xi) {
    ShapeEval s = shape_simplex(xi, m.dim);
    NodeMat x = elem_cur_coords(m, cfg, e);
    // j = dx/dxi: column k is the edge x_{k+1} - x_0.
    s.j.resize(m.dim, m.dim);
    for (int k = 0; k < m.dim; ++k)
        for (int c = 0; c < m.dim; ++c) s.j(c, k) = x(k + 1, c) - x(0, c);
    s.det_j = s.j.determinant();
    return s;
}

LMat simplex_mass_matrix(int d, double volume) {
    LMat mass(d + 1, d + 1);
    const double scale = volume / ((d + 1) * (d + 2));
    for (int a = 0; a <= d; ++a)
        for (int b = 0; b <= d; ++b) mass(a, b) = scale * (a == b ? 2.0 : 1.0);
    return mass;
}

void DofMap::build(const std::vector<char>& active, const std::vector<char>& constrained) {
    index.assign(active.size(), -1);
    n_free = 0;
    for (size_t i = 0; i < active.size(); ++i)
        if (active[i] && !constrained[i]) index[i] = n_free++;
}

void SparseSystem::build_pattern(int n, const std::vector<std::vector<int>>& blocks) {
    n_ = n;
    // Two-pass symbolic assembly: count row entries (with duplicates), fill,
    // then sort and compress each row.
    std::vector<int> count(n, 0);
    for (const auto& blk : blocks) {
        int live = 0;
        for (int d : blk)
            if (d >= 0) ++live;
        for (int d : blk)
            if (d >= 0) count[d] += live;
    }
    std::vector<int> start(n + 1, 0);
    for (int i = 0; i < n; ++i) start[i + 1] = start[i] + count[i];
    std::vector<int> cols(start[n]);
    std::vector<int> fill(start.begin(), start.end() - 1);
    for (const auto& blk : blocks) {
        for (int i : blk) {
            if (i < 0) continue;
            for (int j : blk)
                if (j >= 0) cols[fill[i]++] = j;
        }
    }
    row_ptr_.assign(n + 1, 0);
    col_idx_.clear();
    col_idx_.reserve(cols.size());
    for (int i = 0; i < n; ++i) {
        auto first = cols.begin() + start[i];
        auto last = cols.begin() + start[i + 1];
        std::sort(first, last);
        auto end = std::unique(first, last);
        col_idx_.insert(col_idx_.end(), first, end);
        row_ptr_[i + 1] = static_cast<int>(col_idx_.size());
    }
    vals_.assign(col_idx_.size(), 0.0);
    rhs_ = Vec::Zero(n_);
}

void SparseSystem::begin_assembly() {
    std::fill(vals_.begin(), vals_.end(), 0.0);
    rhs_.setZero();
}

int SparseSystem::find(int i, int j) const {
    const int *first = col_idx_.data() + row_ptr_[i], *last = col_idx_.data() + row_ptr_[i + 1];
    const int* it = std::lower_bound(first, last, j);
    if (it == last || *it != j)
        throw PatternError("entry (" + std::to_string(i) + "," + std::to_string(j) +
                           ") is outside the assembled pattern; connectivity update missed");
    return static_cast<int>(it - col_idx_.data());
}

void SparseSystem::add(int i, int j, double v) { vals_[find(i, j)] += v; }

void SparseSystem::add_block(std::span<const int> dofs, const LMat& k,
                             std::span<const double> prescribed) {
    const int nd = static_cast<int>(dofs.size());
    for (int a = 0; a < nd; ++a) {
        const int i = dofs[a];
        if (i < 0) continue;
        for (int b = 0; b < nd; ++b) {
            const int j = dofs[b];
            if (j >= 0)
                vals_[find(i, j)] += k(a, b);
            else if (!prescribed.empty())
                rhs_[i] -= k(a, b) * prescribed[b];
        }
    }
}

Vec SparseSystem::multiply(const Vec& x) const {
    Vec y = Vec::Zero(n_);
    for (int i = 0; i < n_; ++i)
        for (int p = row_ptr_[i]; p < row_ptr_[i + 1]; ++p) y[i] += vals_[p] * x[col_idx_[p]];
    return y;
}

class SpdSolverImpl {
public:
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt;
};

SpdSolver::SpdSolver() = default;
SpdSolver::~SpdSolver() = default;
SpdSolver::SpdSolver(SpdSolver&&) noexcept = default;
SpdSolver& SpdSolver::operator=(SpdSolver&&) noexcept = default;

void SpdSolver::set_pattern(const SparseSystem& sys) {
    const int n = sys.n();
    const auto& rp = sys.row_ptr();
    const auto& ci = sys.col_idx();

    // The CSR arrays reinterpreted column-major describe the transpose; the
    // pattern must be symmetric for that to be the same pattern.
    a_.resize(n, n);
    a_.reserve(sys.nnz());
    {
        std::vector<Eigen::Triplet<double>> trips;
        trips.reserve(sys.nnz());
        for (int i = 0; i < n; ++i)
            for (int p = rp[i]; p < rp[i + 1]; ++p) trips.emplace_back(i, ci[p], 1.0);
        a_.setFromTriplets(trips.begin(), trips.end());
    }
    a_.makeCompressed();

    // Map each csc slot (row r, col c) to the csr value position of (r, c).
    gather_.resize(sys.nnz());
    const int* outer = a_.outerIndexPtr();
    const int* inner = a_.innerIndexPtr();
    for (int c = 0; c < n; ++c) {
        for (int p = outer[c]; p < outer[c + 1]; ++p) {
            int r = inner[p];
            const int* first = ci.data() + rp[r];
            const int* last = ci.data() + rp[r + 1];
            const int* it = std::lower_bound(first, last, c);
            if (it == last || *it != c)
                throw PatternError("sparse pattern is not symmetric at (" + std::to_string(r) +
                                   "," + std::to_string(c) + ")");
            gather_[p] = static_cast<int>(it - ci.data());
        }
    }
    if (!impl_) impl_ = std::make_unique<SpdSolverImpl>();
    impl_->ldlt.analyzePattern(a_);
    analyzed_ = true;
}

Vec SpdSolver::solve(const SparseSystem& sys) {
    if (!analyzed_) throw SolveError("solve called before set_pattern");
    const auto& vals = sys.values();
    double* av = a_.valuePtr();
    for (size_t p = 0; p < gather_.size(); ++p) av[p] = vals[gather_[p]];

    impl_->ldlt.factorize(a_);
    if (impl_->ldlt.info() != Eigen::Success)
        throw SolveError("sparse LDLT factorization failed (matrix not SPD?)");
    Vec x = impl_->ldlt.solve(sys.rhs());
    if (!x.allFinite()) throw SolveError("linear solve produced non-finite values");

    const double bnorm = sys.rhs().norm();
    const double rnorm = (sys.multiply(x) - sys.rhs()).norm();
    if (bnorm > 0.0 && rnorm > 1e-10 * bnorm)
        throw SolveError("linear solve residual " + std::to_string(rnorm / bnorm) +
                         " exceeds 1e-10 (singular or ill-conditioned system)");
    return x;
}

} // namespace spc
