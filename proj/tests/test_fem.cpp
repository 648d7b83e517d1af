#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "spc/adf.hpp"
#include "spc/error.hpp"
#include "spc/fem.hpp"
#include "spc/meshgen.hpp"

using namespace spc;

TEST_CASE("simplex shapes at centroid and vertices") {
    DVec xi(2);
    xi << 1.0 / 3.0, 1.0 / 3.0;
    ShapeEval s = shape_simplex(xi, 2);
    CHECK(s.N[0] == doctest::Approx(1.0 / 3.0));
    CHECK(s.N[1] == doctest::Approx(1.0 / 3.0));
    CHECK(s.N[2] == doctest::Approx(1.0 / 3.0));

    xi.setZero();
    s = shape_simplex(xi, 2);
    CHECK(s.N[0] == 1.0);
    CHECK(s.N[1] == 0.0);
    CHECK(s.N[2] == 0.0);
}

TEST_CASE("partition of unity and zero gradient sum at random parent points") {
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int d : {2, 3}) {
        for (int trial = 0; trial < 1000; ++trial) {
            DVec xi(d);
            double rest = 1.0;
            for (int k = 0; k < d; ++k) {
                xi[k] = rest * unif(rng);
                rest -= xi[k];
            }
            ShapeEval s = shape_simplex(xi, d);
            CHECK(std::abs(s.N.sum() - 1.0) <= 1e-15);
            for (int k = 0; k < d; ++k) CHECK(std::abs(s.dN_dxi.col(k).sum()) <= 1e-15);
        }
    }
}

TEST_CASE("simplex mass matrix integrates to the volume") {
    for (int d : {2, 3}) {
        LMat mass = simplex_mass_matrix(d, 3.5);
        CHECK(mass.sum() == doctest::Approx(3.5));
        CHECK((mass - mass.transpose()).norm() == 0.0);
    }
}

namespace {

SparseSystem two_dof_system() {
    SparseSystem sys;
    sys.build_pattern(2, {{0, 1}});
    return sys;
}

} // namespace

TEST_CASE("sparse accumulation sums repeated contributions") {
    SparseSystem sys = two_dof_system();
    sys.begin_assembly();
    sys.add(0, 0, 1.5);
    sys.add(0, 0, 2.0);
    CHECK(sys.values()[0] == 3.5);
}

TEST_CASE("entries outside the pattern are an error until a rebuild") {
    SparseSystem sys;
    sys.build_pattern(3, {{0, 1}});
    sys.begin_assembly();
    CHECK_THROWS_AS(sys.add(0, 2, 1.0), PatternError);
    // The rebuild mirrors a detection-triggered connectivity update.
    sys.build_pattern(3, {{0, 1}, {0, 2}});
    sys.begin_assembly();
    CHECK_NOTHROW(sys.add(0, 2, 1.0));
}

TEST_CASE("identity solve returns the right-hand side") {
    SparseSystem sys;
    sys.build_pattern(4, {{0}, {1}, {2}, {3}});
    sys.begin_assembly();
    for (int i = 0; i < 4; ++i) {
        sys.add(i, i, 1.0);
        sys.add_rhs(i, 0.5 * i);
    }
    SpdSolver solver;
    solver.set_pattern(sys);
    Vec x = solver.solve(sys);
    for (int i = 0; i < 4; ++i) CHECK(x[i] == doctest::Approx(0.5 * i));
}

TEST_CASE("hand-solved 2x2 SPD system") {
    SparseSystem sys = two_dof_system();
    sys.begin_assembly();
    sys.add(0, 0, 2.0);
    sys.add(0, 1, 1.0);
    sys.add(1, 0, 1.0);
    sys.add(1, 1, 2.0);
    sys.add_rhs(0, 1.0);
    sys.add_rhs(1, 1.0);
    SpdSolver solver;
    solver.set_pattern(sys);
    Vec x = solver.solve(sys);
    CHECK(x[0] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(x[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("singular systems are reported") {
    SparseSystem sys = two_dof_system();
    sys.begin_assembly();
    sys.add(0, 0, 1.0);
    sys.add(0, 1, 1.0);
    sys.add(1, 0, 1.0);
    sys.add(1, 1, 1.0);
    sys.add_rhs(0, 1.0);
    sys.add_rhs(1, -1.0);  // not in the range of the rank-1 matrix
    SpdSolver solver;
    solver.set_pattern(sys);
    CHECK_THROWS_AS(solver.solve(sys), SolveError);
}

namespace {

// Assemble the screened-Poisson operator on a small strip and solve both with
// the sparse path and with a dense factorization oracle.
struct StripSystem {
    Mesh mesh;
    DofMap dofs;
    SparseSystem sys;
    Eigen::MatrixXd dense;
    Vec rhs;
};

StripSystem assemble_strip(double c_L) {
    StripSystem s{meshgen::rect(0, 0, 1.0, 0.25, 8, 2), {}, {}, {}, {}};
    Configuration cfg = Configuration::zero(s.mesh);

    std::vector<char> active(s.mesh.n_nodes(), 1), dirichlet(s.mesh.n_nodes(), 0);
    for (int n = 0; n < s.mesh.n_nodes(); ++n)
        if (std::abs(s.mesh.coords[2 * n]) < 1e-12) dirichlet[n] = 1;
    s.dofs.build(active, dirichlet);

    std::vector<std::vector<int>> blocks;
    for (int e = 0; e < s.mesh.n_elems(); ++e) {
        std::vector<int> blk(3);
        for (int a = 0; a < 3; ++a) blk[a] = s.dofs[s.mesh.elem(e)[a]];
        blocks.push_back(blk);
    }
    s.sys.build_pattern(s.dofs.n_free, blocks);
    s.sys.begin_assembly();
    s.dense.setZero(s.dofs.n_free, s.dofs.n_free);
    s.rhs = Vec::Zero(s.dofs.n_free);

    std::vector<int> dofs(3);
    std::vector<double> presc(3, 1.0);
    for (int e = 0; e < s.mesh.n_elems(); ++e) {
        double vol = element_signed_volume(s.mesh, &cfg, e);
        ShapeEval sh = shape_at(s.mesh, cfg, e, DVec::Zero(2));
        LMat B = sh.dN_dxi * sh.j.inverse();
        LMat ke = c_L * vol * (B * B.transpose());
        ke += simplex_mass_matrix(2, vol);
        for (int a = 0; a < 3; ++a) dofs[a] = s.dofs[s.mesh.elem(e)[a]];
        s.sys.add_block(dofs, ke, presc);
        for (int a = 0; a < 3; ++a) {
            if (dofs[a] < 0) continue;
            for (int b = 0; b < 3; ++b) {
                if (dofs[b] >= 0)
                    s.dense(dofs[a], dofs[b]) += ke(a, b);
                else
                    s.rhs[dofs[a]] -= ke(a, b);
            }
        }
    }
    return s;
}

} // namespace

TEST_CASE("screened-Poisson strip system matches a dense factorization oracle") {
    StripSystem s = assemble_strip(0.04);
    CHECK((s.rhs - s.sys.rhs()).norm() <= 1e-14 * s.rhs.norm());
    SpdSolver solver;
    solver.set_pattern(s.sys);
    Vec x_sparse = solver.solve(s.sys);
    Vec x_dense = s.dense.ldlt().solve(s.rhs);
    CHECK((x_sparse - x_dense).norm() <= 1e-8 * x_dense.norm());
}

TEST_CASE("assembly is bit-deterministic") {
    StripSystem a = assemble_strip(0.04);
    StripSystem b = assemble_strip(0.04);
    REQUIRE(a.sys.values().size() == b.sys.values().size());
    CHECK(a.sys.values() == b.sys.values());
    for (int i = 0; i < a.sys.rhs().size(); ++i) CHECK(a.sys.rhs()[i] == b.sys.rhs()[i]);
}

TEST_CASE("essential-BC elimination preserves symmetry of the reduced operator") {
    StripSystem s = assemble_strip(0.09);
    CHECK((s.dense - s.dense.transpose()).cwiseAbs().maxCoeff() <=
          1e-14 * s.dense.cwiseAbs().maxCoeff());
    // and the sparse values agree with the dense mirror
    Vec probe = Vec::LinSpaced(s.dofs.n_free, 0.3, 1.7);
    Vec y_sparse = s.sys.multiply(probe);
    Vec y_dense = s.dense * probe;
    CHECK((y_sparse - y_dense).norm() <= 1e-13 * y_dense.norm());
}
