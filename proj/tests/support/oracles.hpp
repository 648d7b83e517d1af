#pragma once

// Test-side oracles kept independent of the library code paths they check:
// finite differences, dense solves, brute-force containment, and seeded
// random geometry.

#include <functional>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "spc/contact.hpp"
#include "spc/mesh.hpp"
#include "spc/types.hpp"

namespace oracles {

using spc::DVec;
using spc::NodeMat;

inline double rel_err(double got, double want, double scale) {
    return std::abs(got - want) / std::max(std::abs(want), scale);
}

/// Central finite-difference derivative of a scalar function.
inline double fd_scalar(const std::function<double(double)>& f, double x0, double h) {
    return (f(x0 + h) - f(x0 - h)) / (2.0 * h);
}

/// Central FD gradient of f : R^n -> R^m, returned as m x n.
inline Eigen::MatrixXd fd_jacobian(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f,
                                   Eigen::VectorXd x, double h) {
    Eigen::VectorXd f0 = f(x);
    Eigen::MatrixXd J(f0.size(), x.size());
    for (int i = 0; i < x.size(); ++i) {
        const double xi = x[i];
        x[i] = xi + h;
        Eigen::VectorXd fp = f(x);
        x[i] = xi - h;
        Eigen::VectorXd fm = f(x);
        x[i] = xi;
        J.col(i) = (fp - fm) / (2.0 * h);
    }
    return J;
}

/// Well-conditioned random simplex: vertices in [-1,1]^d, positively oriented,
/// rejected while the edge matrix is nearly singular.
inline NodeMat random_simplex(std::mt19937& rng, int d, double min_det = 0.2) {
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    for (;;) {
        NodeMat x(d + 1, d);
        for (int a = 0; a <= d; ++a)
            for (int c = 0; c < d; ++c) x(a, c) = unif(rng);
        Eigen::MatrixXd D(d, d);
        for (int k = 0; k < d; ++k)
            for (int c = 0; c < d; ++c) D(c, k) = x(k + 1, c) - x(0, c);
        if (D.determinant() > min_det) return x;
    }
}

/// Random interior barycentric weights biased away from the faces.
inline Eigen::VectorXd random_interior_bary(std::mt19937& rng, int d, double margin = 0.08) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (;;) {
        Eigen::VectorXd b(d + 1);
        double s = 0.0;
        for (int k = 0; k <= d; ++k) s += (b[k] = -std::log(unif(rng)));
        b /= s;
        if (b.minCoeff() > margin) return b;
    }
}

/// Dense-grid argmin of |x(xi) - p| over the parent simplex.
inline DVec grid_argmin_projection(const NodeMat& xN, const DVec& p, int n_grid) {
    const int d = static_cast<int>(xN.cols());
    DVec best = DVec::Zero(d);
    double best_val = std::numeric_limits<double>::infinity();
    auto eval = [&](const DVec& xi) {
        DVec x = xN.row(0).transpose() * (1.0 - xi.sum());
        for (int k = 0; k < d; ++k) x += xi[k] * xN.row(k + 1).transpose();
        return (x - p).norm();
    };
    DVec xi(d);
    if (d == 2) {
        for (int i = 0; i <= n_grid; ++i)
            for (int j = 0; j + i <= n_grid; ++j) {
                xi << double(i) / n_grid, double(j) / n_grid;
                double v = eval(xi);
                if (v < best_val) {
                    best_val = v;
                    best = xi;
                }
            }
    } else {
        for (int i = 0; i <= n_grid; ++i)
            for (int j = 0; j + i <= n_grid; ++j)
                for (int k = 0; k + j + i <= n_grid; ++k) {
                    xi << double(i) / n_grid, double(j) / n_grid, double(k) / n_grid;
                    double v = eval(xi);
                    if (v < best_val) {
                        best_val = v;
                        best = xi;
                    }
                }
    }
    return best;
}

/// All-pairs containment detection, the broad-phase-free reference.
struct BrutePair {
    int node, elem;
    bool operator==(const BrutePair&) const = default;
    auto operator<=>(const BrutePair&) const = default;
};

inline std::vector<BrutePair> brute_force_containment(const spc::Mesh& m,
                                                      const spc::Configuration& cfg,
                                                      const spc::BoundaryInfo& boundary,
                                                      double tol = 1e-12) {
    std::vector<BrutePair> pairs;
    for (int node : boundary.exterior_nodes) {
        DVec x = spc::current_coords(m, cfg, node);
        for (int e = 0; e < m.n_elems(); ++e) {
            if (m.elem_body[e] == m.node_body[node]) continue;
            NodeMat xN = spc::elem_cur_coords(m, cfg, e);
            DVec xi;
            if (!spc::project_to_simplex(xN, x, xi)) continue;
            double nmin = 1.0 - xi.sum(), nmax = nmin;
            for (int k = 0; k < m.dim; ++k) {
                nmin = std::min(nmin, xi[k]);
                nmax = std::max(nmax, xi[k]);
            }
            if (nmin >= -tol && nmax <= 1.0 + tol) pairs.push_back({node, e});
        }
    }
    return pairs;
}

} // namespace oracles
