#include "spc/detection.hpp"

#include <algorithm>
#include <cmath>

#include "spc/error.hpp"
#include "spc/fem.hpp"

namespace spc {

namespace {

double max_elem_edge(const Mesh& m, const Configuration& cfg, int e) {
    NodeMat x = elem_cur_coords(m, cfg, e);
    double best = 0.0;
    for (int a = 0; a <= m.dim; ++a)
        for (int b = a + 1; b <= m.dim; ++b)
            best = std::max(best, (x.row(a) - x.row(b)).norm());
    return best;
}

DVec elem_centroid(const Mesh& m, const Configuration& cfg, int e) {
    NodeMat x = elem_cur_coords(m, cfg, e);
    DVec c = DVec::Zero(m.dim);
    for (int a = 0; a <= m.dim; ++a) c += x.row(a).transpose();
    return c / (m.dim + 1);
}

} // namespace

uint64_t BucketGrid::key(int ix, int iy, int iz) {
    auto enc = [](int v) { return static_cast<uint64_t>(static_cast<uint32_t>(v + (1 << 20))) & 0x1FFFFF; };
    return enc(ix) | (enc(iy) << 21) | (enc(iz) << 42);
}

int BucketGrid::cell_index(double coord) const { return static_cast<int>(std::floor(coord / cell)); }

uint64_t BucketGrid::key_of(const DVec& x) const {
    return key(cell_index(x[0]), cell_index(x[1]), x.size() > 2 ? cell_index(x[2]) : 0);
}

BucketGrid build_grid(const Mesh& m, const Configuration& cfg, const BoundaryInfo& boundary) {
    BucketGrid grid;
    for (int e = 0; e < m.n_elems(); ++e) grid.max_edge = std::max(grid.max_edge, max_elem_edge(m, cfg, e));
    grid.cell = grid.max_edge > 0.0 ? grid.max_edge : 1.0;
    for (int e = 0; e < m.n_elems(); ++e)
        grid.buckets[grid.key_of(elem_centroid(m, cfg, e))].elems.push_back(e);
    for (int n : boundary.exterior_nodes)
        grid.buckets[grid.key_of(current_coords(m, cfg, n))].nodes.push_back(n);
    return grid;
}

DetectionReport detect(const Mesh& m, const Configuration& cfg, const BoundaryInfo& boundary,
                       const BucketGrid& grid, const std::vector<ScalarField>* fields,
                       const ContactParams& params, const DetectionReport* previous,
                       const std::vector<char>& body_is_incident,
                       const std::vector<double>* node_weights) {
    DetectionReport rep;
    const int d = m.dim;
    const double tol = params.containment_tol;
    // Hysteresis band for gap ties: well below physical penetrations, well
    // above displacement noise, so nodes resting on shared target faces do
    // not hop between equal-gap elements across passes.
    const double tie_slack = 1e-7 * grid.max_edge;
    std::vector<int> prev_elem(previous ? m.n_nodes() : 0, -1);
    if (previous)
        for (const TargetAssignment& ta : previous->assignments) prev_elem[ta.node] = ta.elem;
    std::vector<int> candidates;

    for (int node : boundary.exterior_nodes) {
        const int body = m.node_body[node];
        if (body < static_cast<int>(body_is_incident.size()) && !body_is_incident[body]) continue;
        DVec x = current_coords(m, cfg, node);

        candidates.clear();
        const int icx = grid.cell_index(x[0]);
        const int icy = grid.cell_index(x[1]);
        const int icz = d > 2 ? grid.cell_index(x[2]) : 0;
        for (int dz = (d > 2 ? -1 : 0); dz <= (d > 2 ? 1 : 0); ++dz)
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx) {
                    auto it = grid.buckets.find(BucketGrid::key(icx + dx, icy + dy, icz + dz));
                    if (it == grid.buckets.end()) continue;
                    for (int e : it->second.elems)
                        if (m.elem_body[e] != body) candidates.push_back(e);
                }
        std::sort(candidates.begin(), candidates.end());

        int best_elem = -1;
        DVec best_xi;
        double best_g = std::numeric_limits<double>::infinity();
        bool best_is_prev = false;
        for (int e : candidates) {
            DVec c = elem_centroid(m, cfg, e);
            if ((x - c).norm() > 2.0 * max_elem_edge(m, cfg, e)) continue;
            ++rep.n_candidates_tested;
            NodeMat xN = elem_cur_coords(m, cfg, e);
            DVec xi;
            if (!project_to_simplex(xN, x, xi)) continue;
            double nmin = 1.0 - xi.sum(), nmax = nmin;
            for (int k = 0; k < d; ++k) {
                nmin = std::min(nmin, xi[k]);
                nmax = std::max(nmax, xi[k]);
            }
            // The incumbent element gets a wider containment window so that
            // displacement noise cannot flip a node resting on a shared face.
            const bool is_prev = previous && prev_elem[node] == e;
            const double tol_e = is_prev ? tol + 1e-6 : tol;
            if (nmin < -tol_e || nmax > 1.0 + tol_e) continue;

            double g = 0.0;
            if (fields) {
                const ScalarField& f = (*fields)[m.elem_body[e]];
                double phi = 1.0 - xi.sum();
                phi *= f.phi[m.elem(e)[0]];
                for (int k = 0; k < d; ++k) phi += xi[k] * f.phi[m.elem(e)[k + 1]];
                g = phi > 0.0 ? f.sign * f.gamma * std::log(phi) : 0.0;
            }
            // Deepest interference wins; within the hysteresis band the
            // incumbent element is kept, and equal gaps fall to the smaller
            // element index (candidates are index-sorted).
            bool take;
            if (best_elem < 0)
                take = true;
            else if (best_is_prev)
                take = g < best_g - tie_slack;
            else if (is_prev)
                take = g < best_g + tie_slack;
            else
                take = g < best_g - 1e-15 * std::abs(best_g);
            if (take) {
                best_elem = e;
                best_xi = xi;
                best_g = g;
                best_is_prev = is_prev;
            }
        }
        if (best_elem >= 0) {
            TargetAssignment ta;
            ta.node = node;
            ta.elem = best_elem;
            ta.xi = best_xi;
            ta.weight = node_weights ? (*node_weights)[node] : 1.0;
            ta.g = fields ? best_g : 0.0;
            rep.assignments.push_back(std::move(ta));
        }
    }

    // exterior_nodes is sorted, so assignments already are; make it explicit.
    std::sort(rep.assignments.begin(), rep.assignments.end(),
              [](const TargetAssignment& a, const TargetAssignment& b) { return a.node < b.node; });

    auto pair_of = [](const TargetAssignment& a) { return std::make_pair(a.node, a.elem); };
    if (previous) {
        std::vector<std::pair<int, int>> now, before;
        for (const auto& a : rep.assignments) now.push_back(pair_of(a));
        for (const auto& a : previous->assignments) before.push_back(pair_of(a));
        rep.changed = now != before;
        std::set_difference(before.begin(), before.end(), now.begin(), now.end(),
                            std::back_inserter(rep.released));
    } else {
        rep.changed = !rep.assignments.empty();
    }
    return rep;
}

} // namespace spc
