#pragma once

#include <cstdint>
#include <unordered_map>
#include <vector>

#include "spc/contact.hpp"
#include "spc/mesh.hpp"

namespace spc {

/// Uniform spatial hash over deformed coordinates. Elements are binned by
/// centroid, exterior nodes by position. Cell size is at least the largest
/// deformed element edge so a 3^d stencil suffices for containment queries.
struct BucketGrid {
    double cell = 1.0;
    double max_edge = 0.0;

    struct Bucket {
        std::vector<int> elems;
        std::vector<int> nodes;
    };
    std::unordered_map<uint64_t, Bucket> buckets;

    static uint64_t key(int ix, int iy, int iz);
    uint64_t key_of(const DVec& x) const;
    int cell_index(double coord) const;  // floor convention; boundary goes up
};

BucketGrid build_grid(const Mesh&, const Configuration&, const BoundaryInfo&);

struct DetectionReport {
    std::vector<TargetAssignment> assignments;      // sorted by incident node
    bool changed = false;                           // pairing differs from previous
    std::vector<std::pair<int, int>> released;      // pairs no longer assigned
    int n_candidates_tested = 0;
};

/// Scan every exterior node of an incident-enabled body against elements of
/// other bodies in the surrounding 3^d cells. An element whose centroid is
/// farther than twice its own longest edge is culled; containment is decided
/// in closed form from the parent coordinates. A node contained by several
/// elements resolves to the smallest gap (fields permitting), then to the
/// smallest element index.
DetectionReport detect(const Mesh&, const Configuration&, const BoundaryInfo&, const BucketGrid&,
                       const std::vector<ScalarField>* fields, const ContactParams&,
                       const DetectionReport* previous,
                       const std::vector<char>& body_is_incident,
                       const std::vector<double>* node_weights = nullptr);

} // namespace spc
