#pragma once

#include <memory>
#include <string>
#include <vector>

#include "spc/adf.hpp"
#include "spc/contact.hpp"
#include "spc/detection.hpp"
#include "spc/material.hpp"

namespace spc {

struct Box {
    std::array<double, 3> lo{0, 0, 0}, hi{0, 0, 0};
    bool contains(const DVec& x, int dim) const {
        for (int c = 0; c < dim; ++c)
            if (x[c] < lo[c] - 1e-9 || x[c] > hi[c] + 1e-9) return false;
        return true;
    }
};

struct BodySetup {
    std::string name;
    MaterialParams material;
    bool rigid = false;     // all displacement dofs constrained; still carries phi
    bool incident = true;   // exterior nodes participate as incident nodes
};

/// Prescribed displacement on the reference-box selection of a body's nodes,
/// scaled by the load factor. comp_mask bit c constrains component c.
struct DirichletBc {
    std::string name;
    int body = 0;
    Box box;
    unsigned comp_mask = 0;
    DVec value;  // target displacement at lambda = 1 (entries for masked comps)
};

/// Dead surface load per unit reference area on exterior faces whose nodes all
/// lie in the box, scaled by the load factor.
struct TractionBc {
    int body = 0;
    Box box;
    DVec traction;
};

struct SolverParams {
    double dt = 0.01, dt_min = 1e-6, dt_max = 0.01, t_end = 1.0;
    double tol_rel = 1e-10;  // vs first-iteration residual norm
    double tol_abs = 1e-8;   // vs running reference force
    int max_iterations = 25;
    double damping = 0.0;    // volume-weighted viscous coefficient
    double dt_growth = 1.2;
    int grow_after = 5;          // consecutive successes before dt grows
    int target_retry_limit = 5;  // post-convergence target revisions per step
    bool phi_per_iteration = false;
};

struct StepRecord {
    int step = 0;
    double t = 0.0, dt = 0.0;
    int iterations = 0;   // Newton solves
    int retries = 0;      // post-convergence target revisions
    int rebuilds = 0;     // connectivity rebuilds triggered by target changes
    double v_max = 0.0;   // max over assignments of -min(0, g)
    int n_contacts = 0;   // active assignments
    std::vector<double> residual_history;
    std::vector<double> reactions;  // per Dirichlet set, dim components each
};

struct RunCounters {
    long phi_solves = 0;
    long newton_iterations = 0;
    long pattern_rebuilds = 0;
    long detections = 0;
    long step_attempts = 0;
};

struct ContactSample {
    int node = -1, elem = -1;
    double g = 0.0, weight = 1.0;
    bool active = false;
    DVec force;  // on the incident node
};

/// Staggered quasi-static run: per accepted step the load factor advances by
/// dt; phi is re-solved per body on the deformed configuration, targets are
/// detected, and displacements are Newton-iterated with both frozen. After
/// convergence the targets are re-verified; changes trigger bounded re-
/// iteration, failures halve dt.
class Run {
public:
    Run(Mesh mesh, std::vector<BodySetup> bodies, std::vector<DirichletBc> dirichlet,
        std::vector<TractionBc> tractions, AdfParams adf, ContactParams contact,
        SolverParams params);

    // The per-body solvers hold references into this object; construction in
    // place (prvalue return) is fine, moving afterwards is not.
    Run(const Run&) = delete;
    Run(Run&&) = delete;

    bool finished() const { return t_ >= params_.t_end - 1e-12; }
    /// Advance one accepted step (with internal dt retries). Throws Error when
    /// the step fails at dt_min; the last accepted state is retained.
    StepRecord step();

    const Mesh& mesh() const { return mesh_; }
    const BoundaryInfo& boundary() const { return boundary_; }
    const Configuration& config() const { return cfg_; }
    const std::vector<ScalarField>& fields() const { return fields_; }
    const DetectionReport& report() const { return report_; }
    const RunCounters& counters() const { return counters_; }
    const SolverParams& params() const { return params_; }
    double t() const { return t_; }
    double dt() const { return dt_; }
    int step_index() const { return step_index_; }
    int n_dirichlet() const { return static_cast<int>(dirichlet_.size()); }
    const std::string& dirichlet_name(int i) const { return dirichlet_[i].name; }

    std::vector<ContactSample> contact_samples() const;
    double total_strain_energy() const;
    std::vector<double> phi_nodal() const;
    std::vector<double> gap_nodal() const;

    void save_state(const std::string& path) const;
    void load_state(const std::string& path);

private:
    bool newton(double lam, double dt_eff, const DetectionReport& rep,
                std::vector<double>& history, int& iterations);
    bool assemble(double lam, double dt_eff, const DetectionReport& rep, bool with_matrix,
                  Vec& r_free);
    void build_pattern(const DetectionReport& rep);
    void apply_dirichlet(double lam);
    void solve_phi();

    Mesh mesh_;
    BoundaryInfo boundary_;
    std::vector<BodySetup> bodies_;
    std::vector<DirichletBc> dirichlet_;
    std::vector<std::vector<int>> dirichlet_nodes_;
    AdfParams adf_params_;
    ContactParams contact_params_;
    SolverParams params_;

    int d_ = 2;
    std::vector<char> dof_fixed_;
    std::vector<double> dof_target_;  // displacement at lambda = 1 for fixed dofs
    DofMap dofs_;
    Vec f_ext_full_;                  // dead loads at lambda = 1, all dofs
    std::vector<double> nodal_volume_;
    std::vector<char> body_incident_;
    std::vector<int> material_elems_;  // elements of deformable bodies

    std::vector<std::unique_ptr<AdfSolver>> adf_;
    std::vector<ScalarField> fields_;
    DetectionReport report_;
    SparseSystem sys_;
    SpdSolver linear_;
    bool pattern_valid_ = false;
    std::vector<std::pair<int, int>> pattern_pairs_;  // assignments the pattern covers

    Configuration cfg_;
    std::vector<double> u_accepted_;
    Vec r_full_;  // residual over all dofs from the latest assembly
    double t_ = 0.0, dt_ = 0.01;
    double newton_tol_ = 0.0;  // force tolerance of the latest Newton solve
    std::string last_failure_;
    double ref_force_ = 0.0;
    int consecutive_ = 0;
    int step_index_ = 0;
    RunCounters counters_;
};

} // namespace spc
