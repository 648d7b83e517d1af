#include "spc/solver.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "spc/error.hpp"

namespace spc {

Run::Run(Mesh mesh, std::vector<BodySetup> bodies, std::vector<DirichletBc> dirichlet,
         std::vector<TractionBc> tractions, AdfParams adf, ContactParams contact,
         SolverParams params)
    : mesh_(std::move(mesh)),
      bodies_(std::move(bodies)),
      dirichlet_(std::move(dirichlet)),
      adf_params_(adf),
      contact_params_(contact),
      params_(params) {
    d_ = mesh_.dim;
    if (static_cast<int>(bodies_.size()) != mesh_.n_bodies)
        throw ConfigError("body setup count does not match mesh body count");
    boundary_ = extract_boundary(mesh_);
    dt_ = params_.dt;

    const int ndof = mesh_.n_nodes() * d_;
    dof_fixed_.assign(ndof, 0);
    dof_target_.assign(ndof, 0.0);

    for (int n = 0; n < mesh_.n_nodes(); ++n)
        if (bodies_[mesh_.node_body[n]].rigid)
            for (int c = 0; c < d_; ++c) dof_fixed_[n * d_ + c] = 1;

    dirichlet_nodes_.resize(dirichlet_.size());
    for (size_t b = 0; b < dirichlet_.size(); ++b) {
        const DirichletBc& bc = dirichlet_[b];
        for (int n = 0; n < mesh_.n_nodes(); ++n) {
            if (mesh_.node_body[n] != bc.body) continue;
            if (!bc.box.contains(mesh_.node(n), d_)) continue;
            dirichlet_nodes_[b].push_back(n);
            int vi = 0;
            for (int c = 0; c < d_; ++c) {
                if (!(bc.comp_mask & (1u << c))) continue;
                dof_fixed_[n * d_ + c] = 1;
                dof_target_[n * d_ + c] = bc.value[vi++];
            }
        }
        if (dirichlet_nodes_[b].empty())
            throw ConfigError("boundary condition '" + bc.name + "' selects no nodes");
    }

    std::vector<char> active(ndof, 1);
    dofs_.build(active, dof_fixed_);

    f_ext_full_ = Vec::Zero(ndof);
    for (const TractionBc& bc : tractions) {
        Configuration ref = Configuration::zero(mesh_);
        int hits = 0;
        for (const auto& [e, f] : boundary_.exterior_faces) {
            if (mesh_.elem_body[e] != bc.body) continue;
            auto fn = face_nodes(mesh_, e, f);
            bool in = true;
            for (int k = 0; k < d_; ++k)
                if (!bc.box.contains(mesh_.node(fn[k]), d_)) in = false;
            if (!in) continue;
            ++hits;
            double measure;
            if (d_ == 2) {
                measure = (mesh_.node(fn[1]) - mesh_.node(fn[0])).norm();
            } else {
                Eigen::Vector3d a = mesh_.node(fn[1]) - mesh_.node(fn[0]);
                Eigen::Vector3d b2 = mesh_.node(fn[2]) - mesh_.node(fn[0]);
                measure = 0.5 * a.cross(b2).norm();
            }
            for (int k = 0; k < d_; ++k)
                for (int c = 0; c < d_; ++c)
                    f_ext_full_[fn[k] * d_ + c] += bc.traction[c] * measure / d_;
        }
        if (hits == 0) throw ConfigError("traction boundary condition selects no faces");
    }

    nodal_volume_.assign(mesh_.n_nodes(), 0.0);
    for (int e = 0; e < mesh_.n_elems(); ++e) {
        if (bodies_[mesh_.elem_body[e]].rigid) continue;
        material_elems_.push_back(e);
        double v = element_signed_volume(mesh_, nullptr, e) / (d_ + 1);
        for (int a = 0; a <= d_; ++a) nodal_volume_[mesh_.elem(e)[a]] += v;
    }

    body_incident_.resize(bodies_.size());
    for (size_t b = 0; b < bodies_.size(); ++b) body_incident_[b] = bodies_[b].incident;

    fields_.resize(bodies_.size());
    for (size_t b = 0; b < bodies_.size(); ++b)
        adf_.push_back(std::make_unique<AdfSolver>(mesh_, boundary_, static_cast<int>(b), adf_params_));

    cfg_ = Configuration::zero(mesh_);
    u_accepted_ = cfg_.u;
    r_full_ = Vec::Zero(ndof);
}

void Run::apply_dirichlet(double lam) {
    for (size_t k = 0; k < dof_fixed_.size(); ++k)
        if (dof_fixed_[k]) cfg_.u[k] = lam * dof_target_[k];
}

void Run::solve_phi() {
    for (size_t b = 0; b < adf_.size(); ++b) {
        fields_[b] = adf_[b]->solve(cfg_);
        ++counters_.phi_solves;
    }
}

namespace {

std::vector<std::pair<int, int>> pairs_of(const DetectionReport& rep) {
    std::vector<std::pair<int, int>> out;
    out.reserve(rep.assignments.size());
    for (const TargetAssignment& ta : rep.assignments) out.emplace_back(ta.node, ta.elem);
    return out;
}

} // namespace

void Run::build_pattern(const DetectionReport& rep) {
    std::vector<std::vector<int>> blocks;
    blocks.reserve(material_elems_.size() + rep.assignments.size() + dofs_.n_free);
    for (int e : material_elems_) {
        std::vector<int> blk;
        blk.reserve((d_ + 1) * d_);
        for (int a = 0; a <= d_; ++a)
            for (int c = 0; c < d_; ++c) blk.push_back(dofs_[mesh_.elem(e)[a] * d_ + c]);
        blocks.push_back(std::move(blk));
    }
    for (const TargetAssignment& ta : rep.assignments) {
        std::vector<int> blk;
        blk.reserve((d_ + 2) * d_);
        for (int a = 0; a <= d_; ++a)
            for (int c = 0; c < d_; ++c) blk.push_back(dofs_[mesh_.elem(ta.elem)[a] * d_ + c]);
        for (int c = 0; c < d_; ++c) blk.push_back(dofs_[ta.node * d_ + c]);
        blocks.push_back(std::move(blk));
    }
    for (int i = 0; i < dofs_.n_free; ++i) blocks.push_back({i});  // damping diagonal
    sys_.build_pattern(dofs_.n_free, blocks);
    linear_.set_pattern(sys_);
    pattern_valid_ = true;
    pattern_pairs_ = pairs_of(rep);
    ++counters_.pattern_rebuilds;
}

bool Run::assemble(double lam, double dt_eff, const DetectionReport& rep, bool with_matrix,
                   Vec& r_free) {
    const int ndof = mesh_.n_nodes() * d_;
    if (with_matrix) sys_.begin_assembly();
    r_full_.setZero();

    LVec re;
    LMat ke;
    std::vector<int> blk((d_ + 1) * d_);
    for (int e : material_elems_) {
        if (!element_residual_stiffness(mesh_, cfg_, e, bodies_[mesh_.elem_body[e]].material, re, ke))
            return false;  // inverted element: step failure
        const int* en = mesh_.elem(e);
        for (int a = 0; a <= d_; ++a)
            for (int c = 0; c < d_; ++c) {
                r_full_[en[a] * d_ + c] += re[a * d_ + c];
                blk[a * d_ + c] = dofs_[en[a] * d_ + c];
            }
        if (with_matrix) sys_.add_block(blk, ke);
    }

    std::vector<int> cblk((d_ + 2) * d_);
    for (const TargetAssignment& ta : rep.assignments) {
        ContactEval ev = contact_element(mesh_, cfg_, fields_[mesh_.elem_body[ta.elem]], ta,
                                         contact_params_);
        if (!ev.ok) return false;
        if (!ev.active) continue;
        const int* en = mesh_.elem(ta.elem);
        for (int a = 0; a <= d_; ++a)
            for (int c = 0; c < d_; ++c) {
                r_full_[en[a] * d_ + c] += ev.residual[a * d_ + c];
                cblk[a * d_ + c] = dofs_[en[a] * d_ + c];
            }
        for (int c = 0; c < d_; ++c) {
            r_full_[ta.node * d_ + c] += ev.residual[(d_ + 1) * d_ + c];
            cblk[(d_ + 1) * d_ + c] = dofs_[ta.node * d_ + c];
        }
        if (with_matrix) sys_.add_block(cblk, ev.stiffness);
    }

    if (params_.damping > 0.0) {
        const double c_dt = params_.damping / dt_eff;
        for (int n = 0; n < mesh_.n_nodes(); ++n) {
            if (nodal_volume_[n] == 0.0) continue;
            const double coeff = c_dt * nodal_volume_[n];
            for (int c = 0; c < d_; ++c) {
                const int k = n * d_ + c;
                r_full_[k] += coeff * (cfg_.u[k] - u_accepted_[k]);
                if (with_matrix && dofs_[k] >= 0) sys_.add(dofs_[k], dofs_[k], coeff);
            }
        }
    }

    r_full_ -= lam * f_ext_full_;

    r_free.resize(dofs_.n_free);
    for (int k = 0; k < ndof; ++k)
        if (dofs_[k] >= 0) r_free[dofs_[k]] = r_full_[k];
    return true;
}

bool Run::newton(double lam, double dt_eff, const DetectionReport& rep,
                 std::vector<double>& history, int& iterations) {
    double r0 = 0.0, last = std::numeric_limits<double>::infinity();
    int grow_streak = 0;
    Vec r_free;
    iterations = 0;
    history.clear();  // after a target retry only the final sequence is reported
    for (int iter = 0;; ++iter) {
        if (!assemble(lam, dt_eff, rep, true, r_free)) {
            last_failure_ = "inverted element or corrupt contact field";
            return false;
        }
        const double r = r_free.norm();
        history.push_back(r);
        if (iter == 0) {
            r0 = std::max(r, 1e-300);
            ref_force_ = std::max(ref_force_, r0);
            newton_tol_ = std::max(params_.tol_rel * r0, params_.tol_abs * ref_force_);
        }
        if (r <= newton_tol_) {
            iterations = iter;
            return true;
        }
        if (r >= last) {
            if (++grow_streak >= 3) {
                last_failure_ = "Newton divergence (growing residual)";
                return false;
            }
        } else {
            grow_streak = 0;
        }
        last = r;
        if (iter >= params_.max_iterations) {
            last_failure_ = "Newton iteration limit";
            return false;
        }

        sys_.rhs() = -r_free;
        Vec delta;
        try {
            delta = linear_.solve(sys_);
        } catch (const SolveError& err) {
            last_failure_ = err.what();
            return false;
        }
        for (size_t k = 0; k < cfg_.u.size(); ++k)
            if (dofs_[k] >= 0) cfg_.u[k] += delta[dofs_[k]];
        ++counters_.newton_iterations;
        if (params_.phi_per_iteration) solve_phi();
    }
}

StepRecord Run::step() {
    if (finished()) throw Error("run already finished");
    StepRecord rec;
    for (;;) {
        ++counters_.step_attempts;
        const double t_new = std::min(t_ + dt_, params_.t_end);
        const double dt_eff = t_new - t_;
        const double lam = t_new;

        cfg_.u = u_accepted_;
        apply_dirichlet(lam);

        bool ok = true;
        DetectionReport rep;
        int rebuilds = 0, retries = 0;
        std::vector<double> history;
        int iterations = 0;
        try {
            solve_phi();
            std::vector<double> weights;
            const std::vector<double>* wptr = nullptr;
            if (contact_params_.weighting == Weighting::edge_projection) {
                weights = tributary_boundary_measure(mesh_, cfg_, boundary_);
                wptr = &weights;
            }
            BucketGrid grid = build_grid(mesh_, cfg_, boundary_);
            rep = detect(mesh_, cfg_, boundary_, grid, &fields_, contact_params_, &report_,
                         body_incident_, wptr);
            ++counters_.detections;
            if (rep.changed) rebuilds = 1;
            if (!pattern_valid_ || pairs_of(rep) != pattern_pairs_) build_pattern(rep);

            // Pairs whose force exceeds the Newton tolerance at the present
            // displacements; weaker ones cannot move a converged state beyond
            // the tolerance it was solved to.
            auto pair_force = [&](double g, double weight) {
                double m = std::min(0.0, g);
                return effective_kappa(contact_params_, weight) * m * m;
            };
            auto active_now = [&](const DetectionReport& r) {
                std::map<int, std::pair<int, double>> act;  // node -> (element, gap)
                for (const TargetAssignment& ta : r.assignments) {
                    ContactEval ev = contact_element(mesh_, cfg_,
                                                     fields_[mesh_.elem_body[ta.elem]], ta,
                                                     contact_params_);
                    if (ev.ok && ev.active && pair_force(ev.g, ta.weight) > newton_tol_)
                        act[ta.node] = {ta.elem, ev.g};
                }
                return act;
            };
            // A verified target set is material (forces Newton to re-iterate)
            // when pairs carrying above-tolerance force appeared that Newton
            // never saw, vanished entirely, or jumped to another body. A
            // same-body re-pairing just moves the evaluation cell of the
            // body's continuous field (the C0 kink in its gradient) and is
            // absorbed; re-iterating on those, or on below-tolerance flicker
            // of nodes resting on faces, is the target-oscillation livelock
            // step control exists to avoid.
            auto material_change = [&](const DetectionReport& used,
                                       const DetectionReport& fresh) {
                auto old_act = active_now(used);
                std::map<int, std::pair<int, double>> new_act;
                for (const TargetAssignment& ta : fresh.assignments)
                    if (ta.g < 0.0 && pair_force(ta.g, ta.weight) > newton_tol_)
                        new_act[ta.node] = {ta.elem, ta.g};
                std::set<std::pair<int, int>> used_pairs;
                for (const TargetAssignment& ta : used.assignments)
                    used_pairs.insert({ta.node, ta.elem});
                for (const auto& [node, ev] : new_act) {
                    const auto& [elem, g] = ev;
                    auto it = old_act.find(node);
                    if (it == old_act.end()) {
                        if (!used_pairs.count({node, elem})) return true;  // unseen new force
                        continue;
                    }
                    // Same-body re-localizations keep the continuous field; a
                    // different body is a new contact.
                    if (mesh_.elem_body[elem] != mesh_.elem_body[it->second.first]) return true;
                }
                std::set<std::pair<int, int>> fresh_pairs;
                for (const TargetAssignment& ta : fresh.assignments)
                    fresh_pairs.insert({ta.node, ta.elem});
                for (const auto& [node, ev] : old_act)
                    if (!new_act.count(node) && !fresh_pairs.count({node, ev.first}))
                        return true;  // active pair vanished from detection
                return false;
            };

            for (;;) {
                if (!newton(lam, dt_eff, rep, history, iterations)) {
                    ok = false;
                    break;
                }
                BucketGrid grid2 = build_grid(mesh_, cfg_, boundary_);
                DetectionReport verify = detect(mesh_, cfg_, boundary_, grid2, &fields_,
                                                contact_params_, &rep, body_incident_, wptr);
                ++counters_.detections;
                if (!verify.changed || !material_change(rep, verify)) {
                    verify.changed = rep.changed;
                    verify.released = rep.released;
                    rep = std::move(verify);  // fresh pairs and parent coordinates
                    break;
                }
                if (++retries > params_.target_retry_limit) {
                    last_failure_ = "target retries exhausted";
                    ok = false;
                    break;
                }
                rep = std::move(verify);
                if (pairs_of(rep) != pattern_pairs_) build_pattern(rep);
                ++rebuilds;
            }
        } catch (const StepError& err) {
            last_failure_ = err.what();
            ok = false;
        } catch (const SolveError& err) {
            last_failure_ = err.what();
            ok = false;
        }

        if (ok) {
            rec.step = ++step_index_;
            rec.t = t_new;
            rec.dt = dt_eff;
            rec.iterations = iterations;
            rec.retries = retries;
            rec.rebuilds = rebuilds;
            rec.residual_history = std::move(history);

            rec.reactions.assign(dirichlet_.size() * d_, 0.0);
            for (size_t b = 0; b < dirichlet_.size(); ++b)
                for (int n : dirichlet_nodes_[b])
                    for (int c = 0; c < d_; ++c)
                        rec.reactions[b * d_ + c] += r_full_[n * d_ + c];

            report_ = std::move(rep);
            for (const TargetAssignment& ta : report_.assignments) {
                ContactEval ev = contact_element(mesh_, cfg_, fields_[mesh_.elem_body[ta.elem]],
                                                 ta, contact_params_);
                if (ev.active) {
                    ++rec.n_contacts;
                    rec.v_max = std::max(rec.v_max, -ev.g);
                }
            }

            u_accepted_ = cfg_.u;
            t_ = t_new;
            ++consecutive_;
            if (consecutive_ % params_.grow_after == 0)
                dt_ = std::min(dt_ * params_.dt_growth, params_.dt_max);
            return rec;
        }

        consecutive_ = 0;
        cfg_.u = u_accepted_;
        if (dt_ <= params_.dt_min * (1.0 + 1e-12))
            throw Error("step " + std::to_string(step_index_ + 1) + " failed at dt_min = " +
                        std::to_string(params_.dt_min) + " (t = " + std::to_string(t_) +
                        "): " + last_failure_);
        dt_ = std::max(0.5 * dt_, params_.dt_min);
    }
}

std::vector<ContactSample> Run::contact_samples() const {
    std::vector<ContactSample> out;
    for (const TargetAssignment& ta : report_.assignments) {
        ContactEval ev = contact_element(mesh_, cfg_, fields_[mesh_.elem_body[ta.elem]], ta,
                                         contact_params_);
        ContactSample s;
        s.node = ta.node;
        s.elem = ta.elem;
        s.weight = ta.weight;
        s.g = ev.g;
        s.active = ev.active;
        s.force = DVec::Zero(d_);
        if (ev.active)
            for (int c = 0; c < d_; ++c) s.force[c] = -ev.residual[(d_ + 1) * d_ + c];
        out.push_back(std::move(s));
    }
    return out;
}

double Run::total_strain_energy() const {
    double e_total = 0.0;
    for (int e : material_elems_)
        e_total += element_strain_energy(mesh_, cfg_, e, bodies_[mesh_.elem_body[e]].material);
    return e_total;
}

std::vector<double> Run::phi_nodal() const {
    std::vector<double> out(mesh_.n_nodes(), 0.0);
    for (int n = 0; n < mesh_.n_nodes(); ++n) {
        const ScalarField& f = fields_[mesh_.node_body[n]];
        if (!f.phi.empty()) out[n] = f.phi[n];
    }
    return out;
}

std::vector<double> Run::gap_nodal() const {
    std::vector<double> out(mesh_.n_nodes(), 0.0);
    for (int n = 0; n < mesh_.n_nodes(); ++n) {
        const ScalarField& f = fields_[mesh_.node_body[n]];
        if (!f.phi.empty() && f.phi[n] > 0.0) out[n] = f.sign * f.gamma * std::log(f.phi[n]);
    }
    return out;
}

namespace {
constexpr char kStateMagic[] = "SPCSTATE1";
}

void Run::save_state(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(path + ": cannot open for writing");
    out.write(kStateMagic, sizeof kStateMagic);
    auto w64 = [&](int64_t v) { out.write(reinterpret_cast<const char*>(&v), 8); };
    auto wd = [&](double v) { out.write(reinterpret_cast<const char*>(&v), 8); };
    w64(d_);
    w64(mesh_.n_nodes());
    wd(t_);
    wd(dt_);
    wd(ref_force_);
    w64(consecutive_);
    w64(step_index_);
    out.write(reinterpret_cast<const char*>(u_accepted_.data()),
              static_cast<std::streamsize>(u_accepted_.size() * sizeof(double)));
    w64(static_cast<int64_t>(report_.assignments.size()));
    for (const TargetAssignment& ta : report_.assignments) {
        w64(ta.node);
        w64(ta.elem);
        wd(ta.weight);
        for (int c = 0; c < d_; ++c) wd(ta.xi.size() == d_ ? ta.xi[c] : 0.0);
    }
    if (!out) throw Error(path + ": write failed");
}

void Run::load_state(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(path + ": cannot open");
    char magic[sizeof kStateMagic];
    in.read(magic, sizeof magic);
    if (!in || std::memcmp(magic, kStateMagic, sizeof magic) != 0)
        throw ParseError(path + ": not a state file");
    auto r64 = [&]() { int64_t v; in.read(reinterpret_cast<char*>(&v), 8); return v; };
    auto rd = [&]() { double v; in.read(reinterpret_cast<char*>(&v), 8); return v; };
    if (r64() != d_ || r64() != mesh_.n_nodes())
        throw ParseError(path + ": state does not match the scenario mesh");
    t_ = rd();
    dt_ = rd();
    ref_force_ = rd();
    consecutive_ = static_cast<int>(r64());
    step_index_ = static_cast<int>(r64());
    in.read(reinterpret_cast<char*>(u_accepted_.data()),
            static_cast<std::streamsize>(u_accepted_.size() * sizeof(double)));
    report_ = DetectionReport{};
    const int64_t n_pairs = r64();
    for (int64_t i = 0; i < n_pairs; ++i) {
        TargetAssignment ta;
        ta.node = static_cast<int>(r64());
        ta.elem = static_cast<int>(r64());
        ta.weight = rd();
        ta.xi = DVec::Zero(d_);
        for (int c = 0; c < d_; ++c) ta.xi[c] = rd();
        report_.assignments.push_back(std::move(ta));
    }
    if (!in) throw ParseError(path + ": truncated state file");
    cfg_.u = u_accepted_;
    pattern_valid_ = false;
}

} // namespace spc
