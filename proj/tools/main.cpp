#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "spc/error.hpp"
#include "spc/meshgen.hpp"
#include "spc/scenario.hpp"

namespace fs = std::filesystem;
using namespace spc;

namespace {

std::string g17(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_file(const fs::path& p, const std::string& text) {
    std::ofstream out(p);
    out << text;
    if (!out) throw Error(p.string() + ": write failed");
}

struct LogWriter {
    std::ofstream out;
    int dim;

    LogWriter(const fs::path& p, const Run& run) : out(p), dim(run.mesh().dim) {
        out << "step,t,dt,iterations,retries,rebuilds,n_contacts,v_max";
        const char* comp = "xyz";
        for (int b = 0; b < run.n_dirichlet(); ++b)
            for (int c = 0; c < dim; ++c) out << ",R_" << run.dirichlet_name(b) << "_" << comp[c];
        out << "\n";
    }
    void record(const StepRecord& r) {
        out << r.step << "," << g17(r.t) << "," << g17(r.dt) << "," << r.iterations << ","
            << r.retries << "," << r.rebuilds << "," << r.n_contacts << "," << g17(r.v_max);
        for (double v : r.reactions) out << "," << g17(v);
        out << "\n";
        out.flush();
    }
};

int cmd_run(const std::string& cfg_path, const std::vector<std::string>& overrides,
            const std::string& out_dir_flag, int snapshots_flag, int save_state_at,
            const std::string& restart_path) {
    Scenario sc = parse_scenario(cfg_path, overrides);
    fs::path out_dir = out_dir_flag.empty() ? fs::path(sc.output.dir) : fs::path(out_dir_flag);
    int snapshots = snapshots_flag >= 0 ? snapshots_flag : sc.output.snapshots;
    fs::create_directories(out_dir);
    write_file(out_dir / "effective.cfg", sc.echo);

    Run run = make_run(sc);
    if (!restart_path.empty()) run.load_state(restart_path);

    LogWriter log(out_dir / "log.csv", run);
    double peak_vmax = 0.0;
    std::vector<double> peak_reactions(static_cast<size_t>(run.n_dirichlet()) * sc.dim, 0.0);
    StepRecord last;
    bool completed = true;
    std::string abort_reason;

    auto snapshot = [&](int step) {
        char name[64];
        std::snprintf(name, sizeof name, "step_%05d.vtk", step);
        write_snapshot(run.mesh(), run.config(),
                       {{"phi", run.phi_nodal()}, {"g", run.gap_nodal()}},
                       (out_dir / name).string());
    };

    try {
        while (!run.finished()) {
            last = run.step();
            log.record(last);
            peak_vmax = std::max(peak_vmax, last.v_max);
            for (size_t i = 0; i < last.reactions.size(); ++i)
                peak_reactions[i] = std::max(peak_reactions[i], std::abs(last.reactions[i]));
            if (snapshots > 0 && last.step % snapshots == 0) snapshot(last.step);
            if (save_state_at > 0 && last.step == save_state_at) {
                char name[64];
                std::snprintf(name, sizeof name, "state_%05d.bin", last.step);
                run.save_state((out_dir / name).string());
            }
        }
    } catch (const Error& err) {
        completed = false;
        abort_reason = err.what();
        run.save_state((out_dir / "state_abort.bin").string());
        std::cerr << "run aborted: " << err.what() << "\n";
    }
    if (snapshots > 0 && completed) snapshot(last.step);

    std::ostringstream sum;
    sum << "scenario = " << sc.name << "\n";
    sum << "completed = " << (completed ? 1 : 0) << "\n";
    if (!completed) sum << "abort_reason = " << abort_reason << "\n";
    sum << "steps = " << run.step_index() << "\n";
    sum << "t_final = " << g17(run.t()) << "\n";
    sum << "total_newton_iterations = " << run.counters().newton_iterations << "\n";
    sum << "phi_solves = " << run.counters().phi_solves << "\n";
    sum << "pattern_rebuilds = " << run.counters().pattern_rebuilds << "\n";
    sum << "final_v_max = " << g17(last.v_max) << "\n";
    sum << "peak_v_max = " << g17(peak_vmax) << "\n";
    sum << "strain_energy = " << g17(run.total_strain_energy()) << "\n";
    sum << "l_c = " << g17(sc.adf.l_c) << "\n";
    const char* comp = "xyz";
    for (int b = 0; b < run.n_dirichlet(); ++b)
        for (int c = 0; c < sc.dim; ++c)
            sum << "peak_R_" << run.dirichlet_name(b) << "_" << comp[c] << " = "
                << g17(peak_reactions[static_cast<size_t>(b) * sc.dim + c]) << "\n";
    write_file(out_dir / "summary.txt", sum.str());
    std::cout << (completed ? "completed " : "ABORTED after ") << run.step_index()
              << " steps, final v_max = " << g17(last.v_max) << "\n";
    return completed ? 0 : 1;
}

int cmd_verify_adf(const std::string& geometry, std::vector<double> lcs, double h,
                   const std::string& out_dir_flag) {
    if (lcs.empty()) lcs = {0.4, 0.2, 0.1};
    std::sort(lcs.rbegin(), lcs.rend());
    Mesh mesh;
    std::vector<int> dirichlet;
    std::function<double(const DVec&)> exact;
    if (geometry == "strip") {
        const double length = 2.0, width = 0.2;
        mesh = meshgen::rect_h(0.0, 0.0, length, width, h);
        for (int n = 0; n < mesh.n_nodes(); ++n)
            if (std::abs(mesh.coords[2 * n]) < 1e-12) dirichlet.push_back(n);
        exact = [](const DVec& x) { return x[0]; };
    } else if (geometry == "disk") {
        const double radius = 1.0;
        mesh = meshgen::disk(radius, h);
        BoundaryInfo b = extract_boundary(mesh);
        dirichlet = b.body_exterior_nodes[0];
        exact = [radius](const DVec& x) { return radius - x.norm(); };
    } else {
        std::cerr << "unknown geometry '" << geometry << "' (use strip or disk)\n";
        return 2;
    }
    Configuration cfg = Configuration::zero(mesh);
    auto table = varadhan_limit_check(mesh, cfg, dirichlet, 0, lcs, exact, AdfParams{});

    std::ostringstream report;
    report << "# geometry = " << geometry << ", h = " << g17(h) << "\n";
    report << "l_c,max_err,min_phi,warning\n";
    for (const auto& row : table)
        report << g17(row.l_c) << "," << g17(row.max_err) << "," << g17(row.min_phi) << ","
               << (row.warning ? 1 : 0) << "\n";
    std::cout << report.str();
    if (!out_dir_flag.empty()) {
        fs::create_directories(out_dir_flag);
        write_file(fs::path(out_dir_flag) / "varadhan.csv", report.str());
    }
    return 0;
}

// Shared by the patch-test subcommand and the acceptance suite: run the
// two-block scene to full load and report the spread of transmitted traction.
struct PatchResult {
    double max_dev = 0.0;  // max |traction - mean| / mean over active nodes
    int n_active = 0;
};

PatchResult run_patch(double h, double grade, double kappa, Weighting weighting,
                      const std::string& snapshot_path = {}) {
    std::ostringstream cfg;
    cfg << "[scenario]\nname = patch2d\ndim = 2\n";
    cfg << "[body]\nname = bottom\nmesh = generate: patch2d bottom h=" << h << "\nE = 1e4\nnu = 0\n"
        << "incident = false\n";
    cfg << "[body]\nname = top\nmesh = generate: patch2d top h=" << h << " htop=" << 1.37 * h
        << " grade=" << grade << "\nE = 1e4\nnu = 0\n";
    cfg << "[contact]\nkappa = " << kappa << "\nl_c = 0.08\n"
        << "weighting = " << (weighting == Weighting::edge_projection ? "edge_projection" : "none")
        << "\n";
    cfg << "[solver]\ndt = 0.1\ndt_min = 1e-4\ndt_max = 0.1\ndamping = 2\n";
    cfg << "[bc]\nname = base\nbody = bottom\nbox = -0.3 -0.001 1.3 0.001\ndofs = xy\nvalue = 0 0\n";
    cfg << "[traction]\nbody = top\nbox = -0.1 0.999 1.1 1.001\nt = 0 -100\n";
    Scenario sc = parse_scenario_text(cfg.str(), "patch2d");
    Run run = make_run(sc);
    while (!run.finished()) run.step();

    PatchResult res;
    std::vector<double> tractions;
    for (const ContactSample& s : run.contact_samples()) {
        if (!s.active) continue;
        tractions.push_back(s.force.norm() / s.weight);
    }
    res.n_active = static_cast<int>(tractions.size());
    if (tractions.empty()) return res;
    double mean = std::accumulate(tractions.begin(), tractions.end(), 0.0) / tractions.size();
    for (double tr : tractions) res.max_dev = std::max(res.max_dev, std::abs(tr - mean) / mean);
    if (!snapshot_path.empty())
        write_snapshot(run.mesh(), run.config(), {{"phi", run.phi_nodal()}, {"g", run.gap_nodal()}},
                       snapshot_path);
    return res;
}

int cmd_patch_test(double h, double grade, double kappa, const std::string& out_dir_flag) {
    PatchResult weighted = run_patch(h, grade, kappa, Weighting::edge_projection);
    PatchResult plain = run_patch(h, grade, kappa, Weighting::none);
    std::ostringstream report;
    report << "weighting,active_nodes,max_traction_deviation\n";
    report << "edge_projection," << weighted.n_active << "," << g17(weighted.max_dev) << "\n";
    report << "none," << plain.n_active << "," << g17(plain.max_dev) << "\n";
    std::cout << report.str();
    if (!out_dir_flag.empty()) {
        fs::create_directories(out_dir_flag);
        write_file(fs::path(out_dir_flag) / "patch.csv", report.str());
    }
    return weighted.max_dev <= 0.05 && plain.max_dev > weighted.max_dev ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"finite-strain contact solver with screened-Poisson distance fields"};
    app.require_subcommand(1);

    std::string cfg_path, out_dir, restart_path, geometry = "strip";
    std::vector<std::string> overrides;
    std::vector<double> lcs;
    int snapshots = -1, save_state_at = 0;
    double h = 0.01, grade = 2.0, kappa = 1e8;

    auto* run_cmd = app.add_subcommand("run", "run a scenario file");
    run_cmd->add_option("cfg", cfg_path, "scenario file")->required();
    run_cmd->add_option("--override,-O", overrides, "section.key=value (repeatable)");
    run_cmd->add_option("--out", out_dir, "output directory (default from scenario)");
    run_cmd->add_option("--snapshots", snapshots, "write a VTK snapshot every n steps");
    run_cmd->add_option("--save-state-at", save_state_at, "serialize state after this step");
    run_cmd->add_option("--restart", restart_path, "resume from a serialized state file");

    auto* verify_cmd = app.add_subcommand("verify-adf", "ADF error table against exact distance");
    verify_cmd->add_option("--geometry", geometry, "strip|disk")->required();
    verify_cmd->add_option("--lc", lcs, "l_c sweep (largest first)");
    verify_cmd->add_option("--hmesh", h, "mesh size");
    verify_cmd->add_option("--out", out_dir, "directory for varadhan.csv");

    auto* patch_cmd = app.add_subcommand("patch-test", "two-block contact patch test");
    patch_cmd->add_option("--hmesh", h, "bottom-block mesh size")->default_val(0.05);
    patch_cmd->add_option("--grade", grade, "top-block interface grading");
    patch_cmd->add_option("--kappa", kappa, "penalty");
    patch_cmd->add_option("--out", out_dir, "directory for patch.csv");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run_cmd->parsed())
            return cmd_run(cfg_path, overrides, out_dir, snapshots, save_state_at, restart_path);
        if (verify_cmd->parsed()) return cmd_verify_adf(geometry, lcs, h, out_dir);
        if (patch_cmd->parsed()) return cmd_patch_test(h, grade, kappa, out_dir);
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << "\n";
        return 1;
    }
    return 0;
}
