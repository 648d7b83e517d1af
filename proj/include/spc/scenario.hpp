#pragma once

#include <string>
#include <vector>

#include "spc/solver.hpp"

namespace spc {

/// Fully validated scenario description parsed from the sectioned key = value
/// configuration format.
struct Scenario {
    std::string name = "run";
    int dim = 2;

    struct Body {
        std::string name;
        std::string mesh;  // file path, or "generate: <spec>"
        MaterialParams material;
        bool rigid = false;
        bool incident = true;
    };
    std::vector<Body> bodies;

    struct Bc {
        std::string name;
        std::string body;
        std::vector<double> box;    // 2*dim entries
        std::string dofs;           // subset of "xyz"
        std::vector<double> value;  // one entry per dof character
    };
    std::vector<Bc> dirichlet;

    struct Traction {
        std::string body;
        std::vector<double> box;
        std::vector<double> t;  // dim entries
    };
    std::vector<Traction> tractions;

    AdfParams adf;
    ContactParams contact;
    SolverParams solver;

    struct Output {
        std::string dir = "out";
        int snapshots = 0;  // every n accepted steps, 0 = none
    } output;

    std::string echo;  // effective configuration text after overrides
};

/// Parse and validate a scenario file. Overrides of the form
/// "section.key=value" (or "section[i].key=value" for repeated sections) are
/// applied to the raw key-value data before validation. Unknown sections or
/// keys are rejected.
Scenario parse_scenario(const std::string& path, const std::vector<std::string>& overrides = {});
Scenario parse_scenario_text(const std::string& text, const std::string& source,
                             const std::vector<std::string>& overrides = {});

/// Meshes and solver inputs realized from a scenario.
struct SceneObjects {
    Mesh mesh;
    std::vector<BodySetup> bodies;
    std::vector<DirichletBc> dirichlet;
    std::vector<TractionBc> tractions;
};
SceneObjects build_scene(const Scenario&);

/// Convenience: build the Run directly.
Run make_run(const Scenario&);

} // namespace spc
