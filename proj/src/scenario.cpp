#include "spc/scenario.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "spc/error.hpp"
#include "spc/meshgen.hpp"

namespace spc {

namespace {

struct Section {
    std::string name;
    std::vector<std::pair<std::string, std::string>> kv;

    const std::string* find(const std::string& key) const {
        for (const auto& [k, v] : kv)
            if (k == key) return &v;
        return nullptr;
    }
    void set(const std::string& key, const std::string& value) {
        for (auto& [k, v] : kv)
            if (k == key) {
                v = value;
                return;
            }
        kv.emplace_back(key, value);
    }
};

std::vector<Section> parse_sections(const std::string& text, const std::string& source) {
    std::vector<Section> sections;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        auto strip = [](std::string s) {
            auto b = s.find_first_not_of(" \t\r");
            auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        line = strip(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ParseError(source + ":" + std::to_string(line_no) + ": malformed section header");
            sections.push_back({strip(line.substr(1, line.size() - 2)), {}});
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ParseError(source + ":" + std::to_string(line_no) + ": expected key = value");
        if (sections.empty())
            throw ParseError(source + ":" + std::to_string(line_no) + ": key outside any section");
        sections.back().kv.emplace_back(strip(line.substr(0, eq)), strip(line.substr(eq + 1)));
    }
    return sections;
}

void apply_override(std::vector<Section>& sections, const std::string& spec) {
    auto eq = spec.find('=');
    if (eq == std::string::npos) throw ConfigError("override '" + spec + "': expected section.key=value");
    std::string addr = spec.substr(0, eq), value = spec.substr(eq + 1);
    auto dot = addr.find('.');
    if (dot == std::string::npos) throw ConfigError("override '" + spec + "': expected section.key=value");
    std::string sec = addr.substr(0, dot), key = addr.substr(dot + 1);
    int index = 0;
    auto br = sec.find('[');
    if (br != std::string::npos) {
        if (sec.back() != ']') throw ConfigError("override '" + spec + "': malformed section index");
        index = std::stoi(sec.substr(br + 1, sec.size() - br - 2));
        sec = sec.substr(0, br);
    }
    int seen = 0;
    for (Section& s : sections) {
        if (s.name != sec) continue;
        if (seen++ == index) {
            s.set(key, value);
            return;
        }
    }
    throw ConfigError("override '" + spec + "': no section [" + sec + "] with index " +
                      std::to_string(index));
}

double to_double(const Section& s, const std::string& key, const std::string& v) {
    try {
        size_t used = 0;
        double out = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw ConfigError("[" + s.name + "] " + key + ": '" + v + "' is not a number");
    }
}

int to_int(const Section& s, const std::string& key, const std::string& v) {
    try {
        size_t used = 0;
        int out = std::stoi(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw ConfigError("[" + s.name + "] " + key + ": '" + v + "' is not an integer");
    }
}

bool to_bool(const Section& s, const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("[" + s.name + "] " + key + ": '" + v + "' is not a boolean");
}

std::vector<double> to_doubles(const Section& s, const std::string& key, const std::string& v) {
    std::vector<double> out;
    std::istringstream in(v);
    std::string tok;
    while (in >> tok) out.push_back(to_double(s, key, tok));
    return out;
}

// Every key a section may carry; anything else is rejected.
const std::set<std::string>& allowed_keys(const std::string& section) {
    static const std::map<std::string, std::set<std::string>> table = {
        {"scenario", {"name", "dim"}},
        {"body", {"name", "mesh", "E", "nu", "rigid", "incident"}},
        {"contact", {"kappa", "l_c", "sign", "weighting", "gap_normalization", "containment_tol"}},
        {"solver",
         {"dt", "dt_min", "dt_max", "t_end", "tol_rel", "tol_abs", "max_iterations", "damping",
          "dt_growth", "grow_after", "target_retry_limit", "phi_per_iteration"}},
        {"bc", {"name", "body", "box", "dofs", "value"}},
        {"traction", {"body", "box", "t"}},
        {"output", {"dir", "snapshots"}},
    };
    auto it = table.find(section);
    if (it == table.end()) throw ConfigError("unknown section [" + section + "]");
    return it->second;
}

} // namespace

Scenario parse_scenario_text(const std::string& text, const std::string& source,
                             const std::vector<std::string>& overrides) {
    std::vector<Section> sections = parse_sections(text, source);
    for (const std::string& ov : overrides) apply_override(sections, ov);

    Scenario sc;
    for (const Section& s : sections) {
        const auto& allowed = allowed_keys(s.name);
        for (const auto& [k, v] : s.kv)
            if (!allowed.count(k))
                throw ConfigError("[" + s.name + "]: unknown key '" + k + "'");

        auto get = [&](const std::string& key) { return s.find(key); };

        if (s.name == "scenario") {
            if (auto* v = get("name")) sc.name = *v;
            if (auto* v = get("dim")) sc.dim = to_int(s, "dim", *v);
        } else if (s.name == "body") {
            Scenario::Body b;
            if (auto* v = get("name")) b.name = *v;
            if (auto* v = get("mesh")) b.mesh = *v;
            if (auto* v = get("E")) b.material.E = to_double(s, "E", *v);
            if (auto* v = get("nu")) b.material.nu = to_double(s, "nu", *v);
            if (auto* v = get("rigid")) b.rigid = to_bool(s, "rigid", *v);
            if (auto* v = get("incident")) b.incident = to_bool(s, "incident", *v);
            sc.bodies.push_back(std::move(b));
        } else if (s.name == "contact") {
            if (auto* v = get("kappa")) sc.contact.kappa = to_double(s, "kappa", *v);
            if (auto* v = get("l_c")) sc.adf.l_c = to_double(s, "l_c", *v);
            if (auto* v = get("containment_tol"))
                sc.contact.containment_tol = to_double(s, "containment_tol", *v);
            if (auto* v = get("sign")) {
                if (*v == "plus") sc.adf.sign = +1;
                else if (*v == "minus") sc.adf.sign = -1;
                else throw ConfigError("[contact] sign: expected plus|minus");
            }
            if (auto* v = get("weighting")) {
                if (*v == "none") sc.contact.weighting = Weighting::none;
                else if (*v == "edge_projection") sc.contact.weighting = Weighting::edge_projection;
                else throw ConfigError("[contact] weighting: expected none|edge_projection");
            }
            if (auto* v = get("gap_normalization")) {
                if (*v == "sqrt") sc.adf.norm = GapNorm::sqrt_cl;
                else if (*v == "paper") sc.adf.norm = GapNorm::paper;
                else throw ConfigError("[contact] gap_normalization: expected sqrt|paper");
            }
        } else if (s.name == "solver") {
            auto& p = sc.solver;
            if (auto* v = get("dt")) p.dt = to_double(s, "dt", *v);
            if (auto* v = get("dt_min")) p.dt_min = to_double(s, "dt_min", *v);
            if (auto* v = get("dt_max")) p.dt_max = to_double(s, "dt_max", *v);
            if (auto* v = get("t_end")) p.t_end = to_double(s, "t_end", *v);
            if (auto* v = get("tol_rel")) p.tol_rel = to_double(s, "tol_rel", *v);
            if (auto* v = get("tol_abs")) p.tol_abs = to_double(s, "tol_abs", *v);
            if (auto* v = get("max_iterations")) p.max_iterations = to_int(s, "max_iterations", *v);
            if (auto* v = get("damping")) p.damping = to_double(s, "damping", *v);
            if (auto* v = get("dt_growth")) p.dt_growth = to_double(s, "dt_growth", *v);
            if (auto* v = get("grow_after")) p.grow_after = to_int(s, "grow_after", *v);
            if (auto* v = get("target_retry_limit"))
                p.target_retry_limit = to_int(s, "target_retry_limit", *v);
            if (auto* v = get("phi_per_iteration"))
                p.phi_per_iteration = to_bool(s, "phi_per_iteration", *v);
        } else if (s.name == "bc") {
            Scenario::Bc bc;
            bc.name = "bc" + std::to_string(sc.dirichlet.size());
            if (auto* v = get("name")) bc.name = *v;
            if (auto* v = get("body")) bc.body = *v;
            if (auto* v = get("box")) bc.box = to_doubles(s, "box", *v);
            if (auto* v = get("dofs")) bc.dofs = *v;
            if (auto* v = get("value")) bc.value = to_doubles(s, "value", *v);
            sc.dirichlet.push_back(std::move(bc));
        } else if (s.name == "traction") {
            Scenario::Traction tr;
            if (auto* v = get("body")) tr.body = *v;
            if (auto* v = get("box")) tr.box = to_doubles(s, "box", *v);
            if (auto* v = get("t")) tr.t = to_doubles(s, "t", *v);
            sc.tractions.push_back(std::move(tr));
        } else if (s.name == "output") {
            if (auto* v = get("dir")) sc.output.dir = *v;
            if (auto* v = get("snapshots")) sc.output.snapshots = to_int(s, "snapshots", *v);
        }
    }

    // ---- validation ----
    if (sc.dim != 2 && sc.dim != 3) throw ConfigError("[scenario] dim: must be 2 or 3");
    if (sc.bodies.empty()) throw ConfigError("scenario needs at least one [body]");
    std::set<std::string> names;
    for (const auto& b : sc.bodies) {
        if (b.name.empty()) throw ConfigError("[body]: missing name");
        if (!names.insert(b.name).second) throw ConfigError("[body] name '" + b.name + "' repeated");
        if (b.mesh.empty()) throw ConfigError("[body] " + b.name + ": missing mesh");
        if (b.mesh.rfind("generate:", 0) != 0 && !std::filesystem::exists(b.mesh))
            throw ConfigError("[body] " + b.name + ": mesh file '" + b.mesh + "' does not exist");
        if (!(b.material.E > 0)) throw ConfigError("[body] " + b.name + ": E must be positive");
        if (!(b.material.nu > -1.0 && b.material.nu < 0.5))
            throw ConfigError("[body] " + b.name + ": nu must lie in (-1, 0.5)");
    }
    if (!(sc.contact.kappa > 0)) throw ConfigError("[contact] kappa: must be positive");
    if (!(sc.adf.l_c > 0)) throw ConfigError("[contact] l_c: must be positive");
    if (!(sc.solver.dt > 0)) throw ConfigError("[solver] dt: must be positive");
    if (!(sc.solver.dt_min <= sc.solver.dt && sc.solver.dt <= sc.solver.dt_max))
        throw ConfigError("[solver]: need dt_min <= dt <= dt_max");
    auto check_bc_common = [&](const std::string& body, const std::vector<double>& box,
                               const std::string& what) {
        if (!names.count(body)) throw ConfigError(what + ": unknown body '" + body + "'");
        if (box.size() != 2 * static_cast<size_t>(sc.dim))
            throw ConfigError(what + ": box needs " + std::to_string(2 * sc.dim) + " numbers");
    };
    for (const auto& bc : sc.dirichlet) {
        check_bc_common(bc.body, bc.box, "[bc] " + bc.name);
        if (bc.dofs.empty() || bc.dofs.find_first_not_of("xyz") != std::string::npos)
            throw ConfigError("[bc] " + bc.name + ": dofs must be a subset of xyz");
        for (size_t i = 0; i < bc.dofs.size(); ++i)
            if (bc.dofs.find(bc.dofs[i], i + 1) != std::string::npos)
                throw ConfigError("[bc] " + bc.name + ": repeated dof '" + bc.dofs[i] + "'");
        if (bc.value.size() != bc.dofs.size())
            throw ConfigError("[bc] " + bc.name + ": value needs one entry per dof");
    }
    for (const auto& tr : sc.tractions) {
        check_bc_common(tr.body, tr.box, "[traction]");
        if (tr.t.size() != static_cast<size_t>(sc.dim))
            throw ConfigError("[traction]: t needs " + std::to_string(sc.dim) + " components");
    }

    // Echo the effective (post-override) configuration verbatim.
    std::ostringstream echo;
    for (const Section& s : sections) {
        echo << "[" << s.name << "]\n";
        for (const auto& [k, v] : s.kv) echo << k << " = " << v << "\n";
        echo << "\n";
    }
    sc.echo = echo.str();
    return sc;
}

Scenario parse_scenario(const std::string& path, const std::vector<std::string>& overrides) {
    std::ifstream in(path);
    if (!in) throw ParseError(path + ": cannot open");
    std::ostringstream text;
    text << in.rdbuf();
    return parse_scenario_text(text.str(), path, overrides);
}

SceneObjects build_scene(const Scenario& sc) {
    SceneObjects out;
    std::vector<Mesh> parts;
    std::map<std::string, int> body_id;
    for (size_t b = 0; b < sc.bodies.size(); ++b) {
        const auto& body = sc.bodies[b];
        body_id[body.name] = static_cast<int>(b);
        Mesh part;
        if (body.mesh.rfind("generate:", 0) == 0) {
            part = meshgen::from_spec(body.mesh.substr(9), static_cast<int>(b));
        } else {
            part = load_mesh(body.mesh);
            for (int& id : part.elem_body) id = static_cast<int>(b);
            part.finalize();
        }
        if (part.dim != sc.dim)
            throw ConfigError("[body] " + body.name + ": mesh dimension " +
                              std::to_string(part.dim) + " does not match scenario dim");
        parts.push_back(std::move(part));

        BodySetup setup;
        setup.name = body.name;
        setup.material = body.material;
        setup.rigid = body.rigid;
        setup.incident = body.incident;
        out.bodies.push_back(std::move(setup));
    }
    out.mesh = meshgen::merge(parts);

    auto to_box = [&](const std::vector<double>& v) {
        Box box;
        for (int c = 0; c < sc.dim; ++c) {
            box.lo[c] = v[c];
            box.hi[c] = v[sc.dim + c];
        }
        return box;
    };
    for (const auto& bc : sc.dirichlet) {
        DirichletBc d;
        d.name = bc.name;
        d.body = body_id.at(bc.body);
        d.box = to_box(bc.box);
        // Values are consumed in ascending component order downstream.
        std::vector<std::pair<int, double>> comp_vals;
        for (size_t i = 0; i < bc.dofs.size(); ++i) {
            d.comp_mask |= 1u << (bc.dofs[i] - 'x');
            comp_vals.emplace_back(bc.dofs[i] - 'x', bc.value[i]);
        }
        std::sort(comp_vals.begin(), comp_vals.end());
        d.value = DVec::Zero(static_cast<int>(comp_vals.size()));
        for (size_t i = 0; i < comp_vals.size(); ++i) d.value[static_cast<int>(i)] = comp_vals[i].second;
        out.dirichlet.push_back(std::move(d));
    }
    for (const auto& tr : sc.tractions) {
        TractionBc t;
        t.body = body_id.at(tr.body);
        t.box = to_box(tr.box);
        t.traction = DVec::Zero(sc.dim);
        for (int c = 0; c < sc.dim; ++c) t.traction[c] = tr.t[c];
        out.tractions.push_back(std::move(t));
    }
    return out;
}

Run make_run(const Scenario& sc) {
    SceneObjects scene = build_scene(sc);
    return Run(std::move(scene.mesh), std::move(scene.bodies), std::move(scene.dirichlet),
               std::move(scene.tractions), sc.adf, sc.contact, sc.solver);
}

} // namespace spc
