#include "spc/mesh.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "spc/error.hpp"

namespace spc {

DVec Mesh::node(int i) const {
    DVec x(dim);
    for (int c = 0; c < dim; ++c) x[c] = coords[static_cast<size_t>(i) * dim + c];
    return x;
}

NodeMat Mesh::elem_ref_coords(int e) const {
    NodeMat x(dim + 1, dim);
    const int* en = elem(e);
    for (int a = 0; a <= dim; ++a)
        for (int c = 0; c < dim; ++c) x(a, c) = coords[static_cast<size_t>(en[a]) * dim + c];
    return x;
}

DVec current_coords(const Mesh& m, const Configuration& cfg, int node) {
    DVec x(m.dim);
    for (int c = 0; c < m.dim; ++c) {
        size_t k = static_cast<size_t>(node) * m.dim + c;
        x[c] = m.coords[k] + cfg.u[k];
    }
    return x;
}

NodeMat elem_cur_coords(const Mesh& m, const Configuration& cfg, int e) {
    NodeMat x(m.dim + 1, m.dim);
    const int* en = m.elem(e);
    for (int a = 0; a <= m.dim; ++a)
        for (int c = 0; c < m.dim; ++c) {
            size_t k = static_cast<size_t>(en[a]) * m.dim + c;
            x(a, c) = m.coords[k] + cfg.u[k];
        }
    return x;
}

double element_signed_volume(const Mesh& m, const Configuration* cfg, int e) {
    NodeMat x = cfg ? elem_cur_coords(m, *cfg, e) : m.elem_ref_coords(e);
    DMat D(m.dim, m.dim);
    for (int k = 0; k < m.dim; ++k)
        for (int c = 0; c < m.dim; ++c) D(c, k) = x(k + 1, c) - x(0, c);
    double det = D.determinant();
    return m.dim == 2 ? det / 2.0 : det / 6.0;
}

void Mesh::finalize() {
    const int nn = n_nodes();
    node_body.assign(nn, -1);
    n_bodies = 0;
    for (int e = 0; e < n_elems(); ++e) {
        const int* en = elem(e);
        for (int a = 0; a <= dim; ++a) {
            if (en[a] < 0 || en[a] >= nn)
                throw Error("element " + std::to_string(e) + " references invalid node " +
                            std::to_string(en[a]));
            for (int b = a + 1; b <= dim; ++b)
                if (en[a] == en[b])
                    throw Error("element " + std::to_string(e) + " has repeated node " +
                                std::to_string(en[a]));
        }
        if (element_signed_volume(*this, nullptr, e) <= 0.0)
            throw Error("element " + std::to_string(e) + " has non-positive reference volume");
        int body = elem_body[e];
        if (body < 0) throw Error("element " + std::to_string(e) + " has negative body id");
        n_bodies = std::max(n_bodies, body + 1);
        for (int a = 0; a <= dim; ++a) {
            int& nb = node_body[en[a]];
            if (nb == -1) nb = body;
            else if (nb != body)
                throw Error("node " + std::to_string(en[a]) + " is shared between bodies " +
                            std::to_string(nb) + " and " + std::to_string(body));
        }
    }
}

std::array<int, 3> face_nodes(const Mesh& m, int e, int f) {
    const int* en = m.elem(e);
    std::array<int, 3> out{-1, -1, -1};
    int k = 0;
    for (int a = 0; a <= m.dim; ++a)
        if (a != f) out[k++] = en[a];
    return out;
}

BoundaryInfo extract_boundary(const Mesh& m) {
    // Key: sorted face node ids. Faces referenced once are exterior.
    std::map<std::array<int, 3>, std::pair<int, std::array<int, 2>>> faces;
    for (int e = 0; e < m.n_elems(); ++e) {
        for (int f = 0; f <= m.dim; ++f) {
            std::array<int, 3> fn = face_nodes(m, e, f);
            std::array<int, 3> key = fn;
            std::sort(key.begin(), key.end());
            auto it = faces.find(key);
            if (it == faces.end())
                faces[key] = {1, {e, f}};
            else
                it->second.first++;
        }
    }
    BoundaryInfo info;
    info.is_exterior.assign(m.n_nodes(), 0);
    for (const auto& [key, val] : faces) {
        if (val.first != 1) continue;
        info.exterior_faces.push_back(val.second);
        for (int n : key)
            if (n >= 0) info.is_exterior[n] = 1;
    }
    std::sort(info.exterior_faces.begin(), info.exterior_faces.end());
    info.body_exterior_nodes.assign(std::max(m.n_bodies, 1), {});
    for (int n = 0; n < m.n_nodes(); ++n) {
        if (!info.is_exterior[n]) continue;
        info.exterior_nodes.push_back(n);
        info.body_exterior_nodes[m.node_body[n]].push_back(n);
    }
    return info;
}

namespace {

// One token-aware line reader so parse errors can name the line.
struct LineReader {
    std::ifstream in;
    int line_no = 0;
    std::string path;

    explicit LineReader(const std::string& p) : in(p), path(p) {
        if (!in) throw ParseError(p + ": cannot open");
    }
    std::istringstream next() {
        std::string line;
        while (std::getline(in, line)) {
            ++line_no;
            auto pos = line.find('#');
            if (pos != std::string::npos) line.erase(pos);
            if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
            return std::istringstream(line);
        }
        throw ParseError(path + ": unexpected end of file after line " + std::to_string(line_no));
    }
    [[noreturn]] void fail(const std::string& what) const {
        throw ParseError(path + ":" + std::to_string(line_no) + ": " + what);
    }
};

} // namespace

Mesh load_mesh(const std::string& path) {
    LineReader r(path);
    Mesh m;
    std::string kw;

    auto l = r.next();
    if (!(l >> kw) || kw != "dim" || !(l >> m.dim) || (m.dim != 2 && m.dim != 3))
        r.fail("expected 'dim <2|3>'");

    l = r.next();
    int nn = 0;
    if (!(l >> kw) || kw != "nodes" || !(l >> nn) || nn < 0) r.fail("expected 'nodes <N>'");
    m.coords.resize(static_cast<size_t>(nn) * m.dim);
    for (int i = 0; i < nn; ++i) {
        l = r.next();
        for (int c = 0; c < m.dim; ++c)
            if (!(l >> m.coords[static_cast<size_t>(i) * m.dim + c]))
                r.fail("expected " + std::to_string(m.dim) + " coordinates for node " +
                       std::to_string(i));
    }

    l = r.next();
    int ne = 0;
    if (!(l >> kw) || kw != "elements" || !(l >> ne) || ne < 0) r.fail("expected 'elements <M>'");
    m.elems.resize(static_cast<size_t>(ne) * (m.dim + 1));
    m.elem_body.resize(ne);
    for (int e = 0; e < ne; ++e) {
        l = r.next();
        if (!(l >> m.elem_body[e])) r.fail("expected body id for element " + std::to_string(e));
        for (int a = 0; a <= m.dim; ++a)
            if (!(l >> m.elems[static_cast<size_t>(e) * (m.dim + 1) + a]))
                r.fail("expected " + std::to_string(m.dim + 1) + " node indices for element " +
                       std::to_string(e));
    }
    m.finalize();
    return m;
}

namespace {

std::string fmt_g17(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

} // namespace

void save_mesh(const Mesh& m, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error(path + ": cannot open for writing");
    out << "dim " << m.dim << "\n";
    out << "nodes " << m.n_nodes() << "\n";
    for (int i = 0; i < m.n_nodes(); ++i) {
        for (int c = 0; c < m.dim; ++c)
            out << (c ? " " : "") << fmt_g17(m.coords[static_cast<size_t>(i) * m.dim + c]);
        out << "\n";
    }
    out << "elements " << m.n_elems() << "\n";
    for (int e = 0; e < m.n_elems(); ++e) {
        out << m.elem_body[e];
        const int* en = m.elem(e);
        for (int a = 0; a <= m.dim; ++a) out << " " << en[a];
        out << "\n";
    }
    if (!out) throw Error(path + ": write failed");
}

void write_snapshot(const Mesh& m, const Configuration& cfg,
                    const std::vector<std::pair<std::string, std::vector<double>>>& scalars,
                    const std::string& path) {
    const size_t nn = static_cast<size_t>(m.n_nodes());
    if (cfg.u.size() != nn * m.dim) throw Error("snapshot: displacement size mismatch");
    for (const auto& [name, vals] : scalars)
        if (vals.size() != nn)
            throw Error("snapshot: field '" + name + "' has " + std::to_string(vals.size()) +
                        " values for " + std::to_string(nn) + " nodes");

    std::ofstream out(path);
    if (!out) throw Error(path + ": cannot open for writing");
    out << "# vtk DataFile Version 3.0\n";
    out << "spc snapshot\n";
    out << "ASCII\n";
    out << "DATASET UNSTRUCTURED_GRID\n";
    out << "POINTS " << nn << " double\n";
    for (size_t i = 0; i < nn; ++i) {
        double x[3] = {0.0, 0.0, 0.0};
        for (int c = 0; c < m.dim; ++c) x[c] = m.coords[i * m.dim + c] + cfg.u[i * m.dim + c];
        out << fmt_g17(x[0]) << " " << fmt_g17(x[1]) << " " << fmt_g17(x[2]) << "\n";
    }
    const int npe = m.nodes_per_elem();
    out << "CELLS " << m.n_elems() << " " << m.n_elems() * (npe + 1) << "\n";
    for (int e = 0; e < m.n_elems(); ++e) {
        out << npe;
        for (int a = 0; a < npe; ++a) out << " " << m.elem(e)[a];
        out << "\n";
    }
    out << "CELL_TYPES " << m.n_elems() << "\n";
    const int cell_type = m.dim == 2 ? 5 : 10;  // VTK_TRIANGLE / VTK_TETRA
    for (int e = 0; e < m.n_elems(); ++e) out << cell_type << "\n";
    out << "POINT_DATA " << nn << "\n";
    out << "VECTORS displacement double\n";
    for (size_t i = 0; i < nn; ++i) {
        double u[3] = {0.0, 0.0, 0.0};
        for (int c = 0; c < m.dim; ++c) u[c] = cfg.u[i * m.dim + c];
        out << fmt_g17(u[0]) << " " << fmt_g17(u[1]) << " " << fmt_g17(u[2]) << "\n";
    }
    for (const auto& [name, vals] : scalars) {
        out << "SCALARS " << name << " double 1\n";
        out << "LOOKUP_TABLE default\n";
        for (size_t i = 0; i < nn; ++i) out << fmt_g17(vals[i]) << "\n";
    }
    if (!out) throw Error(path + ": write failed");
}

Snapshot read_snapshot(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError(path + ": cannot open");
    Snapshot s;
    std::string tok;
    while (in >> tok) {
        if (tok == "POINTS") {
            std::string type;
            if (!(in >> s.n_points >> type)) throw ParseError(path + ": malformed POINTS header");
            s.points.resize(static_cast<size_t>(s.n_points) * 3);
            for (double& v : s.points)
                if (!(in >> v)) throw ParseError(path + ": truncated POINTS block");
        } else if (tok == "SCALARS") {
            std::string name, type;
            int comps = 1;
            if (!(in >> name >> type)) throw ParseError(path + ": malformed SCALARS header");
            in >> comps;
            std::string lut, lut_name;
            in >> lut >> lut_name;  // LOOKUP_TABLE default
            std::vector<double> vals(static_cast<size_t>(s.n_points) * comps);
            for (double& v : vals)
                if (!(in >> v)) throw ParseError(path + ": truncated SCALARS block");
            s.scalars[name] = std::move(vals);
        }
    }
    return s;
}

} // namespace spc
