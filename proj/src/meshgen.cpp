#include "spc/meshgen.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "spc/error.hpp"

namespace spc::meshgen {

namespace {

std::vector<double> spaced(double a, double b, int n, double grade) {
    std::vector<double> x(n + 1);
    if (n <= 1 || grade == 1.0) {
        for (int i = 0; i <= n; ++i) x[i] = a + (b - a) * i / n;
        return x;
    }
    const double r = std::pow(grade, 1.0 / (n - 1));
    const double w0 = (b - a) * (1.0 - r) / (1.0 - std::pow(r, n));
    x[0] = a;
    double w = w0;
    for (int i = 1; i <= n; ++i, w *= r) x[i] = x[i - 1] + w;
    x[n] = b;  // stamp the endpoint exactly
    return x;
}

void push_tri(Mesh& m, int body, int a, int b, int c) {
    m.elems.insert(m.elems.end(), {a, b, c});
    m.elem_body.push_back(body);
}

void push_tet_oriented(Mesh& m, int body, int a, int b, int c, int d) {
    auto vol = [&](int p, int q, int r, int s) {
        Eigen::Matrix3d D;
        for (int col = 0; col < 3; ++col) {
            int n[3] = {q, r, s};
            for (int row = 0; row < 3; ++row)
                D(row, col) = m.coords[3 * n[col] + row] - m.coords[3 * p + row];
        }
        return D.determinant();
    };
    if (vol(a, b, c, d) < 0.0) std::swap(c, d);
    m.elems.insert(m.elems.end(), {a, b, c, d});
    m.elem_body.push_back(body);
}

int cells_for(double span, double h) { return std::max(1, (int)std::lround(span / h)); }

} // namespace

Mesh rect(double x0, double y0, double x1, double y1, int nx, int ny, int body, double grade_x) {
    if (nx < 1 || ny < 1) throw Error("rect: cell counts must be positive");
    Mesh m;
    m.dim = 2;
    std::vector<double> xs = spaced(x0, x1, nx, grade_x);
    std::vector<double> ys = spaced(y0, y1, ny, 1.0);
    auto id = [&](int i, int j) { return j * (nx + 1) + i; };
    m.coords.resize((size_t)(nx + 1) * (ny + 1) * 2);
    for (int j = 0; j <= ny; ++j)
        for (int i = 0; i <= nx; ++i) {
            m.coords[2 * id(i, j)] = xs[i];
            m.coords[2 * id(i, j) + 1] = ys[j];
        }
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) {
            int a = id(i, j), b = id(i + 1, j), c = id(i + 1, j + 1), d = id(i, j + 1);
            if ((i + j) % 2 == 0) {
                push_tri(m, body, a, b, c);
                push_tri(m, body, a, c, d);
            } else {
                push_tri(m, body, a, b, d);
                push_tri(m, body, b, c, d);
            }
        }
    m.finalize();
    return m;
}

Mesh rect_h(double x0, double y0, double x1, double y1, double h, int body, double grade_x) {
    return rect(x0, y0, x1, y1, cells_for(x1 - x0, h), cells_for(y1 - y0, h), body, grade_x);
}

Mesh disk(double radius, double h, int body) {
    int n = std::max(2, (int)std::lround(2.0 * radius / h));
    if (n % 2) ++n;  // keep a node at the center
    Mesh m = rect(-radius, -radius, radius, radius, n, n, body);
    for (int i = 0; i < m.n_nodes(); ++i) {
        double x = m.coords[2 * i], y = m.coords[2 * i + 1];
        double s = std::max(std::abs(x), std::abs(y));
        double r = std::hypot(x, y);
        if (r > 0.0) {
            m.coords[2 * i] = x * s / r;
            m.coords[2 * i + 1] = y * s / r;
        }
    }
    m.finalize();  // re-validate orientation after the mapping
    return m;
}

Mesh box3d(double x0, double y0, double z0, double x1, double y1, double z1, int nx, int ny,
           int nz, int body) {
    if (nx < 1 || ny < 1 || nz < 1) throw Error("box3d: cell counts must be positive");
    Mesh m;
    m.dim = 3;
    auto id = [&](int i, int j, int k) { return (k * (ny + 1) + j) * (nx + 1) + i; };
    m.coords.resize((size_t)(nx + 1) * (ny + 1) * (nz + 1) * 3);
    for (int k = 0; k <= nz; ++k)
        for (int j = 0; j <= ny; ++j)
            for (int i = 0; i <= nx; ++i) {
                size_t p = 3 * (size_t)id(i, j, k);
                m.coords[p] = x0 + (x1 - x0) * i / nx;
                m.coords[p + 1] = y0 + (y1 - y0) * j / ny;
                m.coords[p + 2] = z0 + (z1 - z0) * k / nz;
            }
    // Kuhn subdivision: six tets per cell along vertex-ordered axis paths.
    const int perms[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
    for (int k = 0; k < nz; ++k)
        for (int j = 0; j < ny; ++j)
            for (int i = 0; i < nx; ++i)
                for (const auto& perm : perms) {
                    int c[3] = {i, j, k};
                    int v[4];
                    v[0] = id(c[0], c[1], c[2]);
                    for (int s = 0; s < 3; ++s) {
                        ++c[perm[s]];
                        v[s + 1] = id(c[0], c[1], c[2]);
                    }
                    push_tet_oriented(m, body, v[0], v[1], v[2], v[3]);
                }
    m.finalize();
    return m;
}

Mesh box3d_h(double x0, double y0, double z0, double x1, double y1, double z1, double h,
             int body) {
    return box3d(x0, y0, z0, x1, y1, z1, cells_for(x1 - x0, h), cells_for(y1 - y0, h),
                 cells_for(z1 - z0, h), body);
}

namespace {

// Extrude a 2D triangulation along z. Layer k gets in-plane scale s_k and
// height z_k. Prisms are split into tets with the global-min-vertex rule so
// shared quad faces get matching diagonals.
Mesh extrude(const Mesh& base, const std::vector<double>& z, const std::vector<double>& scale,
             int body) {
    const int nn = base.n_nodes();
    const int nl = (int)z.size();
    Mesh m;
    m.dim = 3;
    m.coords.resize((size_t)nn * nl * 3);
    for (int k = 0; k < nl; ++k)
        for (int i = 0; i < nn; ++i) {
            size_t p = 3 * ((size_t)k * nn + i);
            m.coords[p] = scale[k] * base.coords[2 * i];
            m.coords[p + 1] = scale[k] * base.coords[2 * i + 1];
            m.coords[p + 2] = z[k];
        }
    for (int k = 0; k + 1 < nl; ++k) {
        for (int e = 0; e < base.n_elems(); ++e) {
            const int* tri = base.elem(e);
            int v[6];
            for (int a = 0; a < 3; ++a) {
                v[a] = k * nn + tri[a];
                v[a + 3] = (k + 1) * nn + tri[a];
            }
            // Rotate (and flip if needed) so the smallest global id sits at v[0].
            int mi = (int)(std::min_element(v, v + 6) - v);
            if (mi >= 3) {
                std::swap(v[0], v[3]);
                std::swap(v[1], v[5]);
                std::swap(v[2], v[4]);
                mi -= 3;
                if (mi == 1) mi = 2;
                else if (mi == 2) mi = 1;
            }
            while (mi != 0) {
                int b0 = v[0], t0 = v[3];
                v[0] = v[1]; v[1] = v[2]; v[2] = b0;
                v[3] = v[4]; v[4] = v[5]; v[5] = t0;
                --mi;
            }
            if (std::min(v[1], v[5]) < std::min(v[2], v[4])) {
                push_tet_oriented(m, body, v[0], v[1], v[2], v[5]);
                push_tet_oriented(m, body, v[0], v[1], v[5], v[4]);
                push_tet_oriented(m, body, v[0], v[4], v[5], v[3]);
            } else {
                push_tet_oriented(m, body, v[0], v[1], v[2], v[4]);
                push_tet_oriented(m, body, v[0], v[4], v[2], v[5]);
                push_tet_oriented(m, body, v[0], v[4], v[5], v[3]);
            }
        }
    }
    m.finalize();
    return m;
}

// Sector of given radius and sweep centered on the +x axis, fan-meshed at the
// apex and structured in rings outward.
Mesh sector2d(double radius, double sweep_rad, double h, int body) {
    int nr = std::max(1, (int)std::lround(radius / h));
    int na = std::max(1, (int)std::lround(sweep_rad * radius / h));
    Mesh m;
    m.dim = 2;
    m.coords = {0.0, 0.0};
    std::vector<std::vector<int>> ring(nr + 1);
    ring[0] = std::vector<int>(na + 1, 0);
    for (int i = 1; i <= nr; ++i) {
        double r = radius * i / nr;
        for (int j = 0; j <= na; ++j) {
            double th = sweep_rad * (double(j) / na - 0.5);
            ring[i].push_back(m.n_nodes());
            m.coords.push_back(r * std::cos(th));
            m.coords.push_back(r * std::sin(th));
        }
    }
    for (int j = 0; j < na; ++j) push_tri(m, body, 0, ring[1][j], ring[1][j + 1]);
    for (int i = 1; i < nr; ++i)
        for (int j = 0; j < na; ++j) {
            int a = ring[i][j], b = ring[i + 1][j], c = ring[i + 1][j + 1], d = ring[i][j + 1];
            if ((i + j) % 2 == 0) {
                push_tri(m, body, a, b, c);
                push_tri(m, body, a, c, d);
            } else {
                push_tri(m, body, a, b, d);
                push_tri(m, body, b, c, d);
            }
        }
    m.finalize();
    return m;
}

} // namespace

Mesh cylinder3d(double radius, double length, double h, int body) {
    Mesh base = disk(radius, h);
    int nz = cells_for(length, h);
    std::vector<double> z(nz + 1), s(nz + 1, 1.0);
    for (int k = 0; k <= nz; ++k) z[k] = length * k / nz;
    return extrude(base, z, s, body);
}

Mesh cone3d(double radius, double height, double h, int body) {
    Mesh base = disk(radius, h);
    int nz = cells_for(height, h);
    const double tip = std::max(0.15, 1.5 * h / radius);  // truncate to keep tets sound
    std::vector<double> z(nz + 1), s(nz + 1);
    for (int k = 0; k <= nz; ++k) {
        z[k] = height * k / nz;
        s[k] = 1.0 - (1.0 - tip) * k / nz;
    }
    return extrude(base, z, s, body);
}

Mesh wedge3d(double radius, double width, double sweep_deg, double h, int body,
             double tilt_deg) {
    Mesh base = sector2d(radius, sweep_deg * M_PI / 180.0, h, body);
    if (tilt_deg != 0.0) {
        const double c = std::cos(tilt_deg * M_PI / 180.0), s = std::sin(tilt_deg * M_PI / 180.0);
        for (int i = 0; i < base.n_nodes(); ++i) {
            double x = base.coords[2 * i], y = base.coords[2 * i + 1];
            base.coords[2 * i] = c * x - s * y;
            base.coords[2 * i + 1] = s * x + c * y;
        }
    }
    int nz = cells_for(width, h);
    std::vector<double> z(nz + 1), s(nz + 1, 1.0);
    for (int k = 0; k <= nz; ++k) z[k] = width * k / nz;
    return extrude(base, z, s, body);
}

// Cyclic axis permutations keep the orientation positive.
void map_extrusion_axis(Mesh& m, char axis) {
    if (m.dim != 3 || axis == 'z') return;
    for (int i = 0; i < m.n_nodes(); ++i) {
        double x = m.coords[3 * i], y = m.coords[3 * i + 1], z = m.coords[3 * i + 2];
        if (axis == 'x') {
            m.coords[3 * i] = z;
            m.coords[3 * i + 1] = x;
            m.coords[3 * i + 2] = y;
        } else {  // 'y'
            m.coords[3 * i] = y;
            m.coords[3 * i + 1] = z;
            m.coords[3 * i + 2] = x;
        }
    }
}

Mesh merge(const std::vector<Mesh>& parts) {
    if (parts.empty()) throw Error("merge: no parts");
    Mesh m;
    m.dim = parts[0].dim;
    for (const Mesh& p : parts) {
        if (p.dim != m.dim) throw Error("merge: mixed dimensions");
        int off = m.n_nodes();
        m.coords.insert(m.coords.end(), p.coords.begin(), p.coords.end());
        for (int e = 0; e < p.n_elems(); ++e) {
            for (int a = 0; a <= p.dim; ++a) m.elems.push_back(p.elem(e)[a] + off);
            m.elem_body.push_back(p.elem_body[e]);
        }
    }
    m.finalize();
    return m;
}

void translate(Mesh& m, double dx, double dy, double dz) {
    double d[3] = {dx, dy, dz};
    for (int i = 0; i < m.n_nodes(); ++i)
        for (int c = 0; c < m.dim; ++c) m.coords[(size_t)i * m.dim + c] += d[c];
}

// Scene layout (consistent units): rigid U-shaped container with inner span
// x in [0,1], four squares stacked two by two, deformable punch above.
Mesh compress2d_part(const std::string& part, double h) {
    const double wall = 0.08;
    if (part == "punch") return rect_h(0.01, 1.02, 0.99, 1.20, h, 0);
    if (part == "container") {
        Mesh bottom = rect_h(-wall, -wall, 1.0 + wall, 0.0, h, 1);
        Mesh left = rect_h(-wall, 0.0, 0.0, 1.30, h, 1);
        Mesh right = rect_h(1.0, 0.0, 1.0 + wall, 1.30, h, 1);
        return merge({bottom, left, right});
    }
    auto square = [&](int i, double x0, double y0) {
        return rect_h(x0, y0, x0 + 0.46, y0 + 0.46, h, 2 + i);
    };
    if (part == "square0") return square(0, 0.02, 0.02);
    if (part == "square1") return square(1, 0.52, 0.02);
    if (part == "square2") return square(2, 0.02, 0.52);
    if (part == "square3") return square(3, 0.52, 0.52);
    throw Error("compress2d: unknown part '" + part + "'");
}

std::vector<Mesh> compress2d_scene(double h) {
    return {compress2d_part("punch", h),   compress2d_part("container", h),
            compress2d_part("square0", h), compress2d_part("square1", h),
            compress2d_part("square2", h), compress2d_part("square3", h)};
}

Mesh patch2d_part(const std::string& part, double h_bottom, double h_top, double grade) {
    if (part == "bottom") return rect_h(-0.25, 0.0, 1.25, 0.5, h_bottom, 0);
    if (part == "top") return rect_h(0.0, 0.5, 1.0, 1.0, h_top, 1, grade);
    throw Error("patch2d: unknown part '" + part + "'");
}

std::vector<Mesh> patch2d_scene(double h_bottom, double h_top, double grade) {
    return {patch2d_part("bottom", h_bottom, h_top, grade),
            patch2d_part("top", h_bottom, h_top, grade)};
}

Mesh from_spec(const std::string& spec, int body) {
    std::istringstream in(spec);
    std::string kind;
    in >> kind;
    std::vector<double> pos;
    std::map<std::string, std::string> kv;
    std::string word;
    std::string part;
    while (in >> word) {
        auto eq = word.find('=');
        if (eq != std::string::npos) {
            kv[word.substr(0, eq)] = word.substr(eq + 1);
        } else {
            try {
                pos.push_back(std::stod(word));
            } catch (const std::exception&) {
                if (!part.empty()) throw Error("generator spec: unexpected token '" + word + "'");
                part = word;
            }
        }
    }
    auto need = [&](size_t n) {
        if (pos.size() != n)
            throw Error("generator '" + kind + "': expected " + std::to_string(n) +
                        " positional numbers");
    };
    auto num = [&](const std::string& k, const std::string& v) {
        try {
            return std::stod(v);
        } catch (const std::exception&) {
            throw Error("generator spec: bad value '" + v + "' for " + k);
        }
    };
    auto h = [&]() {
        auto it = kv.find("h");
        if (it == kv.end()) throw Error("generator '" + kind + "': missing h=");
        return num("h", it->second);
    };
    auto opt = [&](const std::string& k, double dflt) {
        auto it = kv.find(k);
        return it == kv.end() ? dflt : num(k, it->second);
    };

    Mesh m;
    if (kind == "rect") {
        need(4);
        m = rect_h(pos[0], pos[1], pos[2], pos[3], h(), body, opt("grade", 1.0));
    } else if (kind == "disk") {
        need(1);
        m = disk(pos[0], h(), body);
    } else if (kind == "box3d") {
        need(6);
        m = box3d_h(pos[0], pos[1], pos[2], pos[3], pos[4], pos[5], h(), body);
    } else if (kind == "cylinder3d") {
        need(2);
        m = cylinder3d(pos[0], pos[1], h(), body);
    } else if (kind == "cone3d") {
        need(2);
        m = cone3d(pos[0], pos[1], h(), body);
    } else if (kind == "wedge3d") {
        need(3);
        m = wedge3d(pos[0], pos[1], pos[2], h(), body, opt("tilt", 0.0));
    } else if (kind == "compress2d") {
        need(0);
        m = compress2d_part(part, h());
        for (int& b : m.elem_body) b = body;
        m.finalize();
    } else if (kind == "patch2d") {
        need(0);
        m = patch2d_part(part, h(), opt("htop", h()), opt("grade", 1.0));
        for (int& b : m.elem_body) b = body;
        m.finalize();
    } else {
        throw Error("unknown generator '" + kind + "'");
    }
    if (auto it = kv.find("axis"); it != kv.end()) {
        if (it->second.size() != 1 || it->second.find_first_of("xyz") != 0)
            throw Error("generator spec: axis must be x, y, or z");
        map_extrusion_axis(m, it->second[0]);
    }
    translate(m, opt("dx", 0.0), opt("dy", 0.0), opt("dz", 0.0));
    return m;
}

} // namespace spc::meshgen
