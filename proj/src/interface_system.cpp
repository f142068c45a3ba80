#include "rmrcm/interface_system.hpp"

#include "rmrcm/error.hpp"
#include "rmrcm/field_io.hpp"

#include <algorithm>
#include <fstream>

namespace rmrcm {

int BasisSet::position(int patch) const noexcept
{
    auto it = std::lower_bound(patches.begin(), patches.end(), patch);
    return it != patches.end() && *it == patch ? int(it - patches.begin()) : -1;
}

std::size_t BasisSet::table_bytes() const noexcept
{
    std::size_t n = 0;
    for (const auto& t : tables)
        n += t.data.size() * sizeof(double);
    return n;
}

namespace {

void check_children(const InterfaceSpace& space, int level, int index, const BasisSet& lower, const BasisSet& upper)
{
    const auto& node = space.hierarchy().node(level, index);
    if (node.is_leaf())
        throw ConfigError("interface system: node (" + std::to_string(level) + ", " + std::to_string(index) +
                          ") is a leaf");
    if (lower.level != level + 1 || upper.level != level + 1 || lower.index != node.lower_child() ||
        upper.index != node.upper_child())
        throw ConfigError("interface system: children do not match node (" + std::to_string(level) + ", " +
                          std::to_string(index) + ")");
    for (const BasisSet* c : {&lower, &upper})
        if (c->trace.rows != c->patches.size() || c->trace.cols != c->columns())
            throw ConfigError("interface system: missing trace data");
}

} // namespace

InterfaceSystem assemble(const InterfaceSpace& space, int level, int index, const BasisSet& lower,
                         const BasisSet& upper)
{
    check_children(space, level, index, lower, upper);
    InterfaceSystem sys;
    sys.level = level;
    sys.index = index;
    sys.patches = space.interface_patches(level, index);
    const auto& outer = space.boundary_patches(level, index);
    const std::size_t n = sys.patches.size();
    const std::size_t ne = outer.size() + 1;

    const std::array<const BasisSet*, 2> child{&lower, &upper};
    const std::array<double, 2> orient{1.0, -1.0};
    std::vector<std::array<int, 2>> row(n);
    for (std::size_t k = 0; k < n; ++k)
        for (int c = 0; c < 2; ++c) {
            row[k][c] = child[c]->position(sys.patches[k]);
            if (row[k][c] < 0)
                throw ConfigError("interface system: child trace lacks interface patch " +
                                  std::to_string(sys.patches[k]));
        }

    sys.matrix = DenseMatrix(2 * n, 2 * n);
    for (std::size_t k = 0; k < n; ++k) {
        const auto& pk = space.patch(sys.patches[k]);
        for (std::size_t m = 0; m < n; ++m) {
            const auto& pm = space.patch(sys.patches[m]);
            double sum = 0.0, osum = 0.0;
            for (int c = 0; c < 2; ++c) {
                const double t = child[c]->trace(row[k][c], row[m][c]);
                sum += t;
                osum += orient[c] * t;
            }
            sys.matrix(k, m) = -pk.beta * pm.beta * sum;
            sys.matrix(k, n + m) = pk.beta * osum;
            sys.matrix(n + k, m) = -pm.beta * osum;
            sys.matrix(n + k, n + m) = sum;
        }
        sys.matrix(k, k) -= 2.0 * pk.beta * pk.area;
    }

    // Excitation e drives one child through the Robin data of an outer
    // patch, or both children through their particular solutions.
    sys.rhs = DenseMatrix(2 * n, ne);
    for (std::size_t e = 0; e < ne; ++e) {
        std::array<int, 2> col{-1, -1};
        if (e + 1 == ne) {
            col = {int(lower.patches.size()), int(upper.patches.size())};
        } else {
            for (int c = 0; c < 2; ++c)
                col[c] = child[c]->position(outer[e]);
            if ((col[0] < 0) == (col[1] < 0))
                throw ConfigError("interface system: outer patch " + std::to_string(outer[e]) +
                                  " must belong to exactly one child");
        }
        for (std::size_t k = 0; k < n; ++k) {
            const double beta = space.patch(sys.patches[k]).beta;
            double sum = 0.0, osum = 0.0;
            for (int c = 0; c < 2; ++c) {
                if (col[c] < 0)
                    continue;
                const double f = child[c]->trace(row[k][c], col[c]);
                sum += f;
                osum += orient[c] * f;
            }
            sys.rhs(k, e) = -beta * osum;
            sys.rhs(n + k, e) = -sum;
        }
    }
    return sys;
}

void solve(InterfaceSystem& system)
{
    try {
        system.solution = lu_solve(system.matrix, system.rhs);
    } catch (const SolverError& e) {
        throw SolverError(std::string(e.what()) + " on interface (level " + std::to_string(system.level) +
                              ", index " + std::to_string(system.index) + ")",
                          e.residual());
    }
}

namespace {

// Child columns expressed in node columns for a solved system.
DenseMatrix child_map(const InterfaceSpace& space, const InterfaceSystem& sys, const BasisSet& child,
                      double orientation)
{
    const auto& outer = space.boundary_patches(sys.level, sys.index);
    const std::size_t n = sys.patches.size();
    const std::size_t ne = outer.size() + 1;
    DenseMatrix y(child.columns(), ne);
    for (std::size_t j = 0; j < child.patches.size(); ++j) {
        const int q = child.patches[j];
        auto g = std::find(sys.patches.begin(), sys.patches.end(), q);
        if (g != sys.patches.end()) {
            const std::size_t k = std::size_t(g - sys.patches.begin());
            const double beta = space.patch(q).beta;
            for (std::size_t e = 0; e < ne; ++e)
                y(j, e) = robin_value(beta, sys.solution(k, e), sys.solution(n + k, e), orientation);
        } else {
            auto o = std::lower_bound(outer.begin(), outer.end(), q);
            if (o == outer.end() || *o != q)
                throw ConfigError("recombine: child patch " + std::to_string(q) + " is neither inner nor outer");
            y(j, std::size_t(o - outer.begin())) = 1.0;
        }
    }
    y(child.patches.size(), ne - 1) = 1.0;
    return y;
}

} // namespace

BasisSet recombine(const InterfaceSpace& space, const InterfaceSystem& system, const BasisSet& lower,
                   const BasisSet& upper, DenseMatrix* lower_map, DenseMatrix* upper_map)
{
    if (system.solution.rows != system.unknowns() || system.solution.cols != system.rhs.cols)
        throw ConfigError("recombine: interface system is not solved");
    const DenseMatrix ylo = child_map(space, system, lower, 1.0);
    const DenseMatrix yup = child_map(space, system, upper, -1.0);

    BasisSet out;
    out.level = system.level;
    out.index = system.index;
    out.patches = space.boundary_patches(system.level, system.index);
    out.trace = DenseMatrix(out.patches.size(), out.columns());
    for (std::size_t r = 0; r < out.patches.size(); ++r) {
        const int q = out.patches[r];
        const BasisSet* c = &lower;
        const DenseMatrix* y = &ylo;
        int pos = lower.position(q);
        if (pos < 0) {
            c = &upper;
            y = &yup;
            pos = upper.position(q);
        }
        for (std::size_t e = 0; e < out.columns(); ++e) {
            double s = 0.0;
            for (std::size_t j = 0; j < c->columns(); ++j)
                s += c->trace(pos, j) * (*y)(j, e);
            out.trace(r, e) = s;
        }
    }
    out.tables.reserve(lower.tables.size() + upper.tables.size());
    for (const auto& t : lower.tables)
        out.tables.push_back(multiply(t, ylo));
    for (const auto& t : upper.tables)
        out.tables.push_back(multiply(t, yup));
    if (lower_map)
        *lower_map = ylo;
    if (upper_map)
        *upper_map = yup;
    return out;
}

InterfaceSystem assemble_monolithic(const InterfaceSpace& space, const std::vector<BasisSet>& leaves)
{
    const auto& h = space.hierarchy();
    if (int(leaves.size()) != h.leaf_count())
        throw ConfigError("monolithic system: one basis set per finest subdomain is required");
    const auto& patches = space.patches();
    const std::size_t n = patches.size();
    InterfaceSystem sys;
    sys.level = -1;
    for (const auto& p : patches)
        sys.patches.push_back(p.id);
    sys.matrix = DenseMatrix(2 * n, 2 * n);
    sys.rhs = DenseMatrix(2 * n, 1);

    for (const auto& q : patches) {
        const std::size_t urow = std::size_t(q.id), prow = n + std::size_t(q.id);
        for (int leaf : {q.lower_leaf, q.upper_leaf}) {
            const BasisSet& b = leaves[leaf];
            const int r = b.position(q.id);
            if (r < 0)
                throw ConfigError("monolithic system: leaf trace lacks patch " + std::to_string(q.id));
            const double oq = q.orientation(leaf);
            // F_leaf(q) = sum_m T(q, m) (P_m - beta_m o_m U_m) + T(q, particular)
            for (std::size_t j = 0; j < b.patches.size(); ++j) {
                const auto& m = patches[b.patches[j]];
                const double t = b.trace(r, j);
                const double om = m.orientation(leaf);
                sys.matrix(urow, m.id) += q.beta * oq * (-m.beta * om * t);
                sys.matrix(urow, n + m.id) += q.beta * oq * t;
                sys.matrix(prow, m.id) += -m.beta * om * t;
                sys.matrix(prow, n + m.id) += t;
            }
            const double part = b.trace(r, b.patches.size());
            sys.rhs(urow, 0) -= q.beta * oq * part;
            sys.rhs(prow, 0) -= part;
        }
        sys.matrix(urow, q.id) -= 2.0 * q.beta * q.area;
    }
    return sys;
}

std::vector<std::vector<double>> monolithic_leaf_coefficients(const InterfaceSpace& space,
                                                              const InterfaceSystem& system)
{
    const std::size_t n = space.patches().size();
    if (system.solution.rows != 2 * n)
        throw ConfigError("monolithic system is not solved");
    std::vector<std::vector<double>> out(space.hierarchy().leaf_count());
    for (int leaf = 0; leaf < space.hierarchy().leaf_count(); ++leaf) {
        for (const auto& lp : space.leaf_patches(leaf)) {
            const auto& p = space.patch(lp.patch);
            out[leaf].push_back(robin_value(p.beta, system.solution(p.id, 0), system.solution(n + p.id, 0),
                                            lp.orientation));
        }
        out[leaf].push_back(1.0);
    }
    return out;
}

void dump_interfaces(const std::vector<InterfaceSystem>& systems, const std::filesystem::path& dir)
{
    std::filesystem::create_directories(dir);
    nlohmann::json index = nlohmann::json::array();
    for (const auto& s : systems) {
        const std::string stem = "gamma_l" + std::to_string(s.level) + "_i" + std::to_string(s.index);
        nlohmann::json entry{{"level", s.level}, {"index", s.index}, {"patches", s.patches}};
        for (auto [name, m] : {std::pair<const char*, const DenseMatrix*>{"A", &s.matrix},
                               {"b", &s.rhs},
                               {"X", &s.solution}}) {
            RawField f;
            f.shape = {int(m->cols), int(m->rows), 1};
            f.values = m->data;
            f.meta["kind"] = name;
            const std::string file = stem + "_" + name + ".bin";
            if (m->rows > 0 && m->cols > 0)
                write_raw_field(dir / file, f);
            entry[name] = file;
        }
        index.push_back(entry);
    }
    std::ofstream out(dir / "index.json");
    out << index.dump(2) << '\n';
    if (!out)
        throw std::runtime_error("cannot write " + (dir / "index.json").string());
}

} // namespace rmrcm
