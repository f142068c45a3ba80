#include "rmrcm/recursion.hpp"

#include "rmrcm/error.hpp"

#include <algorithm>
#include <cmath>

namespace rmrcm {

MrcmProblem::MrcmProblem(const PermeabilityField& perm, Index3 subdomains, HbarPartition partition, double alpha,
                         DomainBoundary bc, SolverConfig solver, std::vector<double> source)
    : perm_(&perm), hierarchy_(perm.grid(), subdomains), bc_(bc), solver_(solver), source_(std::move(source))
{
    bc_.validate();
    solver_.validate();
    if (!source_.empty() && source_.size() != perm.grid().cell_count())
        throw ConfigError("source size does not match the grid");
    space_ = std::make_unique<InterfaceSpace>(hierarchy_, partition, perm, alpha);
}

std::size_t LeafBasis::storage_bytes() const noexcept
{
    std::size_t n = particular.size();
    for (const auto& p : pressure)
        n += p.size();
    return n * sizeof(double);
}

namespace {

bool on_domain_side(const CellBox& box, const StructuredGrid& grid, int side)
{
    const int a = side_axis(side);
    return side_is_upper(side) ? box.hi[a] == grid.cells(a) : box.lo[a] == 0;
}

std::vector<double> slice(const std::vector<double>& global, const StructuredGrid& grid, const CellBox& box)
{
    std::vector<double> out;
    out.reserve(std::size_t(box.cell_count()));
    for (int k = box.lo[2]; k < box.hi[2]; ++k)
        for (int j = box.lo[1]; j < box.hi[1]; ++j)
            for (int i = box.lo[0]; i < box.hi[0]; ++i)
                out.push_back(global[grid.cell_index(i, j, k)]);
    return out;
}

} // namespace

LeafBasis compute_leaf_basis(const MrcmProblem& problem, int leaf)
{
    const auto& grid = problem.grid();
    const auto& space = problem.space();
    const CellBox box = problem.hierarchy().leaf(leaf).box;

    LeafBasis basis;
    basis.leaf = leaf;
    basis.solver = std::make_unique<LocalSolver>(grid.sub_grid(box), problem.permeability().slice(box),
                                                 space.leaf_types(leaf, problem.boundary().kind), problem.solver());
    const LocalSolver& solver = *basis.solver;
    basis.external = solver.zero_values();
    for (int s = 0; s < 6; ++s)
        if (on_domain_side(box, grid, s))
            std::fill(basis.external[s].begin(), basis.external[s].end(), problem.boundary().value[s]);
    if (!problem.source().empty())
        basis.source = slice(problem.source(), grid, box);

    for (const auto& lp : space.leaf_patches(leaf)) {
        SideArray values = solver.zero_values();
        for (const auto& f : lp.faces)
            values[f.side][f.face] = 1.0;
        basis.pressure.push_back(solver.solve_pressure(values, {}));
        basis.cg_iterations += solver.last_stats().iterations;
    }
    basis.particular = solver.solve_pressure(basis.external, basis.source);
    basis.cg_iterations += solver.last_stats().iterations;
    basis.local_solves = int(basis.pressure.size()) + 1;
    return basis;
}

BasisSet leaf_basis_set(const MrcmProblem& problem, const LeafBasis& basis)
{
    const auto& space = problem.space();
    const auto& lps = space.leaf_patches(basis.leaf);
    const LocalSolver& solver = *basis.solver;
    const std::size_t nb = lps.size();

    BasisSet set;
    set.level = problem.hierarchy().depth();
    set.index = basis.leaf;
    for (const auto& lp : lps)
        set.patches.push_back(lp.patch);
    set.trace = DenseMatrix(nb, nb + 1);
    for (std::size_t r = 0; r < nb; ++r)
        for (const auto& f : lps[r].faces) {
            const double t = solver.boundary_conductance(f.side, f.face);
            const std::size_t c = solver.boundary_cell(f.side, f.face);
            for (std::size_t e = 0; e < nb; ++e)
                set.trace(r, e) += t * (basis.pressure[e][c] - (e == r ? 1.0 : 0.0));
            set.trace(r, nb) += t * basis.particular[c];
        }
    set.tables.push_back(DenseMatrix::identity(nb + 1));
    return set;
}

MergeResult merge(const MrcmProblem& problem, int level, int index, const BasisSet& lower, const BasisSet& upper)
{
    MergeResult r;
    r.system = assemble(problem.space(), level, index, lower, upper);
    solve(r.system);
    r.set = recombine(problem.space(), r.system, lower, upper, &r.lower_map, &r.upper_map);
    return r;
}

DiscreteSolution evaluate_leaf(const LeafBasis& basis, const InterfaceSpace& space, std::span<const double> coeffs)
{
    const auto& lps = space.leaf_patches(basis.leaf);
    if (coeffs.size() != lps.size() + 1)
        throw ConfigError("evaluate: coefficient count does not match the leaf basis");
    const double w = coeffs.back();
    std::vector<double> p(basis.particular.size());
    for (std::size_t c = 0; c < p.size(); ++c)
        p[c] = w * basis.particular[c];
    for (std::size_t j = 0; j < lps.size(); ++j) {
        const double a = coeffs[j];
        if (a == 0.0)
            continue;
        const auto& pj = basis.pressure[j];
        for (std::size_t c = 0; c < p.size(); ++c)
            p[c] += a * pj[c];
    }
    SideArray values = basis.external;
    for (auto& side : values)
        for (auto& v : side)
            v *= w;
    for (std::size_t j = 0; j < lps.size(); ++j)
        for (const auto& f : lps[j].faces)
            values[f.side][f.face] = coeffs[j];
    return basis.solver->recover(std::move(p), values);
}

std::vector<double> MultiscaleSolution::pressure() const
{
    const auto& grid = hierarchy->grid();
    std::vector<double> out(grid.cell_count());
    for (std::size_t l = 0; l < leaves.size(); ++l) {
        const auto& box = hierarchy->leaf(int(l)).box;
        const auto& local = leaves[l];
        for (int k = 0; k < box.extent(2); ++k)
            for (int j = 0; j < box.extent(1); ++j)
                for (int i = 0; i < box.extent(0); ++i)
                    out[grid.cell_index(box.lo[0] + i, box.lo[1] + j, box.lo[2] + k)] =
                        local.pressure[local.grid.cell_index(i, j, k)];
    }
    return out;
}

std::vector<double> MultiscaleSolution::flux() const
{
    const auto& grid = hierarchy->grid();
    std::vector<double> sum(grid.face_count(), 0.0);
    std::vector<int> count(grid.face_count(), 0);
    for (std::size_t l = 0; l < leaves.size(); ++l) {
        const auto& box = hierarchy->leaf(int(l)).box;
        const auto& local = leaves[l];
        for (int a = 0; a < 3; ++a) {
            Index3 n = local.grid.cells();
            n[a] += 1;
            for (int k = 0; k < n[2]; ++k)
                for (int j = 0; j < n[1]; ++j)
                    for (int i = 0; i < n[0]; ++i) {
                        const std::size_t g = grid.face_index(a, box.lo[0] + i, box.lo[1] + j, box.lo[2] + k);
                        sum[g] += local.flux[local.grid.face_index(a, i, j, k)];
                        count[g] += 1;
                    }
        }
    }
    for (std::size_t f = 0; f < sum.size(); ++f)
        sum[f] /= count[f];
    return sum;
}

namespace {

std::vector<LeafBasis> all_leaf_bases(const MrcmProblem& problem, MrcmResult& result)
{
    std::vector<LeafBasis> leaves;
    for (int l = 0; l < problem.hierarchy().leaf_count(); ++l) {
        leaves.push_back(compute_leaf_basis(problem, l));
        result.basis_bytes += leaves.back().storage_bytes();
        result.local_solves += leaves.back().local_solves;
    }
    return leaves;
}

void evaluate_all(const MrcmProblem& problem, const std::vector<LeafBasis>& leaves, MrcmResult& result)
{
    result.solution.hierarchy = &problem.hierarchy();
    for (std::size_t l = 0; l < leaves.size(); ++l)
        result.solution.leaves.push_back(evaluate_leaf(leaves[l], problem.space(), result.coefficients[l]));
}

} // namespace

MrcmResult rec_mrcm(const MrcmProblem& problem)
{
    const auto& h = problem.hierarchy();
    MrcmResult result;
    const auto leaves = all_leaf_bases(problem, result);

    std::vector<BasisSet> sets;
    for (const auto& b : leaves)
        sets.push_back(leaf_basis_set(problem, b));
    for (int l = h.depth() - 1; l >= 0; --l) {
        std::vector<BasisSet> next;
        for (const auto& n : h.level(l)) {
            MergeResult m = merge(problem, l, n.index, sets[n.lower_child()], sets[n.upper_child()]);
            result.table_bytes += m.set.table_bytes();
            result.systems.push_back(std::move(m.system));
            next.push_back(std::move(m.set));
        }
        sets = std::move(next);
    }
    std::sort(result.systems.begin(), result.systems.end(),
              [](const auto& a, const auto& b) { return std::pair(a.level, a.index) < std::pair(b.level, b.index); });

    const BasisSet& root = sets.front();
    for (const auto& t : root.tables)
        result.coefficients.push_back(t.column(0));
    evaluate_all(problem, leaves, result);
    return result;
}

MrcmResult flat_mrcm(const MrcmProblem& problem)
{
    MrcmResult result;
    const auto leaves = all_leaf_bases(problem, result);
    std::vector<BasisSet> sets;
    for (const auto& b : leaves)
        sets.push_back(leaf_basis_set(problem, b));
    if (problem.space().patches().empty()) {
        result.coefficients.assign(1, {1.0});
    } else {
        InterfaceSystem sys = assemble_monolithic(problem.space(), sets);
        solve(sys);
        result.coefficients = monolithic_leaf_coefficients(problem.space(), sys);
        result.systems.push_back(std::move(sys));
    }
    evaluate_all(problem, leaves, result);
    return result;
}

// --- diagnostics ------------------------------------------------------

namespace {

double cell_diff_sq(double a0, double a1, double b0, double b1)
{
    const double x = a0 - b0, y = a1 - b1;
    return (x * x + x * y + y * y) / 3.0;
}

// Squared RT0 L2 norm of (local - reference) over the cells of `box`.
double leaf_diff_sq(const DiscreteSolution& local, const CellBox& box, const DiscreteSolution& ref)
{
    const auto& lg = local.grid;
    const auto& rg = ref.grid;
    const double vol = lg.cell_volume();
    double sum = 0.0;
    for (int k = 0; k < box.extent(2); ++k)
        for (int j = 0; j < box.extent(1); ++j)
            for (int i = 0; i < box.extent(0); ++i) {
                const Index3 q{i, j, k};
                const Index3 g{box.lo[0] + i, box.lo[1] + j, box.lo[2] + k};
                for (int a = 0; a < 3; ++a) {
                    Index3 qu = q, gu = g;
                    qu[a] += 1;
                    gu[a] += 1;
                    sum += vol * cell_diff_sq(local.flux[lg.face_index(a, q[0], q[1], q[2])],
                                              local.flux[lg.face_index(a, qu[0], qu[1], qu[2])],
                                              ref.flux[rg.face_index(a, g[0], g[1], g[2])],
                                              ref.flux[rg.face_index(a, gu[0], gu[1], gu[2])]);
                }
            }
    return sum;
}

double ratio(double num, double den) { return den > 0.0 ? std::sqrt(num / den) : std::sqrt(num); }

} // namespace

double relative_velocity_error(const MultiscaleSolution& ms, const DiscreteSolution& reference)
{
    if (!(reference.grid == ms.hierarchy->grid()))
        throw ConfigError("velocity error: reference grid does not match");
    double num = 0.0;
    for (std::size_t l = 0; l < ms.leaves.size(); ++l)
        num += leaf_diff_sq(ms.leaves[l], ms.hierarchy->leaf(int(l)).box, reference);
    return ratio(num, velocity_l2_squared(reference));
}

double relative_velocity_difference(const MultiscaleSolution& a, const MultiscaleSolution& b)
{
    if (a.leaves.size() != b.leaves.size())
        throw ConfigError("velocity difference: different decompositions");
    double num = 0.0, den = 0.0;
    for (std::size_t l = 0; l < a.leaves.size(); ++l) {
        num += velocity_l2_diff_squared(a.leaves[l], b.leaves[l]);
        den += velocity_l2_squared(b.leaves[l]);
    }
    return ratio(num, den);
}

namespace {

double pressure_diff(const std::vector<double>& a, const std::vector<double>& b)
{
    double num = 0.0, den = 0.0;
    for (std::size_t c = 0; c < a.size(); ++c) {
        num += (a[c] - b[c]) * (a[c] - b[c]);
        den += b[c] * b[c];
    }
    return ratio(num, den);
}

} // namespace

double relative_pressure_difference(const MultiscaleSolution& a, const MultiscaleSolution& b)
{
    return pressure_diff(a.pressure(), b.pressure());
}

double relative_pressure_error(const MultiscaleSolution& ms, const DiscreteSolution& reference)
{
    return pressure_diff(ms.pressure(), reference.pressure);
}

FluxDiagnostics flux_diagnostics(const MultiscaleSolution& ms, const InterfaceSpace& space)
{
    const auto& h = *ms.hierarchy;
    const auto& grid = h.grid();
    FluxDiagnostics d;
    for (int l = 0; l < h.leaf_count(); ++l) {
        const auto& box = h.leaf(l).box;
        const auto& s = ms.leaves[l];
        for (int side = 0; side < 6; ++side) {
            const int a = side_axis(side);
            if (side_is_upper(side) ? box.hi[a] != grid.cells(a) : box.lo[a] != 0)
                continue;
            const double sign = side_is_upper(side) ? 1.0 : -1.0;
            const double area = s.grid.face_area(a);
            for (std::size_t f = 0; f < side_face_count(s.grid, side); ++f)
                d.through_flux += std::max(0.0, -sign * s.flux[side_grid_face(s.grid, side, f)]) * area;
        }
    }

    auto patch_faces = [&](int leaf, int patch) -> const LeafPatch& {
        for (const auto& lp : space.leaf_patches(leaf))
            if (lp.patch == patch)
                return lp;
        throw ConfigError("flux diagnostics: patch missing from leaf");
    };
    double worst = 0.0;
    for (const auto& p : space.patches()) {
        const auto& lo = patch_faces(p.lower_leaf, p.id);
        const auto& up = patch_faces(p.upper_leaf, p.id);
        const auto& sl = ms.leaves[p.lower_leaf];
        const auto& su = ms.leaves[p.upper_leaf];
        const double area = grid.face_area(p.axis);
        double net = 0.0;
        for (std::size_t f = 0; f < lo.faces.size(); ++f) {
            const double ul = sl.flux[side_grid_face(sl.grid, lo.faces[f].side, lo.faces[f].face)];
            const double uu = su.flux[side_grid_face(su.grid, up.faces[f].side, up.faces[f].face)];
            // Both values are +axis velocities: outward for the lower side,
            // inward for the upper one.
            net += (ul - uu) * area;
            d.max_face_jump = std::max(d.max_face_jump, std::abs(ul - uu));
        }
        worst = std::max(worst, std::abs(net));
    }
    d.max_patch_residual = d.through_flux > 0.0 ? worst / d.through_flux : worst;
    return d;
}

} // namespace rmrcm
