#include "rmrcm/local_fem.hpp"

#include "rmrcm/error.hpp"

#include <cmath>

namespace rmrcm {

std::size_t side_face_count(const StructuredGrid& grid, int side)
{
    auto t = tangential_axes(side_axis(side));
    return std::size_t(grid.cells(t[0])) * grid.cells(t[1]);
}

namespace {

// Cell coordinates of face `f` on `side`.
Index3 side_cell(const StructuredGrid& grid, int side, std::size_t f)
{
    const int axis = side_axis(side);
    const auto t = tangential_axes(axis);
    Index3 c{};
    c[t[0]] = int(f % grid.cells(t[0]));
    c[t[1]] = int(f / grid.cells(t[0]));
    c[axis] = side_is_upper(side) ? grid.cells(axis) - 1 : 0;
    return c;
}

} // namespace

std::size_t side_grid_face(const StructuredGrid& grid, int side, std::size_t f)
{
    Index3 c = side_cell(grid, side, f);
    const int axis = side_axis(side);
    if (side_is_upper(side))
        c[axis] += 1;
    return grid.face_index(axis, c[0], c[1], c[2]);
}

LocalProblem::LocalProblem(StructuredGrid g, std::vector<double> perm)
    : grid(std::move(g)), permeability(std::move(perm))
{
    for (int s = 0; s < 6; ++s) {
        types[s].assign(side_face_count(grid, s), BoundaryType{});
        values[s].assign(side_face_count(grid, s), 0.0);
    }
}

void LocalProblem::set_side(int side, BoundaryType type, double value)
{
    std::fill(types[side].begin(), types[side].end(), type);
    std::fill(values[side].begin(), values[side].end(), value);
}

void LocalProblem::validate() const
{
    if (permeability.size() != grid.cell_count())
        throw ConfigError("local problem: permeability size mismatch");
    if (!source.empty() && source.size() != grid.cell_count())
        throw ConfigError("local problem: source size mismatch");
    for (int s = 0; s < 6; ++s)
        if (values[s].size() != side_face_count(grid, s))
            throw ConfigError("local problem: boundary data size mismatch");
}

void DiscreteSolution::axpby(double a, double b, const DiscreteSolution& other)
{
    for (std::size_t i = 0; i < pressure.size(); ++i)
        pressure[i] = a * pressure[i] + b * other.pressure[i];
    for (std::size_t i = 0; i < flux.size(); ++i)
        flux[i] = a * flux[i] + b * other.flux[i];
}

LocalSolver::LocalSolver(StructuredGrid grid, std::vector<double> permeability, SideTypes types, SolverConfig config)
    : grid_(std::move(grid)), perm_(std::move(permeability)), types_(std::move(types)), config_(config),
      matrix_(grid_.cells())
{
    config_.validate();
    if (perm_.size() != grid_.cell_count())
        throw ConfigError("local problem: permeability size mismatch");
    for (double k : perm_)
        if (!(k > 0.0) || !std::isfinite(k))
            throw ConfigError("local problem: permeability must be positive");

    bool anchored = false;
    for (int s = 0; s < 6; ++s) {
        if (types_[s].size() != side_face_count(grid_, s))
            throw ConfigError("local problem: boundary type array has wrong size");
        for (const auto& t : types_[s]) {
            if (t.kind == BoundaryKind::robin && !(t.beta > 0.0 && std::isfinite(t.beta)))
                throw ConfigError("local problem: Robin faces need beta > 0");
            anchored |= t.kind != BoundaryKind::neumann;
        }
    }
    if (!anchored)
        throw ConfigError("local problem: pure Neumann problem is singular");
    assemble();
    cg_ = std::make_unique<CgSolver>(matrix_, config_);
}

LocalSolver::LocalSolver(const LocalProblem& problem, SolverConfig config)
    : LocalSolver(problem.grid, problem.permeability, problem.types, config)
{
}

void LocalSolver::assemble()
{
    const auto& n = grid_.cells();
    std::array<double, 3> half{}, area{};
    for (int a = 0; a < 3; ++a) {
        half[a] = 0.5 * grid_.spacing(a);
        area[a] = grid_.face_area(a);
    }
    for (int k = 0; k < n[2]; ++k)
        for (int j = 0; j < n[1]; ++j)
            for (int i = 0; i < n[0]; ++i) {
                const Index3 p{i, j, k};
                const std::size_t c = grid_.cell_index(i, j, k);
                for (int a = 0; a < 3; ++a) {
                    if (p[a] + 1 >= n[a])
                        continue;
                    const std::size_t d = c + matrix_.stride(a);
                    const double t = area[a] / (half[a] / perm_[c] + half[a] / perm_[d]);
                    matrix_.couple[a][c] = t;
                    matrix_.diag[c] += t;
                    matrix_.diag[d] += t;
                }
            }
    for (int s = 0; s < 6; ++s) {
        const int a = side_axis(s);
        bound_t_[s].assign(types_[s].size(), 0.0);
        for (std::size_t f = 0; f < types_[s].size(); ++f) {
            const auto& type = types_[s][f];
            if (type.kind == BoundaryKind::neumann)
                continue;
            const std::size_t c = boundary_cell(s, f);
            const double resistance = half[a] / perm_[c] + (type.kind == BoundaryKind::robin ? type.beta : 0.0);
            bound_t_[s][f] = area[a] / resistance;
            matrix_.diag[c] += bound_t_[s][f];
        }
    }
}

std::size_t LocalSolver::boundary_cell(int side, std::size_t face) const
{
    const Index3 c = side_cell(grid_, side, face);
    return grid_.cell_index(c[0], c[1], c[2]);
}

SideArray LocalSolver::zero_values() const
{
    SideArray v;
    for (int s = 0; s < 6; ++s)
        v[s].assign(types_[s].size(), 0.0);
    return v;
}

std::vector<double> LocalSolver::rhs(const SideArray& values, std::span<const double> source) const
{
    std::vector<double> b(grid_.cell_count(), 0.0);
    if (!source.empty()) {
        if (source.size() != b.size())
            throw ConfigError("local problem: source size mismatch");
        const double vol = grid_.cell_volume();
        for (std::size_t c = 0; c < b.size(); ++c)
            b[c] = source[c] * vol;
    }
    for (int s = 0; s < 6; ++s) {
        if (values[s].size() != types_[s].size())
            throw ConfigError("local problem: boundary data size mismatch");
        const double area = grid_.face_area(side_axis(s));
        for (std::size_t f = 0; f < values[s].size(); ++f) {
            const std::size_t c = boundary_cell(s, f);
            if (types_[s][f].kind == BoundaryKind::neumann)
                b[c] -= area * values[s][f];
            else
                b[c] += bound_t_[s][f] * values[s][f];
        }
    }
    return b;
}

DiscreteSolution LocalSolver::recover(std::vector<double> pressure, const SideArray& values) const
{
    DiscreteSolution sol(grid_);
    sol.pressure = std::move(pressure);
    const auto& n = grid_.cells();
    const auto& p = sol.pressure;
    for (int a = 0; a < 3; ++a) {
        const double area = grid_.face_area(a);
        for (int k = 0; k < n[2]; ++k)
            for (int j = 0; j < n[1]; ++j)
                for (int i = 0; i < n[0]; ++i) {
                    const Index3 q{i, j, k};
                    if (q[a] + 1 >= n[a])
                        continue;
                    const std::size_t c = grid_.cell_index(i, j, k);
                    const std::size_t d = c + matrix_.stride(a);
                    Index3 fq = q;
                    fq[a] += 1;
                    sol.flux[grid_.face_index(a, fq[0], fq[1], fq[2])] =
                        matrix_.couple[a][c] / area * (p[c] - p[d]);
                }
    }
    for (int s = 0; s < 6; ++s) {
        const double area = grid_.face_area(side_axis(s));
        const double sign = side_is_upper(s) ? 1.0 : -1.0;
        for (std::size_t f = 0; f < types_[s].size(); ++f) {
            double outward;
            if (types_[s][f].kind == BoundaryKind::neumann)
                outward = values[s][f];
            else
                outward = bound_t_[s][f] / area * (p[boundary_cell(s, f)] - values[s][f]);
            sol.flux[side_grid_face(grid_, s, f)] = sign * outward;
        }
    }
    return sol;
}

std::vector<double> LocalSolver::solve_pressure(const SideArray& values, std::span<const double> source) const
{
    const auto b = rhs(values, source);
    std::vector<double> p(b.size());
    stats_ = cg_->solve(b, p);
    return p;
}

DiscreteSolution LocalSolver::solve(const SideArray& values, std::span<const double> source) const
{
    return recover(solve_pressure(values, source), values);
}

DiscreteSolution solve_local(const LocalProblem& problem, const SolverConfig& config)
{
    problem.validate();
    LocalSolver solver(problem, config);
    return solver.solve(problem.values, problem.source);
}

namespace {

SideArray patch_values(const LocalSolver& solver, std::span<const FaceRef> patch, double value)
{
    SideArray v = solver.zero_values();
    for (const auto& ref : patch) {
        if (ref.side < 0 || ref.side >= 6 || ref.face >= v[ref.side].size())
            throw ConfigError("basis: patch face outside the subdomain boundary");
        if (solver.types()[ref.side][ref.face].kind != BoundaryKind::robin)
            throw ConfigError("basis: patch face does not carry a Robin condition");
        v[ref.side][ref.face] = value;
    }
    return v;
}

} // namespace

DiscreteSolution solve_mmbf_flux_basis(const LocalSolver& solver, std::span<const FaceRef> patch, double beta,
                                       double orientation)
{
    return solver.solve(patch_values(solver, patch, robin_value(beta, 1.0, 0.0, orientation)), {});
}

DiscreteSolution solve_mmbf_pressure_basis(const LocalSolver& solver, std::span<const FaceRef> patch)
{
    return solver.solve(patch_values(solver, patch, robin_value(0.0, 0.0, 1.0, 0.0)), {});
}

DiscreteSolution solve_particular(const LocalSolver& solver, SideArray external, std::span<const double> source)
{
    for (int s = 0; s < 6; ++s) {
        if (external[s].size() != solver.types()[s].size())
            throw ConfigError("particular: boundary data size mismatch");
        for (std::size_t f = 0; f < external[s].size(); ++f)
            if (solver.types()[s][f].kind == BoundaryKind::robin)
                external[s][f] = 0.0;
    }
    return solver.solve(external, source);
}

DomainBoundary DomainBoundary::pressure_drop_x(double p_in)
{
    DomainBoundary bc;
    bc.kind[0] = BoundaryKind::dirichlet;
    bc.kind[1] = BoundaryKind::dirichlet;
    bc.value[0] = p_in;
    bc.value[1] = 0.0;
    return bc;
}

void DomainBoundary::validate() const
{
    bool anchored = false;
    for (auto k : kind) {
        if (k == BoundaryKind::robin)
            throw ConfigError("domain boundary: Robin conditions are reserved for interfaces");
        anchored |= k == BoundaryKind::dirichlet;
    }
    if (!anchored)
        throw ConfigError("domain boundary: at least one Dirichlet side is required");
}

DiscreteSolution solve_reference(const StructuredGrid& grid, const PermeabilityField& perm,
                                 const DomainBoundary& bc, const SolverConfig& config, std::span<const double> source)
{
    bc.validate();
    if (!(perm.grid().cells() == grid.cells()))
        throw ConfigError("reference: permeability grid does not match");
    LocalProblem problem(grid, perm.values());
    for (int s = 0; s < 6; ++s)
        problem.set_side(s, {bc.kind[s], 0.0}, bc.value[s]);
    problem.source.assign(source.begin(), source.end());
    return solve_local(problem, config);
}

std::vector<double> cell_outflow(const DiscreteSolution& s)
{
    const auto& g = s.grid;
    std::vector<double> out(g.cell_count(), 0.0);
    for (int k = 0; k < g.cells(2); ++k)
        for (int j = 0; j < g.cells(1); ++j)
            for (int i = 0; i < g.cells(0); ++i) {
                double v = 0.0;
                for (int a = 0; a < 3; ++a) {
                    Index3 hi{i, j, k};
                    hi[a] += 1;
                    v += g.face_area(a) *
                         (s.flux[g.face_index(a, hi[0], hi[1], hi[2])] - s.flux[g.face_index(a, i, j, k)]);
                }
                out[g.cell_index(i, j, k)] = v;
            }
    return out;
}

namespace {

template <class FaceValue>
double rt0_l2_squared(const StructuredGrid& g, FaceValue&& value)
{
    double total = 0.0;
    const double vol = g.cell_volume();
    for (int k = 0; k < g.cells(2); ++k)
        for (int j = 0; j < g.cells(1); ++j)
            for (int i = 0; i < g.cells(0); ++i)
                for (int a = 0; a < 3; ++a) {
                    Index3 hi{i, j, k};
                    hi[a] += 1;
                    const double lo_v = value(g.face_index(a, i, j, k));
                    const double hi_v = value(g.face_index(a, hi[0], hi[1], hi[2]));
                    total += vol * (lo_v * lo_v + lo_v * hi_v + hi_v * hi_v) / 3.0;
                }
    return total;
}

} // namespace

double velocity_l2_squared(const DiscreteSolution& s)
{
    return rt0_l2_squared(s.grid, [&](std::size_t f) { return s.flux[f]; });
}

double velocity_l2_diff_squared(const DiscreteSolution& a, const DiscreteSolution& b)
{
    if (!(a.grid == b.grid))
        throw ConfigError("velocity difference: grids differ");
    return rt0_l2_squared(a.grid, [&](std::size_t f) { return a.flux[f] - b.flux[f]; });
}

double boundary_inflow(const DiscreteSolution& s)
{
    const auto& g = s.grid;
    double inflow = 0.0;
    for (int side = 0; side < 6; ++side) {
        const int a = side_axis(side);
        const double area = g.face_area(a);
        const double sign = side_is_upper(side) ? 1.0 : -1.0;
        const auto t = tangential_axes(a);
        for (int v = 0; v < g.cells(t[1]); ++v)
            for (int u = 0; u < g.cells(t[0]); ++u) {
                Index3 c{};
                c[t[0]] = u;
                c[t[1]] = v;
                c[a] = side_is_upper(side) ? g.cells(a) : 0;
                const double outward = sign * s.flux[g.face_index(a, c[0], c[1], c[2])];
                if (outward < 0.0)
                    inflow -= outward * area;
            }
    }
    return inflow;
}

} // namespace rmrcm
