#pragma once

#include "rmrcm/grid.hpp"
#include "rmrcm/permeability.hpp"
#include "rmrcm/stencil.hpp"

#include <array>
#include <span>
#include <vector>

namespace rmrcm {

// Box sides are numbered 2*axis + (0 for the lower face, 1 for the upper).
constexpr int side_axis(int side) noexcept { return side / 2; }
constexpr bool side_is_upper(int side) noexcept { return side % 2 == 1; }
/// Number of cell faces on a side of a grid; they are ordered by the two
/// tangential axes, first one fastest.
std::size_t side_face_count(const StructuredGrid& grid, int side);
/// Flat grid-face index of face `f` on `side`.
std::size_t side_grid_face(const StructuredGrid& grid, int side, std::size_t f);

enum class BoundaryKind { dirichlet, neumann, robin };

/// Type of condition on one boundary face. Robin faces carry beta > 0.
struct BoundaryType {
    BoundaryKind kind = BoundaryKind::neumann;
    double beta = 0.0;
};

/// Data of the condition on one boundary face:
///   dirichlet: pressure g_D
///   neumann:   outward normal velocity g_N
///   robin:     lambda in  p - beta * u.n_out = lambda,
///              lambda = P_H - beta * U_H * (n_out . n_ref)
using SideArray = std::array<std::vector<double>, 6>;
using SideTypes = std::array<std::vector<BoundaryType>, 6>;

/// Robin data for given interface unknowns; `orientation` is n_out . n_ref.
constexpr double robin_value(double beta, double flux_u, double pressure_p, double orientation) noexcept
{
    return pressure_p - beta * flux_u * orientation;
}

/// Local Darcy problem  div u = f,  u = -K grad p  on a box of cells.
struct LocalProblem {
    StructuredGrid grid;
    std::vector<double> permeability;  ///< per cell
    SideTypes types;                  ///< per boundary face
    SideArray values;                 ///< per boundary face
    std::vector<double> source;       ///< per cell; empty means zero

    /// No-flow on every face and zero source.
    LocalProblem(StructuredGrid g, std::vector<double> perm);

    void set_side(int side, BoundaryType type, double value);
    void validate() const;
};

/// Cell pressures and one normal velocity per grid face, oriented along
/// +axis.
struct DiscreteSolution {
    StructuredGrid grid;
    std::vector<double> pressure;
    std::vector<double> flux;

    explicit DiscreteSolution(const StructuredGrid& g = StructuredGrid())
        : grid(g), pressure(g.cell_count(), 0.0), flux(g.face_count(), 0.0) {}

    /// In-place a*this + b*other on the same grid.
    void axpby(double a, double b, const DiscreteSolution& other);
};

/// Assembled cell-centred two-point-flux operator for a fixed set of
/// boundary types; reused for any boundary data and source.
class LocalSolver {
public:
    LocalSolver(StructuredGrid grid, std::vector<double> permeability, SideTypes types, SolverConfig config);
    explicit LocalSolver(const LocalProblem& problem, SolverConfig config);

    DiscreteSolution solve(const SideArray& values, std::span<const double> source) const;
    /// Cell pressures only.
    std::vector<double> solve_pressure(const SideArray& values, std::span<const double> source) const;

    const StructuredGrid& grid() const noexcept { return grid_; }
    const SideTypes& types() const noexcept { return types_; }
    const std::vector<double>& permeability() const noexcept { return perm_; }
    const StencilMatrix& matrix() const noexcept { return matrix_; }
    /// Iterations and residual of the most recent solve.
    SolveStats last_stats() const noexcept { return stats_; }
    /// Right-hand side of the assembled pressure system for the given data.
    std::vector<double> rhs(const SideArray& values, std::span<const double> source) const;
    /// Velocities from cell pressures.
    DiscreteSolution recover(std::vector<double> pressure, const SideArray& values) const;

    /// Boundary-face conductance (0 for Neumann faces).
    double boundary_conductance(int side, std::size_t face) const { return bound_t_[side][face]; }
    /// Cell adjacent to a boundary face.
    std::size_t boundary_cell(int side, std::size_t face) const;

    /// All-zero boundary data shaped for this solver.
    SideArray zero_values() const;

private:
    void assemble();

    StructuredGrid grid_;
    std::vector<double> perm_;
    SideTypes types_;
    SolverConfig config_;
    StencilMatrix matrix_;
    std::array<std::vector<double>, 6> bound_t_;
    std::unique_ptr<CgSolver> cg_;
    mutable SolveStats stats_;
};

DiscreteSolution solve_local(const LocalProblem& problem, const SolverConfig& config);

/// Boundary faces of one interface patch, as (side, face-on-side) pairs.
struct FaceRef {
    int side;
    std::size_t face;
};

/// Homogeneous problem with U_H = 1 on `patch`, P_H = 0 elsewhere zero data.
DiscreteSolution solve_mmbf_flux_basis(const LocalSolver& solver, std::span<const FaceRef> patch, double beta,
                                       double orientation);
/// Homogeneous problem with P_H = 1 on `patch`.
DiscreteSolution solve_mmbf_pressure_basis(const LocalSolver& solver, std::span<const FaceRef> patch);
/// Zero Robin data, given source and external boundary data. `external`
/// values on Robin faces are ignored (set to zero).
DiscreteSolution solve_particular(const LocalSolver& solver, SideArray external, std::span<const double> source);

/// Global boundary conditions with a constant value per side of the domain.
struct DomainBoundary {
    std::array<BoundaryKind, 6> kind{BoundaryKind::neumann, BoundaryKind::neumann, BoundaryKind::neumann,
                                     BoundaryKind::neumann, BoundaryKind::neumann, BoundaryKind::neumann};
    std::array<double, 6> value{};

    /// p = p_in at x = 0, p = 0 at x = Lx, no flow elsewhere.
    static DomainBoundary pressure_drop_x(double p_in = 1.0);
    void validate() const;
};

/// Monolithic fine-grid solve on the whole domain.
DiscreteSolution solve_reference(const StructuredGrid& grid, const PermeabilityField& perm,
                                 const DomainBoundary& bc, const SolverConfig& config,
                                 std::span<const double> source = {});

// --- diagnostics on discrete solutions --------------------------------

/// Per cell, sum of outward face fluxes (velocity times area).
std::vector<double> cell_outflow(const DiscreteSolution& s);
/// Squared L2 norm of the lowest-order Raviart-Thomas velocity (exact
/// integration of the per-axis linear interpolant).
double velocity_l2_squared(const DiscreteSolution& s);
/// Squared L2 norm of the velocity difference on the same grid.
double velocity_l2_diff_squared(const DiscreteSolution& a, const DiscreteSolution& b);
/// Flux entering the domain through its boundary (sum of inflow).
double boundary_inflow(const DiscreteSolution& s);

} // namespace rmrcm
