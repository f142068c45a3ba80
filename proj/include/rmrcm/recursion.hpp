#pragma once

#include "rmrcm/interface_system.hpp"
#include "rmrcm/local_fem.hpp"

#include <memory>
#include <optional>
#include <vector>

namespace rmrcm {

/// Everything that defines one multiscale solve. Not copyable: the
/// interface space refers to the hierarchy held here.
class MrcmProblem {
public:
    MrcmProblem(const PermeabilityField& perm, Index3 subdomains, HbarPartition partition, double alpha,
                DomainBoundary bc, SolverConfig solver, std::vector<double> source = {});
    MrcmProblem(const MrcmProblem&) = delete;
    MrcmProblem& operator=(const MrcmProblem&) = delete;

    const StructuredGrid& grid() const noexcept { return perm_->grid(); }
    const PermeabilityField& permeability() const noexcept { return *perm_; }
    const DecompositionHierarchy& hierarchy() const noexcept { return hierarchy_; }
    const InterfaceSpace& space() const noexcept { return *space_; }
    const DomainBoundary& boundary() const noexcept { return bc_; }
    const SolverConfig& solver() const noexcept { return solver_; }
    const std::vector<double>& source() const noexcept { return source_; }

private:
    const PermeabilityField* perm_;
    DecompositionHierarchy hierarchy_;
    std::unique_ptr<InterfaceSpace> space_;
    DomainBoundary bc_;
    SolverConfig solver_;
    std::vector<double> source_;
};

/// Finest-level basis of one subdomain: one local solve per boundary patch
/// (unit Robin data on that patch) and the particular solution. Only cell
/// pressures are kept; velocities are recovered on evaluation.
struct LeafBasis {
    int leaf = 0;
    std::unique_ptr<LocalSolver> solver;
    SideArray external;                        ///< domain-boundary data, zero on Robin faces
    std::vector<double> source;                ///< local source, empty if none
    std::vector<std::vector<double>> pressure; ///< per boundary patch
    std::vector<double> particular;
    int local_solves = 0;
    int cg_iterations = 0;

    std::size_t storage_bytes() const noexcept;
};

LeafBasis compute_leaf_basis(const MrcmProblem& problem, int leaf);
/// Level-L basis set of a leaf: traces of its finest bases and identity
/// coefficient table.
BasisSet leaf_basis_set(const MrcmProblem& problem, const LeafBasis& basis);

/// Interface system and recombined basis set of node (level, index).
struct MergeResult {
    InterfaceSystem system;
    BasisSet set;
    DenseMatrix lower_map;
    DenseMatrix upper_map;
};
MergeResult merge(const MrcmProblem& problem, int level, int index, const BasisSet& lower, const BasisSet& upper);

/// Leaf solution for given Robin data per boundary patch followed by the
/// particular weight.
DiscreteSolution evaluate_leaf(const LeafBasis& basis, const InterfaceSpace& space, std::span<const double> coeffs);

/// Multiscale solution: one local solution per finest subdomain. Faces on
/// the skeleton carry a value from each side.
struct MultiscaleSolution {
    const DecompositionHierarchy* hierarchy = nullptr;
    std::vector<DiscreteSolution> leaves;

    /// Global cell pressures.
    std::vector<double> pressure() const;
    /// Global face velocities; skeleton faces take the mean of both sides.
    std::vector<double> flux() const;
};

struct MrcmResult {
    MultiscaleSolution solution;
    /// Final coefficients per leaf (Robin data per patch, then particular
    /// weight), i.e. the root tables.
    std::vector<std::vector<double>> coefficients;
    /// Solved interface systems in (level, index) order, coarsest first.
    std::vector<InterfaceSystem> systems;
    std::size_t basis_bytes = 0;
    std::size_t table_bytes = 0;
    int local_solves = 0;
};

/// Sequential recursive solve (bottom-up merges, then evaluation).
MrcmResult rec_mrcm(const MrcmProblem& problem);
/// Non-recursive solve through the monolithic interface system.
MrcmResult flat_mrcm(const MrcmProblem& problem);

// --- diagnostics ------------------------------------------------------

/// ||u - u_h|| / ||u|| in the RT0 L2 norm, against a solution on the full grid.
double relative_velocity_error(const MultiscaleSolution& ms, const DiscreteSolution& reference);
/// Relative L2 difference of velocities (per subdomain) of two multiscale
/// solutions on the same hierarchy.
double relative_velocity_difference(const MultiscaleSolution& a, const MultiscaleSolution& b);
/// Relative L2 difference of cell pressures.
double relative_pressure_difference(const MultiscaleSolution& a, const MultiscaleSolution& b);
double relative_pressure_error(const MultiscaleSolution& ms, const DiscreteSolution& reference);

struct FluxDiagnostics {
    /// Max over skeleton patches of |F_lower + F_upper| / total through-flux.
    double max_patch_residual = 0.0;
    /// Max over skeleton faces of |u_lower - u_upper| (normal velocity).
    double max_face_jump = 0.0;
    double through_flux = 0.0;
};
FluxDiagnostics flux_diagnostics(const MultiscaleSolution& ms, const InterfaceSpace& space);

} // namespace rmrcm
