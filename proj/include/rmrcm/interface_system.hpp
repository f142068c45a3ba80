#pragma once

#include "rmrcm/dense.hpp"
#include "rmrcm/interface_space.hpp"

#include <filesystem>
#include <vector>

namespace rmrcm {

/// Basis functions of one node of the hierarchy, stored as coefficients
/// over the finest-level bases of its leaves.
///
/// Column e < patches.size() is the basis excited by unit Robin data on
/// patch patches[e] (all other data zero); the last column is the
/// particular solution. For a leaf with boundary patches B, the stored
/// finest basis of patch q solves the local problem with Robin data
/// lambda = 1 on q; the pressure-type basis (P_H = 1) is that function and
/// the flux-type basis (U_H = 1) is -beta * orientation times it.
struct BasisSet {
    int level = 0;
    int index = 0;
    std::vector<int> patches;  ///< skeleton patches on the node boundary, increasing id
    /// trace(r, e): outward flux (velocity times area) through patch
    /// patches[r] of basis e.
    DenseMatrix trace;
    /// One table per leaf of the subtree (in leaf order), mapping the
    /// node's columns to the leaf's columns: rows are the leaf's Robin
    /// data per boundary patch followed by the particular weight.
    std::vector<DenseMatrix> tables;

    std::size_t columns() const noexcept { return patches.size() + 1; }
    /// Row of `patch` in `patches`, or -1.
    int position(int patch) const noexcept;
    std::size_t table_bytes() const noexcept;
};

/// Dense interface system A X = B on one splitting interface, with one
/// right-hand side per column of the node's basis set.
///
/// Unknowns are (U_1..U_n, P_1..P_n) on the n interface patches. Row k
/// enforces the Robin flux matching of patch k,
///   beta_k (sum_c o_c F_c - 2 |g_k| U_k) = 0,
/// row n + k the coarse flux continuity F_lower + F_upper = 0, where F_c is
/// the outward flux of child c through the patch and o_c its orientation.
struct InterfaceSystem {
    int level = 0;
    int index = 0;
    std::vector<int> patches;
    DenseMatrix matrix;
    DenseMatrix rhs;
    DenseMatrix solution;

    std::size_t unknowns() const noexcept { return matrix.rows; }
};

InterfaceSystem assemble(const InterfaceSpace& space, int level, int index, const BasisSet& lower,
                         const BasisSet& upper);
/// Factorizes and solves with lu_solve; stores the solution.
void solve(InterfaceSystem& system);

/// Basis set of node (level, index) from the children and a solved system.
/// `lower_map` / `upper_map` receive the child coefficient maps
/// (child columns x node columns) when non-null.
BasisSet recombine(const InterfaceSpace& space, const InterfaceSystem& system, const BasisSet& lower,
                   const BasisSet& upper, DenseMatrix* lower_map = nullptr, DenseMatrix* upper_map = nullptr);

/// Global interface system over every skeleton patch of the finest
/// decomposition, assembled directly from the leaf traces (validation
/// oracle). Unknowns: all U in patch order, then all P. The right-hand side
/// has a single column (the particular solutions).
InterfaceSystem assemble_monolithic(const InterfaceSpace& space, const std::vector<BasisSet>& leaves);
/// Robin data per boundary patch of every leaf, followed by the particular
/// weight 1, from a solved monolithic system.
std::vector<std::vector<double>> monolithic_leaf_coefficients(const InterfaceSpace& space,
                                                              const InterfaceSystem& system);

/// Writes matrix, rhs and solution of each system as raw fields plus an
/// index.json in `dir`.
void dump_interfaces(const std::vector<InterfaceSystem>& systems, const std::filesystem::path& dir);

} // namespace rmrcm
