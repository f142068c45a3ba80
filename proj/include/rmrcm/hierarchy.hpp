#pragma once

#include "rmrcm/grid.hpp"

#include <cstdint>
#include <vector>

namespace rmrcm {

/// One subdomain of the nested binary decomposition.
struct HierarchyNode {
    int level = 0;
    int index = 0;             ///< 0-based within the level
    CellBox box;               ///< cells of the subdomain
    CellBox blocks;            ///< same box in units of finest subdomains
    int split_axis = -1;       ///< -1 for leaves
    int split_plane = 0;       ///< cell coordinate of the splitting plane along split_axis
    int first_leaf = 0;        ///< leaves of the subtree are [first_leaf, first_leaf + leaf_count)
    int leaf_count = 1;

    bool is_leaf() const noexcept { return split_axis < 0; }
    /// Children are (level + 1, 2 * index) on the lower side of the split
    /// and (level + 1, 2 * index + 1) on the upper side.
    int lower_child() const noexcept { return 2 * index; }
    int upper_child() const noexcept { return 2 * index + 1; }
};

/// Nested binary decomposition: level l holds 2^l subdomains, level 0 is the
/// whole domain and level depth() the finest decomposition.
///
/// Each node is split along the axis with the most remaining subdomain
/// divisions (ties: x, then y, then z).
class DecompositionHierarchy {
public:
    DecompositionHierarchy(const StructuredGrid& grid, Index3 subdomains);

    const StructuredGrid& grid() const noexcept { return grid_; }
    const Index3& subdomains() const noexcept { return counts_; }
    /// Cells per finest subdomain along each axis.
    const Index3& subdomain_cells() const noexcept { return sub_cells_; }
    int depth() const noexcept { return depth_; }
    int leaf_count() const noexcept { return 1 << depth_; }

    const HierarchyNode& node(int level, int index) const { return levels_.at(level).at(index); }
    const std::vector<HierarchyNode>& level(int l) const { return levels_.at(l); }
    const HierarchyNode& leaf(int i) const { return node(depth_, i); }
    /// Leaf covering finest subdomain (bx, by, bz).
    int leaf_at(const Index3& block) const;
    /// Ancestor at `level` of leaf i.
    int ancestor(int leaf, int level) const noexcept { return leaf >> (depth_ - level); }

private:
    StructuredGrid grid_;
    Index3 counts_;
    Index3 sub_cells_;
    int depth_ = 0;
    std::vector<std::vector<HierarchyNode>> levels_;
    std::vector<int> leaf_by_block_;
};

DecompositionHierarchy build_hierarchy(Index3 subdomains, const StructuredGrid& grid);

bool is_power_of_two(int n) noexcept;

/// Total number of multiscale basis functions plus particular solutions on
/// the finest level: two per interface patch and one per subdomain.
std::int64_t count_basis(Index3 subdomains, Index3 hbar_ratio);

} // namespace rmrcm
