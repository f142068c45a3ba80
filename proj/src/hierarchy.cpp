#include "rmrcm/hierarchy.hpp"

#include "rmrcm/error.hpp"

#include <bit>
#include <string>

namespace rmrcm {

bool is_power_of_two(int n) noexcept { return n > 0 && std::has_single_bit(unsigned(n)); }

namespace {

void check_counts(const Index3& subdomains)
{
    for (int a = 0; a < 3; ++a)
        if (!is_power_of_two(subdomains[a]))
            throw ConfigError("subdomain count along axis " + std::to_string(a) + " must be a power of two, got " +
                              std::to_string(subdomains[a]));
}

int split_axis_for(const CellBox& blocks)
{
    int best = -1, best_div = 0;
    for (int a = 0; a < 3; ++a) {
        const int div = std::bit_width(unsigned(blocks.extent(a))) - 1;
        if (div > best_div) {
            best = a;
            best_div = div;
        }
    }
    return best;
}

} // namespace

DecompositionHierarchy::DecompositionHierarchy(const StructuredGrid& grid, Index3 subdomains)
    : grid_(grid), counts_(subdomains)
{
    check_counts(subdomains);
    for (int a = 0; a < 3; ++a) {
        if (grid.cells(a) % subdomains[a] != 0)
            throw ConfigError("grid cells along axis " + std::to_string(a) +
                              " are not divisible by the subdomain count");
        sub_cells_[a] = grid.cells(a) / subdomains[a];
        depth_ += std::bit_width(unsigned(subdomains[a])) - 1;
    }

    levels_.resize(depth_ + 1);
    HierarchyNode root;
    root.box = grid.box();
    root.blocks = {{0, 0, 0}, subdomains};
    root.leaf_count = 1 << depth_;
    levels_[0].push_back(root);
    for (int l = 0; l < depth_; ++l) {
        for (auto& n : levels_[l]) {
            const int a = split_axis_for(n.blocks);
            n.split_axis = a;
            const int mid_block = n.blocks.lo[a] + n.blocks.extent(a) / 2;
            n.split_plane = mid_block * sub_cells_[a];

            HierarchyNode lower = n, upper = n;
            lower.level = upper.level = l + 1;
            lower.index = n.lower_child();
            upper.index = n.upper_child();
            lower.split_axis = upper.split_axis = -1;
            lower.blocks.hi[a] = upper.blocks.lo[a] = mid_block;
            lower.box.hi[a] = upper.box.lo[a] = n.split_plane;
            lower.leaf_count = upper.leaf_count = n.leaf_count / 2;
            upper.first_leaf = n.first_leaf + lower.leaf_count;
            levels_[l + 1].push_back(lower);
            levels_[l + 1].push_back(upper);
        }
    }

    leaf_by_block_.assign(std::size_t(counts_[0]) * counts_[1] * counts_[2], -1);
    for (const auto& leaf : levels_[depth_]) {
        const auto& b = leaf.blocks.lo;
        leaf_by_block_[b[0] + std::size_t(counts_[0]) * (b[1] + std::size_t(counts_[1]) * b[2])] = leaf.index;
    }
}

int DecompositionHierarchy::leaf_at(const Index3& b) const
{
    return leaf_by_block_.at(b[0] + std::size_t(counts_[0]) * (b[1] + std::size_t(counts_[1]) * b[2]));
}

DecompositionHierarchy build_hierarchy(Index3 subdomains, const StructuredGrid& grid)
{
    return DecompositionHierarchy(grid, subdomains);
}

std::int64_t count_basis(Index3 subdomains, Index3 hbar_ratio)
{
    check_counts(subdomains);
    for (int a = 0; a < 3; ++a)
        if (hbar_ratio[a] < 1)
            throw ConfigError("H/Hbar ratios must be positive integers");
    std::int64_t patches = 0;
    for (int a = 0; a < 3; ++a) {
        const auto t = tangential_axes(a);
        patches += std::int64_t(subdomains[a] - 1) * subdomains[t[0]] * subdomains[t[1]] * hbar_ratio[t[0]] *
                   hbar_ratio[t[1]];
    }
    return 2 * patches + std::int64_t(subdomains[0]) * subdomains[1] * subdomains[2];
}

} // namespace rmrcm
