#pragma once

#include "rmrcm/hierarchy.hpp"
#include "rmrcm/local_fem.hpp"
#include "rmrcm/permeability.hpp"

#include <string>
#include <vector>

namespace rmrcm {

/// Ratios H / Hbar per axis: each subdomain face is cut into patches of
/// (H / ratio) along its in-plane axes.
struct HbarPartition {
    Index3 ratio{1, 1, 1};

    /// Parses "rx,ry,rz" (or a single integer applied to every axis).
    static HbarPartition parse(const std::string& text);
    void validate(const DecompositionHierarchy& hierarchy) const;
};

/// Piecewise-constant interface patch on a splitting plane. Each patch
/// carries one flux unknown U and one pressure unknown P; its reference
/// normal is +axis, pointing towards the upper leaf, which always has the
/// larger index.
struct Patch {
    int id = 0;
    int level = 0;          ///< level of the node whose split created it
    int node = 0;           ///< index of that node within its level
    int axis = 0;
    int plane = 0;          ///< cell coordinate of the plane along axis
    Index3 lo{}, hi{};      ///< fine-face range; lo[axis] == plane, hi[axis] == plane + 1
    int lower_leaf = 0;
    int upper_leaf = 0;
    double area = 0.0;
    double hbar = 0.0;
    double keff = 0.0;
    double beta = 0.0;

    /// Orientation n_out . n_ref seen from `leaf`.
    double orientation(int leaf) const noexcept { return leaf == lower_leaf ? 1.0 : -1.0; }
    std::size_t face_count() const noexcept
    {
        std::size_t n = 1;
        for (int a = 0; a < 3; ++a)
            n *= std::size_t(hi[a] - lo[a]);
        return n;
    }
};

/// A patch as seen from one finest subdomain.
struct LeafPatch {
    int patch = 0;
    double orientation = 1.0;
    std::vector<FaceRef> faces;
};

/// Global dof numbering: patch p owns U-dof 2p and P-dof 2p + 1. Patches are
/// numbered by (level, interface, position in the interface), so the dofs
/// of level-l interfaces follow those of all coarser levels.
constexpr int u_dof(int patch) noexcept { return 2 * patch; }
constexpr int p_dof(int patch) noexcept { return 2 * patch + 1; }

class InterfaceSpace {
public:
    InterfaceSpace(const DecompositionHierarchy& hierarchy, HbarPartition partition, const PermeabilityField& perm,
                   double alpha);

    const DecompositionHierarchy& hierarchy() const noexcept { return *hierarchy_; }
    const HbarPartition& partition() const noexcept { return partition_; }
    double alpha() const noexcept { return alpha_; }

    const std::vector<Patch>& patches() const noexcept { return patches_; }
    const Patch& patch(int id) const { return patches_.at(id); }

    /// Patches of the interface splitting node (level, index).
    const std::vector<int>& interface_patches(int level, int index) const { return gamma_.at(level).at(index); }
    /// Patches on the boundary of node (level, index) that belong to the
    /// skeleton, in increasing id order.
    const std::vector<int>& boundary_patches(int level, int index) const { return boundary_.at(level).at(index); }
    /// Boundary patches of a finest subdomain with their faces, in the same
    /// order as boundary_patches(depth, leaf).
    const std::vector<LeafPatch>& leaf_patches(int leaf) const { return leaf_patches_.at(leaf); }

    /// Number of dofs on skeleton interfaces created above `level`
    /// (the dof set of the level-`level` skeleton).
    int skeleton_dof_count(int level) const { return 2 * level_offset_.at(level); }
    /// Dofs of the interface splitting node (level, index).
    std::vector<int> interface_dofs(int level, int index) const;
    /// Dofs on the boundary of node (level, index).
    std::vector<int> boundary_dofs(int level, int index) const;

    /// Boundary condition types of a finest subdomain: Robin with the patch
    /// beta on skeleton faces, `outer` on faces of the domain boundary.
    SideTypes leaf_types(int leaf, const std::array<BoundaryKind, 6>& outer) const;

private:
    const DecompositionHierarchy* hierarchy_;
    HbarPartition partition_;
    double alpha_;
    std::vector<Patch> patches_;
    std::vector<int> level_offset_;
    std::vector<std::vector<std::vector<int>>> gamma_;
    std::vector<std::vector<std::vector<int>>> boundary_;
    std::vector<std::vector<LeafPatch>> leaf_patches_;
};

/// Mean over the patch faces of the harmonic means of the two adjacent
/// cell permeabilities.
double compute_keff(const Patch& patch, const PermeabilityField& perm);
/// beta = alpha * hbar / keff.
double compute_beta(double alpha, double hbar, double keff);
/// Characteristic patch size: geometric mean of the in-plane extents,
/// ignoring axes along which the whole grid has a single cell.
double patch_hbar(const Patch& patch, const StructuredGrid& grid);

} // namespace rmrcm
