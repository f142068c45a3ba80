#include "rmrcm/interface_space.hpp"

#include "rmrcm/error.hpp"

#include <cmath>
#include <sstream>

namespace rmrcm {

HbarPartition HbarPartition::parse(const std::string& text)
{
    std::vector<int> parts;
    std::stringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) {
        try {
            std::size_t used = 0;
            parts.push_back(std::stoi(item, &used));
            if (used != item.size())
                parts.clear();
        } catch (const std::exception&) {
            parts.clear();
        }
        if (parts.empty())
            break;
    }
    for (int v : parts)
        if (v < 1)
            throw ConfigError("H/Hbar ratios must be positive integers");
    if (parts.size() == 1)
        return {{parts[0], parts[0], parts[0]}};
    if (parts.size() != 3)
        throw ConfigError("invalid hbar ratio '" + text + "' (expected rx,ry,rz)");
    return {{parts[0], parts[1], parts[2]}};
}

void HbarPartition::validate(const DecompositionHierarchy& hierarchy) const
{
    for (int a = 0; a < 3; ++a) {
        if (ratio[a] < 1)
            throw ConfigError("H/Hbar ratios must be positive integers");
        if (hierarchy.subdomain_cells()[a] % ratio[a] != 0)
            throw ConfigError("H/Hbar ratio along axis " + std::to_string(a) +
                              " does not divide the subdomain size in cells");
    }
}

double compute_keff(const Patch& patch, const PermeabilityField& perm)
{
    const auto t = tangential_axes(patch.axis);
    double sum = 0.0;
    std::size_t count = 0;
    for (int b = patch.lo[t[1]]; b < patch.hi[t[1]]; ++b)
        for (int a = patch.lo[t[0]]; a < patch.hi[t[0]]; ++a) {
            Index3 up{};
            up[patch.axis] = patch.plane;
            up[t[0]] = a;
            up[t[1]] = b;
            Index3 down = up;
            down[patch.axis] -= 1;
            const double ki = perm.at(down[0], down[1], down[2]);
            const double kk = perm.at(up[0], up[1], up[2]);
            sum += 2.0 * ki * kk / (ki + kk);
            ++count;
        }
    if (count == 0)
        throw ConfigError("keff: empty patch");
    return sum / double(count);
}

double compute_beta(double alpha, double hbar, double keff)
{
    if (!(alpha > 0.0) || !(hbar > 0.0) || !(keff > 0.0))
        throw ConfigError("beta: alpha, hbar and keff must be positive");
    return alpha * hbar / keff;
}

double patch_hbar(const Patch& patch, const StructuredGrid& grid)
{
    const auto t = tangential_axes(patch.axis);
    double prod = 1.0;
    int used = 0;
    for (int a : t)
        if (grid.cells(a) > 1) {
            prod *= (patch.hi[a] - patch.lo[a]) * grid.spacing(a);
            ++used;
        }
    if (used == 0) {
        for (int a : t)
            prod *= (patch.hi[a] - patch.lo[a]) * grid.spacing(a);
        used = 2;
    }
    return std::pow(prod, 1.0 / used);
}

InterfaceSpace::InterfaceSpace(const DecompositionHierarchy& hierarchy, HbarPartition partition,
                               const PermeabilityField& perm, double alpha)
    : hierarchy_(&hierarchy), partition_(partition), alpha_(alpha)
{
    partition_.validate(hierarchy);
    if (!(alpha > 0.0) || !std::isfinite(alpha))
        throw ConfigError("alpha must be positive");
    const auto& grid = hierarchy.grid();
    if (!(perm.grid().cells() == grid.cells()))
        throw ConfigError("interface space: permeability grid does not match");

    const auto& sub = hierarchy.subdomain_cells();
    Index3 pcells{};
    for (int a = 0; a < 3; ++a)
        pcells[a] = sub[a] / partition_.ratio[a];

    const int depth = hierarchy.depth();
    gamma_.resize(depth + 1);
    boundary_.resize(depth + 1);
    level_offset_.assign(depth + 2, 0);
    for (int l = 0; l <= depth; ++l) {
        gamma_[l].resize(hierarchy.level(l).size());
        boundary_[l].resize(hierarchy.level(l).size());
        level_offset_[l] = int(patches_.size());
        if (l == depth)
            break;
        for (const auto& n : hierarchy.level(l)) {
            const int a = n.split_axis;
            const auto t = tangential_axes(a);
            for (int b = n.box.lo[t[1]]; b < n.box.hi[t[1]]; b += pcells[t[1]])
                for (int c = n.box.lo[t[0]]; c < n.box.hi[t[0]]; c += pcells[t[0]]) {
                    Patch p;
                    p.id = int(patches_.size());
                    p.level = l;
                    p.node = n.index;
                    p.axis = a;
                    p.plane = n.split_plane;
                    p.lo[a] = n.split_plane;
                    p.hi[a] = n.split_plane + 1;
                    p.lo[t[0]] = c;
                    p.hi[t[0]] = c + pcells[t[0]];
                    p.lo[t[1]] = b;
                    p.hi[t[1]] = b + pcells[t[1]];
                    Index3 block{};
                    block[t[0]] = c / sub[t[0]];
                    block[t[1]] = b / sub[t[1]];
                    block[a] = n.split_plane / sub[a];
                    p.upper_leaf = hierarchy.leaf_at(block);
                    block[a] -= 1;
                    p.lower_leaf = hierarchy.leaf_at(block);
                    p.area = double(p.face_count()) * grid.face_area(a);
                    p.hbar = patch_hbar(p, grid);
                    p.keff = compute_keff(p, perm);
                    p.beta = compute_beta(alpha, p.hbar, p.keff);
                    gamma_[l][n.index].push_back(p.id);
                    patches_.push_back(p);
                }
        }
    }
    level_offset_[depth + 1] = int(patches_.size());

    for (int l = 0; l <= depth; ++l)
        for (const auto& n : hierarchy.level(l)) {
            const int first = n.first_leaf, last = n.first_leaf + n.leaf_count;
            auto inside = [&](int leaf) { return leaf >= first && leaf < last; };
            for (int id = 0; id < level_offset_[l]; ++id) {
                const auto& p = patches_[id];
                if (inside(p.lower_leaf) != inside(p.upper_leaf))
                    boundary_[l][n.index].push_back(id);
            }
        }

    leaf_patches_.resize(hierarchy.leaf_count());
    for (int leaf = 0; leaf < hierarchy.leaf_count(); ++leaf) {
        const auto& box = hierarchy.leaf(leaf).box;
        for (int id : boundary_[depth][leaf]) {
            const auto& p = patches_[id];
            LeafPatch lp;
            lp.patch = id;
            lp.orientation = p.orientation(leaf);
            const int side = 2 * p.axis + (leaf == p.lower_leaf ? 1 : 0);
            const auto t = tangential_axes(p.axis);
            for (int b = p.lo[t[1]]; b < p.hi[t[1]]; ++b)
                for (int c = p.lo[t[0]]; c < p.hi[t[0]]; ++c)
                    lp.faces.push_back({side, std::size_t(c - box.lo[t[0]]) +
                                                  std::size_t(box.extent(t[0])) * std::size_t(b - box.lo[t[1]])});
            leaf_patches_[leaf].push_back(std::move(lp));
        }
    }
}

std::vector<int> InterfaceSpace::interface_dofs(int level, int index) const
{
    std::vector<int> dofs;
    for (int id : interface_patches(level, index)) {
        dofs.push_back(u_dof(id));
        dofs.push_back(p_dof(id));
    }
    return dofs;
}

std::vector<int> InterfaceSpace::boundary_dofs(int level, int index) const
{
    std::vector<int> dofs;
    for (int id : boundary_patches(level, index)) {
        dofs.push_back(u_dof(id));
        dofs.push_back(p_dof(id));
    }
    return dofs;
}

SideTypes InterfaceSpace::leaf_types(int leaf, const std::array<BoundaryKind, 6>& outer) const
{
    const auto& h = *hierarchy_;
    const auto local = h.grid().sub_grid(h.leaf(leaf).box);
    SideTypes types;
    for (int s = 0; s < 6; ++s)
        types[s].assign(side_face_count(local, s), BoundaryType{outer[s], 0.0});
    for (const auto& lp : leaf_patches_.at(leaf)) {
        const double beta = patches_[lp.patch].beta;
        for (const auto& f : lp.faces)
            types[f.side][f.face] = {BoundaryKind::robin, beta};
    }
    return types;
}

} // namespace rmrcm
