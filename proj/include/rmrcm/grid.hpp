#pragma once

#include <array>
#include <cstddef>
#include <cstdint>

namespace rmrcm {

using Index3 = std::array<int, 3>;

/// The two in-plane axes of a face normal to `axis`, in increasing order.
constexpr std::array<int, 2> tangential_axes(int axis) noexcept
{
    return axis == 0 ? std::array<int, 2>{1, 2}
         : axis == 1 ? std::array<int, 2>{0, 2}
                     : std::array<int, 2>{0, 1};
}

/// Half-open box of cell indices [lo, hi) along each axis.
struct CellBox {
    Index3 lo{0, 0, 0};
    Index3 hi{0, 0, 0};

    int extent(int axis) const noexcept { return hi[axis] - lo[axis]; }
    std::int64_t cell_count() const noexcept
    {
        return std::int64_t(extent(0)) * extent(1) * extent(2);
    }
    bool contains(const Index3& c) const noexcept
    {
        for (int a = 0; a < 3; ++a)
            if (c[a] < lo[a] || c[a] >= hi[a])
                return false;
        return true;
    }
    bool operator==(const CellBox&) const = default;
};

/// Uniform Cartesian grid on [0, Lx] x [0, Ly] x [0, Lz].
///
/// Cells are numbered x-fastest: c = i + nx * (j + ny * k). Faces normal to
/// axis a are numbered the same way over an index box with one extra layer
/// along a, and all faces are stored axis-by-axis (x-faces, then y, then z)
/// in a single flat array.
class StructuredGrid {
public:
    StructuredGrid() = default;
    StructuredGrid(Index3 cells, std::array<double, 3> extents);

    /// Unit-spacing grid, h = 1 in every direction.
    static StructuredGrid unit_spacing(Index3 cells);

    const Index3& cells() const noexcept { return cells_; }
    int cells(int axis) const noexcept { return cells_[axis]; }
    const std::array<double, 3>& extents() const noexcept { return extents_; }
    double extent(int axis) const noexcept { return extents_[axis]; }
    double spacing(int axis) const noexcept { return extents_[axis] / cells_[axis]; }
    double cell_volume() const noexcept { return spacing(0) * spacing(1) * spacing(2); }
    /// Area of a face normal to `axis`.
    double face_area(int axis) const noexcept
    {
        auto t = tangential_axes(axis);
        return spacing(t[0]) * spacing(t[1]);
    }

    std::size_t cell_count() const noexcept
    {
        return std::size_t(cells_[0]) * cells_[1] * cells_[2];
    }
    std::size_t cell_index(int i, int j, int k) const noexcept
    {
        return std::size_t(i) + std::size_t(cells_[0]) * (std::size_t(j) + std::size_t(cells_[1]) * k);
    }
    Index3 cell_coords(std::size_t c) const noexcept
    {
        int i = int(c % cells_[0]);
        c /= cells_[0];
        return {i, int(c % cells_[1]), int(c / cells_[1])};
    }

    std::size_t face_count(int axis) const noexcept
    {
        Index3 n = cells_;
        n[axis] += 1;
        return std::size_t(n[0]) * n[1] * n[2];
    }
    std::size_t face_count() const noexcept
    {
        return face_count(0) + face_count(1) + face_count(2);
    }
    /// Offset of the first face normal to `axis` in the flat face array.
    std::size_t face_offset(int axis) const noexcept
    {
        std::size_t off = 0;
        for (int a = 0; a < axis; ++a)
            off += face_count(a);
        return off;
    }
    /// Flat index of the face normal to `axis` at lattice position (i, j, k);
    /// the coordinate along `axis` ranges over [0, n_axis].
    std::size_t face_index(int axis, int i, int j, int k) const noexcept
    {
        Index3 n = cells_;
        n[axis] += 1;
        return face_offset(axis) + std::size_t(i) + std::size_t(n[0]) * (std::size_t(j) + std::size_t(n[1]) * k);
    }

    CellBox box() const noexcept { return {{0, 0, 0}, cells_}; }

    /// Grid covering `box` with this grid's spacing.
    StructuredGrid sub_grid(const CellBox& box) const;

    bool operator==(const StructuredGrid&) const = default;

private:
    Index3 cells_{1, 1, 1};
    std::array<double, 3> extents_{1.0, 1.0, 1.0};
};

/// A subdomain: a box of cells of an owning grid, tagged with its position
/// in the decomposition hierarchy.
struct SubdomainView {
    const StructuredGrid* grid = nullptr;
    CellBox box;
    int index = 0;  ///< 0-based index within its level
    int level = 0;

    StructuredGrid local_grid() const { return grid->sub_grid(box); }
};

} // namespace rmrcm
