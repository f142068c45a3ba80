#include "rmrcm/grid.hpp"

#include "rmrcm/error.hpp"

#include <cmath>
#include <string>

namespace rmrcm {

StructuredGrid::StructuredGrid(Index3 cells, std::array<double, 3> extents)
    : cells_(cells), extents_(extents)
{
    for (int a = 0; a < 3; ++a) {
        if (cells_[a] < 1)
            throw ConfigError("grid: cell count along axis " + std::to_string(a) + " must be >= 1");
        if (!(extents_[a] > 0.0) || !std::isfinite(extents_[a]))
            throw ConfigError("grid: extent along axis " + std::to_string(a) + " must be positive");
    }
}

StructuredGrid StructuredGrid::unit_spacing(Index3 cells)
{
    return StructuredGrid(cells, {double(cells[0]), double(cells[1]), double(cells[2])});
}

StructuredGrid StructuredGrid::sub_grid(const CellBox& box) const
{
    Index3 n{};
    std::array<double, 3> len{};
    for (int a = 0; a < 3; ++a) {
        if (box.lo[a] < 0 || box.hi[a] > cells_[a] || box.extent(a) < 1)
            throw ConfigError("grid: sub-box outside the owning grid");
        n[a] = box.extent(a);
        len[a] = spacing(a) * n[a];
    }
    return StructuredGrid(n, len);
}

} // namespace rmrcm
