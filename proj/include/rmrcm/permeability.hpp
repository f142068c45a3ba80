#pragma once

#include "rmrcm/grid.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace rmrcm {

/// Correlation structure of the Gaussian field behind a log-normal
/// permeability.
struct CorrelationModel {
    enum class Kind { iid, moving_average };
    Kind kind = Kind::moving_average;
    /// Half-width of the cubic averaging window, in cells (moving_average).
    int radius = 30;

    static CorrelationModel iid() { return {Kind::iid, 0}; }
    static CorrelationModel moving_average(int radius) { return {Kind::moving_average, radius}; }

    /// Parses "iid" or "ma:<radius>"; throws ConfigError otherwise.
    static CorrelationModel parse(const std::string& text);
    std::string to_string() const;

    bool operator==(const CorrelationModel&) const = default;
};

struct Provenance {
    enum class Kind { homogeneous, lognormal, file, derived };
    Kind kind = Kind::homogeneous;
    double k0 = 1.0;
    double omega = 0.0;
    std::uint64_t seed = 0;
    CorrelationModel correlation{};
    Index3 base_resolution{0, 0, 0};
    std::string path;
};

/// Per-cell scalar isotropic permeability on a structured grid. Values are
/// strictly positive and finite; construction rejects anything else.
class PermeabilityField {
public:
    PermeabilityField(StructuredGrid grid, std::vector<double> values, Provenance provenance = {});

    const StructuredGrid& grid() const noexcept { return grid_; }
    const std::vector<double>& values() const noexcept { return values_; }
    double operator[](std::size_t cell) const noexcept { return values_[cell]; }
    double at(int i, int j, int k) const noexcept { return values_[grid_.cell_index(i, j, k)]; }
    const Provenance& provenance() const noexcept { return provenance_; }

    /// Underlying Gaussian realization for log-normal fields.
    const std::optional<std::vector<double>>& gaussian() const noexcept { return xi_; }
    void set_gaussian(std::vector<double> xi);

    double min() const;
    double max() const;
    double contrast() const { return max() / min(); }

    /// Copy of the values in `box`, x-fastest over the box.
    std::vector<double> slice(const CellBox& box) const;

private:
    StructuredGrid grid_;
    std::vector<double> values_;
    Provenance provenance_;
    std::optional<std::vector<double>> xi_;
};

PermeabilityField make_homogeneous(const StructuredGrid& grid, double k);

/// K = k0 * exp(omega * xi) with xi a zero-mean, unit-variance Gaussian field
/// drawn deterministically from `seed`.
PermeabilityField make_lognormal(const StructuredGrid& grid, double k0, double omega, std::uint64_t seed,
                                 const CorrelationModel& correlation = {});

/// Zero-mean unit-variance Gaussian field; a pure function of its arguments.
std::vector<double> gaussian_field(const Index3& cells, std::uint64_t seed, const CorrelationModel& correlation);

/// Piecewise-constant injection onto a grid whose resolution is an integer
/// multiple of the source resolution along every axis.
PermeabilityField project_to_finer(const PermeabilityField& src, const StructuredGrid& dst_grid);

/// Repeats `block` reps[a] times along each axis onto a grid of matching
/// resolution (used for weak-scaling experiments).
PermeabilityField tile(const PermeabilityField& block, const Index3& reps, const StructuredGrid& dst_grid);

/// Loads a field; the grid extents are taken from `extents` (physical
/// lengths are not part of the file format).
PermeabilityField load_field(const std::filesystem::path& path, std::array<double, 3> extents);
PermeabilityField load_field(const std::filesystem::path& path);
void save_field(const PermeabilityField& field, const std::filesystem::path& path);

} // namespace rmrcm
