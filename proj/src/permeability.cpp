#include "rmrcm/permeability.hpp"

#include "rmrcm/error.hpp"
#include "rmrcm/field_io.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace rmrcm {

CorrelationModel CorrelationModel::parse(const std::string& text)
{
    if (text == "iid")
        return iid();
    if (text.rfind("ma:", 0) == 0) {
        try {
            std::size_t used = 0;
            int r = std::stoi(text.substr(3), &used);
            if (used == text.size() - 3 && r >= 0)
                return moving_average(r);
        } catch (const std::exception&) {
        }
    }
    throw ConfigError("invalid correlation model '" + text + "' (expected 'iid' or 'ma:<radius>')");
}

std::string CorrelationModel::to_string() const
{
    return kind == Kind::iid ? std::string("iid") : "ma:" + std::to_string(radius);
}

PermeabilityField::PermeabilityField(StructuredGrid grid, std::vector<double> values, Provenance provenance)
    : grid_(std::move(grid)), values_(std::move(values)), provenance_(std::move(provenance))
{
    if (values_.size() != grid_.cell_count())
        throw ConfigError("permeability: value count does not match the grid");
    for (double v : values_)
        if (!(v > 0.0) || !std::isfinite(v))
            throw ConfigError("permeability: values must be positive and finite");
}

void PermeabilityField::set_gaussian(std::vector<double> xi)
{
    if (xi.size() != values_.size())
        throw ConfigError("permeability: gaussian realization size mismatch");
    xi_ = std::move(xi);
}

double PermeabilityField::min() const { return *std::min_element(values_.begin(), values_.end()); }
double PermeabilityField::max() const { return *std::max_element(values_.begin(), values_.end()); }

std::vector<double> PermeabilityField::slice(const CellBox& box) const
{
    std::vector<double> out;
    out.reserve(std::size_t(box.cell_count()));
    for (int k = box.lo[2]; k < box.hi[2]; ++k)
        for (int j = box.lo[1]; j < box.hi[1]; ++j)
            for (int i = box.lo[0]; i < box.hi[0]; ++i)
                out.push_back(at(i, j, k));
    return out;
}

PermeabilityField make_homogeneous(const StructuredGrid& grid, double k)
{
    if (!(k > 0.0) || !std::isfinite(k))
        throw ConfigError("homogeneous permeability must be positive");
    Provenance prov;
    prov.k0 = k;
    return PermeabilityField(grid, std::vector<double>(grid.cell_count(), k), prov);
}

namespace {

// Box-Muller over mt19937_64 keeps realizations identical across standard
// library implementations (std::normal_distribution is unspecified).
class PortableNormal {
public:
    explicit PortableNormal(std::uint64_t seed) : engine_(seed) {}

    double operator()()
    {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        constexpr double scale = 1.0 / 9007199254740992.0;  // 2^-53
        double u1 = 0.0;
        while (u1 <= 0.0)
            u1 = double(engine_() >> 11) * scale;
        const double u2 = double(engine_() >> 11) * scale;
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double t = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(t);
        has_spare_ = true;
        return r * std::cos(t);
    }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

// Running-sum box filter of half-width r along one axis of a padded array.
void box_filter_axis(std::vector<double>& data, const Index3& n, int axis, int r)
{
    std::array<std::size_t, 3> stride{1, std::size_t(n[0]), std::size_t(n[0]) * n[1]};
    const int len = n[axis];
    auto t = tangential_axes(axis);
    std::vector<double> line(len), out(len);
    for (int b = 0; b < n[t[1]]; ++b)
        for (int a = 0; a < n[t[0]]; ++a) {
            const std::size_t base = a * stride[t[0]] + b * stride[t[1]];
            for (int x = 0; x < len; ++x)
                line[x] = data[base + x * stride[axis]];
            double sum = 0.0;
            for (int x = 0; x < std::min(len, 2 * r + 1); ++x)
                sum += line[x];
            // Only positions with a full window are kept by the caller.
            for (int x = r; x + r < len; ++x) {
                out[x] = sum;
                if (x + r + 1 < len)
                    sum += line[x + r + 1] - line[x - r];
            }
            for (int x = r; x + r < len; ++x)
                data[base + x * stride[axis]] = out[x];
        }
}

} // namespace

std::vector<double> gaussian_field(const Index3& cells, std::uint64_t seed, const CorrelationModel& correlation)
{
    for (int a = 0; a < 3; ++a)
        if (cells[a] < 1)
            throw ConfigError("gaussian field: resolution must be positive");
    PortableNormal normal(seed);
    const std::size_t count = std::size_t(cells[0]) * cells[1] * cells[2];

    if (correlation.kind == CorrelationModel::Kind::iid) {
        std::vector<double> xi(count);
        for (auto& v : xi)
            v = normal();
        return xi;
    }
    if (correlation.radius < 0)
        throw ConfigError("moving-average radius must be non-negative");

    const int r = correlation.radius;
    const Index3 padded{cells[0] + 2 * r, cells[1] + 2 * r, cells[2] + 2 * r};
    std::vector<double> noise(std::size_t(padded[0]) * padded[1] * padded[2]);
    for (auto& v : noise)
        v = normal();
    for (int a = 0; a < 3; ++a)
        box_filter_axis(noise, padded, a, r);

    // A sum of (2r+1)^3 independent unit normals has variance (2r+1)^3.
    const double scale = 1.0 / std::sqrt(std::pow(2.0 * r + 1.0, 3));
    std::vector<double> xi(count);
    for (int k = 0; k < cells[2]; ++k)
        for (int j = 0; j < cells[1]; ++j)
            for (int i = 0; i < cells[0]; ++i)
                xi[i + std::size_t(cells[0]) * (j + std::size_t(cells[1]) * k)] =
                    scale * noise[(i + r) + std::size_t(padded[0]) * ((j + r) + std::size_t(padded[1]) * (k + r))];
    return xi;
}

PermeabilityField make_lognormal(const StructuredGrid& grid, double k0, double omega, std::uint64_t seed,
                                 const CorrelationModel& correlation)
{
    if (!(k0 > 0.0) || !std::isfinite(k0))
        throw ConfigError("lognormal: k0 must be positive");
    if (!(omega >= 0.0) || !std::isfinite(omega))
        throw ConfigError("lognormal: omega must be non-negative");

    auto xi = gaussian_field(grid.cells(), seed, correlation);
    std::vector<double> values(xi.size());
    for (std::size_t c = 0; c < xi.size(); ++c)
        values[c] = k0 * std::exp(omega * xi[c]);

    Provenance prov{Provenance::Kind::lognormal, k0, omega, seed, correlation, grid.cells(), {}};
    PermeabilityField field(grid, std::move(values), prov);
    field.set_gaussian(std::move(xi));
    return field;
}

namespace {

Index3 refinement_ratio(const StructuredGrid& src, const StructuredGrid& dst)
{
    Index3 ratio{};
    for (int a = 0; a < 3; ++a) {
        if (dst.cells(a) % src.cells(a) != 0)
            throw ConfigError("projection: destination resolution must be an integer multiple of the source");
        ratio[a] = dst.cells(a) / src.cells(a);
    }
    return ratio;
}

std::vector<double> inject(const std::vector<double>& src, const StructuredGrid& sg, const StructuredGrid& dg,
                           const Index3& ratio)
{
    std::vector<double> out(dg.cell_count());
    for (int k = 0; k < dg.cells(2); ++k)
        for (int j = 0; j < dg.cells(1); ++j)
            for (int i = 0; i < dg.cells(0); ++i)
                out[dg.cell_index(i, j, k)] = src[sg.cell_index(i / ratio[0], j / ratio[1], k / ratio[2])];
    return out;
}

} // namespace

PermeabilityField project_to_finer(const PermeabilityField& src, const StructuredGrid& dst_grid)
{
    const Index3 ratio = refinement_ratio(src.grid(), dst_grid);
    Provenance prov = src.provenance();
    if (prov.kind == Provenance::Kind::homogeneous || prov.kind == Provenance::Kind::file)
        prov.kind = Provenance::Kind::derived;
    PermeabilityField out(dst_grid, inject(src.values(), src.grid(), dst_grid, ratio), prov);
    if (src.gaussian())
        out.set_gaussian(inject(*src.gaussian(), src.grid(), dst_grid, ratio));
    return out;
}

PermeabilityField tile(const PermeabilityField& block, const Index3& reps, const StructuredGrid& dst_grid)
{
    const auto& bg = block.grid();
    for (int a = 0; a < 3; ++a)
        if (reps[a] < 1 || bg.cells(a) * reps[a] != dst_grid.cells(a))
            throw ConfigError("tile: destination resolution must equal block resolution times repetitions");
    std::vector<double> out(dst_grid.cell_count());
    for (int k = 0; k < dst_grid.cells(2); ++k)
        for (int j = 0; j < dst_grid.cells(1); ++j)
            for (int i = 0; i < dst_grid.cells(0); ++i)
                out[dst_grid.cell_index(i, j, k)] = block.at(i % bg.cells(0), j % bg.cells(1), k % bg.cells(2));
    Provenance prov = block.provenance();
    prov.kind = Provenance::Kind::derived;
    return PermeabilityField(dst_grid, std::move(out), prov);
}

PermeabilityField load_field(const std::filesystem::path& path, std::array<double, 3> extents)
{
    RawField raw = read_raw_field(path);
    for (double v : raw.values)
        if (!(v > 0.0) || !std::isfinite(v))
            throw FormatError("permeability file contains non-positive or non-finite values");
    Provenance prov;
    prov.kind = Provenance::Kind::file;
    prov.path = path.string();
    return PermeabilityField(StructuredGrid(raw.shape, extents), std::move(raw.values), prov);
}

PermeabilityField load_field(const std::filesystem::path& path)
{
    RawField raw = read_raw_field(path);
    std::array<double, 3> extents{double(raw.shape[0]), double(raw.shape[1]), double(raw.shape[2])};
    if (raw.meta.contains("extents"))
        extents = raw.meta["extents"].get<std::array<double, 3>>();
    return load_field(path, extents);
}

void save_field(const PermeabilityField& field, const std::filesystem::path& path)
{
    RawField raw;
    raw.shape = field.grid().cells();
    raw.values = field.values();
    raw.meta["kind"] = "permeability";
    raw.meta["extents"] = field.grid().extents();
    write_raw_field(path, raw);
}

} // namespace rmrcm
