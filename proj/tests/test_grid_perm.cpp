#include "rmrcm/error.hpp"
#include "rmrcm/field_io.hpp"
#include "rmrcm/permeability.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <numeric>

using namespace rmrcm;

namespace {

std::filesystem::path temp_path(const std::string& name)
{
    auto dir = std::filesystem::temp_directory_path() / "rmrcm_tests";
    std::filesystem::create_directories(dir);
    return dir / name;
}

std::string file_bytes(const std::filesystem::path& p)
{
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

} // namespace

TEST(Grid, CellNumberingIsXFastest)
{
    StructuredGrid g({3, 2, 2}, {3.0, 2.0, 1.0});
    EXPECT_EQ(g.cell_count(), 12u);
    EXPECT_EQ(g.cell_index(1, 0, 0), 1u);
    EXPECT_EQ(g.cell_index(0, 1, 0), 3u);
    EXPECT_EQ(g.cell_index(0, 0, 1), 6u);
    for (std::size_t c = 0; c < g.cell_count(); ++c) {
        auto ijk = g.cell_coords(c);
        EXPECT_EQ(g.cell_index(ijk[0], ijk[1], ijk[2]), c);
    }
    EXPECT_DOUBLE_EQ(g.spacing(2), 0.5);
    EXPECT_DOUBLE_EQ(g.face_area(0), 0.5);
}

TEST(Grid, FacesAreStoredAxisByAxis)
{
    StructuredGrid g = StructuredGrid::unit_spacing({3, 2, 2});
    EXPECT_EQ(g.face_count(0), 4u * 2 * 2);
    EXPECT_EQ(g.face_count(1), 3u * 3 * 2);
    EXPECT_EQ(g.face_count(2), 3u * 2 * 3);
    EXPECT_EQ(g.face_index(0, 0, 0, 0), 0u);
    EXPECT_EQ(g.face_index(1, 0, 0, 0), 16u);
    EXPECT_EQ(g.face_index(2, 0, 0, 0), 34u);
    EXPECT_EQ(g.face_index(2, 2, 1, 2), g.face_count() - 1);
}

TEST(Homogeneous, FillsEveryCell)
{
    auto a = make_homogeneous(StructuredGrid::unit_spacing({8, 8, 8}), 1.0);
    EXPECT_TRUE(std::all_of(a.values().begin(), a.values().end(), [](double v) { return v == 1.0; }));
    auto b = make_homogeneous(StructuredGrid::unit_spacing({1, 1, 1}), 2.5);
    EXPECT_EQ(b[0], 2.5);
    auto c = make_homogeneous(StructuredGrid::unit_spacing({4, 2, 1}), 1e-3);
    EXPECT_EQ(c.min(), 1e-3);
    EXPECT_EQ(c.max(), 1e-3);
}

TEST(Homogeneous, RejectsNonPositive)
{
    EXPECT_THROW(make_homogeneous(StructuredGrid::unit_spacing({2, 2, 2}), 0.0), ConfigError);
    EXPECT_THROW(make_homogeneous(StructuredGrid::unit_spacing({2, 2, 2}), -1.0), ConfigError);
}

TEST(Lognormal, ZeroOmegaGivesK0)
{
    auto f = make_lognormal(StructuredGrid::unit_spacing({5, 4, 3}), 1.6487, 0.0, 11);
    for (double v : f.values())
        EXPECT_EQ(v, 1.6487);
}

TEST(Lognormal, IidLogMeanWithinSamplingError)
{
    const auto grid = StructuredGrid::unit_spacing({16, 16, 16});
    auto f = make_lognormal(grid, 1.0, 1.0, 7, CorrelationModel::iid());
    ASSERT_TRUE(f.gaussian().has_value());
    const auto& xi = *f.gaussian();
    const double n = double(xi.size());
    const double mean = std::accumulate(xi.begin(), xi.end(), 0.0) / n;
    EXPECT_LT(std::abs(mean), 3.0 / std::sqrt(n));
    double var = 0.0;
    for (double x : xi)
        var += (x - mean) * (x - mean);
    EXPECT_NEAR(var / (n - 1), 1.0, 0.1);
    for (std::size_t c = 0; c < xi.size(); ++c)
        EXPECT_NEAR(std::log(f[c]), xi[c], 1e-12);

    auto again = make_lognormal(grid, 1.0, 1.0, 7, CorrelationModel::iid());
    EXPECT_EQ(again.values(), f.values());
}

TEST(Lognormal, PureFunctionOfArguments)
{
    const auto grid = StructuredGrid::unit_spacing({12, 10, 6});
    auto a = make_lognormal(grid, 2.0, 1.5, 3);
    auto b = make_lognormal(grid, 2.0, 1.5, 3);
    auto c = make_lognormal(grid, 2.0, 1.5, 4);
    EXPECT_EQ(a.values(), b.values());
    EXPECT_NE(a.values(), c.values());
}

TEST(Lognormal, MovingAverageHasUnitVariance)
{
    // Radius 2 keeps windows small enough for a meaningful sample variance.
    auto xi = gaussian_field({40, 40, 40}, 5, CorrelationModel::moving_average(2));
    const double n = double(xi.size());
    const double mean = std::accumulate(xi.begin(), xi.end(), 0.0) / n;
    double var = 0.0;
    for (double x : xi)
        var += (x - mean) * (x - mean);
    EXPECT_NEAR(var / n, 1.0, 0.1);
}

TEST(Lognormal, CorrelationModelParsing)
{
    EXPECT_EQ(CorrelationModel::parse("iid"), CorrelationModel::iid());
    EXPECT_EQ(CorrelationModel::parse("ma:7"), CorrelationModel::moving_average(7));
    EXPECT_EQ(CorrelationModel::parse(CorrelationModel{}.to_string()), CorrelationModel{});
    EXPECT_THROW(CorrelationModel::parse("gauss"), ConfigError);
    EXPECT_THROW(CorrelationModel::parse("ma:"), ConfigError);
    EXPECT_THROW(CorrelationModel::parse("ma:-3"), ConfigError);
}

TEST(Lognormal, RejectsNegativeOmega)
{
    EXPECT_THROW(make_lognormal(StructuredGrid::unit_spacing({2, 2, 2}), 1.0, -1.0, 1), ConfigError);
}

TEST(Projection, NearestContainingCell)
{
    PermeabilityField src(StructuredGrid({2, 1, 1}, {1.0, 1.0, 1.0}), {1.0, 4.0});
    auto dst = project_to_finer(src, StructuredGrid({4, 1, 1}, {1.0, 1.0, 1.0}));
    EXPECT_EQ(dst.values(), (std::vector<double>{1.0, 1.0, 4.0, 4.0}));
}

TEST(Projection, ConstantStaysConstant)
{
    auto src = make_homogeneous(StructuredGrid::unit_spacing({3, 2, 2}), 0.7);
    auto dst = project_to_finer(src, StructuredGrid({9, 4, 6}, {3.0, 2.0, 2.0}));
    for (double v : dst.values())
        EXPECT_EQ(v, 0.7);
}

TEST(Projection, MultisetScalesByRefinementVolume)
{
    auto src = make_lognormal(StructuredGrid({60, 60, 60}, {1.0, 1.0, 1.0}), 1.6487, 3.7, 1);
    auto dst = project_to_finer(src, StructuredGrid({120, 120, 120}, {1.0, 1.0, 1.0}));
    std::map<double, long> a, b;
    for (double v : src.values())
        a[v] += 8;
    for (double v : dst.values())
        b[v] += 1;
    EXPECT_EQ(a, b);
}

TEST(Projection, ComposesAndIsIdempotent)
{
    auto src = make_lognormal(StructuredGrid({3, 2, 2}, {1.0, 1.0, 1.0}), 1.0, 2.0, 9, CorrelationModel::iid());
    const StructuredGrid g2({6, 4, 4}, {1.0, 1.0, 1.0}), g4({12, 8, 8}, {1.0, 1.0, 1.0});
    EXPECT_EQ(project_to_finer(src, src.grid()).values(), src.values());
    EXPECT_EQ(project_to_finer(project_to_finer(src, g2), g4).values(), project_to_finer(src, g4).values());
}

TEST(Projection, RejectsNonIntegerRatio)
{
    auto src = make_homogeneous(StructuredGrid::unit_spacing({3, 3, 3}), 1.0);
    EXPECT_THROW(project_to_finer(src, StructuredGrid::unit_spacing({4, 3, 3})), ConfigError);
    EXPECT_THROW(project_to_finer(src, StructuredGrid::unit_spacing({2, 3, 3})), ConfigError);
}

TEST(Tile, RepeatsBlock)
{
    PermeabilityField block(StructuredGrid({2, 1, 1}, {1.0, 1.0, 1.0}), {1.0, 3.0});
    auto t = tile(block, {2, 2, 1}, StructuredGrid({4, 2, 1}, {2.0, 2.0, 1.0}));
    EXPECT_EQ(t.values(), (std::vector<double>{1, 3, 1, 3, 1, 3, 1, 3}));
}

TEST(FieldIo, RoundTripIsBitwiseIdentical)
{
    auto f = make_lognormal(StructuredGrid({60, 60, 60}, {1.0, 1.0, 1.0}), 1.6487, 3.7, 2);
    const auto p1 = temp_path("roundtrip_a.bin"), p2 = temp_path("roundtrip_b.bin");
    save_field(f, p1);
    auto g = load_field(p1);
    EXPECT_EQ(g.values(), f.values());
    EXPECT_EQ(g.grid(), f.grid());
    save_field(g, p2);
    EXPECT_EQ(file_bytes(p1), file_bytes(p2));
}

TEST(FieldIo, TruncatedPayloadIsFormatError)
{
    const auto p = temp_path("truncated.bin");
    save_field(make_homogeneous(StructuredGrid::unit_spacing({4, 4, 4}), 1.0), p);
    std::filesystem::resize_file(p, std::filesystem::file_size(p) - 8);
    EXPECT_THROW(load_field(p), FormatError);
}

TEST(FieldIo, ZeroResolutionIsFormatError)
{
    const auto p = temp_path("zero.bin");
    {
        std::ofstream out(p, std::ios::binary);
        out << R"({"nx":0,"ny":4,"nz":4,"dtype":"f64le","order":"x-fastest"})" << '\n';
    }
    EXPECT_THROW(read_raw_field(p), FormatError);
}

TEST(FieldIo, NonPositiveValuesAreFormatError)
{
    const auto p = temp_path("negative.bin");
    RawField raw;
    raw.shape = {2, 1, 1};
    raw.values = {1.0, -2.0};
    write_raw_field(p, raw);
    EXPECT_THROW(load_field(p), FormatError);
}

TEST(FieldIo, MissingHeaderIsFormatError)
{
    const auto p = temp_path("noheader.bin");
    {
        std::ofstream out(p, std::ios::binary);
        out << "garbage";
    }
    EXPECT_THROW(read_raw_field(p), FormatError);
}
