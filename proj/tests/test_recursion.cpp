#include "rmrcm/error.hpp"
#include "rmrcm/recursion.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace rmrcm;

namespace {

SolverConfig tight()
{
    SolverConfig c;
    c.tolerance = 1e-11;
    return c;
}

double rel_diff(const std::vector<double>& a, const std::vector<double>& b)
{
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        num += (a[i] - b[i]) * (a[i] - b[i]);
        den += b[i] * b[i];
    }
    return std::sqrt(num / den);
}

} // namespace

TEST(Recursion, TwoSubdomainHomogeneousIsExact)
{
    const StructuredGrid g({16, 8, 8}, {2.0, 1.0, 1.0});
    auto k = make_homogeneous(g, 1.0);
    const auto bc = DomainBoundary::pressure_drop_x();
    MrcmProblem pr(k, {2, 1, 1}, {}, 1e3, bc, tight());
    auto r = rec_mrcm(pr);
    auto ref = solve_reference(g, k, bc, tight());
    EXPECT_LT(relative_velocity_error(r.solution, ref), 1e-8);
    EXPECT_LT(relative_pressure_error(r.solution, ref), 1e-8);
}

TEST(Recursion, HomogeneousAlongFlowGivesLinearPressure)
{
    const StructuredGrid g({32, 4, 4}, {4.0, 0.5, 0.5});
    auto k = make_homogeneous(g, 2.0);
    MrcmProblem pr(k, {4, 1, 1}, HbarPartition::parse("1,2,2"), 1e3, DomainBoundary::pressure_drop_x(), tight());
    auto r = rec_mrcm(pr);
    const auto p = r.solution.pressure();
    for (std::size_t c = 0; c < g.cell_count(); ++c)
        EXPECT_NEAR(p[c], 1.0 - (g.cell_coords(c)[0] + 0.5) / 32.0, 1e-9);
    const auto u = r.solution.flux();
    for (std::size_t f = 0; f < g.face_count(0); ++f)
        EXPECT_NEAR(u[f], 2.0 / 4.0, 1e-9);
    for (std::size_t f = g.face_count(0); f < g.face_count(); ++f)
        EXPECT_NEAR(u[f], 0.0, 1e-9);
}

TEST(Recursion, MatchesMonolithicInterfaceSystem)
{
    // Log-normal 2D slice, 4x1x1 and 2x2x1, Hbar = H/2.
    const StructuredGrid g({32, 32, 1}, {1.0, 1.0, 1.0 / 32});
    auto k = make_lognormal(g, 1.0, 2.5, 13, CorrelationModel::moving_average(3));
    for (Index3 p : {Index3{4, 1, 1}, Index3{2, 2, 1}, Index3{4, 4, 1}}) {
        MrcmProblem pr(k, p, HbarPartition::parse("2,2,1"), 1e3, DomainBoundary::pressure_drop_x(), tight());
        auto rec = rec_mrcm(pr);
        auto flat = flat_mrcm(pr);
        EXPECT_LT(relative_velocity_difference(rec.solution, flat.solution), 1e-8);
        EXPECT_LT(relative_pressure_difference(rec.solution, flat.solution), 1e-8);
        ASSERT_EQ(rec.coefficients.size(), flat.coefficients.size());
        for (std::size_t i = 0; i < rec.coefficients.size(); ++i)
            EXPECT_LT(rel_diff(rec.coefficients[i], flat.coefficients[i]), 1e-8);
    }
}

TEST(Recursion, ZeroDataGivesZeroSolution)
{
    const StructuredGrid g({8, 8, 8}, {1.0, 1.0, 1.0});
    auto k = make_lognormal(g, 1.0, 1.0, 2);
    MrcmProblem pr(k, {2, 2, 2}, {}, 1e3, DomainBoundary::pressure_drop_x(0.0), tight());
    auto r = rec_mrcm(pr);
    for (double v : r.solution.pressure())
        EXPECT_EQ(v, 0.0);
    for (double v : r.solution.flux())
        EXPECT_EQ(v, 0.0);
}

TEST(Recursion, SourceIsConservedPerCell)
{
    const StructuredGrid g({16, 16, 1}, {1.0, 1.0, 1.0 / 16});
    auto k = make_lognormal(g, 1.0, 1.0, 4);
    std::vector<double> f(g.cell_count(), 0.0);
    f[g.cell_index(3, 3, 0)] = 1.0;
    f[g.cell_index(12, 12, 0)] = -1.0;
    DomainBoundary bc;
    bc.kind[0] = BoundaryKind::dirichlet;
    MrcmProblem pr(k, {2, 2, 1}, {}, 1e3, bc, tight(), f);
    auto r = rec_mrcm(pr);
    const auto& h = pr.hierarchy();
    for (int i = 0; i < h.leaf_count(); ++i) {
        const auto& leaf = r.solution.leaves[i];
        const auto& box = h.leaf(i).box;
        const auto out = cell_outflow(leaf);
        for (std::size_t c = 0; c < out.size(); ++c) {
            const auto lc = leaf.grid.cell_coords(c);
            const double fc = f[g.cell_index(lc[0] + box.lo[0], lc[1] + box.lo[1], lc[2] + box.lo[2])];
            EXPECT_NEAR(out[c], fc * g.cell_volume(), 1e-10);
        }
    }
}

TEST(Recursion, CoarseFluxResidualVanishes)
{
    const StructuredGrid g({32, 32, 16}, {1.0, 1.0, 0.5});
    auto k = make_lognormal(g, 1.6487, 3.7, 5);
    MrcmProblem pr(k, {2, 2, 2}, HbarPartition::parse("2"), 1e3, DomainBoundary::pressure_drop_x(), SolverConfig{});
    auto r = rec_mrcm(pr);
    auto d = flux_diagnostics(r.solution, pr.space());
    EXPECT_GT(d.through_flux, 0.0);
    EXPECT_LT(d.max_patch_residual, 1e-9);
}

TEST(Recursion, LocalSolveCount)
{
    const StructuredGrid g({16, 16, 16}, {1.0, 1.0, 1.0});
    auto k = make_homogeneous(g, 1.0);
    MrcmProblem pr(k, {2, 2, 2}, HbarPartition::parse("2"), 1e3, DomainBoundary::pressure_drop_x(), tight());
    auto r = rec_mrcm(pr);
    int sides = 0;
    for (int i = 0; i < pr.hierarchy().leaf_count(); ++i)
        sides += int(pr.space().leaf_patches(i).size());
    EXPECT_EQ(r.local_solves, sides + pr.hierarchy().leaf_count());
    EXPECT_EQ(r.systems.size(), 7u);
    EXPECT_EQ(r.systems.front().level, 0);
}

TEST(Recursion, FlowParallelInterfaceErrorFallsWithAlpha)
{
    // A y-normal interface carries no coarse flux for x-directed flow, yet
    // the Robin coupling lets the fine flux through it jump; the error
    // decays like 1/alpha.
    const StructuredGrid g({16, 16, 1}, {1.0, 1.0, 1.0 / 16});
    auto k = make_homogeneous(g, 1.0);
    const auto bc = DomainBoundary::pressure_drop_x();
    auto ref = solve_reference(g, k, bc, tight());
    double prev = 1.0;
    for (double alpha : {1e1, 1e3, 1e5}) {
        MrcmProblem pr(k, {1, 2, 1}, HbarPartition::parse("1"), alpha, bc, tight());
        const double e = relative_velocity_error(rec_mrcm(pr).solution, ref);
        EXPECT_LT(e, prev * 0.05);
        prev = e;
    }
}

TEST(Recursion, AlphaSweepReducesFluxJump)
{
    const StructuredGrid g({16, 8, 8}, {2.0, 1.0, 1.0});
    auto k = make_lognormal(g, 1.0, 1.0, 3, CorrelationModel::moving_average(2));
    double first = 0.0, prev = 0.0;
    for (int e = 1; e <= 6; ++e) {
        MrcmProblem pr(k, {2, 1, 1}, {}, std::pow(10.0, e), DomainBoundary::pressure_drop_x(), tight());
        const double jump = flux_diagnostics(rec_mrcm(pr).solution, pr.space()).max_face_jump;
        if (e == 1)
            first = jump;
        else
            EXPECT_LT(jump, prev);
        prev = jump;
    }
    EXPECT_LT(prev, first * 1e-3);
}

TEST(Recursion, RejectsInvalidSetup)
{
    const StructuredGrid g({8, 8, 8}, {1.0, 1.0, 1.0});
    auto k = make_homogeneous(g, 1.0);
    const auto bc = DomainBoundary::pressure_drop_x();
    EXPECT_THROW(MrcmProblem(k, {2, 1, 1}, {}, 0.0, bc, tight()), ConfigError);
    EXPECT_THROW(MrcmProblem(k, {3, 1, 1}, {}, 1e3, bc, tight()), ConfigError);
    EXPECT_THROW(MrcmProblem(k, {2, 1, 1}, {}, 1e3, bc, tight(), std::vector<double>(5, 1.0)), ConfigError);
}
