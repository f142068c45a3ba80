#include "rmrcm/error.hpp"
#include "rmrcm/local_fem.hpp"

#include "tpfa_oracle.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace rmrcm;

namespace {

SolverConfig tight(std::optional<Preconditioner> pc = std::nullopt)
{
    SolverConfig c;
    c.tolerance = 1e-12;
    c.max_iterations = 5000;
    c.preconditioner = pc;
    return c;
}

std::vector<double> random_perm(const StructuredGrid& g, std::uint64_t seed, double omega = 1.5)
{
    return make_lognormal(g, 1.0, omega, seed, CorrelationModel::iid()).values();
}

/// Outward velocity of boundary face f on `side`.
double outward(const DiscreteSolution& s, int side, std::size_t f)
{
    const double u = s.flux[side_grid_face(s.grid, side, f)];
    return side_is_upper(side) ? u : -u;
}

double net_boundary_outflow(const DiscreteSolution& s)
{
    double sum = 0.0;
    for (int side = 0; side < 6; ++side)
        for (std::size_t f = 0; f < side_face_count(s.grid, side); ++f)
            sum += outward(s, side, f) * s.grid.face_area(side_axis(side));
    return sum;
}

LocalProblem mixed_problem(Index3 cells, std::uint64_t seed)
{
    const StructuredGrid g(cells, {1.0, 0.75, 0.5});
    LocalProblem pr(g, random_perm(g, seed));
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    pr.set_side(0, {BoundaryKind::dirichlet, 0.0}, 0.0);
    pr.set_side(1, {BoundaryKind::robin, 0.3}, 0.0);
    pr.set_side(2, {BoundaryKind::neumann, 0.0}, 0.0);
    pr.set_side(5, {BoundaryKind::robin, 2.0}, 0.0);
    for (int side : {0, 1, 2, 5})
        for (auto& v : pr.values[side])
            v = u(rng);
    pr.types[1][0].beta = 7.0;
    pr.source.resize(g.cell_count());
    for (auto& f : pr.source)
        f = u(rng);
    return pr;
}

} // namespace

TEST(Tpfa, TwoCellHarmonicSeries)
{
    const StructuredGrid g({2, 1, 1}, {2.0, 1.0, 1.0});
    LocalProblem pr(g, {1.0, 3.0});
    pr.set_side(0, {BoundaryKind::dirichlet, 0.0}, 1.0);
    pr.set_side(1, {BoundaryKind::dirichlet, 0.0}, 0.0);
    auto s = solve_local(pr, tight());
    // Resistances 1/2 + 1/2 + 1/6 + 1/6 in series.
    const double u = 1.0 / (4.0 / 3.0);
    EXPECT_NEAR(s.flux[g.face_index(0, 0, 0, 0)], u, 1e-12);
    EXPECT_NEAR(s.flux[g.face_index(0, 1, 0, 0)], u, 1e-12);
    EXPECT_NEAR(s.flux[g.face_index(0, 2, 0, 0)], u, 1e-12);
    EXPECT_NEAR(s.pressure[0], 1.0 - u * 0.5, 1e-12);
    EXPECT_NEAR(s.pressure[1], u * 0.5 / 3.0, 1e-12);
}

TEST(Tpfa, LinearProfileIsExact)
{
    for (double lx : {1.0, 2.0}) {
        const StructuredGrid g({8, 8, 8}, {lx, 1.0, 1.0});
        LocalProblem pr(g, std::vector<double>(g.cell_count(), 1.0));
        pr.set_side(0, {BoundaryKind::dirichlet, 0.0}, 1.0);
        pr.set_side(1, {BoundaryKind::dirichlet, 0.0}, 0.0);
        auto s = solve_local(pr, tight());
        for (std::size_t c = 0; c < g.cell_count(); ++c) {
            const double x = (g.cell_coords(c)[0] + 0.5) * g.spacing(0);
            EXPECT_NEAR(s.pressure[c], 1.0 - x / lx, 1e-10);
        }
        for (std::size_t f = 0; f < g.face_count(); ++f)
            EXPECT_NEAR(s.flux[f], f < g.face_count(0) ? 1.0 / lx : 0.0, 1e-10);
    }
}

TEST(Tpfa, MatchesDenseOracleForEveryPreconditioner)
{
    const auto pr = mixed_problem({8, 4, 4}, 21);
    const auto ref = oracle::solve_tpfa(pr);
    for (auto pc : {Preconditioner::jacobi, Preconditioner::incomplete_cholesky, Preconditioner::multigrid}) {
        auto s = solve_local(pr, tight(pc));
        EXPECT_LT(oracle::max_abs_diff(s.pressure, ref.pressure), 1e-9 * oracle::max_abs(ref.pressure))
            << to_string(pc);
        EXPECT_LT(oracle::max_abs_diff(s.flux, ref.flux), 1e-9 * oracle::max_abs(ref.flux)) << to_string(pc);
    }
}

TEST(Tpfa, NonPowerOfTwoGridMatchesOracle)
{
    const auto pr = mixed_problem({5, 3, 7}, 4);
    const auto ref = oracle::solve_tpfa(pr);
    auto s = solve_local(pr, tight());
    EXPECT_LT(oracle::max_abs_diff(s.pressure, ref.pressure), 1e-9 * oracle::max_abs(ref.pressure));
    EXPECT_LT(oracle::max_abs_diff(s.flux, ref.flux), 1e-9 * oracle::max_abs(ref.flux));
}

TEST(Tpfa, PerCellConservation)
{
    const auto pr = mixed_problem({8, 8, 4}, 8);
    auto s = solve_local(pr, tight());
    const auto out = cell_outflow(s);
    for (std::size_t c = 0; c < out.size(); ++c)
        EXPECT_NEAR(out[c], pr.source[c] * s.grid.cell_volume(), 1e-10);
}

TEST(Tpfa, UnitSourceLeavesThroughBoundary)
{
    const StructuredGrid g({6, 5, 4}, {1.0, 1.0, 1.0});
    LocalProblem pr(g, random_perm(g, 3));
    for (int side = 0; side < 6; ++side)
        pr.set_side(side, {BoundaryKind::dirichlet, 0.0}, 0.0);
    pr.source.assign(g.cell_count(), 1.0);
    auto s = solve_local(pr, tight());
    EXPECT_NEAR(net_boundary_outflow(s), 1.0, 1e-10);
}

TEST(Tpfa, SolverIsLinearInData)
{
    const auto pr = mixed_problem({4, 4, 4}, 12);
    LocalSolver solver(pr, tight());
    auto a = solver.solve(pr.values, pr.source);
    SideArray v2 = pr.values;
    for (auto& side : v2)
        for (auto& x : side)
            x = 0.5 - x * x;
    std::vector<double> f2(pr.source.size(), 0.25);
    auto b = solver.solve(v2, f2);
    SideArray vc = pr.values;
    std::vector<double> fc(pr.source.size());
    for (int s = 0; s < 6; ++s)
        for (std::size_t f = 0; f < vc[s].size(); ++f)
            vc[s][f] = 2.0 * pr.values[s][f] - 3.0 * v2[s][f];
    for (std::size_t c = 0; c < fc.size(); ++c)
        fc[c] = 2.0 * pr.source[c] - 3.0 * f2[c];
    auto c = solver.solve(vc, fc);
    a.axpby(2.0, -3.0, b);
    EXPECT_LT(oracle::max_abs_diff(a.pressure, c.pressure), 1e-9 * oracle::max_abs(c.pressure));
    EXPECT_LT(oracle::max_abs_diff(a.flux, c.flux), 1e-9 * oracle::max_abs(c.flux));
}

TEST(Tpfa, LargeBetaRobinImposesFlux)
{
    // Robin data lambda = P - beta * c * o drives the outward velocity to
    // c * o as beta grows (o = n_out . n_ref, here n_ref = +x so o = -1).
    const StructuredGrid g({6, 6, 6}, {1.0, 1.0, 1.0});
    const auto perm = random_perm(g, 17);
    const double c = 0.8, o = -1.0, p_h = 0.37;
    LocalProblem neu(g, perm);
    neu.set_side(0, {BoundaryKind::neumann, 0.0}, c * o);
    neu.set_side(1, {BoundaryKind::dirichlet, 0.0}, 0.0);
    auto expected = solve_local(neu, tight());

    for (double beta : {1e6, 1e12}) {
        LocalProblem rob(g, perm);
        rob.set_side(0, {BoundaryKind::robin, beta}, robin_value(beta, c, p_h, o));
        rob.set_side(1, {BoundaryKind::dirichlet, 0.0}, 0.0);
        auto s = solve_local(rob, tight());
        for (std::size_t f = 0; f < side_face_count(g, 0); ++f)
            EXPECT_NEAR(outward(s, 0, f), c * o, 1e3 / beta);
        EXPECT_LT(oracle::max_abs_diff(s.flux, expected.flux), 1e3 / beta);
    }
}

TEST(Tpfa, NonConvergenceCarriesResidual)
{
    const auto pr = mixed_problem({16, 16, 16}, 2);
    SolverConfig cfg;
    cfg.max_iterations = 1;
    cfg.preconditioner = Preconditioner::jacobi;
    try {
        solve_local(pr, cfg);
        FAIL() << "expected SolverError";
    } catch (const SolverError& e) {
        EXPECT_GT(e.residual(), cfg.tolerance);
        EXPECT_EQ(e.iterations(), 1);
    }
}

TEST(Tpfa, ConfigValidation)
{
    SolverConfig cfg;
    cfg.tolerance = 0.0;
    EXPECT_THROW(cfg.validate(), ConfigError);
    cfg.tolerance = 1.0;
    EXPECT_THROW(cfg.validate(), ConfigError);
    cfg.tolerance = 1e-8;
    cfg.max_iterations = 0;
    EXPECT_THROW(cfg.validate(), ConfigError);
    EXPECT_THROW(parse_preconditioner("amg"), ConfigError);
    EXPECT_EQ(parse_preconditioner(to_string(Preconditioner::multigrid)), Preconditioner::multigrid);
}

TEST(Tpfa, RobinWithoutBetaIsRejected)
{
    const StructuredGrid g({2, 2, 2}, {1.0, 1.0, 1.0});
    LocalProblem pr(g, std::vector<double>(8, 1.0));
    pr.set_side(0, {BoundaryKind::robin, 0.0}, 0.0);
    EXPECT_THROW(solve_local(pr, tight()), ConfigError);
}

// --- multiscale basis functions ----------------------------------------

namespace {

std::vector<FaceRef> whole_side(const StructuredGrid& g, int side)
{
    std::vector<FaceRef> faces;
    for (std::size_t f = 0; f < side_face_count(g, side); ++f)
        faces.push_back({side, f});
    return faces;
}

/// Robin residual p_face - beta * u_out - lambda on every Robin face, with
/// the face pressure reconstructed from the adjacent cell.
double robin_residual(const LocalSolver& solver, const DiscreteSolution& s, const SideArray& values)
{
    const auto& g = s.grid;
    double worst = 0.0;
    for (int side = 0; side < 6; ++side) {
        const int a = side_axis(side);
        for (std::size_t f = 0; f < side_face_count(g, side); ++f) {
            const auto& t = solver.types()[side][f];
            if (t.kind != BoundaryKind::robin)
                continue;
            const std::size_t c = solver.boundary_cell(side, f);
            const double u = outward(s, side, f);
            const double p_face = s.pressure[c] - u * g.spacing(a) / (2.0 * solver.permeability()[c]);
            worst = std::max(worst, std::abs(p_face - t.beta * u - values[side][f]));
        }
    }
    return worst;
}

} // namespace

TEST(Mmbf, FluxBasisIsDivergenceFree)
{
    const StructuredGrid g({8, 8, 1}, {1.0, 1.0, 0.125});
    LocalProblem pr(g, std::vector<double>(g.cell_count(), 1.0));
    const double beta = 1e3 * 1.0 / 1.0;
    pr.set_side(1, {BoundaryKind::robin, beta}, 0.0);
    LocalSolver solver(pr, tight());
    auto s = solve_mmbf_flux_basis(solver, whole_side(g, 1), beta, 1.0);
    for (double v : cell_outflow(s))
        EXPECT_NEAR(v, 0.0, 1e-10);
    for (std::size_t f = 0; f < side_face_count(g, 1); ++f)
        EXPECT_NEAR(outward(s, 1, f), 0.0, 1e-9);

    auto zero = solver.solve(solver.zero_values(), {});
    EXPECT_EQ(oracle::max_abs(zero.pressure), 0.0);
    EXPECT_EQ(oracle::max_abs(zero.flux), 0.0);
}

TEST(Mmbf, FluxBasisSignFollowsImposedDirection)
{
    const StructuredGrid g({8, 8, 1}, {1.0, 1.0, 0.125});
    const auto perm = make_lognormal(StructuredGrid({8, 8, 8}, {1, 1, 1}), 1.6487, 2.0, 5).slice(
        {{0, 0, 4}, {8, 8, 5}});
    LocalProblem pr(g, perm);
    const double beta = 50.0;
    pr.set_side(0, {BoundaryKind::dirichlet, 0.0}, 0.0);
    pr.set_side(1, {BoundaryKind::robin, beta}, 0.0);
    LocalSolver solver(pr, tight());
    std::vector<FaceRef> patch;
    for (std::size_t f = 0; f < 4; ++f)
        patch.push_back({1, f});

    for (double o : {1.0, -1.0}) {
        auto s = solve_mmbf_flux_basis(solver, patch, beta, o);
        double through = 0.0;
        for (const auto& fr : patch)
            through += outward(s, fr.side, fr.face) * g.face_area(0);
        EXPECT_GT(through * o, 0.0);

        LocalProblem dense = pr;
        for (const auto& fr : patch)
            dense.values[fr.side][fr.face] = robin_value(beta, 1.0, 0.0, o);
        const auto ref = oracle::solve_tpfa(dense);
        EXPECT_LT(oracle::max_abs_diff(s.flux, ref.flux), 1e-9 * oracle::max_abs(ref.flux));
        EXPECT_LT(oracle::max_abs_diff(s.pressure, ref.pressure), 1e-9 * oracle::max_abs(ref.pressure));
    }
}

TEST(Mmbf, UnitPressureOnWholeBoundaryIsConstant)
{
    const StructuredGrid g({6, 6, 6}, {1.0, 1.0, 1.0});
    LocalProblem pr(g, std::vector<double>(g.cell_count(), 1.0));
    for (int side = 0; side < 6; ++side)
        pr.set_side(side, {BoundaryKind::robin, 40.0}, 0.0);
    LocalSolver solver(pr, tight());
    std::vector<FaceRef> all;
    for (int side = 0; side < 6; ++side)
        for (const auto& f : whole_side(g, side))
            all.push_back(f);
    auto s = solve_mmbf_pressure_basis(solver, all);
    for (double p : s.pressure)
        EXPECT_NEAR(p, 1.0, 1e-10);
    EXPECT_LT(oracle::max_abs(s.flux), 1e-10);
}

TEST(Mmbf, SinglePatchPressureBasisMatchesOracle)
{
    const StructuredGrid g({8, 8, 4}, {1.0, 1.0, 0.5});
    LocalProblem pr(g, random_perm(g, 31));
    for (int side = 0; side < 6; ++side)
        pr.set_side(side, {BoundaryKind::robin, 12.0}, 0.0);
    LocalSolver solver(pr, tight());
    std::vector<FaceRef> patch{{2, 0}, {2, 1}, {2, 8}, {2, 9}};
    auto s = solve_mmbf_pressure_basis(solver, patch);
    EXPECT_GT(oracle::max_abs(s.flux), 0.0);
    for (double v : cell_outflow(s))
        EXPECT_NEAR(v, 0.0, 1e-10);

    LocalProblem dense = pr;
    for (const auto& fr : patch)
        dense.values[fr.side][fr.face] = 1.0;
    const auto ref = oracle::solve_tpfa(dense);
    EXPECT_LT(oracle::max_abs_diff(s.flux, ref.flux), 1e-9 * oracle::max_abs(ref.flux));

    // Flux is concentrated near the patch: the patch faces carry the
    // largest inflow.
    double patch_in = 0.0, elsewhere = 0.0;
    for (int side = 0; side < 6; ++side)
        for (std::size_t f = 0; f < side_face_count(g, side); ++f) {
            const bool on = side == 2 && (f == 0 || f == 1 || f == 8 || f == 9);
            (on ? patch_in : elsewhere) = std::max(on ? patch_in : elsewhere, -outward(s, side, f));
        }
    EXPECT_GT(patch_in, elsewhere);
}

TEST(Mmbf, DoubledBetaChangesSolutionAndKeepsRobinRelation)
{
    const StructuredGrid g({8, 8, 1}, {1.0, 1.0, 0.125});
    std::vector<DiscreteSolution> out;
    for (double beta : {5.0, 10.0}) {
        LocalProblem pr(g, std::vector<double>(g.cell_count(), 1.0));
        pr.set_side(0, {BoundaryKind::robin, beta}, 0.0);
        pr.set_side(1, {BoundaryKind::dirichlet, 0.0}, 0.0);
        LocalSolver solver(pr, tight());
        std::vector<FaceRef> patch{{0, 0}, {0, 1}, {0, 2}, {0, 3}};
        auto s = solve_mmbf_pressure_basis(solver, patch);
        SideArray values = solver.zero_values();
        for (const auto& fr : patch)
            values[fr.side][fr.face] = 1.0;
        EXPECT_LT(robin_residual(solver, s, values), 1e-10);
        out.push_back(s);
    }
    EXPECT_GT(oracle::max_abs_diff(out[0].flux, out[1].flux), 1e-3);
}

TEST(Particular, ZeroDataGivesZero)
{
    const StructuredGrid g({4, 4, 4}, {1.0, 1.0, 1.0});
    LocalProblem pr(g, random_perm(g, 1));
    for (int side = 0; side < 6; ++side)
        pr.set_side(side, {BoundaryKind::robin, 3.0}, 0.0);
    LocalSolver solver(pr, tight());
    auto s = solve_particular(solver, solver.zero_values(), {});
    EXPECT_EQ(oracle::max_abs(s.pressure), 0.0);
    EXPECT_EQ(oracle::max_abs(s.flux), 0.0);
}

TEST(Particular, DirichletInletSatisfiesRobinFaces)
{
    const StructuredGrid g({8, 4, 4}, {1.0, 0.5, 0.5});
    LocalProblem pr(g, random_perm(g, 6));
    pr.set_side(0, {BoundaryKind::dirichlet, 0.0}, 1.0);
    pr.set_side(1, {BoundaryKind::robin, 25.0}, 0.0);
    pr.set_side(2, {BoundaryKind::robin, 25.0}, 0.0);
    LocalSolver solver(pr, tight());
    SideArray external = solver.zero_values();
    for (auto& v : external[0])
        v = 1.0;
    for (auto& v : external[1])
        v = 9.0;  // ignored on Robin faces
    auto s = solve_particular(solver, external, {});
    EXPECT_GT(oracle::max_abs(s.flux), 1e-3);
    EXPECT_LT(robin_residual(solver, s, solver.zero_values()), 1e-10);

    LocalProblem dense = pr;
    const auto ref = oracle::solve_tpfa(dense);
    EXPECT_LT(oracle::max_abs_diff(s.pressure, ref.pressure), 1e-9);
}

TEST(Particular, SourceLeavesThroughRobinFaces)
{
    const StructuredGrid g({6, 6, 6}, {1.0, 1.0, 1.0});
    LocalProblem pr(g, random_perm(g, 9));
    for (int side = 0; side < 6; ++side)
        pr.set_side(side, {BoundaryKind::robin, 80.0}, 0.0);
    LocalSolver solver(pr, tight());
    std::vector<double> f(g.cell_count(), 1.0);
    auto s = solve_particular(solver, solver.zero_values(), f);
    EXPECT_NEAR(net_boundary_outflow(s), 1.0, 1e-10);
}

TEST(Reference, LognormalInflowEqualsOutflow)
{
    const StructuredGrid g({60, 60, 60}, {1.0, 1.0, 1.0});
    auto perm = make_lognormal(g, 1.6487, 3.7, 1);
    auto s = solve_reference(g, perm, DomainBoundary::pressure_drop_x(1.0), SolverConfig{});
    const double in = boundary_inflow(s);
    EXPECT_GT(in, 0.0);
    EXPECT_LT(std::abs(net_boundary_outflow(s)), 1e-6 * in);
    double out_x = 0.0;
    for (std::size_t f = 0; f < side_face_count(g, 1); ++f)
        out_x += outward(s, 1, f) * g.face_area(0);
    EXPECT_NEAR(out_x, in, 1e-6 * in);
}

TEST(Reference, HomogeneousIsLinear)
{
    const StructuredGrid g({16, 8, 8}, {2.0, 1.0, 1.0});
    auto s = solve_reference(g, make_homogeneous(g, 1.0), DomainBoundary::pressure_drop_x(1.0), tight());
    for (std::size_t c = 0; c < g.cell_count(); ++c)
        EXPECT_NEAR(s.pressure[c], 1.0 - (g.cell_coords(c)[0] + 0.5) / 16.0, 1e-10);
    for (std::size_t f = 0; f < g.face_count(0); ++f)
        EXPECT_NEAR(s.flux[f], 0.5, 1e-10);
}
