#include "rmrcm/error.hpp"
#include "rmrcm/harness.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

using namespace rmrcm;

namespace {

struct Options {
    std::string perm = "homogeneous";
    double k0 = 1.0;
    double omega = 0.0;
    std::uint64_t seed = 1;
    std::string perm_path;
    std::string corr = "ma:30";
    std::string perm_base = "60,60,60";
    double alpha = 1e3;
    std::string hbar = "1";
    std::string subdomains = "2,2,2";
    std::string cells = "64,64,64";
    std::string cells_per_subdomain = "32,32,32";
    std::vector<int> workers;
    std::vector<std::string> decompositions;
    bool repeat_block = false;
    bool reference = false;
    double tolerance = 1e-8;
    std::string preconditioner;
    std::string dump_dir;
    std::string export_dir;
    std::string csv;
    std::string manifest;
};

void add_problem_options(CLI::App* app, Options& o)
{
    app->add_option("--perm", o.perm, "homogeneous | lognormal | file")->capture_default_str();
    app->add_option("--k0", o.k0, "Mean permeability scale")->capture_default_str();
    app->add_option("--omega", o.omega, "Log-normal standard deviation")->capture_default_str();
    app->add_option("--seed", o.seed, "Log-normal seed")->capture_default_str();
    app->add_option("--perm-path", o.perm_path, "Permeability field file (--perm file)");
    app->add_option("--perm-base", o.perm_base, "Resolution at which a log-normal field is drawn")
        ->capture_default_str();
    app->add_option("--corr", o.corr, "Gaussian correlation: iid | ma:<radius>")->capture_default_str();
    app->add_option("--alpha", o.alpha, "Robin parameter scale")->capture_default_str();
    app->add_option("--hbar-ratio", o.hbar, "Interface patches per subdomain face: r or rx,ry,rz")
        ->capture_default_str();
    app->add_option("--tolerance", o.tolerance, "Relative residual tolerance of the local solves")
        ->capture_default_str();
    app->add_option("--preconditioner", o.preconditioner, "jacobi | ic | mg (default: automatic)");
    app->add_option("--dump-interface", o.dump_dir, "Directory for interface matrices and right-hand sides");
    app->add_option("--manifest", o.manifest, "Write a JSON run manifest");
}

ExperimentSpec base_spec(const Options& o, ExperimentSpec::Mode mode)
{
    ExperimentSpec s;
    s.mode = mode;
    s.perm.kind = PermSpec::parse_kind(o.perm);
    s.perm.k0 = o.k0;
    s.perm.omega = o.omega;
    s.perm.seed = o.seed;
    s.perm.correlation = CorrelationModel::parse(o.corr);
    s.perm.path = o.perm_path;
    s.perm.base = parse_triple(o.perm_base);
    if (s.perm.kind == PermSpec::Kind::file && o.perm_path.empty())
        throw ConfigError("--perm file requires --perm-path");
    s.alpha = o.alpha;
    s.hbar = HbarPartition::parse(o.hbar);
    s.cells = parse_triple(o.cells);
    s.cells_per_subdomain = parse_triple(o.cells_per_subdomain);
    s.repeat_block = o.repeat_block;
    s.solver.tolerance = o.tolerance;
    if (!o.preconditioner.empty())
        s.solver.preconditioner = parse_preconditioner(o.preconditioner);
    if (!o.dump_dir.empty())
        s.dump_dir = o.dump_dir;
    return s;
}

int subdomain_count(const Index3& p) { return p[0] * p[1] * p[2]; }

/// One decomposition with several worker counts, several decompositions
/// with one worker each (default: one worker per subdomain), or pairs.
std::vector<RowSpec> make_rows(const Options& o, bool default_one_worker)
{
    std::vector<Index3> decomps;
    for (const auto& d : o.decompositions)
        decomps.push_back(parse_triple(d));
    if (decomps.empty())
        decomps.push_back(parse_triple(o.subdomains));
    std::vector<RowSpec> rows;
    if (decomps.size() == 1 && o.workers.size() > 1) {
        for (int w : o.workers)
            rows.push_back({decomps[0], w});
    } else if (o.workers.size() == decomps.size()) {
        for (std::size_t i = 0; i < decomps.size(); ++i)
            rows.push_back({decomps[i], o.workers[i]});
    } else if (o.workers.size() == 1) {
        for (const auto& d : decomps)
            rows.push_back({d, o.workers[0]});
    } else if (o.workers.empty()) {
        for (const auto& d : decomps)
            rows.push_back({d, default_one_worker ? 1 : subdomain_count(d)});
    } else {
        throw ConfigError("--workers must list one value, one value per decomposition, or go with a single "
                          "decomposition");
    }
    return rows;
}

void finish(const Options& o, const ExperimentSpec& spec)
{
    if (!o.manifest.empty())
        write_manifest(o.manifest, spec);
}

int cmd_run(const Options& o)
{
    ExperimentSpec spec = base_spec(o, ExperimentSpec::Mode::single);
    spec.rows = {{parse_triple(o.subdomains), o.workers.empty() ? 1 : o.workers[0]}};
    if (o.workers.size() > 1)
        throw ConfigError("run takes a single --workers value");
    spec.validate();
    SingleOutcome out = run_single(spec, spec.rows[0], o.reference);
    const auto& t = out.run.timing;
    std::printf("grid %s, subdomains %s, workers %d, hbar H/%s, alpha %g\n",
                format_triple(out.setup->grid.cells()).c_str(), format_triple(out.row.subdomains).c_str(),
                out.row.workers, format_triple(spec.hbar.ratio).c_str(), spec.alpha);
    std::printf("local solves %d, interface systems %zu, messages %lld\n", out.row.local_solves,
                out.run.mrcm.systems.size(), static_cast<long long>(out.row.messages));
    std::printf("time mmbf %.6f s, interface %.6f s, comm %.6f s, total %.6f s\n", t.mmbf_time, t.interface_time,
                t.comm_time, t.total_time);
    std::printf("through flux %.10g, max patch residual %.3e\n", out.flux.through_flux,
                out.flux.max_patch_residual);
    if (out.rel_u_error)
        std::printf("relative velocity error %.6e\n", *out.rel_u_error);
    if (!o.export_dir.empty())
        export_solution(out.run.mrcm.solution, o.export_dir);
    if (!o.csv.empty())
        write_timing_csv(o.csv, {out.row});
    finish(o, spec);
    return 0;
}

int cmd_timing(const Options& o, ExperimentSpec::Mode mode)
{
    ExperimentSpec spec = base_spec(o, mode);
    spec.rows = make_rows(o, false);
    const auto rows = mode == ExperimentSpec::Mode::strong ? run_strong(spec) : run_weak(spec);
    if (o.csv.empty())
        write_timing_csv(std::cout, rows);
    else
        write_timing_csv(o.csv, rows);
    finish(o, spec);
    return 0;
}

int cmd_accuracy(const Options& o)
{
    ExperimentSpec spec = base_spec(o, ExperimentSpec::Mode::accuracy);
    spec.rows = make_rows(o, true);
    const auto rows = run_accuracy(spec);
    if (o.csv.empty())
        write_accuracy_csv(std::cout, rows);
    else
        write_accuracy_csv(o.csv, rows);
    finish(o, spec);
    return 0;
}

int cmd_count(const Options& o)
{
    const Index3 p = parse_triple(o.subdomains);
    for (int a = 0; a < 3; ++a)
        if (!is_power_of_two(p[a]))
            throw ConfigError("subdomain counts must be powers of two");
    const Index3 r = HbarPartition::parse(o.hbar).ratio;
    std::printf("%lld\n", static_cast<long long>(count_basis(p, r)));
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Recursive multiscale robin coupled solver for structured-grid Darcy flow"};
    app.set_version_flag("--version", version_string());
    app.require_subcommand(1);
    Options o;

    auto* run = app.add_subcommand("run", "Solve one decomposition");
    add_problem_options(run, o);
    run->add_option("--subdomains", o.subdomains, "Subdomains per axis, e.g. 2,2,2")->capture_default_str();
    run->add_option("--cells", o.cells, "Grid cells per axis")->capture_default_str();
    run->add_option("--workers", o.workers, "Worker count");
    run->add_flag("--reference", o.reference, "Also solve the monolithic problem and report the error");
    run->add_option("--export", o.export_dir, "Directory for the pressure and velocity fields");
    run->add_option("--csv", o.csv, "Write the timing row as CSV");

    auto* strong = app.add_subcommand("strong", "Strong scaling: fixed grid");
    add_problem_options(strong, o);
    strong->add_option("--cells", o.cells, "Grid cells per axis")->capture_default_str();
    strong->add_option("--subdomains", o.subdomains, "Decomposition when --decompositions is absent")
        ->capture_default_str();
    strong->add_option("--decompositions", o.decompositions, "Decompositions, e.g. 1x1x1 2x1x1 2x2x1");
    strong->add_option("--workers", o.workers, "Worker counts");
    strong->add_option("--csv", o.csv, "Output CSV (default: stdout)");

    auto* weak = app.add_subcommand("weak", "Weak scaling: fixed cells per subdomain");
    add_problem_options(weak, o);
    weak->add_option("--cells-per-subdomain", o.cells_per_subdomain, "Cells per subdomain and axis")
        ->capture_default_str();
    weak->add_option("--decompositions", o.decompositions, "Decompositions, e.g. 1x1x1 2x1x1 2x2x1");
    weak->add_option("--workers", o.workers, "Worker counts (default: one per subdomain)");
    weak->add_option("--csv", o.csv, "Output CSV (default: stdout)");

    auto* acc = app.add_subcommand("accuracy", "Velocity error against the monolithic solve");
    add_problem_options(acc, o);
    acc->add_option("--cells", o.cells, "Grid cells per axis")->capture_default_str();
    acc->add_option("--cells-per-subdomain", o.cells_per_subdomain, "Cells per subdomain (--repeat-block)")
        ->capture_default_str();
    acc->add_flag("--repeat-block", o.repeat_block, "Repeat one permeability block per subdomain");
    acc->add_option("--decompositions", o.decompositions, "Decompositions")->required();
    acc->add_option("--workers", o.workers, "Worker counts (default: 1)");
    acc->add_option("--csv", o.csv, "Output CSV (default: stdout)");

    auto* count = app.add_subcommand("count-basis", "Number of multiscale basis functions");
    count->add_option("--subdomains", o.subdomains, "Subdomains per axis")->capture_default_str();
    count->add_option("--hbar-ratio", o.hbar, "Interface patches per subdomain face")->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run)
            return cmd_run(o);
        if (*strong)
            return cmd_timing(o, ExperimentSpec::Mode::strong);
        if (*weak)
            return cmd_timing(o, ExperimentSpec::Mode::weak);
        if (*acc)
            return cmd_accuracy(o);
        return cmd_count(o);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "rmrcm: configuration error: %s\n", e.what());
        return 2;
    } catch (const FormatError& e) {
        std::fprintf(stderr, "rmrcm: format error: %s\n", e.what());
        return 2;
    } catch (const SolverError& e) {
        std::fprintf(stderr, "rmrcm: solver error: %s (residual %.3e after %d iterations)\n", e.what(),
                     e.residual(), e.iterations());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "rmrcm: %s\n", e.what());
        return 1;
    }
}
