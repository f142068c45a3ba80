#include "rmrcm/harness.hpp"

#include "rmrcm/error.hpp"
#include "rmrcm/field_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#ifndef RMRCM_VERSION
#define RMRCM_VERSION "unknown"
#endif

namespace rmrcm {

std::string format_triple(const Index3& v, char sep)
{
    return std::to_string(v[0]) + sep + std::to_string(v[1]) + sep + std::to_string(v[2]);
}

Index3 parse_triple(const std::string& text)
{
    Index3 out{};
    std::size_t pos = 0;
    for (int a = 0; a < 3; ++a) {
        if (pos > text.size())
            throw ConfigError("invalid triple '" + text + "'");
        std::size_t end = text.find_first_of(",x", pos);
        if ((a < 2) == (end == std::string::npos))
            throw ConfigError("invalid triple '" + text + "' (expected a,b,c or axbxc)");
        const std::string item = text.substr(pos, end == std::string::npos ? std::string::npos : end - pos);
        try {
            std::size_t used = 0;
            out[a] = std::stoi(item, &used);
            if (used != item.size())
                throw ConfigError("");
        } catch (const std::exception&) {
            throw ConfigError("invalid triple '" + text + "'");
        }
        pos = end == std::string::npos ? text.size() + 1 : end + 1;
    }
    return out;
}

// --- permeability -----------------------------------------------------

PermSpec::Kind PermSpec::parse_kind(const std::string& text)
{
    if (text == "homogeneous")
        return Kind::homogeneous;
    if (text == "lognormal")
        return Kind::lognormal;
    if (text == "file")
        return Kind::file;
    throw ConfigError("unknown permeability kind '" + text + "' (expected homogeneous, lognormal or file)");
}

std::string PermSpec::to_string(Kind kind)
{
    switch (kind) {
    case Kind::homogeneous: return "homogeneous";
    case Kind::lognormal: return "lognormal";
    case Kind::file: return "file";
    }
    return "?";
}

namespace {

PermeabilityField fit_to_grid(const PermeabilityField& src, const StructuredGrid& grid)
{
    if (src.grid().cells() == grid.cells()) {
        PermeabilityField out(grid, src.values(), src.provenance());
        if (src.gaussian())
            out.set_gaussian(*src.gaussian());
        return out;
    }
    return project_to_finer(PermeabilityField(StructuredGrid(src.grid().cells(), grid.extents()), src.values(),
                                              src.provenance()),
                            grid);
}

} // namespace

PermeabilityField PermSpec::build(const StructuredGrid& grid) const
{
    switch (kind) {
    case Kind::homogeneous:
        return make_homogeneous(grid, k0);
    case Kind::lognormal: {
        const StructuredGrid base_grid(base, grid.extents());
        PermeabilityField field = make_lognormal(base_grid, k0, omega, seed, correlation);
        if (grid.cells(2) == 1 && base[2] > 1) {
            const int mid = base[2] / 2;
            const CellBox slab{{0, 0, mid}, {base[0], base[1], mid + 1}};
            const StructuredGrid slice_grid({base[0], base[1], 1}, grid.extents());
            Provenance prov = field.provenance();
            prov.kind = Provenance::Kind::derived;
            PermeabilityField slice(slice_grid, field.slice(slab), prov);
            slice.set_gaussian([&] {
                std::vector<double> xi;
                for (int j = 0; j < base[1]; ++j)
                    for (int i = 0; i < base[0]; ++i)
                        xi.push_back((*field.gaussian())[base_grid.cell_index(i, j, mid)]);
                return xi;
            }());
            return fit_to_grid(slice, grid);
        }
        return fit_to_grid(field, grid);
    }
    case Kind::file:
        return fit_to_grid(load_field(path), grid);
    }
    throw ConfigError("unknown permeability kind");
}

// --- experiment spec --------------------------------------------------

ExperimentSpec::Mode ExperimentSpec::parse_mode(const std::string& text)
{
    if (text == "single" || text == "run")
        return Mode::single;
    if (text == "strong")
        return Mode::strong;
    if (text == "weak")
        return Mode::weak;
    if (text == "accuracy")
        return Mode::accuracy;
    throw ConfigError("unknown mode '" + text + "'");
}

std::string ExperimentSpec::to_string(Mode mode)
{
    switch (mode) {
    case Mode::single: return "single";
    case Mode::strong: return "strong";
    case Mode::weak: return "weak";
    case Mode::accuracy: return "accuracy";
    }
    return "?";
}

namespace {

bool per_subdomain_layout(const ExperimentSpec& spec)
{
    return spec.mode == ExperimentSpec::Mode::weak || (spec.mode == ExperimentSpec::Mode::accuracy && spec.repeat_block);
}

} // namespace

void ExperimentSpec::validate() const
{
    if (rows.empty())
        throw ConfigError("experiment has no rows");
    if (!(alpha > 0.0) || !std::isfinite(alpha))
        throw ConfigError("alpha must be positive");
    solver.validate();
    for (const auto& r : rows) {
        const int n = r.subdomains[0] * r.subdomains[1] * r.subdomains[2];
        for (int a = 0; a < 3; ++a)
            if (!is_power_of_two(r.subdomains[a]))
                throw ConfigError("subdomain counts must be powers of two, got " + format_triple(r.subdomains));
        if (!is_power_of_two(r.workers) || r.workers > n)
            throw ConfigError("worker count " + std::to_string(r.workers) +
                              " must be a power of two not exceeding the subdomain count " + std::to_string(n));
    }
    for (int a = 0; a < 3; ++a)
        if (cells[a] < 1 || cells_per_subdomain[a] < 1)
            throw ConfigError("cell counts must be positive");
}

nlohmann::json ExperimentSpec::to_json() const
{
    nlohmann::json rj = nlohmann::json::array();
    for (const auto& r : rows)
        rj.push_back({{"subdomains", r.subdomains}, {"workers", r.workers}});
    nlohmann::json sj{{"tolerance", solver.tolerance}, {"max_iterations", solver.max_iterations}};
    if (solver.preconditioner)
        sj["preconditioner"] = rmrcm::to_string(*solver.preconditioner);
    nlohmann::json j{
        {"mode", to_string(mode)},
        {"rows", rj},
        {"cells", cells},
        {"cells_per_subdomain", cells_per_subdomain},
        {"repeat_block", repeat_block},
        {"perm",
         {{"kind", PermSpec::to_string(perm.kind)},
          {"k0", perm.k0},
          {"omega", perm.omega},
          {"seed", perm.seed},
          {"correlation", perm.correlation.to_string()},
          {"base", perm.base},
          {"path", perm.path}}},
        {"alpha", alpha},
        {"hbar_ratio", hbar.ratio},
        {"solver", sj},
    };
    if (dump_dir)
        j["dump_dir"] = dump_dir->string();
    return j;
}

ExperimentSpec ExperimentSpec::from_json(const nlohmann::json& j)
{
    try {
        ExperimentSpec s;
        s.mode = parse_mode(j.at("mode").get<std::string>());
        for (const auto& r : j.at("rows"))
            s.rows.push_back({r.at("subdomains").get<Index3>(), r.at("workers").get<int>()});
        s.cells = j.at("cells").get<Index3>();
        s.cells_per_subdomain = j.at("cells_per_subdomain").get<Index3>();
        s.repeat_block = j.at("repeat_block").get<bool>();
        const auto& p = j.at("perm");
        s.perm.kind = PermSpec::parse_kind(p.at("kind").get<std::string>());
        s.perm.k0 = p.at("k0").get<double>();
        s.perm.omega = p.at("omega").get<double>();
        s.perm.seed = p.at("seed").get<std::uint64_t>();
        s.perm.correlation = CorrelationModel::parse(p.at("correlation").get<std::string>());
        s.perm.base = p.at("base").get<Index3>();
        s.perm.path = p.at("path").get<std::string>();
        s.alpha = j.at("alpha").get<double>();
        s.hbar.ratio = j.at("hbar_ratio").get<Index3>();
        const auto& sj = j.at("solver");
        s.solver.tolerance = sj.at("tolerance").get<double>();
        s.solver.max_iterations = sj.at("max_iterations").get<int>();
        if (sj.contains("preconditioner"))
            s.solver.preconditioner = parse_preconditioner(sj.at("preconditioner").get<std::string>());
        if (j.contains("dump_dir"))
            s.dump_dir = j.at("dump_dir").get<std::string>();
        return s;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("invalid experiment description: ") + e.what());
    }
}

RowSetup make_row_setup(const ExperimentSpec& spec, const RowSpec& row)
{
    RowSetup s;
    if (per_subdomain_layout(spec)) {
        const auto& cps = spec.cells_per_subdomain;
        Index3 cells{};
        std::array<double, 3> block_ext{}, ext{};
        for (int a = 0; a < 3; ++a) {
            cells[a] = cps[a] * row.subdomains[a];
            block_ext[a] = double(cps[a]) / cps[0];
            ext[a] = block_ext[a] * row.subdomains[a];
        }
        s.grid = StructuredGrid(cells, ext);
        if (spec.perm.kind == PermSpec::Kind::homogeneous)
            s.perm = std::make_unique<PermeabilityField>(spec.perm.build(s.grid));
        else
            s.perm = std::make_unique<PermeabilityField>(
                tile(spec.perm.build(StructuredGrid(cps, block_ext)), row.subdomains, s.grid));
        // Unit-length subdomains along x: scaling the inlet pressure with
        // Lx keeps the mean gradient, and so the flux, unchanged.
        s.bc = DomainBoundary::pressure_drop_x(ext[0]);
    } else {
        std::array<double, 3> ext{};
        for (int a = 0; a < 3; ++a)
            ext[a] = double(spec.cells[a]) / spec.cells[0];
        s.grid = StructuredGrid(spec.cells, ext);
        s.perm = std::make_unique<PermeabilityField>(spec.perm.build(s.grid));
        s.bc = DomainBoundary::pressure_drop_x(1.0);
    }
    return s;
}

// --- runs -------------------------------------------------------------

double speedup_ratio(double t_ref, double t_n)
{
    if (!(t_n > 0.0))
        throw ConfigError("speedup: non-positive time");
    return t_ref / t_n;
}

double ideal_ratio(int n_ref, int n)
{
    if (n_ref <= 0)
        throw ConfigError("ideal ratio: non-positive reference count");
    return double(n) / n_ref;
}

std::vector<double> average_deviation_pct(const std::vector<double>& totals)
{
    std::vector<double> out;
    if (totals.empty())
        return out;
    const double mean = std::accumulate(totals.begin(), totals.end(), 0.0) / double(totals.size());
    for (double t : totals)
        out.push_back(mean > 0.0 ? 100.0 * std::abs(t - mean) / mean : 0.0);
    return out;
}

SingleOutcome run_single(const ExperimentSpec& spec, const RowSpec& row, bool with_reference)
{
    SingleOutcome out;
    out.setup = std::make_shared<RowSetup>(make_row_setup(spec, row));
    HbarPartition hbar = spec.hbar;
    for (int a = 0; a < 3; ++a)
        if (out.setup->grid.cells(a) == 1)
            hbar.ratio[a] = 1;
    out.problem = std::make_shared<MrcmProblem>(*out.setup->perm, row.subdomains, hbar, spec.alpha,
                                                out.setup->bc, spec.solver);
    RunOptions opts;
    opts.workers = row.workers;
    out.run = timed_run(*out.problem, opts);
    out.flux = flux_diagnostics(out.run.mrcm.solution, out.problem->space());
    if (spec.dump_dir)
        dump_interfaces(out.run.mrcm.systems,
                        *spec.dump_dir / (format_triple(row.subdomains) + "_w" + std::to_string(row.workers)));

    auto& r = out.row;
    r.workers = row.workers;
    r.subdomains = row.subdomains;
    r.cells_total = std::int64_t(out.setup->grid.cell_count());
    r.cells_per_subd = r.cells_total / (row.subdomains[0] * row.subdomains[1] * row.subdomains[2]);
    r.hbar_ratio = hbar.ratio;
    r.alpha = spec.alpha;
    r.mmbf_time = out.run.timing.mmbf_time;
    r.interface_time = out.run.timing.interface_time;
    r.comm_time = out.run.timing.comm_time;
    r.total_time = out.run.timing.total_time;
    r.messages = out.run.messages;
    r.local_solves = out.run.mrcm.local_solves;

    if (with_reference) {
        const auto ref = solve_reference(out.setup->grid, *out.setup->perm, out.setup->bc, spec.solver);
        out.rel_u_error = relative_velocity_error(out.run.mrcm.solution, ref);
    }
    return out;
}

std::vector<TimingRow> run_strong(const ExperimentSpec& spec)
{
    spec.validate();
    std::vector<TimingRow> rows;
    for (const auto& r : spec.rows)
        rows.push_back(run_single(spec, r).row);
    for (auto& r : rows) {
        r.speedup_ratio = speedup_ratio(rows.front().total_time, r.total_time);
        r.ideal_ratio = ideal_ratio(rows.front().workers, r.workers);
    }
    return rows;
}

std::vector<TimingRow> run_weak(const ExperimentSpec& spec)
{
    spec.validate();
    std::vector<TimingRow> rows;
    for (const auto& r : spec.rows)
        rows.push_back(run_single(spec, r).row);
    std::vector<double> totals;
    for (const auto& r : rows)
        totals.push_back(r.total_time);
    const auto dev = average_deviation_pct(totals);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        rows[i].avg_dev_pct = dev[i];
        rows[i].speedup_ratio = speedup_ratio(rows.front().total_time, rows[i].total_time);
        rows[i].ideal_ratio = 1.0;
    }
    return rows;
}

std::vector<AccuracyRow> run_accuracy(const ExperimentSpec& spec)
{
    spec.validate();
    std::vector<AccuracyRow> rows;
    std::map<std::string, DiscreteSolution> references;
    for (const auto& r : spec.rows) {
        SingleOutcome o = run_single(spec, r);
        const std::string key = format_triple(o.setup->grid.cells());
        auto it = references.find(key);
        if (it == references.end() || per_subdomain_layout(spec)) {
            auto ref = solve_reference(o.setup->grid, *o.setup->perm, o.setup->bc, spec.solver);
            it = references.insert_or_assign(key, std::move(ref)).first;
        }
        rows.push_back({r.workers, r.subdomains, o.row.hbar_ratio, spec.alpha,
                        relative_velocity_error(o.run.mrcm.solution, it->second)});
    }
    return rows;
}

// --- reports ----------------------------------------------------------

namespace {

std::string fmt(const char* f, double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

std::ofstream open_out(const std::filesystem::path& path)
{
    if (path.has_parent_path())
        std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("cannot write " + path.string());
    return out;
}

} // namespace

void write_timing_csv(std::ostream& out, const std::vector<TimingRow>& rows)
{
    out << "workers,px,py,pz,cells_total,cells_per_subd,hbar_rx,hbar_ry,alpha,mmbf_time_s,interface_time_s,"
           "comm_time_s,total_time_s,speedup_ratio,ideal_ratio,avg_dev_pct\n";
    for (const auto& r : rows)
        out << r.workers << ',' << r.subdomains[0] << ',' << r.subdomains[1] << ',' << r.subdomains[2] << ','
            << r.cells_total << ',' << r.cells_per_subd << ',' << r.hbar_ratio[0] << ',' << r.hbar_ratio[1] << ','
            << fmt("%g", r.alpha) << ',' << fmt("%.6f", r.mmbf_time) << ',' << fmt("%.6f", r.interface_time) << ','
            << fmt("%.6f", r.comm_time) << ',' << fmt("%.6f", r.total_time) << ',' << fmt("%.4f", r.speedup_ratio)
            << ',' << fmt("%.4f", r.ideal_ratio) << ',' << fmt("%.2f", r.avg_dev_pct) << '\n';
}

void write_accuracy_csv(std::ostream& out, const std::vector<AccuracyRow>& rows)
{
    out << "workers,decomposition,hbar,alpha,rel_u_error\n";
    for (const auto& r : rows)
        out << r.workers << ',' << format_triple(r.subdomains) << ",H/" << format_triple(r.hbar_ratio) << ','
            << fmt("%g", r.alpha) << ',' << fmt("%.6e", r.rel_u_error) << '\n';
}

void write_timing_csv(const std::filesystem::path& path, const std::vector<TimingRow>& rows)
{
    auto out = open_out(path);
    write_timing_csv(out, rows);
}

void write_accuracy_csv(const std::filesystem::path& path, const std::vector<AccuracyRow>& rows)
{
    auto out = open_out(path);
    write_accuracy_csv(out, rows);
}

std::string version_string() { return RMRCM_VERSION; }

nlohmann::json run_manifest(const ExperimentSpec& spec)
{
    return {{"tool", "rmrcm"}, {"version", version_string()}, {"experiment", spec.to_json()}};
}

void write_manifest(const std::filesystem::path& path, const ExperimentSpec& spec)
{
    auto out = open_out(path);
    out << run_manifest(spec).dump(2) << '\n';
}

void export_solution(const MultiscaleSolution& solution, const std::filesystem::path& dir)
{
    std::filesystem::create_directories(dir);
    const auto& grid = solution.hierarchy->grid();
    RawField p;
    p.shape = grid.cells();
    p.values = solution.pressure();
    p.meta["kind"] = "pressure";
    write_raw_field(dir / "pressure.bin", p);

    RawField u;
    u.shape = {int(grid.face_count()), 1, 1};
    u.values = solution.flux();
    u.meta["kind"] = "face_velocity";
    u.meta["layout"] = "x-faces, y-faces, z-faces; each x-fastest over (n + e_axis)";
    write_raw_field(dir / "velocity.bin", u);

    nlohmann::json meta{{"cells", grid.cells()},
                        {"extents", grid.extents()},
                        {"subdomains", solution.hierarchy->subdomains()},
                        {"pressure", "pressure.bin"},
                        {"velocity", "velocity.bin"},
                        {"version", version_string()}};
    auto out = open_out(dir / "solution.json");
    out << meta.dump(2) << '\n';
}

} // namespace rmrcm
