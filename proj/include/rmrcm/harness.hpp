#pragma once

#include "rmrcm/runtime.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace rmrcm {

/// How to build the permeability of an experiment.
struct PermSpec {
    enum class Kind { homogeneous, lognormal, file };
    Kind kind = Kind::homogeneous;
    double k0 = 1.0;
    double omega = 0.0;
    std::uint64_t seed = 1;
    CorrelationModel correlation{};
    /// Resolution at which a log-normal field is drawn before being
    /// projected onto the experiment grid.
    Index3 base{60, 60, 60};
    std::string path;

    static Kind parse_kind(const std::string& text);
    static std::string to_string(Kind kind);

    /// Field on `grid`. Log-normal fields are drawn at `base` and projected;
    /// for single-layer grids the middle z-slice of the base field is used.
    PermeabilityField build(const StructuredGrid& grid) const;
};

struct RowSpec {
    Index3 subdomains{1, 1, 1};
    int workers = 1;
};

struct ExperimentSpec {
    enum class Mode { single, strong, weak, accuracy };
    Mode mode = Mode::single;
    std::vector<RowSpec> rows;
    /// Total grid (single, strong, accuracy without repetition).
    Index3 cells{64, 64, 64};
    /// Cells per subdomain (weak, accuracy with repetition).
    Index3 cells_per_subdomain{32, 32, 32};
    /// Accuracy mode: repeat one permeability block per subdomain.
    bool repeat_block = false;
    PermSpec perm;
    double alpha = 1e3;
    HbarPartition hbar;
    SolverConfig solver;
    std::optional<std::filesystem::path> dump_dir;

    static Mode parse_mode(const std::string& text);
    static std::string to_string(Mode mode);

    void validate() const;
    nlohmann::json to_json() const;
    static ExperimentSpec from_json(const nlohmann::json& j);
};

/// Grid, permeability and boundary data of one row.
struct RowSetup {
    StructuredGrid grid;
    std::unique_ptr<PermeabilityField> perm;
    DomainBoundary bc;
};
RowSetup make_row_setup(const ExperimentSpec& spec, const RowSpec& row);

struct TimingRow {
    int workers = 1;
    Index3 subdomains{1, 1, 1};
    std::int64_t cells_total = 0;
    std::int64_t cells_per_subd = 0;
    Index3 hbar_ratio{1, 1, 1};
    double alpha = 0.0;
    double mmbf_time = 0.0;
    double interface_time = 0.0;
    double comm_time = 0.0;
    double total_time = 0.0;
    double speedup_ratio = 1.0;
    double ideal_ratio = 1.0;
    double avg_dev_pct = 0.0;
    std::int64_t messages = 0;
    int local_solves = 0;
};

struct AccuracyRow {
    int workers = 1;
    Index3 subdomains{1, 1, 1};
    Index3 hbar_ratio{1, 1, 1};
    double alpha = 0.0;
    double rel_u_error = 0.0;
};

/// T_ref / T_n.
double speedup_ratio(double t_ref, double t_n);
/// n / n_ref, the ideal-scaling value of the same ratio.
double ideal_ratio(int n_ref, int n);
/// Percent deviation of each value from the mean of all values.
std::vector<double> average_deviation_pct(const std::vector<double>& totals);

struct SingleOutcome {
    std::shared_ptr<RowSetup> setup;
    std::shared_ptr<MrcmProblem> problem;
    TimingRow row;
    RunResult run;
    FluxDiagnostics flux;
    std::optional<double> rel_u_error;
};

/// One row: builds the problem, runs it, and optionally compares with the
/// monolithic reference.
SingleOutcome run_single(const ExperimentSpec& spec, const RowSpec& row, bool with_reference = false);
std::vector<TimingRow> run_strong(const ExperimentSpec& spec);
std::vector<TimingRow> run_weak(const ExperimentSpec& spec);
std::vector<AccuracyRow> run_accuracy(const ExperimentSpec& spec);

void write_timing_csv(std::ostream& out, const std::vector<TimingRow>& rows);
void write_accuracy_csv(std::ostream& out, const std::vector<AccuracyRow>& rows);
void write_timing_csv(const std::filesystem::path& path, const std::vector<TimingRow>& rows);
void write_accuracy_csv(const std::filesystem::path& path, const std::vector<AccuracyRow>& rows);

/// Version string of the build ("git describe" when available).
std::string version_string();
nlohmann::json run_manifest(const ExperimentSpec& spec);
void write_manifest(const std::filesystem::path& path, const ExperimentSpec& spec);

/// Writes cell pressures and face velocities of a multiscale solution as
/// raw fields (skeleton faces averaged) plus a JSON metadata file.
void export_solution(const MultiscaleSolution& solution, const std::filesystem::path& dir);

std::string format_triple(const Index3& v, char sep = 'x');
Index3 parse_triple(const std::string& text);

} // namespace rmrcm
