#pragma once

#include "rmrcm/grid.hpp"

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace rmrcm {

/// Symmetric 7-point operator on a box of cells:
///   (A p)_c = diag_c p_c - sum_{neighbours d} t_cd p_d.
/// `couple[a][c]` is the coupling between cell c and its +a neighbour (zero
/// on the last layer).
struct StencilMatrix {
    Index3 n{1, 1, 1};
    std::vector<double> diag;
    std::array<std::vector<double>, 3> couple;

    explicit StencilMatrix(Index3 cells = {1, 1, 1});

    std::size_t size() const noexcept { return diag.size(); }
    std::size_t stride(int axis) const noexcept
    {
        return axis == 0 ? 1 : axis == 1 ? std::size_t(n[0]) : std::size_t(n[0]) * n[1];
    }

    void apply(std::span<const double> x, std::span<double> y) const;
    /// Dense row-major copy; only for small systems and tests.
    std::vector<double> to_dense() const;
};

enum class Preconditioner { jacobi, incomplete_cholesky, multigrid };

Preconditioner parse_preconditioner(const std::string& text);
std::string to_string(Preconditioner p);

struct SolverConfig {
    /// Unset means: multigrid when every dimension is a power of two,
    /// incomplete Cholesky otherwise.
    std::optional<Preconditioner> preconditioner;
    double tolerance = 1e-8;  ///< relative residual ||b - Ax|| / ||b||
    int max_iterations = 2000;

    void validate() const;
    Preconditioner resolve(const Index3& cells) const;
};

struct SolveStats {
    int iterations = 0;
    double relative_residual = 0.0;
};

class PreconditionerOp {
public:
    virtual ~PreconditionerOp() = default;
    /// z = M^{-1} r
    virtual void apply(std::span<const double> r, std::span<double> z) const = 0;
};

std::unique_ptr<PreconditionerOp> make_preconditioner(const StencilMatrix& a, Preconditioner kind);

/// Preconditioned conjugate gradients for an SPD stencil matrix. The
/// preconditioner is built once and reused for every right-hand side.
class CgSolver {
public:
    CgSolver(const StencilMatrix& a, const SolverConfig& config);

    /// Solves A x = b starting from zero. Throws SolverError when the
    /// tolerance is not reached within the iteration budget.
    SolveStats solve(std::span<const double> b, std::span<double> x) const;

    const StencilMatrix& matrix() const noexcept { return a_; }
    Preconditioner kind() const noexcept { return kind_; }

private:
    const StencilMatrix& a_;
    SolverConfig config_;
    Preconditioner kind_;
    std::unique_ptr<PreconditionerOp> precond_;
};

} // namespace rmrcm
