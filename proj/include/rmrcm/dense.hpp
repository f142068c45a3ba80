#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace rmrcm {

/// Row-major dense matrix.
struct DenseMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    DenseMatrix() = default;
    DenseMatrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

    static DenseMatrix identity(std::size_t n);

    double& operator()(std::size_t i, std::size_t j) noexcept { return data[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const noexcept { return data[i * cols + j]; }

    std::vector<double> column(std::size_t j) const;
    double norm_inf() const noexcept;
    bool operator==(const DenseMatrix&) const = default;
};

/// C = A * B.
DenseMatrix multiply(const DenseMatrix& a, const DenseMatrix& b);
/// y = A * x.
std::vector<double> multiply(const DenseMatrix& a, std::span<const double> x);

/// LU factorization with partial pivoting, P A = L U.
class LuFactorization {
public:
    /// Throws SolverError when a pivot falls below 1e-14 * ||A||_inf.
    explicit LuFactorization(DenseMatrix a);

    std::size_t size() const noexcept { return lu_.rows; }
    /// Solves A X = B for every column of B.
    DenseMatrix solve(const DenseMatrix& b) const;
    std::vector<double> solve(std::span<const double> b) const;

private:
    DenseMatrix lu_;
    std::vector<std::size_t> perm_;
};

/// Solves A X = B and checks
///   ||A X - B||_inf <= 1e-10 (||A||_inf ||X||_inf + ||B||_inf)
/// column by column; throws SolverError if the bound fails.
DenseMatrix lu_solve(const DenseMatrix& a, const DenseMatrix& b);
std::vector<double> lu_solve(const DenseMatrix& a, std::span<const double> b);

} // namespace rmrcm
