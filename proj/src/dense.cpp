#include "rmrcm/dense.hpp"

#include "rmrcm/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace rmrcm {

DenseMatrix DenseMatrix::identity(std::size_t n)
{
    DenseMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i)
        m(i, i) = 1.0;
    return m;
}

std::vector<double> DenseMatrix::column(std::size_t j) const
{
    std::vector<double> c(rows);
    for (std::size_t i = 0; i < rows; ++i)
        c[i] = (*this)(i, j);
    return c;
}

double DenseMatrix::norm_inf() const noexcept
{
    double best = 0.0;
    for (std::size_t i = 0; i < rows; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < cols; ++j)
            s += std::abs((*this)(i, j));
        best = std::max(best, s);
    }
    return best;
}

DenseMatrix multiply(const DenseMatrix& a, const DenseMatrix& b)
{
    if (a.cols != b.rows)
        throw ConfigError("matrix product: inner dimensions differ");
    DenseMatrix c(a.rows, b.cols);
    for (std::size_t i = 0; i < a.rows; ++i)
        for (std::size_t k = 0; k < a.cols; ++k) {
            const double aik = a(i, k);
            if (aik == 0.0)
                continue;
            const double* brow = &b.data[k * b.cols];
            double* crow = &c.data[i * c.cols];
            for (std::size_t j = 0; j < b.cols; ++j)
                crow[j] += aik * brow[j];
        }
    return c;
}

std::vector<double> multiply(const DenseMatrix& a, std::span<const double> x)
{
    if (a.cols != x.size())
        throw ConfigError("matrix-vector product: dimension mismatch");
    std::vector<double> y(a.rows, 0.0);
    for (std::size_t i = 0; i < a.rows; ++i)
        for (std::size_t j = 0; j < a.cols; ++j)
            y[i] += a(i, j) * x[j];
    return y;
}

LuFactorization::LuFactorization(DenseMatrix a) : lu_(std::move(a))
{
    if (lu_.rows != lu_.cols || lu_.rows == 0)
        throw ConfigError("LU: matrix must be square and non-empty");
    const std::size_t n = lu_.rows;
    const double threshold = 1e-14 * lu_.norm_inf();
    perm_.resize(n);
    std::iota(perm_.begin(), perm_.end(), std::size_t(0));
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t piv = k;
        for (std::size_t i = k + 1; i < n; ++i)
            if (std::abs(lu_(i, k)) > std::abs(lu_(piv, k)))
                piv = i;
        const double pv = lu_(piv, k);
        if (!(std::abs(pv) > threshold))
            throw SolverError("LU: singular matrix (pivot " + std::to_string(std::abs(pv)) + " at column " +
                                  std::to_string(k) + ")",
                              std::abs(pv));
        if (piv != k) {
            std::swap_ranges(&lu_.data[k * n], &lu_.data[k * n] + n, &lu_.data[piv * n]);
            std::swap(perm_[k], perm_[piv]);
        }
        for (std::size_t i = k + 1; i < n; ++i) {
            const double m = lu_(i, k) / pv;
            lu_(i, k) = m;
            if (m == 0.0)
                continue;
            for (std::size_t j = k + 1; j < n; ++j)
                lu_(i, j) -= m * lu_(k, j);
        }
    }
}

DenseMatrix LuFactorization::solve(const DenseMatrix& b) const
{
    const std::size_t n = size();
    if (b.rows != n)
        throw ConfigError("LU: right-hand side has the wrong number of rows");
    const std::size_t m = b.cols;
    DenseMatrix x(n, m);
    for (std::size_t i = 0; i < n; ++i)
        std::copy_n(&b.data[perm_[i] * m], m, &x.data[i * m]);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < i; ++k) {
            const double l = lu_(i, k);
            if (l != 0.0)
                for (std::size_t j = 0; j < m; ++j)
                    x(i, j) -= l * x(k, j);
        }
    for (std::size_t i = n; i-- > 0;) {
        for (std::size_t k = i + 1; k < n; ++k) {
            const double u = lu_(i, k);
            if (u != 0.0)
                for (std::size_t j = 0; j < m; ++j)
                    x(i, j) -= u * x(k, j);
        }
        const double d = lu_(i, i);
        for (std::size_t j = 0; j < m; ++j)
            x(i, j) /= d;
    }
    return x;
}

std::vector<double> LuFactorization::solve(std::span<const double> b) const
{
    DenseMatrix rhs(b.size(), 1);
    std::copy(b.begin(), b.end(), rhs.data.begin());
    return solve(rhs).data;
}

DenseMatrix lu_solve(const DenseMatrix& a, const DenseMatrix& b)
{
    LuFactorization lu(a);
    DenseMatrix x = lu.solve(b);
    const double an = a.norm_inf();
    for (std::size_t j = 0; j < b.cols; ++j) {
        double r = 0.0, xn = 0.0, bn = 0.0;
        for (std::size_t i = 0; i < a.rows; ++i) {
            double s = -b(i, j);
            for (std::size_t k = 0; k < a.cols; ++k)
                s += a(i, k) * x(k, j);
            r = std::max(r, std::abs(s));
            xn = std::max(xn, std::abs(x(i, j)));
            bn = std::max(bn, std::abs(b(i, j)));
        }
        if (!(r <= 1e-10 * (an * xn + bn)))
            throw SolverError("LU: residual bound violated", r);
    }
    return x;
}

std::vector<double> lu_solve(const DenseMatrix& a, std::span<const double> b)
{
    DenseMatrix rhs(b.size(), 1);
    std::copy(b.begin(), b.end(), rhs.data.begin());
    return lu_solve(a, rhs).data;
}

} // namespace rmrcm
