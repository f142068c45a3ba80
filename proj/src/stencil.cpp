#include "rmrcm/stencil.hpp"

#include "rmrcm/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace rmrcm {

StencilMatrix::StencilMatrix(Index3 cells) : n(cells)
{
    const std::size_t count = std::size_t(n[0]) * n[1] * n[2];
    diag.assign(count, 0.0);
    for (auto& c : couple)
        c.assign(count, 0.0);
}

void StencilMatrix::apply(std::span<const double> x, std::span<double> y) const
{
    const std::size_t sy = stride(1), sz = stride(2);
    const int nx = n[0];
    const double* tx = couple[0].data();
    const double* ty = couple[1].data();
    const double* tz = couple[2].data();
    for (int k = 0; k < n[2]; ++k)
        for (int j = 0; j < n[1]; ++j) {
            const std::size_t row = sy * j + sz * k;
            const double* xr = x.data() + row;
            const double* txr = tx + row;
            double* yr = y.data() + row;
            for (int i = 0; i < nx; ++i)
                yr[i] = diag[row + i] * xr[i];
            // tx is zero on the last cell of each row, so the +x term needs no guard.
            for (int i = 0; i + 1 < nx; ++i) {
                yr[i] -= txr[i] * xr[i + 1];
                yr[i + 1] -= txr[i] * xr[i];
            }
            if (j > 0) {
                const double* t = ty + row - sy;
                const double* xm = xr - sy;
                for (int i = 0; i < nx; ++i)
                    yr[i] -= t[i] * xm[i];
            }
            if (j + 1 < n[1]) {
                const double* t = ty + row;
                const double* xp = xr + sy;
                for (int i = 0; i < nx; ++i)
                    yr[i] -= t[i] * xp[i];
            }
            if (k > 0) {
                const double* t = tz + row - sz;
                const double* xm = xr - sz;
                for (int i = 0; i < nx; ++i)
                    yr[i] -= t[i] * xm[i];
            }
            if (k + 1 < n[2]) {
                const double* t = tz + row;
                const double* xp = xr + sz;
                for (int i = 0; i < nx; ++i)
                    yr[i] -= t[i] * xp[i];
            }
        }
}

std::vector<double> StencilMatrix::to_dense() const
{
    const std::size_t m = size();
    std::vector<double> a(m * m, 0.0);
    for (std::size_t c = 0; c < m; ++c) {
        a[c * m + c] = diag[c];
        Index3 p{int(c % n[0]), int((c / n[0]) % n[1]), int(c / (std::size_t(n[0]) * n[1]))};
        for (int ax = 0; ax < 3; ++ax)
            if (p[ax] + 1 < n[ax]) {
                const std::size_t d = c + stride(ax);
                a[c * m + d] = -couple[ax][c];
                a[d * m + c] = -couple[ax][c];
            }
    }
    return a;
}

Preconditioner parse_preconditioner(const std::string& text)
{
    if (text == "jacobi")
        return Preconditioner::jacobi;
    if (text == "ic" || text == "incomplete-cholesky")
        return Preconditioner::incomplete_cholesky;
    if (text == "mg" || text == "multigrid")
        return Preconditioner::multigrid;
    throw ConfigError("unknown preconditioner '" + text + "'");
}

std::string to_string(Preconditioner p)
{
    switch (p) {
    case Preconditioner::jacobi: return "jacobi";
    case Preconditioner::incomplete_cholesky: return "ic";
    case Preconditioner::multigrid: return "mg";
    }
    return "?";
}

void SolverConfig::validate() const
{
    if (!(tolerance > 0.0 && tolerance < 1.0))
        throw ConfigError("solver tolerance must lie in (0, 1)");
    if (max_iterations < 1)
        throw ConfigError("solver max iterations must be >= 1");
}

Preconditioner SolverConfig::resolve(const Index3& cells) const
{
    if (preconditioner)
        return *preconditioner;
    for (int n : cells)
        if (n & (n - 1))
            return Preconditioner::incomplete_cholesky;
    return Preconditioner::multigrid;
}

namespace {

class Jacobi final : public PreconditionerOp {
public:
    explicit Jacobi(const StencilMatrix& a) : inv_(a.size())
    {
        for (std::size_t c = 0; c < a.size(); ++c)
            inv_[c] = 1.0 / a.diag[c];
    }
    void apply(std::span<const double> r, std::span<double> z) const override
    {
        for (std::size_t c = 0; c < inv_.size(); ++c)
            z[c] = inv_[c] * r[c];
    }

private:
    std::vector<double> inv_;
};

// Zero fill-in incomplete Cholesky. For a 7-point stencil only the diagonal
// changes, so M = (D + L) D^{-1} (D + L^T) with the modified diagonal D.
class IncompleteCholesky final : public PreconditionerOp {
public:
    explicit IncompleteCholesky(const StencilMatrix& a) : a_(a), d_(a.size()), inv_d_(a.size())
    {
        const auto& n = a.n;
        for (int k = 0; k < n[2]; ++k)
            for (int j = 0; j < n[1]; ++j)
                for (int i = 0; i < n[0]; ++i) {
                    const std::size_t c = i + a.stride(1) * j + a.stride(2) * k;
                    double d = a.diag[c];
                    if (i > 0) d -= sq(a.couple[0][c - 1]) * inv_d_[c - 1];
                    if (j > 0) d -= sq(a.couple[1][c - a.stride(1)]) * inv_d_[c - a.stride(1)];
                    if (k > 0) d -= sq(a.couple[2][c - a.stride(2)]) * inv_d_[c - a.stride(2)];
                    if (!(d > 0.0))
                        throw SolverError("incomplete Cholesky breakdown", 0.0);
                    d_[c] = d;
                    inv_d_[c] = 1.0 / d;
                }
    }

    void apply(std::span<const double> r, std::span<double> z) const override
    {
        const auto& n = a_.n;
        const std::size_t sy = a_.stride(1), sz = a_.stride(2);
        const auto& tx = a_.couple[0];
        const auto& ty = a_.couple[1];
        const auto& tz = a_.couple[2];
        for (int k = 0; k < n[2]; ++k)
            for (int j = 0; j < n[1]; ++j)
                for (int i = 0; i < n[0]; ++i) {
                    const std::size_t c = i + sy * j + sz * k;
                    double v = r[c];
                    if (i > 0) v += tx[c - 1] * z[c - 1];
                    if (j > 0) v += ty[c - sy] * z[c - sy];
                    if (k > 0) v += tz[c - sz] * z[c - sz];
                    z[c] = v * inv_d_[c];
                }
        for (int k = n[2] - 1; k >= 0; --k)
            for (int j = n[1] - 1; j >= 0; --j)
                for (int i = n[0] - 1; i >= 0; --i) {
                    const std::size_t c = i + sy * j + sz * k;
                    double v = 0.0;
                    if (i + 1 < n[0]) v += tx[c] * z[c + 1];
                    if (j + 1 < n[1]) v += ty[c] * z[c + sy];
                    if (k + 1 < n[2]) v += tz[c] * z[c + sz];
                    z[c] += v * inv_d_[c];
                }
    }

private:
    static double sq(double x) { return x * x; }
    const StencilMatrix& a_;
    std::vector<double> d_, inv_d_;
};

// Gauss-Seidel sweep, lexicographic forward or backward ordering. Each
// row first gathers its y/z neighbours, then relaxes sequentially along x.
void gauss_seidel(const StencilMatrix& a, std::span<const double> inv_diag, std::span<const double> b,
                  std::span<double> x, std::vector<double>& work, bool forward)
{
    const auto& n = a.n;
    const int nx = n[0];
    const std::size_t sy = a.stride(1), sz = a.stride(2);
    const double* ty = a.couple[1].data();
    const double* tz = a.couple[2].data();
    work.resize(nx);
    double* v = work.data();
    auto row_sweep = [&](int j, int k) {
        const std::size_t row = sy * j + sz * k;
        double* xr = x.data() + row;
        const double* br = b.data() + row;
        for (int i = 0; i < nx; ++i)
            v[i] = br[i];
        if (j > 0) {
            const double* t = ty + row - sy;
            for (int i = 0; i < nx; ++i)
                v[i] += t[i] * xr[i - std::ptrdiff_t(sy)];
        }
        if (j + 1 < n[1]) {
            const double* t = ty + row;
            for (int i = 0; i < nx; ++i)
                v[i] += t[i] * xr[i + sy];
        }
        if (k > 0) {
            const double* t = tz + row - sz;
            for (int i = 0; i < nx; ++i)
                v[i] += t[i] * xr[i - std::ptrdiff_t(sz)];
        }
        if (k + 1 < n[2]) {
            const double* t = tz + row;
            for (int i = 0; i < nx; ++i)
                v[i] += t[i] * xr[i + sz];
        }
        const double* tx = a.couple[0].data() + row;
        const double* id = inv_diag.data() + row;
        if (forward) {
            for (int i = 0; i < nx; ++i) {
                double s = v[i];
                if (i > 0) s += tx[i - 1] * xr[i - 1];
                if (i + 1 < nx) s += tx[i] * xr[i + 1];
                xr[i] = s * id[i];
            }
        } else {
            for (int i = nx - 1; i >= 0; --i) {
                double s = v[i];
                if (i > 0) s += tx[i - 1] * xr[i - 1];
                if (i + 1 < nx) s += tx[i] * xr[i + 1];
                xr[i] = s * id[i];
            }
        }
    };
    if (forward) {
        for (int k = 0; k < n[2]; ++k)
            for (int j = 0; j < n[1]; ++j)
                row_sweep(j, k);
    } else {
        for (int k = n[2] - 1; k >= 0; --k)
            for (int j = n[1] - 1; j >= 0; --j)
                row_sweep(j, k);
    }
}

// Cell-centred multigrid with 2x2x2 aggregation (per axis where the extent
// is even), piecewise-constant transfer and Galerkin coarse operators, which
// keeps every level a 7-point stencil. Symmetric V(1,1) cycle with
// forward/backward Gauss-Seidel.
class Multigrid final : public PreconditionerOp {
public:
    static constexpr std::size_t coarsest_size = 64;
    static constexpr std::size_t dense_limit = 1024;

    explicit Multigrid(const StencilMatrix& fine)
    {
        levels_.push_back(Level{&fine, {}, {1, 1, 1}});
        while (true) {
            const StencilMatrix& a = *levels_.back().a;
            Index3 f{};
            bool any = false;
            for (int ax = 0; ax < 3; ++ax) {
                f[ax] = (a.n[ax] % 2 == 0) ? 2 : 1;
                any |= f[ax] == 2;
            }
            if (!any || a.size() <= coarsest_size)
                break;
            levels_.back().factor = f;
            auto coarse = std::make_unique<StencilMatrix>(galerkin(a, f));
            Level next{coarse.get(), std::move(coarse), {1, 1, 1}};
            levels_.push_back(std::move(next));
        }
        for (auto& l : levels_) {
            l.x.resize(l.a->size());
            l.inv_diag.resize(l.a->size());
            for (std::size_t c = 0; c < l.a->size(); ++c)
                l.inv_diag[c] = 1.0 / l.a->diag[c];
            l.b.resize(l.a->size());
            l.r.resize(l.a->size());
        }
        const StencilMatrix& last = *levels_.back().a;
        if (last.size() <= dense_limit)
            factor_coarsest(last);
    }

    void apply(std::span<const double> r, std::span<double> z) const override
    {
        std::copy(r.begin(), r.end(), levels_[0].b.begin());
        cycle(0);
        std::copy(levels_[0].x.begin(), levels_[0].x.end(), z.begin());
    }

private:
    struct Level {
        const StencilMatrix* a;
        std::unique_ptr<StencilMatrix> owned;
        Index3 factor;
        std::vector<double> inv_diag{};
        mutable std::vector<double> x{}, b{}, r{}, work{};
    };

    static StencilMatrix galerkin(const StencilMatrix& a, const Index3& f)
    {
        Index3 nc{a.n[0] / f[0], a.n[1] / f[1], a.n[2] / f[2]};
        StencilMatrix c(nc);
        for (int k = 0; k < a.n[2]; ++k)
            for (int j = 0; j < a.n[1]; ++j)
                for (int i = 0; i < a.n[0]; ++i) {
                    const std::size_t fc = i + a.stride(1) * j + a.stride(2) * k;
                    const Index3 p{i / f[0], j / f[1], k / f[2]};
                    const std::size_t cc = p[0] + c.stride(1) * p[1] + c.stride(2) * p[2];
                    c.diag[cc] += a.diag[fc];
                    const Index3 q{i, j, k};
                    for (int ax = 0; ax < 3; ++ax) {
                        if (q[ax] + 1 >= a.n[ax])
                            continue;
                        const double t = a.couple[ax][fc];
                        if ((q[ax] + 1) / f[ax] == p[ax])
                            c.diag[cc] -= 2.0 * t;
                        else
                            c.couple[ax][cc] += t;
                    }
                }
        return c;
    }

    void factor_coarsest(const StencilMatrix& a)
    {
        const std::size_t m = a.size();
        chol_ = a.to_dense();
        for (std::size_t j = 0; j < m; ++j) {
            double d = chol_[j * m + j];
            for (std::size_t k = 0; k < j; ++k)
                d -= chol_[j * m + k] * chol_[j * m + k];
            if (!(d > 0.0))
                throw SolverError("multigrid coarse factorization is not positive definite", 0.0);
            d = std::sqrt(d);
            chol_[j * m + j] = d;
            for (std::size_t i = j + 1; i < m; ++i) {
                double s = chol_[i * m + j];
                for (std::size_t k = 0; k < j; ++k)
                    s -= chol_[i * m + k] * chol_[j * m + k];
                chol_[i * m + j] = s / d;
            }
        }
        has_chol_ = true;
    }

    void coarse_solve(const Level& l) const
    {
        const StencilMatrix& a = *l.a;
        if (!has_chol_) {
            std::fill(l.x.begin(), l.x.end(), 0.0);
            for (int s = 0; s < 20; ++s)
                gauss_seidel(a, l.inv_diag, l.b, l.x, l.work, true);
            for (int s = 0; s < 20; ++s)
                gauss_seidel(a, l.inv_diag, l.b, l.x, l.work, false);
            return;
        }
        const std::size_t m = a.size();
        auto& y = l.x;
        for (std::size_t i = 0; i < m; ++i) {
            double s = l.b[i];
            for (std::size_t k = 0; k < i; ++k)
                s -= chol_[i * m + k] * y[k];
            y[i] = s / chol_[i * m + i];
        }
        for (std::size_t i = m; i-- > 0;) {
            double s = y[i];
            for (std::size_t k = i + 1; k < m; ++k)
                s -= chol_[k * m + i] * y[k];
            y[i] = s / chol_[i * m + i];
        }
    }

    void cycle(std::size_t lvl) const
    {
        const Level& l = levels_[lvl];
        if (lvl + 1 == levels_.size()) {
            coarse_solve(l);
            return;
        }
        const StencilMatrix& a = *l.a;
        std::fill(l.x.begin(), l.x.end(), 0.0);
        gauss_seidel(a, l.inv_diag, l.b, l.x, l.work, true);
        a.apply(l.x, l.r);
        for (std::size_t c = 0; c < l.r.size(); ++c)
            l.r[c] = l.b[c] - l.r[c];

        const Level& next = levels_[lvl + 1];
        const StencilMatrix& ac = *next.a;
        std::fill(next.b.begin(), next.b.end(), 0.0);
        const Index3& f = l.factor;
        for (int k = 0; k < a.n[2]; ++k)
            for (int j = 0; j < a.n[1]; ++j) {
                const std::size_t frow = a.stride(1) * j + a.stride(2) * k;
                const std::size_t crow = ac.stride(1) * (j / f[1]) + ac.stride(2) * (k / f[2]);
                for (int i = 0; i < a.n[0]; ++i)
                    next.b[crow + i / f[0]] += l.r[frow + i];
            }
        cycle(lvl + 1);
        for (int k = 0; k < a.n[2]; ++k)
            for (int j = 0; j < a.n[1]; ++j) {
                const std::size_t frow = a.stride(1) * j + a.stride(2) * k;
                const std::size_t crow = ac.stride(1) * (j / f[1]) + ac.stride(2) * (k / f[2]);
                for (int i = 0; i < a.n[0]; ++i)
                    l.x[frow + i] += omega_ * next.x[crow + i / f[0]];
            }
        gauss_seidel(a, l.inv_diag, l.b, l.x, l.work, false);
    }

    // Over-correction of the aggregation coarse-grid correction.
    static constexpr double omega_ = 1.7;
    std::vector<Level> levels_;
    std::vector<double> chol_;
    bool has_chol_ = false;
};

double dot(std::span<const double> a, std::span<const double> b)
{
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        s += a[i] * b[i];
    return s;
}

} // namespace

std::unique_ptr<PreconditionerOp> make_preconditioner(const StencilMatrix& a, Preconditioner kind)
{
    switch (kind) {
    case Preconditioner::jacobi: return std::make_unique<Jacobi>(a);
    case Preconditioner::incomplete_cholesky: return std::make_unique<IncompleteCholesky>(a);
    case Preconditioner::multigrid: return std::make_unique<Multigrid>(a);
    }
    throw ConfigError("unknown preconditioner");
}

CgSolver::CgSolver(const StencilMatrix& a, const SolverConfig& config)
    : a_(a), config_(config), kind_(config.resolve(a.n))
{
    config_.validate();
    precond_ = make_preconditioner(a_, kind_);
}

SolveStats CgSolver::solve(std::span<const double> b, std::span<double> x) const
{
    const std::size_t m = a_.size();
    std::fill(x.begin(), x.end(), 0.0);
    const double bnorm = std::sqrt(dot(b, b));
    if (bnorm == 0.0)
        return {0, 0.0};

    std::vector<double> r(b.begin(), b.end()), z(m), p(m), q(m);
    precond_->apply(r, z);
    p = z;
    double rz = dot(r, z);
    double rel = 1.0;
    for (int it = 1; it <= config_.max_iterations; ++it) {
        a_.apply(p, q);
        const double pq = dot(p, q);
        if (!(pq > 0.0))
            throw SolverError("conjugate gradients: operator is not positive definite", rel, it);
        const double alpha = rz / pq;
        for (std::size_t i = 0; i < m; ++i) {
            x[i] += alpha * p[i];
            r[i] -= alpha * q[i];
        }
        rel = std::sqrt(dot(r, r)) / bnorm;
        if (rel <= config_.tolerance)
            return {it, rel};
        precond_->apply(r, z);
        const double rz_new = dot(r, z);
        const double beta = rz_new / rz;
        rz = rz_new;
        for (std::size_t i = 0; i < m; ++i)
            p[i] = z[i] + beta * p[i];
    }
    throw SolverError("conjugate gradients did not converge (relative residual " + std::to_string(rel) + ")", rel,
                      config_.max_iterations);
}

} // namespace rmrcm
