#include "sieve/lp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace sieve {

namespace {

constexpr double kTol = 1e-11;
constexpr double kInf = std::numeric_limits<double>::infinity();

// Solves M y = rhs by Gaussian elimination with partial pivoting. M is m x m.
bool dense_solve(std::vector<std::vector<double>> M, std::vector<double>& y) {
    const int m = static_cast<int>(M.size());
    for (int col = 0; col < m; ++col) {
        int piv = col;
        for (int r = col + 1; r < m; ++r) {
            if (std::fabs(M[r][col]) > std::fabs(M[piv][col])) piv = r;
        }
        if (std::fabs(M[piv][col]) < 1e-13) return false;
        std::swap(M[piv], M[col]);
        std::swap(y[piv], y[col]);
        for (int r = col + 1; r < m; ++r) {
            const double f = M[r][col] / M[col][col];
            if (f == 0.0) continue;
            for (int cc = col; cc < m; ++cc) M[r][cc] -= f * M[col][cc];
            y[r] -= f * y[col];
        }
    }
    for (int col = m - 1; col >= 0; --col) {
        double s = y[col];
        for (int cc = col + 1; cc < m; ++cc) s -= M[col][cc] * y[cc];
        y[col] = s / M[col][col];
    }
    return true;
}

}  // namespace

LpResult solve_lp(const std::vector<double>& c, const std::vector<std::vector<double>>& A,
                  const std::vector<double>& b, const std::vector<double>& lo,
                  const std::vector<double>& up) {
    const int m = static_cast<int>(A.size());
    const int ns = static_cast<int>(c.size());
    const int n = ns + m;  // structural + slack

    auto col = [&](int j, int i) -> double {  // A entry for variable j, row i
        return j < ns ? A[i][j] : (j - ns == i ? 1.0 : 0.0);
    };
    std::vector<double> cx(n, 0.0), lb(n, 0.0), ub(n, kInf);
    for (int j = 0; j < ns; ++j) {
        cx[j] = c[j];
        lb[j] = lo[j];
        ub[j] = up[j];
    }

    std::vector<int> basis(m);
    std::vector<int> where(n, 0);  // 0 = at lower, 1 = at upper, 2 = basic
    for (int i = 0; i < m; ++i) {
        basis[i] = ns + i;
        where[ns + i] = 2;
    }
    std::vector<double> xval(n, 0.0);
    for (int j = 0; j < ns; ++j) xval[j] = lb[j];

    LpResult res;
    const int max_pivots = 200 * (n + m) + 1000;
    for (int pivot = 0; pivot < max_pivots; ++pivot) {
        // x_B = B^{-1} (b - N x_N)
        std::vector<double> rhs(m);
        for (int i = 0; i < m; ++i) {
            double s = b[i];
            for (int j = 0; j < n; ++j) {
                if (where[j] != 2) s -= col(j, i) * xval[j];
            }
            rhs[i] = s;
        }
        std::vector<std::vector<double>> B(m, std::vector<double>(m));
        for (int i = 0; i < m; ++i) {
            for (int kk = 0; kk < m; ++kk) B[i][kk] = col(basis[kk], i);
        }
        std::vector<double> xb = rhs;
        if (!dense_solve(B, xb)) return res;  // singular basis
        for (int kk = 0; kk < m; ++kk) xval[basis[kk]] = xb[kk];

        // multipliers: B^T ylam = c_B
        std::vector<std::vector<double>> BT(m, std::vector<double>(m));
        for (int i = 0; i < m; ++i) {
            for (int kk = 0; kk < m; ++kk) BT[i][kk] = col(basis[i], kk);
        }
        std::vector<double> ylam(m);
        for (int i = 0; i < m; ++i) ylam[i] = cx[basis[i]];
        if (!dense_solve(BT, ylam)) return res;

        // entering variable (Bland)
        int enter = -1;
        double sigma = 1.0;
        for (int j = 0; j < n && enter < 0; ++j) {
            if (where[j] == 2) continue;
            double r = cx[j];
            for (int i = 0; i < m; ++i) r -= ylam[i] * col(j, i);
            if (where[j] == 0 && r > kTol) {
                enter = j;
                sigma = 1.0;
            } else if (where[j] == 1 && r < -kTol) {
                enter = j;
                sigma = -1.0;
            }
        }
        if (enter < 0) {
            res.optimal = true;
            res.value = 0.0;
            res.w.assign(ns, 0.0);
            for (int j = 0; j < ns; ++j) {
                res.w[j] = xval[j];
                res.value += cx[j] * xval[j];
            }
            return res;
        }

        // direction of basic variables: d = B^{-1} A_enter
        std::vector<std::vector<double>> B2(m, std::vector<double>(m));
        for (int i = 0; i < m; ++i) {
            for (int kk = 0; kk < m; ++kk) B2[i][kk] = col(basis[kk], i);
        }
        std::vector<double> d(m);
        for (int i = 0; i < m; ++i) d[i] = col(enter, i);
        if (!dense_solve(B2, d)) return res;

        double tmax = ub[enter] - lb[enter];  // bound flip distance
        int leave = -1;                       // index into basis
        for (int i = 0; i < m; ++i) {
            const double di = sigma * d[i];
            const int bj = basis[i];
            double t = kInf;
            if (di > kTol) {
                t = (xval[bj] - lb[bj]) / di;
            } else if (di < -kTol && ub[bj] < kInf) {
                t = (ub[bj] - xval[bj]) / (-di);
            }
            if (t < tmax) {  // strict: lowest row wins ties (Bland-style)
                tmax = t;
                leave = i;
            }
        }
        tmax = std::max(tmax, 0.0);
        if (tmax == kInf) {
            res.unbounded = true;
            return res;
        }
        if (leave < 0) {
            // bound flip
            where[enter] = where[enter] == 0 ? 1 : 0;
            xval[enter] = where[enter] == 0 ? lb[enter] : ub[enter];
            continue;
        }
        const int out = basis[leave];
        const double dj = sigma * d[leave];
        where[out] = dj > 0.0 ? 0 : 1;
        xval[out] = dj > 0.0 ? lb[out] : ub[out];
        xval[enter] = (where[enter] == 0 ? lb[enter] : ub[enter]) + sigma * tmax;
        basis[leave] = enter;
        where[enter] = 2;
    }
    return res;  // pivot cap hit; caller treats as failure
}

}  // namespace sieve
