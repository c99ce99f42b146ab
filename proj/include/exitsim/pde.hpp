#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "exitsim/domain.hpp"
#include "exitsim/model.hpp"

namespace exitsim {

/// Mean (time-adjusted) exit time u(t, x) on a uniform space-time grid.
struct FkGrid {
    std::vector<double> x;       // nodes lo = x_0 < ... < x_{nx-1} = hi
    double dx = 0.0;
    double dt = 0.0;
    double T = 0.0;
    std::vector<double> u0;      // u(0, x)
    std::vector<double> times;   // stored time levels t (descending from T)
    std::vector<std::vector<double>> snapshots;
    double min_value = 0.0;      // min of u over every computed level

    /// u(0, x0) by linear interpolation between nodes.
    double value_at(double x0) const {
        if (x0 <= x.front() || x0 >= x.back()) return 0.0;
        const double pos = (x0 - x.front()) / dx;
        const auto k = std::min(static_cast<std::size_t>(pos), x.size() - 2);
        const double w = pos - static_cast<double>(k);
        return (1.0 - w) * u0[k] + w * u0[k + 1];
    }

    /// True when the grid cannot resolve a boundary layer of width `delta`.
    bool under_resolved(double delta) const { return dx > delta; }
};

struct FkOptions {
    /// Number of initial Crank-Nicolson steps replaced by two implicit Euler
    /// half steps each (damps the corner incompatibility of the data).
    int smoothing_steps = 2;
    /// Store every k-th time level in FkGrid::snapshots (0 stores none).
    std::size_t store_every = 0;
};

namespace detail {

/// Solves a tridiagonal system in place (Thomas algorithm).
inline void solve_tridiagonal(std::vector<double>& lower, std::vector<double>& diag, std::vector<double>& upper,
                              std::vector<double>& rhs) {
    const std::size_t n = diag.size();
    for (std::size_t i = 1; i < n; ++i) {
        const double w = lower[i] / diag[i - 1];
        diag[i] -= w * upper[i - 1];
        rhs[i] -= w * rhs[i - 1];
    }
    rhs[n - 1] /= diag[n - 1];
    for (std::size_t i = n - 1; i-- > 0;) rhs[i] = (rhs[i] - upper[i] * rhs[i + 1]) / diag[i];
}

}  // namespace detail

/// Solves the backward Feynman-Kac problem
///   u_t + a u_x + 1/2 b^2 u_xx + 1 = 0 on (0, T) x (lo, hi),
///   u = 0 on the spatial boundary and at t = T,
/// with Crank-Nicolson in time and second-order central differences in
/// space. `nx` counts grid nodes including both boundary nodes.
template <DiffusionModel Model>
    requires(Model::dim_state == 1 && Model::dim_noise == 1)
FkGrid solve_mean_exit_1d(const Model& model, const Interval& domain, double T, std::size_t nx, std::size_t nt,
                          const FkOptions& opt = {}) {
    if (nx < 8 || nt < 8) throw std::invalid_argument("PDE grid needs nx >= 8 and nt >= 8");
    if (!(T > 0.0)) throw std::invalid_argument("cut-off time T must be positive");
    FkGrid g;
    g.T = T;
    g.dx = (domain.hi - domain.lo) / static_cast<double>(nx - 1);
    g.dt = T / static_cast<double>(nt);
    g.x.resize(nx);
    for (std::size_t k = 0; k < nx; ++k) g.x[k] = domain.lo + g.dx * static_cast<double>(k);
    g.x.back() = domain.hi;

    // Interior operator (L v)_k = lo_k v_{k-1} + di_k v_k + up_k v_{k+1}.
    const std::size_t n = nx - 2;
    std::vector<double> op_lo(n), op_di(n), op_up(n);
    for (std::size_t k = 0; k < n; ++k) {
        const Vec<1> xk{g.x[k + 1]};
        const double a = model.drift(xk)[0];
        const double b = model.diffusion(xk)[0][0];
        const double diff = 0.5 * b * b / (g.dx * g.dx);
        const double adv = a / (2.0 * g.dx);
        op_lo[k] = diff - adv;
        op_di[k] = -2.0 * diff;
        op_up[k] = diff + adv;
    }

    // v(s, x) = u(T - s, x) solves v_s = L v + 1 forward in s with v(0) = 0.
    std::vector<double> v(n, 0.0), rhs(n), lo(n), di(n), up(n);
    double min_value = 0.0;
    auto advance = [&](double step, double theta) {
        for (std::size_t k = 0; k < n; ++k) {
            double lv = op_di[k] * v[k];
            if (k > 0) lv += op_lo[k] * v[k - 1];
            if (k + 1 < n) lv += op_up[k] * v[k + 1];
            rhs[k] = v[k] + (1.0 - theta) * step * lv + step;
            lo[k] = -theta * step * op_lo[k];
            di[k] = 1.0 - theta * step * op_di[k];
            up[k] = -theta * step * op_up[k];
        }
        detail::solve_tridiagonal(lo, di, up, rhs);
        v.swap(rhs);
        for (double val : v) min_value = std::min(min_value, val);
    };
    auto store = [&](std::size_t level) {
        if (opt.store_every == 0 || level % opt.store_every != 0) return;
        std::vector<double> full(nx, 0.0);
        std::copy(v.begin(), v.end(), full.begin() + 1);
        g.times.push_back(T - g.dt * static_cast<double>(level));
        g.snapshots.push_back(std::move(full));
    };

    store(0);
    for (std::size_t level = 1; level <= nt; ++level) {
        if (level <= static_cast<std::size_t>(std::max(0, opt.smoothing_steps))) {
            advance(0.5 * g.dt, 1.0);
            advance(0.5 * g.dt, 1.0);
        } else {
            advance(g.dt, 0.5);
        }
        store(level);
    }
    g.u0.assign(nx, 0.0);
    std::copy(v.begin(), v.end(), g.u0.begin() + 1);
    g.min_value = min_value;
    return g;
}

}  // namespace exitsim
