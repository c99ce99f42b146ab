#pragma once

// Reference computations shared by the unit and acceptance tests. They use
// only the public step maps and the random stream, never the adaptive driver.

#include <cmath>
#include <numbers>
#include <vector>

#include "exitsim/integrators.hpp"
#include "exitsim/rng.hpp"

namespace oracle {

using namespace exitsim;

/// Brownian path on a uniform grid of `n` cells over [0, T], with the
/// per-cell integral dz_k = int (W(u) - W(t_k)) du.
template <std::size_t M>
struct FinePath {
    double dt;
    std::vector<Vec<M>> dw, dz;
};

template <std::size_t M>
FinePath<M> fine_path(RngStream& rng, double T, std::size_t n) {
    FinePath<M> p{T / static_cast<double>(n), std::vector<Vec<M>>(n), std::vector<Vec<M>>(n)};
    for (std::size_t k = 0; k < n; ++k) {
        const auto inc = sample_increment<M>(rng, p.dt, SchemeOrder::order15);
        p.dw[k] = inc.dw;
        p.dz[k] = *inc.dz;
    }
    return p;
}

/// Increment over cells [first, first + count): dW is the sum and
///   dZ = sum_k (dz_k + dt (W(t_k) - W(t_first))).
template <std::size_t M>
NoiseIncrement<M> coarse_increment(const FinePath<M>& p, std::size_t first, std::size_t count) {
    NoiseIncrement<M> inc;
    inc.dt = p.dt * static_cast<double>(count);
    Vec<M> w{}, z{};
    for (std::size_t k = first; k < first + count; ++k) {
        for (std::size_t j = 0; j < M; ++j) {
            z[j] += p.dz[k][j] + p.dt * w[j];
            w[j] += p.dw[k][j];
        }
    }
    inc.dw = w;
    inc.dz = z;
    return inc;
}

/// Uniform-mesh endpoint with `stride` fine cells per step.
template <DiffusionModel Model, std::size_t M = Model::dim_noise>
typename Model::State uniform_endpoint(const Model& model, SchemeOrder order, const FinePath<M>& p,
                                       std::size_t stride) {
    auto x = model.x0();
    for (std::size_t k = 0; k < p.dw.size(); k += stride) x = scheme_step(order, model, x, coarse_increment(p, k, stride));
    return x;
}

/// RMS endpoint errors of a scalar GBM on uniform meshes with 2^l steps over
/// [0, T], l in `levels`, against the exact solution
///   X_T = x0 exp((mu - sigma^2 / 2) T + sigma W_T).
template <class Gbm>
std::vector<double> gbm_uniform_rms(const Gbm& model, SchemeOrder order, const std::vector<int>& levels, double T,
                                    std::size_t paths, std::uint64_t seed) {
    const int finest = levels.back();
    const std::size_t n = std::size_t{1} << finest;
    std::vector<double> sq(levels.size(), 0.0);
    for (std::size_t i = 0; i < paths; ++i) {
        RngStream rng(seed, i);
        const auto p = fine_path<1>(rng, T, n);
        double w = 0.0;
        for (const auto& dw : p.dw) w += dw[0];
        const double exact =
            model.x0()[0] * std::exp((model.mu - 0.5 * model.sigma * model.sigma) * T + model.sigma * w);
        for (std::size_t k = 0; k < levels.size(); ++k) {
            const auto x = uniform_endpoint(model, order, p, std::size_t{1} << (finest - levels[k]));
            sq[k] += (x[0] - exact) * (x[0] - exact);
        }
    }
    for (auto& v : sq) v = std::sqrt(v / static_cast<double>(paths));
    return sq;
}

/// Least-squares slope of -log2(err) against level.
inline double observed_order(const std::vector<int>& levels, const std::vector<double>& errs) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = static_cast<double>(levels.size());
    for (std::size_t k = 0; k < levels.size(); ++k) {
        const double x = levels[k], y = -std::log2(errs[k]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

/// E[min(tau, T)] for standard Brownian motion started at 0 in (-1, 1), from
/// the eigenfunction expansion of the heat equation with unit source.
inline double wiener_truncated_mean_exit(double T) {
    const double pi = std::numbers::pi;
    double s = 0.0;
    for (int k = 0; k < 2000; ++k) {
        const double n = 2 * k + 1;
        const double lambda = n * n * pi * pi / 8.0;
        const double coeff = 4.0 / (pi * n) * (k % 2 == 0 ? 1.0 : -1.0);
        s += coeff * (1.0 - std::exp(-lambda * T)) / lambda;
    }
    return s;
}

}  // namespace oracle
