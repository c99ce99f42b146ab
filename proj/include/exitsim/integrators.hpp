#pragma once

#include <cmath>
#include <stdexcept>

#include "exitsim/model.hpp"
#include "exitsim/rng.hpp"

namespace exitsim {

/// One step of length `dt` from `state`; dt must equal noise.dt.
template <std::size_t D, std::size_t M>
struct StepInput {
    Vec<D> state;
    NoiseIncrement<M> noise;
    double dt;
};

namespace detail {

template <std::size_t D, std::size_t M>
void check_step_input(const StepInput<D, M>& in) {
    if (in.dt != in.noise.dt) throw std::invalid_argument("step length differs from noise increment length");
    if (!(in.dt > 0.0)) throw std::invalid_argument("step length must be positive");
}

}  // namespace detail

/// Euler-Maruyama: x + a dt + b dW.
template <DiffusionModel Model>
typename Model::State euler_step(const Model& model, const typename Model::State& x,
                                 const NoiseIncrement<Model::dim_noise>& noise) {
    constexpr std::size_t d = Model::dim_state;
    constexpr std::size_t m = Model::dim_noise;
    const auto a = model.drift(x);
    const auto b = model.diffusion(x);
    typename Model::State out = x;
    for (std::size_t i = 0; i < d; ++i) {
        out[i] += a[i] * noise.dt;
        for (std::size_t j = 0; j < m; ++j) out[i] += b[i][j] * noise.dw[j];
    }
    return out;
}

/// Strong order 1 Ito-Taylor (Milstein) step
///   x_i + a_i dt + sum_j b_ij dW^j + sum_{j1,j2} L^{j1} b_{i j2} I_(j1,j2)
/// with I_(j,j) = ((dW^j)^2 - dt)/2. Off-diagonal iterated integrals enter
/// through the commutative reduction I_(j1,j2) + I_(j2,j1) = dW^{j1} dW^{j2},
/// so for `commutative` noise the first commutativity condition is the
/// caller's responsibility. Additive noise reduces to Euler-Maruyama.
template <DiffusionModel Model>
typename Model::State milstein_step(const Model& model, const typename Model::State& x,
                                    const NoiseIncrement<Model::dim_noise>& noise) {
    constexpr std::size_t d = Model::dim_state;
    constexpr std::size_t m = Model::dim_noise;
    if (model.noise_structure() == NoiseStructure::additive) return euler_step(model, x, noise);

    const double dt = noise.dt;
    const auto& dw = noise.dw;
    const auto a = model.drift(x);
    const auto b = model.diffusion(x);
    const auto g = model.diffusion_jacobian(x);
    typename Model::State out = x;
    for (std::size_t i = 0; i < d; ++i) {
        double v = a[i] * dt;
        for (std::size_t j = 0; j < m; ++j) v += b[i][j] * dw[j];
        for (std::size_t j1 = 0; j1 < m; ++j1) {
            for (std::size_t j2 = 0; j2 < m; ++j2) {
                double lb = 0.0;  // L^{j1} b_{i j2}
                for (std::size_t k = 0; k < d; ++k) lb += b[k][j1] * g[i][j2][k];
                const double iterated = j1 == j2 ? 0.5 * (dw[j1] * dw[j1] - dt) : 0.5 * dw[j1] * dw[j2];
                v += lb * iterated;
            }
        }
        out[i] += v;
    }
    return out;
}

template <DiffusionModel Model>
typename Model::State milstein_step(const Model& model, const StepInput<Model::dim_state, Model::dim_noise>& in) {
    detail::check_step_input(in);
    return milstein_step(model, in.state, in.noise);
}

/// Strong order 1.5 Ito-Taylor step for scalar, additive or diagonal noise:
///   x_i + a_i dt + 1/2 L^0 a_i dt^2
///       + sum_j [ b_ij dW^j + 1/2 L^j b_ij ((dW^j)^2 - dt) + L^0 b_ij (dW^j dt - dZ^j)
///                 + L^j a_i dZ^j + 1/2 L^j L^j b_ij ((dW^j)^2/3 - dt) dW^j ]
/// with L^0 = sum_k a_k d_k + 1/2 sum_{k,l} (b b^T)_kl d_kl and L^j = sum_k b_kj d_k.
/// For diagonal noise and a drift whose i-th component depends only on x_i,
/// only the j = i terms survive.
template <DiffusionModel Model>
typename Model::State taylor15_step(const Model& model, const typename Model::State& x,
                                    const NoiseIncrement<Model::dim_noise>& noise) {
    constexpr std::size_t d = Model::dim_state;
    constexpr std::size_t m = Model::dim_noise;
    if (!noise.dz) throw std::invalid_argument("order 1.5 step requires the iterated integrals dZ");
    if (model.noise_structure() == NoiseStructure::commutative && m > 1)
        throw std::invalid_argument("order 1.5 step supports scalar, additive and diagonal noise only");
    if (!model.has_second_derivatives())
        throw std::invalid_argument("order 1.5 step requires drift and diffusion hessian callbacks");

    const double dt = noise.dt;
    const auto& dw = noise.dw;
    const auto& dz = *noise.dz;
    const auto a = model.drift(x);
    const auto b = model.diffusion(x);
    const auto ja = model.drift_jacobian(x);
    const auto ha = model.drift_hessian(x);
    const auto gb = model.diffusion_jacobian(x);
    const auto hb = model.diffusion_hessian(x);

    Mat<d, d> s{};  // b b^T
    for (std::size_t k = 0; k < d; ++k)
        for (std::size_t l = 0; l < d; ++l)
            for (std::size_t j = 0; j < m; ++j) s[k][l] += b[k][j] * b[l][j];

    typename Model::State out = x;
    for (std::size_t i = 0; i < d; ++i) {
        double l0a = 0.0;
        for (std::size_t k = 0; k < d; ++k) {
            l0a += a[k] * ja[i][k];
            for (std::size_t l = 0; l < d; ++l) l0a += 0.5 * s[k][l] * ha[i][k][l];
        }
        double v = a[i] * dt + 0.5 * l0a * dt * dt;
        for (std::size_t j = 0; j < m; ++j) {
            double l0b = 0.0, lja = 0.0, ljb = 0.0, ljljb = 0.0;
            for (std::size_t k = 0; k < d; ++k) {
                l0b += a[k] * gb[i][j][k];
                lja += b[k][j] * ja[i][k];
                ljb += b[k][j] * gb[i][j][k];
                double inner = 0.0;  // d_k (L^j b_ij)
                for (std::size_t l = 0; l < d; ++l) {
                    l0b += 0.5 * s[k][l] * hb[i][j][k][l];
                    inner += gb[l][j][k] * gb[i][j][l] + b[l][j] * hb[i][j][l][k];
                }
                ljljb += b[k][j] * inner;
            }
            const double w = dw[j];
            v += b[i][j] * w + 0.5 * ljb * (w * w - dt) + l0b * (w * dt - dz[j]) + lja * dz[j] +
                 0.5 * ljljb * (w * w / 3.0 - dt) * w;
        }
        out[i] += v;
    }
    return out;
}

template <DiffusionModel Model>
typename Model::State taylor15_step(const Model& model, const StepInput<Model::dim_state, Model::dim_noise>& in) {
    detail::check_step_input(in);
    return taylor15_step(model, in.state, in.noise);
}

template <DiffusionModel Model>
typename Model::State scheme_step(SchemeOrder order, const Model& model, const typename Model::State& x,
                                  const NoiseIncrement<Model::dim_noise>& noise) {
    return order == SchemeOrder::order1 ? milstein_step(model, x, noise) : taylor15_step(model, x, noise);
}

}  // namespace exitsim
