#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>

#include "exitsim/types.hpp"

namespace exitsim {

/// Noise classes for which the schemes need no Levy-area sampling.
///   scalar:      m = 1
///   additive:    b is constant
///   diagonal:    d = m, b_ij = 0 for i != j and b_ii depends on x_i only
///   commutative: caller guarantees L^{j1} b_{i j2} = L^{j2} b_{i j1}
enum class NoiseStructure { scalar, additive, diagonal, commutative };

inline std::string_view to_string(NoiseStructure n) {
    switch (n) {
        case NoiseStructure::scalar: return "scalar";
        case NoiseStructure::additive: return "additive";
        case NoiseStructure::diagonal: return "diagonal";
        case NoiseStructure::commutative: return "commutative";
    }
    return "?";
}

/// An autonomous Ito SDE dX = a(X) dt + b(X) dW with analytic derivatives.
template <class Model>
concept DiffusionModel = requires(const Model& m, const typename Model::State& x) {
    requires Model::dim_state >= 1;
    requires Model::dim_noise >= 1;
    { m.drift(x) } -> std::same_as<typename Model::Drift>;
    { m.diffusion(x) } -> std::same_as<typename Model::Diffusion>;
    { m.drift_jacobian(x) } -> std::same_as<typename Model::DriftJacobian>;
    { m.diffusion_jacobian(x) } -> std::same_as<typename Model::DiffusionJacobian>;
    { m.drift_hessian(x) } -> std::same_as<typename Model::DriftHessian>;
    { m.diffusion_hessian(x) } -> std::same_as<typename Model::DiffusionHessian>;
    { m.noise_structure() } -> std::same_as<NoiseStructure>;
    { m.diffusion_bound() } -> std::convertible_to<double>;
    { m.x0() } -> std::same_as<typename Model::State>;
    { m.has_second_derivatives() } -> std::same_as<bool>;
};

template <std::size_t D, std::size_t M>
struct ModelShape : CoefficientTypes<D, M> {
    static constexpr std::size_t dim_state = D;
    static constexpr std::size_t dim_noise = M;
};

/// Runtime-configured model built from callbacks. Hessian callbacks may be
/// left empty when only the order 1 scheme is used.
template <std::size_t D, std::size_t M>
struct GenericModel : ModelShape<D, M> {
    using T = CoefficientTypes<D, M>;

    std::function<typename T::Drift(const typename T::State&)> drift_fn;
    std::function<typename T::Diffusion(const typename T::State&)> diffusion_fn;
    std::function<typename T::DriftJacobian(const typename T::State&)> drift_jacobian_fn;
    std::function<typename T::DiffusionJacobian(const typename T::State&)> diffusion_jacobian_fn;
    std::function<typename T::DriftHessian(const typename T::State&)> drift_hessian_fn;
    std::function<typename T::DiffusionHessian(const typename T::State&)> diffusion_hessian_fn;
    NoiseStructure structure = NoiseStructure::commutative;
    double bound = 1.0;
    typename T::State initial{};
    /// Set when derivatives were filled in by finite differences.
    bool finite_difference = false;

    typename T::Drift drift(const typename T::State& x) const { return drift_fn(x); }
    typename T::Diffusion diffusion(const typename T::State& x) const { return diffusion_fn(x); }
    typename T::DriftJacobian drift_jacobian(const typename T::State& x) const { return drift_jacobian_fn(x); }
    typename T::DiffusionJacobian diffusion_jacobian(const typename T::State& x) const {
        return diffusion_jacobian_fn(x);
    }
    typename T::DriftHessian drift_hessian(const typename T::State& x) const { return drift_hessian_fn(x); }
    typename T::DiffusionHessian diffusion_hessian(const typename T::State& x) const {
        return diffusion_hessian_fn(x);
    }
    NoiseStructure noise_structure() const { return structure; }
    double diffusion_bound() const { return bound; }
    typename T::State x0() const { return initial; }
    bool has_second_derivatives() const { return drift_hessian_fn && diffusion_hessian_fn; }
};

/// Checks the structural invariants and that the callbacks needed by `order`
/// are present. Throws std::invalid_argument.
template <DiffusionModel Model>
void validate_model(const Model& model, SchemeOrder order) {
    constexpr std::size_t d = Model::dim_state;
    constexpr std::size_t m = Model::dim_noise;
    if (!(model.diffusion_bound() > 0.0)) throw std::invalid_argument("diffusion_bound must be positive");
    const auto ns = model.noise_structure();
    if (ns == NoiseStructure::diagonal && d != m)
        throw std::invalid_argument("diagonal noise requires dim_state == dim_noise");
    if (ns == NoiseStructure::scalar && m != 1) throw std::invalid_argument("scalar noise requires dim_noise == 1");
    if (order == SchemeOrder::order15) {
        if (ns == NoiseStructure::commutative && m > 1)
            throw std::invalid_argument("order 1.5 supports scalar, additive and diagonal noise only");
        if (!model.has_second_derivatives())
            throw std::invalid_argument("order 1.5 requires drift and diffusion hessian callbacks");
    }
}

template <std::size_t D, std::size_t M>
void validate_model(const GenericModel<D, M>& model, SchemeOrder order) {
    if (!model.drift_fn || !model.diffusion_fn) throw std::invalid_argument("drift and diffusion callbacks required");
    if (!model.drift_jacobian_fn || !model.diffusion_jacobian_fn)
        throw std::invalid_argument("jacobian callbacks required (see with_finite_difference_derivatives)");
    validate_model<GenericModel<D, M>>(model, order);
}

namespace detail {

inline double fd_step(double x) { return 1e-5 * std::max(1.0, std::abs(x)); }

/// Central difference of a vector-of-arrays valued function along axis k.
template <class F, std::size_t D>
auto central_difference(const F& f, const Vec<D>& x, std::size_t k) {
    const double h = fd_step(x[k]);
    Vec<D> xp = x, xm = x;
    xp[k] += h;
    xm[k] -= h;
    auto fp = f(xp);
    auto fm = f(xm);
    return std::pair{std::move(fp), std::move(fm)};
}

}  // namespace detail

/// Fills missing derivative callbacks by central finite differences of the
/// lower-order callbacks and flags the model. Such models should not be used
/// for convergence-rate studies.
template <std::size_t D, std::size_t M>
GenericModel<D, M> with_finite_difference_derivatives(GenericModel<D, M> model) {
    using T = CoefficientTypes<D, M>;
    if (!model.drift_jacobian_fn) {
        model.drift_jacobian_fn = [f = model.drift_fn](const typename T::State& x) {
            typename T::DriftJacobian J{};
            for (std::size_t k = 0; k < D; ++k) {
                const auto [fp, fm] = detail::central_difference(f, x, k);
                const double h = detail::fd_step(x[k]);
                for (std::size_t i = 0; i < D; ++i) J[i][k] = (fp[i] - fm[i]) / (2 * h);
            }
            return J;
        };
        model.finite_difference = true;
    }
    if (!model.diffusion_jacobian_fn) {
        model.diffusion_jacobian_fn = [f = model.diffusion_fn](const typename T::State& x) {
            typename T::DiffusionJacobian G{};
            for (std::size_t k = 0; k < D; ++k) {
                const auto [fp, fm] = detail::central_difference(f, x, k);
                const double h = detail::fd_step(x[k]);
                for (std::size_t i = 0; i < D; ++i)
                    for (std::size_t j = 0; j < M; ++j) G[i][j][k] = (fp[i][j] - fm[i][j]) / (2 * h);
            }
            return G;
        };
        model.finite_difference = true;
    }
    if (!model.drift_hessian_fn) {
        model.drift_hessian_fn = [f = model.drift_jacobian_fn](const typename T::State& x) {
            typename T::DriftHessian H{};
            for (std::size_t l = 0; l < D; ++l) {
                const auto [fp, fm] = detail::central_difference(f, x, l);
                const double h = detail::fd_step(x[l]);
                for (std::size_t i = 0; i < D; ++i)
                    for (std::size_t k = 0; k < D; ++k) H[i][k][l] = (fp[i][k] - fm[i][k]) / (2 * h);
            }
            return H;
        };
        model.finite_difference = true;
    }
    if (!model.diffusion_hessian_fn) {
        model.diffusion_hessian_fn = [f = model.diffusion_jacobian_fn](const typename T::State& x) {
            typename T::DiffusionHessian K{};
            for (std::size_t l = 0; l < D; ++l) {
                const auto [fp, fm] = detail::central_difference(f, x, l);
                const double h = detail::fd_step(x[l]);
                for (std::size_t i = 0; i < D; ++i)
                    for (std::size_t j = 0; j < M; ++j)
                        for (std::size_t k = 0; k < D; ++k) K[i][j][k][l] = (fp[i][j][k] - fm[i][j][k]) / (2 * h);
            }
            return K;
        };
        model.finite_difference = true;
    }
    return model;
}

/// Largest relative discrepancy between the analytic derivative callbacks and
/// central differences of the next-lower callback at `x`. Discrepancies are
/// measured as |analytic - fd| / max(1, |analytic|).
template <DiffusionModel Model>
double derivative_mismatch(const Model& model, const typename Model::State& x) {
    constexpr std::size_t d = Model::dim_state;
    constexpr std::size_t m = Model::dim_noise;
    double worst = 0.0;
    auto track = [&](double analytic, double fd) {
        worst = std::max(worst, std::abs(analytic - fd) / std::max(1.0, std::abs(analytic)));
    };
    const auto J = model.drift_jacobian(x);
    const auto G = model.diffusion_jacobian(x);
    const bool second = model.has_second_derivatives();
    typename Model::DriftHessian H{};
    typename Model::DiffusionHessian K{};
    if (second) {
        H = model.drift_hessian(x);
        K = model.diffusion_hessian(x);
    }
    for (std::size_t k = 0; k < d; ++k) {
        const double h = detail::fd_step(x[k]);
        const auto [ap, am] = detail::central_difference([&](const auto& y) { return model.drift(y); }, x, k);
        const auto [bp, bm] = detail::central_difference([&](const auto& y) { return model.diffusion(y); }, x, k);
        for (std::size_t i = 0; i < d; ++i) {
            track(J[i][k], (ap[i] - am[i]) / (2 * h));
            for (std::size_t j = 0; j < m; ++j) track(G[i][j][k], (bp[i][j] - bm[i][j]) / (2 * h));
        }
        if (!second) continue;
        const auto [jp, jm] = detail::central_difference([&](const auto& y) { return model.drift_jacobian(y); }, x, k);
        const auto [gp, gm] =
            detail::central_difference([&](const auto& y) { return model.diffusion_jacobian(y); }, x, k);
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t l = 0; l < d; ++l) {
                track(H[i][l][k], (jp[i][l] - jm[i][l]) / (2 * h));
                for (std::size_t j = 0; j < m; ++j) track(K[i][j][l][k], (gp[i][j][l] - gm[i][j][l]) / (2 * h));
            }
    }
    return worst;
}

/// lambda_max(b(x) b(x)^T), by power iteration for d > 2.
template <DiffusionModel Model>
double diffusion_spectral_radius(const Model& model, const typename Model::State& x) {
    constexpr std::size_t d = Model::dim_state;
    constexpr std::size_t m = Model::dim_noise;
    const auto b = model.diffusion(x);
    Mat<d, d> s{};
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t k = 0; k < d; ++k)
            for (std::size_t j = 0; j < m; ++j) s[i][k] += b[i][j] * b[k][j];
    if constexpr (d == 1) {
        return s[0][0];
    } else if constexpr (d == 2) {
        const double tr = s[0][0] + s[1][1];
        const double det = s[0][0] * s[1][1] - s[0][1] * s[1][0];
        return 0.5 * tr + std::sqrt(std::max(0.0, 0.25 * tr * tr - det));
    } else {
        Vec<d> v;
        v.fill(1.0);
        double lambda = 0.0;
        for (int it = 0; it < 500; ++it) {
            Vec<d> w{};
            for (std::size_t i = 0; i < d; ++i)
                for (std::size_t k = 0; k < d; ++k) w[i] += s[i][k] * v[k];
            lambda = norm(w);
            if (lambda == 0.0) return 0.0;
            for (std::size_t i = 0; i < d; ++i) v[i] = w[i] / lambda;
        }
        return lambda;
    }
}

}  // namespace exitsim
