#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace exitsim {

/// Strong order of the Ito-Taylor scheme: 1 (Milstein) or 1.5.
enum class SchemeOrder { order1, order15 };

inline std::string_view to_string(SchemeOrder o) { return o == SchemeOrder::order1 ? "1" : "1.5"; }

inline SchemeOrder parse_order(std::string_view s) {
    if (s == "1" || s == "1.0") return SchemeOrder::order1;
    if (s == "1.5") return SchemeOrder::order15;
    throw std::invalid_argument("unknown scheme order '" + std::string(s) + "' (expected 1 or 1.5)");
}

// Fixed-size containers for states and coefficient derivatives. Dimensions are
// compile-time constants so the per-step arithmetic unrolls completely.

template <std::size_t D>
using Vec = std::array<double, D>;

template <std::size_t R, std::size_t C>
using Mat = std::array<std::array<double, C>, R>;

/// Index layout used by every model:
///   drift_jacobian      J[i][k]       = d a_i / d x_k
///   drift_hessian       H[i][k][l]    = d^2 a_i / d x_k d x_l
///   diffusion_jacobian  G[i][j][k]    = d b_ij / d x_k
///   diffusion_hessian   K[i][j][k][l] = d^2 b_ij / d x_k d x_l
template <std::size_t D, std::size_t M>
struct CoefficientTypes {
    using State = Vec<D>;
    using Noise = Vec<M>;
    using Drift = Vec<D>;
    using Diffusion = Mat<D, M>;
    using DriftJacobian = Mat<D, D>;
    using DriftHessian = std::array<Mat<D, D>, D>;
    using DiffusionJacobian = std::array<Mat<M, D>, D>;
    using DiffusionHessian = std::array<std::array<Mat<D, D>, M>, D>;
};

template <std::size_t D>
inline double norm(const Vec<D>& v) {
    double s = 0.0;
    for (double c : v) s += c * c;
    return std::sqrt(s);
}

template <std::size_t D>
inline Vec<D> operator-(const Vec<D>& a, const Vec<D>& b) {
    Vec<D> r{};
    for (std::size_t i = 0; i < D; ++i) r[i] = a[i] - b[i];
    return r;
}

}  // namespace exitsim
