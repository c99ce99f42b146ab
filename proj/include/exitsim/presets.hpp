#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>

#include "exitsim/domain.hpp"
#include "exitsim/model.hpp"

namespace exitsim {

using ParamMap = std::map<std::string, double, std::less<>>;

// Built-in benchmark models. Each one carries its own analytic derivatives
// and a diffusion bound C_b >= sup lambda_max(b b^T) over the closure of its
// default domain.

/// dX = mu X dt + sigma X dW
struct Gbm1d : ModelShape<1, 1> {
    double mu = 0.05;
    double sigma = 0.2;
    double start = 4.0;
    double bound = 1.96;

    Drift drift(const State& x) const { return {mu * x[0]}; }
    Diffusion diffusion(const State& x) const { return {{{sigma * x[0]}}}; }
    DriftJacobian drift_jacobian(const State&) const { return {{{mu}}}; }
    DiffusionJacobian diffusion_jacobian(const State&) const { return {{{{{sigma}}}}}; }
    DriftHessian drift_hessian(const State&) const { return {}; }
    DiffusionHessian diffusion_hessian(const State&) const { return {}; }
    NoiseStructure noise_structure() const { return NoiseStructure::scalar; }
    double diffusion_bound() const { return bound; }
    State x0() const { return {start}; }
    bool has_second_derivatives() const { return true; }
};

/// dX = alpha X dt + beta (cos X + 3) dW
struct Cosine1d : ModelShape<1, 1> {
    double alpha = 0.1;
    double beta = 0.3;
    double start = 4.0;
    double bound = 1.44;

    Drift drift(const State& x) const { return {alpha * x[0]}; }
    Diffusion diffusion(const State& x) const { return {{{beta * (std::cos(x[0]) + 3.0)}}}; }
    DriftJacobian drift_jacobian(const State&) const { return {{{alpha}}}; }
    DiffusionJacobian diffusion_jacobian(const State& x) const { return {{{{{-beta * std::sin(x[0])}}}}}; }
    DriftHessian drift_hessian(const State&) const { return {}; }
    DiffusionHessian diffusion_hessian(const State& x) const {
        DiffusionHessian k{};
        k[0][0][0][0] = -beta * std::cos(x[0]);
        return k;
    }
    NoiseStructure noise_structure() const { return NoiseStructure::scalar; }
    double diffusion_bound() const { return bound; }
    State x0() const { return {start}; }
    bool has_second_derivatives() const { return true; }
};

/// Standard Wiener process, dX = dW.
struct Wiener1d : ModelShape<1, 1> {
    double start = 0.0;
    double bound = 1.0;

    Drift drift(const State&) const { return {0.0}; }
    Diffusion diffusion(const State&) const { return {{{1.0}}}; }
    DriftJacobian drift_jacobian(const State&) const { return {}; }
    DiffusionJacobian diffusion_jacobian(const State&) const { return {}; }
    DriftHessian drift_hessian(const State&) const { return {}; }
    DiffusionHessian diffusion_hessian(const State&) const { return {}; }
    NoiseStructure noise_structure() const { return NoiseStructure::additive; }
    double diffusion_bound() const { return bound; }
    State x0() const { return {start}; }
    bool has_second_derivatives() const { return true; }
};

/// dX1 = mu X2 dt + sigma X1 dW1, dX2 = mu X1 dt + sigma X2 dW2
struct Gbm2d : ModelShape<2, 2> {
    double mu = 0.05;
    double sigma = 0.2;
    State start{3.0, 3.0};
    double bound = 1.44;

    Drift drift(const State& x) const { return {mu * x[1], mu * x[0]}; }
    Diffusion diffusion(const State& x) const { return {{{sigma * x[0], 0.0}, {0.0, sigma * x[1]}}}; }
    DriftJacobian drift_jacobian(const State&) const { return {{{0.0, mu}, {mu, 0.0}}}; }
    DiffusionJacobian diffusion_jacobian(const State&) const {
        DiffusionJacobian g{};
        g[0][0][0] = sigma;
        g[1][1][1] = sigma;
        return g;
    }
    DriftHessian drift_hessian(const State&) const { return {}; }
    DiffusionHessian diffusion_hessian(const State&) const { return {}; }
    NoiseStructure noise_structure() const { return NoiseStructure::diagonal; }
    double diffusion_bound() const { return bound; }
    State x0() const { return start; }
    bool has_second_derivatives() const { return true; }
};

/// dX1 = alpha X2 dt + beta (cos X1 + 3) dW1, dX2 = alpha X1 dt + beta (cos X2 + 3) dW2
struct Cosine2d : ModelShape<2, 2> {
    double alpha = 0.1;
    double beta = 0.25;
    State start{3.0, 3.0};
    double bound = 1.0;

    Drift drift(const State& x) const { return {alpha * x[1], alpha * x[0]}; }
    Diffusion diffusion(const State& x) const {
        return {{{beta * (std::cos(x[0]) + 3.0), 0.0}, {0.0, beta * (std::cos(x[1]) + 3.0)}}};
    }
    DriftJacobian drift_jacobian(const State&) const { return {{{0.0, alpha}, {alpha, 0.0}}}; }
    DiffusionJacobian diffusion_jacobian(const State& x) const {
        DiffusionJacobian g{};
        g[0][0][0] = -beta * std::sin(x[0]);
        g[1][1][1] = -beta * std::sin(x[1]);
        return g;
    }
    DriftHessian drift_hessian(const State&) const { return {}; }
    DiffusionHessian diffusion_hessian(const State& x) const {
        DiffusionHessian k{};
        k[0][0][0][0] = -beta * std::cos(x[0]);
        k[1][1][1][1] = -beta * std::cos(x[1]);
        return k;
    }
    NoiseStructure noise_structure() const { return NoiseStructure::diagonal; }
    double diffusion_bound() const { return bound; }
    State x0() const { return start; }
    bool has_second_derivatives() const { return true; }
};

/// Reference mean exit time E[tau] for a preset at its default parameters.
struct ReferenceValue {
    double value;
    std::string source;
};

/// A model together with the domain it exits from.
template <class Model, class Dom>
struct Problem {
    using model_type = Model;
    using domain_type = Dom;

    std::string name;
    Model model;
    Dom domain;
    std::optional<ReferenceValue> reference;
};

using AnyModel = std::variant<Gbm1d, Cosine1d, Wiener1d, Gbm2d, Cosine2d>;
using AnyProblem = std::variant<Problem<Gbm1d, Interval>, Problem<Cosine1d, Interval>, Problem<Wiener1d, Interval>,
                                Problem<Gbm2d, Ball<2>>, Problem<Cosine2d, Ball<2>>>;

inline constexpr std::string_view kPresetNames[] = {"gbm1d", "cosine1d", "gbm2d", "cosine2d", "wiener1d"};

// Published Feynman-Kac reference values (T = 10, default parameters).
inline constexpr double kGbm1dMeanExit = 7.153211;
inline constexpr double kCosine1dMeanExit = 5.504741;
inline constexpr double kGbm2dMeanExit = 6.7737;
inline constexpr double kCosine2dMeanExit = 5.0853;

namespace detail {

class ParamReader {
public:
    ParamReader(std::string_view preset, const ParamMap& params) : preset_(preset), params_(params) {}

    /// `changes_law` is false for knobs that only affect the schemes.
    double get(std::string_view key, double fallback, bool changes_law = true) {
        used_.insert(std::string(key));
        auto it = params_.find(key);
        if (it == params_.end()) return fallback;
        overridden_ = overridden_ || changes_law;
        return it->second;
    }
    bool has(std::string_view key) const { return params_.find(key) != params_.end(); }
    bool overridden() const { return overridden_; }

    void finish() const {
        for (const auto& [k, v] : params_)
            if (!used_.count(k))
                throw std::invalid_argument("unknown parameter '" + k + "' for preset '" + std::string(preset_) + "'");
    }

private:
    std::string_view preset_;
    const ParamMap& params_;
    std::set<std::string> used_;
    bool overridden_ = false;
};

inline double sq(double v) { return v * v; }

}  // namespace detail

/// Builds a preset problem. Recognized parameters:
///   gbm1d, cosine1d:  mu/alpha, sigma/beta, x0, lo, hi, diffusion_bound
///   wiener1d:         x0, lo, hi
///   gbm2d, cosine2d:  mu/alpha, sigma/beta, x0_1, x0_2, c1, c2, radius, diffusion_bound
/// A reference value is attached only when no parameter is overridden
/// (wiener1d always has the analytic value (x0 - lo)(hi - x0)).
inline AnyProblem make_problem(std::string_view name, const ParamMap& params = {}) {
    detail::ParamReader p(name, params);
    AnyProblem out = [&]() -> AnyProblem {
        if (name == "gbm1d") {
            Gbm1d m;
            m.mu = p.get("mu", m.mu);
            m.sigma = p.get("sigma", m.sigma);
            m.start = p.get("x0", m.start);
            Interval dom(p.get("lo", 1.0), p.get("hi", 7.0));
            m.bound = p.get("diffusion_bound", detail::sq(m.sigma * std::max(std::abs(dom.lo), std::abs(dom.hi))), false);
            std::optional<ReferenceValue> ref;
            if (!p.overridden()) ref = ReferenceValue{kGbm1dMeanExit, "published Feynman-Kac PDE solve, 7 significant digits"};
            return Problem<Gbm1d, Interval>{"gbm1d", m, dom, ref};
        }
        if (name == "cosine1d") {
            Cosine1d m;
            m.alpha = p.get("alpha", m.alpha);
            m.beta = p.get("beta", m.beta);
            m.start = p.get("x0", m.start);
            Interval dom(p.get("lo", 1.0), p.get("hi", 7.0));
            m.bound = p.get("diffusion_bound", detail::sq(4.0 * m.beta), false);
            std::optional<ReferenceValue> ref;
            if (!p.overridden())
                ref = ReferenceValue{kCosine1dMeanExit, "published Feynman-Kac PDE solve, 7 significant digits"};
            return Problem<Cosine1d, Interval>{"cosine1d", m, dom, ref};
        }
        if (name == "wiener1d") {
            Wiener1d m;
            m.start = p.get("x0", m.start);
            Interval dom(p.get("lo", -1.0), p.get("hi", 1.0));
            std::optional<ReferenceValue> ref;
            if (dom.contains({m.start}))
                ref = ReferenceValue{(m.start - dom.lo) * (dom.hi - m.start), "analytic untruncated mean exit time"};
            return Problem<Wiener1d, Interval>{"wiener1d", m, dom, ref};
        }
        if (name == "gbm2d" || name == "cosine2d") {
            const bool gbm = name == "gbm2d";
            Ball<2> dom({p.get("c1", 3.0), p.get("c2", 3.0)}, p.get("radius", 3.0));
            const Vec<2> start{p.get("x0_1", 3.0), p.get("x0_2", 3.0)};
            if (gbm) {
                Gbm2d m;
                m.mu = p.get("mu", m.mu);
                m.sigma = p.get("sigma", m.sigma);
                m.start = start;
                const double reach =
                    std::max(std::abs(dom.center[0]), std::abs(dom.center[1])) + dom.radius;
                m.bound = p.get("diffusion_bound", detail::sq(m.sigma * reach), false);
                std::optional<ReferenceValue> ref;
                if (!p.overridden())
                    ref = ReferenceValue{kGbm2dMeanExit, "published Feynman-Kac PDE solve, 5 significant digits"};
                return Problem<Gbm2d, Ball<2>>{"gbm2d", m, dom, ref};
            }
            Cosine2d m;
            m.alpha = p.get("alpha", m.alpha);
            m.beta = p.get("beta", m.beta);
            m.start = start;
            m.bound = p.get("diffusion_bound", detail::sq(4.0 * m.beta), false);
            std::optional<ReferenceValue> ref;
            if (!p.overridden())
                ref = ReferenceValue{kCosine2dMeanExit, "published Feynman-Kac PDE solve, 5 significant digits"};
            return Problem<Cosine2d, Ball<2>>{"cosine2d", m, dom, ref};
        }
        throw std::invalid_argument("unknown preset '" + std::string(name) +
                                    "' (expected gbm1d, cosine1d, gbm2d, cosine2d or wiener1d)");
    }();
    p.finish();
    if (params.count("diffusion_bound") && !(params.find("diffusion_bound")->second > 0.0))
        throw std::invalid_argument("diffusion_bound must be positive");
    return out;
}

inline AnyModel make_model(std::string_view name, const ParamMap& params = {}) {
    return std::visit([](const auto& prob) -> AnyModel { return prob.model; }, make_problem(name, params));
}

}  // namespace exitsim
