#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>

#include "exitsim/domain.hpp"
#include "exitsim/integrators.hpp"
#include "exitsim/model.hpp"
#include "exitsim/rng.hpp"

namespace exitsim {

/// Step-size classes h, h^2 and h^3.
enum class StepClass : int { large = 0, small = 1, tiny = 2 };

/// Adaptive time-stepping parameters for a given order and step parameter h.
///
/// Order 1 uses a single threshold delta = sqrt(8 C_b d h log(1/h)) and steps
/// h (distance > delta) or h^2. Order 1.5 uses delta1 = sqrt(12 C_b d h log(1/h))
/// and delta2 = sqrt(16 C_b d h^2 log(1/h)) with steps h, h^2 and h^3. The
/// Wiener variant replaces the order 1 threshold by sqrt(4 h log(1/h)).
struct AdaptiveScheme {
    SchemeOrder order = SchemeOrder::order1;
    double h = 0.0;
    double delta1 = 0.0;  // delta for order 1
    double delta2 = 0.0;  // unused for order 1
    bool wiener_special = false;
    std::array<double, 3> steps{};
    /// Overrides the default step budget 10 T / h^(2 order) when nonzero.
    std::uint64_t step_cap = 0;

    static AdaptiveScheme make(SchemeOrder order, double h, double diffusion_bound, std::size_t dim,
                               bool wiener_special = false) {
        if (!(h > 0.0) || h > 1.0 / std::numbers::e)
            throw std::invalid_argument("step parameter h must lie in (0, 1/e], got " + std::to_string(h));
        if (!(diffusion_bound > 0.0)) throw std::invalid_argument("diffusion bound must be positive");
        if (wiener_special && order != SchemeOrder::order1)
            throw std::invalid_argument("the Wiener threshold is defined for the order 1 method only");
        AdaptiveScheme s;
        s.order = order;
        s.h = h;
        s.wiener_special = wiener_special;
        s.steps = {h, h * h, h * h * h};
        const double log_inv_h = std::log(1.0 / h);
        const double cd = diffusion_bound * static_cast<double>(dim);
        if (order == SchemeOrder::order1) {
            s.delta1 = wiener_special ? std::sqrt(4.0 * h * log_inv_h) : std::sqrt(8.0 * cd * h * log_inv_h);
        } else {
            s.delta1 = std::sqrt(12.0 * cd * h * log_inv_h);
            s.delta2 = std::sqrt(16.0 * cd * h * h * log_inv_h);
            if (!(s.delta2 < s.delta1)) throw std::logic_error("threshold ordering delta2 < delta1 violated");
        }
        return s;
    }

    template <DiffusionModel Model>
    static AdaptiveScheme for_model(const Model& model, SchemeOrder order, double h, bool wiener_special = false) {
        return make(order, h, model.diffusion_bound(), Model::dim_state, wiener_special);
    }

    /// Smallest step length of the scheme, h^2 or h^3.
    double finest_step() const { return order == SchemeOrder::order1 ? steps[1] : steps[2]; }

    /// Step class for a state at boundary distance `dist`. Ties go to the
    /// smaller step; states outside D get the finest class.
    StepClass classify(double dist, bool inside = true) const {
        if (order == SchemeOrder::order1) {
            if (inside && dist > delta1) return StepClass::large;
            return StepClass::small;
        }
        if (!inside || dist <= delta2) return StepClass::tiny;
        return dist > delta1 ? StepClass::large : StepClass::small;
    }

    double step_length(StepClass c) const { return steps[static_cast<int>(c)]; }
};

inline double step_size(const AdaptiveScheme& scheme, double dist) {
    return scheme.step_length(scheme.classify(dist));
}

/// Result of one adaptive path simulation.
template <std::size_t D>
struct ExitSample {
    double nu = 0.0;
    Vec<D> exit_state{};
    bool exited = false;
    std::array<std::uint64_t, 3> steps_by_class{};

    std::uint64_t cost() const { return steps_by_class[0] + steps_by_class[1] + steps_by_class[2]; }
};

/// Thrown when a path needs more steps than the hard cap 10 T / h^(2 order).
class StepBudgetExceeded : public std::runtime_error {
public:
    StepBudgetExceeded(std::uint64_t path_index, std::uint64_t budget)
        : std::runtime_error("path " + std::to_string(path_index) + " exceeded the step budget of " +
                             std::to_string(budget) + " steps"),
          path_index_(path_index) {}

    std::uint64_t path_index() const { return path_index_; }

private:
    std::uint64_t path_index_;
};

inline std::uint64_t step_budget(const AdaptiveScheme& scheme, double T) {
    if (scheme.step_cap != 0) return scheme.step_cap;
    const double cap = 10.0 * T / scheme.finest_step();
    return cap > 9.0e18 ? UINT64_MAX : static_cast<std::uint64_t>(std::ceil(cap)) + 1;
}

/// Per-step observer; the default does nothing.
struct NoTrace {
    template <std::size_t D>
    void operator()(std::uint64_t, double, double, StepClass, double, const Vec<D>&) const {}
};

/// Simulates one path until it leaves the domain or reaches the cut-off T.
/// The exit time is the first mesh time with the state outside D, capped at T.
/// `trace(n, t_before, dt, class, dist, state_after)` is called once per step.
template <DiffusionModel Model, class Dom, class Trace = NoTrace>
    requires Domain<Dom, Model::dim_state>
ExitSample<Model::dim_state> simulate_exit(const Model& model, const Dom& domain, const AdaptiveScheme& scheme,
                                           double T, RngStream& rng, Trace&& trace = {}) {
    if (!(T > 0.0)) throw std::invalid_argument("cut-off time T must be positive");
    constexpr std::size_t m = Model::dim_noise;
    ExitSample<Model::dim_state> out;
    auto x = model.x0();
    out.exit_state = x;
    if (!domain.contains(x)) {
        out.exited = true;
        return out;
    }
    const std::uint64_t budget = step_budget(scheme, T);
    double t = 0.0;
    std::uint64_t n = 0;
    for (;;) {
        const double dist = domain.boundary_distance(x);
        const StepClass cls = scheme.classify(dist);
        const double dt = scheme.step_length(cls);
        const auto noise = sample_increment<m>(rng, dt, scheme.order);
        x = scheme_step(scheme.order, model, x, noise);
        t += dt;
        ++out.steps_by_class[static_cast<int>(cls)];
        trace(n, t - dt, dt, cls, dist, x);
        if (++n > budget) throw StepBudgetExceeded(rng.path_index(), budget);
        if (!domain.contains(x)) {
            out.exited = t <= T;
            out.nu = std::min(t, T);
            break;
        }
        if (t >= T) {
            out.nu = T;
            break;
        }
    }
    out.exit_state = x;
    return out;
}

}  // namespace exitsim
