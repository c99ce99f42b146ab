#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>

#include "exitsim/adaptive.hpp"

namespace exitsim {

/// Brownian increment over (s, t] together with dz = int_s^t (W(u) - W(s)) du.
template <std::size_t M>
struct BrownianSegment {
    double s = 0.0;
    double t = 0.0;
    Vec<M> dw{};
    Vec<M> dz{};
};

/// Joins (s, r] and (r, t] into (s, t]:
///   dw(s,t) = dw(s,r) + dw(r,t)
///   dz(s,t) = dz(s,r) + dz(r,t) + (t - r) dw(s,r)
template <std::size_t M>
BrownianSegment<M> concatenate(const BrownianSegment<M>& first, const BrownianSegment<M>& second) {
    BrownianSegment<M> out;
    out.s = first.s;
    out.t = second.t;
    const double tail = second.t - second.s;
    for (std::size_t j = 0; j < M; ++j) {
        out.dw[j] = first.dw[j] + second.dw[j];
        out.dz[j] = first.dz[j] + second.dz[j] + tail * first.dw[j];
    }
    return out;
}

template <std::size_t M>
BrownianSegment<M> sample_segment(RngStream& rng, double s, double t) {
    const auto inc = sample_increment<M>(rng, t - s, SchemeOrder::order15);
    return {s, t, inc.dw, *inc.dz};
}

struct CoupledExitPair {
    double nu_fine = 0.0;
    double nu_coarse = 0.0;
    double diff = 0.0;
    double abs_diff = 0.0;
    std::uint64_t cost_fine = 0;
    std::uint64_t cost_coarse = 0;
};

/// Observer hooks for simulate_coupled; `member` is 0 for fine, 1 for coarse.
struct NoCouplingTrace {
    template <std::size_t M>
    void on_segment(const BrownianSegment<M>&) const {}
    template <std::size_t M>
    void on_step(int, const BrownianSegment<M>&) const {}
};

namespace detail {

template <DiffusionModel Model>
struct CoupledMember {
    const AdaptiveScheme* scheme = nullptr;
    typename Model::State x{};
    double t = 0.0;
    double dt = 0.0;
    double step_end = 0.0;
    BrownianSegment<Model::dim_noise> pending;
    std::uint64_t steps = 0;
    double nu = 0.0;
    bool running = true;
};

}  // namespace detail

/// Simulates two adaptive paths driven by one Brownian path.
///
/// The Brownian path is generated forward on the union of both meshes: the
/// next union point is the earliest pending step end among running members,
/// a fresh (dw, dz) is drawn for the segment up to it, and every running
/// member accumulates the segment into its current step with the composition
/// rule. Coinciding step ends share one segment. Each member stops by the
/// same rule as simulate_exit.
template <DiffusionModel Model, class Dom, class Trace = NoCouplingTrace>
    requires Domain<Dom, Model::dim_state>
CoupledExitPair simulate_coupled(const Model& model, const Dom& domain, const AdaptiveScheme& scheme_fine,
                                 const AdaptiveScheme& scheme_coarse, double T, RngStream& rng, Trace&& trace = {}) {
    constexpr std::size_t m = Model::dim_noise;
    if (!(T > 0.0)) throw std::invalid_argument("cut-off time T must be positive");
    if (scheme_fine.h > scheme_coarse.h)
        throw std::invalid_argument("fine scheme must not use a larger step parameter than the coarse scheme");

    std::array<detail::CoupledMember<Model>, 2> members{};
    members[0].scheme = &scheme_fine;
    members[1].scheme = &scheme_coarse;
    for (auto& mb : members) mb.x = model.x0();
    const std::array<std::uint64_t, 2> budget{step_budget(scheme_fine, T), step_budget(scheme_coarse, T)};

    auto plan = [&](detail::CoupledMember<Model>& mb) {
        const StepClass cls = mb.scheme->classify(domain.boundary_distance(mb.x));
        mb.dt = mb.scheme->step_length(cls);
        mb.step_end = mb.t + mb.dt;
        mb.pending = BrownianSegment<m>{mb.t, mb.t, {}, {}};
    };
    for (auto& mb : members) {
        if (!domain.contains(mb.x)) {
            mb.running = false;
            mb.nu = 0.0;
        } else {
            plan(mb);
        }
    }

    double front = 0.0;
    while (members[0].running || members[1].running) {
        double next = INFINITY;
        for (const auto& mb : members)
            if (mb.running) next = std::min(next, mb.step_end);
        const auto seg = sample_segment<m>(rng, front, next);
        trace.on_segment(seg);
        front = next;
        for (int k = 0; k < 2; ++k) {
            auto& mb = members[k];
            if (!mb.running) continue;
            mb.pending = concatenate(mb.pending, seg);
            if (mb.step_end != next) continue;

            NoiseIncrement<m> noise;
            noise.dt = mb.dt;
            noise.dw = mb.pending.dw;
            noise.dz = mb.pending.dz;
            trace.on_step(k, mb.pending);
            mb.x = scheme_step(mb.scheme->order, model, mb.x, noise);
            mb.t = mb.step_end;
            if (++mb.steps > budget[k]) throw StepBudgetExceeded(rng.path_index(), budget[k]);
            if (!domain.contains(mb.x)) {
                mb.running = false;
                mb.nu = std::min(mb.t, T);
            } else if (mb.t >= T) {
                mb.running = false;
                mb.nu = T;
            } else {
                plan(mb);
            }
        }
    }

    CoupledExitPair out;
    out.nu_fine = members[0].nu;
    out.nu_coarse = members[1].nu;
    out.diff = out.nu_fine - out.nu_coarse;
    out.abs_diff = std::abs(out.diff);
    out.cost_fine = members[0].steps;
    out.cost_coarse = members[1].steps;
    return out;
}

}  // namespace exitsim
