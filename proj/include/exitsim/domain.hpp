#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <functional>
#include <stdexcept>

#include "exitsim/types.hpp"

namespace exitsim {

/// Bounded open set D with a Euclidean distance-to-boundary oracle.
template <class Dom, std::size_t D>
concept Domain = requires(const Dom& dom, const Vec<D>& x) {
    { dom.contains(x) } -> std::same_as<bool>;
    { dom.boundary_distance(x) } -> std::convertible_to<double>;
};

/// Open interval (lo, hi).
struct Interval {
    double lo;
    double hi;

    Interval(double lo_, double hi_) : lo(lo_), hi(hi_) {
        if (!(lo < hi)) throw std::invalid_argument("interval requires lo < hi");
    }

    bool contains(const Vec<1>& x) const { return lo < x[0] && x[0] < hi; }

    double boundary_distance(const Vec<1>& x) const {
        const double v = x[0];
        if (v <= lo) return lo - v;
        if (v >= hi) return v - hi;
        return std::min(v - lo, hi - v);
    }
};

/// Open ball |x - center| < radius.
template <std::size_t D>
struct Ball {
    Vec<D> center;
    double radius;

    Ball(const Vec<D>& c, double r) : center(c), radius(r) {
        if (!(r > 0.0)) throw std::invalid_argument("ball requires a positive radius");
    }

    bool contains(const Vec<D>& x) const { return norm(x - center) < radius; }
    double boundary_distance(const Vec<D>& x) const { return std::abs(radius - norm(x - center)); }
};

/// User-supplied domain; the distance oracle is taken on trust.
template <std::size_t D>
struct CustomDomain {
    std::function<bool(const Vec<D>&)> contains_fn;
    std::function<double(const Vec<D>&)> distance_fn;

    bool contains(const Vec<D>& x) const { return contains_fn(x); }
    double boundary_distance(const Vec<D>& x) const { return distance_fn(x); }
};

}  // namespace exitsim
