#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "exitsim/adaptive.hpp"
#include "exitsim/coupling.hpp"
#include "exitsim/parallel.hpp"

namespace exitsim {

/// Neumaier-compensated sum in index order.
inline double compensated_sum(std::span<const double> xs) {
    double sum = 0.0, c = 0.0;
    for (double x : xs) {
        const double t = sum + x;
        c += std::abs(sum) >= std::abs(x) ? (sum - t) + x : (x - t) + sum;
        sum = t;
    }
    return sum + c;
}

struct McResult {
    double estimate = 0.0;
    double std_error = 0.0;
    std::size_t sample_count = 0;
};

/// Sample mean and standard error s / sqrt(M) (s with the M - 1 divisor).
inline McResult summarize(std::span<const double> xs) {
    if (xs.size() < 2) throw std::invalid_argument("at least two samples are required");
    const double n = static_cast<double>(xs.size());
    const double mean = compensated_sum(xs) / n;
    std::vector<double> dev(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) dev[i] = (xs[i] - mean) * (xs[i] - mean);
    const double var = compensated_sum(dev) / (n - 1.0);
    return {mean, std::sqrt(var / n), xs.size()};
}

enum class RateWeighting { unweighted, inverse_variance };

/// Least-squares fit log2(value_l) ~ intercept + slope * (-l), so a positive
/// slope is a decay rate in h = 2^-l.
struct RateFit {
    double slope = 0.0;
    double intercept = 0.0;
    std::vector<int> levels;
    std::vector<double> values;
    std::vector<double> residuals;
    double residual_norm = 0.0;
};

/// Returns nullopt for fewer than two levels or non-positive values.
/// With inverse_variance weighting, `std_errors` gives the standard error of
/// each value and log2-space weights are (value ln 2 / std_error)^2.
inline std::optional<RateFit> fit_rate(std::span<const int> levels, std::span<const double> values,
                                       RateWeighting weighting = RateWeighting::unweighted,
                                       std::span<const double> std_errors = {}) {
    if (levels.size() != values.size()) throw std::invalid_argument("levels and values differ in length");
    if (levels.size() < 2) return std::nullopt;
    if (std::any_of(values.begin(), values.end(), [](double v) { return !(v > 0.0); })) return std::nullopt;
    const std::size_t n = levels.size();
    std::vector<double> w(n, 1.0);
    if (weighting == RateWeighting::inverse_variance) {
        if (std_errors.size() != n) throw std::invalid_argument("weighted fit needs one standard error per level");
        for (std::size_t i = 0; i < n; ++i) {
            const double sl = std_errors[i] / (values[i] * std::log(2.0));
            w[i] = sl > 0.0 ? 1.0 / (sl * sl) : 1.0;
        }
    }
    double sw = 0, sx = 0, sy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sw += w[i];
        sx += w[i] * -levels[i];
        sy += w[i] * std::log2(values[i]);
    }
    const double mx = sx / sw, my = sy / sw;
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = -levels[i] - mx;
        sxx += w[i] * dx * dx;
        sxy += w[i] * dx * (std::log2(values[i]) - my);
    }
    RateFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    fit.levels.assign(levels.begin(), levels.end());
    fit.values.assign(values.begin(), values.end());
    double rss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = std::log2(values[i]) - (fit.intercept + fit.slope * -levels[i]);
        fit.residuals.push_back(r);
        rss += r * r;
    }
    fit.residual_norm = std::sqrt(rss);
    return fit;
}

/// Options shared by the multi-level estimators.
struct SchemeOptions {
    bool wiener_special = false;
    /// Replaces the model's diffusion bound in the threshold formulas.
    std::optional<double> diffusion_bound;
    unsigned workers = 1;
    RateWeighting weighting = RateWeighting::unweighted;
};

template <DiffusionModel Model>
AdaptiveScheme make_scheme(const Model& model, SchemeOrder order, double h, const SchemeOptions& opt = {}) {
    return AdaptiveScheme::make(order, h, opt.diffusion_bound.value_or(model.diffusion_bound()), Model::dim_state,
                                opt.wiener_special);
}

inline double level_step(int level) { return std::ldexp(1.0, -level); }

struct MeanExitEstimate {
    McResult nu;
    McResult cost;
    std::array<std::uint64_t, 3> steps_by_class{};
    std::size_t exited = 0;
};

/// Mean exit time over M independent paths; path i uses RngStream(seed, i).
template <DiffusionModel Model, class Dom>
MeanExitEstimate estimate_mean_exit(const Model& model, const Dom& domain, const AdaptiveScheme& scheme, double T,
                                    std::size_t M, std::uint64_t seed, unsigned workers = 1) {
    if (M < 2) throw std::invalid_argument("estimate_mean_exit needs M >= 2");
    validate_model(model, scheme.order);
    std::vector<double> nu(M), cost(M);
    std::vector<std::array<std::uint64_t, 3>> classes(M);
    std::vector<unsigned char> exited(M);
    parallel_for(M, workers, [&](std::size_t i) {
        RngStream rng(seed, i);
        const auto s = simulate_exit(model, domain, scheme, T, rng);
        nu[i] = s.nu;
        cost[i] = static_cast<double>(s.cost());
        classes[i] = s.steps_by_class;
        exited[i] = s.exited;
    });
    MeanExitEstimate out;
    out.nu = summarize(nu);
    out.cost = summarize(cost);
    for (std::size_t i = 0; i < M; ++i) {
        for (int c = 0; c < 3; ++c) out.steps_by_class[c] += classes[i][c];
        out.exited += exited[i];
    }
    return out;
}

/// Statistics of coupled pairs (nu_l, nu_{l-1}) for one level l.
struct LevelPairResult {
    int level = 0;
    double h = 0.0;
    McResult abs_diff;   // E|nu_l - nu_{l-1}|
    McResult diff;       // E[nu_l - nu_{l-1}]
    McResult nu_fine;    // E[nu_l]
    McResult nu_coarse;  // E[nu_{l-1}]
    double mean_cost_fine = 0.0;
    double mean_cost_coarse = 0.0;
};

/// Coupled differences for every adjacent pair in `levels` (consecutive,
/// increasing); the pair for level l uses seed mix_seed(seed, l).
template <DiffusionModel Model, class Dom>
std::vector<LevelPairResult> estimate_level_differences(const Model& model, const Dom& domain, SchemeOrder order,
                                                        std::span<const int> levels, double T, std::size_t M,
                                                        std::uint64_t seed, const SchemeOptions& opt = {}) {
    if (M < 2) throw std::invalid_argument("level differences need M >= 2");
    for (std::size_t k = 1; k < levels.size(); ++k)
        if (levels[k] != levels[k - 1] + 1) throw std::invalid_argument("levels must be consecutive and increasing");
    validate_model(model, order);
    std::vector<LevelPairResult> out;
    for (std::size_t k = 1; k < levels.size(); ++k) {
        const int l = levels[k];
        const auto fine = make_scheme(model, order, level_step(l), opt);
        const auto coarse = make_scheme(model, order, level_step(l - 1), opt);
        const std::uint64_t level_seed = mix_seed(seed, static_cast<std::uint64_t>(l));
        std::vector<double> nf(M), nc(M), cf(M), cc(M);
        parallel_for(M, opt.workers, [&](std::size_t i) {
            RngStream rng(level_seed, i);
            const auto p = simulate_coupled(model, domain, fine, coarse, T, rng);
            nf[i] = p.nu_fine;
            nc[i] = p.nu_coarse;
            cf[i] = static_cast<double>(p.cost_fine);
            cc[i] = static_cast<double>(p.cost_coarse);
        });
        std::vector<double> d(M), ad(M);
        for (std::size_t i = 0; i < M; ++i) {
            d[i] = nf[i] - nc[i];
            ad[i] = std::abs(d[i]);
        }
        LevelPairResult r;
        r.level = l;
        r.h = level_step(l);
        r.abs_diff = summarize(ad);
        r.diff = summarize(d);
        r.nu_fine = summarize(nf);
        r.nu_coarse = summarize(nc);
        r.mean_cost_fine = compensated_sum(cf) / static_cast<double>(M);
        r.mean_cost_coarse = compensated_sum(cc) / static_cast<double>(M);
        out.push_back(r);
    }
    return out;
}

struct StrongErrorResult {
    std::vector<LevelPairResult> pairs;
    std::optional<RateFit> fit;
};

inline std::optional<RateFit> fit_pairs(const std::vector<LevelPairResult>& pairs, bool absolute,
                                        RateWeighting weighting) {
    std::vector<int> ls;
    std::vector<double> vs, se;
    for (const auto& p : pairs) {
        ls.push_back(p.level);
        vs.push_back(absolute ? p.abs_diff.estimate : std::abs(p.diff.estimate));
        se.push_back(absolute ? p.abs_diff.std_error : p.diff.std_error);
    }
    return fit_rate(ls, vs, weighting, se);
}

/// E|nu_l - nu_{l-1}| per level pair plus its rate fit.
template <DiffusionModel Model, class Dom>
StrongErrorResult estimate_strong_error(const Model& model, const Dom& domain, SchemeOrder order,
                                        std::span<const int> levels, double T, std::size_t M, std::uint64_t seed,
                                        const SchemeOptions& opt = {}) {
    if (M < 100) throw std::invalid_argument("strong error estimation needs M >= 100");
    StrongErrorResult out;
    out.pairs = estimate_level_differences(model, domain, order, levels, T, M, seed, opt);
    out.fit = fit_pairs(out.pairs, true, opt.weighting);
    return out;
}

struct WeakLevel {
    int level = 0;
    double h = 0.0;
    McResult mean_nu;
    std::optional<double> absolute_error;  // |reference - E[nu_l]|
};

struct WeakErrorResult {
    std::vector<LevelPairResult> pairs;  // coupled |E[nu_l - nu_{l-1}]| from pairs[k].diff
    std::vector<WeakLevel> levels;
    std::optional<RateFit> coupled_fit;
    std::optional<RateFit> absolute_fit;
};

/// Derives per-level means and weak errors from coupled pairs. E[nu_l] is
/// taken from the fine member of pair l, and from the coarse member of the
/// first pair for the lowest level.
inline WeakErrorResult weak_from_pairs(std::vector<LevelPairResult> pairs, std::optional<double> reference,
                                       RateWeighting weighting = RateWeighting::unweighted) {
    WeakErrorResult out;
    if (!pairs.empty()) {
        WeakLevel first{pairs.front().level - 1, level_step(pairs.front().level - 1), pairs.front().nu_coarse, {}};
        out.levels.push_back(first);
        for (const auto& p : pairs) out.levels.push_back({p.level, p.h, p.nu_fine, {}});
    }
    std::vector<int> ls;
    std::vector<double> vs, se;
    for (auto& wl : out.levels) {
        if (!reference) continue;
        wl.absolute_error = std::abs(*reference - wl.mean_nu.estimate);
        ls.push_back(wl.level);
        vs.push_back(*wl.absolute_error);
        se.push_back(wl.mean_nu.std_error);
    }
    if (reference) out.absolute_fit = fit_rate(ls, vs, weighting, se);
    out.coupled_fit = fit_pairs(pairs, false, weighting);
    out.pairs = std::move(pairs);
    return out;
}

template <DiffusionModel Model, class Dom>
WeakErrorResult estimate_weak_error(const Model& model, const Dom& domain, SchemeOrder order,
                                    std::span<const int> levels, double T, std::size_t M, std::uint64_t seed,
                                    std::optional<double> reference = std::nullopt, const SchemeOptions& opt = {}) {
    return weak_from_pairs(estimate_level_differences(model, domain, order, levels, T, M, seed, opt), reference,
                           opt.weighting);
}

struct CostPoint {
    double h = 0.0;
    McResult cost;
    std::optional<double> ratio;  // cost(this h) / cost(previous h)
};

struct CostStudy {
    std::vector<CostPoint> points;
    /// Least-squares c in cost ~ c h^-1 log(1/h), with the centered R^2.
    double model_constant = 0.0;
    double r_squared = 0.0;
};

inline double cost_model_basis(double h) { return std::log(1.0 / h) / h; }

/// Mean cost (number of steps) per step parameter; h value k uses seed
/// mix_seed(seed, 1000 + k).
template <DiffusionModel Model, class Dom>
CostStudy estimate_cost(const Model& model, const Dom& domain, SchemeOrder order, std::span<const double> h_list,
                        double T, std::size_t M, std::uint64_t seed, const SchemeOptions& opt = {}) {
    if (M < 2) throw std::invalid_argument("cost estimation needs M >= 2");
    if (h_list.empty()) throw std::invalid_argument("empty h list");
    CostStudy out;
    for (std::size_t k = 0; k < h_list.size(); ++k) {
        const auto scheme = make_scheme(model, order, h_list[k], opt);
        const auto est = estimate_mean_exit(model, domain, scheme, T, M, mix_seed(seed, 1000 + k), opt.workers);
        CostPoint p{h_list[k], est.cost, std::nullopt};
        if (k > 0) p.ratio = est.cost.estimate / out.points.back().cost.estimate;
        out.points.push_back(p);
    }
    double num = 0, den = 0, mean = 0;
    for (const auto& p : out.points) {
        const double g = cost_model_basis(p.h);
        num += p.cost.estimate * g;
        den += g * g;
        mean += p.cost.estimate;
    }
    out.model_constant = num / den;
    mean /= static_cast<double>(out.points.size());
    double ss_res = 0, ss_tot = 0;
    for (const auto& p : out.points) {
        const double r = p.cost.estimate - out.model_constant * cost_model_basis(p.h);
        ss_res += r * r;
        ss_tot += (p.cost.estimate - mean) * (p.cost.estimate - mean);
    }
    out.r_squared = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
    return out;
}

}  // namespace exitsim
