#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "exitsim/estimators.hpp"
#include "exitsim/pde.hpp"
#include "exitsim/presets.hpp"

#ifndef EXITSIM_VERSION
#define EXITSIM_VERSION "0.1.0"
#endif

namespace exitsim {

inline constexpr const char* kVersion = EXITSIM_VERSION;

/// Configuration error with the offending line (0 when the value came from
/// the command line) and field name.
class ConfigError : public std::runtime_error {
public:
    ConfigError(int line, std::string field, const std::string& message)
        : std::runtime_error(format(line, field, message)), line_(line), field_(std::move(field)) {}

    int line() const { return line_; }
    const std::string& field() const { return field_; }

private:
    static std::string format(int line, const std::string& field, const std::string& message) {
        std::string out = line > 0 ? "line " + std::to_string(line) + ", " : std::string();
        return out + "field '" + field + "': " + message;
    }
    int line_;
    std::string field_;
};

struct ExperimentConfig {
    std::string preset = "gbm1d";
    ParamMap params;                       // preset overrides ("param.<name>")
    std::vector<SchemeOrder> orders{SchemeOrder::order1};
    std::vector<int> levels;               // h = 2^-l
    std::vector<double> h_list;            // explicit step parameters
    std::size_t samples = 1000;
    double T = 10.0;
    std::uint64_t seed = 1;
    unsigned workers = 1;
    std::string out_dir = ".";
    bool wiener_special = false;
    RateWeighting weighting = RateWeighting::unweighted;
    std::optional<double> reference;       // overrides the preset reference
    bool gnuplot = false;
    std::size_t pde_nx = 1201;
    std::size_t pde_nt = 2000;
    bool pde_profile = false;              // reference: also dump u(0, x)
};

namespace detail {

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(s);
    while (std::getline(in, item, sep)) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

inline double parse_double(const std::string& v, int line, const std::string& field) {
    std::size_t pos = 0;
    double out = 0;
    try {
        out = std::stod(v, &pos);
    } catch (const std::exception&) {
        throw ConfigError(line, field, "expected a number, got '" + v + "'");
    }
    if (pos != v.size()) throw ConfigError(line, field, "expected a number, got '" + v + "'");
    return out;
}

inline long long parse_integer(const std::string& v, int line, const std::string& field) {
    std::size_t pos = 0;
    long long out = 0;
    try {
        out = std::stoll(v, &pos);
    } catch (const std::exception&) {
        throw ConfigError(line, field, "expected an integer, got '" + v + "'");
    }
    if (pos != v.size()) throw ConfigError(line, field, "expected an integer, got '" + v + "'");
    return out;
}

inline bool parse_bool(const std::string& v, int line, const std::string& field) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError(line, field, "expected true or false, got '" + v + "'");
}

/// "3..7" or "3,4,5".
inline std::vector<int> parse_levels(const std::string& v, int line, const std::string& field) {
    std::vector<int> out;
    for (const auto& item : split(v, ',')) {
        const auto dots = item.find("..");
        if (dots == std::string::npos) {
            out.push_back(static_cast<int>(parse_integer(item, line, field)));
            continue;
        }
        const int a = static_cast<int>(parse_integer(trim(item.substr(0, dots)), line, field));
        const int b = static_cast<int>(parse_integer(trim(item.substr(dots + 2)), line, field));
        if (b < a) throw ConfigError(line, field, "descending range '" + item + "'");
        for (int l = a; l <= b; ++l) out.push_back(l);
    }
    if (out.empty()) throw ConfigError(line, field, "empty level list");
    for (std::size_t k = 1; k < out.size(); ++k)
        if (out[k] <= out[k - 1]) throw ConfigError(line, field, "levels must be strictly increasing");
    for (int l : out)
        if (l < 2 || l > 40) throw ConfigError(line, field, "level " + std::to_string(l) + " outside [2, 40]");
    return out;
}

/// A number or 2^-k, and ranges 2^-a..2^-b over consecutive powers.
inline std::vector<double> parse_h_list(const std::string& v, int line, const std::string& field) {
    auto power = [&](const std::string& s) -> std::optional<int> {
        if (s.rfind("2^", 0) != 0) return std::nullopt;
        return static_cast<int>(parse_integer(s.substr(2), line, field));
    };
    std::vector<double> out;
    for (const auto& item : split(v, ',')) {
        const auto dots = item.find("..");
        if (dots != std::string::npos) {
            const auto a = power(trim(item.substr(0, dots)));
            const auto b = power(trim(item.substr(dots + 2)));
            if (!a || !b) throw ConfigError(line, field, "ranges must be written 2^-a..2^-b");
            const int step = *b < *a ? -1 : 1;
            for (int e = *a;; e += step) {
                out.push_back(std::ldexp(1.0, e));
                if (e == *b) break;
            }
            continue;
        }
        const auto p = power(item);
        out.push_back(p ? std::ldexp(1.0, *p) : parse_double(item, line, field));
    }
    if (out.empty()) throw ConfigError(line, field, "empty h list");
    for (double h : out)
        if (!(h > 0.0) || h > 1.0 / std::numbers::e)
            throw ConfigError(line, field, "step parameter " + std::to_string(h) + " outside (0, 1/e]");
    return out;
}

inline std::vector<SchemeOrder> parse_orders(const std::string& v, int line, const std::string& field) {
    std::vector<SchemeOrder> out;
    for (const auto& item : split(v, ',')) {
        try {
            const auto o = parse_order(item);
            if (std::find(out.begin(), out.end(), o) == out.end()) out.push_back(o);
        } catch (const std::invalid_argument&) {
            throw ConfigError(line, field, "unknown order '" + item + "' (expected 1 or 1.5)");
        }
    }
    if (out.empty()) throw ConfigError(line, field, "no order given");
    return out;
}

}  // namespace detail

/// Applies one `key = value` setting. `line` is used for diagnostics only.
inline void apply_setting(ExperimentConfig& cfg, const std::string& key, const std::string& value, int line = 0) {
    using namespace detail;
    if (key.rfind("param.", 0) == 0) {
        const auto name = key.substr(6);
        if (name.empty()) throw ConfigError(line, key, "missing parameter name");
        cfg.params[name] = parse_double(value, line, key);
    } else if (key == "preset") {
        cfg.preset = value;
    } else if (key == "order" || key == "orders") {
        cfg.orders = parse_orders(value, line, key);
    } else if (key == "levels") {
        cfg.levels = parse_levels(value, line, key);
    } else if (key == "h" || key == "h_list") {
        cfg.h_list = parse_h_list(value, line, key);
    } else if (key == "samples" || key == "M") {
        const auto m = parse_integer(value, line, key);
        if (m < 1) throw ConfigError(line, key, "sample count must be at least 1");
        cfg.samples = static_cast<std::size_t>(m);
    } else if (key == "T") {
        cfg.T = parse_double(value, line, key);
        if (!(cfg.T > 0.0)) throw ConfigError(line, key, "cut-off time must be positive");
    } else if (key == "seed") {
        const auto s = parse_integer(value, line, key);
        if (s < 0) throw ConfigError(line, key, "seed must be non-negative");
        cfg.seed = static_cast<std::uint64_t>(s);
    } else if (key == "workers") {
        const auto w = parse_integer(value, line, key);
        if (w < 1 || w > 1024) throw ConfigError(line, key, "worker count must lie in [1, 1024]");
        cfg.workers = static_cast<unsigned>(w);
    } else if (key == "out") {
        cfg.out_dir = value;
    } else if (key == "wiener_special") {
        cfg.wiener_special = parse_bool(value, line, key);
    } else if (key == "weighting") {
        if (value == "unweighted") cfg.weighting = RateWeighting::unweighted;
        else if (value == "inverse_variance") cfg.weighting = RateWeighting::inverse_variance;
        else throw ConfigError(line, key, "expected unweighted or inverse_variance");
    } else if (key == "reference") {
        cfg.reference = parse_double(value, line, key);
    } else if (key == "gnuplot") {
        cfg.gnuplot = parse_bool(value, line, key);
    } else if (key == "pde_nx" || key == "pde_nt") {
        const auto n = parse_integer(value, line, key);
        if (n < 8) throw ConfigError(line, key, "PDE grid needs at least 8 points");
        (key == "pde_nx" ? cfg.pde_nx : cfg.pde_nt) = static_cast<std::size_t>(n);
    } else if (key == "pde_profile") {
        cfg.pde_profile = parse_bool(value, line, key);
    } else {
        throw ConfigError(line, key, "unknown setting");
    }
}

/// Checks cross-field invariants; throws ConfigError naming the field.
inline void validate_config(const ExperimentConfig& cfg) {
    try {
        make_problem(cfg.preset, cfg.params);
    } catch (const std::invalid_argument& e) {
        const std::string msg = e.what();
        const bool about_preset = msg.rfind("unknown preset", 0) == 0;
        throw ConfigError(0, about_preset ? "preset" : "param", msg);
    }
    if (cfg.wiener_special &&
        std::find(cfg.orders.begin(), cfg.orders.end(), SchemeOrder::order15) != cfg.orders.end())
        throw ConfigError(0, "wiener_special", "the Wiener threshold is defined for order 1 only");
}

/// Parses a flat `key = value` file. Blank lines and `#` comments are ignored.
inline ExperimentConfig parse_config(std::istream& in, ExperimentConfig cfg = {}) {
    std::string raw;
    int line = 0;
    while (std::getline(in, raw)) {
        ++line;
        const auto hash = raw.find('#');
        const auto text = detail::trim(hash == std::string::npos ? raw : raw.substr(0, hash));
        if (text.empty()) continue;
        const auto eq = text.find('=');
        if (eq == std::string::npos) throw ConfigError(line, text, "expected 'key = value'");
        const auto key = detail::trim(text.substr(0, eq));
        const auto value = detail::trim(text.substr(eq + 1));
        if (key.empty()) throw ConfigError(line, "", "missing key");
        if (value.empty()) throw ConfigError(line, key, "missing value");
        apply_setting(cfg, key, value, line);
    }
    return cfg;
}

inline ExperimentConfig load_config(const std::filesystem::path& path, ExperimentConfig cfg = {}) {
    std::ifstream in(path);
    if (!in) throw ConfigError(0, "config", "cannot open '" + path.string() + "'");
    return parse_config(in, std::move(cfg));
}

// ---------------------------------------------------------------------------
// Report writing

namespace detail {

inline std::string num(double v) {
    if (std::isnan(v)) return "nan";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string opt_num(const std::optional<double>& v) { return v ? num(*v) : std::string(); }

inline std::string join_levels(const std::vector<int>& ls) {
    std::string out;
    for (std::size_t k = 0; k < ls.size(); ++k) out += (k ? "," : "") + std::to_string(ls[k]);
    return out;
}

inline std::string join_h(const std::vector<double>& hs) {
    std::string out;
    for (std::size_t k = 0; k < hs.size(); ++k) out += (k ? "," : "") + num(hs[k]);
    return out;
}

inline std::string join_orders(const std::vector<SchemeOrder>& os) {
    std::string out;
    for (std::size_t k = 0; k < os.size(); ++k) out += (k ? "," : "") + std::string(to_string(os[k]));
    return out;
}

/// CSV file whose leading `#` lines carry everything needed to rerun it.
class CsvWriter {
public:
    CsvWriter(const std::filesystem::path& path, const std::string& command, const ExperimentConfig& cfg,
              const std::vector<std::string>& columns)
        : out_(path, std::ios::binary), path_(path) {
        if (!out_) throw std::runtime_error("cannot write '" + path.string() + "'");
        out_ << "# exitsim " << kVersion << "\n";
        out_ << "# command: " << command << "\n";
        out_ << "# preset: " << cfg.preset << "\n";
        std::string params;
        for (const auto& [k, v] : cfg.params) params += (params.empty() ? "" : ";") + k + "=" + num(v);
        out_ << "# params: " << params << "\n";
        out_ << "# orders: " << join_orders(cfg.orders) << "\n";
        out_ << "# levels: " << join_levels(cfg.levels) << "\n";
        out_ << "# h: " << join_h(cfg.h_list) << "\n";
        out_ << "# samples: " << cfg.samples << "\n";
        out_ << "# T: " << num(cfg.T) << "\n";
        out_ << "# seed: " << cfg.seed << "\n";
        out_ << "# wiener_special: " << (cfg.wiener_special ? "true" : "false") << "\n";
        out_ << "# weighting: " << (cfg.weighting == RateWeighting::unweighted ? "unweighted" : "inverse_variance")
             << "\n";
        if (cfg.reference) out_ << "# reference: " << num(*cfg.reference) << "\n";
        row(columns);
    }

    void row(const std::vector<std::string>& cells) {
        for (std::size_t k = 0; k < cells.size(); ++k) out_ << (k ? "," : "") << cells[k];
        out_ << "\n";
    }

    const std::filesystem::path& path() const { return path_; }

private:
    std::ofstream out_;
    std::filesystem::path path_;
};

inline void write_json(const std::filesystem::path& path, const nlohmann::ordered_json& j) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
    out << j.dump(2) << "\n";
}

inline void write_gnuplot(const std::filesystem::path& path, const std::string& body) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
    out << "set datafile separator ','\nset key autotitle columnhead\nset logscale xy 2\nset grid\n" << body;
}

inline nlohmann::ordered_json mc_json(const McResult& r) {
    nlohmann::ordered_json j;
    j["estimate"] = r.estimate;
    j["std_error"] = r.std_error;
    j["samples"] = r.sample_count;
    return j;
}

inline nlohmann::ordered_json fit_json(const std::optional<RateFit>& f) {
    if (!f) return nullptr;
    nlohmann::ordered_json j;
    j["slope"] = f->slope;
    j["intercept"] = f->intercept;
    j["residual_norm"] = f->residual_norm;
    j["levels"] = f->levels;
    j["values"] = f->values;
    j["residuals"] = f->residuals;
    return j;
}

inline nlohmann::ordered_json config_json(const ExperimentConfig& cfg) {
    nlohmann::ordered_json j;
    j["preset"] = cfg.preset;
    j["params"] = nlohmann::ordered_json::object();
    for (const auto& [k, v] : cfg.params) j["params"][k] = v;
    std::vector<std::string> orders;
    for (auto o : cfg.orders) orders.emplace_back(to_string(o));
    j["orders"] = orders;
    j["levels"] = cfg.levels;
    j["h"] = cfg.h_list;
    j["samples"] = cfg.samples;
    j["T"] = cfg.T;
    j["seed"] = cfg.seed;
    j["workers"] = cfg.workers;
    j["wiener_special"] = cfg.wiener_special;
    return j;
}

/// Step parameters for simulate: explicit h list, else 2^-l per level, else 2^-6.
inline std::vector<double> simulate_steps(const ExperimentConfig& cfg) {
    if (!cfg.h_list.empty()) return cfg.h_list;
    std::vector<double> out;
    for (int l : cfg.levels) out.push_back(level_step(l));
    if (out.empty()) out.push_back(level_step(6));
    return out;
}

inline SchemeOptions scheme_options(const ExperimentConfig& cfg) {
    SchemeOptions o;
    o.wiener_special = cfg.wiener_special;
    o.workers = cfg.workers;
    o.weighting = cfg.weighting;
    return o;
}

template <class Prob>
std::optional<double> reference_for(const ExperimentConfig& cfg, const Prob& prob) {
    if (cfg.reference) return cfg.reference;
    if (prob.reference) return prob.reference->value;
    return std::nullopt;
}

}  // namespace detail

/// Files written by a command and any warnings raised.
struct CommandReport {
    std::vector<std::filesystem::path> files;
    std::vector<std::string> warnings;
    nlohmann::ordered_json summary;
};

/// Mean exit time per (order, h). Writes mean_exit.csv and summary.json, and
/// trace.csv with the full step ledger when M = 1.
inline CommandReport cmd_simulate(const ExperimentConfig& cfg) {
    using namespace detail;
    validate_config(cfg);
    const auto out = std::filesystem::path(cfg.out_dir);
    std::filesystem::create_directories(out);
    const auto steps = simulate_steps(cfg);
    const auto started = std::chrono::steady_clock::now();
    CommandReport rep;
    nlohmann::ordered_json results = nlohmann::ordered_json::array();

    CsvWriter csv(out / "mean_exit.csv", "simulate", cfg,
                  {"order", "h", "samples", "mean_nu", "std_error", "ci95_low", "ci95_high", "mean_cost",
                   "cost_std_error", "steps_h", "steps_h2", "steps_h3", "exited", "reference"});
    std::visit(
        [&](const auto& prob) {
            const auto ref = reference_for(cfg, prob);
            const auto opt = scheme_options(cfg);
            for (auto order : cfg.orders) {
                validate_model(prob.model, order);
                for (double h : steps) {
                    const auto scheme = make_scheme(prob.model, order, h, opt);
                    McResult nu, cost;
                    std::array<std::uint64_t, 3> classes{};
                    std::size_t exited = 0;
                    if (cfg.samples == 1) {
                        CsvWriter trace(out / "trace.csv", "simulate", cfg,
                                        {"step", "t", "dt", "class", "distance", "state"});
                        RngStream rng(cfg.seed, 0);
                        const auto s = simulate_exit(prob.model, prob.domain, scheme, cfg.T, rng,
                                                     [&](std::uint64_t n, double t, double dt, StepClass c,
                                                         double dist, const auto& x) {
                                                         std::string state;
                                                         for (std::size_t i = 0; i < x.size(); ++i)
                                                             state += (i ? ";" : "") + num(x[i]);
                                                         trace.row({std::to_string(n), num(t), num(dt),
                                                                    std::to_string(static_cast<int>(c)), num(dist),
                                                                    state});
                                                     });
                        nu = {s.nu, NAN, 1};
                        cost = {static_cast<double>(s.cost()), NAN, 1};
                        classes = s.steps_by_class;
                        exited = s.exited;
                        if (std::find(rep.files.begin(), rep.files.end(), trace.path()) == rep.files.end())
                            rep.files.push_back(trace.path());
                        if (cfg.orders.size() * steps.size() > 1)
                            rep.warnings.push_back("trace.csv holds the last (order, h) combination only");
                    } else {
                        const auto est =
                            estimate_mean_exit(prob.model, prob.domain, scheme, cfg.T, cfg.samples, cfg.seed,
                                               cfg.workers);
                        nu = est.nu;
                        cost = est.cost;
                        classes = est.steps_by_class;
                        exited = est.exited;
                    }
                    const double lo = nu.estimate - 1.96 * nu.std_error, hi = nu.estimate + 1.96 * nu.std_error;
                    csv.row({std::string(to_string(order)), num(h), std::to_string(cfg.samples), num(nu.estimate),
                             num(nu.std_error), num(lo), num(hi), num(cost.estimate), num(cost.std_error),
                             std::to_string(classes[0]), std::to_string(classes[1]), std::to_string(classes[2]),
                             std::to_string(exited), opt_num(ref)});
                    nlohmann::ordered_json r;
                    r["order"] = std::string(to_string(order));
                    r["h"] = h;
                    r["mean_nu"] = mc_json(nu);
                    if (std::isnan(nu.std_error)) r["mean_nu"]["std_error"] = nullptr;
                    r["ci95"] = cfg.samples > 1 ? nlohmann::ordered_json{lo, hi} : nlohmann::ordered_json(nullptr);
                    r["mean_cost"] = cost.estimate;
                    r["steps_by_class"] = {{"h", classes[0]}, {"h2", classes[1]}, {"h3", classes[2]}};
                    r["exited_fraction"] = static_cast<double>(exited) / static_cast<double>(cfg.samples);
                    r["reference"] = ref ? nlohmann::ordered_json(*ref) : nlohmann::ordered_json(nullptr);
                    results.push_back(r);
                }
            }
        },
        make_problem(cfg.preset, cfg.params));
    rep.files.insert(rep.files.begin(), csv.path());

    rep.summary["command"] = "simulate";
    rep.summary["version"] = kVersion;
    rep.summary["config"] = config_json(cfg);
    rep.summary["results"] = results;
    rep.summary["elapsed_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    write_json(out / "summary.json", rep.summary);
    rep.files.push_back(out / "summary.json");
    return rep;
}

/// Strong and weak errors over the level list for every requested order.
/// Writes rates.csv (per level), rate_fits.csv and summary.json.
inline CommandReport cmd_convergence(const ExperimentConfig& cfg) {
    using namespace detail;
    validate_config(cfg);
    if (cfg.levels.empty()) throw ConfigError(0, "levels", "convergence needs a level list");
    const auto out = std::filesystem::path(cfg.out_dir);
    std::filesystem::create_directories(out);
    const auto started = std::chrono::steady_clock::now();
    CommandReport rep;
    nlohmann::ordered_json per_order = nlohmann::ordered_json::array();

    CsvWriter rates(out / "rates.csv", "convergence", cfg,
                    {"order", "level", "h", "samples", "strong", "strong_std_error", "weak_coupled",
                     "weak_coupled_std_error", "mean_nu", "mean_nu_std_error", "weak_absolute", "mean_cost_fine",
                     "mean_cost_coarse"});
    CsvWriter fits(out / "rate_fits.csv", "convergence", cfg,
                   {"order", "quantity", "slope", "intercept", "residual_norm", "levels"});
    const bool single = cfg.levels.size() == 1;
    if (single) rep.warnings.push_back("single level requested: per-level values only, no rate fit");

    std::visit(
        [&](const auto& prob) {
            const auto ref = reference_for(cfg, prob);
            const auto opt = scheme_options(cfg);
            for (auto order : cfg.orders) {
                validate_model(prob.model, order);
                const std::string o(to_string(order));
                nlohmann::ordered_json entry;
                entry["order"] = o;
                if (single) {
                    const int l = cfg.levels.front();
                    const auto est = estimate_mean_exit(prob.model, prob.domain,
                                                        make_scheme(prob.model, order, level_step(l), opt), cfg.T,
                                                        cfg.samples, mix_seed(cfg.seed, static_cast<std::uint64_t>(l)),
                                                        cfg.workers);
                    std::optional<double> abs_err;
                    if (ref) abs_err = std::abs(*ref - est.nu.estimate);
                    rates.row({o, std::to_string(l), num(level_step(l)), std::to_string(cfg.samples), "", "", "", "",
                               num(est.nu.estimate), num(est.nu.std_error), opt_num(abs_err),
                               num(est.cost.estimate), ""});
                    entry["levels"] = {{{"level", l}, {"mean_nu", mc_json(est.nu)}}};
                    entry["strong_fit"] = nullptr;
                    entry["weak_coupled_fit"] = nullptr;
                    entry["weak_absolute_fit"] = nullptr;
                    per_order.push_back(entry);
                    continue;
                }
                if (cfg.samples < 100) throw ConfigError(0, "samples", "convergence studies need at least 100 samples");
                auto pairs = estimate_level_differences(prob.model, prob.domain, order, cfg.levels, cfg.T,
                                                        cfg.samples, cfg.seed, opt);
                const auto strong = fit_pairs(pairs, true, cfg.weighting);
                const auto weak = weak_from_pairs(pairs, ref, cfg.weighting);
                nlohmann::ordered_json levels = nlohmann::ordered_json::array();
                for (std::size_t k = 0; k < weak.levels.size(); ++k) {
                    const auto& wl = weak.levels[k];
                    std::vector<std::string> row{o, std::to_string(wl.level), num(wl.h), std::to_string(cfg.samples)};
                    nlohmann::ordered_json lj;
                    lj["level"] = wl.level;
                    lj["h"] = wl.h;
                    if (k == 0) {
                        row.insert(row.end(), {"", "", "", ""});
                    } else {
                        const auto& p = weak.pairs[k - 1];
                        row.insert(row.end(), {num(p.abs_diff.estimate), num(p.abs_diff.std_error),
                                               num(std::abs(p.diff.estimate)), num(p.diff.std_error)});
                        lj["strong"] = mc_json(p.abs_diff);
                        lj["weak_coupled"] = mc_json(p.diff);
                        lj["weak_coupled"]["estimate"] = std::abs(p.diff.estimate);
                    }
                    row.push_back(num(wl.mean_nu.estimate));
                    row.push_back(num(wl.mean_nu.std_error));
                    row.push_back(opt_num(wl.absolute_error));
                    const auto& src = weak.pairs[k == 0 ? 0 : k - 1];
                    row.push_back(num(k == 0 ? src.mean_cost_coarse : src.mean_cost_fine));
                    row.push_back(k == 0 ? "" : num(src.mean_cost_coarse));
                    rates.row(row);
                    lj["mean_nu"] = mc_json(wl.mean_nu);
                    lj["weak_absolute"] =
                        wl.absolute_error ? nlohmann::ordered_json(*wl.absolute_error) : nlohmann::ordered_json(nullptr);
                    levels.push_back(lj);
                }
                auto fit_row = [&](const char* what, const std::optional<RateFit>& f) {
                    if (!f) {
                        fits.row({o, what, "", "", "", ""});
                        return;
                    }
                    std::string ls;
                    for (std::size_t k = 0; k < f->levels.size(); ++k) ls += (k ? ";" : "") + std::to_string(f->levels[k]);
                    fits.row({o, what, num(f->slope), num(f->intercept), num(f->residual_norm), ls});
                };
                fit_row("strong", strong);
                fit_row("weak_coupled", weak.coupled_fit);
                if (ref) fit_row("weak_absolute", weak.absolute_fit);
                if (!strong) rep.warnings.push_back("order " + o + ": strong errors not fittable (fewer than two positive values)");
                entry["levels"] = levels;
                entry["strong_fit"] = fit_json(strong);
                entry["weak_coupled_fit"] = fit_json(weak.coupled_fit);
                entry["weak_absolute_fit"] = fit_json(weak.absolute_fit);
                per_order.push_back(entry);
            }
            rep.summary["reference"] = ref ? nlohmann::ordered_json(*ref) : nlohmann::ordered_json(nullptr);
        },
        make_problem(cfg.preset, cfg.params));

    rep.files = {rates.path(), fits.path()};
    rep.summary["command"] = "convergence";
    rep.summary["version"] = kVersion;
    rep.summary["config"] = config_json(cfg);
    rep.summary["orders"] = per_order;
    rep.summary["warnings"] = rep.warnings;
    rep.summary["elapsed_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    write_json(out / "summary.json", rep.summary);
    rep.files.push_back(out / "summary.json");
    if (cfg.gnuplot) {
        write_gnuplot(out / "rates.gp",
                      "set xlabel 'h'\nset ylabel 'error'\n"
                      "plot 'rates.csv' using 3:5 with linespoints title 'E|nu_l - nu_{l-1}|', \\\n"
                      "     'rates.csv' using 3:7 with linespoints title '|E[nu_l - nu_{l-1}]|', \\\n"
                      "     'rates.csv' using 3:11 with linespoints title '|E[tau] - E[nu_l]|'\n");
        rep.files.push_back(out / "rates.gp");
    }
    return rep;
}

/// Mean cost per step parameter, successive ratios and the least-squares fit
/// c h^-1 log(1/h). Writes cost.csv and summary.json.
inline CommandReport cmd_cost(const ExperimentConfig& cfg) {
    using namespace detail;
    validate_config(cfg);
    ExperimentConfig c = cfg;
    if (c.h_list.empty()) {
        for (int l : cfg.levels) c.h_list.push_back(level_step(l));
        if (c.h_list.empty())
            for (int l = 4; l <= 10; ++l) c.h_list.push_back(level_step(l));
    }
    if (c.samples < 2) throw ConfigError(0, "samples", "cost estimation needs at least 2 samples");
    const auto out = std::filesystem::path(cfg.out_dir);
    std::filesystem::create_directories(out);
    const auto started = std::chrono::steady_clock::now();
    CommandReport rep;
    nlohmann::ordered_json per_order = nlohmann::ordered_json::array();
    if (c.h_list.size() == 1) rep.warnings.push_back("single step parameter: costs only, no ratios");

    CsvWriter csv(out / "cost.csv", "cost", c,
                  {"order", "h", "samples", "mean_cost", "std_error", "ratio", "model_cost", "h_inv_log_h_inv"});
    std::visit(
        [&](const auto& prob) {
            const auto opt = scheme_options(c);
            for (auto order : c.orders) {
                validate_model(prob.model, order);
                const std::string o(to_string(order));
                const auto study = estimate_cost(prob.model, prob.domain, order, c.h_list, c.T, c.samples, c.seed, opt);
                nlohmann::ordered_json pts = nlohmann::ordered_json::array();
                for (const auto& p : study.points) {
                    const double basis = cost_model_basis(p.h);
                    csv.row({o, num(p.h), std::to_string(c.samples), num(p.cost.estimate), num(p.cost.std_error),
                             opt_num(p.ratio), num(study.model_constant * basis), num(basis)});
                    nlohmann::ordered_json pj;
                    pj["h"] = p.h;
                    pj["mean_cost"] = mc_json(p.cost);
                    pj["ratio"] = p.ratio ? nlohmann::ordered_json(*p.ratio) : nlohmann::ordered_json(nullptr);
                    pts.push_back(pj);
                }
                nlohmann::ordered_json e;
                e["order"] = o;
                e["points"] = pts;
                e["model_constant"] = study.model_constant;
                e["r_squared"] = study.points.size() > 1 ? nlohmann::ordered_json(study.r_squared)
                                                         : nlohmann::ordered_json(nullptr);
                per_order.push_back(e);
            }
        },
        make_problem(c.preset, c.params));

    rep.files = {csv.path()};
    rep.summary["command"] = "cost";
    rep.summary["version"] = kVersion;
    rep.summary["config"] = config_json(c);
    rep.summary["orders"] = per_order;
    rep.summary["warnings"] = rep.warnings;
    rep.summary["elapsed_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    write_json(out / "summary.json", rep.summary);
    rep.files.push_back(out / "summary.json");
    if (cfg.gnuplot) {
        write_gnuplot(out / "cost.gp",
                      "set xlabel 'h'\nset ylabel 'mean cost'\n"
                      "plot 'cost.csv' using 2:4 with linespoints title 'E[cost]', \\\n"
                      "     'cost.csv' using 2:7 with lines title 'c h^{-1} log(1/h)'\n");
        rep.files.push_back(out / "cost.gp");
    }
    return rep;
}

/// Reference mean exit time: PDE solve for one-dimensional presets, the
/// published constant for two-dimensional ones. Writes reference.csv (and
/// profile.csv with u(0, x) when pde_profile is set).
inline CommandReport cmd_reference(const ExperimentConfig& cfg) {
    using namespace detail;
    validate_config(cfg);
    const auto out = std::filesystem::path(cfg.out_dir);
    std::filesystem::create_directories(out);
    CommandReport rep;
    CsvWriter csv(out / "reference.csv", "reference", cfg,
                  {"preset", "x0", "value", "method", "nx", "nt", "published", "source"});
    std::visit(
        [&](const auto& prob) {
            using Model = typename std::decay_t<decltype(prob)>::model_type;
            std::string x0;
            for (std::size_t i = 0; i < Model::dim_state; ++i) x0 += (i ? ";" : "") + num(prob.model.x0()[i]);
            const std::string published = prob.reference ? num(prob.reference->value) : "";
            const std::string source = prob.reference ? prob.reference->source : "";
            if constexpr (Model::dim_state == 1 && Model::dim_noise == 1) {
                const auto g = solve_mean_exit_1d(prob.model, prob.domain, cfg.T, cfg.pde_nx, cfg.pde_nt);
                const double value = g.value_at(prob.model.x0()[0]);
                csv.row({prob.name, x0, num(value), "feynman-kac crank-nicolson", std::to_string(cfg.pde_nx),
                         std::to_string(cfg.pde_nt), published, source});
                if (g.min_value < 0.0) rep.warnings.push_back("discrete maximum principle violated: min u = " + num(g.min_value));
                if (cfg.pde_profile) {
                    CsvWriter prof(out / "profile.csv", "reference", cfg, {"x", "u"});
                    for (std::size_t k = 0; k < g.x.size(); ++k) prof.row({num(g.x[k]), num(g.u0[k])});
                    rep.files.push_back(prof.path());
                }
                rep.summary["value"] = value;
                rep.summary["method"] = "pde";
            } else {
                if (!prob.reference)
                    throw std::invalid_argument("no PDE solver for " + std::to_string(Model::dim_state) +
                                                "-dimensional presets and no published value for modified parameters");
                csv.row({prob.name, x0, num(prob.reference->value), "published constant (not recomputed)", "", "",
                         published, source});
                rep.summary["value"] = prob.reference->value;
                rep.summary["method"] = "published";
            }
            rep.summary["published"] = prob.reference ? nlohmann::ordered_json(prob.reference->value)
                                                      : nlohmann::ordered_json(nullptr);
            rep.summary["source"] = source;
        },
        make_problem(cfg.preset, cfg.params));
    rep.files.insert(rep.files.begin(), csv.path());
    rep.summary["command"] = "reference";
    rep.summary["version"] = kVersion;
    rep.summary["config"] = config_json(cfg);
    write_json(out / "summary.json", rep.summary);
    rep.files.push_back(out / "summary.json");
    return rep;
}

inline CommandReport run_command(const std::string& command, const ExperimentConfig& cfg) {
    if (command == "simulate") return cmd_simulate(cfg);
    if (command == "convergence") return cmd_convergence(cfg);
    if (command == "cost") return cmd_cost(cfg);
    if (command == "reference") return cmd_reference(cfg);
    throw ConfigError(0, "command", "unknown command '" + command + "'");
}

}  // namespace exitsim
