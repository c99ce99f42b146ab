// exitsim: command-line front end for mean exit time experiments.
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "exitsim/harness.hpp"

namespace {

struct Flags {
    std::string config;
    std::map<std::string, std::string> set;  // field -> raw value
    std::vector<std::string> params;
    bool wiener_special = false;
    bool gnuplot = false;
    bool pde_profile = false;
};

void add_common(CLI::App* sub, Flags& f) {
    sub->add_option("--config", f.config, "key = value configuration file")->check(CLI::ExistingFile);
    auto opt = [&](const char* flag, const char* key, const char* help) {
        sub->add_option_function<std::string>(flag, [&f, key](const std::string& v) { f.set[key] = v; }, help);
    };
    opt("--preset", "preset", "gbm1d, cosine1d, gbm2d, cosine2d or wiener1d");
    opt("--order", "order", "scheme order(s): 1, 1.5 or 1,1.5");
    opt("--levels", "levels", "levels l (h = 2^-l), e.g. 3..7 or 3,5,7");
    opt("--h-list", "h", "step parameters, e.g. 2^-4..2^-10 or 0.01,0.005");
    opt("--samples", "samples", "Monte Carlo sample count M");
    opt("--seed", "seed", "master seed");
    opt("--workers", "workers", "worker threads (results do not depend on it)");
    opt("--out", "out", "output directory");
    opt("--T", "T", "cut-off time");
    opt("--weighting", "weighting", "rate fit weighting: unweighted or inverse_variance");
    opt("--reference", "reference", "override the reference mean exit time");
    opt("--pde-nx", "pde_nx", "PDE grid nodes in space");
    opt("--pde-nt", "pde_nt", "PDE time steps");
    sub->add_option("--param", f.params, "model parameter override name=value (repeatable)");
    sub->add_flag("--wiener-special", f.wiener_special, "use the Wiener threshold sqrt(4 h log 1/h)");
    sub->add_flag("--gnuplot", f.gnuplot, "also write a gnuplot script");
    sub->add_flag("--pde-profile", f.pde_profile, "reference: also write u(0, x)");
}

exitsim::ExperimentConfig build_config(const Flags& f) {
    exitsim::ExperimentConfig cfg;
    if (!f.config.empty()) cfg = exitsim::load_config(f.config);
    for (const auto& [key, value] : f.set) exitsim::apply_setting(cfg, key, value);
    for (const auto& p : f.params) {
        const auto eq = p.find('=');
        if (eq == std::string::npos) throw exitsim::ConfigError(0, "param", "expected name=value, got '" + p + "'");
        exitsim::apply_setting(cfg, "param." + p.substr(0, eq), p.substr(eq + 1));
    }
    if (f.wiener_special) cfg.wiener_special = true;
    if (f.gnuplot) cfg.gnuplot = true;
    if (f.pde_profile) cfg.pde_profile = true;
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Adaptive-timestep Monte Carlo estimation of mean exit times"};
    app.set_version_flag("--version", std::string("exitsim ") + exitsim::kVersion);
    app.require_subcommand(1);

    Flags flags;
    std::string command;
    const std::pair<const char*, const char*> commands[] = {
        {"simulate", "estimate E[nu] for each order and step parameter"},
        {"convergence", "strong and weak errors over a level list with fitted slopes"},
        {"cost", "mean cost per step parameter, ratios and the h^-1 log(1/h) fit"},
        {"reference", "reference E[tau]: PDE solve in 1D, published constant in 2D"},
    };
    for (const auto& [name, help] : commands) {
        auto* sub = app.add_subcommand(name, help);
        add_common(sub, flags);
        sub->callback([&command, n = std::string(name)] { command = n; });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        const auto cfg = build_config(flags);
        const auto rep = exitsim::run_command(command, cfg);
        for (const auto& w : rep.warnings) std::cerr << "warning: " << w << "\n";
        for (const auto& p : rep.files) std::cout << p.string() << "\n";
    } catch (const exitsim::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
