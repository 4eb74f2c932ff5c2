#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "declab/error.hpp"
#include "declab/experiments.hpp"

namespace {

using nlohmann::json;

enum Exit { pass = 0, fail = 1, usage = 2, numeric = 3 };

/// String-valued flags; each maps to the config key of the same name.
struct FlagSet {
    std::vector<std::pair<std::string, CLI::Option*>> options;
    std::vector<std::pair<std::string, CLI::Option*>> switches;
    std::map<std::string, std::unique_ptr<std::string>> values;

    void add(CLI::App& app, const std::string& key, const std::string& help) {
        auto& slot = values[key + "@" + app.get_name()];
        slot = std::make_unique<std::string>();
        options.emplace_back(key, app.add_option("--" + key, *slot, help));
    }
    void add_switch(CLI::App& app, const std::string& key, const std::string& help) {
        switches.emplace_back(key, app.add_flag("--" + key, help));
    }
    void overlay(json& j) const {
        for (const auto& [key, opt] : options)
            if (opt->count()) j[key] = opt->as<std::string>();
        for (const auto& [key, opt] : switches)
            if (opt->count()) j[key] = true;
    }
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"declab: decoupling, energy and Strichartz experiments"};
    app.require_subcommand(1);
    app.fallthrough();
    FlagSet flags;
    std::string config_path;
    app.add_option("--config", config_path, "JSON config; flags override its keys");
    flags.add(app, "out", "output directory for <kind>.csv and <kind>.json");
    flags.add(app, "workers", "threads inside one sweep point");
    flags.add(app, "jobs", "sweep points evaluated at once");
    flags.add(app, "seed", "seed for randomized audits");
    flags.add(app, "format", "stdout rendering: csv, json or md");

    struct Sub {
        CLI::App* app;
        std::string kind;
    };
    std::vector<Sub> subs;
    auto sub = [&](const std::string& name, const std::string& kind, const std::string& help) {
        subs.push_back({app.add_subcommand(name, help), kind});
        return subs.back().app;
    };

    auto* dec = sub("decouple", "decoupling-sweep", "decoupling ratios over a dyadic delta sweep");
    flags.add(*dec, "n", "ambient dimension");
    flags.add(*dec, "signature", "n - 1 nonzero entries, comma separated");
    flags.add(*dec, "p", "Lebesgue exponent");
    flags.add(*dec, "flavor", "outer norm: l2 or lp");
    flags.add(*dec, "m", "1 (linear) or n (multilinear)");
    flags.add(*dec, "delta", "comma list of dyadic scales");
    flags.add(*dec, "delta-max", "coarsest scale (2^-k, also written 2e-k)");
    flags.add(*dec, "delta-min", "finest scale");
    flags.add(*dec, "example", "surface or subspace");
    flags.add(*dec, "spacing", "grid spacing h");
    flags.add(*dec, "refine", "halve the grid until norms settle (true/false)");
    flags.add(*dec, "max-doublings", "refinement budget");

    auto* en = sub("energy", "energy-growth", "k-energy of moment-curve points");
    flags.add(*en, "n", "dimension of the curve");
    flags.add(*en, "k", "energy order");
    flags.add(*en, "curve", "point family (moment)");
    flags.add(*en, "N", "a..b dyadic, a list, or one value");
    flags.add(*en, "method", "hashed, moment or brute");

    auto* st = sub("strichartz", "strichartz-sweep", "space-time norms of torus Schroedinger evolutions");
    flags.add(*st, "n", "space-time dimension");
    flags.add(*st, "signature", "n - 1 nonzero entries");
    flags.add(*st, "p", "Lebesgue exponent");
    flags.add(*st, "N", "frequency cutoffs");
    flags.add(*st, "interval", "time interval lo,hi");
    flags.add(*st, "data", "auto, subspace or diagonal");
    flags.add(*st, "max-doublings", "refinement budget");

    auto* nu = sub("numerology", "numerology-table", "exact constants and bootstrap checks");
    flags.add(*nu, "n", "a..b or a list");
    flags.add(*nu, "p", "exponents (rationals or inf)");
    flags.add(*nu, "d", "hyperbolic index");
    flags.add(*nu, "alpha", "scale exponent");
    flags.add(*nu, "s0", "bootstrap depth");
    flags.add(*nu, "eps", "bootstrap epsilon");
    flags.add_switch(*nu, "critical", "print the critical index for n, d");
    flags.add_switch(*nu, "kappa", "print kappa for n, p");
    flags.add_switch(*nu, "gamma", "print the gamma bound for n, p");
    flags.add_switch(*nu, "threshold", "print the no-decoupling threshold for n, alpha");
    flags.add_switch(*nu, "bootstrap", "check the bootstrap contradiction for n, p, alpha, s0, eps");

    auto* ge = sub("geometry", "geometry-audit", "principal curvatures of random hyperplane sections");
    flags.add(*ge, "n", "a..b or a list");
    flags.add(*ge, "trials", "sections per n");

    auto* wi = sub("witness", "interpolation-witness", "failed interpolation measurement");
    flags.add(*wi, "n", "dimension (>= 3)");
    flags.add(*wi, "N", "dyadic scales");
    flags.add(*wi, "spacing", "grid spacing");

    for (auto* s : {dec, en, st, wi}) {
        flags.add(*s, "slope-min", "lower end of the slope bracket");
        flags.add(*s, "slope-max", "upper end of the slope bracket");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return usage;
    }

    const Sub* chosen = nullptr;
    for (const auto& s : subs)
        if (s.app->parsed()) chosen = &s;

    declab::ExperimentReport report;
    try {
        json j = json::object();
        if (!config_path.empty()) {
            std::ifstream in(config_path);
            if (!in) throw declab::ConfigError("cannot read config file " + config_path);
            try {
                j = json::parse(in);
            } catch (const json::parse_error& e) {
                throw declab::ConfigError(std::string("config file is not valid JSON: ") + e.what());
            }
            if (j.contains("kind") && j["kind"] != chosen->kind)
                throw declab::ConfigError("config kind '" + j["kind"].dump() + "' does not match the subcommand");
        }
        j["kind"] = chosen->kind;
        flags.overlay(j);
        const auto config = declab::config_from_json(j);
        report = declab::run(config);
        if (!config.out.empty()) declab::write_outputs(report, config.out);

        const bool explicit_format = j.contains("format");
        if (report.value && !explicit_format) std::cout << *report.value << "\n";
        else if (config.format == "csv") std::cout << declab::to_csv(report);
        else if (config.format == "json") std::cout << declab::to_json(report).dump(2) << "\n";
        else std::cout << declab::to_markdown(report);
    } catch (const declab::ConfigError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return usage;
    } catch (const declab::ContractError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return usage;
    } catch (const std::exception& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return numeric;
    }
    return report.pass ? pass : fail;
}
