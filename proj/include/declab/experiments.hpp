#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "declab/decoupling.hpp"
#include "declab/numerology.hpp"

namespace declab {

enum class ExperimentKind {
    decoupling_sweep,
    energy_growth,
    strichartz_sweep,
    numerology_table,
    geometry_audit,
    interpolation_witness,
};
std::string kind_name(ExperimentKind k);
ExperimentKind parse_kind(const std::string& name);

/// Validated parameters of one run. Config files use the CLI flag names
/// as keys (see config_from_json).
struct ExperimentConfig {
    ExperimentKind kind = ExperimentKind::decoupling_sweep;
    std::size_t n = 2;
    std::vector<double> signature;  ///< n - 1 entries
    std::vector<std::string> p;     ///< exponents as text ("6", "13/2", "inf")

    // Dyadic scale ranges, finest last.
    std::vector<double> deltas;
    std::vector<std::size_t> Ns;

    // decoupling-sweep
    OuterNorm flavor = OuterNorm::l2;
    std::size_t arity = 1;
    std::string example = "surface";  ///< surface | subspace
    double spacing = 0.25;
    bool refine = true;
    std::size_t max_doublings = 4;

    // energy-growth
    std::size_t k = 3;
    std::string curve = "moment";
    std::string method = "hashed";  ///< hashed | moment | brute

    // strichartz-sweep
    Interval interval{0, 1};
    std::string data = "auto";  ///< auto | subspace | diagonal

    // numerology-table
    std::vector<std::size_t> ns;
    std::string query;  ///< empty for the table; critical | kappa | gamma | threshold | bootstrap
    std::size_t d = 0;
    std::string alpha = "1/2";
    std::size_t s0 = 60;
    std::string eps = "1e-8";

    // geometry-audit
    std::size_t trials = 100;
    std::uint64_t seed = 1;

    /// Bracket on the fitted slope; unset sides take the kind's default.
    std::optional<double> slope_min;
    std::optional<double> slope_max;

    std::string out;             ///< output directory; empty writes nothing
    std::string format = "md";   ///< csv | json | md
    std::size_t workers = 1;     ///< inside one sweep point
    std::size_t jobs = 1;        ///< sweep points at once
};

/// Reads a config object; every key is optional except "kind". Ranges are
/// "a..b" (dyadic endpoints, every power of two in between), a comma list,
/// or a single value. Throws ConfigError on any invalid or unknown key.
ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ExperimentConfig& c);

/// Dyadic delta from text; "2e-k" and "2^-k" both mean 2^-k.
double parse_dyadic_delta(const std::string& text);

struct ExperimentReport {
    ExperimentConfig config;
    std::string schema;  ///< "declab.<kind>/1"
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;
    std::optional<ExponentFit> fit;
    std::optional<ExponentFit> second_fit;  ///< witness: right-hand side
    std::optional<double> predicted;
    double slope_min = 0;
    double slope_max = 0;
    bool pass = false;
    std::string verdict;
    /// Single-value answer (queries and one-point runs).
    std::optional<std::string> value;
    double wall_seconds = 0;
    nlohmann::json stats = nlohmann::json::array();  ///< per-row backend details
};

/// Executes the sweep. Rows depend only on the config, never on jobs or workers.
ExperimentReport run(const ExperimentConfig& config);

std::string to_csv(const ExperimentReport& r);
nlohmann::json to_json(const ExperimentReport& r);
std::string to_markdown(const ExperimentReport& r);
/// <dir>/<kind>.csv and <dir>/<kind>.json.
void write_outputs(const ExperimentReport& r, const std::string& dir);

}  // namespace declab
