// config.hpp: run configuration: built-in defaults < config file < command-line assignments
//
// Keys carry their unit (…_per_ns, …_rad_per_ns, …_ns, …_over_gamma, …_over_kappa).
// Unknown keys are rejected so a typo cannot silently fall back to a default.

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace dickecav::config {

using Json = nlohmann::ordered_json;

// Every key any pipeline reads, with the identical-emitter model and cavity defaults.
Json defaults();

// Overlays `patch` onto `base`. Nested objects merge key by key; throws
// InvalidArgument for keys absent from `base`.
void merge(Json& base, const Json& patch);

struct Loaded {
    Json config;
    std::string subcommand; // non-empty when the file was a run manifest
};

// A plain config object, or a run manifest whose "config" entry is used.
Loaded load_file(const std::filesystem::path& path);

// "key=value"; value is parsed as JSON, or taken as a string when that fails.
// Dotted keys address nested objects ("initial_g2.tau1_ns=4").
void assign(Json& cfg, const std::string& assignment);

double number(const Json& cfg, const std::string& key);
int integer(const Json& cfg, const std::string& key);
bool boolean(const Json& cfg, const std::string& key);
std::string string(const Json& cfg, const std::string& key);
std::vector<double> numbers(const Json& cfg, const std::string& key);
std::vector<int> integers(const Json& cfg, const std::string& key);

// An explicit list, or {"min", "max", "points", "log"} expanded to a grid.
std::vector<double> grid(const Json& cfg, const std::string& key);

} // namespace dickecav::config
