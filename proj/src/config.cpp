#include "dickecav/config.hpp"

#include <cmath>
#include <fstream>

#include "dickecav/error.hpp"
#include "dickecav/model.hpp"

namespace dickecav::config {

namespace {

const Json& at(const Json& cfg, const std::string& key) {
    const auto it = cfg.find(key);
    if (it == cfg.end()) throw InvalidArgument("config: missing key '" + key + "'");
    return *it;
}

[[noreturn]] void wrong_type(const std::string& key, const char* want) {
    throw InvalidArgument("config: '" + key + "' must be " + want);
}

} // namespace

Json defaults() {
    const double k = defaults::kappa;
    return Json{
        {"seed", 0},
        {"n_emitters", 1},
        {"n_list", {1, 2, 10, 20, 40}},
        {"gamma_per_ns", defaults::gamma},
        {"chi_per_ns", defaults::identical_model_chi},
        {"chi_list_per_ns", {defaults::identical_model_chi}},
        {"eta_over_gamma", defaults::identical_model_eta / defaults::gamma},
        {"eta_over_gamma_grid", {{"min", 0.01}, {"max", 10.0}, {"points", 31}, {"log", true}}},
        {"collective_rate_per_ns", defaults::identical_model_Gamma},
        {"collective_shift_rad_per_ns", 0.0},
        {"kappa_per_ns", k},
        {"g_rad_per_ns", 0.9},
        {"emitter_detuning_rad_per_ns", 0.0},
        {"n_max", 5},
        {"include_cavity", true},
        {"tau_grid_ns", {{"min", 0.01}, {"max", 100.0}, {"per_decade", 40}}},
        {"t_grid_ns", {{"min", 0.0}, {"max", 100.0}, {"points", 51}, {"log", false}}},
        {"total_count", 500},
        {"w_over_kappa", 3.0},
        {"w_over_kappa_list", {1.0, 5.0, 20.0}},
        {"delta_over_kappa", 0.0},
        {"delta_over_kappa_list", {-20.0, -10.0, -5.0, -3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0, 5.0, 10.0, 20.0}},
        {"weight_fwhm_ghz", defaults::inhomogeneous_linewidth_ghz},
        {"bins", defaults::gaussian_bins},
        {"span", defaults::gaussian_span},
        {"max_bin_width_over_kappa", 1.0},
        {"frequency_convention", "half_width"},
        {"engine", "dicke"},
        {"input", ""},
        {"purity", 1.0},
        {"fit_tau3", false},
        {"fit_irf", false},
        {"initial_g2",
         {{"a", 0.1}, {"b", 0.1}, {"tau1_ns", 5.0}, {"tau2_ns", 50.0}, {"c", 0.3}, {"tau3_ns", 0.1}, {"irf_fwhm_ns", 0.4}}},
        {"power_min_uW", 0.0},
        {"power_max_uW", 1e300},
        {"integration_time_s", 0.0},
        {"reference_lifetime_ns", 0.0},
        {"debye_waller", 1.0},
    };
}

void merge(Json& base, const Json& patch) {
    if (!patch.is_object()) throw InvalidArgument("config must be a JSON object");
    for (const auto& [key, value] : patch.items()) {
        const auto it = base.find(key);
        if (it == base.end()) throw InvalidArgument("config: unknown key '" + key + "'");
        if (it->is_object() && value.is_object() && !value.contains("min"))
            merge(*it, value);
        else
            *it = value;
    }
}

Loaded load_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config " + path.string());
    Json j;
    try {
        j = Json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw InvalidArgument("config " + path.string() + ": " + e.what());
    }
    Loaded out;
    if (j.is_object() && j.contains("subcommand") && j.contains("config")) {
        out.subcommand = j.at("subcommand").get<std::string>();
        out.config = j.at("config");
    } else {
        out.config = std::move(j);
    }
    return out;
}

void assign(Json& cfg, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw InvalidArgument("expected key=value, got '" + assignment + "'");
    const std::string key = assignment.substr(0, eq);
    const std::string text = assignment.substr(eq + 1);
    Json value = Json::parse(text, nullptr, false);
    if (value.is_discarded()) value = text;
    // Build the nested patch for dotted keys.
    Json patch = value;
    std::string rest = key;
    std::vector<std::string> parts;
    for (std::size_t dot; (dot = rest.find('.')) != std::string::npos; rest = rest.substr(dot + 1))
        parts.push_back(rest.substr(0, dot));
    parts.push_back(rest);
    for (auto it = parts.rbegin(); it != parts.rend(); ++it) patch = Json{{*it, patch}};
    merge(cfg, patch);
}

double number(const Json& cfg, const std::string& key) {
    const Json& v = at(cfg, key);
    if (!v.is_number()) wrong_type(key, "a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) wrong_type(key, "finite");
    return d;
}

int integer(const Json& cfg, const std::string& key) {
    const Json& v = at(cfg, key);
    if (!v.is_number_integer()) wrong_type(key, "an integer");
    return v.get<int>();
}

bool boolean(const Json& cfg, const std::string& key) {
    const Json& v = at(cfg, key);
    if (!v.is_boolean()) wrong_type(key, "true or false");
    return v.get<bool>();
}

std::string string(const Json& cfg, const std::string& key) {
    const Json& v = at(cfg, key);
    if (!v.is_string()) wrong_type(key, "a string");
    return v.get<std::string>();
}

std::vector<double> numbers(const Json& cfg, const std::string& key) {
    const Json& v = at(cfg, key);
    if (!v.is_array() || v.empty()) wrong_type(key, "a non-empty list of numbers");
    std::vector<double> out;
    for (const auto& x : v) {
        if (!x.is_number()) wrong_type(key, "a non-empty list of numbers");
        out.push_back(x.get<double>());
    }
    return out;
}

std::vector<int> integers(const Json& cfg, const std::string& key) {
    const Json& v = at(cfg, key);
    if (!v.is_array() || v.empty()) wrong_type(key, "a non-empty list of integers");
    std::vector<int> out;
    for (const auto& x : v) {
        if (!x.is_number_integer()) wrong_type(key, "a non-empty list of integers");
        out.push_back(x.get<int>());
    }
    return out;
}

std::vector<double> grid(const Json& cfg, const std::string& key) {
    const Json& v = at(cfg, key);
    if (v.is_array()) return numbers(cfg, key);
    if (!v.is_object()) wrong_type(key, "a list or a {min, max, points} grid");
    const double lo = number(v, "min");
    const double hi = number(v, "max");
    const int n = integer(v, "points");
    const bool log = v.contains("log") && boolean(v, "log");
    if (n < 2 || !(hi > lo) || (log && !(lo > 0.0))) throw InvalidArgument("config: invalid grid '" + key + "'");
    std::vector<double> out;
    for (int i = 0; i < n; ++i) {
        const double f = static_cast<double>(i) / (n - 1);
        out.push_back(log ? lo * std::pow(hi / lo, f) : lo + f * (hi - lo));
    }
    out.back() = hi;
    return out;
}

} // namespace dickecav::config
