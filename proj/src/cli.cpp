#include "dickecav/cli.hpp"

#include <bit>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "dickecav/analysis.hpp"
#include "dickecav/config.hpp"
#include "dickecav/correlations.hpp"
#include "dickecav/dicke.hpp"
#include "dickecav/error.hpp"
#include "dickecav/io.hpp"
#include "dickecav/meanfield.hpp"
#include "dickecav/oracle.hpp"
#include "dickecav/parallel.hpp"

#ifndef DICKECAV_VERSION
#define DICKECAV_VERSION "0.0.0"
#endif
#ifndef DICKECAV_CONFIG_DIR
#define DICKECAV_CONFIG_DIR "configs"
#endif

namespace dickecav::cli {

namespace fs = std::filesystem;
using config::Json;

namespace {

// Collects the files a pipeline writes; every file ends up in the manifest.
class Run {
public:
    explicit Run(fs::path dir) : dir_(std::move(dir)) {}

    io::CsvWriter csv(const std::string& name, const std::vector<std::string>& header) {
        files_.push_back(name);
        return io::CsvWriter(dir_ / name, header);
    }
    void json(const std::string& name, const Json& j) {
        files_.push_back(name);
        fs::create_directories(dir_);
        std::ofstream out(dir_ / name, std::ios::binary | std::ios::trunc);
        out << j.dump(2) << '\n';
        if (!out) throw IoError("cannot write " + (dir_ / name).string());
    }
    void count(long points) { steps_ += points; }

    const fs::path& dir() const { return dir_; }
    const std::vector<std::string>& files() const { return files_; }
    long steps() const { return steps_; }

private:
    fs::path dir_;
    std::vector<std::string> files_;
    long steps_ = 0;
};

using Pipeline = std::function<void(const Json&, Run&)>;

double gamma_of(const Json& c) { return config::number(c, "gamma_per_ns"); }

RateSet rates_of(const Json& c) {
    return RateSet(gamma_of(c), config::number(c, "chi_per_ns"), config::number(c, "eta_over_gamma") * gamma_of(c));
}

std::vector<double> eta_grid_of(const Json& c) {
    auto g = config::grid(c, "eta_over_gamma_grid");
    for (double& x : g) x *= gamma_of(c);
    return g;
}

std::vector<double> tau_grid_of(const Json& c) {
    const Json& t = c.at("tau_grid_ns");
    return correlations::default_tau_grid(config::number(t, "min"), config::number(t, "max"),
                                          config::integer(t, "per_decade"));
}

dicke::DickeLiouvillian liouvillian_of(const Json& c, int n, double chi) {
    const RateSet r(gamma_of(c), chi, config::number(c, "eta_over_gamma") * gamma_of(c));
    return dicke::build_liouvillian(n, config::number(c, "collective_rate_per_ns"), r,
                                    config::number(c, "collective_shift_rad_per_ns"));
}

meanfield::SweepParams sweep_params_of(const Json& c) {
    meanfield::SweepParams p;
    const double kappa = config::number(c, "kappa_per_ns");
    p.total_count = config::integer(c, "total_count");
    p.g = config::number(c, "g_rad_per_ns");
    p.rates = RateSet(gamma_of(c), config::number(c, "chi_per_ns"), gamma_of(c));
    p.cavity = CavityParams(0.0, kappa);
    p.n_bins = config::integer(c, "bins");
    p.span = config::number(c, "span");
    p.max_bin_width = config::number(c, "max_bin_width_over_kappa");
    const std::string conv = config::string(c, "frequency_convention");
    if (conv == "half_width")
        p.solver.frequency = meanfield::ComplexFrequency::half_width;
    else if (conv == "literal")
        p.solver.frequency = meanfield::ComplexFrequency::literal;
    else
        throw InvalidArgument("frequency_convention must be 'half_width' or 'literal'");
    return p;
}

Json optional_number(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

std::string optional_cell(const std::optional<double>& v) { return v ? io::format_number(*v) : ""; }

void write_populations(Run& run, const std::string& name, const dicke::DickeBlockState& rho) {
    auto csv = run.csv(name, {"J", "M", "population"});
    const auto p = rho.populations();
    const auto& levels = rho.basis().levels();
    for (std::size_t i = 0; i < p.size(); ++i) csv.row({levels[i].j(), levels[i].m(), p[i]});
    csv.close();
}

double excitations(const dicke::DickeBlockState& rho) {
    const auto p = rho.populations();
    const auto& levels = rho.basis().levels();
    double e = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) e += (levels[i].j() + levels[i].m()) * p[i];
    return e;
}

// ---- simulate ----

void simulate_dicke(const Json& c, Run& run) {
    const int n = config::integer(c, "n_emitters");
    const auto L = liouvillian_of(c, n, config::number(c, "chi_per_ns"));
    const auto ss = dicke::steady_state_with_residual(L);
    const double Gamma = L.rates().Gamma;
    write_populations(run, "populations.csv", ss.state);

    const auto t = config::grid(c, "t_grid_ns");
    const auto states = dicke::evolve(L, dicke::DickeBlockState::ground(L.basis()), t);
    auto csv = run.csv("evolution.csv", {"t_ns", "radiation_per_ns", "excitations"});
    for (std::size_t i = 0; i < t.size(); ++i)
        csv.row({t[i], dicke::radiation_rate(states[i], Gamma), excitations(states[i])});
    csv.close();
    run.json("summary.json", Json{{"n_emitters", n},
                                  {"radiation_per_ns", dicke::radiation_rate(ss.state, Gamma)},
                                  {"excitations", excitations(ss.state)},
                                  {"relative_residual", ss.residual}});
    run.count(1 + static_cast<long>(t.size()));
}

void simulate_oracle(const Json& c, Run& run) {
    const int n = config::integer(c, "n_emitters");
    const bool cavity = config::boolean(c, "include_cavity");
    const RateSet rates = rates_of(c);
    Json summary{{"n_emitters", n}, {"include_cavity", cavity}};
    oracle::DenseState emitters;
    if (cavity) {
        const EmitterEnsembleSpec spec({SubEnsemble(n, config::number(c, "emitter_detuning_rad_per_ns"),
                                                    config::number(c, "g_rad_per_ns"), rates)},
                                       CavityParams(0.0, config::number(c, "kappa_per_ns"), config::integer(c, "n_max")));
        const auto ss = oracle::oracle_steady_state_ex(oracle::build_full_system(spec, true));
        const oracle::SparseC a = ss.system.annihilation();
        const double photons = oracle::expectation(ss.state, oracle::SparseC(a.adjoint()) * a).real();
        summary["photon_number"] = photons;
        summary["radiation_per_ns"] = spec.cavity.kappa * photons;
        summary["fock_dim"] = ss.system.fock_dim();
        summary["relative_residual"] = ss.residual;
        emitters = oracle::partial_trace_cavity(ss.system, ss.state);
    } else {
        dicke::CollectiveRates r;
        r.Gamma = config::number(c, "collective_rate_per_ns");
        r.gamma = rates.gamma;
        r.chi = rates.chi;
        r.eta = rates.eta;
        r.delta_omega = config::number(c, "collective_shift_rad_per_ns");
        const auto system = oracle::build_collective_system(n, r);
        const auto ss = oracle::oracle_steady_state_ex(system);
        const oracle::SparseC Jm = system.collective_lowering();
        summary["radiation_per_ns"] = r.Gamma * oracle::expectation(ss.state, oracle::SparseC(Jm.adjoint()) * Jm).real();
        summary["relative_residual"] = ss.residual;
        emitters = ss.state;
        write_populations(run, "populations.csv", oracle::symmetrize_and_project(emitters, n));
    }
    // Emitter 0 is the most significant bit; bit value 1 is the excited state.
    std::vector<double> p(n + 1, 0.0);
    for (long i = 0; i < emitters.rows(); ++i) p[std::popcount(static_cast<unsigned long>(i))] += emitters(i, i).real();
    auto csv = run.csv("excitations.csv", {"excited", "probability"});
    for (int k = 0; k <= n; ++k) csv.row({static_cast<double>(k), p[k]});
    csv.close();
    run.json("summary.json", summary);
    run.count(1);
}

void simulate_meanfield(const Json& c, Run& run) {
    const auto p = sweep_params_of(c);
    const double kappa = p.cavity.kappa;
    const double eta = config::number(c, "eta_over_gamma") * gamma_of(c);
    const auto spec = meanfield::gaussian_ensemble(p, config::number(c, "w_over_kappa") * kappa,
                                                   config::number(c, "delta_over_kappa") * kappa, eta);
    const auto sol = meanfield::solve_cumulant_steady_state(spec, p.solver);
    auto csv = run.csv("subensembles.csv",
                       {"omega_rad_per_ns", "count", "sigma_z", "re_sigma_plus_a", "im_sigma_plus_a"});
    for (std::size_t k = 0; k < spec.sub_ensembles.size(); ++k)
        csv.row({spec.sub_ensembles[k].omega, static_cast<double>(spec.sub_ensembles[k].count), sol.state.sigma_z[k],
                 sol.state.sigma_plus_a[k].real(), sol.state.sigma_plus_a[k].imag()});
    csv.close();
    run.json("summary.json", Json{{"sub_ensembles", spec.sub_ensembles.size()},
                                  {"photon_number", sol.state.photon_number},
                                  {"radiation_per_ns", sol.radiation_rate},
                                  {"residual", sol.residual},
                                  {"stable", sol.stable},
                                  {"used_newton", sol.used_newton}});
    run.count(1);
}

// ---- g2 ----

Json features_json(const correlations::CorrelationTrace& trace) {
    try {
        const auto f = correlations::extract_features(trace);
        return Json{{"asymptote", f.asymptote},           {"peak_value", optional_number(f.peak_value)},
                    {"decay_time_ns", optional_number(f.decay_time)}, {"dip_value", optional_number(f.dip_value)},
                    {"rise_time_ns", optional_number(f.rise_time)}};
    } catch (const InvalidArgument& e) {
        return Json{{"error", e.what()}};
    }
}

void g2_model(const Json& c, Run& run) {
    const int n = config::integer(c, "n_emitters");
    const auto trace = correlations::g2_dicke(liouvillian_of(c, n, config::number(c, "chi_per_ns")), tau_grid_of(c));
    auto csv = run.csv("g2.csv", {"tau_ns", "g2"});
    for (std::size_t i = 0; i < trace.tau.size(); ++i) csv.row({trace.tau[i], trace.values[i]});
    csv.close();
    run.json("features.json", features_json(trace));
    run.count(static_cast<long>(trace.tau.size()));
}

// ---- fit ----

fs::path input_of(const Json& c) {
    const std::string in = config::string(c, "input");
    if (in.empty()) throw InvalidArgument("no input file (use --input)");
    return in;
}

Json fit_json(const analysis::FitResult& f) {
    Json params = Json::object();
    for (std::size_t i = 0; i < f.names.size(); ++i)
        params[f.names[i]] = {{"value", f.values[i]}, {"sigma", std::isfinite(f.sigma[i]) ? Json(f.sigma[i]) : Json(nullptr)}};
    return Json{{"parameters", params},
                {"residual_rms", f.residual_rms},
                {"reduced_chi2", f.reduced_chi2},
                {"evaluations", f.evaluations},
                {"status", f.status},
                {"ill_conditioned", f.ill_conditioned},
                {"condition_number", std::isfinite(f.condition_number) ? Json(f.condition_number) : Json(nullptr)}};
}

void fit_g2(const Json& c, Run& run) {
    const auto hist = io::load_histogram(input_of(c));
    const Json& init = c.at("initial_g2");
    analysis::G2FitModel m;
    m.a = config::number(init, "a");
    m.b = config::number(init, "b");
    m.tau1 = config::number(init, "tau1_ns");
    m.tau2 = config::number(init, "tau2_ns");
    m.c = config::number(init, "c");
    m.tau3 = config::number(init, "tau3_ns");
    m.irf_fwhm = config::number(init, "irf_fwhm_ns");
    analysis::G2FitOptions opts;
    opts.fit_tau3 = config::boolean(c, "fit_tau3");
    opts.fit_irf = config::boolean(c, "fit_irf");
    opts.plateau_counts = hist.raw_counts ? hist.plateau : 0.0;
    const double purity = config::number(c, "purity");
    const auto res = analysis::fit_g2(hist.trace, m, purity, opts);

    Json out = fit_json(res.fit);
    out["purity"] = purity;
    out["poisson_weighted"] = hist.raw_counts;
    out["corrected"] = {{"a", res.a_corrected}, {"b", res.b_corrected}, {"c", res.c_corrected}};
    out["measured_peak"] = res.measured_peak;
    out["deconvolved_peak"] = res.deconvolved_peak;
    out["intrinsic_peak"] = res.intrinsic_peak;
    if (res.model.a > 0.0) {
        const auto n = analysis::estimate_emitter_number(res.model.a, purity, res.fit.error("a"));
        out["emitter_number"] = {{"value", n.n}, {"sigma", n.sigma}, {"valid", n.valid}};
        if (n.valid) out["thermal_bunching_limit"] = analysis::thermal_bunching_limit(n.n);
    }
    run.json("fit_g2.json", out);
    auto csv = run.csv("fit_g2_curve.csv", {"tau_ns", "g2_data", "g2_fit"});
    for (std::size_t i = 0; i < hist.trace.tau.size(); ++i)
        csv.row({hist.trace.tau[i], hist.trace.values[i], analysis::g2_measured(res.model, hist.trace.tau[i])});
    csv.close();
    run.count(res.fit.evaluations);
}

void fit_power(const Json& c, Run& run) {
    const auto records = io::load_power_sweep(input_of(c));
    analysis::PowerLawOptions o;
    o.power_min = config::number(c, "power_min_uW");
    o.power_max = config::number(c, "power_max_uW");
    o.integration_time = config::number(c, "integration_time_s");
    const auto f = analysis::fit_power_law(records, o);
    run.json("fit_power.json", Json{{"exponent", f.exponent},
                                    {"exponent_sigma", f.exponent_error},
                                    {"log_prefactor", f.log_prefactor},
                                    {"points", f.points},
                                    {"channel", analysis::to_string(f.channel)}});
    run.count(1);
}

void fit_lifetime(const Json& c, Run& run) {
    const auto records = io::load_lifetimes(input_of(c));
    const auto f = analysis::fit_saturation_lifetime(records);
    Json out = fit_json(f.fit);
    out["tau0_ns"] = f.tau0;
    out["tau0_sigma_ns"] = f.tau0_error;
    if (const double ref = config::number(c, "reference_lifetime_ns"); ref > 0.0) {
        const auto p = analysis::purcell_factor(ref, f.tau0, config::number(c, "debye_waller"));
        out["purcell"] = {{"effective", p.effective}, {"ideal", p.ideal}};
    }
    run.json("fit_lifetime.json", out);
    run.count(f.fit.evaluations);
}

// ---- sweeps and figures ----

void write_pump_curves(Run& run, const std::string& name, const std::string& key,
                       const std::vector<std::pair<std::string, meanfield::PumpCurve>>& curves, double gamma) {
    auto csv = run.csv(name, {key, "eta_over_gamma", "I_rad", "local_slope"});
    for (const auto& [label, curve] : curves)
        for (std::size_t j = 0; j < curve.eta.size(); ++j)
            csv.row(std::vector<std::string>{label, io::format_number(curve.eta[j] / gamma),
                                             io::format_number(curve.radiation[j]), io::format_number(curve.slopes[j])});
    csv.close();
}

void dicke_pump_sweep(const Json& c, Run& run, const std::string& name) {
    const auto ns = config::integers(c, "n_list");
    const auto eta = eta_grid_of(c);
    const RateSet base = rates_of(c);
    const double Gamma = config::number(c, "collective_rate_per_ns");
    std::vector<std::vector<dicke::PumpPoint>> curves(ns.size());
    parallel::for_each_index(ns.size(), [&](std::size_t i) {
        curves[i] = dicke::pump_scaling_curve(ns[i], Gamma, base, eta);
    });
    auto csv = run.csv(name, {"N", "eta_over_gamma", "I_rad", "local_slope"});
    for (std::size_t i = 0; i < ns.size(); ++i)
        for (const auto& p : curves[i]) csv.row({static_cast<double>(ns[i]), p.eta_over_gamma, p.radiation, p.local_slope});
    csv.close();
    run.count(static_cast<long>(ns.size() * eta.size()));
}

void meanfield_width_sweep(const Json& c, Run& run, const std::string& name) {
    const auto p = sweep_params_of(c);
    auto w = config::numbers(c, "w_over_kappa_list");
    for (double& x : w) x *= p.cavity.kappa;
    const auto eta = eta_grid_of(c);
    const auto curves = meanfield::inhomogeneity_sweep(p, w, eta);
    std::vector<std::pair<std::string, meanfield::PumpCurve>> labelled;
    for (const auto& cv : curves) labelled.emplace_back(io::format_number(cv.w / p.cavity.kappa), cv);
    write_pump_curves(run, name, "w_over_kappa", labelled, gamma_of(c));
    run.count(static_cast<long>(w.size() * eta.size()));
}

void sweep(const Json& c, Run& run) {
    const std::string engine = config::string(c, "engine");
    if (engine == "dicke")
        dicke_pump_sweep(c, run, "sweep.csv");
    else if (engine == "meanfield")
        meanfield_width_sweep(c, run, "sweep.csv");
    else
        throw InvalidArgument("engine must be 'dicke' or 'meanfield'");
}

void fig4a(const Json& c, Run& run) {
    const auto L = liouvillian_of(c, config::integer(c, "n_emitters"), config::number(c, "chi_per_ns"));
    write_populations(run, "fig4a.csv", dicke::steady_state(L));
    run.count(1);
}

void fig4b(const Json& c, Run& run) { dicke_pump_sweep(c, run, "fig4b.csv"); }

void fig4c(const Json& c, Run& run) {
    const auto ns = config::integers(c, "n_list");
    const auto grid = tau_grid_of(c);
    const double chi = config::number(c, "chi_per_ns");
    std::vector<correlations::CorrelationTrace> traces(ns.size());
    parallel::for_each_index(ns.size(), [&](std::size_t i) { traces[i] = correlations::g2_dicke(liouvillian_of(c, ns[i], chi), grid); });
    auto csv = run.csv("fig4c.csv", {"N", "tau_ns", "g2"});
    for (std::size_t i = 0; i < ns.size(); ++i)
        for (std::size_t k = 0; k < grid.size(); ++k) csv.row({static_cast<double>(ns[i]), grid[k], traces[i].values[k]});
    csv.close();
    run.count(static_cast<long>(ns.size() * grid.size()));
}

void fig4d(const Json& c, Run& run) {
    const auto ns = config::integers(c, "n_list");
    const auto chis = config::numbers(c, "chi_list_per_ns");
    const auto grid = tau_grid_of(c);
    const std::size_t total = ns.size() * chis.size();
    std::vector<correlations::G2Features> feats(total);
    parallel::for_each_index(total, [&](std::size_t i) {
        const auto trace = correlations::g2_dicke(liouvillian_of(c, ns[i % ns.size()], chis[i / ns.size()]), grid);
        feats[i] = correlations::extract_features(trace);
    });
    auto csv = run.csv("fig4d.csv", {"chi_per_ns", "N", "peak_value", "decay_time_ns", "dip_value", "rise_time_ns"});
    for (std::size_t i = 0; i < total; ++i) {
        const auto& f = feats[i];
        csv.row(std::vector<std::string>{io::format_number(chis[i / ns.size()]), std::to_string(ns[i % ns.size()]),
                                         optional_cell(f.peak_value), optional_cell(f.decay_time),
                                         optional_cell(f.dip_value), optional_cell(f.rise_time)});
    }
    csv.close();
    run.count(static_cast<long>(total * grid.size()));
}

void fig4e(const Json& c, Run& run) { meanfield_width_sweep(c, run, "fig4e.csv"); }

void fig4f(const Json& c, Run& run) {
    const auto p = sweep_params_of(c);
    const double kappa = p.cavity.kappa;
    auto deltas = config::numbers(c, "delta_over_kappa_list");
    for (double& d : deltas) d *= kappa;
    const auto eta = eta_grid_of(c);
    const auto res = meanfield::detuning_sweep_and_average(p, config::number(c, "w_over_kappa") * kappa, deltas, eta,
                                                           rate_from_ghz_fwhm(config::number(c, "weight_fwhm_ghz")));
    std::vector<std::pair<std::string, meanfield::PumpCurve>> labelled;
    for (const auto& cv : res.curves) labelled.emplace_back(io::format_number(cv.delta / kappa), cv);
    labelled.emplace_back("weighted", res.averaged);
    write_pump_curves(run, "fig4f.csv", "delta_over_kappa", labelled, gamma_of(c));
    run.count(static_cast<long>(deltas.size() * eta.size()));
}

// ---- driver ----

struct Flags {
    std::string config_file;
    std::string out = "out";
    std::vector<std::string> set;
    std::optional<int> n;
    std::optional<std::string> input;
    std::optional<double> purity;
    std::optional<double> eta_over_gamma;
    std::optional<std::string> engine;
};

void add_common(CLI::App* leaf, Flags& f) {
    leaf->add_option("--config", f.config_file, "JSON config or a run manifest to replay");
    leaf->add_option("--set", f.set, "key=value override, value in JSON syntax (repeatable)")->allow_extra_args(false);
    leaf->add_option("--out", f.out, "output directory")->capture_default_str();
    leaf->add_option("--n", f.n, "number of emitters (n_emitters)");
    leaf->add_option("--input", f.input, "input file for fits");
    leaf->add_option("--purity", f.purity, "ZPL purity p in (0, 1]");
    leaf->add_option("--eta-over-gamma", f.eta_over_gamma, "pump rate in units of gamma");
    leaf->add_option("--engine", f.engine, "sweep engine: dicke or meanfield");
}

fs::path figure_config(const std::string& fig) {
    if (const char* dir = std::getenv("DICKECAV_CONFIG_DIR")) return fs::path(dir) / (fig + ".json");
    return fs::path(DICKECAV_CONFIG_DIR) / (fig + ".json");
}

Json resolve_config(const std::string& subcommand, const std::optional<std::string>& figure, const Flags& f) {
    Json cfg = config::defaults();
    fs::path file = f.config_file;
    if (file.empty() && figure) file = figure_config(*figure);
    if (!file.empty()) {
        const auto loaded = config::load_file(file);
        if (!loaded.subcommand.empty() && loaded.subcommand != subcommand)
            throw InvalidArgument("manifest was written by '" + loaded.subcommand + "', not '" + subcommand + "'");
        config::merge(cfg, loaded.config);
    }
    for (const auto& s : f.set) config::assign(cfg, s);
    if (f.n) cfg["n_emitters"] = *f.n;
    if (f.input) cfg["input"] = *f.input;
    if (f.purity) cfg["purity"] = *f.purity;
    if (f.eta_over_gamma) cfg["eta_over_gamma"] = *f.eta_over_gamma;
    if (f.engine) cfg["engine"] = *f.engine;
    return cfg;
}

void write_manifest(const std::string& subcommand, const Json& cfg, const Run& run, double seconds) {
    Json outputs = Json::array();
    for (const auto& name : run.files())
        outputs.push_back({{"file", name},
                           {"sha256", io::sha256_file(run.dir() / name)},
                           {"bytes", fs::file_size(run.dir() / name)}});
    const Json manifest{{"subcommand", subcommand},
                        {"tool_version", std::string("dickecav ") + DICKECAV_VERSION},
                        {"seed", cfg.at("seed")},
                        {"config", cfg},
                        {"wall_clock_s", seconds},
                        {"steps", run.steps()},
                        {"outputs", outputs}};
    std::ofstream out(run.dir() / "manifest.json", std::ios::binary | std::ios::trunc);
    out << manifest.dump(2) << '\n';
    if (!out) throw IoError("cannot write manifest");
}

int report(int code, const std::string& kind, const std::string& message) {
    std::cerr << Json{{"error", {{"kind", kind}, {"message", message}, {"exit_code", code}}}}.dump() << '\n';
    return code;
}

int code_of(const Error& e) {
    const std::string k = e.kind();
    if (k == "invalid_argument") return invalid_argument;
    if (k == "io") return io_error;
    if (k == "convergence") return convergence_error;
    if (k == "dimension_limit") return dimension_limit;
    if (k == "non_unique_steady_state") return non_unique_steady_state;
    if (k == "zero_rate") return zero_rate;
    return internal_error;
}

} // namespace

int run(const std::vector<std::string>& args) {
    CLI::App app{"Collective emission of emitter ensembles in a cavity: simulation, sweeps and fits", "dickecav"};
    app.set_version_flag("--version", std::string("dickecav ") + DICKECAV_VERSION);
    app.require_subcommand(1);
    Flags flags;

    struct Leaf {
        CLI::App* app;
        std::string name;
        std::optional<std::string> figure;
        Pipeline pipeline;
    };
    std::vector<Leaf> leaves;
    auto leaf = [&](CLI::App* parent, const std::string& name, const std::string& help, Pipeline p,
                    std::optional<std::string> figure = std::nullopt) {
        CLI::App* sub = parent->add_subcommand(name, help);
        add_common(sub, flags);
        const std::string full = parent == &app ? name : parent->get_name() + " " + name;
        leaves.push_back({sub, full, std::move(figure), std::move(p)});
    };

    CLI::App* simulate = app.add_subcommand("simulate", "steady states of one configuration");
    simulate->require_subcommand(1);
    leaf(simulate, "dicke", "identical emitters, eliminated cavity, collective basis", simulate_dicke);
    leaf(simulate, "oracle", "brute-force product basis, optionally with the cavity mode", simulate_oracle);
    leaf(simulate, "meanfield", "second-order cumulant steady state of a Gaussian ensemble", simulate_meanfield);
    CLI::App* g2 = app.add_subcommand("g2", "second-order correlation functions");
    g2->require_subcommand(1);
    leaf(g2, "model", "g2(tau) of the identical-emitter model and its features", g2_model);
    CLI::App* fit = app.add_subcommand("fit", "fits of measured data");
    fit->require_subcommand(1);
    leaf(fit, "g2", "g2 histogram with instrument response and purity correction", fit_g2);
    leaf(fit, "power", "power-law exponent of a power sweep", fit_power);
    leaf(fit, "lifetime", "saturation-corrected lifetime and Purcell factor", fit_lifetime);
    leaf(&app, "sweep", "pump sweeps over emitter numbers or ensemble widths", sweep);
    CLI::App* reproduce = app.add_subcommand("reproduce", "figure recipes from versioned configs");
    reproduce->require_subcommand(1);
    const std::vector<std::pair<std::string, Pipeline>> figures{{"fig4a", fig4a}, {"fig4b", fig4b}, {"fig4c", fig4c},
                                                                {"fig4d", fig4d}, {"fig4e", fig4e}, {"fig4f", fig4f}};
    for (const auto& [fig, p] : figures) leaf(reproduce, fig, "recipe " + fig, p, fig);

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return report(usage_error, "usage", e.what());
    }

    for (const auto& l : leaves) {
        if (!l.app->parsed()) continue;
        Run r(flags.out);
        // A failed run leaves no partial outputs behind.
        const auto discard = [&r] {
            std::error_code ec;
            for (const auto& name : r.files()) fs::remove(r.dir() / name, ec);
            if (!r.files().empty()) fs::remove(r.dir() / "manifest.json", ec);
        };
        try {
            const auto start = std::chrono::steady_clock::now();
            const Json cfg = resolve_config(l.name, l.figure, flags);
            l.pipeline(cfg, r);
            const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
            write_manifest(l.name, cfg, r, seconds);
            Json done{{"subcommand", l.name}, {"out", flags.out}, {"files", r.files()}};
            std::cout << done.dump() << '\n';
            return ok;
        } catch (const Error& e) {
            discard();
            return report(code_of(e), e.kind(), e.what());
        } catch (const nlohmann::json::exception& e) {
            discard();
            return report(invalid_argument, "invalid_argument", e.what());
        } catch (const fs::filesystem_error& e) {
            discard();
            return report(io_error, "io", e.what());
        } catch (const std::exception& e) {
            discard();
            return report(internal_error, "internal", e.what());
        }
    }
    return report(usage_error, "usage", "no subcommand");
}

} // namespace dickecav::cli
