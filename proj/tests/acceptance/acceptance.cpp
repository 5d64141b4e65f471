// Acceptance checks: one PASS/FAIL line per criterion. With an argument, runs
// only the listed criteria (acceptance 3 5). Exit status is nonzero if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "dickecav/analysis.hpp"
#include "dickecav/cli.hpp"
#include "dickecav/config.hpp"
#include "dickecav/dicke.hpp"
#include "dickecav/io.hpp"
#include "dickecav/oracle.hpp"
#include "synthetic.hpp"
#include "test_support.hpp"

using namespace dickecav;
namespace fs = std::filesystem;
using config::Json;

namespace {

// ---- pinned tolerances ----
constexpr double kOracleTraceDistance = 1e-8;
constexpr int kOracleRateSets = 20;
constexpr double kEliminationRelTol = 0.05;
constexpr double kFeatureRelTol = 0.15;      // decay / rise time at the largest N
constexpr double kDephasedDecayNs = 0.110;
constexpr double kDephasedDecayRelTol = 0.20;
constexpr double kDipRelTol = 0.02;
constexpr double kPeakCeiling = 2.2;
constexpr double kSingleEmitterSlopeMax = 1.02;
constexpr double kLargeNSlopeMin = 1.2;
constexpr double kSuperLinearEtaOverGamma = 1.2;
constexpr double kNarrowSlopeMin = 1.2;
constexpr double kWideSlopeMax = 1.1;
constexpr double kNearDetuningMaxDrop = 0.20; // |delta| <= 3 kappa
constexpr double kFarDetuningMinRatio = 5.0;
constexpr double kPanelSeconds = 600.0;
constexpr int kRoundTripDatasets = 100;
constexpr double kCoverageMin = 0.90; // fraction of datasets with |fit - truth| <= 2 sigma
constexpr double kPeakTol = 0.1;      // intrinsic and raw bunching peak, absolute
constexpr double kPurcellEffTol = 0.05;
constexpr double kPurcellIdealTol = 1.0;

struct Outcome {
    bool pass = true;
    std::vector<std::string> notes;

    void check(bool ok, const std::string& what) {
        pass = pass && ok;
        notes.push_back(std::string(ok ? "ok " : "FAILED ") + what);
    }
};

std::string fmt(double v, int digits = 4) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", digits, v);
    return buf;
}

// Runs a CLI subcommand in-process, output silenced; throws on a nonzero exit.
void cli_run(const std::vector<std::string>& args) {
    std::stringstream sink;
    auto* out = std::cout.rdbuf(sink.rdbuf());
    auto* err = std::cerr.rdbuf(sink.rdbuf());
    const int code = cli::run(args);
    std::cout.rdbuf(out);
    std::cerr.rdbuf(err);
    if (code != 0) throw std::runtime_error("dickecav exited with " + std::to_string(code) + ": " + sink.str());
}

fs::path work_dir() {
    static const fs::path dir = [] {
        fs::path d = fs::temp_directory_path() / ("dickecav_acceptance_" + std::to_string(std::random_device{}()));
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

// Reproduces a figure into the work dir once and returns its directory.
fs::path figure(const std::string& fig) {
    static std::map<std::string, fs::path> done;
    if (auto it = done.find(fig); it != done.end()) return it->second;
    const fs::path out = work_dir() / fig;
    cli_run({"reproduce", fig, "--out", out.string()});
    return done[fig] = out;
}

double wall_clock(const fs::path& dir) {
    std::ifstream in(dir / "manifest.json");
    return Json::parse(in).at("wall_clock_s").get<double>();
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Rows of a figure CSV grouped by the value of the first column.
std::map<std::string, std::vector<std::vector<double>>> grouped(const fs::path& csv) {
    const auto t = io::read_csv(csv);
    std::map<std::string, std::vector<std::vector<double>>> out;
    for (const auto& row : t.rows) {
        std::vector<double> v;
        for (std::size_t i = 1; i < row.size(); ++i) v.push_back(row[i].empty() ? NAN : std::stod(row[i]));
        out[row[0]].push_back(v);
    }
    return out;
}

// ---- 1: Dicke engine vs symmetrized brute force ----
Outcome oracle_equivalence() {
    Outcome o;
    std::mt19937_64 rng(2024);
    std::vector<double> times;
    for (int i = 0; i < 10; ++i) times.push_back(0.4 * i);
    double worst_ss = 0.0, worst_dyn = 0.0;
    for (int n : {1, 2, 3, 4})
        for (int trial = 0; trial < kOracleRateSets; ++trial) {
            const auto r = testing::random_rates(rng);
            const auto L = dicke::build_liouvillian(n, r);
            const auto sys = oracle::build_collective_system(n, r);
            const auto ss = dicke::steady_state(L);
            worst_ss = std::max(worst_ss, dicke::trace_distance(
                                              ss, oracle::symmetrize_and_project(oracle::oracle_steady_state(sys), n)));
            const auto rho0 = testing::random_block_state(L.basis(), rng);
            const auto traj = dicke::evolve(L, rho0, times);
            const auto ref = oracle::oracle_evolve(sys, oracle::embed(rho0), times);
            for (std::size_t i = 0; i < times.size(); ++i)
                worst_dyn = std::max(worst_dyn,
                                     dicke::trace_distance(traj[i], oracle::symmetrize_and_project(ref[i], n)));
        }
    o.check(worst_ss <= kOracleTraceDistance, "steady-state trace distance " + fmt(worst_ss, 3));
    o.check(worst_dyn <= kOracleTraceDistance, "evolution trace distance " + fmt(worst_dyn, 3));
    return o;
}

// ---- 2: cavity oracle decay vs the eliminated-cavity rate ----
double log_linear_rate(const std::vector<double>& t, const std::vector<double>& p) {
    double st = 0, sy = 0, stt = 0, sty = 0;
    const double n = static_cast<double>(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) {
        const double y = std::log(p[i]);
        st += t[i];
        sy += y;
        stt += t[i] * t[i];
        sty += t[i] * y;
    }
    return -(n * sty - st * sy) / (n * stt - st * st);
}

// Excited-population decay of one emitter minus gamma, against the eliminated-cavity
// rate written out here independently of the library.
double worst_elimination_deviation(double chi) {
    const double kappa = defaults::kappa, gamma = defaults::gamma, g = kappa / 20.0;
    std::vector<double> grid{0.0}, fit_t;
    for (int i = 0; i <= 24; ++i) fit_t.push_back(2.0 + 0.5 * i);
    grid.insert(grid.end(), fit_t.begin(), fit_t.end());
    double worst = 0.0;
    for (int k = -3; k <= 3; ++k) {
        const double detuning = k * kappa / 3.0; // omega_0 - omega_c
        const SubEnsemble e(1, detuning, g, RateSet(gamma, chi, 0.0));
        const auto sys = oracle::build_full_system(EmitterEnsembleSpec({e}, CavityParams(0.0, kappa, 2)), true);
        oracle::DenseState rho = oracle::DenseState::Zero(sys.hilbert_dim(), sys.hilbert_dim());
        rho(sys.fock_dim(), sys.fock_dim()) = 1.0; // excited emitter, empty cavity
        const auto traj = oracle::oracle_evolve(sys, rho, grid);
        const oracle::SparseC n_op = sys.sigma_plus(0) * sys.sigma_minus(0);
        std::vector<double> p;
        for (std::size_t i = 1; i < traj.size(); ++i) p.push_back(oracle::expectation(traj[i], n_op).real());
        const double enhancement = log_linear_rate(fit_t, p) - gamma;
        const double half = (kappa + gamma) / 2.0 + chi; // eta = 0
        const double expected = g * g * kappa / (detuning * detuning + half * half);
        worst = std::max(worst, std::abs(enhancement / expected - 1.0));
    }
    return worst;
}

// Without dephasing the formula's half width is kappa-dominated; with the model's
// dephasing the true weak-coupling rate is 2 g^2 h / (detuning^2 + h^2), not g^2 kappa / (...).
Outcome adiabatic_elimination() {
    Outcome o;
    for (double chi : {0.0, defaults::identical_model_chi}) {
        const double worst = worst_elimination_deviation(chi);
        o.check(worst <= kEliminationRelTol,
                "chi = " + fmt(chi, 2) + ": worst relative deviation over 7 detunings " + fmt(worst, 3));
    }
    return o;
}

// ---- 3 and 4: g2 features of the identical-emitter model ----
struct FeatureRow {
    double peak, decay, dip, rise;
};

std::map<double, std::map<int, FeatureRow>> fig4d_features() {
    std::map<double, std::map<int, FeatureRow>> out;
    for (const auto& [chi, rows] : grouped(figure("fig4d") / "fig4d.csv"))
        for (const auto& r : rows) out[std::stod(chi)][static_cast<int>(r[0])] = {r[1], r[2], r[3], r[4]};
    return out;
}

Outcome g2_reproduction() {
    Outcome o;
    const auto c = grouped(figure("fig4c") / "fig4c.csv");
    const double single_zero = c.at("1").front()[1];
    o.check(std::abs(single_zero) < 1e-10, "N=1 g2(0) = " + fmt(single_zero, 3));
    bool all_peaks = true;
    for (const auto& [n, rows] : c)
        if (std::stoi(n) >= 2) all_peaks = all_peaks && rows.front()[1] > 1.0 && rows.front()[1] > rows[1][1];
    const auto f = fig4d_features();
    const auto& base = f.begin()->second; // calibrated dephasing
    for (const auto& [n, r] : base) all_peaks = all_peaks && std::isfinite(r.peak) && r.peak > 1.0;
    o.check(all_peaks, "bunching peak at tau = 0 for every N >= 2");

    const auto last = base.rbegin();
    const double decay_err = std::abs(last->second.decay / 0.23 - 1.0);
    const double rise_err = std::abs(last->second.rise / 1.37 - 1.0);
    o.check(decay_err <= kFeatureRelTol && rise_err <= kFeatureRelTol,
            "N=" + std::to_string(last->first) + " decay " + fmt(last->second.decay) + " ns, rise " +
                fmt(last->second.rise) + " ns");
    bool converging = true;
    double prev_d = INFINITY, prev_r = INFINITY;
    for (const auto& [n, r] : base) {
        if (n < 10) continue;
        const double d = std::abs(r.decay - 0.23), q = std::abs(r.rise - 1.37);
        converging = converging && d <= prev_d && q <= prev_r;
        prev_d = d;
        prev_r = q;
    }
    o.check(converging, "decay and rise errors shrink monotonically for N >= 10");

    const double dephased = f.rbegin()->second.rbegin()->second.decay; // chi = kappa, largest N
    o.check(std::abs(dephased / kDephasedDecayNs - 1.0) <= kDephasedDecayRelTol,
            "chi = kappa decay " + fmt(1e3 * dephased, 3) + " ps (target 110 ps)");
    o.check(wall_clock(figure("fig4c")) + wall_clock(figure("fig4d")) < kPanelSeconds, "runtime");
    return o;
}

Outcome collective_limit() {
    Outcome o;
    const auto base = fig4d_features().begin()->second;
    for (int n : {5, 10, 20}) {
        const double dip = base.at(n).dip, target = 1.0 - 1.0 / n;
        o.check(std::abs(dip / target - 1.0) <= kDipRelTol, "N=" + std::to_string(n) + " dip " + fmt(dip) + " vs " +
                                                                 fmt(target));
    }
    for (const auto& [n, r] : base)
        if (n >= 10)
            o.check(r.peak >= 2.0 * (1.0 - 1.0 / n) && r.peak <= kPeakCeiling,
                    "N=" + std::to_string(n) + " peak " + fmt(r.peak) + " in [" + fmt(2.0 * (1.0 - 1.0 / n)) + ", 2.2]");
    return o;
}

// ---- 5: super-linear scaling in the Dicke engine ----
double max_slope(const std::vector<std::vector<double>>& rows) {
    double m = -INFINITY;
    for (const auto& r : rows) m = std::max(m, r[2]);
    return m;
}

Outcome super_linear_scaling() {
    Outcome o;
    const auto b = grouped(figure("fig4b") / "fig4b.csv");
    const double s1 = max_slope(b.at("1"));
    o.check(s1 <= kSingleEmitterSlopeMax, "N=1 max slope " + fmt(s1));
    double prev = -INFINITY;
    bool increasing = true;
    std::string trail;
    for (int n : {2, 10, 20, 40}) {
        const double s = max_slope(b.at(std::to_string(n)));
        increasing = increasing && s > prev;
        prev = s;
        trail += " N=" + std::to_string(n) + ":" + fmt(s);
    }
    o.check(increasing, "max slope increases with N," + trail);
    o.check(prev > kLargeNSlopeMin, "N=40 max slope " + fmt(prev));
    return o;
}

// ---- 6: mean-field inhomogeneity and detuning ----
Outcome meanfield_panels() {
    Outcome o;
    const auto e = grouped(figure("fig4e") / "fig4e.csv");
    const auto& narrow = e.at("1");
    double peak_eta = 0.0, peak = -INFINITY;
    for (const auto& r : narrow)
        if (r[2] > peak) peak = r[2], peak_eta = r[0];
    o.check(peak > kNarrowSlopeMin && peak_eta <= kSuperLinearEtaOverGamma,
            "w=kappa max slope " + fmt(peak) + " at eta/gamma " + fmt(peak_eta, 3));
    bool relaxing = true;
    for (std::size_t i = 1; i < narrow.size(); ++i)
        if (narrow[i][0] > kSuperLinearEtaOverGamma) relaxing = relaxing && narrow[i][2] <= narrow[i - 1][2];
    o.check(relaxing && narrow.back()[2] < kWideSlopeMax,
            "w=kappa slope falls toward linear above eta/gamma 1.2, final " + fmt(narrow.back()[2]));
    const double wide = max_slope(e.at("20"));
    o.check(wide < kWideSlopeMax, "w=20 kappa max slope " + fmt(wide));

    const auto f = grouped(figure("fig4f") / "fig4f.csv");
    const auto& resonant = f.at("0");
    double near_drop = 0.0, far_ratio = INFINITY, far = 0.0;
    for (const auto& [label, rows] : f) {
        if (label == "weighted") continue;
        far = std::max(far, std::abs(std::stod(label)));
    }
    for (const auto& [label, rows] : f) {
        if (label == "weighted") continue;
        const double d = std::abs(std::stod(label));
        for (std::size_t i = 0; i < rows.size(); ++i) {
            if (d <= 3.0) near_drop = std::max(near_drop, 1.0 - rows[i][1] / resonant[i][1]);
            if (d == far) far_ratio = std::min(far_ratio, resonant[i][1] / rows[i][1]);
        }
    }
    o.check(near_drop < kNearDetuningMaxDrop, "largest drop for |delta| <= 3 kappa " + fmt(100.0 * near_drop, 3) + "%");
    o.check(far_ratio > kFarDetuningMinRatio, "drop at |delta| = " + fmt(far) + " kappa: " + fmt(far_ratio, 3) + "x");
    const double weighted = max_slope(f.at("weighted"));
    o.check(weighted > 1.0, "weighted average max slope " + fmt(weighted));
    o.check(wall_clock(figure("fig4e")) < kPanelSeconds && wall_clock(figure("fig4f")) < kPanelSeconds,
            "runtime " + fmt(wall_clock(figure("fig4e")), 3) + " s / " + fmt(wall_clock(figure("fig4f")), 3) + " s");
    return o;
}

// ---- 7: fit round trips and the bundled fixtures ----
struct Coverage {
    std::map<std::string, int> inside;
    int datasets = 0;
    int failures = 0;

    void add(const std::string& name, double fit, double sigma, double truth) {
        inside[name] += std::abs(fit - truth) <= 2.0 * sigma ? 1 : 0;
    }
    void report(Outcome& o, const std::string& what) const {
        for (const auto& [name, k] : inside) {
            const double frac = static_cast<double>(k) / datasets;
            o.check(frac >= kCoverageMin, what + " " + name + " 2-sigma coverage " + fmt(100.0 * frac, 3) + "%");
        }
        o.check(failures == 0, what + " fit failures " + std::to_string(failures));
    }
};

Outcome fit_round_trips() {
    Outcome o;
    const Json init = config::defaults().at("initial_g2");
    analysis::G2FitModel seed;
    seed.a = init.at("a");
    seed.b = init.at("b");
    seed.tau1 = init.at("tau1_ns");
    seed.tau2 = init.at("tau2_ns");
    seed.c = init.at("c");
    seed.tau3 = init.at("tau3_ns");
    seed.irf_fwhm = init.at("irf_fwhm_ns");

    {
        Coverage cov;
        const auto truth = synthetic::paper_like_g2();
        for (int k = 0; k < kRoundTripDatasets; ++k) {
            std::mt19937_64 rng(1000 + k);
            std::vector<double> tau, counts;
            for (const auto& [t, c] : synthetic::hbt_histogram(truth, 4000.0, rng)) tau.push_back(t), counts.push_back(c);
            const auto h = analysis::normalize_histogram(tau, counts);
            analysis::G2FitOptions opts;
            opts.plateau_counts = h.plateau;
            ++cov.datasets;
            try {
                const auto r = analysis::fit_g2(h.trace, seed, 1.0, opts);
                cov.add("a", r.model.a, r.fit.error("a"), truth.a);
                cov.add("b", r.model.b, r.fit.error("b"), truth.b);
                cov.add("tau1", r.model.tau1, r.fit.error("tau1"), truth.tau1);
                cov.add("tau2", r.model.tau2, r.fit.error("tau2"), truth.tau2);
                cov.add("c", r.model.c, r.fit.error("c"), truth.c);
            } catch (const std::exception&) {
                ++cov.failures;
            }
        }
        cov.report(o, "g2");
    }
    {
        Coverage cov;
        const std::vector<double> intensity{0.1, 0.25, 0.5, 1.0, 1.5, 2.0, 3.0};
        for (int k = 0; k < kRoundTripDatasets; ++k) {
            std::mt19937_64 rng(2000 + k);
            ++cov.datasets;
            try {
                const auto r = analysis::fit_saturation_lifetime(synthetic::lifetime_series(7.6, 0.05, intensity, 4000, rng));
                cov.add("tau0", r.tau0, r.tau0_error, 7.6);
                cov.add("sigma", r.sigma, r.sigma_error, 0.05);
            } catch (const std::exception&) {
                ++cov.failures;
            }
        }
        cov.report(o, "lifetime");
    }
    {
        Coverage cov;
        const auto power = synthetic::log_spaced(20.0, 2000.0, 15);
        analysis::PowerLawOptions opts;
        opts.integration_time = 0.01;
        for (int k = 0; k < kRoundTripDatasets; ++k) {
            std::mt19937_64 rng(3000 + k);
            ++cov.datasets;
            try {
                const auto r = analysis::fit_power_law(
                    synthetic::power_sweep(50.0, 1.42, power, opts.integration_time, analysis::Channel::zpl, rng), opts);
                cov.add("k", r.exponent, r.exponent_error, 1.42);
            } catch (const std::exception&) {
                ++cov.failures;
            }
        }
        cov.report(o, "power law");
    }

    // Bundled fixtures through the command line.
    const fs::path data = fs::path(DICKECAV_SOURCE_DIR) / "data";
    const fs::path out = work_dir() / "fixtures";
    const auto n_direct = analysis::estimate_emitter_number(0.0167, 0.5);
    o.check(std::lround(n_direct.n) == 15, "N from a = 0.0167, p = 0.5: " + fmt(n_direct.n));

    cli_run({"fit", "g2", "--input", (data / "hbt_cavity_zpl.csv").string(), "--purity", "0.5", "--out",
             (out / "g2").string()});
    const Json g = Json::parse(slurp(out / "g2" / "fit_g2.json"));
    const double n_fit = g.at("emitter_number").at("value"), n_sigma = g.at("emitter_number").at("sigma");
    o.check(std::abs(n_fit - 15.0) <= 2.0 * n_sigma, "fixture N " + fmt(n_fit, 3) + " +/- " + fmt(n_sigma, 2));
    const double raw = g.at("measured_peak"), intrinsic = g.at("intrinsic_peak");
    o.check(std::abs(raw - 1.35) <= kPeakTol, "fixture raw peak " + fmt(raw, 3));
    o.check(std::abs(intrinsic - 1.7) <= kPeakTol,
            "fixture intrinsic peak " + fmt(intrinsic, 3) + " (deconvolved only " +
                fmt(g.at("deconvolved_peak").get<double>(), 3) + ", target 1.7)");

    const auto pf = analysis::purcell_factor(15.8, 7.6, 0.03);
    o.check(std::abs(pf.effective - 1.1) <= kPurcellEffTol && std::abs(pf.ideal - 36.0) <= kPurcellIdealTol,
            "F_eff " + fmt(pf.effective, 3) + ", F_ideal " + fmt(pf.ideal, 3));
    cli_run({"fit", "lifetime", "--input", (data / "lifetime_confocal.csv").string(), "--out", (out / "t0").string()});
    cli_run({"fit", "lifetime", "--input", (data / "lifetime_cavity.csv").string(), "--out", (out / "tc").string()});
    const Json t0 = Json::parse(slurp(out / "t0" / "fit_lifetime.json"));
    const Json tc = Json::parse(slurp(out / "tc" / "fit_lifetime.json"));
    const double a0 = t0.at("tau0_ns"), ac = tc.at("tau0_ns");
    const double f_fit = a0 / ac - 1.0;
    const double f_sigma = (a0 / ac) * std::hypot(t0.at("tau0_sigma_ns").get<double>() / a0,
                                                  tc.at("tau0_sigma_ns").get<double>() / ac);
    o.check(std::abs(f_fit - pf.effective) <= 2.0 * f_sigma,
            "fixture lifetimes " + fmt(a0, 3) + " / " + fmt(ac, 3) + " ns, F_eff " + fmt(f_fit, 3));

    cli_run({"fit", "power", "--input", (data / "power_sweep_zpl.csv").string(), "--set", "integration_time_s=1",
             "--out", (out / "p").string()});
    const Json p = Json::parse(slurp(out / "p" / "fit_power.json"));
    const double k = p.at("exponent"), sk = p.at("exponent_sigma");
    o.check(std::abs(k - 1.42) <= 2.0 * sk, "fixture k " + fmt(k, 4) + " +/- " + fmt(sk, 2));
    return o;
}

// ---- 8: replaying a manifest reproduces the CSV bytes ----
Outcome determinism() {
    Outcome o;
    const fs::path first = figure("fig4b");
    const fs::path second = work_dir() / "fig4b_replay";
    cli_run({"reproduce", "fig4b", "--config", (first / "manifest.json").string(), "--out", second.string()});
    const bool same = slurp(first / "fig4b.csv") == slurp(second / "fig4b.csv");
    o.check(same && !slurp(first / "fig4b.csv").empty(), "fig4b.csv identical across runs");
    return o;
}

} // namespace

int main(int argc, char** argv) {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"oracle equivalence", oracle_equivalence},
        {"adiabatic elimination", adiabatic_elimination},
        {"g2 time constants", g2_reproduction},
        {"collective limit", collective_limit},
        {"super-linear scaling", super_linear_scaling},
        {"mean-field inhomogeneity and detuning", meanfield_panels},
        {"fit round trips", fit_round_trips},
        {"determinism", determinism},
    };
    std::vector<int> selected;
    for (int i = 1; i < argc; ++i) selected.push_back(std::stoi(argv[i]));
    if (selected.empty())
        for (std::size_t i = 1; i <= criteria.size(); ++i) selected.push_back(static_cast<int>(i));

    bool all = true;
    for (int id : selected) {
        if (id < 1 || id > static_cast<int>(criteria.size())) {
            std::cerr << "no criterion " << id << '\n';
            return 2;
        }
        const auto& [name, check] = criteria[id - 1];
        const auto start = std::chrono::steady_clock::now();
        Outcome r;
        try {
            r = check();
        } catch (const std::exception& e) {
            r.check(false, std::string("threw: ") + e.what());
        }
        const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::cout << (r.pass ? "PASS" : "FAIL") << " criterion " << id << " (" << name << ", " << fmt(s, 3) << " s)";
        for (const auto& n : r.notes) std::cout << "; " << n;
        std::cout << std::endl;
        all = all && r.pass;
    }
    fs::remove_all(work_dir());
    return all ? 0 : 1;
}
