// Regenerates the bundled synthetic datasets in data/ (fixed seeds, so the
// output is byte-stable). Usage: make_fixtures <data-dir>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <string>

#include "dickecav/io.hpp"
#include "synthetic.hpp"

namespace fs = std::filesystem;
using namespace dickecav;

namespace {

void write(const fs::path& path, const std::string& comment, const std::string& header,
           const std::vector<std::vector<std::string>>& rows) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << "# " << comment << '\n' << header << '\n';
    for (const auto& r : rows) {
        for (std::size_t i = 0; i < r.size(); ++i) out << (i ? "," : "") << r[i];
        out << '\n';
    }
    if (!out) throw std::runtime_error("cannot write " + path.string());
}

std::string num(double v) { return io::format_number(v); }

void lifetimes(const fs::path& path, const std::string& what, double tau0, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const auto rec = synthetic::lifetime_series(tau0, 0.05, {0.1, 0.25, 0.5, 1.0, 1.5, 2.0, 3.0}, 20000, rng);
    std::vector<std::vector<std::string>> rows;
    for (const auto& r : rec) rows.push_back({num(r.intensity), num(r.tau1), num(r.sigma)});
    write(path, what + ": tau1(I) = " + num(tau0) + " / (1 + 0.05 I " + num(tau0) + "), 20000 photons per point, seed " +
                    std::to_string(seed),
          "intensity,tau1_ns,sigma_ns", rows);
}

void power(const fs::path& path, double prefactor, double k, analysis::Channel ch, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const auto rec = synthetic::power_sweep(prefactor, k, synthetic::log_spaced(20.0, 2000.0, 15), 1.0, ch, rng);
    std::vector<std::vector<std::string>> rows;
    for (const auto& r : rec) rows.push_back({num(r.power), num(r.rate), analysis::to_string(r.channel)});
    write(path, "rate = " + num(prefactor) + " P^" + num(k) + " counts/s, Poisson counts over 1 s, seed " +
                    std::to_string(seed),
          "power_uW,counts_per_s,channel", rows);
}

} // namespace

int main(int argc, char** argv) {
    if (argc != 2) {
        std::cerr << "usage: make_fixtures <data-dir>\n";
        return 2;
    }
    const fs::path dir = argv[1];
    fs::create_directories(dir);

    std::mt19937_64 rng(1);
    const auto m = synthetic::paper_like_g2();
    std::vector<std::vector<std::string>> rows;
    for (const auto& [tau, counts] : synthetic::hbt_histogram(m, 4000.0, rng)) rows.push_back({num(tau), num(counts)});
    write(dir / "hbt_cavity_zpl.csv",
          "a=" + num(m.a) + " b=" + num(m.b) + " tau1=" + num(m.tau1) + " tau2=" + num(m.tau2) + " c=" + num(m.c) +
              " tau3=" + num(m.tau3) + " irf_fwhm=" + num(m.irf_fwhm) + " ns, plateau 4000 counts/bin, seed 1",
          "tau_ns,coincidences", rows);

    lifetimes(dir / "lifetime_cavity.csv", "cavity", 7.6, 2);
    lifetimes(dir / "lifetime_confocal.csv", "confocal", 15.8, 3);
    power(dir / "power_sweep_zpl.csv", 50.0, 1.42, analysis::Channel::zpl, 4);
    power(dir / "power_sweep_psb.csv", 200.0, 1.0, analysis::Channel::psb, 5);
    return 0;
}
