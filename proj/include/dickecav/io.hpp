// io.hpp: CSV tables, measurement loaders and content digests

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "dickecav/analysis.hpp"
#include "dickecav/correlations.hpp"

namespace dickecav::io {

// Column-major numeric table; cells that are not numbers keep their text.
struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    int column(const std::string& name) const; // -1 if absent
    std::vector<double> numbers(int column) const; // throws IoError on a non-numeric cell
};

// Comma-separated with one header line; blank lines and lines starting with '#' are skipped.
Table read_csv(const std::filesystem::path& path);

// Shortest round-trip formatting, so equal doubles always print identically.
std::string format_number(double v);

class CsvWriter {
public:
    CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header);
    void row(const std::vector<double>& values);
    void row(const std::vector<std::string>& cells);
    void close();

private:
    std::filesystem::path path_;
    std::string buffer_;
    std::size_t columns_;
};

struct LoadedHistogram {
    correlations::CorrelationTrace trace; // normalized g2
    bool raw_counts = false;              // header was tau_ns, coincidences
    double plateau = 0.0;                 // coincidences per bin at g2 = 1 (raw counts only)
};

// Header `tau_ns, coincidences` (normalized here) or `tau_ns, g2`.
LoadedHistogram load_histogram(const std::filesystem::path& path);

// Header `power_uW, counts_per_s, channel`.
std::vector<analysis::PowerSweepRecord> load_power_sweep(const std::filesystem::path& path);

// Header `intensity, tau1_ns` with an optional `sigma_ns`.
std::vector<analysis::LifetimeRecord> load_lifetimes(const std::filesystem::path& path);

// Lower-case hex SHA-256 of the file contents.
std::string sha256_file(const std::filesystem::path& path);

} // namespace dickecav::io
