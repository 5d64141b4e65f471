#include "dickecav/io.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <fstream>
#include <sstream>

#include <openssl/evp.h>

#include "dickecav/error.hpp"

namespace dickecav::io {

namespace {

std::string trim(std::string s) {
    const auto not_space = [](unsigned char c) { return !std::isspace(c); };
    s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
    s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
    return s;
}

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(trim(cell));
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

bool parse_double(const std::string& s, double& v) {
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    return ec == std::errc{} && ptr == s.data() + s.size();
}

int require_column(const Table& t, const std::string& name, const std::filesystem::path& path) {
    const int c = t.column(name);
    if (c < 0) throw IoError(path.string() + ": missing column '" + name + "'");
    return c;
}

} // namespace

int Table::column(const std::string& name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    return it == header.end() ? -1 : static_cast<int>(it - header.begin());
}

std::vector<double> Table::numbers(int c) const {
    std::vector<double> out;
    out.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        double v = 0.0;
        if (!parse_double(rows[i][c], v))
            throw IoError("row " + std::to_string(i + 1) + ", column '" + header[c] + "': not a number: '" +
                          rows[i][c] + "'");
        out.push_back(v);
    }
    return out;
}

Table read_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    Table t;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const std::string s = trim(line);
        if (s.empty() || s.front() == '#') continue;
        auto cells = split(s);
        if (t.header.empty()) {
            t.header = std::move(cells);
            continue;
        }
        if (cells.size() != t.header.size())
            throw IoError(path.string() + ": row " + std::to_string(t.rows.size() + 1) + " has " +
                          std::to_string(cells.size()) + " cells, header has " + std::to_string(t.header.size()));
        t.rows.push_back(std::move(cells));
    }
    if (t.header.empty()) throw IoError(path.string() + ": empty file");
    return t;
}

std::string format_number(double v) {
    std::array<char, 64> buf{};
    const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), ptr);
}

CsvWriter::CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header)
    : path_(path), columns_(header.size()) {
    row(header);
}

void CsvWriter::row(const std::vector<double>& values) {
    std::vector<std::string> cells;
    cells.reserve(values.size());
    for (double v : values) cells.push_back(format_number(v));
    row(cells);
}

void CsvWriter::row(const std::vector<std::string>& cells) {
    if (cells.size() != columns_) throw InvalidArgument("csv row width differs from the header");
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) buffer_ += ',';
        buffer_ += cells[i];
    }
    buffer_ += '\n';
}

void CsvWriter::close() {
    if (!path_.parent_path().empty()) std::filesystem::create_directories(path_.parent_path());
    std::ofstream out(path_, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path_.string());
    out << buffer_;
    if (!out) throw IoError("write failed for " + path_.string());
}

LoadedHistogram load_histogram(const std::filesystem::path& path) {
    const Table t = read_csv(path);
    const std::vector<double> tau = t.numbers(require_column(t, "tau_ns", path));
    LoadedHistogram out;
    if (const int c = t.column("coincidences"); c >= 0) {
        auto norm = analysis::normalize_histogram(tau, t.numbers(c));
        out.trace = std::move(norm.trace);
        out.plateau = norm.plateau;
        out.raw_counts = true;
    } else if (const int g = t.column("g2"); g >= 0) {
        out.trace.tau = tau;
        out.trace.values = t.numbers(g);
        out.trace.source = correlations::TraceSource::measurement;
        out.trace.validate();
    } else {
        throw IoError(path.string() + ": expected a 'coincidences' or 'g2' column");
    }
    return out;
}

std::vector<analysis::PowerSweepRecord> load_power_sweep(const std::filesystem::path& path) {
    const Table t = read_csv(path);
    const auto power = t.numbers(require_column(t, "power_uW", path));
    const auto rate = t.numbers(require_column(t, "counts_per_s", path));
    const int ch = require_column(t, "channel", path);
    std::vector<analysis::PowerSweepRecord> out;
    for (std::size_t i = 0; i < t.rows.size(); ++i)
        out.push_back({power[i], rate[i], analysis::channel_from_string(t.rows[i][ch])});
    return out;
}

std::vector<analysis::LifetimeRecord> load_lifetimes(const std::filesystem::path& path) {
    const Table t = read_csv(path);
    const auto intensity = t.numbers(require_column(t, "intensity", path));
    const auto tau = t.numbers(require_column(t, "tau1_ns", path));
    const int s = t.column("sigma_ns");
    const auto sigma = s >= 0 ? t.numbers(s) : std::vector<double>(t.rows.size(), 0.0);
    std::vector<analysis::LifetimeRecord> out;
    for (std::size_t i = 0; i < t.rows.size(); ++i) out.push_back({intensity[i], tau[i], sigma[i]});
    return out;
}

std::string sha256_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1) {
        EVP_MD_CTX_free(ctx);
        throw IoError("sha256 unavailable");
    }
    std::array<char, 1 << 16> buf{};
    while (in) {
        in.read(buf.data(), buf.size());
        if (in.gcount() > 0) EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(in.gcount()));
    }
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx, md.data(), &len);
    EVP_MD_CTX_free(ctx);
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[md[i] >> 4];
        out += hex[md[i] & 0xf];
    }
    return out;
}

} // namespace dickecav::io
