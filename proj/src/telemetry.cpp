#include "polka_te/telemetry.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <random>
#include <set>
#include <sstream>

#include "polka_te/text.hpp"

namespace polka_te {

InsufficientHistory::InsufficientHistory(const std::string& key, std::size_t avail, std::size_t requested)
    : std::out_of_range("series '" + key + "' has " + std::to_string(avail) + " points, " +
                        std::to_string(requested) + " requested"),
      available(avail) {}

void TelemetryStore::append(const TelemetrySample& sample) {
    std::unique_lock lock(mutex_);
    auto& s = series_[sample.series_key];
    if (!s.t.empty() && !(sample.t > s.t.back())) {
        throw NonMonotoneTimestamp("series '" + sample.series_key + "': timestamp " + format_number(sample.t) +
                                   " does not follow " + format_number(s.t.back()));
    }
    s.t.push_back(sample.t);
    s.v.push_back(sample.value);
    if (journal_) {
        *journal_ << sample.series_key << ',' << format_number(sample.t) << ',' << format_number(sample.value)
                  << '\n';
        journal_->flush();
    }
}

void TelemetryStore::append(std::span<const TelemetrySample> samples) {
    for (const auto& s : samples) append(s);
}

std::vector<double> TelemetryStore::window(const std::string& key, std::size_t n) const {
    std::shared_lock lock(mutex_);
    const auto it = series_.find(key);
    const std::size_t have = it == series_.end() ? 0 : it->second.v.size();
    if (have < n) throw InsufficientHistory(key, have, n);
    if (n == 0) return {};
    const auto& v = it->second.v;
    return {v.end() - static_cast<std::ptrdiff_t>(n), v.end()};
}

std::vector<TelemetrySample> TelemetryStore::tail(const std::string& key, std::size_t n) const {
    std::shared_lock lock(mutex_);
    std::vector<TelemetrySample> out;
    const auto it = series_.find(key);
    if (it == series_.end()) return out;
    const auto& s = it->second;
    const std::size_t start = s.t.size() > n ? s.t.size() - n : 0;
    for (std::size_t i = start; i < s.t.size(); ++i) out.push_back({key, s.t[i], s.v[i]});
    return out;
}

std::size_t TelemetryStore::size(const std::string& key) const {
    std::shared_lock lock(mutex_);
    const auto it = series_.find(key);
    return it == series_.end() ? 0 : it->second.v.size();
}

bool TelemetryStore::contains(const std::string& key) const {
    std::shared_lock lock(mutex_);
    return series_.contains(key);
}

std::vector<std::string> TelemetryStore::keys() const {
    std::shared_lock lock(mutex_);
    std::vector<std::string> out;
    out.reserve(series_.size());
    for (const auto& [k, _] : series_) out.push_back(k);
    return out;
}

void TelemetryStore::enable_journal(const std::string& path) {
    std::unique_lock lock(mutex_);
    journal_ = std::make_unique<std::ofstream>(path, std::ios::app);
    if (!*journal_) throw std::runtime_error("cannot open telemetry journal '" + path + "'");
}

void TelemetryStore::export_csv(std::ostream& os, const std::vector<std::string>& keys) const {
    std::shared_lock lock(mutex_);
    std::set<double> times;
    for (const auto& k : keys) {
        if (const auto it = series_.find(k); it != series_.end()) times.insert(it->second.t.begin(), it->second.t.end());
    }
    os << "t";
    for (const auto& k : keys) os << ',' << k;
    os << '\n';
    std::vector<std::size_t> cursor(keys.size(), 0);
    for (const double t : times) {
        os << format_number(t);
        for (std::size_t i = 0; i < keys.size(); ++i) {
            os << ',';
            const auto it = series_.find(keys[i]);
            if (it == series_.end()) continue;
            const auto& s = it->second;
            if (cursor[i] < s.t.size() && s.t[cursor[i]] == t) {
                os << format_number(s.v[cursor[i]]);
                ++cursor[i];
            }
        }
        os << '\n';
    }
}

const std::vector<double>& SeriesTable::column(const std::string& name) const {
    const auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) throw std::out_of_range("no column '" + name + "'");
    return columns[static_cast<std::size_t>(it - names.begin())];
}

SeriesTable read_series_csv(std::istream& is) {
    SeriesTable table;
    std::string line;
    std::size_t line_no = 0;
    bool have_header = false;
    while (std::getline(is, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line.front() == '#') continue;
        const auto cells = split(line, ',');
        if (!have_header) {
            if (cells.empty() || cells.front() != "t") {
                throw std::invalid_argument("csv line " + std::to_string(line_no) + ": header must start with 't'");
            }
            table.names.assign(cells.begin() + 1, cells.end());
            table.columns.resize(table.names.size());
            have_header = true;
            continue;
        }
        if (cells.size() != table.names.size() + 1) {
            throw std::invalid_argument("csv line " + std::to_string(line_no) + ": expected " +
                                        std::to_string(table.names.size() + 1) + " cells, got " +
                                        std::to_string(cells.size()));
        }
        const double t = parse_number(cells[0], "csv line " + std::to_string(line_no));
        if (!table.t.empty() && !(t > table.t.back())) {
            throw NonMonotoneTimestamp("csv line " + std::to_string(line_no) + ": t column is not strictly increasing");
        }
        table.t.push_back(t);
        for (std::size_t i = 0; i < table.names.size(); ++i) {
            table.columns[i].push_back(parse_number(cells[i + 1], "csv line " + std::to_string(line_no)));
        }
    }
    if (!have_header) throw std::invalid_argument("csv: missing header");
    return table;
}

SeriesTable read_series_csv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open '" + path + "'");
    return read_series_csv(in);
}

void write_series_csv(std::ostream& os, const SeriesTable& table) {
    os << "t";
    for (const auto& n : table.names) os << ',' << n;
    os << '\n';
    for (std::size_t r = 0; r < table.t.size(); ++r) {
        os << format_number(table.t[r]);
        for (const auto& c : table.columns) os << ',' << format_number(c[r]);
        os << '\n';
    }
}

namespace {

double level(double t, double start, double ramp, double before, double after) {
    if (t < start) return before;
    if (t >= start + ramp) return after;
    return before + (after - before) * (t - start) / ramp;
}

/// AR(1) noise whose magnitude never exceeds the (time-varying) amplitude.
std::vector<double> bounded_noise(std::mt19937_64& rng, const SyntheticWirelessParams& p, double amp_before,
                                  double amp_after) {
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    std::vector<double> out(static_cast<std::size_t>(p.length));
    double state = 0.0;  // in units of amplitude, |state| <= 1
    for (int i = 0; i < p.length; ++i) {
        state = p.noise_ar * state + (1.0 - p.noise_ar) * unit(rng);
        out[static_cast<std::size_t>(i)] =
            state * level(i, p.indoor_start, p.ramp_seconds, amp_before, amp_after);
    }
    return out;
}

}  // namespace

SeriesTable generate_synthetic_wireless(std::uint64_t seed, const SyntheticWirelessParams& p) {
    if (p.length < 1) throw std::invalid_argument("synthetic dataset length must be positive");
    std::mt19937_64 rng(seed);
    const auto noise1 = bounded_noise(rng, p, p.path1_indoor_noise, p.path1_outdoor_noise);
    const auto noise2 = bounded_noise(rng, p, p.path2_indoor_noise, p.path2_outdoor_noise);

    SeriesTable table;
    table.names = {"path1_mbps", "path2_mbps"};
    table.columns.assign(2, {});
    for (int i = 0; i < p.length; ++i) {
        const auto t = static_cast<double>(i);
        const auto k = static_cast<std::size_t>(i);
        table.t.push_back(t);
        table.columns[0].push_back(
            std::max(0.0, level(t, p.indoor_start, p.ramp_seconds, p.path1_indoor, p.path1_outdoor) + noise1[k]));
        table.columns[1].push_back(
            std::max(0.0, level(t, p.indoor_start, p.ramp_seconds, p.path2_indoor, p.path2_outdoor) + noise2[k]));
    }
    return table;
}

}  // namespace polka_te
