#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <fstream>
#include <iosfwd>
#include <map>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace polka_te {

/// One measurement, e.g. {"path:1:bandwidth", 12.0, 17.5}.
struct TelemetrySample {
    std::string series_key;
    double t = 0.0;
    double value = 0.0;

    friend bool operator==(const TelemetrySample&, const TelemetrySample&) = default;
};

struct NonMonotoneTimestamp : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct InsufficientHistory : std::out_of_range {
    InsufficientHistory(const std::string& key, std::size_t available, std::size_t requested);
    std::size_t available;
};

/// In-memory time-series store. Appends are serialized, reads take a shared lock
/// and therefore always observe a consistent prefix of every series.
class TelemetryStore {
public:
    TelemetryStore() = default;
    TelemetryStore(const TelemetryStore&) = delete;
    TelemetryStore& operator=(const TelemetryStore&) = delete;

    void append(const TelemetrySample& sample);
    void append(std::span<const TelemetrySample> samples);

    /// Last n values in time order.
    std::vector<double> window(const std::string& key, std::size_t n) const;
    /// Last n samples (fewer if the series is shorter).
    std::vector<TelemetrySample> tail(const std::string& key, std::size_t n) const;
    std::size_t size(const std::string& key) const;
    bool contains(const std::string& key) const;
    std::vector<std::string> keys() const;

    /// Mirrors every subsequent append to `path` as "series,t,value" lines.
    void enable_journal(const std::string& path);

    /// Wide CSV (header "t,<key>,..."), one row per distinct timestamp.
    void export_csv(std::ostream& os, const std::vector<std::string>& keys) const;

private:
    struct Series {
        std::vector<double> t;
        std::vector<double> v;
    };

    mutable std::shared_mutex mutex_;
    std::map<std::string, Series> series_;
    std::unique_ptr<std::ofstream> journal_;
};

/// Sliding-window regression dataset: X.row(i) = values[i..i+n), y(i) = values[i+n].
template <typename Scalar>
struct BasicLaggedDataset {
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> X;
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> y;
    int n_lags = 0;
};

using LaggedDataset = BasicLaggedDataset<double>;

template <typename Scalar>
BasicLaggedDataset<Scalar> lagged_dataset(std::span<const Scalar> values, int n_lags) {
    if (n_lags < 1) throw std::invalid_argument("lagged_dataset: n_lags must be >= 1");
    const auto n = static_cast<Eigen::Index>(values.size());
    if (n <= n_lags) {
        throw std::invalid_argument("lagged_dataset: series of length " + std::to_string(n) +
                                    " is too short for " + std::to_string(n_lags) + " lags");
    }
    const Eigen::Index rows = n - n_lags;
    BasicLaggedDataset<Scalar> out;
    out.n_lags = n_lags;
    out.X.resize(rows, n_lags);
    out.y.resize(rows);
    for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index j = 0; j < n_lags; ++j) out.X(i, j) = values[static_cast<std::size_t>(i + j)];
        out.y(i) = values[static_cast<std::size_t>(i + n_lags)];
    }
    return out;
}

inline LaggedDataset lagged_dataset(const std::vector<double>& values, int n_lags) {
    return lagged_dataset<double>(std::span<const double>(values), n_lags);
}

/// Named columns sharing a strictly increasing time column.
struct SeriesTable {
    std::vector<double> t;
    std::vector<std::string> names;
    std::vector<std::vector<double>> columns;

    const std::vector<double>& column(const std::string& name) const;
};

/// Header "t,<name>,...". Lines starting with '#' are skipped.
SeriesTable read_series_csv(std::istream& is);
SeriesTable read_series_csv_file(const std::string& path);
void write_series_csv(std::ostream& os, const SeriesTable& table);

/// Stand-in for the two-path wireless bandwidth trace: path1 starts high and
/// drops, path2 starts low and rises, crossing between t=100 and t=150.
struct SyntheticWirelessParams {
    int length = 500;
    double indoor_start = 100.0;
    double ramp_seconds = 50.0;
    double path1_indoor = 45.0, path1_indoor_noise = 5.0;
    double path1_outdoor = 10.0, path1_outdoor_noise = 3.0;
    double path2_indoor = 5.0, path2_indoor_noise = 2.0;
    double path2_outdoor = 35.0, path2_outdoor_noise = 5.0;
    double noise_ar = 0.5;  // AR(1) coefficient of the bounded noise
};

SeriesTable generate_synthetic_wireless(std::uint64_t seed, const SyntheticWirelessParams& params = {});

}  // namespace polka_te
