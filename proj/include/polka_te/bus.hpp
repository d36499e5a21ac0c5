#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <mutex>
#include <string>
#include <vector>

#include <json.hpp>

namespace polka_te {

namespace topics {
inline constexpr const char* kFlowRequested = "flow.requested";
inline constexpr const char* kTelemetryTick = "telemetry.tick";
inline constexpr const char* kTelemetryQuery = "telemetry.query";
inline constexpr const char* kPredictionReady = "prediction.ready";
inline constexpr const char* kPathSelected = "path.selected";
inline constexpr const char* kPbrInstalled = "pbr.installed";
inline constexpr const char* kFlowMigrated = "flow.migrated";
inline constexpr const char* kFlowAllocated = "flow.allocated";
inline constexpr const char* kFlowFailed = "flow.failed";
}  // namespace topics

struct BusMessage {
    std::uint64_t seq = 0;  // global, strictly increasing from 1
    std::string topic;
    nlohmann::json payload;

    nlohmann::json to_json() const;
    static BusMessage from_json(const nlohmann::json& j);

    friend bool operator==(const BusMessage&, const BusMessage&) = default;
};

/// In-process publish/subscribe. Subscribers run synchronously on the
/// publishing thread, in subscription order, and must not publish themselves.
class Bus {
public:
    using Handler = std::function<void(const BusMessage&)>;

    BusMessage publish(const std::string& topic, nlohmann::json payload);

    int subscribe(Handler handler);
    void unsubscribe(int id);

    std::vector<BusMessage> log() const;
    /// Messages with seq > after.
    std::vector<BusMessage> since(std::uint64_t after) const;
    std::size_t size() const;

    void write_ndjson(std::ostream& os) const;
    static std::vector<BusMessage> read_ndjson(std::istream& is);

private:
    mutable std::mutex mutex_;
    std::vector<BusMessage> log_;
    std::map<int, Handler> handlers_;
    int next_handler_ = 1;
};

}  // namespace polka_te
