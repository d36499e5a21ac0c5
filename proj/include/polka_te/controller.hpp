#pragma once

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "polka_te/bus.hpp"
#include "polka_te/netsim.hpp"
#include "polka_te/optimizer.hpp"
#include "polka_te/telemetry.hpp"

namespace polka_te {

struct UnknownFlow : std::out_of_range {
    explicit UnknownFlow(int id);
    int flow_id;
};

struct UnknownTunnel : std::out_of_range {
    explicit UnknownTunnel(int id);
    int tunnel_id;
};

/// Request conflicts with current state (duplicate match tuple, wrong flow state).
struct StateConflict : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class FlowState { Pending, Allocated, Failed };

std::string to_string(FlowState s);

struct FlowIntent {
    std::string src;
    std::string dst;
    int protocol = 6;
    int tos = 0;
    double demand_mbps = 0.0;
    Objective objective = Objective::MaxPredictedBandwidth;
    std::optional<int> tunnel;  // pin to one candidate

    nlohmann::json to_json() const;
    static FlowIntent from_json(const nlohmann::json& j);
};

struct FlowRecord {
    int id = 0;
    FlowIntent intent;
    FlowState state = FlowState::Pending;
    int tunnel = 0;  // 0 until allocated
    std::string reason;  // set when FAILED

    nlohmann::json to_json() const;
};

struct AllocationRecord {
    int flow_id = 0;
    int tunnel = 0;  // 0 when no candidate was found
    Objective objective = Objective::MaxPredictedBandwidth;
    double objective_value = 0.0;
    std::map<int, std::vector<double>> forecasts;
    std::map<int, double> latencies;
    bool fallback = false;  // some candidate lacked history for the model
    bool migrated = false;

    nlohmann::json to_json() const;
};

struct ControllerConfig {
    std::string model = "RFR";
    int n_lags = 10;
    int horizon = 10;
    std::size_t history = 120;  // samples used to fit each per-path model
    double tick_seconds = 1.0;
    std::uint64_t seed = 42;
    HorizonAggregation aggregation = HorizonAggregation::Min;
};

/// Owns the simulator, telemetry store and bus. Every mutation takes the
/// command lock, so allocation pipelines never interleave with ticks.
class Controller {
public:
    explicit Controller(Topology topo, ControllerConfig config = {});
    ~Controller();
    Controller(const Controller&) = delete;
    Controller& operator=(const Controller&) = delete;

    /// Registers a PENDING flow and queues it for allocation.
    int request_flow(const FlowIntent& intent);
    /// Allocates every queued flow in request order.
    std::vector<AllocationRecord> run_pending();

    void tick();
    void advance(double seconds);

    /// Re-runs selection for an ALLOCATED flow and migrates if the choice changed.
    AllocationRecord reallocate(int flow_id, std::optional<Objective> objective = std::nullopt);
    /// One PBR modification at the ingress edge. Returns false for a no-op.
    bool migrate_flow(int flow_id, int tunnel_id);

    /// Background thread that allocates queued flows as they arrive.
    void start_worker();
    void stop_worker();
    /// Blocks until the queue is empty and no allocation is running.
    void wait_idle();

    std::vector<FlowRecord> flows() const;
    FlowRecord flow(int id) const;
    Topology topology() const;
    std::string edge_config(const std::string& edge) const;
    double clock() const;
    std::map<int, double> allocations() const;
    /// Deterministic summary of rules, active flows, allocations and clock.
    nlohmann::json state_json() const;

    Bus& bus() { return bus_; }
    const TelemetryStore& telemetry() const { return store_; }
    const ControllerConfig& config() const { return config_; }

private:
    AllocationRecord allocate_locked(int flow_id);
    AllocationRecord select_locked(FlowRecord& rec, Objective objective, const std::vector<int>& candidates);
    std::vector<int> candidates_locked(const FlowIntent& intent) const;
    void tick_locked();
    bool migrate_locked(FlowRecord& rec, int tunnel_id);
    FlowRecord& record_locked(int id);
    PbrRule rule_for(const FlowRecord& rec, int tunnel) const;

    ControllerConfig config_;
    Bus bus_;
    TelemetryStore store_;

    mutable std::mutex mutex_;
    Simulator sim_;
    std::map<int, FlowRecord> records_;
    std::deque<int> pending_;
    int next_flow_ = 1;

    std::condition_variable queue_cv_;
    std::condition_variable idle_cv_;
    bool busy_ = false;
    bool stop_ = false;
    std::thread worker_;
};

/// Rebuilds state from a bus log: flow.requested, pbr.installed, flow.migrated
/// and telemetry.tick are applied in seq order. Returns the same document as
/// Controller::state_json().
nlohmann::json replay_bus_log(const Topology& base, std::span<const BusMessage> log);

nlohmann::json rule_to_json(const PbrRule& r);
PbrRule rule_from_json(const nlohmann::json& j);

}  // namespace polka_te
