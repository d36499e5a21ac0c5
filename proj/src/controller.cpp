#include "polka_te/controller.hpp"

#include <algorithm>
#include <cmath>

#include "polka_te/predictor.hpp"
#include "polka_te/text.hpp"

namespace polka_te {

using nlohmann::json;

UnknownFlow::UnknownFlow(int id) : std::out_of_range("unknown flow " + std::to_string(id)), flow_id(id) {}

UnknownTunnel::UnknownTunnel(int id) : std::out_of_range("unknown tunnel " + std::to_string(id)), tunnel_id(id) {}

std::string to_string(FlowState s) {
    switch (s) {
        case FlowState::Pending: return "PENDING";
        case FlowState::Allocated: return "ALLOCATED";
        case FlowState::Failed: return "FAILED";
    }
    return "?";
}

json FlowIntent::to_json() const {
    json j{{"src", src},   {"dst", dst}, {"protocol", protocol}, {"tos", tos}, {"demand_mbps", demand_mbps},
           {"objective", polka_te::to_string(objective)}};
    if (tunnel) j["tunnel"] = *tunnel;
    return j;
}

FlowIntent FlowIntent::from_json(const json& j) {
    if (!j.is_object()) throw std::invalid_argument("flow intent must be a JSON object");
    FlowIntent in;
    try {
        in.src = j.at("src").get<std::string>();
        in.dst = j.at("dst").get<std::string>();
        in.protocol = j.value("protocol", 6);
        in.tos = j.value("tos", 0);
        in.demand_mbps = j.at("demand_mbps").get<double>();
        if (j.contains("objective")) in.objective = objective_from_string(j.at("objective").get<std::string>());
        if (j.contains("tunnel") && !j.at("tunnel").is_null()) in.tunnel = j.at("tunnel").get<int>();
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("malformed flow intent: ") + e.what());
    }
    return in;
}

json FlowRecord::to_json() const {
    json j{{"id", id}, {"state", polka_te::to_string(state)}, {"intent", intent.to_json()}};
    j["tunnel"] = tunnel == 0 ? json(nullptr) : json(tunnel);
    if (!reason.empty()) j["reason"] = reason;
    return j;
}

namespace {

json int_keyed(const std::map<int, std::vector<double>>& m) {
    json j = json::object();
    for (const auto& [k, v] : m) j[std::to_string(k)] = v;
    return j;
}

json int_keyed(const std::map<int, double>& m) {
    json j = json::object();
    for (const auto& [k, v] : m) j[std::to_string(k)] = v;
    return j;
}

std::string path_key(int tunnel, const char* metric) { return "path:" + std::to_string(tunnel) + ":" + metric; }

json state_of(const Simulator& sim) {
    json rules = json::array();
    for (const auto& r : sim.topology().rules()) rules.push_back(rule_to_json(r));
    json flows = json::array();
    for (const auto& [id, f] : sim.flows()) {
        flows.push_back({{"id", id},
                         {"src", f.src_host},
                         {"dst", f.dst_host},
                         {"protocol", f.protocol},
                         {"tos", f.tos},
                         {"demand_mbps", f.demand_mbps},
                         {"tunnel", sim.topology().match_rule(f).tunnel_id}});
    }
    json tunnels = json::array();
    for (const auto& [id, t] : sim.topology().tunnels()) {
        tunnels.push_back({{"id", id}, {"core", t.core_labels}, {"route_id", t.route_id.to_binary()}});
    }
    return {{"clock", sim.clock()},
            {"rules", rules},
            {"tunnels", tunnels},
            {"flows", flows},
            {"allocations", int_keyed(sim.allocations())}};
}

Flow flow_of(int id, const FlowIntent& in) { return {id, in.src, in.dst, in.protocol, in.tos, in.demand_mbps, true}; }

}  // namespace

json AllocationRecord::to_json() const {
    return {{"flow_id", flow_id},
            {"tunnel", tunnel},
            {"objective", polka_te::to_string(objective)},
            {"objective_value", objective_value},
            {"forecasts", int_keyed(forecasts)},
            {"latencies", int_keyed(latencies)},
            {"fallback", fallback},
            {"migrated", migrated}};
}

json rule_to_json(const PbrRule& r) {
    return {{"edge", r.edge},
            {"name", r.name},
            {"tunnel", r.tunnel_id},
            {"src_net", r.match.src_net},
            {"dst_addr", r.match.dst_addr},
            {"protocol", r.match.protocol},
            {"tos", r.match.tos}};
}

PbrRule rule_from_json(const json& j) {
    return {j.at("edge").get<std::string>(),
            {j.at("src_net").get<std::string>(), j.at("dst_addr").get<std::string>(), j.at("protocol").get<int>(),
             j.at("tos").get<int>()},
            j.at("tunnel").get<int>(),
            j.at("name").get<std::string>()};
}

Controller::Controller(Topology topo, ControllerConfig config) : config_(std::move(config)), sim_(std::move(topo)) {
    if (!(config_.tick_seconds > 0.0)) throw std::invalid_argument("tick_seconds must be positive");
    if (config_.n_lags < 1 || config_.horizon < 1) throw std::invalid_argument("n_lags and horizon must be >= 1");
    make_model(config_.model);  // reject unknown names up front
}

Controller::~Controller() { stop_worker(); }

FlowRecord& Controller::record_locked(int id) {
    const auto it = records_.find(id);
    if (it == records_.end()) throw UnknownFlow(id);
    return it->second;
}

std::vector<int> Controller::candidates_locked(const FlowIntent& intent) const {
    const auto& topo = sim_.topology();
    const auto& in = topo.edge_of_host(intent.src).label;
    const auto& out = topo.edge_of_host(intent.dst).label;
    std::vector<int> ids;
    for (const auto& [id, t] : topo.tunnels()) {
        if (t.ingress == in && t.egress == out) ids.push_back(id);
    }
    return ids;
}

PbrRule Controller::rule_for(const FlowRecord& rec, int tunnel) const {
    const auto& topo = sim_.topology();
    const auto& src = topo.node(rec.intent.src);
    const std::string net = src.network.empty() ? src.address + "/32" : src.network;
    return {topo.edge_of_host(rec.intent.src).label,
            {net, topo.node(rec.intent.dst).address, rec.intent.protocol, rec.intent.tos},
            tunnel,
            "flow" + std::to_string(rec.id)};
}

int Controller::request_flow(const FlowIntent& intent) {
    std::unique_lock lock(mutex_);
    const auto& topo = sim_.topology();
    for (const auto* h : {&intent.src, &intent.dst}) {
        if (!topo.has_node(*h)) throw std::invalid_argument("unknown host '" + *h + "'");
        if (topo.node(*h).kind != NodeKind::Host) throw std::invalid_argument("'" + *h + "' is not a host");
    }
    if (intent.src == intent.dst) throw std::invalid_argument("source and destination are the same host");
    if (!(intent.demand_mbps > 0.0) || !std::isfinite(intent.demand_mbps)) {
        throw std::invalid_argument("demand must be a positive number of Mbps");
    }
    if (intent.protocol < 0 || intent.protocol > 255) throw std::invalid_argument("protocol must be in 0..255");
    if (intent.tos < 0 || intent.tos > 255) throw std::invalid_argument("tos must be in 0..255");
    if (intent.objective != Objective::MaxPredictedBandwidth && intent.objective != Objective::MinLatency) {
        throw std::invalid_argument("flow objective must be max_predicted_bandwidth or min_latency");
    }
    if (intent.tunnel) {
        const auto c = candidates_locked(intent);
        if (std::find(c.begin(), c.end(), *intent.tunnel) == c.end()) {
            throw std::invalid_argument("tunnel " + std::to_string(*intent.tunnel) + " does not join these hosts");
        }
    }
    for (const auto& [id, r] : records_) {
        if (r.state == FlowState::Failed) continue;
        const auto& o = r.intent;
        if (o.src == intent.src && o.dst == intent.dst && o.protocol == intent.protocol && o.tos == intent.tos) {
            throw StateConflict("flow " + std::to_string(id) + " already uses this match tuple");
        }
    }
    const int id = next_flow_++;
    records_.emplace(id, FlowRecord{id, intent, FlowState::Pending, 0, {}});
    pending_.push_back(id);
    json payload = intent.to_json();
    payload["flow_id"] = id;
    bus_.publish(topics::kFlowRequested, payload);
    lock.unlock();
    queue_cv_.notify_all();
    return id;
}

std::vector<AllocationRecord> Controller::run_pending() {
    std::lock_guard lock(mutex_);
    std::vector<AllocationRecord> out;
    while (!pending_.empty()) {
        const int id = pending_.front();
        pending_.pop_front();
        out.push_back(allocate_locked(id));
    }
    return out;
}

AllocationRecord Controller::select_locked(FlowRecord& rec, Objective objective, const std::vector<int>& candidates) {
    const auto& topo = sim_.topology();
    json points = json::object();
    for (const int t : candidates) points[std::to_string(t)] = store_.size(path_key(t, "bandwidth"));
    bus_.publish(topics::kTelemetryQuery, {{"flow_id", rec.id}, {"history", config_.history}, {"points", points}});

    AllocationRecord out;
    out.flow_id = rec.id;
    out.objective = objective;
    std::map<LinkDir, double> load;
    bool have_load = false;
    for (const int t : candidates) {
        std::vector<double> values;
        for (const auto& s : store_.tail(path_key(t, "bandwidth"), config_.history)) values.push_back(s.value);
        if (values.size() >= static_cast<std::size_t>(config_.n_lags) + 2) {
            const auto f = fit_forecaster(values, config_.model, config_.n_lags, config_.seed);
            out.forecasts[t] = f.forecast(std::span<const double>(values).last(static_cast<std::size_t>(config_.n_lags)),
                                          config_.horizon);
        } else {
            out.fallback = true;
            double latest = 0.0;
            if (!values.empty()) {
                latest = values.back();
            } else {
                if (!have_load) {
                    const auto flows = sim_.flow_list();
                    load = link_loads(topo, flows, compute_allocations(topo, flows));
                    have_load = true;
                }
                latest = path_available(topo, topo.tunnel(t), load);
            }
            out.forecasts[t] = std::vector<double>(static_cast<std::size_t>(config_.horizon), latest);
        }
        const auto lat = store_.tail(path_key(t, "latency"), 1);
        out.latencies[t] = lat.empty() ? path_latency(topo, topo.tunnel(t)) : lat.back().value;
    }
    bus_.publish(topics::kPredictionReady, {{"flow_id", rec.id},
                                           {"model", config_.model},
                                           {"fallback", out.fallback},
                                           {"forecasts", int_keyed(out.forecasts)}});

    std::vector<Candidate> cands;
    for (const int t : candidates) cands.push_back({t, out.forecasts[t], out.latencies[t]});
    out.tunnel = select_path(cands, objective, config_.aggregation);
    out.objective_value = objective == Objective::MinLatency
                              ? out.latencies[out.tunnel]
                              : aggregate_forecast(out.forecasts[out.tunnel], config_.aggregation);
    bus_.publish(topics::kPathSelected, {{"flow_id", rec.id},
                                        {"objective", to_string(objective)},
                                        {"candidates", candidates},
                                        {"tunnel", out.tunnel},
                                        {"objective_value", out.objective_value},
                                        {"latencies", int_keyed(out.latencies)}});
    return out;
}

AllocationRecord Controller::allocate_locked(int flow_id) {
    auto& rec = record_locked(flow_id);
    if (rec.state != FlowState::Pending) throw StateConflict("flow " + std::to_string(flow_id) + " is not PENDING");
    auto fail = [&](const std::string& why) {
        rec.state = FlowState::Failed;
        rec.reason = why;
        bus_.publish(topics::kFlowFailed, {{"flow_id", flow_id}, {"reason", why}});
        AllocationRecord r;
        r.flow_id = flow_id;
        r.objective = rec.intent.objective;
        return r;
    };
    auto candidates = candidates_locked(rec.intent);
    if (rec.intent.tunnel) candidates = {*rec.intent.tunnel};
    if (candidates.empty()) return fail("no tunnel joins the flow's edge routers");

    auto out = select_locked(rec, rec.intent.objective, candidates);
    const auto rule = rule_for(rec, out.tunnel);
    try {
        sim_.topology().set_pbr(rule);
        sim_.add_flow(flow_of(flow_id, rec.intent));
    } catch (const std::exception& e) {
        return fail(e.what());
    }
    rec.state = FlowState::Allocated;
    rec.tunnel = out.tunnel;
    bus_.publish(topics::kPbrInstalled, {{"flow_id", flow_id}, {"tunnel", out.tunnel}, {"rule", rule_to_json(rule)}});
    bus_.publish(topics::kFlowAllocated, {{"flow_id", flow_id}, {"tunnel", out.tunnel}});
    return out;
}

void Controller::tick_locked() {
    const auto samples = sim_.advance(config_.tick_seconds);
    store_.append(samples);
    bus_.publish(topics::kTelemetryTick, {{"t", sim_.clock()}, {"dt", config_.tick_seconds}});
}

void Controller::tick() {
    std::lock_guard lock(mutex_);
    tick_locked();
}

void Controller::advance(double seconds) {
    const auto n = static_cast<long>(std::llround(seconds / config_.tick_seconds));
    for (long i = 0; i < n; ++i) tick();
}

bool Controller::migrate_locked(FlowRecord& rec, int tunnel_id) {
    if (rec.state != FlowState::Allocated) {
        throw StateConflict("flow " + std::to_string(rec.id) + " is " + to_string(rec.state) + ", not ALLOCATED");
    }
    const auto c = candidates_locked(rec.intent);
    if (std::find(c.begin(), c.end(), tunnel_id) == c.end()) {
        if (!sim_.topology().tunnels().contains(tunnel_id)) throw UnknownTunnel(tunnel_id);
        throw std::invalid_argument("tunnel " + std::to_string(tunnel_id) + " does not join flow " +
                                    std::to_string(rec.id) + "'s edge routers");
    }
    if (tunnel_id == rec.tunnel) return false;
    const auto rule = rule_for(rec, tunnel_id);
    sim_.topology().set_pbr(rule);
    bus_.publish(topics::kFlowMigrated,
                 {{"flow_id", rec.id}, {"from", rec.tunnel}, {"to", tunnel_id}, {"rule", rule_to_json(rule)}});
    rec.tunnel = tunnel_id;
    return true;
}

bool Controller::migrate_flow(int flow_id, int tunnel_id) {
    std::lock_guard lock(mutex_);
    return migrate_locked(record_locked(flow_id), tunnel_id);
}

AllocationRecord Controller::reallocate(int flow_id, std::optional<Objective> objective) {
    std::lock_guard lock(mutex_);
    auto& rec = record_locked(flow_id);
    if (rec.state != FlowState::Allocated) {
        throw StateConflict("flow " + std::to_string(flow_id) + " is " + to_string(rec.state) + ", not ALLOCATED");
    }
    const Objective obj = objective.value_or(rec.intent.objective);
    if (obj != Objective::MaxPredictedBandwidth && obj != Objective::MinLatency) {
        throw std::invalid_argument("reallocation objective must be max_predicted_bandwidth or min_latency");
    }
    auto out = select_locked(rec, obj, candidates_locked(rec.intent));
    out.migrated = migrate_locked(rec, out.tunnel);
    return out;
}

void Controller::start_worker() {
    std::lock_guard lock(mutex_);
    if (worker_.joinable()) return;
    stop_ = false;
    worker_ = std::thread([this] {
        std::unique_lock lock(mutex_);
        while (true) {
            queue_cv_.wait(lock, [&] { return stop_ || !pending_.empty(); });
            if (stop_) return;
            busy_ = true;
            const int id = pending_.front();
            pending_.pop_front();
            try {
                allocate_locked(id);
            } catch (const std::exception& e) {
                auto& rec = records_.at(id);
                if (rec.state == FlowState::Pending) {
                    rec.state = FlowState::Failed;
                    rec.reason = e.what();
                    bus_.publish(topics::kFlowFailed, {{"flow_id", id}, {"reason", rec.reason}});
                }
            }
            busy_ = false;
            idle_cv_.notify_all();
        }
    });
}

void Controller::stop_worker() {
    {
        std::lock_guard lock(mutex_);
        stop_ = true;
    }
    queue_cv_.notify_all();
    if (worker_.joinable()) worker_.join();
}

void Controller::wait_idle() {
    std::unique_lock lock(mutex_);
    idle_cv_.wait(lock, [&] { return pending_.empty() && !busy_; });
}

std::vector<FlowRecord> Controller::flows() const {
    std::lock_guard lock(mutex_);
    std::vector<FlowRecord> out;
    for (const auto& [_, r] : records_) out.push_back(r);
    return out;
}

FlowRecord Controller::flow(int id) const {
    std::lock_guard lock(mutex_);
    const auto it = records_.find(id);
    if (it == records_.end()) throw UnknownFlow(id);
    return it->second;
}

Topology Controller::topology() const {
    std::lock_guard lock(mutex_);
    return sim_.topology();
}

std::string Controller::edge_config(const std::string& edge) const {
    std::lock_guard lock(mutex_);
    return render_edge_config(sim_.topology(), edge);
}

double Controller::clock() const {
    std::lock_guard lock(mutex_);
    return sim_.clock();
}

std::map<int, double> Controller::allocations() const {
    std::lock_guard lock(mutex_);
    return sim_.allocations();
}

json Controller::state_json() const {
    std::lock_guard lock(mutex_);
    return state_of(sim_);
}

json replay_bus_log(const Topology& base, std::span<const BusMessage> log) {
    Simulator sim(base);
    std::map<int, FlowIntent> intents;
    for (const auto& m : log) {
        const auto& p = m.payload;
        if (m.topic == topics::kFlowRequested) {
            intents[p.at("flow_id").get<int>()] = FlowIntent::from_json(p);
        } else if (m.topic == topics::kPbrInstalled) {
            const int id = p.at("flow_id").get<int>();
            sim.topology().set_pbr(rule_from_json(p.at("rule")));
            sim.add_flow(flow_of(id, intents.at(id)));
        } else if (m.topic == topics::kFlowMigrated) {
            sim.topology().set_pbr(rule_from_json(p.at("rule")));
        } else if (m.topic == topics::kTelemetryTick) {
            sim.advance(p.at("dt").get<double>());
        }
    }
    return state_of(sim);
}

}  // namespace polka_te
