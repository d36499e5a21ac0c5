#include "polka_te/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "polka_te/controller.hpp"
#include "polka_te/text.hpp"

namespace polka_te {

using nlohmann::json;
namespace fs = std::filesystem;

bool ScenarioReport::passed() const {
    const bool checks_ok = std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.pass; });
    const bool migrations_ok = std::all_of(migrations.begin(), migrations.end(), [](const auto& m) { return m.pass; });
    return checks_ok && migrations_ok && final_state == replayed_state;
}

json ScenarioReport::summary() const {
    json cs = json::array();
    for (const auto& c : checks) {
        json j{{"label", c.label}, {"metric", c.metric}, {"at", c.at}, {"actual", c.actual}, {"pass", c.pass}};
        if (c.equals) j["equals"] = *c.equals;
        if (c.min) j["min"] = *c.min;
        if (c.max) j["max"] = *c.max;
        if (c.reference) j["reference"] = *c.reference;
        cs.push_back(j);
    }
    json ms = json::array();
    for (const auto& m : migrations) {
        ms.push_back({{"flow", m.flow},
                      {"from", m.from},
                      {"to", m.to},
                      {"at", m.at},
                      {"edge", m.edge},
                      {"rules_changed", m.rules_changed},
                      {"tunnels_changed", m.tunnels_changed},
                      {"pass", m.pass}});
    }
    return {{"schema_version", kScenarioSchemaVersion},
            {"scenario", name},
            {"seed", seed},
            {"checks", cs},
            {"migrations", ms},
            {"replay_matches", final_state == replayed_state},
            {"final_state", final_state},
            {"passed", passed()}};
}

namespace {

double value_at(const TelemetryStore& store, const std::string& key, double t) {
    for (const auto& s : store.tail(key, store.size(key))) {
        if (s.t == t) return s.value;
    }
    throw std::invalid_argument("no sample of '" + key + "' at t=" + format_number(t));
}

double metric_at(const TelemetryStore& store, const json& check, int n_flows) {
    const auto metric = check.at("metric").get<std::string>();
    const double t = check.at("at").get<double>();
    if (metric == "aggregate_throughput_mbps") {
        double sum = 0.0;
        for (int f = 1; f <= n_flows; ++f) sum += value_at(store, "flow:" + std::to_string(f) + ":throughput", t);
        return sum;
    }
    if (metric == "flow_throughput_mbps" || metric == "flow_latency_ms") {
        const auto suffix = metric == "flow_throughput_mbps" ? ":throughput" : ":latency";
        return value_at(store, "flow:" + std::to_string(check.at("flow").get<int>()) + suffix, t);
    }
    if (metric == "tunnel_latency_ms") {
        return value_at(store, "path:" + std::to_string(check.at("tunnel").get<int>()) + ":latency", t);
    }
    throw std::invalid_argument("unknown scenario metric '" + metric + "'");
}

MigrationAudit audit(const Topology& before, const Topology& after, const std::string& ingress) {
    MigrationAudit a;
    const auto& rb = before.rules();
    const auto& ra = after.rules();
    const std::size_t common = std::min(rb.size(), ra.size());
    for (std::size_t i = 0; i < common; ++i) {
        if (rb[i] != ra[i]) {
            ++a.rules_changed;
            a.edge = ra[i].edge;
            if (!(rb[i].edge == ra[i].edge && rb[i].match == ra[i].match && rb[i].name == ra[i].name)) {
                ++a.rules_changed;  // a changed match tuple counts as remove + add
            }
        }
    }
    a.rules_changed += static_cast<int>(std::max(rb.size(), ra.size()) - common);
    if (before.tunnels() != after.tunnels()) {
        for (const auto& [id, t] : after.tunnels()) {
            if (!before.tunnels().contains(id) || before.tunnels().at(id) != t) ++a.tunnels_changed;
        }
        for (const auto& [id, _] : before.tunnels()) {
            if (!after.tunnels().contains(id)) ++a.tunnels_changed;
        }
    }
    for (std::size_t i = 0; i < before.nodes().size(); ++i) {
        const auto& nb = before.nodes()[i];
        const auto& na = after.nodes()[i];
        if (nb.id.has_value() != na.id.has_value() || (nb.id && nb.id->poly != na.id->poly)) ++a.tunnels_changed;
    }
    a.pass = a.rules_changed == 1 && a.tunnels_changed == 0 && a.edge == ingress;
    return a;
}

}  // namespace

ScenarioReport run_scenario(const json& script, const Topology& topo, std::uint64_t seed) {
    ScenarioReport report;
    report.name = script.at("name").get<std::string>();
    report.seed = seed;

    ControllerConfig cfg;
    cfg.seed = seed;
    if (script.contains("model")) cfg.model = script.at("model").get<std::string>();
    Controller ctl(topo, cfg);

    std::vector<json> actions = script.at("actions").get<std::vector<json>>();
    std::stable_sort(actions.begin(), actions.end(),
                     [](const json& a, const json& b) { return a.at("at").get<double>() < b.at("at").get<double>(); });
    int n_flows = 0;
    for (const auto& act : actions) {
        const double at = act.at("at").get<double>();
        if (at < ctl.clock()) throw std::invalid_argument("scenario action at t=" + format_number(at) + " is in the past");
        while (ctl.clock() + 1e-9 < at) ctl.tick();
        const auto op = act.at("op").get<std::string>();
        if (op == "start_flow") {
            ctl.request_flow(FlowIntent::from_json(act.at("flow")));
            ++n_flows;
            for (const auto& r : ctl.run_pending()) {
                if (r.tunnel == 0 || ctl.flow(r.flow_id).state != FlowState::Allocated) {
                    throw std::runtime_error("scenario flow " + std::to_string(r.flow_id) + " failed to allocate");
                }
            }
        } else if (op == "reallocate" || op == "migrate") {
            const int flow = act.at("flow").get<int>();
            const auto before = ctl.topology();
            const int from = ctl.flow(flow).tunnel;
            bool moved = false;
            if (op == "reallocate") {
                std::optional<Objective> obj;
                if (act.contains("objective")) obj = objective_from_string(act.at("objective").get<std::string>());
                moved = ctl.reallocate(flow, obj).migrated;
            } else {
                moved = ctl.migrate_flow(flow, act.at("tunnel").get<int>());
            }
            const auto after = ctl.topology();
            auto a = audit(before, after, before.edge_of_host(ctl.flow(flow).intent.src).label);
            a.flow = flow;
            a.from = from;
            a.to = ctl.flow(flow).tunnel;
            a.at = at;
            if (!moved) a.pass = a.rules_changed == 0 && a.tunnels_changed == 0;
            report.migrations.push_back(a);
        } else if (op != "end") {
            throw std::invalid_argument("unknown scenario op '" + op + "'");
        }
    }

    for (const auto& c : script.value("expect", json::array())) {
        ScenarioCheck chk;
        chk.metric = c.at("metric").get<std::string>();
        chk.label = c.value("label", chk.metric);
        chk.at = c.at("at").get<double>();
        chk.actual = metric_at(ctl.telemetry(), c, n_flows);
        chk.tolerance = c.value("tolerance", 1e-9);
        if (c.contains("equals")) chk.equals = c.at("equals").get<double>();
        if (c.contains("min")) chk.min = c.at("min").get<double>();
        if (c.contains("max")) chk.max = c.at("max").get<double>();
        if (c.contains("reference")) chk.reference = c.at("reference").get<double>();
        chk.pass = (!chk.equals || std::abs(chk.actual - *chk.equals) <= chk.tolerance) &&
                   (!chk.min || chk.actual >= *chk.min - chk.tolerance) &&
                   (!chk.max || chk.actual <= *chk.max + chk.tolerance);
        report.checks.push_back(chk);
    }

    std::vector<std::string> keys;
    for (int f = 1; f <= n_flows; ++f) {
        keys.push_back("flow:" + std::to_string(f) + ":throughput");
        keys.push_back("flow:" + std::to_string(f) + ":latency");
    }
    for (const auto& [id, _] : topo.tunnels()) {
        keys.push_back("path:" + std::to_string(id) + ":latency");
        keys.push_back("path:" + std::to_string(id) + ":bandwidth");
    }
    std::ostringstream csv;
    csv << "# schema_version=" << kScenarioSchemaVersion << '\n';
    ctl.telemetry().export_csv(csv, keys);
    report.timeseries_csv = csv.str();

    std::ostringstream log;
    ctl.bus().write_ndjson(log);
    report.bus_log_ndjson = log.str();
    report.final_state = ctl.state_json();
    const auto messages = ctl.bus().log();
    report.replayed_state = replay_bus_log(topo, messages);
    return report;
}

std::vector<std::string> available_scenarios(const std::string& data_dir) {
    std::vector<std::string> names;
    const fs::path dir = fs::path(data_dir) / "scenarios";
    if (!fs::is_directory(dir)) return names;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.path().extension() == ".json") names.push_back(e.path().stem().string());
    }
    std::sort(names.begin(), names.end());
    return names;
}

ScenarioReport run_named_scenario(const std::string& name, const std::string& data_dir,
                                  std::optional<std::uint64_t> seed) {
    const auto names = available_scenarios(data_dir);
    if (std::find(names.begin(), names.end(), name) == names.end()) {
        std::string list;
        for (const auto& n : names) list += (list.empty() ? "" : ", ") + n;
        throw std::invalid_argument("unknown scenario '" + name + "' (available: " + list + ")");
    }
    std::ifstream in(fs::path(data_dir) / "scenarios" / (name + ".json"));
    const auto script = json::parse(in);
    const auto topo = load_topology_file((fs::path(data_dir) / script.at("topology").get<std::string>()).string());
    return run_scenario(script, topo, seed.value_or(script.value("seed", std::uint64_t{42})));
}

void write_scenario_outputs(const ScenarioReport& report, const std::string& out_dir) {
    fs::create_directories(out_dir);
    auto write = [&](const char* file, const std::string& text) {
        std::ofstream out(fs::path(out_dir) / file, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write '" + (fs::path(out_dir) / file).string() + "'");
        out << text;
    };
    write("timeseries.csv", report.timeseries_csv);
    write("summary.json", report.summary().dump(2) + "\n");
    write("bus_log.ndjson", report.bus_log_ndjson);
}

std::string format_scenario_report(const ScenarioReport& report) {
    std::ostringstream os;
    os << "scenario " << report.name << " (seed " << report.seed << ")\n";
    for (const auto& c : report.checks) {
        os << (c.pass ? "  ok   " : "  FAIL ") << c.label << ": " << format_number(c.actual) << " at t=" << format_number(c.at);
        if (c.equals) os << " (expected " << format_number(*c.equals) << ")";
        if (c.min) os << " (min " << format_number(*c.min) << ")";
        if (c.max) os << " (max " << format_number(*c.max) << ")";
        if (c.reference) os << " [testbed reported " << format_number(*c.reference) << "]";
        os << '\n';
    }
    for (const auto& m : report.migrations) {
        os << (m.pass ? "  ok   " : "  FAIL ") << "flow " << m.flow << " tunnel " << m.from << " -> " << m.to
           << " at t=" << format_number(m.at) << ": " << m.rules_changed << " PBR rule(s) changed"
           << (m.edge.empty() ? "" : " at " + m.edge) << ", " << m.tunnels_changed << " tunnel/core change(s)\n";
    }
    os << (report.final_state == report.replayed_state ? "  ok   " : "  FAIL ") << "bus log replay reproduces final state\n";
    return os.str();
}

}  // namespace polka_te
