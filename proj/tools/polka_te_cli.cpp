// polka-te: scenarios, model training, route encoding and the HTTP gateway.

#include <CLI11.hpp>

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include "polka_te/controller.hpp"
#include "polka_te/gateway.hpp"
#include "polka_te/polka.hpp"
#include "polka_te/predictor.hpp"
#include "polka_te/scenario.hpp"
#include "polka_te/text.hpp"

namespace fs = std::filesystem;
using namespace polka_te;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitAssertion = 2;

std::optional<std::uint64_t> env_seed() {
    const char* s = std::getenv("POLKA_TE_SEED");
    if (!s || !*s) return std::nullopt;
    return std::stoull(s);
}

/// Relative topology paths fall back to the bundled data directory.
std::string resolve(const std::string& path, const std::string& data_dir) {
    if (fs::exists(path)) return path;
    const auto bundled = fs::path(data_dir) / path;
    if (fs::exists(bundled)) return bundled.string();
    throw std::runtime_error("cannot find '" + path + "'");
}

SeriesTable load_dataset(const std::string& spec) {
    if (spec.starts_with("synthetic:")) return generate_synthetic_wireless(std::stoull(spec.substr(10)));
    return read_series_csv_file(spec);
}

int cmd_scenario(const std::string& name, const std::string& out, const std::string& data_dir) {
    const auto report = run_named_scenario(name, data_dir, env_seed());
    write_scenario_outputs(report, out);
    std::cout << format_scenario_report(report);
    std::cout << "outputs written to " << out << "\n";
    return report.passed() ? 0 : kExitAssertion;
}

int cmd_train(const std::string& dataset, const std::string& out, const std::vector<std::string>& models) {
    EvalConfig cfg;
    if (const auto s = env_seed()) cfg.seed = *s;
    if (!models.empty()) cfg.models = models;
    const auto table = load_dataset(dataset);
    if (table.names.size() < 2) throw std::invalid_argument("dataset needs at least 2 series, got " + std::to_string(table.names.size()));
    const auto report = evaluate_models(table, cfg);

    fs::create_directories(out);
    std::ofstream csv(fs::path(out) / "report.csv", std::ios::binary);
    write_report_csv(csv, report);
    std::ofstream scatter(fs::path(out) / "scatter.csv", std::ios::binary);
    write_scatter_csv(scatter, report);

    std::cout << "model";
    for (const auto& p : report.paths) std::cout << '\t' << p;
    std::cout << '\n';
    for (const auto& [name, errs] : report.rmse) {
        std::cout << name;
        for (std::size_t i = 0; i < errs.size(); ++i) {
            const bool beats = errs[i] < report.persistence_rmse[i];
            std::cout << '\t' << format_number(std::round(errs[i] * 1e4) / 1e4) << (beats ? "" : " (no better than persistence)");
        }
        std::cout << '\n';
    }
    std::cout << "persistence";
    for (const double e : report.persistence_rmse) std::cout << '\t' << format_number(std::round(e * 1e4) / 1e4);
    std::cout << "\nchosen model: " << report.chosen_model << '\n';
    return 0;
}

int cmd_encode(const std::string& topo_path, const std::string& spec) {
    const auto topo = load_topology_file(topo_path);
    std::vector<Hop> hops;
    for (const auto& e : parse_route_spec(spec)) {
        const auto& n = topo.node(e.node);
        if (!n.id) throw std::invalid_argument("'" + e.node + "' is not a core node");
        hops.push_back({*n.id, encode_port(static_cast<std::int64_t>(e.port))});
    }
    std::cout << route_id_for_path(hops).to_binary() << '\n';
    return 0;
}

int cmd_forward(const std::string& topo_path, const std::string& route, const std::string& node) {
    const auto topo = load_topology_file(topo_path);
    const auto& n = topo.node(node);
    if (!n.id) throw std::invalid_argument("'" + node + "' is not a core node");
    std::cout << decode_port(forward(RouteId{Gf2Poly::from_binary(route)}, *n.id).poly) << '\n';
    return 0;
}

int cmd_serve(const std::string& topo_path, const std::string& host, int port, double tick) {
    ControllerConfig cfg;
    cfg.tick_seconds = tick;
    if (const auto s = env_seed()) cfg.seed = *s;
    Controller ctl(load_topology_file(topo_path), cfg);
    ctl.start_worker();
    std::atomic<bool> running{true};
    std::thread ticker([&] {
        auto next = std::chrono::steady_clock::now();
        while (running) {
            next += std::chrono::duration_cast<std::chrono::steady_clock::duration>(std::chrono::duration<double>(tick));
            std::this_thread::sleep_until(next);
            if (running) ctl.tick();
        }
    });
    Gateway gw(ctl);
    std::cout << "serving " << topo_path << " on http://" << host << ":" << port << std::endl;
    const bool ok = gw.listen(host, port);
    running = false;
    ticker.join();
    if (!ok) {
        std::cerr << "error: cannot listen on " << host << ":" << port << '\n';
        return kExitUsage;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"PolKA traffic-engineering toolkit"};
    app.require_subcommand(1);
    std::string data_dir = POLKA_TE_DATA_DIR;
    app.add_option("--data", data_dir, "Directory with bundled topologies and scenarios");

    std::string topo = "p4lab.topo", host = "127.0.0.1";
    int port = 8080;
    double tick = 1.0;
    auto* serve = app.add_subcommand("serve", "Run the controller and HTTP gateway");
    serve->add_option("--topo", topo, "Topology file");
    serve->add_option("--host", host, "Bind address");
    serve->add_option("--port", port, "Port")->check(CLI::Range(1, 65535));
    serve->add_option("--tick", tick, "Seconds between telemetry ticks")->check(CLI::PositiveNumber);

    std::string scenario_name, out = "report";
    auto* scenario = app.add_subcommand("scenario", "Run a bundled experiment headlessly");
    scenario->add_option("name", scenario_name, "Scenario name")->required();
    scenario->add_option("--out", out, "Output directory");

    std::string dataset = "synthetic:42", train_out = "eval";
    std::vector<std::string> models;
    auto* train = app.add_subcommand("train", "Evaluate the regression models on a two-path dataset");
    train->add_option("--dataset", dataset, "CSV file or synthetic:<seed>");
    train->add_option("--out", train_out, "Output directory");
    train->add_option("--models", models, "Subset of LR,Ridge,Lasso,DTR,RFR,GBR")->delimiter(',');

    auto* route = app.add_subcommand("route", "PolKA routeID tools");
    route->require_subcommand(1);
    std::string route_topo = "demo3.topo", path_spec, route_id, node;
    auto* encode = route->add_subcommand("encode", "Compute the routeID of a node:port path");
    encode->add_option("--topo", route_topo, "Topology file");
    encode->add_option("--path", path_spec, "e.g. s1:1,s2:2,s3:6")->required();
    auto* fwd = route->add_subcommand("forward", "Output port of a routeID at one node");
    fwd->add_option("--topo", route_topo, "Topology file");
    fwd->add_option("--route", route_id, "routeID in binary, most significant bit first")->required();
    fwd->add_option("--node", node, "Core node label")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitUsage;
    }

    try {
        if (*serve) return cmd_serve(resolve(topo, data_dir), host, port, tick);
        if (*scenario) return cmd_scenario(scenario_name, out, data_dir);
        if (*train) return cmd_train(dataset, train_out, models);
        if (*encode) return cmd_encode(resolve(route_topo, data_dir), path_spec);
        if (*fwd) return cmd_forward(resolve(route_topo, data_dir), route_id, node);
    } catch (const RouteSpecError& e) {
        std::cerr << "error: " << e.what() << "\n  " << path_spec << "\n  " << std::string(e.position, ' ') << "^\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    }
    return kExitUsage;
}
