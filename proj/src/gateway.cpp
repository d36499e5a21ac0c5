#include "polka_te/gateway.hpp"

#include <httplib.h>

#include <chrono>
#include <condition_variable>
#include <deque>
#include <limits>
#include <mutex>

#include "polka_te/text.hpp"

namespace polka_te {

using nlohmann::json;

namespace {

void send_json(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& code, const std::string& reason) {
    send_json(res, status, {{"error", code}, {"reason", reason}});
}

/// Maps controller exceptions onto HTTP statuses.
template <typename F>
void guarded(httplib::Response& res, F&& body) {
    try {
        body();
    } catch (const json::parse_error& e) {
        send_error(res, 400, "malformed_json", e.what());
    } catch (const UnknownFlow& e) {
        send_error(res, 404, "unknown_flow", e.what());
    } catch (const UnknownTunnel& e) {
        send_error(res, 422, "unknown_tunnel", e.what());
    } catch (const StateConflict& e) {
        send_error(res, 409, "conflict", e.what());
    } catch (const std::invalid_argument& e) {
        send_error(res, 422, "invalid_request", e.what());
    } catch (const std::exception& e) {
        send_error(res, 500, "internal", e.what());
    }
}

/// Query parameters that fail to parse are a 400, not a 422.
std::optional<double> number_param(const httplib::Request& req, const char* name) {
    if (!req.has_param(name)) return std::nullopt;
    try {
        return parse_number(req.get_param_value(name), name);
    } catch (const std::invalid_argument&) {
        return std::numeric_limits<double>::quiet_NaN();
    }
}

int flow_id_of(const httplib::Request& req) {
    const auto& s = req.matches[1].str();
    try {
        std::size_t used = 0;
        const int id = std::stoi(s, &used);
        if (used == s.size()) return id;
    } catch (const std::exception&) {
    }
    throw UnknownFlow(-1);
}

json parse_body(const httplib::Request& req) {
    if (req.body.empty()) return json::object();
    return json::parse(req.body);
}

std::string sse_frame(const BusMessage& m) {
    return "id: " + std::to_string(m.seq) + "\nevent: " + m.topic + "\ndata: " + m.to_json().dump() + "\n\n";
}

}  // namespace

Gateway::Gateway(Controller& controller) : ctl_(controller), server_(std::make_unique<httplib::Server>()) { routes(); }

Gateway::~Gateway() { stop(); }

void Gateway::routes() {
    auto& s = *server_;
    s.set_default_headers({{"Access-Control-Allow-Origin", "*"}});
    s.Options(".*", [](const httplib::Request&, httplib::Response& res) {
        res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
        res.set_header("Access-Control-Allow-Headers", "Content-Type");
        res.status = 204;
    });

    s.Get("/topology", [this](const httplib::Request&, httplib::Response& res) {
        guarded(res, [&] {
            const auto topo = ctl_.topology();
            auto doc = topo.to_json();
            json util = json::object();
            for (std::size_t i = 0; i < topo.links().size(); ++i) {
                for (const bool fwd : {true, false}) {
                    const auto key = topo.link_key({i, fwd});
                    const auto last = ctl_.telemetry().tail("link:" + key + ":utilization", 1);
                    util[key] = last.empty() ? 0.0 : last.back().value;
                }
            }
            doc["utilization"] = util;
            doc["clock"] = ctl_.clock();
            send_json(res, 200, doc);
        });
    });

    s.Get("/flows", [this](const httplib::Request&, httplib::Response& res) {
        guarded(res, [&] {
            const auto rates = ctl_.allocations();
            json out = json::array();
            for (const auto& f : ctl_.flows()) {
                auto j = f.to_json();
                const auto it = rates.find(f.id);
                j["throughput_mbps"] = it == rates.end() ? 0.0 : it->second;
                out.push_back(j);
            }
            send_json(res, 200, out);
        });
    });

    s.Post("/flows", [this](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            const int id = ctl_.request_flow(FlowIntent::from_json(parse_body(req)));
            send_json(res, 202, {{"flow_id", id}, {"state", "PENDING"}});
        });
    });

    s.Post(R"(/flows/([^/]+)/migrate)", [this](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            const int id = flow_id_of(req);
            const auto body = parse_body(req);
            if (!body.contains("tunnel") || !body.at("tunnel").is_number_integer()) {
                throw std::invalid_argument("body must carry an integer \"tunnel\"");
            }
            const int tunnel = body.at("tunnel").get<int>();
            const bool changed = ctl_.migrate_flow(id, tunnel);
            send_json(res, 200, {{"flow_id", id}, {"tunnel", tunnel}, {"changed", changed}});
        });
    });

    s.Post(R"(/flows/([^/]+)/reallocate)", [this](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            const int id = flow_id_of(req);
            const auto body = parse_body(req);
            std::optional<Objective> obj;
            if (body.contains("objective")) obj = objective_from_string(body.at("objective").get<std::string>());
            send_json(res, 200, ctl_.reallocate(id, obj).to_json());
        });
    });

    s.Get(R"(/telemetry/(.+))", [this](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            const auto series = req.matches[1].str();
            std::size_t n = 60;
            if (const auto v = number_param(req, "n")) {
                if (!(*v >= 1) || *v != std::floor(*v)) {
                    send_error(res, 400, "bad_parameter", "n must be a positive integer");
                    return;
                }
                n = static_cast<std::size_t>(*v);
            }
            if (!ctl_.telemetry().contains(series)) {
                send_error(res, 404, "unknown_series", "no series '" + series + "'");
                return;
            }
            json samples = json::array();
            for (const auto& smp : ctl_.telemetry().tail(series, n)) samples.push_back({{"t", smp.t}, {"value", smp.value}});
            send_json(res, 200, {{"series", series}, {"samples", samples}});
        });
    });

    s.Get(R"(/config/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            const auto edge = req.matches[1].str();
            if (!ctl_.topology().has_node(edge)) {
                send_error(res, 404, "unknown_node", "no node '" + edge + "'");
                return;
            }
            res.set_content(ctl_.edge_config(edge), "text/plain");
        });
    });

    s.Get("/events", [this](const httplib::Request& req, httplib::Response& res) {
        struct Stream {
            std::mutex mutex;
            std::condition_variable cv;
            std::deque<BusMessage> queue;
            std::uint64_t last_sent = 0;
            int subscription = 0;
        };
        auto st = std::make_shared<Stream>();
        std::uint64_t since = ctl_.bus().size();
        if (const auto v = number_param(req, "since")) {
            if (!(*v >= 0) || *v != std::floor(*v)) {
                send_error(res, 400, "bad_parameter", "since must be a non-negative integer");
                return;
            }
            since = static_cast<std::uint64_t>(*v);
        }

        st->subscription = ctl_.bus().subscribe([st](const BusMessage& m) {
            std::lock_guard lock(st->mutex);
            st->queue.push_back(m);
            st->cv.notify_all();
        });
        {
            // fetch before taking the stream lock; publishers hold the bus lock while they queue
            const auto backlog = ctl_.bus().since(since);
            std::lock_guard lock(st->mutex);
            st->queue.insert(st->queue.begin(), backlog.begin(), backlog.end());
            st->last_sent = since;
        }
        res.set_header("Cache-Control", "no-cache");
        res.set_chunked_content_provider(
            "text/event-stream",
            [this, st](std::size_t, httplib::DataSink& sink) {
                std::unique_lock lock(st->mutex);
                st->cv.wait_for(lock, std::chrono::milliseconds(200), [&] { return !st->queue.empty(); });
                if (stopping_) return false;
                std::string out;
                while (!st->queue.empty()) {
                    auto m = std::move(st->queue.front());
                    st->queue.pop_front();
                    if (m.seq <= st->last_sent) continue;  // already sent from the backlog
                    st->last_sent = m.seq;
                    out += sse_frame(m);
                }
                lock.unlock();
                if (out.empty()) out = ": keep-alive\n\n";
                return sink.write(out.data(), out.size());
            },
            [this, st](bool) { ctl_.bus().unsubscribe(st->subscription); });
    });
}

int Gateway::start(const std::string& host, int port) {
    port_ = port == 0 ? server_->bind_to_any_port(host) : (server_->bind_to_port(host, port) ? port : -1);
    if (port_ < 0) throw std::runtime_error("cannot bind " + host + ":" + std::to_string(port));
    thread_ = std::thread([this] { server_->listen_after_bind(); });
    server_->wait_until_ready();
    return port_;
}

bool Gateway::listen(const std::string& host, int port) {
    port_ = port;
    return server_->listen(host, port);
}

void Gateway::stop() {
    stopping_ = true;
    server_->stop();
    if (thread_.joinable()) thread_.join();
}

}  // namespace polka_te
