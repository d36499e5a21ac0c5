#include "polka_te/netsim.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <limits>
#include <set>
#include <sstream>

#include "polka_te/text.hpp"

namespace polka_te {

using nlohmann::json;

UnroutableFlow::UnroutableFlow(int id, const std::string& why)
    : std::runtime_error("flow " + std::to_string(id) + " is unroutable: " + why), flow_id(id) {}

std::string to_string(NodeKind kind) {
    switch (kind) {
        case NodeKind::Core: return "core";
        case NodeKind::Edge: return "edge";
        case NodeKind::Host: return "host";
    }
    return "?";
}

namespace {

NodeKind parse_kind(const std::string& s) {
    if (s == "core") return NodeKind::Core;
    if (s == "edge") return NodeKind::Edge;
    if (s == "host") return NodeKind::Host;
    throw TopologyError("unknown node kind '" + s + "'");
}

std::string mask_of(int prefix) {
    const std::uint32_t m = prefix == 0 ? 0 : ~std::uint32_t{0} << (32 - prefix);
    return std::to_string(m >> 24) + "." + std::to_string((m >> 16) & 255) + "." + std::to_string((m >> 8) & 255) +
           "." + std::to_string(m & 255);
}

}  // namespace

std::uint32_t parse_ipv4(const std::string& s) {
    const auto parts = split(s, '.');
    if (parts.size() != 4) throw std::invalid_argument("malformed IPv4 address '" + s + "'");
    std::uint32_t out = 0;
    for (const auto& p : parts) {
        if (p.empty() || p.size() > 3 || p.find_first_not_of("0123456789") != std::string::npos) {
            throw std::invalid_argument("malformed IPv4 address '" + s + "'");
        }
        const int v = std::stoi(p);
        if (v > 255) throw std::invalid_argument("malformed IPv4 address '" + s + "'");
        out = (out << 8) | static_cast<std::uint32_t>(v);
    }
    return out;
}

int cidr_prefix_length(const std::string& cidr) {
    const auto slash = cidr.find('/');
    if (slash == std::string::npos) {
        parse_ipv4(cidr);
        return 32;
    }
    const auto len = cidr.substr(slash + 1);
    if (len.empty() || len.find_first_not_of("0123456789") != std::string::npos || std::stoi(len) > 32) {
        throw std::invalid_argument("malformed prefix length in '" + cidr + "'");
    }
    parse_ipv4(cidr.substr(0, slash));
    return std::stoi(len);
}

bool cidr_contains(const std::string& cidr, const std::string& addr) {
    const int prefix = cidr_prefix_length(cidr);
    const auto net = parse_ipv4(cidr.substr(0, cidr.find('/')));
    const std::uint32_t mask = prefix == 0 ? 0 : ~std::uint32_t{0} << (32 - prefix);
    return (net & mask) == (parse_ipv4(addr) & mask);
}

// ---------------------------------------------------------------------------
// Topology

Topology Topology::from_json(const json& doc) {
    Topology topo;
    topo.name_ = doc.value("name", "topology");

    if (!doc.contains("nodes") || !doc["nodes"].is_array() || doc["nodes"].empty()) {
        throw TopologyError("topology has no nodes");
    }
    std::set<std::string> seen;
    for (const auto& jn : doc["nodes"]) {
        Node n;
        n.label = jn.at("label").get<std::string>();
        if (n.label.empty()) throw TopologyError("node with empty label");
        if (!seen.insert(n.label).second) throw TopologyError("duplicate node label '" + n.label + "'");
        n.kind = parse_kind(jn.value("kind", "core"));
        if (jn.contains("node_id")) {
            if (n.kind != NodeKind::Core) throw TopologyError("node '" + n.label + "' is not a core node but has a node_id");
            n.id = NodeId{Gf2Poly::parse(jn["node_id"].get<std::string>()), n.label};
        }
        n.address = jn.value("address", jn.value("loopback", ""));
        n.network = jn.value("network", "");
        if (n.kind == NodeKind::Host) {
            if (n.address.empty()) throw TopologyError("host '" + n.label + "' has no address");
            parse_ipv4(n.address);
            if (n.network.empty()) n.network = n.address + "/32";
            if (!cidr_contains(n.network, n.address)) {
                throw TopologyError("host '" + n.label + "' address is outside its network");
            }
        }
        if (jn.contains("pos")) {
            n.x = jn["pos"].at(0).get<double>();
            n.y = jn["pos"].at(1).get<double>();
        }
        topo.nodes_.push_back(std::move(n));
    }

    std::vector<std::set<std::uint64_t>> used_ports(topo.nodes_.size());
    std::vector<std::uint64_t> next_port(topo.nodes_.size(), 1);
    auto claim_port = [&](std::size_t node, const json& jl, const char* field) {
        std::uint64_t port = 0;
        if (jl.contains(field)) {
            port = jl[field].get<std::uint64_t>();
            if (port == 0) throw TopologyError("port 0 is reserved for local delivery");
        } else {
            while (used_ports[node].contains(next_port[node])) ++next_port[node];
            port = next_port[node];
        }
        if (!used_ports[node].insert(port).second) {
            throw TopologyError("port " + std::to_string(port) + " used twice on '" + topo.nodes_[node].label + "'");
        }
        return port;
    };

    for (const auto& jl : doc.value("links", json::array())) {
        const auto a = jl.at("a").get<std::string>();
        const auto b = jl.at("b").get<std::string>();
        if (!seen.contains(a) || !seen.contains(b)) {
            throw TopologyError("dangling link " + a + " - " + b + ": unknown endpoint");
        }
        if (a == b) throw TopologyError("self-loop on '" + a + "'");
        Link l;
        l.a = topo.index_of(a);
        l.b = topo.index_of(b);
        if (topo.link_between(l.a, l.b)) throw TopologyError("duplicate link " + a + " - " + b);
        l.capacity_mbps = jl.value("capacity_mbps", kDefaultLinkCapacityMbps);
        l.latency_ms = jl.value("latency_ms", kDefaultLinkLatencyMs);
        if (!(l.capacity_mbps > 0.0)) throw TopologyError("link " + a + " - " + b + " has non-positive capacity");
        if (!(l.latency_ms >= 0.0)) throw TopologyError("link " + a + " - " + b + " has negative latency");
        l.a_port = claim_port(l.a, jl, "a_port");
        l.b_port = claim_port(l.b, jl, "b_port");
        topo.links_.push_back(l);
    }

    // nodeIDs: keep the given ones, generate the rest from the same enumeration.
    std::uint64_t max_port = 1;
    std::vector<std::size_t> cores;
    std::set<Gf2Poly> given;
    for (std::size_t i = 0; i < topo.nodes_.size(); ++i) {
        if (topo.nodes_[i].kind != NodeKind::Core) continue;
        cores.push_back(i);
        for (const auto p : used_ports[i]) max_port = std::max(max_port, p);
        if (topo.nodes_[i].id) given.insert(topo.nodes_[i].id->poly);
    }
    if (!cores.empty() && given.size() < cores.size()) {
        const auto pool = gen_node_ids(static_cast<int>(cores.size() + given.size()), static_cast<int>(max_port));
        auto next = pool.begin();
        for (const auto i : cores) {
            if (topo.nodes_[i].id) continue;
            while (given.contains(next->poly)) ++next;
            topo.nodes_[i].id = NodeId{next->poly, topo.nodes_[i].label};
            ++next;
        }
    }

    topo.validate();

    for (const auto& jt : doc.value("tunnels", json::array())) {
        topo.add_tunnel(jt.at("ingress").get<std::string>(), jt.at("egress").get<std::string>(),
                        jt.at("path").get<std::vector<std::string>>(), jt.value("id", 0));
    }
    for (const auto& jr : doc.value("pbr", json::array())) {
        PbrRule r;
        r.edge = jr.at("edge").get<std::string>();
        r.match.src_net = jr.at("src_net").get<std::string>();
        r.match.dst_addr = jr.at("dst_addr").get<std::string>();
        r.match.protocol = jr.value("protocol", 6);
        r.match.tos = jr.value("tos", 0);
        r.tunnel_id = jr.at("tunnel").get<int>();
        r.name = jr.value("name", "");
        topo.set_pbr(r);
    }
    return topo;
}

void Topology::validate() const {
    std::vector<std::uint64_t> max_port(nodes_.size(), 0);
    for (const auto& l : links_) {
        max_port[l.a] = std::max(max_port[l.a], l.a_port);
        max_port[l.b] = std::max(max_port[l.b], l.b_port);
    }
    std::vector<const Node*> cores;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        const auto& n = nodes_[i];
        if (n.kind != NodeKind::Core) continue;
        if (!n.id) throw TopologyError("core node '" + n.label + "' has no nodeID");
        const int d = n.id->poly.degree();
        if (d < 1 || !is_irreducible(n.id->poly)) {
            throw TopologyError("nodeID " + n.id->poly.to_binary() + " of '" + n.label + "' is not irreducible");
        }
        if (d < 63 && (std::uint64_t{1} << d) <= max_port[i]) {
            throw TopologyError("nodeID of '" + n.label + "' has degree " + std::to_string(d) +
                                ", too small for port " + std::to_string(max_port[i]));
        }
        for (const auto* other : cores) {
            if (gcd(other->id->poly, n.id->poly) != Gf2Poly::one()) {
                throw TopologyError("nodeIDs of '" + other->label + "' and '" + n.label + "' are not coprime");
            }
        }
        cores.push_back(&n);
    }

    // connectivity
    std::vector<std::vector<std::size_t>> adj(nodes_.size());
    for (const auto& l : links_) {
        adj[l.a].push_back(l.b);
        adj[l.b].push_back(l.a);
    }
    std::vector<bool> seen(nodes_.size(), false);
    std::vector<std::size_t> stack{0};
    seen[0] = true;
    while (!stack.empty()) {
        const auto u = stack.back();
        stack.pop_back();
        for (const auto v : adj[u]) {
            if (!seen[v]) {
                seen[v] = true;
                stack.push_back(v);
            }
        }
    }
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        if (!seen[i]) throw TopologyError("topology is not connected: '" + nodes_[i].label + "' is unreachable");
    }
}

json Topology::to_json() const {
    json doc;
    doc["schema_version"] = 1;
    doc["name"] = name_;
    doc["nodes"] = json::array();
    for (const auto& n : nodes_) {
        json jn{{"label", n.label}, {"kind", to_string(n.kind)}};
        if (n.id) jn["node_id"] = n.id->poly.to_binary();
        if (!n.address.empty()) jn["address"] = n.address;
        if (n.kind == NodeKind::Host) jn["network"] = n.network;
        jn["pos"] = {n.x, n.y};
        doc["nodes"].push_back(jn);
    }
    doc["links"] = json::array();
    for (const auto& l : links_) {
        doc["links"].push_back({{"a", nodes_[l.a].label},
                                {"b", nodes_[l.b].label},
                                {"a_port", l.a_port},
                                {"b_port", l.b_port},
                                {"capacity_mbps", l.capacity_mbps},
                                {"latency_ms", l.latency_ms}});
    }
    doc["tunnels"] = json::array();
    for (const auto& [id, t] : tunnels_) {
        json hops = json::array();
        for (const auto& h : t.core_path) hops.push_back({{"node", h.node.label}, {"port", h.port.number}});
        doc["tunnels"].push_back({{"id", id},
                                  {"ingress", t.ingress},
                                  {"egress", t.egress},
                                  {"path", t.core_labels},
                                  {"hops", hops},
                                  {"route_id", t.route_id.to_binary()}});
    }
    doc["pbr"] = json::array();
    for (const auto& r : rules_) {
        doc["pbr"].push_back({{"edge", r.edge},
                              {"name", r.name},
                              {"src_net", r.match.src_net},
                              {"dst_addr", r.match.dst_addr},
                              {"protocol", r.match.protocol},
                              {"tos", r.match.tos},
                              {"tunnel", r.tunnel_id}});
    }
    return doc;
}

std::size_t Topology::index_of(const std::string& label) const {
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        if (nodes_[i].label == label) return i;
    }
    throw TopologyError("unknown node '" + label + "'");
}

bool Topology::has_node(const std::string& label) const {
    return std::any_of(nodes_.begin(), nodes_.end(), [&](const Node& n) { return n.label == label; });
}

std::optional<LinkDir> Topology::link_at_port(std::size_t node, std::uint64_t port) const {
    for (std::size_t i = 0; i < links_.size(); ++i) {
        if (links_[i].a == node && links_[i].a_port == port) return LinkDir{i, true};
        if (links_[i].b == node && links_[i].b_port == port) return LinkDir{i, false};
    }
    return std::nullopt;
}

std::optional<LinkDir> Topology::link_between(std::size_t a, std::size_t b) const {
    for (std::size_t i = 0; i < links_.size(); ++i) {
        if (links_[i].a == a && links_[i].b == b) return LinkDir{i, true};
        if (links_[i].b == a && links_[i].a == b) return LinkDir{i, false};
    }
    return std::nullopt;
}

std::size_t Topology::head(LinkDir d) const { return d.forward ? links_[d.link].b : links_[d.link].a; }
std::size_t Topology::tail(LinkDir d) const { return d.forward ? links_[d.link].a : links_[d.link].b; }

std::string Topology::link_key(LinkDir d) const { return nodes_[tail(d)].label + "->" + nodes_[head(d)].label; }

const Node& Topology::edge_of_host(const std::string& host) const {
    const auto h = index_of(host);
    if (nodes_[h].kind != NodeKind::Host) throw TopologyError("'" + host + "' is not a host");
    for (const auto& l : links_) {
        const std::size_t other = l.a == h ? l.b : (l.b == h ? l.a : nodes_.size());
        if (other < nodes_.size() && nodes_[other].kind == NodeKind::Edge) return nodes_[other];
    }
    throw TopologyError("host '" + host + "' is not attached to an edge router");
}

const Tunnel& Topology::add_tunnel(const std::string& ingress, const std::string& egress,
                                   const std::vector<std::string>& core_labels, int id) {
    const auto in = index_of(ingress);
    const auto out = index_of(egress);
    if (nodes_[in].kind != NodeKind::Edge) throw TopologyError("tunnel ingress '" + ingress + "' is not an edge");
    if (nodes_[out].kind != NodeKind::Edge) throw TopologyError("tunnel egress '" + egress + "' is not an edge");
    if (core_labels.empty()) throw TopologyError("tunnel needs at least one core node");
    if (id == 0) id = tunnels_.empty() ? 1 : tunnels_.rbegin()->first + 1;
    if (id < 0) throw TopologyError("tunnel id must be positive");
    if (tunnels_.contains(id)) throw TopologyError("tunnel " + std::to_string(id) + " already exists");

    std::vector<std::size_t> seq{in};
    for (const auto& l : core_labels) {
        const auto i = index_of(l);
        if (nodes_[i].kind != NodeKind::Core) throw TopologyError("tunnel hop '" + l + "' is not a core node");
        seq.push_back(i);
    }
    seq.push_back(out);

    Tunnel t;
    t.id = id;
    t.ingress = ingress;
    t.egress = egress;
    t.core_labels = core_labels;
    for (std::size_t k = 0; k + 1 < seq.size(); ++k) {
        const auto dir = link_between(seq[k], seq[k + 1]);
        if (!dir) {
            throw TopologyError("tunnel hops '" + nodes_[seq[k]].label + "' and '" + nodes_[seq[k + 1]].label +
                                "' are not adjacent");
        }
        if (k == 0) continue;  // edges do not consume routeID bits
        const auto& l = links_[dir->link];
        const auto port = dir->forward ? l.a_port : l.b_port;
        t.core_path.push_back({*nodes_[seq[k]].id, encode_port(static_cast<std::int64_t>(port))});
    }
    try {
        t.route_id = route_id_for_path(t.core_path);
    } catch (const std::invalid_argument& e) {
        throw TopologyError("tunnel " + std::to_string(id) + ": " + e.what());
    }
    return tunnels_.emplace(id, std::move(t)).first->second;
}

const Tunnel& Topology::tunnel(int id) const {
    const auto it = tunnels_.find(id);
    if (it == tunnels_.end()) throw TopologyError("unknown tunnel " + std::to_string(id));
    return it->second;
}

void Topology::set_pbr(const PbrRule& rule) {
    const auto& t = tunnel(rule.tunnel_id);
    if (t.ingress != rule.edge) {
        throw TopologyError("tunnel " + std::to_string(rule.tunnel_id) + " does not start at edge '" + rule.edge + "'");
    }
    cidr_prefix_length(rule.match.src_net);
    parse_ipv4(rule.match.dst_addr);
    for (auto& r : rules_) {
        if (r.edge == rule.edge && r.match == rule.match) {
            r = rule;
            return;
        }
    }
    rules_.push_back(rule);
}

std::vector<PbrRule> Topology::rules_at(const std::string& edge) const {
    std::vector<PbrRule> out;
    std::copy_if(rules_.begin(), rules_.end(), std::back_inserter(out), [&](const PbrRule& r) { return r.edge == edge; });
    return out;
}

const PbrRule& Topology::match_rule(const Flow& flow) const {
    const auto& edge = edge_of_host(flow.src_host);
    const auto& src = node(flow.src_host).address;
    const auto& dst = node(flow.dst_host).address;
    const PbrRule* best = nullptr;
    int best_len = -1;
    bool tie = false;
    for (const auto& r : rules_) {
        if (r.edge != edge.label || r.match.protocol != flow.protocol || r.match.tos != flow.tos) continue;
        if (r.match.dst_addr != dst || !cidr_contains(r.match.src_net, src)) continue;
        const int len = cidr_prefix_length(r.match.src_net);
        if (len > best_len) {
            best = &r;
            best_len = len;
            tie = false;
        } else if (len == best_len) {
            tie = true;
        }
    }
    if (!best) throw UnroutableFlow(flow.id, "no PBR rule at '" + edge.label + "' matches");
    if (tie) throw UnroutableFlow(flow.id, "ambiguous PBR rules at '" + edge.label + "'");
    return *best;
}

std::vector<LinkDir> Topology::tunnel_links(const Tunnel& t) const {
    std::vector<LinkDir> out;
    const auto first = link_between(index_of(t.ingress), index_of(t.core_labels.front()));
    if (!first) throw TopologyError("tunnel " + std::to_string(t.id) + " ingress is detached");
    out.push_back(*first);
    std::size_t cur = head(*first);
    for (std::size_t guard = 0; nodes_[cur].kind == NodeKind::Core; ++guard) {
        if (guard > nodes_.size()) throw TopologyError("tunnel " + std::to_string(t.id) + " loops");
        const auto port = forward(t.route_id, *nodes_[cur].id).number;
        const auto dir = link_at_port(cur, port);
        if (!dir) {
            throw TopologyError("tunnel " + std::to_string(t.id) + ": routeID selects port " + std::to_string(port) +
                                " with no link at '" + nodes_[cur].label + "'");
        }
        out.push_back(*dir);
        cur = head(*dir);
    }
    if (nodes_[cur].label != t.egress) {
        throw TopologyError("tunnel " + std::to_string(t.id) + " exits at '" + nodes_[cur].label + "', not '" +
                            t.egress + "'");
    }
    return out;
}

std::vector<LinkDir> Topology::flow_links(const Flow& flow) const {
    const auto& rule = match_rule(flow);
    const auto& t = tunnel(rule.tunnel_id);
    const auto& dst_edge = edge_of_host(flow.dst_host);
    if (t.egress != dst_edge.label) {
        throw UnroutableFlow(flow.id, "tunnel " + std::to_string(t.id) + " ends at '" + t.egress + "', host '" +
                                          flow.dst_host + "' is behind '" + dst_edge.label + "'");
    }
    std::vector<LinkDir> out;
    out.push_back(*link_between(index_of(flow.src_host), index_of(t.ingress)));
    const auto mid = tunnel_links(t);
    out.insert(out.end(), mid.begin(), mid.end());
    out.push_back(*link_between(index_of(t.egress), index_of(flow.dst_host)));
    return out;
}

std::vector<std::vector<std::string>> Topology::simple_paths(const std::string& from, const std::string& to) const {
    const auto src = index_of(from);
    const auto dst = index_of(to);
    std::vector<std::vector<std::string>> out;
    std::vector<std::size_t> path{src};
    std::vector<bool> on_path(nodes_.size(), false);
    on_path[src] = true;
    std::function<void(std::size_t)> dfs = [&](std::size_t u) {
        if (u == dst) {
            std::vector<std::string> labels;
            for (const auto i : path) labels.push_back(nodes_[i].label);
            out.push_back(std::move(labels));
            return;
        }
        for (const auto& l : links_) {
            const std::size_t v = l.a == u ? l.b : (l.b == u ? l.a : nodes_.size());
            if (v == nodes_.size() || on_path[v]) continue;
            on_path[v] = true;
            path.push_back(v);
            dfs(v);
            path.pop_back();
            on_path[v] = false;
        }
    };
    dfs(src);
    return out;
}

Topology load_topology(const json& doc) { return Topology::from_json(doc); }

Topology load_topology_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open topology '" + path + "'");
    try {
        return Topology::from_json(json::parse(in));
    } catch (const json::exception& e) {
        throw TopologyError("topology '" + path + "': " + e.what());
    }
}

double path_latency(const Topology& topo, const Tunnel& tunnel) {
    double total = 0.0;
    for (const auto d : topo.tunnel_links(tunnel)) total += topo.links()[d.link].latency_ms;
    return total;
}

double path_available(const Topology& topo, const Tunnel& tunnel, const std::map<LinkDir, double>& load) {
    double avail = std::numeric_limits<double>::infinity();
    for (const auto d : topo.tunnel_links(tunnel)) {
        const auto it = load.find(d);
        const double used = it == load.end() ? 0.0 : it->second;
        avail = std::min(avail, std::max(0.0, topo.links()[d.link].capacity_mbps - used));
    }
    return avail;
}

// ---------------------------------------------------------------------------
// Max-min fair allocation

std::map<int, double> compute_allocations(const Topology& topo, std::span<const Flow> flows) {
    std::map<int, double> rate;
    std::vector<const Flow*> active;
    std::vector<std::vector<LinkDir>> paths;
    for (const auto& f : flows) {
        rate[f.id] = 0.0;
        if (!f.active) continue;
        active.push_back(&f);
        paths.push_back(topo.flow_links(f));
    }

    std::map<LinkDir, double> residual;
    for (const auto& p : paths)
        for (const auto d : p) residual.emplace(d, topo.links()[d.link].capacity_mbps);

    std::vector<bool> frozen(active.size(), false);
    std::size_t remaining = active.size();
    while (remaining > 0) {
        std::map<LinkDir, int> users;
        for (std::size_t i = 0; i < active.size(); ++i) {
            if (frozen[i]) continue;
            for (const auto d : paths[i]) ++users[d];
        }
        double delta = std::numeric_limits<double>::infinity();
        for (const auto& [d, n] : users) delta = std::min(delta, residual[d] / n);
        for (std::size_t i = 0; i < active.size(); ++i) {
            if (!frozen[i]) delta = std::min(delta, active[i]->demand_mbps - rate[active[i]->id]);
        }
        delta = std::max(delta, 0.0);

        for (std::size_t i = 0; i < active.size(); ++i) {
            if (!frozen[i]) rate[active[i]->id] += delta;
        }
        std::set<LinkDir> saturated;
        for (const auto& [d, n] : users) {
            residual[d] -= delta * n;
            const double cap = topo.links()[d.link].capacity_mbps;
            if (residual[d] <= 1e-12 * cap) {
                residual[d] = 0.0;
                saturated.insert(d);
            }
        }
        for (std::size_t i = 0; i < active.size(); ++i) {
            if (frozen[i]) continue;
            const auto& f = *active[i];
            bool stop = rate[f.id] >= f.demand_mbps * (1.0 - 1e-12);
            for (const auto d : paths[i]) stop = stop || saturated.contains(d);
            if (stop) {
                rate[f.id] = std::min(rate[f.id], f.demand_mbps);
                frozen[i] = true;
                --remaining;
            }
        }
    }
    return rate;
}

std::map<LinkDir, double> link_loads(const Topology& topo, std::span<const Flow> flows,
                                     const std::map<int, double>& rates) {
    std::map<LinkDir, double> load;
    for (const auto& f : flows) {
        if (!f.active) continue;
        const double r = rates.at(f.id);
        for (const auto d : topo.flow_links(f)) load[d] += r;
    }
    return load;
}

// ---------------------------------------------------------------------------
// Simulator

void Simulator::add_flow(const Flow& flow) {
    if (!(flow.demand_mbps > 0.0)) throw std::invalid_argument("flow demand must be positive");
    if (flows_.contains(flow.id)) throw std::invalid_argument("flow id " + std::to_string(flow.id) + " already exists");
    for (const auto* h : {&flow.src_host, &flow.dst_host}) {
        if (topo_.node(*h).kind != NodeKind::Host) throw TopologyError("'" + *h + "' is not a host");
    }
    if (flow.active) {
        for (const auto& [id, f] : flows_) {
            if (f.active && f.src_host == flow.src_host && f.dst_host == flow.dst_host &&
                f.protocol == flow.protocol && f.tos == flow.tos) {
                throw std::invalid_argument("flow " + std::to_string(id) + " already uses this match tuple");
            }
        }
    }
    flows_.emplace(flow.id, flow);
}

void Simulator::remove_flow(int id) { flows_.erase(id); }

std::vector<Flow> Simulator::flow_list() const {
    std::vector<Flow> out;
    out.reserve(flows_.size());
    for (const auto& [_, f] : flows_) out.push_back(f);
    return out;
}

std::vector<TelemetrySample> Simulator::advance(double dt) {
    if (!(dt > 0.0)) throw std::invalid_argument("advance: dt must be positive");
    clock_ += dt;
    const auto flows = flow_list();
    allocations_ = compute_allocations(topo_, flows);
    const auto load = link_loads(topo_, flows, allocations_);

    std::vector<TelemetrySample> out;
    std::map<int, double> tunnel_rate;
    for (const auto& f : flows) {
        if (!f.active) continue;
        const auto& t = topo_.tunnel(topo_.match_rule(f).tunnel_id);
        tunnel_rate[t.id] += allocations_.at(f.id);
        const auto key = "flow:" + std::to_string(f.id);
        out.push_back({key + ":throughput", clock_, allocations_.at(f.id)});
        out.push_back({key + ":latency", clock_, path_latency(topo_, t)});
    }
    for (std::size_t i = 0; i < topo_.links().size(); ++i) {
        for (const bool fwd : {true, false}) {
            const LinkDir d{i, fwd};
            const auto it = load.find(d);
            const double used = it == load.end() ? 0.0 : it->second;
            out.push_back({"link:" + topo_.link_key(d) + ":utilization", clock_, used / topo_.links()[i].capacity_mbps});
        }
    }
    for (const auto& [id, t] : topo_.tunnels()) {
        const auto key = "path:" + std::to_string(id);
        out.push_back({key + ":bandwidth", clock_, path_available(topo_, t, load)});
        out.push_back({key + ":latency", clock_, path_latency(topo_, t)});
        out.push_back({key + ":throughput", clock_, tunnel_rate[id]});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Edge configuration rendering

std::string render_edge_config(const Topology& topo, const std::string& edge) {
    const auto& e = topo.node(edge);
    if (e.kind != NodeKind::Edge) throw TopologyError("'" + edge + "' is not an edge router");
    std::ostringstream os;
    os << "hostname " << edge << "\n!\n";

    const auto rules = topo.rules_at(edge);
    for (const auto& r : rules) {
        const int prefix = cidr_prefix_length(r.match.src_net);
        os << "access-list " << r.name << "\n"
           << " sequence 10 permit " << r.match.protocol << ' ' << r.match.src_net.substr(0, r.match.src_net.find('/'))
           << ' ' << mask_of(prefix) << " all " << r.match.dst_addr << " 255.255.255.255 all tos " << r.match.tos
           << "\n exit\n!\n";
    }

    for (const auto& [id, t] : topo.tunnels()) {
        if (t.ingress != edge) continue;
        std::string path;
        for (const auto& l : t.core_labels) path += (path.empty() ? "" : "-") + l;
        os << "interface tunnel" << id << "\n"
           << " description polka " << path << " routeid " << t.route_id.to_binary() << "\n"
           << " tunnel vrf v1\n"
           << " tunnel source loopback0\n"
           << " tunnel destination " << topo.node(t.egress).address << "\n"
           << " tunnel domain-name";
        for (const auto& l : t.core_labels) os << ' ' << topo.node(l).address;
        os << ' ' << topo.node(t.egress).address << "\n"
           << " tunnel mode polka\n"
           << " vrf forwarding v1\n"
           << " ipv4 address 30.30." << id << ".1 255.255.255.0\n"
           << " no shutdown\n"
           << " exit\n!\n";
    }

    for (const auto& r : rules) {
        os << "ipv4 pbr v1 " << r.name << " nexthop 30.30." << r.tunnel_id << ".2\n";
    }
    if (!rules.empty()) os << "!\n";
    os << "end\n";
    return os.str();
}

}  // namespace polka_te
