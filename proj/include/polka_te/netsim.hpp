#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "polka_te/polka.hpp"
#include "polka_te/telemetry.hpp"

namespace polka_te {

inline constexpr double kDefaultLinkLatencyMs = 1.0;
inline constexpr double kDefaultLinkCapacityMbps = 1000.0;

struct TopologyError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct UnroutableFlow : std::runtime_error {
    UnroutableFlow(int flow_id, const std::string& why);
    int flow_id;
};

enum class NodeKind { Core, Edge, Host };

std::string to_string(NodeKind kind);

struct Node {
    std::string label;
    NodeKind kind = NodeKind::Core;
    std::optional<NodeId> id;  // core nodes only
    std::string address;       // loopback for routers, IPv4 address for hosts
    std::string network;       // hosts only, CIDR, e.g. "40.40.1.0/24"
    double x = 0.0, y = 0.0;   // layout hint
};

/// Full-duplex link; each direction has its own capacity pool.
struct Link {
    std::size_t a = 0, b = 0;  // node indices
    std::uint64_t a_port = 0, b_port = 0;
    double capacity_mbps = kDefaultLinkCapacityMbps;
    double latency_ms = kDefaultLinkLatencyMs;
};

/// One direction of a link.
struct LinkDir {
    std::size_t link = 0;
    bool forward = true;  // a -> b

    friend auto operator<=>(const LinkDir&, const LinkDir&) = default;
};

struct Tunnel {
    int id = 0;
    std::string ingress;  // edge label
    std::string egress;   // edge label
    std::vector<std::string> core_labels;
    std::vector<Hop> core_path;
    RouteId route_id;

    friend bool operator==(const Tunnel&, const Tunnel&) = default;
};

struct PbrMatch {
    std::string src_net;   // CIDR
    std::string dst_addr;  // IPv4
    int protocol = 6;
    int tos = 0;

    friend auto operator<=>(const PbrMatch&, const PbrMatch&) = default;
};

struct PbrRule {
    std::string edge;
    PbrMatch match;
    int tunnel_id = 0;
    std::string name;  // access-list name

    friend bool operator==(const PbrRule&, const PbrRule&) = default;
};

struct Flow {
    int id = 0;
    std::string src_host;
    std::string dst_host;
    int protocol = 6;
    int tos = 0;
    double demand_mbps = 0.0;
    bool active = true;
};

/// Validated topology plus the tunnels and PBR rules installed on its edges.
class Topology {
public:
    static Topology from_json(const nlohmann::json& doc);
    nlohmann::json to_json() const;

    const std::string& name() const { return name_; }
    const std::vector<Node>& nodes() const { return nodes_; }
    const std::vector<Link>& links() const { return links_; }
    const std::map<int, Tunnel>& tunnels() const { return tunnels_; }
    const std::vector<PbrRule>& rules() const { return rules_; }

    std::size_t index_of(const std::string& label) const;
    const Node& node(const std::string& label) const { return nodes_[index_of(label)]; }
    bool has_node(const std::string& label) const;

    /// Link direction leaving `node` through `port`, if any.
    std::optional<LinkDir> link_at_port(std::size_t node, std::uint64_t port) const;
    /// Link direction from a to b, if adjacent.
    std::optional<LinkDir> link_between(std::size_t a, std::size_t b) const;
    std::size_t head(LinkDir d) const;  // node the direction enters
    std::size_t tail(LinkDir d) const;  // node the direction leaves
    std::string link_key(LinkDir d) const;  // "A->B"

    /// Edge router a host is attached to.
    const Node& edge_of_host(const std::string& host) const;

    /// Compiles core_labels into a tunnel, inferring ports from adjacency.
    /// id 0 picks the next free id.
    const Tunnel& add_tunnel(const std::string& ingress, const std::string& egress,
                             const std::vector<std::string>& core_labels, int id = 0);
    const Tunnel& tunnel(int id) const;

    /// Installs a rule, replacing any rule with the same edge and match tuple.
    void set_pbr(const PbrRule& rule);
    /// The single most specific rule at the flow's ingress edge.
    const PbrRule& match_rule(const Flow& flow) const;
    std::vector<PbrRule> rules_at(const std::string& edge) const;

    /// Directions from ingress edge to egress edge, obtained by applying
    /// forward() to the routeID at every core node.
    std::vector<LinkDir> tunnel_links(const Tunnel& t) const;
    /// Host -> ingress edge, tunnel links, egress edge -> host.
    std::vector<LinkDir> flow_links(const Flow& flow) const;

    /// All simple paths between two nodes, as label sequences, in DFS order.
    std::vector<std::vector<std::string>> simple_paths(const std::string& from, const std::string& to) const;

private:
    void validate() const;

    std::string name_;
    std::vector<Node> nodes_;
    std::vector<Link> links_;
    std::map<int, Tunnel> tunnels_;
    std::vector<PbrRule> rules_;
};

Topology load_topology(const nlohmann::json& doc);
Topology load_topology_file(const std::string& path);

/// Edge-to-edge latency of the tunnel (sum over its link sequence).
double path_latency(const Topology& topo, const Tunnel& tunnel);

/// Smallest remaining capacity along the tunnel given per-direction loads.
double path_available(const Topology& topo, const Tunnel& tunnel, const std::map<LinkDir, double>& load);

/// Max-min fair rates (progressive water-filling) with per-flow demand caps.
std::map<int, double> compute_allocations(const Topology& topo, std::span<const Flow> flows);

/// Per-direction load implied by a set of rates.
std::map<LinkDir, double> link_loads(const Topology& topo, std::span<const Flow> flows,
                                     const std::map<int, double>& rates);

/// Fluid-flow simulator: a single ordered command stream over topology, flows
/// and rules. Every advance recomputes the allocation from scratch.
class Simulator {
public:
    explicit Simulator(Topology topo) : topo_(std::move(topo)) {}

    const Topology& topology() const { return topo_; }
    Topology& topology() { return topo_; }
    double clock() const { return clock_; }

    void add_flow(const Flow& flow);
    void remove_flow(int id);
    const std::map<int, Flow>& flows() const { return flows_; }
    std::vector<Flow> flow_list() const;

    const std::map<int, double>& allocations() const { return allocations_; }

    std::vector<TelemetrySample> advance(double dt);

private:
    Topology topo_;
    std::map<int, Flow> flows_;
    std::map<int, double> allocations_;
    double clock_ = 0.0;
};

/// freeRtr-inspired, human-readable configuration of one edge router.
std::string render_edge_config(const Topology& topo, const std::string& edge);

/// Parses "a.b.c.d"; throws on malformed input.
std::uint32_t parse_ipv4(const std::string& s);
bool cidr_contains(const std::string& cidr, const std::string& addr);
int cidr_prefix_length(const std::string& cidr);

}  // namespace polka_te
