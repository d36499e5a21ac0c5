#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "polka_te/gf2poly.hpp"

namespace polka_te {

/// Output port of a core node. Port 0 means "deliver locally".
struct PortId {
    std::uint64_t number = 0;
    Gf2Poly poly;

    friend bool operator==(const PortId&, const PortId&) = default;
};

/// Irreducible polynomial identifying a core node.
struct NodeId {
    Gf2Poly poly;
    std::string label;

    friend bool operator==(const NodeId&, const NodeId&) = default;
};

/// Path label. It is never rewritten while a packet crosses the core.
struct RouteId {
    Gf2Poly poly;

    std::string to_binary() const { return poly.to_binary(); }
    friend bool operator==(const RouteId&, const RouteId&) = default;
};

struct Hop {
    NodeId node;
    PortId port;

    friend bool operator==(const Hop&, const Hop&) = default;
};

PortId encode_port(std::int64_t number);
std::uint64_t decode_port(Gf2Poly poly);

/// Distinct irreducibles with a nonzero constant term, in ascending (degree,
/// binary value) order, skipping any whose 2^deg does not exceed max_ports.
/// Labels are "n0", "n1", ...
std::vector<NodeId> gen_node_ids(int count, int max_ports, int max_degree = 16);

RouteId route_id_for_path(std::span<const Hop> hops);

/// routeID mod nodeID. The route is taken by value and never modified.
PortId forward(const RouteId& route, const NodeId& node);

bool verify_path(const RouteId& route, std::span<const Hop> hops);

/// One entry of a textual route spec "NODE:port,NODE:port,...".
struct RouteSpecEntry {
    std::string node;
    std::uint64_t port = 0;
};

/// Raised on a malformed route spec; `position` is the 0-based character offset.
struct RouteSpecError : std::invalid_argument {
    RouteSpecError(const std::string& what, std::size_t position);
    std::size_t position;
};

std::vector<RouteSpecEntry> parse_route_spec(std::string_view spec);

}  // namespace polka_te
