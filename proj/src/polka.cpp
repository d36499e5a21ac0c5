#include "polka_te/polka.hpp"

#include <cctype>

namespace polka_te {

PortId encode_port(std::int64_t number) {
    if (number < 0) throw std::invalid_argument("port number must be non-negative: " + std::to_string(number));
    const auto n = static_cast<std::uint64_t>(number);
    return {n, Gf2Poly::from_u64(n)};
}

std::uint64_t decode_port(Gf2Poly poly) { return poly.to_u64(); }

std::vector<NodeId> gen_node_ids(int count, int max_ports, int max_degree) {
    if (count < 1) throw std::invalid_argument("gen_node_ids: count must be >= 1");
    if (max_ports < 1) throw std::invalid_argument("gen_node_ids: max_ports must be >= 1");

    std::vector<NodeId> out;
    out.reserve(static_cast<std::size_t>(count));
    for (int d = 1; d <= max_degree && static_cast<int>(out.size()) < count; ++d) {
        // Residues live below t^d, so port numbers up to 2^d - 1 are encodable.
        if ((std::uint64_t{1} << d) <= static_cast<std::uint64_t>(max_ports)) continue;
        const std::uint64_t lo = std::uint64_t{1} << d;
        // Odd values only: a zero constant term means t divides the polynomial,
        // which leaves only t itself, and t is never used as a nodeID.
        for (std::uint64_t bits = lo | 1; bits < (lo << 1) && static_cast<int>(out.size()) < count; bits += 2) {
            const auto p = Gf2Poly::from_u64(bits);
            if (is_irreducible(p)) out.push_back({p, "n" + std::to_string(out.size())});
        }
    }
    if (static_cast<int>(out.size()) < count) {
        throw std::invalid_argument("gen_node_ids: only " + std::to_string(out.size()) +
                                    " irreducibles available up to degree " + std::to_string(max_degree) +
                                    " for max_ports " + std::to_string(max_ports));
    }
    return out;
}

RouteId route_id_for_path(std::span<const Hop> hops) {
    if (hops.empty()) throw std::invalid_argument("route_id_for_path: empty path");
    std::vector<Congruence> system;
    system.reserve(hops.size());
    for (const auto& [node, port] : hops) {
        if (port.poly.degree() >= node.poly.degree()) {
            throw std::invalid_argument("port " + std::to_string(port.number) + " does not fit below nodeID " +
                                        node.poly.to_binary() + " of node '" + node.label + "'");
        }
        system.push_back({port.poly, node.poly});
    }
    return RouteId{crt(system)};
}

PortId forward(const RouteId& route, const NodeId& node) {
    const auto rem = mod(route.poly, node.poly);
    return {decode_port(rem), rem};
}

bool verify_path(const RouteId& route, std::span<const Hop> hops) {
    for (const auto& [node, port] : hops) {
        if (forward(route, node).poly != port.poly) return false;
    }
    return true;
}

namespace {

bool is_label_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.';
}

}  // namespace

RouteSpecError::RouteSpecError(const std::string& what, std::size_t pos)
    : std::invalid_argument(what + " at position " + std::to_string(pos)), position(pos) {}

std::vector<RouteSpecEntry> parse_route_spec(std::string_view spec) {
    std::vector<RouteSpecEntry> out;
    std::size_t pos = 0;
    if (spec.empty()) throw RouteSpecError("empty route spec", 0);
    while (true) {
        const std::size_t start = pos;
        while (pos < spec.size() && is_label_char(spec[pos])) ++pos;
        std::string node(spec.substr(start, pos - start));
        if (node.empty()) throw RouteSpecError("expected node label", start);
        if (pos >= spec.size() || spec[pos] != ':') throw RouteSpecError("expected ':' after node '" + node + "'", pos);
        ++pos;
        const std::size_t num_start = pos;
        std::uint64_t port = 0;
        while (pos < spec.size() && std::isdigit(static_cast<unsigned char>(spec[pos]))) {
            port = port * 10 + static_cast<std::uint64_t>(spec[pos] - '0');
            ++pos;
        }
        if (pos == num_start) throw RouteSpecError("expected port number", num_start);
        out.push_back({std::move(node), port});
        if (pos == spec.size()) break;
        if (spec[pos] != ',') throw RouteSpecError("unexpected character '" + std::string(1, spec[pos]) + "'", pos);
        ++pos;
    }
    return out;
}

}  // namespace polka_te
