#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ibsim/errors.hpp"

namespace ibsim {

enum class NodeKind { Host, Switch };

struct Endpoint {
    NodeKind kind;
    int id;    // host id or switch id
    int port;
    bool operator==(const Endpoint&) const = default;
};

struct TopoLink {
    Endpoint a;
    Endpoint b;
};

struct SwitchInfo {
    std::string name;
    int num_ports = 0;
};

// Fabric graph: hosts, switches, and the cables between their ports.
// Host ids are dense 0..N-1; names map to ids in lexicographic order when
// parsed from a file.
struct Topology {
    std::vector<std::string> host_names;
    std::vector<SwitchInfo> switches;
    std::vector<TopoLink> links;

    int num_hosts() const { return static_cast<int>(host_names.size()); }
    int num_switches() const { return static_cast<int>(switches.size()); }

    // (switch id, switch port) a host is cabled to; host-host direct links
    // have no attach entry.
    std::vector<std::pair<int, int>> host_attachments() const;
    bool connected() const;
    void validate() const;  // dense ids, unique port use, connectivity
};

struct FatTreeSpec {
    int spines = 2;
    int leaves = 4;
    int hosts_per_leaf = 2;
    int parallel_uplinks = 1;

    bool non_blocking() const { return hosts_per_leaf <= spines * parallel_uplinks; }
    void validate() const;
};

// Linear-shift schedule: in phase n, node i targets (n + i) mod N.
struct ShiftPattern {
    int num_nodes = 0;
    int dest(int node, int phase) const { return (node + phase) % num_nodes; }
};

// Per-switch destination-host -> output-port map. -1 marks a routing hole.
struct RoutingTable {
    std::vector<std::vector<int>> port_for_dest;  // [switch][host]

    int lookup(int switch_id, int dest_host) const {
        int p = port_for_dest[switch_id][dest_host];
        if (p < 0)
            throw RoutingError("routing hole: switch " + std::to_string(switch_id) +
                               " has no route to host " + std::to_string(dest_host));
        return p;
    }
    bool total(int num_hosts) const;
};

// Two hosts, one cable; used by the latency calibration scenario.
Topology make_direct_pair();
// n hosts on a single switch (congestion/buffer-estimation setups).
Topology make_star(int num_hosts);

Topology build_fat_tree(const FatTreeSpec& spec);

// Line grammar, one cable per line:
//   HOST <name> <port> -- SWITCH <name> <port>
//   SWITCH <name> <port> -- SWITCH <name> <port>
// '#' starts a comment; blank lines are ignored.
Topology parse_topology(const std::string& text);
std::string serialize_topology(const Topology& topo);

// Fat-tree-optimized routing: at a leaf, remote destinations go up to spine
// (dest leaf-port index mod S); down-routes follow the attachment. Falls back
// to compute_generic_routing when the graph is not a two-level leaf/spine tree.
RoutingTable compute_fat_tree_routing(const Topology& topo);

// Destination-based shortest paths; equal-cost candidates are broken by
// (dest id mod candidate count) over ports sorted by index.
RoutingTable compute_generic_routing(const Topology& topo);

// Routing table file: CSV rows `switch_name,dest_host_name,port`.
RoutingTable load_routing_table(const Topology& topo, const std::string& path);

struct LinkConflict {
    int switch_id;  // upstream end of the congested inter-switch link
    int port;
    std::vector<int> sources;  // >= 2 flows sharing it
};

// Statically traces every flow of one shift phase and reports inter-switch
// links carrying two or more flows. Empty result == conflict-free.
std::vector<LinkConflict> verify_conflict_free(const Topology& topo, const RoutingTable& routing,
                                               const ShiftPattern& pattern, int phase);

// Remove hosts and swap the switch-side endpoints of pairs of host cables.
// Host ids are re-densified; disconnecting the graph is an error.
Topology degrade(const Topology& topo, const std::vector<int>& remove_hosts,
                 const std::vector<std::pair<int, int>>& swap_cable_pairs);

}  // namespace ibsim
