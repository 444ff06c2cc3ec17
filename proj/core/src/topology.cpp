#include "ibsim/topology.hpp"

#include <algorithm>
#include <deque>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace ibsim {

namespace {

struct PortKey {
    NodeKind kind;
    int id;
    int port;
    auto operator<=>(const PortKey&) const = default;
};

PortKey key(const Endpoint& e) { return {e.kind, e.id, e.port}; }

}  // namespace

std::vector<std::pair<int, int>> Topology::host_attachments() const {
    std::vector<std::pair<int, int>> attach(host_names.size(), {-1, -1});
    for (const auto& l : links) {
        for (auto [h, s] : {std::pair{l.a, l.b}, std::pair{l.b, l.a}}) {
            if (h.kind == NodeKind::Host && s.kind == NodeKind::Switch) {
                attach[h.id] = {s.id, s.port};
            }
        }
    }
    return attach;
}

bool Topology::connected() const {
    if (host_names.empty()) return false;
    // BFS over hosts + switches
    int n = num_hosts() + num_switches();
    auto index = [&](const Endpoint& e) {
        return e.kind == NodeKind::Host ? e.id : num_hosts() + e.id;
    };
    std::vector<std::vector<int>> adj(n);
    for (const auto& l : links) {
        adj[index(l.a)].push_back(index(l.b));
        adj[index(l.b)].push_back(index(l.a));
    }
    std::vector<char> seen(n, 0);
    std::deque<int> q{0};
    seen[0] = 1;
    int count = 1;
    while (!q.empty()) {
        int v = q.front();
        q.pop_front();
        for (int w : adj[v])
            if (!seen[w]) {
                seen[w] = 1;
                ++count;
                q.push_back(w);
            }
    }
    return count == n;
}

void Topology::validate() const {
    std::set<PortKey> used;
    for (const auto& l : links) {
        for (const auto& e : {l.a, l.b}) {
            if (e.kind == NodeKind::Host) {
                if (e.id < 0 || e.id >= num_hosts()) throw ConfigError("link references unknown host");
            } else {
                if (e.id < 0 || e.id >= num_switches()) throw ConfigError("link references unknown switch");
                if (e.port < 0 || e.port >= switches[e.id].num_ports)
                    throw ConfigError("link references port beyond switch radix");
            }
            if (!used.insert(key(e)).second)
                throw ConfigError("port used by more than one cable: " +
                                  (e.kind == NodeKind::Host ? host_names[e.id] : switches[e.id].name) +
                                  " port " + std::to_string(e.port));
        }
    }
    if (!connected()) throw ConfigError("topology is not connected");
}

void FatTreeSpec::validate() const {
    if (spines < 1 || leaves < 1 || hosts_per_leaf < 1 || parallel_uplinks < 1)
        throw ConfigError("fat-tree spec fields must be >= 1");
}

bool RoutingTable::total(int num_hosts) const {
    for (const auto& row : port_for_dest)
        for (int h = 0; h < num_hosts; ++h)
            if (row[h] < 0) return false;
    return true;
}

Topology make_direct_pair() {
    Topology t;
    t.host_names = {"h0", "h1"};
    t.links.push_back({{NodeKind::Host, 0, 0}, {NodeKind::Host, 1, 0}});
    return t;
}

Topology make_star(int num_hosts) {
    Topology t;
    for (int i = 0; i < num_hosts; ++i) t.host_names.push_back("h" + std::to_string(i));
    t.switches.push_back({"sw0", num_hosts});
    for (int i = 0; i < num_hosts; ++i)
        t.links.push_back({{NodeKind::Host, i, 0}, {NodeKind::Switch, 0, i}});
    return t;
}

Topology build_fat_tree(const FatTreeSpec& spec) {
    spec.validate();
    const int S = spec.spines, L = spec.leaves, H = spec.hosts_per_leaf, P = spec.parallel_uplinks;
    Topology t;
    auto pad = [](int v, int width) {
        std::string s = std::to_string(v);
        while (static_cast<int>(s.size()) < width) s.insert(s.begin(), '0');
        return s;
    };
    for (int l = 0; l < L; ++l)
        for (int h = 0; h < H; ++h) t.host_names.push_back("node" + pad(l * H + h, 3));
    for (int l = 0; l < L; ++l) t.switches.push_back({"leaf" + pad(l, 2), H + S * P});
    for (int s = 0; s < S; ++s) t.switches.push_back({"spine" + pad(s, 2), L * P});
    // down-ports 0..H-1, up-port toward spine s copy k at H + s*P + k
    for (int l = 0; l < L; ++l) {
        for (int h = 0; h < H; ++h)
            t.links.push_back({{NodeKind::Host, l * H + h, 0}, {NodeKind::Switch, l, h}});
        for (int s = 0; s < S; ++s)
            for (int k = 0; k < P; ++k)
                t.links.push_back({{NodeKind::Switch, l, H + s * P + k},
                                   {NodeKind::Switch, L + s, l * P + k}});
    }
    return t;
}

Topology parse_topology(const std::string& text) {
    struct RawEnd {
        std::string kind, name;
        int port;
    };
    std::vector<std::pair<RawEnd, RawEnd>> raw_links;
    std::set<std::string> host_names, switch_names;

    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::istringstream ss(line);
        RawEnd a, b;
        std::string dashes;
        if (!(ss >> a.kind >> a.name >> a.port >> dashes >> b.kind >> b.name >> b.port) || dashes != "--")
            throw ConfigError("topology line " + std::to_string(lineno) + ": syntax error");
        for (const auto* e : {&a, &b}) {
            if (e->kind != "HOST" && e->kind != "SWITCH")
                throw ConfigError("topology line " + std::to_string(lineno) + ": node kind must be HOST or SWITCH");
            if (e->port < 0)
                throw ConfigError("topology line " + std::to_string(lineno) + ": negative port");
        }
        if (a.kind == "HOST" && b.kind == "HOST")
            throw ConfigError("topology line " + std::to_string(lineno) + ": HOST -- HOST cables are not allowed");
        for (const auto* e : {&a, &b})
            (e->kind == "HOST" ? host_names : switch_names).insert(e->name);
        raw_links.emplace_back(a, b);
    }
    if (host_names.empty()) throw ConfigError("topology file declares no hosts");

    Topology t;
    std::map<std::string, int> host_id, switch_id;
    for (const auto& n : host_names) {  // std::set iterates lexicographically
        host_id[n] = t.num_hosts();
        t.host_names.push_back(n);
    }
    for (const auto& n : switch_names) {
        switch_id[n] = t.num_switches();
        t.switches.push_back({n, 0});
    }
    auto to_endpoint = [&](const RawEnd& e) -> Endpoint {
        if (e.kind == "HOST") return {NodeKind::Host, host_id[e.name], e.port};
        auto& sw = t.switches[switch_id[e.name]];
        sw.num_ports = std::max(sw.num_ports, e.port + 1);
        return {NodeKind::Switch, switch_id[e.name], e.port};
    };
    for (const auto& [a, b] : raw_links) t.links.push_back({to_endpoint(a), to_endpoint(b)});
    t.validate();
    return t;
}

std::string serialize_topology(const Topology& topo) {
    auto name = [&](const Endpoint& e) {
        return e.kind == NodeKind::Host ? "HOST " + topo.host_names[e.id]
                                        : "SWITCH " + topo.switches[e.id].name;
    };
    std::vector<std::string> lines;
    for (const auto& l : topo.links) {
        // host end (or lexicographically smaller end) first
        Endpoint a = l.a, b = l.b;
        if ((a.kind == NodeKind::Switch && b.kind == NodeKind::Host) ||
            (a.kind == b.kind && name(a) > name(b)))
            std::swap(a, b);
        lines.push_back(name(a) + " " + std::to_string(a.port) + " -- " + name(b) + " " +
                        std::to_string(b.port));
    }
    std::sort(lines.begin(), lines.end());
    std::string out;
    for (const auto& s : lines) {
        out += s;
        out += '\n';
    }
    return out;
}

namespace {

// port -> peer endpoint, per switch
std::vector<std::map<int, Endpoint>> switch_peers(const Topology& topo) {
    std::vector<std::map<int, Endpoint>> peers(topo.num_switches());
    for (const auto& l : topo.links) {
        if (l.a.kind == NodeKind::Switch) peers[l.a.id][l.a.port] = l.b;
        if (l.b.kind == NodeKind::Switch) peers[l.b.id][l.b.port] = l.a;
    }
    return peers;
}

struct TwoLevelView {
    bool is_two_level = false;
    std::vector<char> is_leaf;              // per switch
    std::vector<int> spine_index;           // dense index among spines, -1 for leaves
    std::vector<std::pair<int, int>> attach;  // host -> (leaf switch, leaf port)
    int num_spines = 0;
};

TwoLevelView analyze_two_level(const Topology& topo) {
    TwoLevelView v;
    v.is_leaf.assign(topo.num_switches(), 0);
    v.spine_index.assign(topo.num_switches(), -1);
    v.attach = topo.host_attachments();
    for (const auto& [sw, port] : v.attach)
        if (sw < 0) return v;  // host-host link: not a tree
    for (const auto& [sw, port] : v.attach) v.is_leaf[sw] = 1;
    auto peers = switch_peers(topo);
    for (int s = 0; s < topo.num_switches(); ++s) {
        if (v.is_leaf[s]) continue;
        v.spine_index[s] = v.num_spines++;
    }
    if (v.num_spines == 0) {
        // single-level star(s); treat as two-level with no spines
        v.is_two_level = topo.num_switches() == 1;
        return v;
    }
    // every spine connects only to leaves, every leaf uplink goes to a spine
    for (int s = 0; s < topo.num_switches(); ++s) {
        for (const auto& [port, peer] : peers[s]) {
            if (v.is_leaf[s]) {
                if (peer.kind == NodeKind::Switch && v.is_leaf[peer.id]) return v;
            } else {
                if (peer.kind == NodeKind::Host || !v.is_leaf[peer.id]) return v;
            }
        }
    }
    v.is_two_level = true;
    return v;
}

}  // namespace

RoutingTable compute_fat_tree_routing(const Topology& topo) {
    auto view = analyze_two_level(topo);
    if (!view.is_two_level) return compute_generic_routing(topo);

    auto peers = switch_peers(topo);
    const int N = topo.num_hosts();
    RoutingTable rt;
    rt.port_for_dest.assign(topo.num_switches(), std::vector<int>(N, -1));

    // parallel uplink count p: links from one leaf to one spine
    int p = 1;
    for (int s = 0; s < topo.num_switches() && view.num_spines > 0; ++s) {
        if (!view.is_leaf[s]) continue;
        std::map<int, int> per_spine;
        for (const auto& [port, peer] : peers[s])
            if (peer.kind == NodeKind::Switch) per_spine[peer.id]++;
        for (const auto& [spine, cnt] : per_spine) p = std::max(p, cnt);
        break;
    }

    for (int dest = 0; dest < N; ++dest) {
        auto [leaf, leaf_port] = view.attach[dest];
        // down-route at the destination leaf
        rt.port_for_dest[leaf][dest] = leaf_port;
        if (view.num_spines == 0) continue;
        int spine_idx = leaf_port % view.num_spines;
        // dest port -> (spine, copy) is a bijection when H = S * P
        int copy = (leaf_port / view.num_spines) % p;
        // spines: route down the cable toward dest's leaf (copy-th parallel link)
        for (int s = 0; s < topo.num_switches(); ++s) {
            if (view.is_leaf[s]) continue;
            std::vector<int> down;
            for (const auto& [port, peer] : peers[s])
                if (peer.kind == NodeKind::Switch && peer.id == leaf) down.push_back(port);
            std::sort(down.begin(), down.end());
            if (!down.empty()) rt.port_for_dest[s][dest] = down[copy % down.size()];
        }
        // other leaves: up toward the selected spine
        for (int s = 0; s < topo.num_switches(); ++s) {
            if (!view.is_leaf[s] || s == leaf) continue;
            std::vector<int> up;
            for (const auto& [port, peer] : peers[s])
                if (peer.kind == NodeKind::Switch && view.spine_index[peer.id] == spine_idx)
                    up.push_back(port);
            std::sort(up.begin(), up.end());
            if (!up.empty()) rt.port_for_dest[s][dest] = up[copy % up.size()];
        }
    }
    for (int s = 0; s < topo.num_switches(); ++s)
        for (int dest = 0; dest < N; ++dest)
            if (rt.port_for_dest[s][dest] < 0)
                throw RoutingError("fat-tree routing incomplete: switch " + topo.switches[s].name +
                                   " cannot reach host " + topo.host_names[dest]);
    return rt;
}

RoutingTable compute_generic_routing(const Topology& topo) {
    auto peers = switch_peers(topo);
    auto attach = topo.host_attachments();
    const int N = topo.num_hosts();
    const int S = topo.num_switches();
    RoutingTable rt;
    rt.port_for_dest.assign(S, std::vector<int>(N, -1));

    // switch adjacency
    std::vector<std::vector<std::pair<int, int>>> adj(S);  // (peer switch, my port)
    for (int s = 0; s < S; ++s)
        for (const auto& [port, peer] : peers[s])
            if (peer.kind == NodeKind::Switch) adj[s].emplace_back(peer.id, port);

    for (int dest = 0; dest < N; ++dest) {
        auto [root, root_port] = attach[dest];
        if (root < 0) throw RoutingError("host " + topo.host_names[dest] + " is not attached to a switch");
        std::vector<int> dist(S, -1);
        std::deque<int> q{root};
        dist[root] = 0;
        while (!q.empty()) {
            int v = q.front();
            q.pop_front();
            for (auto [w, port] : adj[v])
                if (dist[w] < 0) {
                    dist[w] = dist[v] + 1;
                    q.push_back(w);
                }
        }
        for (int s = 0; s < S; ++s) {
            if (s == root) {
                rt.port_for_dest[s][dest] = root_port;
                continue;
            }
            if (dist[s] < 0) throw RoutingError("host " + topo.host_names[dest] + " unreachable from switch " +
                                                topo.switches[s].name);
            std::vector<int> candidates;
            for (auto [w, port] : adj[s])
                if (dist[w] == dist[s] - 1) candidates.push_back(port);
            std::sort(candidates.begin(), candidates.end());
            rt.port_for_dest[s][dest] = candidates[dest % candidates.size()];
        }
    }
    return rt;
}

RoutingTable load_routing_table(const Topology& topo, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open routing table: " + path);
    std::map<std::string, int> sw_id, host_id;
    for (int i = 0; i < topo.num_switches(); ++i) sw_id[topo.switches[i].name] = i;
    for (int i = 0; i < topo.num_hosts(); ++i) host_id[topo.host_names[i]] = i;
    RoutingTable rt;
    rt.port_for_dest.assign(topo.num_switches(), std::vector<int>(topo.num_hosts(), -1));
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream ss(line);
        std::string sw, host;
        int port;
        if (!(ss >> sw >> host >> port))
            throw ConfigError(path + ":" + std::to_string(lineno) + ": expected switch,host,port");
        auto si = sw_id.find(sw);
        auto hi = host_id.find(host);
        if (si == sw_id.end()) throw ConfigError(path + ":" + std::to_string(lineno) + ": unknown switch " + sw);
        if (hi == host_id.end()) throw ConfigError(path + ":" + std::to_string(lineno) + ": unknown host " + host);
        rt.port_for_dest[si->second][hi->second] = port;
    }
    return rt;
}

std::vector<LinkConflict> verify_conflict_free(const Topology& topo, const RoutingTable& routing,
                                               const ShiftPattern& pattern, int phase) {
    auto peers = switch_peers(topo);
    auto attach = topo.host_attachments();
    std::map<std::pair<int, int>, std::vector<int>> usage;  // (switch, port) -> sources
    for (int src = 0; src < pattern.num_nodes; ++src) {
        int dest = pattern.dest(src, phase);
        if (dest == src) continue;  // local copy, no network flow
        int sw = attach[src].first;
        for (int hop = 0; hop <= topo.num_switches(); ++hop) {
            int port = routing.lookup(sw, dest);
            auto it = peers[sw].find(port);
            if (it == peers[sw].end())
                throw RoutingError("routing table points at an uncabled port on " + topo.switches[sw].name);
            if (it->second.kind == NodeKind::Host) break;
            usage[{sw, port}].push_back(src);
            sw = it->second.id;
            if (hop == topo.num_switches())
                throw RoutingError("routing loop detected tracing host " + std::to_string(src));
        }
    }
    std::vector<LinkConflict> conflicts;
    for (auto& [link, sources] : usage)
        if (sources.size() >= 2) conflicts.push_back({link.first, link.second, sources});
    return conflicts;
}

Topology degrade(const Topology& topo, const std::vector<int>& remove_hosts,
                 const std::vector<std::pair<int, int>>& swap_cable_pairs) {
    Topology t = topo;
    // swap the switch-side endpoints of the two hosts' cables
    for (auto [h1, h2] : swap_cable_pairs) {
        if (h1 < 0 || h1 >= t.num_hosts() || h2 < 0 || h2 >= t.num_hosts())
            throw ConfigError("swap_cable_pairs references unknown host");
        TopoLink *l1 = nullptr, *l2 = nullptr;
        for (auto& l : t.links) {
            if (l.a.kind == NodeKind::Host && l.a.id == h1) l1 = &l;
            if (l.b.kind == NodeKind::Host && l.b.id == h1) { std::swap(l.a, l.b); l1 = &l; }
            if (l.a.kind == NodeKind::Host && l.a.id == h2) l2 = &l;
            if (l.b.kind == NodeKind::Host && l.b.id == h2) { std::swap(l.a, l.b); l2 = &l; }
        }
        if (!l1 || !l2) throw ConfigError("swap_cable_pairs host has no cable");
        std::swap(l1->b, l2->b);
    }
    // drop hosts and their cables, then re-densify ids
    std::vector<char> removed(t.num_hosts(), 0);
    for (int h : remove_hosts) {
        if (h < 0 || h >= t.num_hosts()) throw ConfigError("remove_hosts references unknown host");
        removed[h] = 1;
    }
    std::vector<int> new_id(t.num_hosts(), -1);
    std::vector<std::string> names;
    for (int h = 0; h < t.num_hosts(); ++h)
        if (!removed[h]) {
            new_id[h] = static_cast<int>(names.size());
            names.push_back(t.host_names[h]);
        }
    std::vector<TopoLink> links;
    for (auto& l : t.links) {
        bool drop = false;
        for (auto* e : {&l.a, &l.b})
            if (e->kind == NodeKind::Host) {
                if (removed[e->id]) drop = true;
                else e->id = new_id[e->id];
            }
        if (!drop) links.push_back(l);
    }
    t.host_names = std::move(names);
    t.links = std::move(links);
    if (t.host_names.empty() || !t.connected()) throw ConfigError("degradation disconnects the topology");
    return t;
}

}  // namespace ibsim
