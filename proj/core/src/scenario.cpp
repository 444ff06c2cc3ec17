#include "ibsim/scenario.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace ibsim {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& what) {
    throw ConfigError("config " + path + ": " + what);
}

void check_keys(const json& obj, const std::string& path, const std::set<std::string>& allowed) {
    for (auto it = obj.begin(); it != obj.end(); ++it)
        if (!allowed.count(it.key())) fail(path + "." + it.key(), "unknown key");
}

template <typename T>
T get_or(const json& obj, const std::string& key, T def) {
    if (!obj.contains(key)) return def;
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception& e) {
        fail(key, e.what());
    }
}

SimTime get_ns(const json& obj, const std::string& key, SimTime def) {
    if (!obj.contains(key)) return def;
    double ns = obj.at(key).get<double>();
    return SimTime{static_cast<std::int64_t>(ns * 1000.0)};
}

SimTime get_us(const json& obj, const std::string& key, SimTime def) {
    if (!obj.contains(key)) return def;
    double us = obj.at(key).get<double>();
    return SimTime{static_cast<std::int64_t>(us * 1e6)};
}

LatencyDistribution parse_latency(const json& j, std::string* echo_json) {
    std::string kind = get_or<std::string>(j, "kind", "deterministic");
    json echo;
    echo["kind"] = kind;
    LatencyDistribution dist = LatencyDistribution::deterministic(SimTime{0});
    if (kind == "deterministic") {
        check_keys(j, "stack_latency", {"kind", "value_ns"});
        SimTime v = get_ns(j, "value_ns", SimTime{0});
        echo["value_ns"] = v.ps / 1000.0;
        dist = LatencyDistribution::deterministic(v);
    } else if (kind == "histogram") {
        check_keys(j, "stack_latency", {"kind", "path"});
        std::string path = get_or<std::string>(j, "path", "");
        if (path.empty()) fail("stack_latency.path", "histogram needs a CSV path");
        echo["path"] = path;
        dist = LatencyDistribution::histogram_from_csv(path);
    } else if (kind == "shifted_lognormal") {
        check_keys(j, "stack_latency", {"kind", "shift_ns", "mu_ln_ns", "sigma"});
        SimTime shift = get_ns(j, "shift_ns", 600_ns);
        double mu = get_or<double>(j, "mu_ln_ns", 5.52);
        double sigma = get_or<double>(j, "sigma", 0.5);
        echo["shift_ns"] = shift.ps / 1000.0;
        echo["mu_ln_ns"] = mu;
        echo["sigma"] = sigma;
        dist = LatencyDistribution::shifted_lognormal(shift, mu, sigma);
    } else {
        fail("stack_latency.kind", "must be deterministic | histogram | shifted_lognormal");
    }
    *echo_json = echo.dump();
    return dist;
}

FragmentSizeDist parse_fragment_size(const json& j) {
    FragmentSizeDist d;
    std::string kind = get_or<std::string>(j, "kind", "fixed");
    if (kind == "fixed") {
        check_keys(j, "fragment_size", {"kind", "bytes"});
        d.kind = FragmentSizeDist::Kind::Fixed;
        d.fixed_bytes = get_or<std::int64_t>(j, "bytes", 1 << 20);
    } else if (kind == "uniform") {
        check_keys(j, "fragment_size", {"kind", "min_bytes", "max_bytes"});
        d.kind = FragmentSizeDist::Kind::Uniform;
        d.uniform_min = get_or<std::int64_t>(j, "min_bytes", 1 << 20);
        d.uniform_max = get_or<std::int64_t>(j, "max_bytes", 1 << 20);
    } else if (kind == "lognormal") {
        check_keys(j, "fragment_size", {"kind", "mu_ln_bytes", "sigma"});
        d.kind = FragmentSizeDist::Kind::Lognormal;
        d.log_mu = get_or<double>(j, "mu_ln_bytes", 13.0);
        d.log_sigma = get_or<double>(j, "sigma", 0.5);
    } else {
        fail("fragment_size.kind", "must be fixed | uniform | lognormal");
    }
    d.validate();
    return d;
}

}  // namespace

ScenarioConfig load_scenario(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    ScenarioConfig cfg;
    check_keys(j, "", {"topology", "routing", "link", "host", "injector", "seed", "duration_ms",
                       "warmup_fraction", "sampling_interval_us", "out_dir"});

    if (j.contains("topology")) {
        const json& t = j["topology"];
        check_keys(t, "topology",
                   {"kind", "spines", "leaves", "hosts_per_leaf", "parallel_uplinks", "path",
                    "hosts", "remove_hosts", "swap_cable_pairs"});
        std::string kind = get_or<std::string>(t, "kind", "fat_tree");
        if (kind == "fat_tree") {
            cfg.topo_kind = ScenarioConfig::TopoKind::FatTree;
            cfg.fat_tree.spines = get_or<int>(t, "spines", 2);
            cfg.fat_tree.leaves = get_or<int>(t, "leaves", 4);
            cfg.fat_tree.hosts_per_leaf = get_or<int>(t, "hosts_per_leaf", 2);
            cfg.fat_tree.parallel_uplinks = get_or<int>(t, "parallel_uplinks", 1);
        } else if (kind == "file") {
            cfg.topo_kind = ScenarioConfig::TopoKind::File;
            cfg.topo_file = get_or<std::string>(t, "path", "");
            if (cfg.topo_file.empty()) fail("topology.path", "file topology needs a path");
        } else if (kind == "direct_pair") {
            cfg.topo_kind = ScenarioConfig::TopoKind::DirectPair;
        } else if (kind == "star") {
            cfg.topo_kind = ScenarioConfig::TopoKind::Star;
            cfg.star_hosts = get_or<int>(t, "hosts", 3);
        } else {
            fail("topology.kind", "must be fat_tree | file | direct_pair | star");
        }
        cfg.remove_hosts = get_or<std::vector<int>>(t, "remove_hosts", {});
        for (const auto& pair : get_or<std::vector<std::vector<int>>>(t, "swap_cable_pairs", {})) {
            if (pair.size() != 2) fail("topology.swap_cable_pairs", "each entry must be [hostA, hostB]");
            cfg.swap_cable_pairs.emplace_back(pair[0], pair[1]);
        }
    }

    if (j.contains("routing")) {
        const json& r = j["routing"];
        check_keys(r, "routing", {"kind", "path"});
        std::string kind = get_or<std::string>(r, "kind", "fat_tree");
        if (kind == "fat_tree") cfg.routing_kind = ScenarioConfig::RoutingKind::FatTree;
        else if (kind == "generic") cfg.routing_kind = ScenarioConfig::RoutingKind::Generic;
        else if (kind == "file") {
            cfg.routing_kind = ScenarioConfig::RoutingKind::File;
            cfg.routing_file = get_or<std::string>(r, "path", "");
            if (cfg.routing_file.empty()) fail("routing.path", "file routing needs a path");
        } else fail("routing.kind", "must be fat_tree | generic | file");
    }

    if (j.contains("link")) {
        const json& l = j["link"];
        check_keys(l, "link",
                   {"data_rate_gbps", "propagation_delay_ns", "num_vls", "buffer_blocks_per_vl",
                    "out_buffer_blocks_per_vl", "crossbar_delay_ns", "cut_through",
                    "xmit_wait_tick_ns"});
        cfg.link.data_rate_bps =
            static_cast<std::int64_t>(get_or<double>(l, "data_rate_gbps", 100.0) * 1e9);
        cfg.link.propagation_delay = get_ns(l, "propagation_delay_ns", 170_ns);
        cfg.link.num_vls = get_or<int>(l, "num_vls", 4);
        cfg.link.buffer_blocks_per_vl = get_or<int>(l, "buffer_blocks_per_vl", 1024);
        cfg.link.out_buffer_blocks_per_vl = get_or<int>(l, "out_buffer_blocks_per_vl", 130);
        cfg.link.crossbar_delay = get_ns(l, "crossbar_delay_ns", 100_ns);
        cfg.link.cut_through = get_or<bool>(l, "cut_through", false);
        cfg.link.xmit_wait_tick = get_ns(l, "xmit_wait_tick_ns", 1_ns);
    }
    cfg.link.validate();

    cfg.stack_latency_json = R"({"kind":"deterministic","value_ns":0.0})";
    if (j.contains("host")) {
        const json& h = j["host"];
        check_keys(h, "host", {"mtu_bytes", "header_bytes", "stack_latency"});
        cfg.host.mtu_bytes = get_or<std::int64_t>(h, "mtu_bytes", 4096);
        cfg.host.header_bytes = get_or<std::int64_t>(h, "header_bytes", 30);
        if (h.contains("stack_latency"))
            cfg.host.stack_latency = parse_latency(h["stack_latency"], &cfg.stack_latency_json);
    }
    cfg.host.validate();

    if (j.contains("injector")) {
        const json& i = j["injector"];
        std::string kind = get_or<std::string>(i, "kind", "daqpipe");
        if (kind == "fixed_shifter" || kind == "time_window_shifter") {
            check_keys(i, "injector",
                       {"kind", "chunk_bytes", "window_us", "grace_us", "message_bytes", "vl"});
            cfg.injector_kind = kind == "fixed_shifter" ? ScenarioConfig::InjectorKind::FixedShifter
                                                        : ScenarioConfig::InjectorKind::TimeWindowShifter;
            cfg.shifter.kind = kind == "fixed_shifter" ? ShifterConfig::Kind::FixedSize
                                                       : ShifterConfig::Kind::TimeWindow;
            cfg.shifter.chunk_bytes = get_or<std::int64_t>(i, "chunk_bytes", 1 << 20);
            cfg.shifter.window = get_us(i, "window_us", 100_us);
            cfg.shifter.grace = get_us(i, "grace_us", SimTime{0});
            cfg.shifter.message_bytes = get_or<std::int64_t>(i, "message_bytes", 1 << 20);
            cfg.shifter.vl = get_or<int>(i, "vl", 0);
            cfg.shifter.validate();
        } else if (kind == "daqpipe") {
            check_keys(i, "injector",
                       {"kind", "credits", "parallel_sends", "mode", "request_bytes", "request_vl",
                        "fragment_size", "events_total", "vl", "em_control_messages", "em_host"});
            cfg.injector_kind = ScenarioConfig::InjectorKind::Daqpipe;
            cfg.daqpipe.credits = get_or<int>(i, "credits", 2);
            cfg.daqpipe.parallel_sends = get_or<int>(i, "parallel_sends", 4);
            std::string mode = get_or<std::string>(i, "mode", "pull");
            if (mode != "pull" && mode != "push") fail("injector.mode", "must be pull | push");
            cfg.daqpipe.pull = mode == "pull";
            cfg.daqpipe.request_bytes = get_or<std::int64_t>(i, "request_bytes", 64);
            cfg.daqpipe.request_vl = get_or<int>(i, "request_vl", 1);
            if (i.contains("fragment_size")) cfg.daqpipe.fragment_size = parse_fragment_size(i["fragment_size"]);
            cfg.daqpipe.events_total = get_or<std::uint64_t>(i, "events_total", 0);
            cfg.daqpipe.vl = get_or<int>(i, "vl", 0);
            cfg.daqpipe.em_control_messages = get_or<bool>(i, "em_control_messages", false);
            cfg.daqpipe.em_host = get_or<int>(i, "em_host", 0);
            cfg.daqpipe.validate();
        } else {
            fail("injector.kind", "must be fixed_shifter | time_window_shifter | daqpipe");
        }
    }

    cfg.seed = get_or<std::uint64_t>(j, "seed", 1);
    cfg.duration = SimTime{static_cast<std::int64_t>(get_or<double>(j, "duration_ms", 10.0) * 1e9)};
    if (cfg.duration.ps <= 0) fail("duration_ms", "must be > 0");
    cfg.warmup_fraction = get_or<double>(j, "warmup_fraction", 0.1);
    if (cfg.warmup_fraction < 0.0 || cfg.warmup_fraction >= 1.0)
        fail("warmup_fraction", "must be in [0, 1)");
    cfg.sampling_interval = get_us(j, "sampling_interval_us", 100_us);
    if (cfg.sampling_interval.ps <= 0) fail("sampling_interval_us", "must be > 0");
    cfg.out_dir = get_or<std::string>(j, "out_dir", "out");
    return cfg;
}

ScenarioConfig load_scenario_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return load_scenario(ss.str());
}

Topology ScenarioConfig::build_topology() const {
    Topology topo;
    switch (topo_kind) {
        case TopoKind::FatTree:
            topo = build_fat_tree(fat_tree);
            break;
        case TopoKind::File: {
            std::ifstream in(topo_file);
            if (!in) throw ConfigError("cannot open topology file: " + topo_file);
            std::stringstream ss;
            ss << in.rdbuf();
            topo = parse_topology(ss.str());
            break;
        }
        case TopoKind::DirectPair:
            topo = make_direct_pair();
            break;
        case TopoKind::Star:
            topo = make_star(star_hosts);
            break;
    }
    if (!remove_hosts.empty() || !swap_cable_pairs.empty())
        topo = degrade(topo, remove_hosts, swap_cable_pairs);
    return topo;
}

RoutingTable ScenarioConfig::build_routing(const Topology& topo) const {
    if (topo.num_switches() == 0) return RoutingTable{};  // direct pair
    switch (routing_kind) {
        case RoutingKind::FatTree:
            return compute_fat_tree_routing(topo);
        case RoutingKind::Generic:
            return compute_generic_routing(topo);
        case RoutingKind::File:
            return load_routing_table(topo, routing_file);
    }
    return RoutingTable{};
}

std::unique_ptr<Injector> ScenarioConfig::build_injector() const {
    switch (injector_kind) {
        case InjectorKind::FixedShifter:
            return std::make_unique<FixedSizeShifter>(shifter);
        case InjectorKind::TimeWindowShifter:
            return std::make_unique<TimeWindowShifter>(shifter);
        case InjectorKind::Daqpipe:
            return std::make_unique<DaqpipeInjector>(daqpipe, seed);
    }
    return nullptr;
}

std::string echo_scenario(const ScenarioConfig& cfg) {
    json j;
    json t;
    switch (cfg.topo_kind) {
        case ScenarioConfig::TopoKind::FatTree:
            t["kind"] = "fat_tree";
            t["spines"] = cfg.fat_tree.spines;
            t["leaves"] = cfg.fat_tree.leaves;
            t["hosts_per_leaf"] = cfg.fat_tree.hosts_per_leaf;
            t["parallel_uplinks"] = cfg.fat_tree.parallel_uplinks;
            break;
        case ScenarioConfig::TopoKind::File:
            t["kind"] = "file";
            t["path"] = cfg.topo_file;
            break;
        case ScenarioConfig::TopoKind::DirectPair:
            t["kind"] = "direct_pair";
            break;
        case ScenarioConfig::TopoKind::Star:
            t["kind"] = "star";
            t["hosts"] = cfg.star_hosts;
            break;
    }
    t["remove_hosts"] = cfg.remove_hosts;
    json swaps = json::array();
    for (auto [a, b] : cfg.swap_cable_pairs) swaps.push_back(json::array({a, b}));
    t["swap_cable_pairs"] = swaps;
    j["topology"] = t;

    json r;
    switch (cfg.routing_kind) {
        case ScenarioConfig::RoutingKind::FatTree: r["kind"] = "fat_tree"; break;
        case ScenarioConfig::RoutingKind::Generic: r["kind"] = "generic"; break;
        case ScenarioConfig::RoutingKind::File:
            r["kind"] = "file";
            r["path"] = cfg.routing_file;
            break;
    }
    j["routing"] = r;

    j["link"] = {{"data_rate_gbps", cfg.link.data_rate_bps / 1e9},
                 {"propagation_delay_ns", cfg.link.propagation_delay.ps / 1000.0},
                 {"num_vls", cfg.link.num_vls},
                 {"buffer_blocks_per_vl", cfg.link.buffer_blocks_per_vl},
                 {"out_buffer_blocks_per_vl", cfg.link.out_buffer_blocks_per_vl},
                 {"crossbar_delay_ns", cfg.link.crossbar_delay.ps / 1000.0},
                 {"cut_through", cfg.link.cut_through},
                 {"xmit_wait_tick_ns", cfg.link.xmit_wait_tick.ps / 1000.0}};
    j["host"] = {{"mtu_bytes", cfg.host.mtu_bytes},
                 {"header_bytes", cfg.host.header_bytes},
                 {"stack_latency", json::parse(cfg.stack_latency_json)}};

    json i;
    switch (cfg.injector_kind) {
        case ScenarioConfig::InjectorKind::FixedShifter:
            i["kind"] = "fixed_shifter";
            i["chunk_bytes"] = cfg.shifter.chunk_bytes;
            i["message_bytes"] = cfg.shifter.message_bytes;
            i["vl"] = cfg.shifter.vl;
            break;
        case ScenarioConfig::InjectorKind::TimeWindowShifter:
            i["kind"] = "time_window_shifter";
            i["window_us"] = cfg.shifter.window.ps / 1e6;
            i["grace_us"] = cfg.shifter.grace.ps / 1e6;
            i["message_bytes"] = cfg.shifter.message_bytes;
            i["vl"] = cfg.shifter.vl;
            break;
        case ScenarioConfig::InjectorKind::Daqpipe: {
            i["kind"] = "daqpipe";
            i["credits"] = cfg.daqpipe.credits;
            i["parallel_sends"] = cfg.daqpipe.parallel_sends;
            i["mode"] = cfg.daqpipe.pull ? "pull" : "push";
            i["request_bytes"] = cfg.daqpipe.request_bytes;
            i["request_vl"] = cfg.daqpipe.request_vl;
            json fs;
            switch (cfg.daqpipe.fragment_size.kind) {
                case FragmentSizeDist::Kind::Fixed:
                    fs = {{"kind", "fixed"}, {"bytes", cfg.daqpipe.fragment_size.fixed_bytes}};
                    break;
                case FragmentSizeDist::Kind::Uniform:
                    fs = {{"kind", "uniform"},
                          {"min_bytes", cfg.daqpipe.fragment_size.uniform_min},
                          {"max_bytes", cfg.daqpipe.fragment_size.uniform_max}};
                    break;
                case FragmentSizeDist::Kind::Lognormal:
                    fs = {{"kind", "lognormal"},
                          {"mu_ln_bytes", cfg.daqpipe.fragment_size.log_mu},
                          {"sigma", cfg.daqpipe.fragment_size.log_sigma}};
                    break;
            }
            i["fragment_size"] = fs;
            i["events_total"] = cfg.daqpipe.events_total;
            i["vl"] = cfg.daqpipe.vl;
            i["em_control_messages"] = cfg.daqpipe.em_control_messages;
            i["em_host"] = cfg.daqpipe.em_host;
            break;
        }
    }
    j["injector"] = i;

    j["seed"] = cfg.seed;
    j["duration_ms"] = cfg.duration.ps / 1e9;
    j["warmup_fraction"] = cfg.warmup_fraction;
    j["sampling_interval_us"] = cfg.sampling_interval.ps / 1e6;
    j["out_dir"] = cfg.out_dir;
    return j.dump(2) + "\n";
}

}  // namespace ibsim
