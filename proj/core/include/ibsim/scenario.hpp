#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ibsim/fabric.hpp"
#include "ibsim/link.hpp"
#include "ibsim/topology.hpp"
#include "ibsim/traffic.hpp"

namespace ibsim {

// Full experiment description. Everything has an explicit default and the
// effective values are echoed into config.echo.json next to the results.
struct ScenarioConfig {
    enum class TopoKind { FatTree, File, DirectPair, Star };
    TopoKind topo_kind = TopoKind::FatTree;
    FatTreeSpec fat_tree;
    std::string topo_file;
    int star_hosts = 3;
    std::vector<int> remove_hosts;
    std::vector<std::pair<int, int>> swap_cable_pairs;

    enum class RoutingKind { FatTree, Generic, File };
    RoutingKind routing_kind = RoutingKind::FatTree;
    std::string routing_file;

    LinkParams link;
    HostParams host;
    // stack latency description kept for echoing; matches HostParams' default
    std::string stack_latency_json = R"({"kind":"deterministic","latency_ns":0})";

    enum class InjectorKind { FixedShifter, TimeWindowShifter, Daqpipe };
    InjectorKind injector_kind = InjectorKind::Daqpipe;
    ShifterConfig shifter;
    DaqpipeConfig daqpipe;

    std::uint64_t seed = 1;
    SimTime duration = 10_ms;
    double warmup_fraction = 0.1;
    SimTime sampling_interval = 100_us;
    std::string out_dir = "out";

    SimTime warmup() const {
        return SimTime{static_cast<std::int64_t>(warmup_fraction * static_cast<double>(duration.ps))};
    }

    Topology build_topology() const;
    RoutingTable build_routing(const Topology& topo) const;
    std::unique_ptr<Injector> build_injector() const;
};

// Parse a scenario from a JSON document; unknown keys are rejected so typos
// fail loudly. Throws ConfigError with a path-like message.
ScenarioConfig load_scenario(const std::string& json_text);
ScenarioConfig load_scenario_file(const std::string& path);

// Effective configuration with every default filled in.
std::string echo_scenario(const ScenarioConfig& cfg);

}  // namespace ibsim
