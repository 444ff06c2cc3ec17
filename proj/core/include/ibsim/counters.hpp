#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ibsim/time.hpp"

namespace ibsim {

struct PortCounters {
    std::int64_t xmit_wait_ps = 0;  // idle-with-data-but-no-credits time
    std::int64_t bytes_tx = 0;
    std::int64_t packets_tx = 0;
    std::vector<int> max_occupancy_blocks;  // per VL, input buffer side

    std::int64_t xmit_wait_ticks(SimTime tick) const { return xmit_wait_ps / tick.ps; }
};

// One row per port in ports.csv.
struct PortRecord {
    std::string node_kind;  // "host" | "switch"
    std::string node_name;
    int port = 0;
    PortCounters counters;
};

struct MessageRecord {
    std::uint64_t msg_id;
    int src, dest;
    std::int64_t size;
    std::uint64_t tag;
    SimTime posted_at, completed_at;
};

// Whole-run counter dump: port counters plus per-host delivered-goodput
// aggregates and the time series behind report.csv.
struct CounterSet {
    std::vector<PortRecord> ports;
    std::vector<std::int64_t> goodput_bytes_per_host;              // after warmup
    std::vector<std::vector<std::int64_t>> goodput_series;         // [host][interval]
    SimTime sampling_interval{0};
    SimTime xmit_wait_tick{1000};
    std::uint64_t messages_posted = 0;
    std::uint64_t messages_completed = 0;
    std::int64_t posted_wire_bytes = 0;
    std::int64_t host_egress_bytes = 0;
};

}  // namespace ibsim
