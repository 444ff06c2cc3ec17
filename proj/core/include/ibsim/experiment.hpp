#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ibsim/scenario.hpp"

namespace ibsim {

struct RunReport {
    CounterSet counters;
    std::vector<Injector::EventRecord> events;
    SimTime duration{0};
    SimTime warmup{0};
    int num_hosts = 0;
    bool drained = false;
    std::string config_echo;

    double goodput_gbps(int host) const;
    double mean_goodput_gbps() const;   // per node
    double min_goodput_gbps() const;
    double max_goodput_gbps() const;
};

// Build everything from the config, run the engine through the scenario
// duration plus a drain period, and collect counters.
// `audit_every_event` runs the credit-conservation audit after each event.
RunReport run_scenario(const ScenarioConfig& cfg, bool audit_every_event = false);

// Writes report.csv, ports.csv, events.csv, summary.txt, config.echo.json.
void write_report_files(const RunReport& report, const std::string& out_dir);

struct SweepCell {
    int credits = 0;
    int parallel_sends = 0;
    double goodput_gbps = 0.0;  // mean per node
    bool failed = false;
    std::string error;
};

struct SweepResult {
    std::vector<SweepCell> cells;
};

// One independent run per (credits, parallel_sends) pair; per-cell seeds are
// derived from the master seed so the sweep order cannot matter.
SweepResult sweep(const ScenarioConfig& base, const std::vector<int>& credits,
                  const std::vector<int>& parallel_sends);

// gnuplot-friendly matrix: `# credits parallel_sends goodput_gbps`
void write_sweep_file(const SweepResult& result, const std::string& path);

struct BufferEstimate {
    std::int64_t estimated_bytes = 0;
    std::int64_t largest_clean_burst = 0;  // S*: no XmitWait on the probe host
    double drain_share = 0.5;              // arbitration share granted to the probe
    bool converged = false;
    struct Probe {
        std::int64_t burst_bytes;
        std::int64_t xmit_wait_ticks;
    };
    std::vector<Probe> probes;
};

// Congestion-based switch buffer estimation: host0 streams to host2 at full
// speed while host1 sends bursts of growing size; the largest burst that
// causes no XmitWait on host1's uplink, corrected for the bandwidth share
// the congested port still grants host1, estimates the per-VL buffer.
BufferEstimate estimate_buffer(const ScenarioConfig& cfg);

struct RoutingVerification {
    int phases_checked = 0;
    int conflicting_phases = 0;
    std::vector<std::pair<int, LinkConflict>> conflicts;  // (phase, conflict)
};

// verify_conflict_free over every phase of the linear shift.
RoutingVerification verify_routing(const ScenarioConfig& cfg);

// Samples `draws` stack latencies and writes a binned table (for comparing
// the configured distribution against measured data).
void write_latency_histogram(const LatencyDistribution& dist, std::uint64_t seed, int draws,
                             int bins, const std::string& path);

}  // namespace ibsim
