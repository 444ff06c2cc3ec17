#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "ibsim/fabric.hpp"
#include "ibsim/rng.hpp"

namespace ibsim {

// A traffic injector drives message posting on every host and reacts to
// completion callbacks. One injector instance per simulation run.
class Injector {
public:
    virtual ~Injector() = default;

    // Wire up handlers and post initial traffic. No new traffic is started
    // at or after stop_at; in-flight messages drain afterwards.
    virtual void start(Network& net, SimTime stop_at) = 0;
    virtual void on_delivered(const Message& msg) {}
    virtual void on_consumed(const Message& msg) {}

    // per-event completion records (DAQPIPE); empty for shifters
    struct EventRecord {
        std::uint64_t event_id;
        int bu;
        SimTime assigned_at;
        SimTime completed_at;
    };
    virtual const std::vector<EventRecord>& event_records() const {
        static const std::vector<EventRecord> none;
        return none;
    }
};

struct ShifterConfig {
    enum class Kind { FixedSize, TimeWindow };
    Kind kind = Kind::FixedSize;
    std::int64_t chunk_bytes = 1 << 20;   // fixed-size: bytes per phase
    SimTime window = 100_us;              // time-window
    SimTime grace{0};
    std::int64_t message_bytes = 1 << 20;
    int vl = 0;

    void validate() const {
        if (chunk_bytes < 1) throw ConfigError("shifter.chunk_bytes must be >= 1");
        if (message_bytes < 1) throw ConfigError("shifter.message_bytes must be >= 1");
        if (kind == Kind::TimeWindow && (grace.ps < 0 || grace >= window))
            throw ConfigError("shifter requires 0 <= grace < window");
    }
};

// In phase n, node i targets (n + i) mod N.
inline int shifter_dest(int node, int phase, int num_nodes) {
    return (node + phase) % num_nodes;
}

// Shifts destination after chunk_bytes have been posted; phases advance
// per node with no global synchronization.
class FixedSizeShifter final : public Injector {
public:
    explicit FixedSizeShifter(const ShifterConfig& cfg);

    void start(Network& net, SimTime stop_at) override;
    void on_consumed(const Message& msg) override;

private:
    void try_post(int node);

    ShifterConfig cfg_;
    Network* net_ = nullptr;
    SimTime stop_at_{0};
    struct NodeState {
        int phase = 0;
        std::int64_t posted_in_phase = 0;
        int outstanding = 0;
    };
    std::vector<NodeState> nodes_;
};

// Globally synchronous: phase n = floor(now / window). During the trailing
// grace interval of each window the hosts inject nothing; packets already in
// the network drain.
class TimeWindowShifter final : public Injector {
public:
    explicit TimeWindowShifter(const ShifterConfig& cfg);

    void start(Network& net, SimTime stop_at) override;
    void on_consumed(const Message& msg) override;

private:
    void on_window_start();
    void try_post(int node);
    bool in_send_region() const;

    ShifterConfig cfg_;
    Network* net_ = nullptr;
    SimTime stop_at_{0};
    struct NodeState {
        int outstanding = 0;
        bool deferred = false;  // post postponed to the next window start
    };
    std::vector<NodeState> nodes_;
};

struct FragmentSizeDist {
    enum class Kind { Fixed, Uniform, Lognormal };
    Kind kind = Kind::Fixed;
    std::int64_t fixed_bytes = 1 << 20;
    std::int64_t uniform_min = 1 << 20, uniform_max = 1 << 20;
    double log_mu = 0.0, log_sigma = 0.0;  // of ln(bytes)

    void validate() const;
    std::int64_t sample(Rng& rng) const;
};

struct DaqpipeConfig {
    int credits = 2;         // events in flight per BU
    int parallel_sends = 4;  // fragments of one event in flight
    bool pull = true;
    std::int64_t request_bytes = 64;
    int request_vl = 1;  // control lane; pull requests must not queue behind bulk data
    FragmentSizeDist fragment_size;
    std::uint64_t events_total = 0;  // 0 = run until stop_at
    int vl = 0;
    bool em_control_messages = false;  // 64 B BU<->EM messages on VL 1
    int em_host = 0;

    void validate() const {
        if (credits < 1) throw ConfigError("daqpipe.credits must be >= 1");
        if (parallel_sends < 1) throw ConfigError("daqpipe.parallel_sends must be >= 1");
        if (request_bytes < 1) throw ConfigError("daqpipe.request_bytes must be >= 1");
        fragment_size.validate();
    }
};

// Folded event builder: every node is both RU and BU; the EM assigns events
// round-robin over BUs holding fewer than `credits` incomplete events; each
// BU gathers fragments in barrel-shifted RU order with at most
// `parallel_sends` in flight per event. The BU's own fragment is a zero-cost
// local copy.
class DaqpipeInjector final : public Injector {
public:
    DaqpipeInjector(const DaqpipeConfig& cfg, std::uint64_t seed);

    void start(Network& net, SimTime stop_at) override;
    void on_delivered(const Message& msg) override;
    const std::vector<EventRecord>& event_records() const override { return records_; }

    // trace invariants, exercised by tests
    int incomplete_events(int bu) const { return bus_[bu].incomplete; }

private:
    struct EventState {
        std::uint64_t id;
        int bu;
        std::vector<std::int64_t> frag_sizes;  // per RU
        int next_frag = 0;   // position in the barrel order
        int outstanding = 0;
        int done = 0;
        SimTime assigned_at{0};
    };

    void em_try_assign();
    void begin_event(std::uint64_t event_id, int bu);
    void pump(EventState& ev);
    void fragment_done(EventState& ev);
    void post_fragment(EventState& ev, int ru);

    DaqpipeConfig cfg_;
    Rng rng_;
    Network* net_ = nullptr;
    SimTime stop_at_{0};
    int num_nodes_ = 0;
    struct BuState {
        int incomplete = 0;
    };
    std::vector<BuState> bus_;
    std::map<std::uint64_t, EventState> events_;
    std::uint64_t next_event_ = 0;
    int rr_bu_ = 0;
    std::vector<EventRecord> records_;
};

}  // namespace ibsim
