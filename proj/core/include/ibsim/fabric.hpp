#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "ibsim/counters.hpp"
#include "ibsim/engine.hpp"
#include "ibsim/latency_dist.hpp"
#include "ibsim/link.hpp"
#include "ibsim/rng.hpp"
#include "ibsim/topology.hpp"

namespace ibsim {

struct HostParams {
    std::int64_t mtu_bytes = 4096;
    std::int64_t header_bytes = 30;
    LatencyDistribution stack_latency = LatencyDistribution::deterministic(SimTime{0});

    void validate() const {
        if (mtu_bytes < 1) throw ConfigError("host.mtu_bytes must be >= 1");
        if (header_bytes < 0) throw ConfigError("host.header_bytes must be >= 0");
    }
};

// Application-level transfer; fragments into <= MTU packets on one VL.
struct Message {
    std::uint64_t id = 0;
    int src = -1;
    int dest = -1;
    std::int64_t size = 0;
    std::uint8_t vl = 0;
    std::uint64_t tag = 0;       // opaque to the fabric (injector bookkeeping)
    bool count_goodput = true;   // control/request messages set this false
    SimTime posted_at{0};
    SimTime completed_at{0};
};

class Network;

namespace detail {

class SwitchInputPort;

class PacketReceiver {
public:
    virtual ~PacketReceiver() = default;
    virtual void on_packet_head(const Packet& pkt, SimTime tail_arrival) = 0;
    virtual void on_packet_tail(const Packet& pkt) = 0;
};

// Common transmit side of a link: VL arbitration at packet boundaries,
// whole-packet credit check, serialization, XmitWait accounting.
class OutputPort : public PacketReceiver {
public:
    OutputPort(Network& net, const LinkParams& params, std::string owner_kind,
               std::string owner_name, int port_index, int num_vls, int peer_capacity);
    ~OutputPort() override = default;

    void set_peer(PacketReceiver* peer) { peer_ = peer; }

    // transmit if idle and something is eligible
    void kick();
    // receiver freed blocks; credit update arrives after the propagation delay
    void return_credits(int vl, int blocks);
    void finalize(SimTime now);  // flush a pending XmitWait interval

    const CreditState& credits() const { return credits_; }
    CreditState& credits() { return credits_; }
    PortCounters& counters() { return counters_; }
    const PortCounters& counters() const { return counters_; }
    bool idle() const { return !busy_ && wire_.empty(); }
    SwitchInputPort* peer_as_switch_input() const;

    // unused on the transmit side
    void on_packet_head(const Packet&, SimTime) override {}
    void on_packet_tail(const Packet&) override {}

    std::string owner_kind, owner_name;
    int port_index;

protected:
    // Select the next packet honoring per-VL credits; pops it from whatever
    // queue feeds this port. Returns false when nothing is eligible.
    virtual bool next_packet(Packet& out) = 0;
    // True when a packet is queued but blocked purely by missing credits.
    virtual bool waiting_on_credits() const = 0;
    // tail of `pkt` left the port (serialization finished)
    virtual void on_tx_tail(const Packet& pkt) {}

    void update_blocked();

    Network& net_;
    const LinkParams& params_;
    CreditState credits_;
    PortCounters counters_;
    PacketReceiver* peer_ = nullptr;
    int rr_vl_ = 0;

private:
    struct InFlight {
        Packet pkt;
        SimTime tail_arrival;
    };
    std::deque<InFlight> wire_;
    Packet cur_pkt_;
    bool busy_ = false;
    bool blocked_ = false;
    SimTime blocked_since_{0};
};

struct PendingMessage {
    Message msg;
    std::int64_t bytes_emitted = 0;
    std::uint32_t next_seq = 0;
};

// Host egress: one work queue per (VL, destination) — QP-like — feeding the
// port; fragmentation happens lazily, one packet at a time, round-robin
// across work queues at packet boundaries.
class HostEgressPort final : public OutputPort {
public:
    HostEgressPort(Network& net, const LinkParams& params, std::string host_name, int host_id,
                   int num_vls, int num_hosts, int peer_capacity);

    void enqueue(Message msg);  // already past the stack delay
    void set_gate_open(bool open);
    bool gate_open() const { return gate_open_; }
    bool queues_empty() const;

    int host_id;

protected:
    bool next_packet(Packet& out) override;
    bool waiting_on_credits() const override;

private:
    std::deque<PendingMessage>& queue_for(int vl, int dest) {
        return queues_[static_cast<std::size_t>(vl) * num_dests_ + dest];
    }

    std::vector<std::deque<PendingMessage>> queues_;  // [vl * num_dests + dest]
    int num_dests_;
    bool gate_open_ = true;
    std::size_t rr_queue_ = 0;  // round-robin over (vl, dest) work queues
};

class SwitchModel;

// Switch egress: per-VL staging buffers filled by the crossbar.
class SwitchOutputPort final : public OutputPort {
public:
    SwitchOutputPort(Network& net, const LinkParams& params, SwitchModel& sw,
                     std::string switch_name, int port_index, int num_vls, int peer_capacity);

    bool reserve(int vl, int blocks);  // crossbar space check + reservation
    void push(Packet pkt);             // transfer completed
    bool empty() const;

    int rr_input = 0;  // round-robin pointer over requesting (input, vl) slots

protected:
    bool next_packet(Packet& out) override;
    bool waiting_on_credits() const override;
    void on_tx_tail(const Packet& pkt) override;

private:
    SwitchModel& switch_;
    std::vector<std::deque<Packet>> queues_;  // per VL
    std::vector<int> occupancy_;              // per VL, includes reservations
};

// Switch ingress: per-VL FIFOs; a packet occupies the buffer until the
// crossbar moves it to the output side, then its blocks are credited back
// upstream.
class SwitchInputPort final : public PacketReceiver {
public:
    SwitchInputPort(Network& net, const LinkParams& params, SwitchModel& sw, int port_index,
                    int num_vls);

    void on_packet_head(const Packet& pkt, SimTime tail_arrival) override;
    void on_packet_tail(const Packet& pkt) override;

    void set_upstream(OutputPort* up) { upstream_ = up; }

    struct Queued {
        Packet pkt;
        int out_port = -1;
        SimTime tail_arrival{0};
        bool arrived = false;
        bool granted = false;
    };

    // head-of-line packet of a VL that is ready for the crossbar
    Queued* head_ready(int vl);
    const Packet& front_packet(int vl) const { return queues_[vl].front().pkt; }
    void pop_head(int vl);
    int occupancy(int vl) const { return occupancy_[vl]; }
    bool empty() const;
    OutputPort* upstream() { return upstream_; }

    int port_index;
    std::vector<int> max_occupancy;  // per VL high-water mark

private:
    void admit(const Packet& pkt, SimTime tail_arrival);

    Network& net_;
    const LinkParams& params_;
    SwitchModel& switch_;
    OutputPort* upstream_ = nullptr;
    std::vector<std::deque<Queued>> queues_;  // per VL
    std::vector<int> occupancy_;
};

class SwitchModel {
public:
    SwitchModel(Network& net, const LinkParams& params, int switch_id, std::string name, int num_ports);

    void try_crossbar();        // grant eligible transfers on every output
    void try_output(int port);  // grant eligible transfers toward one output

    std::vector<std::unique_ptr<SwitchInputPort>> inputs;    // by port index
    std::vector<std::unique_ptr<SwitchOutputPort>> outputs;  // by port index
    int switch_id;
    std::string name;

private:
    Network& net_;
    const LinkParams& params_;
};

// Host ingress: reassembly and completion notification; an ideal consumer
// that frees receive buffers as soon as a packet has fully arrived.
class HostSink final : public PacketReceiver {
public:
    HostSink(Network& net, int host_id) : host_id(host_id), net_(net) {}

    void on_packet_head(const Packet&, SimTime) override {}
    void on_packet_tail(const Packet& pkt) override;
    void set_upstream(OutputPort* up) { upstream_ = up; }
    OutputPort* upstream() { return upstream_; }

    int host_id;

private:
    Network& net_;
    OutputPort* upstream_ = nullptr;
};

}  // namespace detail

// The assembled fabric: hosts, switches, links, routing — plus message
// posting, delivery notification, and counter collection.
class Network {
public:
    using MessageHandler = std::function<void(const Message&)>;

    Network(Engine& engine, const Topology& topo, const RoutingTable& routing,
            const LinkParams& link_params, const HostParams& host_params, std::uint64_t seed);

    Engine& engine() { return engine_; }
    const LinkParams& link_params() const { return link_params_; }
    const HostParams& host_params() const { return host_params_; }
    const Topology& topology() const { return topo_; }
    int num_hosts() const { return topo_.num_hosts(); }

    // Post an application message. Self-addressed messages share the host's
    // single injection engine but their packets bypass wire and credits.
    void post_message(int src, int dest, std::int64_t size, int vl, std::uint64_t tag,
                      bool count_goodput = true);

    // invoked at the destination when the last packet (or local copy) lands
    void set_delivery_handler(MessageHandler h) { on_delivered_ = std::move(h); }
    // invoked at the source when the last packet of a message starts
    // serialization (the work queue consumed it)
    void set_consumed_handler(MessageHandler h) { on_consumed_ = std::move(h); }

    // time-window injector gate: while closed, the host injects no packets
    void set_injection_gate(int host, bool open);

    std::int64_t wire_bytes_for(std::int64_t message_size) const;

    // stats configuration
    void set_sampling(SimTime interval, SimTime warmup);

    CounterSet collect_counters(SimTime end_of_run);
    bool drained() const;    // every buffer, queue and wire empty
    void audit() const;      // credit conservation + occupancy cross-check

    // internal wiring (used by the port/switch machinery)
    int route(int switch_id, int dest) const { return routing_.lookup(switch_id, dest); }
    void deliver_packet(const Packet& pkt);
    void message_consumed(std::uint64_t msg_id);
    void count_rx(int host, std::int64_t payload_bytes, SimTime at);

private:
    void complete_message(Message& msg);

    Engine& engine_;
    Topology topo_;
    RoutingTable routing_;
    LinkParams link_params_;
    HostParams host_params_;

    std::vector<std::unique_ptr<detail::HostEgressPort>> host_egress_;  // per host
    std::vector<std::unique_ptr<detail::HostSink>> host_sink_;          // per host
    std::vector<std::unique_ptr<detail::SwitchModel>> switches_;        // per switch

    struct InFlightMessage {
        Message msg;
        std::uint32_t packets_total = 0;
        std::uint32_t packets_received = 0;
    };
    std::unordered_map<std::uint64_t, InFlightMessage> in_flight_;
    std::uint64_t next_msg_id_ = 1;

    std::vector<Rng> host_rng_;

    MessageHandler on_delivered_;
    MessageHandler on_consumed_;

    SimTime sampling_interval_ = 100_us;
    SimTime warmup_{0};
    std::vector<std::vector<std::int64_t>> rx_series_;  // [host][interval]
    std::uint64_t messages_posted_ = 0;
    std::uint64_t messages_completed_ = 0;
    std::int64_t posted_wire_bytes_ = 0;
};

}  // namespace ibsim
