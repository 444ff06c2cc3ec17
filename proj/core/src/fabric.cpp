#include "ibsim/fabric.hpp"

#include <algorithm>
#include <cassert>

namespace ibsim {

namespace detail {

OutputPort::OutputPort(Network& net, const LinkParams& params, std::string owner_kind_,
                       std::string owner_name_, int port_index_, int num_vls, int peer_capacity)
    : owner_kind(std::move(owner_kind_)), owner_name(std::move(owner_name_)),
      port_index(port_index_), net_(net), params_(params),
      credits_(num_vls, peer_capacity) {
    counters_.max_occupancy_blocks.assign(num_vls, 0);
}

void OutputPort::kick() {
    if (busy_) return;
    Packet pkt;
    if (!next_packet(pkt)) {
        update_blocked();
        return;
    }
    Engine& eng = net_.engine();
    if (blocked_) {
        counters_.xmit_wait_ps += (eng.now() - blocked_since_).ps;
        blocked_ = false;
    }
    busy_ = true;
    cur_pkt_ = pkt;
    const SimTime ser = serialization_time(pkt.wire_bytes, params_);
    if (pkt.src == pkt.dest) {
        // self-addressed: occupies the injection engine for the full
        // serialization time but never touches wire, credits or counters
        eng.schedule(eng.now() + ser, [this] {
            busy_ = false;
            Packet done = cur_pkt_;
            on_tx_tail(done);
            net_.deliver_packet(done);
            kick();
        });
        return;
    }
    const int blocks = pkt.blocks();
    credits_.consume(pkt.vl, blocks);
    counters_.bytes_tx += pkt.wire_bytes;
    counters_.packets_tx += 1;
    const SimTime tail_arrival = eng.now() + ser + params_.propagation_delay;
    wire_.push_back({pkt, tail_arrival});
    if (params_.cut_through)
        eng.schedule(eng.now() + params_.propagation_delay,
                     [this, pkt, tail_arrival] { peer_->on_packet_head(pkt, tail_arrival); });
    eng.schedule(eng.now() + ser, [this] {
        busy_ = false;
        Packet done = cur_pkt_;
        on_tx_tail(done);
        kick();
    });
    eng.schedule(tail_arrival, [this] {
        InFlight f = std::move(wire_.front());
        wire_.pop_front();
        credits_.arrive(f.pkt.vl, f.pkt.blocks());
        peer_->on_packet_tail(f.pkt);
    });
}

void OutputPort::update_blocked() {
    const bool waiting = waiting_on_credits();
    if (waiting && !blocked_) {
        blocked_ = true;
        blocked_since_ = net_.engine().now();
    } else if (!waiting && blocked_) {
        counters_.xmit_wait_ps += (net_.engine().now() - blocked_since_).ps;
        blocked_ = false;
    }
}

void OutputPort::return_credits(int vl, int blocks) {
    credits_.release(vl, blocks);
    net_.engine().schedule_in(params_.propagation_delay, [this, vl, blocks] {
        credits_.grant(vl, blocks);
        kick();
    });
}

void OutputPort::finalize(SimTime now) {
    if (blocked_) {
        counters_.xmit_wait_ps += (now - blocked_since_).ps;
        blocked_ = false;
    }
}

HostEgressPort::HostEgressPort(Network& net, const LinkParams& params, std::string host_name,
                               int host_id_, int num_vls, int num_hosts, int peer_capacity)
    : OutputPort(net, params, "host", std::move(host_name), 0, num_vls, peer_capacity),
      host_id(host_id_), queues_(static_cast<std::size_t>(num_vls) * num_hosts),
      num_dests_(num_hosts) {}

void HostEgressPort::enqueue(Message msg) {
    queue_for(msg.vl, msg.dest).push_back(PendingMessage{std::move(msg)});
    kick();
}

void HostEgressPort::set_gate_open(bool open) {
    gate_open_ = open;
    if (open) kick();
    else update_blocked();
}

bool HostEgressPort::queues_empty() const {
    for (const auto& q : queues_)
        if (!q.empty()) return false;
    return true;
}

bool HostEgressPort::next_packet(Packet& out) {
    if (!gate_open_) return false;
    const std::size_t n = queues_.size();
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t slot = (rr_queue_ + k) % n;
        auto& q = queues_[slot];
        if (q.empty()) continue;
        const int vl = static_cast<int>(slot / num_dests_);
        PendingMessage& pm = q.front();
        const std::int64_t payload =
            std::min<std::int64_t>(net_.host_params().mtu_bytes, pm.msg.size - pm.bytes_emitted);
        const std::int64_t wire = payload + net_.host_params().header_bytes;
        const bool loopback = pm.msg.src == pm.msg.dest;
        if (!loopback && credits_.free_blocks(vl) < blocks_for_bytes(wire)) continue;
        out.msg_id = pm.msg.id;
        out.seq = pm.next_seq++;
        out.src = pm.msg.src;
        out.dest = pm.msg.dest;
        out.vl = static_cast<std::uint8_t>(vl);
        out.payload_bytes = static_cast<std::uint32_t>(payload);
        out.wire_bytes = static_cast<std::uint32_t>(wire);
        pm.bytes_emitted += payload;
        out.last = pm.bytes_emitted == pm.msg.size;
        rr_queue_ = (slot + 1) % n;
        if (out.last) {
            const std::uint64_t id = pm.msg.id;
            q.pop_front();
            net_.message_consumed(id);
        }
        return true;
    }
    return false;
}

bool HostEgressPort::waiting_on_credits() const {
    if (!gate_open_) return false;
    for (std::size_t slot = 0; slot < queues_.size(); ++slot) {
        if (queues_[slot].empty()) continue;
        const PendingMessage& pm = queues_[slot].front();
        if (pm.msg.src == pm.msg.dest) continue;  // loopback needs no credits
        const std::int64_t payload =
            std::min<std::int64_t>(net_.host_params().mtu_bytes, pm.msg.size - pm.bytes_emitted);
        if (credits_.free_blocks(static_cast<int>(slot / num_dests_)) <
            blocks_for_bytes(payload + net_.host_params().header_bytes))
            return true;
    }
    return false;
}

SwitchOutputPort::SwitchOutputPort(Network& net, const LinkParams& params, SwitchModel& sw,
                                   std::string switch_name, int port_index, int num_vls,
                                   int peer_capacity)
    : OutputPort(net, params, "switch", std::move(switch_name), port_index, num_vls, peer_capacity),
      switch_(sw), queues_(num_vls), occupancy_(num_vls, 0) {}

bool SwitchOutputPort::reserve(int vl, int blocks) {
    if (occupancy_[vl] + blocks > params_.out_buffer_blocks_per_vl) return false;
    occupancy_[vl] += blocks;
    return true;
}

void SwitchOutputPort::push(Packet pkt) {
    queues_[pkt.vl].push_back(std::move(pkt));
    kick();
}

bool SwitchOutputPort::empty() const {
    if (occupancy_ != std::vector<int>(occupancy_.size(), 0)) return false;
    for (const auto& q : queues_)
        if (!q.empty()) return false;
    return true;
}

bool SwitchOutputPort::next_packet(Packet& out) {
    const int n = static_cast<int>(queues_.size());
    for (int k = 0; k < n; ++k) {
        const int vl = (rr_vl_ + k) % n;
        auto& q = queues_[vl];
        if (q.empty() || credits_.free_blocks(vl) < q.front().blocks()) continue;
        out = std::move(q.front());
        q.pop_front();
        rr_vl_ = (vl + 1) % n;
        return true;
    }
    return false;
}

bool SwitchOutputPort::waiting_on_credits() const {
    for (std::size_t vl = 0; vl < queues_.size(); ++vl)
        if (!queues_[vl].empty() &&
            credits_.free_blocks(static_cast<int>(vl)) < queues_[vl].front().blocks())
            return true;
    return false;
}

void SwitchOutputPort::on_tx_tail(const Packet& pkt) {
    occupancy_[pkt.vl] -= pkt.blocks();
    switch_.try_output(port_index);
}

SwitchInputPort::SwitchInputPort(Network& net, const LinkParams& params, SwitchModel& sw,
                                 int port_index_, int num_vls)
    : port_index(port_index_), max_occupancy(num_vls, 0), net_(net), params_(params), switch_(sw),
      queues_(num_vls), occupancy_(num_vls, 0) {}

SwitchInputPort* OutputPort::peer_as_switch_input() const {
    return dynamic_cast<SwitchInputPort*>(peer_);
}

void SwitchInputPort::on_packet_head(const Packet& pkt, SimTime tail_arrival) {
    // cut-through: the packet becomes routable as soon as its head arrives
    admit(pkt, tail_arrival);
    if (Queued* q = head_ready(pkt.vl)) switch_.try_output(q->out_port);
}

void SwitchInputPort::on_packet_tail(const Packet& pkt) {
    if (params_.cut_through) {
        for (auto& q : queues_[pkt.vl])
            if (!q.arrived && q.pkt.msg_id == pkt.msg_id && q.pkt.seq == pkt.seq) {
                q.arrived = true;
                break;
            }
    } else {
        admit(pkt, net_.engine().now());
        queues_[pkt.vl].back().arrived = true;
    }
    occupancy_[pkt.vl] += pkt.blocks();
    max_occupancy[pkt.vl] = std::max(max_occupancy[pkt.vl], occupancy_[pkt.vl]);
    if (Queued* q = head_ready(pkt.vl)) switch_.try_output(q->out_port);
}

void SwitchInputPort::admit(const Packet& pkt, SimTime tail_arrival) {
    Queued q;
    q.pkt = pkt;
    q.out_port = net_.route(switch_.switch_id, pkt.dest);
    q.tail_arrival = tail_arrival;
    queues_[pkt.vl].push_back(std::move(q));
}

SwitchInputPort::Queued* SwitchInputPort::head_ready(int vl) {
    if (queues_[vl].empty()) return nullptr;
    Queued& q = queues_[vl].front();
    if (q.granted) return nullptr;
    if (!q.arrived && !params_.cut_through) return nullptr;
    return &q;
}

void SwitchInputPort::pop_head(int vl) {
    const Queued& q = queues_[vl].front();
    occupancy_[vl] -= q.pkt.blocks();
    upstream_->return_credits(vl, q.pkt.blocks());
    queues_[vl].pop_front();
}

bool SwitchInputPort::empty() const {
    for (const auto& q : queues_)
        if (!q.empty()) return false;
    return true;
}

SwitchModel::SwitchModel(Network& net, const LinkParams& params, int switch_id_, std::string name_,
                         int num_ports)
    : switch_id(switch_id_), name(std::move(name_)), net_(net), params_(params) {
    for (int p = 0; p < num_ports; ++p) {
        inputs.push_back(std::make_unique<SwitchInputPort>(net, params, *this, p, params.num_vls));
        outputs.push_back(std::make_unique<SwitchOutputPort>(net, params, *this, name, p,
                                                             params.num_vls,
                                                             params.buffer_blocks_per_vl));
    }
}

void SwitchModel::try_crossbar() {
    for (std::size_t p = 0; p < outputs.size(); ++p) try_output(static_cast<int>(p));
}

void SwitchModel::try_output(int port) {
    SwitchOutputPort& out = *outputs[port];
    const int num_vls = params_.num_vls;
    const int total = static_cast<int>(inputs.size()) * num_vls;
    // round-robin over (input, vl) requesters targeting this output
    bool granted_any = true;
    while (granted_any) {
        granted_any = false;
        for (int k = 0; k < total; ++k) {
            const int slot = (out.rr_input + k) % total;
            SwitchInputPort& in = *inputs[slot / num_vls];
            const int vl = slot % num_vls;
            SwitchInputPort::Queued* q = in.head_ready(vl);
            if (!q || q->out_port != port) continue;
            if (!out.reserve(vl, q->pkt.blocks())) continue;
            q->granted = true;
            out.rr_input = (slot + 1) % total;
            SimTime done = net_.engine().now() + params_.crossbar_delay;
            if (params_.cut_through && q->tail_arrival > done) done = q->tail_arrival;
            SwitchInputPort* in_ptr = &in;
            SwitchOutputPort* out_ptr = &out;
            net_.engine().schedule(done, [this, in_ptr, out_ptr, vl] {
                Packet pkt = in_ptr->front_packet(vl);
                in_ptr->pop_head(vl);
                out_ptr->push(std::move(pkt));
                // the freed input-queue head may unblock another output
                if (SwitchInputPort::Queued* next = in_ptr->head_ready(vl))
                    try_output(next->out_port);
            });
            granted_any = true;
            break;
        }
    }
}

void HostSink::on_packet_tail(const Packet& pkt) {
    // ideal consumer: free the receive buffer immediately
    upstream_->return_credits(pkt.vl, pkt.blocks());
    net_.deliver_packet(pkt);
}

}  // namespace detail

Network::Network(Engine& engine, const Topology& topo, const RoutingTable& routing,
                 const LinkParams& link_params, const HostParams& host_params, std::uint64_t seed)
    : engine_(engine), topo_(topo), routing_(routing), link_params_(link_params),
      host_params_(host_params) {
    link_params_.validate();
    host_params_.validate();
    const int max_pkt_blocks = blocks_for_bytes(host_params_.mtu_bytes + host_params_.header_bytes);
    if (max_pkt_blocks > link_params_.buffer_blocks_per_vl)
        throw ConfigError("a full packet does not fit in the per-VL receive buffer");
    if (max_pkt_blocks > link_params_.out_buffer_blocks_per_vl)
        throw ConfigError("a full packet does not fit in the per-VL output buffer");

    const int num_vls = link_params_.num_vls;
    for (int h = 0; h < topo_.num_hosts(); ++h) {
        host_egress_.push_back(std::make_unique<detail::HostEgressPort>(
            *this, link_params_, topo_.host_names[h], h, num_vls, topo_.num_hosts(),
            link_params_.buffer_blocks_per_vl));
        host_sink_.push_back(std::make_unique<detail::HostSink>(*this, h));
        host_rng_.push_back(Rng::for_component(seed, "host/" + topo_.host_names[h]));
    }
    for (int s = 0; s < topo_.num_switches(); ++s)
        switches_.push_back(std::make_unique<detail::SwitchModel>(
            *this, link_params_, s, topo_.switches[s].name, topo_.switches[s].num_ports));

    for (const auto& l : topo_.links) {
        auto wire_up = [&](const Endpoint& from, const Endpoint& to) {
            if (from.kind == NodeKind::Host) {
                auto& egress = *host_egress_[from.id];
                if (to.kind == NodeKind::Host) {
                    egress.set_peer(host_sink_[to.id].get());
                    host_sink_[to.id]->set_upstream(&egress);
                } else {
                    auto& in = *switches_[to.id]->inputs[to.port];
                    egress.set_peer(&in);
                    in.set_upstream(&egress);
                }
            } else {
                auto& out = *switches_[from.id]->outputs[from.port];
                if (to.kind == NodeKind::Host) {
                    out.set_peer(host_sink_[to.id].get());
                    host_sink_[to.id]->set_upstream(&out);
                } else {
                    auto& in = *switches_[to.id]->inputs[to.port];
                    out.set_peer(&in);
                    in.set_upstream(&out);
                }
            }
        };
        wire_up(l.a, l.b);
        wire_up(l.b, l.a);
    }
    rx_series_.assign(topo_.num_hosts(), {});
}

std::int64_t Network::wire_bytes_for(std::int64_t message_size) const {
    const std::int64_t packets =
        (message_size + host_params_.mtu_bytes - 1) / host_params_.mtu_bytes;
    return message_size + packets * host_params_.header_bytes;
}

void Network::post_message(int src, int dest, std::int64_t size, int vl, std::uint64_t tag,
                           bool count_goodput) {
    if (size < 1) throw ConfigError("message size must be >= 1");
    if (vl < 0 || vl >= link_params_.num_vls) throw ConfigError("message VL out of range");
    if (dest < 0 || dest >= num_hosts()) throw RoutingError("message to unknown host");

    Message msg;
    msg.id = next_msg_id_++;
    msg.src = src;
    msg.dest = dest;
    msg.size = size;
    msg.vl = static_cast<std::uint8_t>(vl);
    msg.tag = tag;
    msg.count_goodput = count_goodput;
    msg.posted_at = engine_.now();
    ++messages_posted_;

    const SimTime stack = host_params_.stack_latency.sample(host_rng_[src]);

    // self-addressed messages also pass through the egress engine (a host has
    // one injection pipeline) but their packets bypass wire and credits
    if (src != dest) posted_wire_bytes_ += wire_bytes_for(size);
    InFlightMessage rec;
    rec.msg = msg;
    rec.packets_total =
        static_cast<std::uint32_t>((size + host_params_.mtu_bytes - 1) / host_params_.mtu_bytes);
    in_flight_.emplace(msg.id, std::move(rec));

    const std::uint64_t id = msg.id;
    const int src_host = src;
    engine_.schedule_in(stack, [this, id, src_host] {
        auto it = in_flight_.find(id);
        if (it == in_flight_.end()) throw ModelError("message vanished before injection");
        host_egress_[src_host]->enqueue(it->second.msg);
    });
}

void Network::deliver_packet(const Packet& pkt) {
    auto it = in_flight_.find(pkt.msg_id);
    if (it == in_flight_.end()) throw ModelError("packet for unknown message");
    InFlightMessage& rec = it->second;
    if (pkt.seq != rec.packets_received)
        throw ModelError("out-of-order or duplicate packet within a message");
    ++rec.packets_received;
    if (rec.msg.count_goodput) count_rx(pkt.dest, pkt.payload_bytes, engine_.now());
    if (rec.packets_received == rec.packets_total) {
        Message msg = rec.msg;
        in_flight_.erase(it);
        msg.completed_at = engine_.now();
        ++messages_completed_;
        if (on_delivered_) on_delivered_(msg);
    }
}

void Network::message_consumed(std::uint64_t msg_id) {
    if (!on_consumed_) return;
    auto it = in_flight_.find(msg_id);
    if (it != in_flight_.end()) on_consumed_(it->second.msg);
}

void Network::set_injection_gate(int host, bool open) {
    host_egress_[host]->set_gate_open(open);
}

void Network::set_sampling(SimTime interval, SimTime warmup) {
    if (interval.ps <= 0) throw ConfigError("sampling interval must be > 0");
    sampling_interval_ = interval;
    warmup_ = warmup;
}

void Network::count_rx(int host, std::int64_t payload_bytes, SimTime at) {
    auto& series = rx_series_[host];
    const std::size_t bin = static_cast<std::size_t>(at.ps / sampling_interval_.ps);
    if (series.size() <= bin) series.resize(bin + 1, 0);
    series[bin] += payload_bytes;
}

CounterSet Network::collect_counters(SimTime end_of_run) {
    CounterSet cs;
    cs.sampling_interval = sampling_interval_;
    for (auto& e : host_egress_) {
        e->finalize(end_of_run);
        cs.ports.push_back({"host", e->owner_name, 0, e->counters()});
        cs.host_egress_bytes += e->counters().bytes_tx;
    }
    for (auto& sw : switches_) {
        for (std::size_t p = 0; p < sw->outputs.size(); ++p) {
            sw->outputs[p]->finalize(end_of_run);
            PortCounters pc = sw->outputs[p]->counters();
            // a SwitchPort row combines its tx counters with the input-buffer
            // occupancy peak of the same physical port
            for (int vl = 0; vl < link_params_.num_vls; ++vl)
                pc.max_occupancy_blocks[vl] =
                    std::max(pc.max_occupancy_blocks[vl], sw->inputs[p]->max_occupancy[vl]);
            cs.ports.push_back({"switch", sw->name, static_cast<int>(p), pc});
        }
    }
    // measurement window is [warmup, end_of_run): bins delivered during the
    // drain tail stay in the series but not in the aggregate
    const std::size_t warm_bin =
        static_cast<std::size_t>(warmup_.ps / sampling_interval_.ps);
    const std::size_t end_bin =
        static_cast<std::size_t>(end_of_run.ps / sampling_interval_.ps);
    cs.xmit_wait_tick = link_params_.xmit_wait_tick;
    cs.goodput_bytes_per_host.assign(num_hosts(), 0);
    for (int h = 0; h < num_hosts(); ++h) {
        const std::size_t stop = std::min(rx_series_[h].size(), end_bin);
        for (std::size_t b = warm_bin; b < stop; ++b)
            cs.goodput_bytes_per_host[h] += rx_series_[h][b];
    }
    cs.goodput_series = rx_series_;
    cs.messages_posted = messages_posted_;
    cs.messages_completed = messages_completed_;
    cs.posted_wire_bytes = posted_wire_bytes_;
    return cs;
}

bool Network::drained() const {
    if (messages_completed_ != messages_posted_) return false;
    for (const auto& e : host_egress_)
        if (!e->queues_empty() || !e->idle()) return false;
    for (const auto& sw : switches_) {
        for (const auto& in : sw->inputs)
            if (!in->empty()) return false;
        for (const auto& out : sw->outputs)
            if (!out->empty() || !out->idle()) return false;
    }
    return true;
}

void Network::audit() const {
    auto check = [&](const detail::OutputPort& port, const detail::SwitchInputPort* peer_in) {
        if (!port.credits().conserved())
            throw ModelError("credit conservation violated at " + port.owner_name);
        if (peer_in) {
            for (int vl = 0; vl < link_params_.num_vls; ++vl)
                if (port.credits().occupancy(vl) != peer_in->occupancy(vl))
                    throw ModelError("sender occupancy model diverges from receiver buffer at " +
                                     port.owner_name);
        }
    };
    for (const auto& e : host_egress_) check(*e, e->peer_as_switch_input());
    for (const auto& sw : switches_)
        for (const auto& out : sw->outputs) check(*out, out->peer_as_switch_input());
}

}  // namespace ibsim
