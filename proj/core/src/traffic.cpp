#include "ibsim/traffic.hpp"

#include <algorithm>
#include <cmath>

namespace ibsim {

namespace {

enum MsgKind : std::uint64_t {
    kShift = 0,
    kRequest = 1,
    kFragment = 2,
    kEmNotify = 3,
    kEmAssign = 4,
};

std::uint64_t make_tag(MsgKind kind, std::uint64_t event_id, int ru) {
    return static_cast<std::uint64_t>(kind) | (static_cast<std::uint64_t>(ru) << 3) |
           (event_id << 19);
}
MsgKind tag_kind(std::uint64_t tag) { return static_cast<MsgKind>(tag & 0x7); }
int tag_ru(std::uint64_t tag) { return static_cast<int>((tag >> 3) & 0xffff); }
std::uint64_t tag_event(std::uint64_t tag) { return tag >> 19; }

// work-queue depth per node: one message ahead hides the stack latency
constexpr int kShifterPipeline = 2;

}  // namespace

FixedSizeShifter::FixedSizeShifter(const ShifterConfig& cfg) : cfg_(cfg) { cfg_.validate(); }

void FixedSizeShifter::start(Network& net, SimTime stop_at) {
    net_ = &net;
    stop_at_ = stop_at;
    nodes_.assign(net.num_hosts(), {});
    net.set_consumed_handler([this](const Message& m) { on_consumed(m); });
    for (int i = 0; i < net.num_hosts(); ++i) try_post(i);
}

void FixedSizeShifter::try_post(int node) {
    NodeState& st = nodes_[node];
    const int n = net_->num_hosts();
    while (st.outstanding < kShifterPipeline && net_->engine().now() < stop_at_) {
        const int dest = shifter_dest(node, st.phase, n);
        net_->post_message(node, dest, cfg_.message_bytes, cfg_.vl, make_tag(kShift, 0, 0));
        ++st.outstanding;
        st.posted_in_phase += cfg_.message_bytes;
        if (st.posted_in_phase >= cfg_.chunk_bytes) {
            ++st.phase;
            st.posted_in_phase = 0;
        }
    }
}

void FixedSizeShifter::on_consumed(const Message& msg) {
    --nodes_[msg.src].outstanding;
    try_post(msg.src);
}

TimeWindowShifter::TimeWindowShifter(const ShifterConfig& cfg) : cfg_(cfg) { cfg_.validate(); }

void TimeWindowShifter::start(Network& net, SimTime stop_at) {
    net_ = &net;
    stop_at_ = stop_at;
    nodes_.assign(net.num_hosts(), {});
    net.set_consumed_handler([this](const Message& m) { on_consumed(m); });
    net.engine().schedule(SimTime{0}, [this] { on_window_start(); });
}

bool TimeWindowShifter::in_send_region() const {
    return net_->engine().now() % cfg_.window < cfg_.window - cfg_.grace;
}

void TimeWindowShifter::on_window_start() {
    const SimTime now = net_->engine().now();
    for (int i = 0; i < net_->num_hosts(); ++i) net_->set_injection_gate(i, true);
    if (now >= stop_at_) return;  // keep gates open so the fabric drains
    for (int i = 0; i < net_->num_hosts(); ++i) {
        if (nodes_[i].deferred) nodes_[i].deferred = false;
        try_post(i);
    }
    if (cfg_.grace.ps > 0)
        net_->engine().schedule(now + cfg_.window - cfg_.grace, [this] {
            for (int i = 0; i < net_->num_hosts(); ++i) net_->set_injection_gate(i, false);
        });
    net_->engine().schedule(now + cfg_.window, [this] { on_window_start(); });
}

void TimeWindowShifter::try_post(int node) {
    NodeState& st = nodes_[node];
    const int n = net_->num_hosts();
    while (st.outstanding < kShifterPipeline && net_->engine().now() < stop_at_) {
        if (!in_send_region()) {
            st.deferred = true;
            return;
        }
        const int phase = static_cast<int>(net_->engine().now() / cfg_.window);
        net_->post_message(node, shifter_dest(node, phase, n), cfg_.message_bytes, cfg_.vl,
                           make_tag(kShift, 0, 0));
        ++st.outstanding;
    }
}

void TimeWindowShifter::on_consumed(const Message& msg) {
    --nodes_[msg.src].outstanding;
    try_post(msg.src);
}

void FragmentSizeDist::validate() const {
    switch (kind) {
        case Kind::Fixed:
            if (fixed_bytes < 1) throw ConfigError("fragment size must be >= 1");
            break;
        case Kind::Uniform:
            if (uniform_min < 1 || uniform_max < uniform_min)
                throw ConfigError("fragment size uniform range invalid");
            break;
        case Kind::Lognormal:
            if (log_sigma < 0) throw ConfigError("fragment size lognormal sigma must be >= 0");
            break;
    }
}

std::int64_t FragmentSizeDist::sample(Rng& rng) const {
    switch (kind) {
        case Kind::Fixed:
            return fixed_bytes;
        case Kind::Uniform:
            return uniform_min +
                   static_cast<std::int64_t>(rng.uniform_below(
                       static_cast<std::uint64_t>(uniform_max - uniform_min + 1)));
        case Kind::Lognormal: {
            double v = rng.lognormal(log_mu, log_sigma);
            return std::max<std::int64_t>(1, static_cast<std::int64_t>(std::llround(v)));
        }
    }
    return 1;
}

DaqpipeInjector::DaqpipeInjector(const DaqpipeConfig& cfg, std::uint64_t seed)
    : cfg_(cfg), rng_(Rng::for_component(seed, "traffic/daqpipe")) {
    cfg_.validate();
}

void DaqpipeInjector::start(Network& net, SimTime stop_at) {
    net_ = &net;
    stop_at_ = stop_at;
    num_nodes_ = net.num_hosts();
    bus_.assign(num_nodes_, {});
    net.set_delivery_handler([this](const Message& m) { on_delivered(m); });
    em_try_assign();
}

void DaqpipeInjector::em_try_assign() {
    while (net_->engine().now() < stop_at_ &&
           (cfg_.events_total == 0 || next_event_ < cfg_.events_total)) {
        int bu = -1;
        for (int k = 0; k < num_nodes_; ++k) {
            const int cand = (rr_bu_ + k) % num_nodes_;
            if (bus_[cand].incomplete < cfg_.credits) {
                bu = cand;
                break;
            }
        }
        if (bu < 0) return;  // all BUs saturated
        rr_bu_ = (bu + 1) % num_nodes_;
        const std::uint64_t id = next_event_++;
        ++bus_[bu].incomplete;
        if (cfg_.em_control_messages) {
            net_->post_message(cfg_.em_host, bu, 64, 1, make_tag(kEmAssign, id, 0), false);
        } else {
            begin_event(id, bu);
        }
    }
}

void DaqpipeInjector::begin_event(std::uint64_t event_id, int bu) {
    EventState ev;
    ev.id = event_id;
    ev.bu = bu;
    ev.assigned_at = net_->engine().now();
    ev.frag_sizes.reserve(num_nodes_);
    for (int ru = 0; ru < num_nodes_; ++ru) ev.frag_sizes.push_back(cfg_.fragment_size.sample(rng_));
    auto [it, inserted] = events_.emplace(event_id, std::move(ev));
    pump(it->second);
}

void DaqpipeInjector::pump(EventState& ev) {
    while (ev.outstanding < cfg_.parallel_sends && ev.next_frag < num_nodes_) {
        const int pos = ev.next_frag++;
        const int ru = (ev.bu + 1 + pos) % num_nodes_;
        if (ru == ev.bu) {
            // own fragment: zero-cost local copy
            ++ev.done;
            continue;
        }
        if (cfg_.pull) {
            net_->post_message(ev.bu, ru, cfg_.request_bytes, cfg_.request_vl,
                               make_tag(kRequest, ev.id, ru), false);
        } else {
            post_fragment(ev, ru);
        }
        ++ev.outstanding;
    }
    if (ev.done == num_nodes_) fragment_done(ev);
}

void DaqpipeInjector::post_fragment(EventState& ev, int ru) {
    net_->post_message(ru, ev.bu, ev.frag_sizes[ru], cfg_.vl, make_tag(kFragment, ev.id, ru));
}

// all fragments done: record, free the BU credit, let the EM assign more
void DaqpipeInjector::fragment_done(EventState& ev) {
    records_.push_back({ev.id, ev.bu, ev.assigned_at, net_->engine().now()});
    const int bu = ev.bu;
    const std::uint64_t id = ev.id;
    --bus_[bu].incomplete;
    events_.erase(id);
    if (cfg_.em_control_messages) {
        net_->post_message(bu, cfg_.em_host, 64, 1, make_tag(kEmNotify, id, 0), false);
    } else {
        em_try_assign();
    }
}

void DaqpipeInjector::on_delivered(const Message& msg) {
    switch (tag_kind(msg.tag)) {
        case kShift:
            break;
        case kRequest: {
            auto it = events_.find(tag_event(msg.tag));
            if (it == events_.end()) throw ModelError("request for unknown event");
            post_fragment(it->second, msg.dest);
            break;
        }
        case kFragment: {
            auto it = events_.find(tag_event(msg.tag));
            if (it == events_.end()) throw ModelError("fragment for unknown event");
            EventState& ev = it->second;
            --ev.outstanding;
            ++ev.done;
            if (ev.done > num_nodes_) throw ModelError("duplicate fragment delivery");
            pump(ev);
            break;
        }
        case kEmAssign:
            begin_event(tag_event(msg.tag), msg.dest);
            break;
        case kEmNotify:
            em_try_assign();
            break;
    }
}

}  // namespace ibsim
