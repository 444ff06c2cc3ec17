#pragma once

#include <cstdint>
#include <functional>
#include <queue>
#include <stdexcept>
#include <utility>
#include <vector>

#include "ibsim/time.hpp"

namespace ibsim {

// Deterministic discrete-event engine. Events fire in (time, insertion
// sequence) order; same-time events therefore fire in the order they were
// scheduled.
class Engine {
public:
    using Callback = std::function<void()>;

    SimTime now() const { return now_; }

    void schedule(SimTime fire_at, Callback cb) {
        if (fire_at < now_) throw std::logic_error("event scheduled in the past");
        queue_.push(Event{fire_at, seq_++, std::move(cb)});
    }

    void schedule_in(SimTime delay, Callback cb) { schedule(now_ + delay, std::move(cb)); }

    // Process all events with fire_at <= end. Returns the number of events
    // processed. now() ends at min(end, time of last event).
    std::uint64_t run_until(SimTime end) {
        std::uint64_t processed = 0;
        while (!queue_.empty() && queue_.top().fire_at <= end) {
            Event ev = std::move(const_cast<Event&>(queue_.top()));
            queue_.pop();
            now_ = ev.fire_at;
            ev.cb();
            ++processed;
            if (post_event_hook_) post_event_hook_();
        }
        return processed;
    }

    bool empty() const { return queue_.empty(); }

    // Debug hook, run after every event (used by the conservation audit).
    void set_post_event_hook(Callback hook) { post_event_hook_ = std::move(hook); }

private:
    struct Event {
        SimTime fire_at;
        std::uint64_t seq;
        Callback cb;
        bool operator>(const Event& o) const {
            if (fire_at != o.fire_at) return o.fire_at < fire_at;
            return seq > o.seq;
        }
    };

    std::priority_queue<Event, std::vector<Event>, std::greater<>> queue_;
    std::uint64_t seq_ = 0;
    SimTime now_{0};
    Callback post_event_hook_;
};

}  // namespace ibsim
