#pragma once

#include <cstdint>
#include <vector>

#include "ibsim/errors.hpp"
#include "ibsim/time.hpp"

namespace ibsim {

// InfiniBand flow-control block: credits are granted and consumed in units
// of 64 bytes.
inline constexpr std::int64_t kFlitBytes = 64;

struct LinkParams {
    // effective data rate after encoding (EDR)
    std::int64_t data_rate_bps = 100'000'000'000;
    SimTime propagation_delay = 170_ns;
    int num_vls = 4;
    // 64 KiB per port per VL
    int buffer_blocks_per_vl = 1024;
    // switch output staging buffer, per VL
    int out_buffer_blocks_per_vl = 130;
    SimTime crossbar_delay = 100_ns;
    bool cut_through = false;
    SimTime xmit_wait_tick = 1_ns;

    void validate() const {
        if (data_rate_bps <= 0) throw ConfigError("link.data_rate must be > 0");
        if (num_vls < 1 || num_vls > 15) throw ConfigError("link.num_vls must be in [1, 15]");
        if (buffer_blocks_per_vl < 1) throw ConfigError("link.buffer_blocks_per_vl must be >= 1");
        if (out_buffer_blocks_per_vl < 1) throw ConfigError("link.out_buffer_blocks_per_vl must be >= 1");
        if (propagation_delay.ps < 0 || crossbar_delay.ps < 0) throw ConfigError("link delays must be >= 0");
        if (xmit_wait_tick.ps <= 0) throw ConfigError("link.xmit_wait_tick must be > 0");
    }
};

// Time to put `bytes` on the wire: ceil(bytes * 8 / data_rate), in ps.
inline SimTime serialization_time(std::int64_t bytes, const LinkParams& p) {
    // bytes * 8 bits / (bps) seconds -> ps
    __int128 num = static_cast<__int128>(bytes) * 8 * 1'000'000'000'000LL;
    return SimTime{static_cast<std::int64_t>((num + p.data_rate_bps - 1) / p.data_rate_bps)};
}

inline int blocks_for_bytes(std::int64_t bytes) {
    return static_cast<int>((bytes + kFlitBytes - 1) / kFlitBytes);
}

// One wire packet: a fragment of a message, at most MTU payload plus the
// fixed header overhead. Its flit train traverses each link contiguously;
// flits are accounted implicitly via blocks().
struct Packet {
    std::uint64_t msg_id = 0;
    std::uint32_t seq = 0;       // index within the message
    bool last = false;           // tail packet of the message
    std::int32_t src = -1;       // host ids
    std::int32_t dest = -1;
    std::uint8_t vl = 0;
    std::uint32_t payload_bytes = 0;
    std::uint32_t wire_bytes = 0;  // payload + header

    int blocks() const { return blocks_for_bytes(wire_bytes); }
};

// Sender-side view of the receiver's buffer, plus the bookkeeping the
// conservation audit walks. Per VL:
//   free + data_in_flight + receiver_occupancy + credit_in_transit == capacity
class CreditState {
public:
    CreditState() = default;
    CreditState(int num_vls, int capacity_blocks)
        : capacity_(capacity_blocks), free_(num_vls, capacity_blocks),
          in_flight_(num_vls, 0), occupancy_(num_vls, 0), credit_transit_(num_vls, 0) {}

    int capacity() const { return capacity_; }
    int free_blocks(int vl) const { return free_[vl]; }
    int occupancy(int vl) const { return occupancy_[vl]; }

    // transmit start: consume credits, blocks go onto the wire
    void consume(int vl, int blocks) {
        if (blocks > free_[vl]) throw ModelError("credit underflow: sent without credits");
        free_[vl] -= blocks;
        in_flight_[vl] += blocks;
    }

    // tail arrival at the receiver
    void arrive(int vl, int blocks) {
        if (blocks > in_flight_[vl]) throw ModelError("arrival of blocks never sent");
        in_flight_[vl] -= blocks;
        occupancy_[vl] += blocks;
        if (occupancy_[vl] > capacity_) throw ModelError("receiver buffer overflow");
    }

    // receiver freed blocks; the credit update is now travelling back
    void release(int vl, int blocks) {
        if (blocks > occupancy_[vl]) throw ModelError("credit over-release");
        occupancy_[vl] -= blocks;
        credit_transit_[vl] += blocks;
    }

    // credit update reached the sender
    void grant(int vl, int blocks) {
        if (blocks > credit_transit_[vl]) throw ModelError("credit grant never released");
        credit_transit_[vl] -= blocks;
        free_[vl] += blocks;
        if (free_[vl] > capacity_) throw ModelError("credit over-return past capacity");
    }

    bool conserved() const {
        for (std::size_t vl = 0; vl < free_.size(); ++vl)
            if (free_[vl] + in_flight_[vl] + occupancy_[vl] + credit_transit_[vl] != capacity_)
                return false;
        return true;
    }

private:
    int capacity_ = 0;
    std::vector<int> free_, in_flight_, occupancy_, credit_transit_;
};

}  // namespace ibsim
