#pragma once

#include <stdexcept>
#include <string>

namespace ibsim {

// Bad scenario/topology input; reported before any simulation work (exit 2).
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Routing hole or disconnected fabric; the fabric is lossless so a packet
// with nowhere to go fails the run (exit 3).
struct RoutingError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Internal invariant violation, e.g. a credit overflow (exit 4).
struct ModelError : std::logic_error {
    using std::logic_error::logic_error;
};

}  // namespace ibsim
