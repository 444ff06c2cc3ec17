#pragma once

#include <cstdint>
#include <compare>

namespace ibsim {

// Simulation time in integer picoseconds. A 64-byte flit at 100 Gb/s
// serializes in exactly 5120 ps, so every quantity the model needs is an
// exact integer and runs are bit-reproducible.
struct SimTime {
    std::int64_t ps = 0;

    constexpr auto operator<=>(const SimTime&) const = default;

    constexpr SimTime operator+(SimTime o) const { return {ps + o.ps}; }
    constexpr SimTime operator-(SimTime o) const { return {ps - o.ps}; }
    constexpr SimTime& operator+=(SimTime o) { ps += o.ps; return *this; }

    constexpr SimTime operator*(std::int64_t k) const { return {ps * k}; }
    constexpr std::int64_t operator/(SimTime o) const { return ps / o.ps; }
    constexpr SimTime operator%(SimTime o) const { return {ps % o.ps}; }
};

constexpr SimTime operator""_ps(unsigned long long v) { return {static_cast<std::int64_t>(v)}; }
constexpr SimTime operator""_ns(unsigned long long v) { return {static_cast<std::int64_t>(v) * 1000}; }
constexpr SimTime operator""_us(unsigned long long v) { return {static_cast<std::int64_t>(v) * 1000000}; }
constexpr SimTime operator""_ms(unsigned long long v) { return {static_cast<std::int64_t>(v) * 1000000000}; }

constexpr SimTime picoseconds(std::int64_t v) { return {v}; }
constexpr SimTime nanoseconds(std::int64_t v) { return {v * 1000}; }
constexpr SimTime microseconds(std::int64_t v) { return {v * 1000000}; }
constexpr SimTime milliseconds(std::int64_t v) { return {v * 1000000000}; }

}  // namespace ibsim
