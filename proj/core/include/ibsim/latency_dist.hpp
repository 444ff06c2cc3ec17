#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ibsim/rng.hpp"
#include "ibsim/time.hpp"

namespace ibsim {

// Stack/PCIe latency model: a fixed value, an empirical histogram loaded
// from CSV, or a shifted lognormal stand-in for the measured distribution.
class LatencyDistribution {
public:
    enum class Kind { Deterministic, Histogram, ShiftedLognormal };

    struct Bin {
        double start_ns;
        double end_ns;  // half-open [start, end)
        double weight;
    };

    static LatencyDistribution deterministic(SimTime value);
    static LatencyDistribution histogram(std::vector<Bin> bins);
    // CSV rows: bin_start_ns,bin_end_ns,weight
    static LatencyDistribution histogram_from_csv(const std::string& path);
    static LatencyDistribution shifted_lognormal(SimTime shift, double mu_ln_ns, double sigma);

    Kind kind() const { return kind_; }
    SimTime sample(Rng& rng) const;

private:
    LatencyDistribution() = default;

    Kind kind_ = Kind::Deterministic;
    SimTime value_{0};
    std::vector<Bin> bins_;
    std::vector<double> cumulative_;
    SimTime shift_{0};
    double mu_ = 0.0;
    double sigma_ = 0.0;
};

}  // namespace ibsim
