#include "ibsim/latency_dist.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "ibsim/errors.hpp"

namespace ibsim {

LatencyDistribution LatencyDistribution::deterministic(SimTime value) {
    if (value.ps < 0) throw ConfigError("latency value must be >= 0");
    LatencyDistribution d;
    d.kind_ = Kind::Deterministic;
    d.value_ = value;
    return d;
}

LatencyDistribution LatencyDistribution::histogram(std::vector<Bin> bins) {
    if (bins.empty()) throw ConfigError("latency histogram has no bins");
    double total = 0.0;
    double prev_end = -1.0;
    for (const auto& b : bins) {
        if (b.start_ns < 0 || b.end_ns <= b.start_ns)
            throw ConfigError("latency histogram bins must be non-negative and half-open increasing");
        if (b.start_ns < prev_end) throw ConfigError("latency histogram bins must be strictly increasing");
        if (b.weight < 0) throw ConfigError("latency histogram weights must be non-negative");
        prev_end = b.end_ns;
        total += b.weight;
    }
    if (total <= 0) throw ConfigError("latency histogram weights sum to zero");
    LatencyDistribution d;
    d.kind_ = Kind::Histogram;
    d.bins_ = std::move(bins);
    d.cumulative_.reserve(d.bins_.size());
    double acc = 0.0;
    for (const auto& b : d.bins_) {
        acc += b.weight / total;
        d.cumulative_.push_back(acc);
    }
    d.cumulative_.back() = 1.0;
    return d;
}

LatencyDistribution LatencyDistribution::histogram_from_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open latency histogram: " + path);
    std::vector<Bin> bins;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream ss(line);
        Bin b{};
        if (!(ss >> b.start_ns >> b.end_ns >> b.weight))
            throw ConfigError(path + ":" + std::to_string(lineno) + ": expected bin_start_ns,bin_end_ns,weight");
        bins.push_back(b);
    }
    return histogram(std::move(bins));
}

LatencyDistribution LatencyDistribution::shifted_lognormal(SimTime shift, double mu_ln_ns, double sigma) {
    if (shift.ps < 0 || sigma < 0) throw ConfigError("shifted lognormal needs shift >= 0 and sigma >= 0");
    LatencyDistribution d;
    d.kind_ = Kind::ShiftedLognormal;
    d.shift_ = shift;
    d.mu_ = mu_ln_ns;
    d.sigma_ = sigma;
    return d;
}

SimTime LatencyDistribution::sample(Rng& rng) const {
    switch (kind_) {
        case Kind::Deterministic:
            return value_;
        case Kind::Histogram: {
            double u = rng.uniform();
            auto it = std::lower_bound(cumulative_.begin(), cumulative_.end(), u);
            std::size_t i = static_cast<std::size_t>(it - cumulative_.begin());
            if (i >= bins_.size()) i = bins_.size() - 1;
            const Bin& b = bins_[i];
            double ns = b.start_ns + rng.uniform() * (b.end_ns - b.start_ns);
            return SimTime{static_cast<std::int64_t>(ns * 1000.0)};
        }
        case Kind::ShiftedLognormal: {
            double ns = rng.lognormal(mu_, sigma_);
            return shift_ + SimTime{static_cast<std::int64_t>(ns * 1000.0)};
        }
    }
    return SimTime{0};
}

}  // namespace ibsim
