#include "ibsim/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "ibsim/engine.hpp"

namespace ibsim {

namespace {

double to_gbps(std::int64_t bytes, SimTime interval) {
    // bytes over interval -> Gb/s
    return interval.ps > 0 ? static_cast<double>(bytes) * 8.0 * 1000.0 / static_cast<double>(interval.ps)
                           : 0.0;
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    return out;
}

}  // namespace

double RunReport::goodput_gbps(int host) const {
    return to_gbps(counters.goodput_bytes_per_host[host], duration - warmup);
}

double RunReport::mean_goodput_gbps() const {
    double sum = 0.0;
    for (int h = 0; h < num_hosts; ++h) sum += goodput_gbps(h);
    return num_hosts > 0 ? sum / num_hosts : 0.0;
}

double RunReport::min_goodput_gbps() const {
    double m = num_hosts > 0 ? goodput_gbps(0) : 0.0;
    for (int h = 1; h < num_hosts; ++h) m = std::min(m, goodput_gbps(h));
    return m;
}

double RunReport::max_goodput_gbps() const {
    double m = num_hosts > 0 ? goodput_gbps(0) : 0.0;
    for (int h = 1; h < num_hosts; ++h) m = std::max(m, goodput_gbps(h));
    return m;
}

RunReport run_scenario(const ScenarioConfig& cfg, bool audit_every_event) {
    Engine engine;
    Topology topo = cfg.build_topology();
    RoutingTable routing = cfg.build_routing(topo);
    Network net(engine, topo, routing, cfg.link, cfg.host, cfg.seed);
    net.set_sampling(cfg.sampling_interval, cfg.warmup());
    if (audit_every_event) engine.set_post_event_hook([&net] { net.audit(); });

    auto injector = cfg.build_injector();
    injector->start(net, cfg.duration);
    engine.run_until(cfg.duration);

    // drain: injectors post nothing past the duration; cap the drain window
    const SimTime drain_cap = cfg.duration + std::max(cfg.duration, 10_ms);
    engine.run_until(drain_cap);

    RunReport report;
    report.drained = net.drained();
    report.counters = net.collect_counters(cfg.duration);
    report.events = injector->event_records();
    report.duration = cfg.duration;
    report.warmup = cfg.warmup();
    report.num_hosts = net.num_hosts();
    report.config_echo = echo_scenario(cfg);
    return report;
}

void write_report_files(const RunReport& report, const std::string& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);

    {
        auto out = open_out(out_dir + "/config.echo.json");
        out << report.config_echo;
    }
    {
        auto out = open_out(out_dir + "/report.csv");
        out << "interval_start_us,host,payload_bytes\n";
        const auto& series = report.counters.goodput_series;
        const std::int64_t interval = report.counters.sampling_interval.ps;
        const std::size_t bins = static_cast<std::size_t>(report.duration.ps / interval);
        for (std::size_t b = 0; b < bins; ++b) {
            for (std::size_t h = 0; h < series.size(); ++h) {
                const std::int64_t bytes = b < series[h].size() ? series[h][b] : 0;
                out << (static_cast<std::int64_t>(b) * interval / 1'000'000) << ',' << h << ','
                    << bytes << '\n';
            }
        }
    }
    {
        auto out = open_out(out_dir + "/ports.csv");
        out << "node_kind,node,port,xmit_wait_ticks,bytes_tx,packets_tx";
        std::size_t vls = 0;
        for (const auto& p : report.counters.ports)
            vls = std::max(vls, p.counters.max_occupancy_blocks.size());
        for (std::size_t v = 0; v < vls; ++v) out << ",max_occupancy_vl" << v;
        out << '\n';
        for (const auto& p : report.counters.ports) {
            out << p.node_kind << ',' << p.node_name << ',' << p.port << ','
                << p.counters.xmit_wait_ticks(report.counters.xmit_wait_tick) << ','
                << p.counters.bytes_tx << ',' << p.counters.packets_tx;
            for (std::size_t v = 0; v < vls; ++v)
                out << ',' << (v < p.counters.max_occupancy_blocks.size()
                                   ? p.counters.max_occupancy_blocks[v]
                                   : 0);
            out << '\n';
        }
    }
    {
        auto out = open_out(out_dir + "/events.csv");
        out << "event_id,bu,assigned_ps,completed_ps\n";
        for (const auto& e : report.events)
            out << e.event_id << ',' << e.bu << ',' << e.assigned_at.ps << ',' << e.completed_at.ps
                << '\n';
    }
    {
        auto out = open_out(out_dir + "/summary.txt");
        char buf[256];
        std::snprintf(buf, sizeof buf,
                      "goodput_per_node_gbps mean=%.6f min=%.6f max=%.6f\n",
                      report.mean_goodput_gbps(), report.min_goodput_gbps(),
                      report.max_goodput_gbps());
        out << buf;
        out << "hosts " << report.num_hosts << "\n";
        out << "messages_posted " << report.counters.messages_posted << "\n";
        out << "messages_completed " << report.counters.messages_completed << "\n";
        out << "drained " << (report.drained ? "yes" : "no") << "\n";
        const PortRecord* worst = nullptr;
        for (const auto& p : report.counters.ports)
            if (!worst || p.counters.xmit_wait_ps > worst->counters.xmit_wait_ps) worst = &p;
        if (worst) {
            out << "worst_congested_port " << worst->node_kind << ' ' << worst->node_name << " port "
                << worst->port << " xmit_wait_ticks "
                << worst->counters.xmit_wait_ticks(report.counters.xmit_wait_tick) << "\n";
        }
    }
}

SweepResult sweep(const ScenarioConfig& base, const std::vector<int>& credits,
                  const std::vector<int>& parallel_sends) {
    SweepResult result;
    for (int c : credits) {
        for (int p : parallel_sends) {
            SweepCell cell;
            cell.credits = c;
            cell.parallel_sends = p;
            ScenarioConfig cfg = base;
            cfg.injector_kind = ScenarioConfig::InjectorKind::Daqpipe;
            cfg.daqpipe.credits = c;
            cfg.daqpipe.parallel_sends = p;
            cfg.seed = base.seed ^ Rng::fnv1a("sweep/c=" + std::to_string(c) +
                                              "/p=" + std::to_string(p));
            try {
                RunReport r = run_scenario(cfg);
                cell.goodput_gbps = r.mean_goodput_gbps();
            } catch (const std::exception& e) {
                cell.failed = true;
                cell.error = e.what();
            }
            result.cells.push_back(std::move(cell));
        }
    }
    return result;
}

void write_sweep_file(const SweepResult& result, const std::string& path) {
    auto out = open_out(path);
    out << "# credits parallel_sends goodput_gbps\n";
    for (const auto& c : result.cells) {
        if (c.failed) {
            out << "# cell credits=" << c.credits << " parallel_sends=" << c.parallel_sends
                << " FAILED: " << c.error << '\n';
            continue;
        }
        char buf[128];
        std::snprintf(buf, sizeof buf, "%d %d %.6f\n", c.credits, c.parallel_sends, c.goodput_gbps);
        out << buf;
    }
}

namespace {

// host0 streams continuously to host2; host1 sends one burst.
class CongestionProbeInjector final : public Injector {
public:
    CongestionProbeInjector(std::int64_t burst_bytes, SimTime burst_at)
        : burst_bytes_(burst_bytes), burst_at_(burst_at) {}

    void start(Network& net, SimTime stop_at) override {
        net_ = &net;
        stop_at_ = stop_at;
        net.set_consumed_handler([this](const Message& m) { on_consumed(m); });
        post_stream();
        post_stream();
        net.engine().schedule(burst_at_, [this] { net_->post_message(1, 2, burst_bytes_, 0, 1); });
    }

    void on_consumed(const Message& msg) override {
        if (msg.src == 0 && net_->engine().now() < stop_at_) post_stream();
    }

private:
    void post_stream() { net_->post_message(0, 2, 1 << 20, 0, 0); }

    Network* net_ = nullptr;
    SimTime stop_at_{0};
    std::int64_t burst_bytes_;
    SimTime burst_at_;
};

// XmitWait on host1's uplink after one burst, fresh run per probe
std::int64_t probe_burst(const ScenarioConfig& cfg, std::int64_t burst_bytes) {
    Engine engine;
    Topology topo = make_star(3);
    RoutingTable routing = compute_generic_routing(topo);
    Network net(engine, topo, routing, cfg.link, cfg.host, cfg.seed);
    net.set_sampling(cfg.sampling_interval, SimTime{0});

    const SimTime burst_at = 50_us;
    // half-rate drain during the burst, then margin to settle
    const SimTime burst_span =
        serialization_time(net.wire_bytes_for(burst_bytes), cfg.link) * 2 + 100_us;
    const SimTime stop = burst_at + burst_span;
    CongestionProbeInjector injector(burst_bytes, burst_at);
    injector.start(net, stop);
    engine.run_until(stop);

    CounterSet cs = net.collect_counters(stop);
    return cs.ports[1].counters.xmit_wait_ticks(cfg.link.xmit_wait_tick);  // host1 egress
}

}  // namespace

BufferEstimate estimate_buffer(const ScenarioConfig& cfg) {
    BufferEstimate est;
    est.drain_share = 0.5;  // round-robin between two equal-packet streams

    const std::int64_t cap = std::int64_t{1} << 30;
    std::int64_t lo = 0, hi = 0;
    for (std::int64_t s = 16 * 1024; s <= cap; s *= 2) {
        std::int64_t wait = probe_burst(cfg, s);
        est.probes.push_back({s, wait});
        if (wait == 0) {
            lo = s;
        } else {
            hi = s;
            break;
        }
    }
    if (lo == 0 || hi == 0) return est;  // never clean or never congested: no estimate

    while (hi - lo > 1024) {
        const std::int64_t mid = lo + (hi - lo) / 2;
        std::int64_t wait = probe_burst(cfg, mid);
        est.probes.push_back({mid, wait});
        (wait == 0 ? lo : hi) = mid;
    }
    est.largest_clean_burst = lo;
    // the buffer holds wire bytes, so correct the payload burst for headers
    const std::int64_t wire =
        lo + (lo + cfg.host.mtu_bytes - 1) / cfg.host.mtu_bytes * cfg.host.header_bytes;
    est.estimated_bytes =
        static_cast<std::int64_t>(static_cast<double>(wire) * (1.0 - est.drain_share));
    est.converged = true;
    return est;
}

RoutingVerification verify_routing(const ScenarioConfig& cfg) {
    Topology topo = cfg.build_topology();
    RoutingTable routing = cfg.build_routing(topo);
    RoutingVerification v;
    ShiftPattern pattern{topo.num_hosts()};
    for (int phase = 0; phase < topo.num_hosts(); ++phase) {
        auto conflicts = verify_conflict_free(topo, routing, pattern, phase);
        ++v.phases_checked;
        if (!conflicts.empty()) ++v.conflicting_phases;
        for (auto& c : conflicts) v.conflicts.emplace_back(phase, std::move(c));
    }
    return v;
}

void write_latency_histogram(const LatencyDistribution& dist, std::uint64_t seed, int draws,
                             int bins, const std::string& path) {
    Rng rng(seed);
    std::vector<std::int64_t> samples(draws);
    for (auto& s : samples) s = dist.sample(rng).ps;
    auto [mn, mx] = std::minmax_element(samples.begin(), samples.end());
    const double lo = static_cast<double>(*mn), hi = static_cast<double>(*mx) + 1.0;
    const double width = (hi - lo) / bins;
    std::vector<std::int64_t> counts(bins, 0);
    for (auto s : samples) {
        int b = static_cast<int>((static_cast<double>(s) - lo) / width);
        counts[std::clamp(b, 0, bins - 1)]++;
    }
    auto out = open_out(path);
    out << "# bin_start_ns bin_end_ns count\n";
    for (int b = 0; b < bins; ++b) {
        char buf[128];
        std::snprintf(buf, sizeof buf, "%.3f %.3f %lld\n", (lo + b * width) / 1000.0,
                      (lo + (b + 1) * width) / 1000.0, static_cast<long long>(counts[b]));
        out << buf;
    }
}

}  // namespace ibsim
