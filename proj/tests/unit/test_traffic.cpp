#include <doctest.h>

#include <set>
#include <vector>

#include "ibsim/traffic.hpp"

using namespace ibsim;

namespace {

// tag layout used by the injectors: kind | ru << 3 | event << 19
enum TagKind { kTagShift = 0, kTagRequest = 1, kTagFragment = 2, kTagEmNotify = 3, kTagEmAssign = 4 };
int tag_kind(std::uint64_t tag) { return static_cast<int>(tag & 0x7); }
std::uint64_t tag_event(std::uint64_t tag) { return tag >> 19; }

struct Sim {
    Engine eng;
    Topology topo;
    RoutingTable routing;
    LinkParams link;
    HostParams host;
    std::unique_ptr<Network> net;

    explicit Sim(int hosts) : topo(make_star(hosts)), routing(compute_generic_routing(topo)) {
        net = std::make_unique<Network>(eng, topo, routing, link, host, 1);
    }
};

double goodput_gbps(const CounterSet& cs, int host, SimTime dur) {
    return static_cast<double>(cs.goodput_bytes_per_host[host]) * 8.0 * 1e12 / 1e9 /
           static_cast<double>(dur.ps);
}

}  // namespace

TEST_CASE("config validation") {
    ShifterConfig sc;
    CHECK_NOTHROW(sc.validate());
    sc.kind = ShifterConfig::Kind::TimeWindow;
    sc.grace = sc.window;  // grace must be < window
    CHECK_THROWS_AS(sc.validate(), ConfigError);

    DaqpipeConfig dc;
    CHECK_NOTHROW(dc.validate());
    dc.credits = 0;
    CHECK_THROWS_AS(dc.validate(), ConfigError);
    dc = DaqpipeConfig{};
    dc.parallel_sends = 0;
    CHECK_THROWS_AS(dc.validate(), ConfigError);
}

TEST_CASE("fragment size distributions") {
    Rng rng(11);
    FragmentSizeDist fixed;
    fixed.kind = FragmentSizeDist::Kind::Fixed;
    fixed.fixed_bytes = 777;
    for (int i = 0; i < 10; ++i) CHECK(fixed.sample(rng) == 777);

    FragmentSizeDist uni;
    uni.kind = FragmentSizeDist::Kind::Uniform;
    uni.uniform_min = 100;
    uni.uniform_max = 200;
    std::set<std::int64_t> seen;
    for (int i = 0; i < 5000; ++i) {
        auto v = uni.sample(rng);
        CHECK(v >= 100);
        CHECK(v <= 200);
        seen.insert(v);
    }
    CHECK(seen.size() == 101);  // every value hit

    FragmentSizeDist ln;
    ln.kind = FragmentSizeDist::Kind::Lognormal;
    ln.log_mu = 11.658;
    ln.log_sigma = 0.5;
    double sum = 0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        auto v = ln.sample(rng);
        CHECK(v >= 1);
        sum += static_cast<double>(v);
    }
    CHECK(sum / n == doctest::Approx(std::exp(11.658 + 0.125)).epsilon(0.03));
}

TEST_CASE("fixed-size shifter advances phase after chunk_bytes per node") {
    Sim sim(3);
    ShifterConfig cfg;
    cfg.kind = ShifterConfig::Kind::FixedSize;
    cfg.message_bytes = 4096;
    cfg.chunk_bytes = 8192;  // two messages per phase
    FixedSizeShifter inj(cfg);
    std::vector<std::pair<int, int>> consumed;  // (src, dest)
    inj.start(*sim.net, 1_ms);
    sim.net->set_consumed_handler([&](const Message& m) {
        consumed.emplace_back(m.src, m.dest);
        inj.on_consumed(m);
    });
    sim.eng.run_until(1_ms);
    // phases rotate destinations; after many chunks each node has targeted
    // every destination equally often (the egress interleaves consumption
    // across per-destination work queues, so only the counts are stable)
    int node0_by_dest[3] = {};
    for (auto [s, d] : consumed)
        if (s == 0) ++node0_by_dest[d];
    int lo = std::min({node0_by_dest[0], node0_by_dest[1], node0_by_dest[2]});
    int hi = std::max({node0_by_dest[0], node0_by_dest[1], node0_by_dest[2]});
    CHECK(lo > 0);
    CHECK(hi - lo <= 2);  // at most one chunk of skew
    // per-destination streams arrive in chunk multiples: chunk = 2 messages
    CHECK(node0_by_dest[1] % 2 <= 1);
}

TEST_CASE("time-window shifter follows the global phase and stops at the gate") {
    Sim sim(3);
    ShifterConfig cfg;
    cfg.kind = ShifterConfig::Kind::TimeWindow;
    cfg.window = 50_us;
    cfg.grace = 10_us;
    cfg.message_bytes = 65536;
    TimeWindowShifter inj(cfg);
    std::vector<std::pair<SimTime, int>> consumed;  // node 1: (when, dest)
    inj.start(*sim.net, 300_us);
    sim.net->set_consumed_handler([&](const Message& m) {
        if (m.src == 1) consumed.emplace_back(sim.net->engine().now(), m.dest);
        inj.on_consumed(m);
    });
    sim.eng.run_until(400_us);
    REQUIRE(!consumed.empty());
    for (auto [when, dest] : consumed) {
        // a message posted late in window n can start serializing at the top
        // of window n+1, so the destination matches the current or previous
        // phase — never an older one
        const int phase = static_cast<int>(when / cfg.window);
        const bool current = dest == (1 + phase) % 3;
        const bool previous = phase > 0 && dest == (1 + phase - 1) % 3;
        CHECK((current || previous));
    }
}

TEST_CASE("time-window grace reduces goodput by about grace/window") {
    auto run = [](SimTime grace) {
        Sim sim(3);
        ShifterConfig cfg;
        cfg.kind = ShifterConfig::Kind::TimeWindow;
        cfg.window = 100_us;
        cfg.grace = grace;
        cfg.message_bytes = 1 << 20;
        TimeWindowShifter inj(cfg);
        sim.net->set_sampling(100_us, SimTime{0});
        inj.start(*sim.net, 2_ms);
        sim.eng.run_until(3_ms);
        CounterSet cs = sim.net->collect_counters(2_ms);
        return goodput_gbps(cs, 0, 2_ms);
    };
    const double full = run(SimTime{0});
    const double cut = run(10_us);
    CHECK(cut < full * 0.92);
    CHECK(cut > full * 0.80);
}

TEST_CASE("daqpipe pulls fragments in barrel order starting after the BU") {
    // N=4, BU 1, P=2: requests go to RUs 2, 3; then 0; own fragment is local
    Sim sim(4);
    DaqpipeConfig cfg;
    cfg.credits = 1;
    cfg.parallel_sends = 2;
    cfg.pull = true;
    cfg.fragment_size.kind = FragmentSizeDist::Kind::Fixed;
    cfg.fragment_size.fixed_bytes = 4096;
    cfg.events_total = 2;  // event 0 -> BU 0, event 1 -> BU 1
    DaqpipeInjector inj(cfg, 1);
    inj.start(*sim.net, 10_ms);
    std::vector<int> request_dests;  // requests issued by BU 1
    sim.net->set_delivery_handler([&](const Message& m) {
        if (tag_kind(m.tag) == kTagRequest && m.src == 1) request_dests.push_back(m.dest);
        inj.on_delivered(m);
    });
    sim.eng.run_until(10_ms);
    CHECK(request_dests == std::vector<int>{2, 3, 0});
    REQUIRE(inj.event_records().size() == 2);
    CHECK(inj.event_records()[1].bu == 1);
}

TEST_CASE("parallel_sends=1 delivers fragments strictly in barrel order") {
    Sim sim(4);
    DaqpipeConfig cfg;
    cfg.credits = 1;
    cfg.parallel_sends = 1;
    cfg.fragment_size.kind = FragmentSizeDist::Kind::Fixed;
    cfg.fragment_size.fixed_bytes = 8192;
    cfg.events_total = 1;  // BU 0: barrel order 1, 2, 3
    DaqpipeInjector inj(cfg, 1);
    inj.start(*sim.net, 10_ms);
    std::vector<int> frag_srcs;
    sim.net->set_delivery_handler([&](const Message& m) {
        if (tag_kind(m.tag) == kTagFragment) frag_srcs.push_back(m.src);
        inj.on_delivered(m);
    });
    sim.eng.run_until(10_ms);
    CHECK(frag_srcs == std::vector<int>{1, 2, 3});
}

TEST_CASE("event manager honors the per-BU credit limit") {
    Sim sim(4);
    DaqpipeConfig cfg;
    cfg.credits = 2;
    cfg.parallel_sends = 4;
    cfg.fragment_size.kind = FragmentSizeDist::Kind::Fixed;
    cfg.fragment_size.fixed_bytes = 1 << 16;
    DaqpipeInjector inj(cfg, 1);
    inj.start(*sim.net, 500_us);
    bool bounded = true;
    sim.net->set_delivery_handler([&](const Message& m) {
        inj.on_delivered(m);
        for (int bu = 0; bu < 4; ++bu) bounded &= inj.incomplete_events(bu) <= cfg.credits;
    });
    sim.eng.run_until(1_ms);
    CHECK(bounded);
    CHECK(!inj.event_records().empty());
}

TEST_CASE("push mode skips the request round trip") {
    auto completion = [&](bool pull) {
        Sim sim(4);
        DaqpipeConfig cfg;
        cfg.credits = 1;
        cfg.parallel_sends = 4;
        cfg.pull = pull;
        cfg.fragment_size.kind = FragmentSizeDist::Kind::Fixed;
        cfg.fragment_size.fixed_bytes = 4096;
        cfg.events_total = 1;
        DaqpipeInjector inj(cfg, 1);
        inj.start(*sim.net, 10_ms);
        sim.eng.run_until(10_ms);
        REQUIRE(inj.event_records().size() == 1);
        return inj.event_records()[0].completed_at - inj.event_records()[0].assigned_at;
    };
    CHECK(completion(false) < completion(true));
}

TEST_CASE("em control messages add a round trip but the same events complete") {
    Sim sim(4);
    DaqpipeConfig cfg;
    cfg.credits = 2;
    cfg.parallel_sends = 2;
    cfg.em_control_messages = true;
    cfg.em_host = 0;
    cfg.fragment_size.kind = FragmentSizeDist::Kind::Fixed;
    cfg.fragment_size.fixed_bytes = 4096;
    cfg.events_total = 8;
    DaqpipeInjector inj(cfg, 1);
    inj.start(*sim.net, 10_ms);
    sim.eng.run_until(20_ms);
    CHECK(inj.event_records().size() == 8);
    // events went round-robin over the 4 BUs
    std::set<int> bus;
    for (const auto& r : inj.event_records()) bus.insert(r.bu);
    CHECK(bus.size() == 4);
}

TEST_CASE("daqpipe runs are reproducible for a fixed seed") {
    auto run = [](std::uint64_t seed) {
        Sim sim(6);
        DaqpipeConfig cfg;
        cfg.credits = 2;
        cfg.parallel_sends = 2;
        cfg.fragment_size.kind = FragmentSizeDist::Kind::Lognormal;
        cfg.fragment_size.log_mu = 10.0;
        cfg.fragment_size.log_sigma = 0.5;
        DaqpipeInjector inj(cfg, seed);
        inj.start(*sim.net, 1_ms);
        sim.eng.run_until(2_ms);
        std::vector<std::int64_t> times;
        for (const auto& r : inj.event_records()) times.push_back(r.completed_at.ps);
        return times;
    };
    auto a = run(7), b = run(7), c = run(8);
    CHECK(a == b);
    CHECK(a != c);
}
