#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "ibsim/experiment.hpp"

using namespace ibsim;
namespace fs = std::filesystem;

namespace {

ScenarioConfig parse(const std::string& text) { return load_scenario(text); }

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    REQUIRE(in);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("direct-pair shifter saturates at payload efficiency times line rate") {
    ScenarioConfig cfg = parse(R"({
        "topology": {"kind": "direct_pair"},
        "injector": {"kind": "fixed_shifter", "chunk_bytes": 1048576, "message_bytes": 1048576},
        "duration_ms": 2
    })");
    RunReport rep = run_scenario(cfg);
    CHECK(rep.drained);
    // MTU/(MTU+header) * 100 Gb/s = 4096/4126 * 100 = 99.27...
    const double expect = 100.0 * 4096.0 / 4126.0;
    CHECK(rep.mean_goodput_gbps() == doctest::Approx(expect).epsilon(0.01));
    CHECK(rep.max_goodput_gbps() <= 100.0);  // never above line rate
}

TEST_CASE("run_scenario with per-event audit enabled") {
    // congestion on a star: 4 hosts all pulling through one switch
    ScenarioConfig cfg = parse(R"({
        "topology": {"kind": "star", "hosts": 4},
        "routing": {"kind": "generic"},
        "injector": {"kind": "daqpipe", "credits": 2, "parallel_sends": 2,
                     "fragment_size": {"kind": "fixed", "bytes": 65536}},
        "duration_ms": 1
    })");
    RunReport rep = run_scenario(cfg, /*audit_every_event=*/true);
    CHECK(rep.drained);
    CHECK(rep.counters.messages_posted == rep.counters.messages_completed);
    CHECK(rep.counters.host_egress_bytes == rep.counters.posted_wire_bytes);
}

TEST_CASE("report files are written and structured") {
    fs::path dir = fs::temp_directory_path() / "ibsim_test_report";
    fs::remove_all(dir);
    ScenarioConfig cfg = parse(R"({
        "topology": {"kind": "direct_pair"},
        "injector": {"kind": "fixed_shifter", "message_bytes": 262144},
        "duration_ms": 1
    })");
    RunReport rep = run_scenario(cfg);
    write_report_files(rep, dir.string());
    for (const char* f : {"report.csv", "ports.csv", "events.csv", "summary.txt", "config.echo.json"})
        CHECK(fs::exists(dir / f));
    CHECK(slurp(dir / "report.csv").starts_with("interval_start_us,host,payload_bytes"));
    CHECK(slurp(dir / "ports.csv").starts_with("node_kind,node,port,xmit_wait_ticks"));
    // the echo is the effective config: it must parse back
    CHECK_NOTHROW(load_scenario(slurp(dir / "config.echo.json")));
    fs::remove_all(dir);
}

TEST_CASE("identical configs give byte-identical reports") {
    ScenarioConfig cfg = parse(R"({
        "topology": {"kind": "star", "hosts": 5},
        "routing": {"kind": "generic"},
        "injector": {"kind": "daqpipe", "credits": 2, "parallel_sends": 4,
                     "fragment_size": {"kind": "lognormal", "mu_ln_bytes": 11.0, "sigma": 0.5}},
        "host": {"stack_latency": {"kind": "shifted_lognormal", "shift_ns": 600,
                                   "mu_ln_ns": 5.52, "sigma": 0.5}},
        "duration_ms": 1, "seed": 9
    })");
    RunReport a = run_scenario(cfg);
    RunReport b = run_scenario(cfg);
    CHECK(a.counters.goodput_bytes_per_host == b.counters.goodput_bytes_per_host);
    REQUIRE(a.events.size() == b.events.size());
    for (std::size_t i = 0; i < a.events.size(); ++i)
        CHECK(a.events[i].completed_at == b.events[i].completed_at);
}

TEST_CASE("sweep derives independent per-cell seeds: order does not matter") {
    ScenarioConfig base = parse(R"({
        "topology": {"kind": "star", "hosts": 4},
        "routing": {"kind": "generic"},
        "injector": {"kind": "daqpipe",
                     "fragment_size": {"kind": "lognormal", "mu_ln_bytes": 10.0, "sigma": 0.5}},
        "duration_ms": 1
    })");
    SweepResult grid = sweep(base, {1, 2}, {1, 2});
    REQUIRE(grid.cells.size() == 4);
    SweepResult single = sweep(base, {2}, {2});
    REQUIRE(single.cells.size() == 1);
    // the (2,2) cell is the same run regardless of which grid contains it
    CHECK(grid.cells[3].credits == 2);
    CHECK(grid.cells[3].parallel_sends == 2);
    CHECK(grid.cells[3].goodput_gbps == single.cells[0].goodput_gbps);
}

TEST_CASE("sweep file is a gnuplot matrix") {
    SweepResult r;
    r.cells = {{1, 1, 10.0, false, ""}, {1, 2, 20.0, false, ""}};
    fs::path path = fs::temp_directory_path() / "ibsim_test_sweep.dat";
    write_sweep_file(r, path.string());
    std::string text = slurp(path);
    CHECK(text.find("# credits parallel_sends goodput_gbps") != std::string::npos);
    CHECK(text.find("1 1 10") != std::string::npos);
    fs::remove(path);
}

TEST_CASE("buffer estimation tracks the configured buffer size") {
    // probe scenario: congested star; the largest burst host1 can land
    // without XmitWait, corrected by the drain share, estimates the buffer
    ScenarioConfig cfg = parse(R"({"link": {"buffer_blocks_per_vl": 1024}})");
    BufferEstimate est = estimate_buffer(cfg);
    CHECK(est.converged);
    const double configured = 1024 * 64;  // bytes
    CHECK(est.estimated_bytes > configured * 0.875 - 1);  // within 2 MTU
    CHECK(est.estimated_bytes < configured * 1.125 + 1);
    CHECK(est.largest_clean_burst > 0);
    CHECK(!est.probes.empty());
}

TEST_CASE("verify_routing counts conflict-free phases") {
    ScenarioConfig clean = parse(R"({
        "topology": {"kind": "fat_tree", "spines": 2, "leaves": 4, "hosts_per_leaf": 2}
    })");
    RoutingVerification v = verify_routing(clean);
    CHECK(v.phases_checked == 8);
    CHECK(v.conflicting_phases == 0);
    CHECK(v.conflicts.empty());

    ScenarioConfig oversub = parse(R"({
        "topology": {"kind": "fat_tree", "spines": 2, "leaves": 2, "hosts_per_leaf": 8},
        "routing": {"kind": "generic"}
    })");
    RoutingVerification w = verify_routing(oversub);
    CHECK(w.phases_checked == 16);
    CHECK(w.conflicting_phases > 0);
}

TEST_CASE("latency histogram file covers the distribution") {
    fs::path path = fs::temp_directory_path() / "ibsim_test_hist.dat";
    write_latency_histogram(LatencyDistribution::shifted_lognormal(600_ns, 5.52, 0.5), 1, 10000, 32,
                            path.string());
    std::string text = slurp(path);
    CHECK(text.find("# bin_start_ns bin_end_ns count") != std::string::npos);
    // shifted lognormal: nothing below the shift
    std::istringstream in(text);
    std::string line;
    std::getline(in, line);  // header
    double lo, hi;
    long count, total = 0;
    while (in >> lo >> hi >> count) {
        CHECK(lo >= 600.0);
        total += count;
    }
    CHECK(total == 10000);
    fs::remove(path);
}
