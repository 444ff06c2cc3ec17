#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ibsim/experiment.hpp"

namespace {

struct CommonOpts {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    std::optional<double> duration_ms;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("config", opts.config_path, "scenario config (JSON)")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--seed", opts.seed, "override the master seed");
    cmd->add_option("--out", opts.out_dir, "override the output directory");
    cmd->add_option("--duration", opts.duration_ms, "override the run duration (ms)");
}

ibsim::ScenarioConfig load_with_overrides(const CommonOpts& opts) {
    ibsim::ScenarioConfig cfg = ibsim::load_scenario_file(opts.config_path);
    if (opts.seed) cfg.seed = *opts.seed;
    if (opts.out_dir) cfg.out_dir = *opts.out_dir;
    if (opts.duration_ms) {
        if (*opts.duration_ms <= 0) throw ibsim::ConfigError("--duration must be > 0");
        cfg.duration = ibsim::SimTime{static_cast<std::int64_t>(*opts.duration_ms * 1e9)};
    }
    return cfg;
}

int cmd_run(const CommonOpts& opts, bool audit) {
    ibsim::ScenarioConfig cfg = load_with_overrides(opts);
    ibsim::RunReport report = ibsim::run_scenario(cfg, audit);
    ibsim::write_report_files(report, cfg.out_dir);
    std::printf("goodput_per_node_gbps mean=%.6f min=%.6f max=%.6f\n", report.mean_goodput_gbps(),
                report.min_goodput_gbps(), report.max_goodput_gbps());
    std::printf("messages %llu posted, %llu completed, drained %s\n",
                static_cast<unsigned long long>(report.counters.messages_posted),
                static_cast<unsigned long long>(report.counters.messages_completed),
                report.drained ? "yes" : "no");
    std::printf("results in %s\n", cfg.out_dir.c_str());
    return 0;
}

int cmd_sweep(const CommonOpts& opts, const std::vector<int>& credits,
              const std::vector<int>& parallel_sends) {
    ibsim::ScenarioConfig cfg = load_with_overrides(opts);
    ibsim::SweepResult result = ibsim::sweep(cfg, credits, parallel_sends);
    std::filesystem::create_directories(cfg.out_dir);
    ibsim::write_sweep_file(result, cfg.out_dir + "/sweep.dat");
    for (const auto& c : result.cells) {
        if (c.failed)
            std::printf("credits=%d parallel_sends=%d FAILED: %s\n", c.credits, c.parallel_sends,
                        c.error.c_str());
        else
            std::printf("credits=%d parallel_sends=%d goodput_gbps=%.6f\n", c.credits,
                        c.parallel_sends, c.goodput_gbps);
    }
    std::printf("results in %s/sweep.dat\n", cfg.out_dir.c_str());
    return 0;
}

int cmd_estimate_buffer(const CommonOpts& opts) {
    ibsim::ScenarioConfig cfg = load_with_overrides(opts);
    ibsim::BufferEstimate est = ibsim::estimate_buffer(cfg);
    for (const auto& p : est.probes)
        std::printf("probe burst_bytes=%lld xmit_wait_ticks=%lld\n",
                    static_cast<long long>(p.burst_bytes),
                    static_cast<long long>(p.xmit_wait_ticks));
    if (!est.converged) {
        std::printf("estimate did not converge\n");
        return 1;
    }
    std::printf("largest_clean_burst_bytes %lld\n", static_cast<long long>(est.largest_clean_burst));
    std::printf("drain_share %.2f\n", est.drain_share);
    std::printf("estimated_buffer_bytes %lld\n", static_cast<long long>(est.estimated_bytes));
    return 0;
}

int cmd_verify_routing(const CommonOpts& opts) {
    ibsim::ScenarioConfig cfg = load_with_overrides(opts);
    ibsim::RoutingVerification v = ibsim::verify_routing(cfg);
    for (const auto& [phase, c] : v.conflicts) {
        std::string srcs;
        for (int s : c.sources) srcs += (srcs.empty() ? "" : ",") + std::to_string(s);
        std::printf("conflict phase=%d switch=%d port=%d sources=%s\n", phase, c.switch_id, c.port,
                    srcs.c_str());
    }
    std::printf("%d/%d phases conflict-free\n", v.phases_checked - v.conflicting_phases,
                v.phases_checked);
    return v.conflicting_phases == 0 ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"flit-level fabric simulator for event-building traffic"};
    app.require_subcommand(1);

    CommonOpts run_opts;
    bool audit = false;
    CLI::App* run = app.add_subcommand("run", "run one scenario and write reports");
    add_common(run, run_opts);
    run->add_flag("--audit", audit, "run the credit-conservation audit after every event");

    CommonOpts sweep_opts;
    std::vector<int> credits{1, 2, 4, 8};
    std::vector<int> parallel_sends{1, 2, 4, 8};
    CLI::App* sw = app.add_subcommand("sweep", "grid of runs over credits x parallel sends");
    add_common(sw, sweep_opts);
    sw->add_option("--credits", credits, "credit values")->delimiter(',');
    sw->add_option("--parallel-sends", parallel_sends, "parallel-send values")->delimiter(',');

    CommonOpts est_opts;
    CLI::App* est = app.add_subcommand("estimate-buffer",
                                       "infer the switch buffer size from congestion probes");
    add_common(est, est_opts);

    CommonOpts ver_opts;
    CLI::App* ver = app.add_subcommand("verify-routing",
                                       "check every shift phase for link conflicts");
    add_common(ver, ver_opts);

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) return cmd_run(run_opts, audit);
        if (sw->parsed()) return cmd_sweep(sweep_opts, credits, parallel_sends);
        if (est->parsed()) return cmd_estimate_buffer(est_opts);
        if (ver->parsed()) return cmd_verify_routing(ver_opts);
    } catch (const ibsim::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const ibsim::RoutingError& e) {
        std::fprintf(stderr, "routing error: %s\n", e.what());
        return 3;
    } catch (const ibsim::ModelError& e) {
        std::fprintf(stderr, "internal invariant violation: %s\n", e.what());
        return 4;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
