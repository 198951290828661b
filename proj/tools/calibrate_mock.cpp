// Runs the reference scenarios and the developer curve on the virtual mock
// and prints them next to the measured reference values, to tune profiles.

#include "assistbench/mock_server.hpp"
#include "assistbench/report.hpp"
#include "assistbench/sweep.hpp"
#include "assistbench/synthetic_traces.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>

using namespace assistbench;

namespace {

    struct Reference {
        double latency_s;
        double power_w;
    };

    // Measured on 4xA100 in the same order as reference_scenarios().
    constexpr Reference kReference[] = {
            {6.4, 249.3}, {1.2, 633.1}, {7.7, 363.2}, {1.7, 898.8}, {16.5, 858.9}, {2.3, 1038.2},
    };

    energy::SimulationMetrics run_config(const SimulationConfig& cfg, const std::vector<trace::DeveloperSession>& sessions,
                                         const sweep::SweepOptions& options) {
        std::vector<energy::SimulationMetrics> rounds;
        const int n = plan::round_count(sessions, cfg, options.plan);
        for (int r = 0; r < n; ++r) rounds.push_back(sweep::execute_run({cfg, r, options.seed}, sessions, options).metrics);
        return energy::average_rounds(rounds);
    }

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Compare the virtual mock against reference measurements"};
    std::string profiles;
    std::uint64_t seed = 1;
    bool curve = true;
    bool dump = false;
    app.add_option("--profiles", profiles, "Profile catalog JSON (default: built-in)");
    app.add_option("--seed", seed, "Planner seed");
    app.add_flag("!--no-curve", curve, "Skip the developer curve");
    app.add_flag("--dump", dump, "Print the profile catalog as JSON and exit");
    CLI11_PARSE(app, argc, argv);

    sweep::SweepOptions options;
    options.seed = seed;
    if (!profiles.empty()) options.catalog = mock::load_catalog(profiles);
    if (dump) {
        std::printf("%s\n", mock::catalog_to_json(options.catalog).dump(2).c_str());
        return 0;
    }
    const auto sessions = trace::synthesize_sessions();

    std::printf("%-26s %9s %9s %9s %9s %8s\n", "scenario", "lat_s", "ref_lat", "power_w", "ref_pow", "pow_err");
    const auto scenarios = report::reference_scenarios();
    for (std::size_t i = 0; i < scenarios.size(); ++i) {
        const auto m = run_config(scenarios[i].config, sessions, options);
        std::printf("%-26s %9.2f %9.2f %9.1f %9.1f %+7.1f%%\n", scenarios[i].name.c_str(), m.mean_latency_s,
                    kReference[i].latency_s, m.mean_power_w, kReference[i].power_w,
                    100.0 * (m.mean_power_w / kReference[i].power_w - 1.0));
    }
    if (!curve) return 0;

    std::printf("\n%5s %10s %10s %10s %9s %s\n", "devs", "power_w", "wh/dev-h", "latency_s", "rejected", "saturated");
    SimulationConfig cfg{1, StreamingMode::NoStream, TriggerMode::ManualEmulated, "starcoder2-7b", "none", 1000, 4};
    for (int d : {1, 2, 5, 10, 20, 50, 75, 100, 150, 200}) {
        cfg.developers = d;
        const auto m = run_config(cfg, sessions, options);
        std::printf("%5d %10.1f %10.2f %10.2f %9.3f %s\n", d, m.mean_power_w, m.energy_per_hour_per_developer_wh,
                    m.mean_latency_s, m.rejected_fraction, m.saturated ? "yes" : "no");
    }
    return 0;
}
