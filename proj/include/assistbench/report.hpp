#pragma once

#include "assistbench/energy_metrics.hpp"
#include "assistbench/sweep.hpp"

#include <string>
#include <vector>

namespace assistbench::report {

struct Scenario {
    std::string name;  // e.g. "small-team/frugal"
    SimulationConfig config;
};

// Small team (5), medium team (20) and distributed service, each with a
// frugal and a performance objective.
std::vector<Scenario> reference_scenarios();

struct ScenarioColumn {
    std::string name;
    energy::SimulationMetrics metrics;
};

inline constexpr int kScenarioRows = 11;

// One row per metric, one column per scenario:
// developers, model, quantization, GPUs, streaming, manual trigger,
// latency, server power, energy per 1000 requests, energy per developer-hour
// and CO2 per developer-hour.
std::string scenario_table_csv(const std::vector<ScenarioColumn>& columns);

// developers on the x axis, one series per remaining configuration.
std::string curves_csv(const std::vector<energy::SimulationMetrics>& aggregated);

struct ReportOutput {
    std::vector<energy::SimulationMetrics> aggregated;
    std::string metrics_csv;
    std::string scenario_csv;
    std::string impact_csv;
    std::string curves_csv;
    std::vector<std::string> diagnostics;
};

// Throws Error(NoData) when the store holds no complete run. Scenario
// columns are the reference scenarios present in the store, or every
// configuration when none of them is.
ReportOutput build_report(const sweep::SweepStore& store, const energy::SaturationThresholds& thresholds = {});
ReportOutput build_report(const std::vector<energy::SimulationMetrics>& runs,
                          const energy::SaturationThresholds& thresholds = {});

}  // namespace assistbench::report
