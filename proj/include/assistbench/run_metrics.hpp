#pragma once

#include "assistbench/energy_metrics.hpp"
#include "assistbench/replay_planner.hpp"
#include "assistbench/run_log.hpp"

namespace assistbench::energy {

struct MetricOptions {
    SaturationThresholds thresholds;
    double carbon_intensity_g_per_kwh = kDefaultCarbonIntensity;
};

// Metrics of one run, computed only over the overlap window: requests fired
// inside it and energy integrated across it. Throws Error(EmptyOverlap) when
// the window is empty.
SimulationMetrics restrict_to_overlap(const replay::RawRunLog& log, const plan::OverlapWindow& overlap,
                                      const MetricOptions& options = {});

// Nearest-rank percentile, p in (0, 100]. NaN for an empty input.
double percentile(std::vector<double> values, double p);

}  // namespace assistbench::energy
