#include "assistbench/run_metrics.hpp"

#include "assistbench/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace assistbench::energy {

double percentile(std::vector<double> values, double p) {
    if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(values.begin(), values.end());
    const auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * static_cast<double>(values.size())));
    return values[std::clamp<std::size_t>(rank, 1, values.size()) - 1];
}

SimulationMetrics restrict_to_overlap(const replay::RawRunLog& log, const plan::OverlapWindow& overlap,
                                      const MetricOptions& options) {
    if (overlap.empty())
        throw Error(ErrorKind::EmptyOverlap,
                    "overlap window [" + std::to_string(overlap.start) + ", " + std::to_string(overlap.end) +
                            "] ms is empty; inspect the plan schedule, the sessions never run in parallel");

    SimulationMetrics m;
    m.config = log.config;
    std::vector<double> latencies;
    for (const auto& r : log.records) {
        if (r.fire_offset_ms < static_cast<double>(overlap.start) || r.fire_offset_ms > static_cast<double>(overlap.end))
            continue;
        ++m.request_count;
        switch (r.status) {
            case replay::RequestStatus::Completed:
                ++m.completed_count;
                if (auto l = r.latency_ms()) latencies.push_back(*l / 1000.0);
                break;
            case replay::RequestStatus::Canceled: ++m.canceled_count; break;
            case replay::RequestStatus::RejectedByServer: ++m.rejected_count; break;
            case replay::RequestStatus::TimedOut: ++m.timed_out_count; break;
            case replay::RequestStatus::TransportError: break;
        }
    }
    if (latencies.empty()) {
        m.mean_latency_s = std::numeric_limits<double>::quiet_NaN();
    } else {
        double sum = 0.0;
        for (double l : latencies) sum += l;
        m.mean_latency_s = sum / static_cast<double>(latencies.size());
    }
    m.p95_latency_s = percentile(latencies, 95.0);
    m.rejected_fraction = m.request_count ? static_cast<double>(m.rejected_count) / m.request_count : 0.0;

    const TimeWindow window{static_cast<double>(overlap.start), static_cast<double>(overlap.end)};
    apply_energy(m, integrate(log.samples, window, log.config.developers), options.carbon_intensity_g_per_kwh);
    m.round_count = 1;
    m.saturated = is_saturated(m, options.thresholds);
    return m;
}

}  // namespace assistbench::energy
