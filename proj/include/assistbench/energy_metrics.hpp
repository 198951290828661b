#pragma once

// Power integration and the per-run / cross-run metrics built on it.

#include "assistbench/config.hpp"

#include <nlohmann/json.hpp>

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace assistbench::energy {

enum class PowerSource { CpuEnergyCounter, GpuManagementPoll, Simulated };

std::string_view to_string(PowerSource source);
PowerSource parse_power_source(std::string_view text);

struct PowerSample {
    double timestamp_ms = 0.0;
    double watts = 0.0;
    PowerSource source = PowerSource::Simulated;

    bool operator==(const PowerSample&) const = default;
};

struct TimeWindow {
    double start_ms = 0.0;
    double end_ms = 0.0;

    double length_ms() const { return end_ms - start_ms; }
    double length_hours() const { return length_ms() / 3'600'000.0; }
};

struct EnergyReport {
    TimeWindow window;
    double mean_power_w = 0.0;
    double energy_wh = 0.0;
    double per_developer_energy_wh = 0.0;
    int developer_count = 1;
};

// Left-rectangle integration: each sample's power holds until the next
// sample of the same source; the last one holds to the window end and the
// first one is extended back to the window start. Sources are summed.
// Throws Error(EmptyWindow) for a zero-length window or when no source has a
// sample at or before the window end.
EnergyReport integrate(std::span<const PowerSample> samples, TimeWindow window, int developer_count = 1);

inline constexpr double kDefaultCarbonIntensity = 56.0;  // g CO2 per kWh

// grams = energy_wh / 1000 * intensity
double co2(double energy_wh, double intensity_g_per_kwh = kDefaultCarbonIntensity);

struct SimulationMetrics {
    SimulationConfig config;
    double mean_latency_s = 0.0;  // completed requests only; NaN when none completed
    double p95_latency_s = 0.0;
    double rejected_fraction = 0.0;
    int request_count = 0;
    int completed_count = 0;
    int canceled_count = 0;
    int rejected_count = 0;
    int timed_out_count = 0;
    double window_ms = 0.0;
    double mean_power_w = 0.0;
    double energy_wh = 0.0;
    double energy_per_hour_per_developer_wh = 0.0;
    double energy_per_1000_requests_wh = 0.0;
    double co2_per_hour_per_developer_g = 0.0;
    bool saturated = false;
    int round_count = 1;
};

struct SaturationThresholds {
    double max_rejected_fraction = 0.10;
    double max_mean_latency_s = 20.0;
};

// Strictly greater than either threshold.
bool is_saturated(const SimulationMetrics& metrics, const SaturationThresholds& thresholds = {});

// Fills the energy-derived fields from an integrated window.
void apply_energy(SimulationMetrics& metrics, const EnergyReport& report,
                  double intensity_g_per_kwh = kDefaultCarbonIntensity);

// Arithmetic mean over the rounds of one configuration. Counts are summed,
// saturation is recomputed from the averaged values.
SimulationMetrics average_rounds(std::span<const SimulationMetrics> rounds,
                                 const SaturationThresholds& thresholds = {});

enum class ImpactMetric { Energy, Latency };
std::string_view to_string(ImpactMetric metric);

struct ConfigPair {
    std::string from_key;
    std::string to_key;
    double ratio = 0.0;
};

struct ImpactRatio {
    Factor factor = Factor::Developers;
    std::string from_option;
    std::string to_option;
    ImpactMetric metric = ImpactMetric::Energy;
    double ratio = 0.0;  // geometric mean of pairs[].ratio
    std::vector<ConfigPair> pairs;
};

// Every pair of results whose configs differ in exactly one factor yields a
// to/from ratio in both directions, for energy per hour per developer and
// mean latency. Ratios are grouped by (factor, from, to, metric). Pairs with
// a non-positive or non-finite metric are skipped. Problems are appended to
// `diagnostics` when given.
std::vector<ImpactRatio> impact_ratios(std::span<const SimulationMetrics> results,
                                       std::vector<std::string>* diagnostics = nullptr);

// Population standard deviation over mean. Needs two or more values.
double stability(std::span<const double> mean_powers);

nlohmann::json metrics_to_json(const SimulationMetrics& metrics);
SimulationMetrics metrics_from_json(const nlohmann::json& j);

std::string samples_csv(std::span<const PowerSample> samples);
std::vector<PowerSample> samples_from_csv(std::string_view csv);

std::string metrics_csv_header();
std::string metrics_csv_row(const SimulationMetrics& metrics);

// Long format: factor,from,to,metric,ratio,pair_count, one row per group.
std::string impact_csv(std::span<const ImpactRatio> ratios);

}  // namespace assistbench::energy
