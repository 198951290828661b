#include "assistbench/energy_metrics.hpp"

#include "assistbench/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <sstream>
#include <tuple>

namespace assistbench::energy {

std::string_view to_string(PowerSource source) {
    switch (source) {
        case PowerSource::CpuEnergyCounter: return "cpu-energy-counter";
        case PowerSource::GpuManagementPoll: return "gpu-management-poll";
        case PowerSource::Simulated: return "simulated";
    }
    return "simulated";
}

PowerSource parse_power_source(std::string_view text) {
    if (text == "cpu-energy-counter") return PowerSource::CpuEnergyCounter;
    if (text == "gpu-management-poll") return PowerSource::GpuManagementPoll;
    if (text == "simulated") return PowerSource::Simulated;
    throw Error(ErrorKind::InvalidArgument, "unknown power source: " + std::string(text));
}

EnergyReport integrate(std::span<const PowerSample> samples, TimeWindow window, int developer_count) {
    if (!(window.end_ms > window.start_ms))
        throw Error(ErrorKind::EmptyWindow, "integration window has no length");
    if (developer_count < 1) throw Error(ErrorKind::InvalidArgument, "developer_count must be >= 1");

    std::map<PowerSource, std::vector<const PowerSample*>> by_source;
    for (const auto& s : samples) {
        if (!(s.watts >= 0.0)) throw Error(ErrorKind::InvalidArgument, "negative power sample");
        auto& series = by_source[s.source];
        if (!series.empty() && s.timestamp_ms < series.back()->timestamp_ms)
            throw Error(ErrorKind::InvalidArgument,
                        "power samples of source " + std::string(to_string(s.source)) + " are not time-ordered");
        series.push_back(&s);
    }

    constexpr double inf = std::numeric_limits<double>::infinity();
    double watt_ms = 0.0;
    bool covered = false;
    for (const auto& [source, series] : by_source) {
        if (series.front()->timestamp_ms > window.end_ms) continue;
        covered = true;
        for (std::size_t i = 0; i < series.size(); ++i) {
            const double from = std::max(i == 0 ? -inf : series[i]->timestamp_ms, window.start_ms);
            const double to = std::min(i + 1 < series.size() ? series[i + 1]->timestamp_ms : inf, window.end_ms);
            if (to > from) watt_ms += series[i]->watts * (to - from);
        }
    }
    if (!covered) throw Error(ErrorKind::EmptyWindow, "no power samples in the integration window");

    EnergyReport report;
    report.window = window;
    report.developer_count = developer_count;
    report.energy_wh = watt_ms / 3'600'000.0;
    report.mean_power_w = watt_ms / window.length_ms();
    report.per_developer_energy_wh = report.energy_wh / developer_count;
    return report;
}

double co2(double energy_wh, double intensity_g_per_kwh) {
    if (intensity_g_per_kwh < 0.0) throw Error(ErrorKind::InvalidArgument, "carbon intensity must be >= 0");
    if (energy_wh < 0.0) throw Error(ErrorKind::InvalidArgument, "energy must be >= 0");
    return energy_wh / 1000.0 * intensity_g_per_kwh;
}

bool is_saturated(const SimulationMetrics& metrics, const SaturationThresholds& thresholds) {
    return metrics.rejected_fraction > thresholds.max_rejected_fraction ||
           metrics.mean_latency_s > thresholds.max_mean_latency_s;
}

void apply_energy(SimulationMetrics& metrics, const EnergyReport& report, double intensity_g_per_kwh) {
    metrics.window_ms = report.window.length_ms();
    metrics.mean_power_w = report.mean_power_w;
    metrics.energy_wh = report.energy_wh;
    metrics.energy_per_hour_per_developer_wh = report.mean_power_w / report.developer_count;
    metrics.energy_per_1000_requests_wh = metrics.request_count > 0
                                                  ? report.energy_wh / metrics.request_count * 1000.0
                                                  : std::numeric_limits<double>::quiet_NaN();
    metrics.co2_per_hour_per_developer_g = co2(metrics.energy_per_hour_per_developer_wh, intensity_g_per_kwh);
}

namespace {

    double mean_of(std::span<const SimulationMetrics> rounds, double SimulationMetrics::*field) {
        double sum = 0.0;
        int n = 0;
        for (const auto& r : rounds) {
            const double v = r.*field;
            if (std::isnan(v)) continue;
            sum += v;
            ++n;
        }
        return n ? sum / n : std::numeric_limits<double>::quiet_NaN();
    }

}  // namespace

SimulationMetrics average_rounds(std::span<const SimulationMetrics> rounds, const SaturationThresholds& thresholds) {
    if (rounds.empty()) throw Error(ErrorKind::NoData, "no rounds to average");
    SimulationMetrics out;
    out.config = rounds.front().config;
    for (const auto& r : rounds) {
        if (r.config != out.config) throw Error(ErrorKind::InvalidArgument, "rounds of different configurations");
        out.request_count += r.request_count;
        out.completed_count += r.completed_count;
        out.canceled_count += r.canceled_count;
        out.rejected_count += r.rejected_count;
        out.timed_out_count += r.timed_out_count;
    }
    out.mean_latency_s = mean_of(rounds, &SimulationMetrics::mean_latency_s);
    out.p95_latency_s = mean_of(rounds, &SimulationMetrics::p95_latency_s);
    out.rejected_fraction = mean_of(rounds, &SimulationMetrics::rejected_fraction);
    out.window_ms = mean_of(rounds, &SimulationMetrics::window_ms);
    out.mean_power_w = mean_of(rounds, &SimulationMetrics::mean_power_w);
    out.energy_wh = mean_of(rounds, &SimulationMetrics::energy_wh);
    out.energy_per_hour_per_developer_wh = mean_of(rounds, &SimulationMetrics::energy_per_hour_per_developer_wh);
    out.energy_per_1000_requests_wh = mean_of(rounds, &SimulationMetrics::energy_per_1000_requests_wh);
    out.co2_per_hour_per_developer_g = mean_of(rounds, &SimulationMetrics::co2_per_hour_per_developer_g);
    out.round_count = static_cast<int>(rounds.size());
    out.saturated = is_saturated(out, thresholds);
    return out;
}

std::string_view to_string(ImpactMetric metric) {
    return metric == ImpactMetric::Energy ? "energy" : "latency";
}

namespace {

    double metric_value(const SimulationMetrics& m, ImpactMetric metric) {
        return metric == ImpactMetric::Energy ? m.energy_per_hour_per_developer_wh : m.mean_latency_s;
    }

    bool usable(double v) { return std::isfinite(v) && v > 0.0; }

}  // namespace

std::vector<ImpactRatio> impact_ratios(std::span<const SimulationMetrics> results,
                                       std::vector<std::string>* diagnostics) {
    using GroupKey = std::tuple<int, std::string, std::string, int>;
    std::map<GroupKey, std::vector<ConfigPair>> groups;
    auto note = [&](std::string msg) {
        if (diagnostics) diagnostics->push_back(std::move(msg));
    };

    std::vector<std::string> keys;
    keys.reserve(results.size());
    for (const auto& r : results) keys.push_back(config_key(r.config));

    for (std::size_t i = 0; i < results.size(); ++i) {
        for (std::size_t j = i + 1; j < results.size(); ++j) {
            int differing = 0;
            Factor factor = Factor::Developers;
            for (Factor f : kAllFactors) {
                if (factor_value(results[i].config, f) != factor_value(results[j].config, f)) {
                    ++differing;
                    factor = f;
                }
            }
            if (differing == 0) {
                note("identical configurations " + keys[i] + " passed twice; pair ignored");
                continue;
            }
            if (differing != 1) continue;
            const std::string vi = factor_value(results[i].config, factor);
            const std::string vj = factor_value(results[j].config, factor);
            for (ImpactMetric metric : {ImpactMetric::Energy, ImpactMetric::Latency}) {
                const double a = metric_value(results[i], metric);
                const double b = metric_value(results[j], metric);
                if (!usable(a) || !usable(b)) continue;
                const int m = static_cast<int>(metric);
                const int f = static_cast<int>(factor);
                groups[{f, vi, vj, m}].push_back({keys[i], keys[j], b / a});
                groups[{f, vj, vi, m}].push_back({keys[j], keys[i], a / b});
            }
        }
    }
    if (groups.empty()) note("no pair of configurations differs in exactly one factor");

    std::vector<ImpactRatio> out;
    out.reserve(groups.size());
    for (auto& [key, pairs] : groups) {
        std::sort(pairs.begin(), pairs.end(), [](const ConfigPair& x, const ConfigPair& y) {
            return std::tie(x.from_key, x.to_key) < std::tie(y.from_key, y.to_key);
        });
        ImpactRatio ratio;
        ratio.factor = static_cast<Factor>(std::get<0>(key));
        ratio.from_option = std::get<1>(key);
        ratio.to_option = std::get<2>(key);
        ratio.metric = static_cast<ImpactMetric>(std::get<3>(key));
        const bool uniform = std::all_of(pairs.begin(), pairs.end(),
                                         [&](const ConfigPair& p) { return p.ratio == pairs.front().ratio; });
        if (uniform) {
            ratio.ratio = pairs.front().ratio;
        } else {
            double log_sum = 0.0;
            for (const auto& p : pairs) log_sum += std::log(p.ratio);
            ratio.ratio = std::exp(log_sum / static_cast<double>(pairs.size()));
        }
        ratio.pairs = std::move(pairs);
        out.push_back(std::move(ratio));
    }
    return out;
}

double stability(std::span<const double> mean_powers) {
    if (mean_powers.size() < 2) throw Error(ErrorKind::InvalidArgument, "stability needs at least two replicates");
    double mean = 0.0;
    for (double v : mean_powers) mean += v;
    mean /= static_cast<double>(mean_powers.size());
    if (mean == 0.0) throw Error(ErrorKind::InvalidArgument, "stability undefined for zero mean power");
    double var = 0.0;
    for (double v : mean_powers) var += (v - mean) * (v - mean);
    var /= static_cast<double>(mean_powers.size());
    return std::sqrt(var) / mean;
}

namespace {

    nlohmann::json number_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(); }

    double number_or_nan(const nlohmann::json& j, const char* key) {
        if (!j.contains(key) || j[key].is_null()) return std::numeric_limits<double>::quiet_NaN();
        return j[key].get<double>();
    }

}  // namespace

nlohmann::json metrics_to_json(const SimulationMetrics& m) {
    nlohmann::json j;
    j["schema_version"] = 1;
    j["config"] = m.config;
    j["config_key"] = config_key(m.config);
    j["mean_latency_s"] = number_or_null(m.mean_latency_s);
    j["p95_latency_s"] = number_or_null(m.p95_latency_s);
    j["rejected_fraction"] = number_or_null(m.rejected_fraction);
    j["request_count"] = m.request_count;
    j["completed_count"] = m.completed_count;
    j["canceled_count"] = m.canceled_count;
    j["rejected_count"] = m.rejected_count;
    j["timed_out_count"] = m.timed_out_count;
    j["window_ms"] = m.window_ms;
    j["mean_power_w"] = number_or_null(m.mean_power_w);
    j["energy_wh"] = number_or_null(m.energy_wh);
    j["energy_per_hour_per_developer_wh"] = number_or_null(m.energy_per_hour_per_developer_wh);
    j["energy_per_1000_requests_wh"] = number_or_null(m.energy_per_1000_requests_wh);
    j["co2_per_hour_per_developer_g"] = number_or_null(m.co2_per_hour_per_developer_g);
    j["saturated"] = m.saturated;
    j["round_count"] = m.round_count;
    return j;
}

SimulationMetrics metrics_from_json(const nlohmann::json& j) {
    SimulationMetrics m;
    m.config = j.at("config").get<SimulationConfig>();
    m.mean_latency_s = number_or_nan(j, "mean_latency_s");
    m.p95_latency_s = number_or_nan(j, "p95_latency_s");
    m.rejected_fraction = number_or_nan(j, "rejected_fraction");
    m.request_count = j.value("request_count", 0);
    m.completed_count = j.value("completed_count", 0);
    m.canceled_count = j.value("canceled_count", 0);
    m.rejected_count = j.value("rejected_count", 0);
    m.timed_out_count = j.value("timed_out_count", 0);
    m.window_ms = j.value("window_ms", 0.0);
    m.mean_power_w = number_or_nan(j, "mean_power_w");
    m.energy_wh = number_or_nan(j, "energy_wh");
    m.energy_per_hour_per_developer_wh = number_or_nan(j, "energy_per_hour_per_developer_wh");
    m.energy_per_1000_requests_wh = number_or_nan(j, "energy_per_1000_requests_wh");
    m.co2_per_hour_per_developer_g = number_or_nan(j, "co2_per_hour_per_developer_g");
    m.saturated = j.value("saturated", false);
    m.round_count = j.value("round_count", 1);
    return m;
}

std::string samples_csv(std::span<const PowerSample> samples) {
    std::string out = "timestamp_ms,watts,source\n";
    char buf[96];
    for (const auto& s : samples) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,", s.timestamp_ms, s.watts);
        out += buf;
        out += to_string(s.source);
        out += '\n';
    }
    return out;
}

std::vector<PowerSample> samples_from_csv(std::string_view csv) {
    std::vector<PowerSample> out;
    std::istringstream in{std::string(csv)};
    std::string line;
    bool header = true;
    while (std::getline(in, line)) {
        if (header) {
            header = false;
            continue;
        }
        if (line.empty()) continue;
        const auto c1 = line.find(',');
        const auto c2 = line.find(',', c1 + 1);
        if (c1 == std::string::npos || c2 == std::string::npos)
            throw Error(ErrorKind::InvalidArgument, "malformed sample row: " + line);
        out.push_back({std::stod(line.substr(0, c1)), std::stod(line.substr(c1 + 1, c2 - c1 - 1)),
                       parse_power_source(line.substr(c2 + 1))});
    }
    return out;
}

std::string metrics_csv_header() {
    return "config_key,developers,streaming,trigger,model,quantization,max_concurrent_requests,gpu_count,"
           "round_count,request_count,completed_count,canceled_count,rejected_count,timed_out_count,"
           "mean_latency_s,p95_latency_s,rejected_fraction,mean_power_w,energy_wh,"
           "energy_per_hour_per_developer_wh,energy_per_1000_requests_wh,co2_per_hour_per_developer_g,saturated";
}

std::string metrics_csv_row(const SimulationMetrics& m) {
    const auto& c = m.config;
    char buf[512];
    std::snprintf(buf, sizeof buf, "%s,%d,%s,%s,%s,%s,%d,%d,%d,%d,%d,%d,%d,%d,%.6g,%.6g,%.6g,%.6g,%.6g,%.6g,%.6g,%.6g,%s",
                  config_key(c).c_str(), c.developers, std::string(to_string(c.streaming)).c_str(),
                  std::string(to_string(c.trigger)).c_str(), c.model_profile.c_str(), c.quantization_tag.c_str(),
                  c.max_concurrent_requests, c.gpu_count, m.round_count, m.request_count, m.completed_count,
                  m.canceled_count, m.rejected_count, m.timed_out_count, m.mean_latency_s, m.p95_latency_s,
                  m.rejected_fraction, m.mean_power_w, m.energy_wh, m.energy_per_hour_per_developer_wh,
                  m.energy_per_1000_requests_wh, m.co2_per_hour_per_developer_g, m.saturated ? "true" : "false");
    return buf;
}

std::string impact_csv(std::span<const ImpactRatio> ratios) {
    std::string out = "factor,from,to,metric,ratio,pair_count\n";
    char buf[64];
    for (const auto& r : ratios) {
        out += std::string(to_string(r.factor)) + "," + r.from_option + "," + r.to_option + "," +
               std::string(to_string(r.metric)) + ",";
        std::snprintf(buf, sizeof buf, "%.9g,%zu\n", r.ratio, r.pairs.size());
        out += buf;
    }
    return out;
}

}  // namespace assistbench::energy
