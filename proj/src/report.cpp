#include "assistbench/report.hpp"

#include "assistbench/error.hpp"

#include <cmath>
#include <cstdio>
#include <map>

namespace assistbench::report {

std::vector<Scenario> reference_scenarios() {
    using S = StreamingMode;
    using T = TriggerMode;
    return {
            {"small-team/frugal", {5, S::NoStream, T::ManualEmulated, "starcoder2-7b", "none", 1000, 1}},
            {"small-team/performance", {5, S::StreamWithCancel, T::Automatic, "starcoder", "none", 1000, 4}},
            {"medium-team/frugal", {20, S::NoStream, T::ManualEmulated, "starcoder2-7b", "none", 1000, 1}},
            {"medium-team/performance", {20, S::StreamWithCancel, T::Automatic, "starcoder", "none", 1000, 4}},
            {"distributed/frugal", {75, S::NoStream, T::ManualEmulated, "starcoder2-7b", "eetq", 1000, 4}},
            {"distributed/performance", {50, S::StreamWithCancel, T::Automatic, "starcoder", "none", 1000, 4}},
    };
}

namespace {

    std::string fmt(double v, const char* pattern = "%.1f") {
        if (!std::isfinite(v)) return "";
        char buf[64];
        std::snprintf(buf, sizeof buf, pattern, v);
        return buf;
    }

    std::string csv_field(const std::string& s) {
        if (s.find_first_of(",\"\n") == std::string::npos) return s;
        std::string out = "\"";
        for (char c : s) {
            if (c == '"') out += '"';
            out += c;
        }
        return out + "\"";
    }

}  // namespace

std::string scenario_table_csv(const std::vector<ScenarioColumn>& columns) {
    using Cell = std::string (*)(const energy::SimulationMetrics&);
    static const std::pair<const char*, Cell> rows[kScenarioRows] = {
            {"Number of concurrent developers", [](const auto& m) { return std::to_string(m.config.developers); }},
            {"Model", [](const auto& m) { return m.config.model_profile; }},
            {"Quantization method",
             [](const auto& m) { return m.config.quantization_tag == "none" ? std::string("-") : m.config.quantization_tag; }},
            {"Number of GPUs", [](const auto& m) { return std::to_string(m.config.gpu_count); }},
            {"Streaming",
             [](const auto& m) { return std::string(m.config.streaming == StreamingMode::StreamWithCancel ? "yes" : "no"); }},
            {"Manual trigger emulation",
             [](const auto& m) { return std::string(m.config.trigger == TriggerMode::ManualEmulated ? "yes" : "no"); }},
            {"Average latency (s)", [](const auto& m) { return fmt(m.mean_latency_s); }},
            {"Average server power (W)", [](const auto& m) { return fmt(m.mean_power_w); }},
            {"Energy per 1000 generation requests (Wh)", [](const auto& m) { return fmt(m.energy_per_1000_requests_wh); }},
            {"Energy per hour per developer (Wh)", [](const auto& m) { return fmt(m.energy_per_hour_per_developer_wh); }},
            {"CO2 emissions per hour per developer (g)", [](const auto& m) { return fmt(m.co2_per_hour_per_developer_g); }},
    };
    std::string out = "metric";
    for (const auto& c : columns) out += "," + csv_field(c.name);
    out += '\n';
    for (const auto& [label, cell] : rows) {
        out += label;
        for (const auto& c : columns) out += "," + csv_field(cell(c.metrics));
        out += '\n';
    }
    return out;
}

std::string curves_csv(const std::vector<energy::SimulationMetrics>& aggregated) {
    std::map<std::pair<std::string, int>, const energy::SimulationMetrics*> ordered;
    for (const auto& m : aggregated) {
        auto series = m.config;
        series.developers = 0;
        ordered[{canonical_string(series), m.config.developers}] = &m;
    }
    std::string out =
            "series,developers,energy_per_hour_per_developer_wh,mean_power_w,mean_latency_s,rejected_fraction,saturated\n";
    for (const auto& [key, m] : ordered) {
        out += csv_field(key.first) + "," + std::to_string(key.second) + "," +
               fmt(m->energy_per_hour_per_developer_wh, "%.6g") + "," + fmt(m->mean_power_w, "%.6g") + "," +
               fmt(m->mean_latency_s, "%.6g") + "," + fmt(m->rejected_fraction, "%.6g") + "," +
               (m->saturated ? "true" : "false") + "\n";
    }
    return out;
}

ReportOutput build_report(const std::vector<energy::SimulationMetrics>& runs,
                          const energy::SaturationThresholds& thresholds) {
    if (runs.empty()) throw Error(ErrorKind::NoData, "no completed runs to report on");
    ReportOutput out;
    out.aggregated = sweep::aggregate_rounds(runs, thresholds);

    out.metrics_csv = energy::metrics_csv_header() + "\n";
    for (const auto& m : out.aggregated) out.metrics_csv += energy::metrics_csv_row(m) + "\n";

    std::vector<ScenarioColumn> columns;
    for (const auto& s : reference_scenarios())
        for (const auto& m : out.aggregated)
            if (m.config == s.config) columns.push_back({s.name, m});
    if (columns.empty())
        for (const auto& m : out.aggregated) columns.push_back({config_key(m.config), m});
    out.scenario_csv = scenario_table_csv(columns);

    const auto ratios = energy::impact_ratios(out.aggregated, &out.diagnostics);
    out.impact_csv = energy::impact_csv(ratios);
    out.curves_csv = curves_csv(out.aggregated);
    return out;
}

ReportOutput build_report(const sweep::SweepStore& store, const energy::SaturationThresholds& thresholds) {
    return build_report(store.completed_metrics(), thresholds);
}

}  // namespace assistbench::report
