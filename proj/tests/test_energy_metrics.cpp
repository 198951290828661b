#include "assistbench/error.hpp"
#include "assistbench/power_samplers.hpp"
#include "assistbench/replay_engine.hpp"
#include "assistbench/run_metrics.hpp"

#include <doctest.h>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <thread>

using namespace assistbench;
using namespace assistbench::energy;

namespace {

    constexpr double kHourMs = 3'600'000.0;

    ErrorKind kind_of(auto&& fn) {
        try {
            fn();
        } catch (const Error& e) {
            return e.kind();
        }
        FAIL("expected an assistbench::Error");
        return ErrorKind::Io;
    }

    SimulationMetrics result(SimulationConfig cfg, double energy, double latency) {
        SimulationMetrics m;
        m.config = std::move(cfg);
        m.energy_per_hour_per_developer_wh = energy;
        m.mean_latency_s = latency;
        return m;
    }

}  // namespace

TEST_CASE("constant power integrates to power times time") {
    const std::vector<PowerSample> samples = {{0.0, 100.0}, {kHourMs, 100.0}};
    const auto r = integrate(samples, {0.0, kHourMs}, 4);
    CHECK(r.energy_wh == 100.0);
    CHECK(r.mean_power_w == 100.0);
    CHECK(r.per_developer_energy_wh == 25.0);
}

TEST_CASE("zero power integrates to zero") {
    const std::vector<PowerSample> samples = {{0.0, 0.0}, {1000.0, 0.0}};
    CHECK(integrate(samples, {0.0, 5000.0}).energy_wh == 0.0);
}

TEST_CASE("piecewise power by hand") {
    const std::vector<PowerSample> samples = {{0.0, 100.0}, {kHourMs / 2, 300.0}, {kHourMs, 300.0}};
    const auto r = integrate(samples, {0.0, kHourMs});
    CHECK(r.energy_wh == doctest::Approx(200.0).epsilon(1e-12));
    CHECK(r.mean_power_w == doctest::Approx(200.0).epsilon(1e-12));

    // Clipped: [15 min, 45 min] sees 15 min at 100 W and 15 min at 300 W.
    const auto clipped = integrate(samples, {kHourMs / 4, 3 * kHourMs / 4});
    CHECK(clipped.energy_wh == doctest::Approx(25.0 + 75.0).epsilon(1e-12));
}

TEST_CASE("sources are summed and the first sample extends to the window start") {
    const std::vector<PowerSample> samples = {
            {10.0, 50.0, PowerSource::CpuEnergyCounter},
            {0.0, 200.0, PowerSource::GpuManagementPoll},
            {500.0, 60.0, PowerSource::CpuEnergyCounter},
    };
    const auto r = integrate(samples, {0.0, 1000.0});
    // cpu: 50 W over [0, 500) and 60 W over [500, 1000); gpu: 200 W throughout
    CHECK(r.mean_power_w == doctest::Approx(55.0 + 200.0));
}

TEST_CASE("integration errors") {
    const std::vector<PowerSample> late = {{5000.0, 10.0}};
    CHECK(kind_of([&] { integrate(late, {0.0, 1000.0}); }) == ErrorKind::EmptyWindow);
    CHECK(kind_of([&] { integrate(late, {10.0, 10.0}); }) == ErrorKind::EmptyWindow);
    const std::vector<PowerSample> none;
    CHECK(kind_of([&] { integrate(none, {0.0, 10.0}); }) == ErrorKind::EmptyWindow);
    const std::vector<PowerSample> negative = {{0.0, -1.0}};
    CHECK(kind_of([&] { integrate(negative, {0.0, 10.0}); }) == ErrorKind::InvalidArgument);
    const std::vector<PowerSample> unordered = {{5.0, 1.0}, {1.0, 1.0}};
    CHECK(kind_of([&] { integrate(unordered, {0.0, 10.0}); }) == ErrorKind::InvalidArgument);
}

TEST_CASE("energy, mean power and window length agree on random series") {
    std::mt19937_64 rng(3);
    for (int i = 0; i < 200; ++i) {
        std::vector<PowerSample> samples;
        double t = 0;
        const int n = std::uniform_int_distribution<int>(1, 50)(rng);
        for (int k = 0; k < n; ++k) {
            samples.push_back({t, std::uniform_real_distribution<double>(0, 1500)(rng)});
            t += std::uniform_real_distribution<double>(1, 5000)(rng);
        }
        const TimeWindow w{std::uniform_real_distribution<double>(0, t / 2)(rng), t};
        const auto r = integrate(samples, w, 3);
        CHECK(r.energy_wh == doctest::Approx(r.mean_power_w * w.length_hours()).epsilon(1e-9));
        CHECK(r.per_developer_energy_wh == doctest::Approx(r.energy_wh / 3).epsilon(1e-12));
    }
}

TEST_CASE("co2 examples and linearity") {
    CHECK(co2(1000.0) == doctest::Approx(56.0));
    CHECK(co2(0.0) == 0.0);
    CHECK(co2(49.9) == doctest::Approx(2.7944));
    CHECK(std::round(co2(49.9) * 10) / 10 == doctest::Approx(2.8));
    CHECK(co2(3 * 17.0, 40.0) == doctest::Approx(3 * co2(17.0, 40.0)));
    CHECK(co2(17.0, 3 * 40.0) == doctest::Approx(3 * co2(17.0, 40.0)));
    CHECK(kind_of([] { co2(1.0, -1.0); }) == ErrorKind::InvalidArgument);
    CHECK(kind_of([] { co2(-1.0); }) == ErrorKind::InvalidArgument);
}

TEST_CASE("saturation thresholds") {
    SimulationMetrics m;
    m.rejected_fraction = 0.11;
    m.mean_latency_s = 3.0;
    CHECK(is_saturated(m));
    m.rejected_fraction = 0.0;
    m.mean_latency_s = 19.9;
    CHECK_FALSE(is_saturated(m));
    m.mean_latency_s = 20.0;
    CHECK_FALSE(is_saturated(m));
    m.mean_latency_s = 226.0;
    CHECK(is_saturated(m));
    m.mean_latency_s = 5.0;
    m.rejected_fraction = 0.10;
    CHECK_FALSE(is_saturated(m));
    CHECK(is_saturated(m, {0.05, 20.0}));
}

TEST_CASE("stability") {
    const std::vector<double> flat = {100, 100, 100};
    CHECK(stability(flat) == 0.0);
    const std::vector<double> spread = {98, 100, 102};
    CHECK(stability(spread) == doctest::Approx(std::sqrt(8.0 / 3.0) / 100.0));
    CHECK(stability(spread) == doctest::Approx(0.0163).epsilon(0.01));
    const std::vector<double> single = {100};
    CHECK(kind_of([&] { stability(single); }) == ErrorKind::InvalidArgument);
}

TEST_CASE("impact ratios of two configs") {
    SimulationConfig a;
    SimulationConfig b = a;
    b.gpu_count = 1;
    const std::vector<SimulationMetrics> results = {result(a, 200.0, 2.0), result(b, 100.0, 3.0)};
    const auto ratios = impact_ratios(results);
    REQUIRE(ratios.size() == 4);
    for (const auto& r : ratios) {
        CHECK(r.factor == Factor::GpuCount);
        REQUIRE(r.pairs.size() == 1);
        if (r.metric == ImpactMetric::Energy) CHECK(r.ratio == (r.from_option == "4" ? 0.5 : 2.0));
        else CHECK(r.ratio == (r.from_option == "4" ? 1.5 : 2.0 / 3.0));
    }
}

TEST_CASE("identical configs are rejected with a diagnostic") {
    SimulationConfig a;
    const std::vector<SimulationMetrics> results = {result(a, 1.0, 1.0), result(a, 2.0, 1.0)};
    std::vector<std::string> diagnostics;
    CHECK(impact_ratios(results, &diagnostics).empty());
    CHECK(diagnostics.size() == 2);
}

TEST_CASE("configs differing in two factors are never paired") {
    SimulationConfig a;
    SimulationConfig b = a;
    b.gpu_count = 2;
    b.developers = 5;
    const std::vector<SimulationMetrics> results = {result(a, 1.0, 1.0), result(b, 2.0, 1.0)};
    std::vector<std::string> diagnostics;
    CHECK(impact_ratios(results, &diagnostics).empty());
    REQUIRE(diagnostics.size() == 1);
    CHECK(diagnostics[0].find("no pair") != std::string::npos);
}

TEST_CASE("impact ratios are invariant under relabelling and reordering") {
    std::vector<SimulationMetrics> results;
    for (const char* model : {"m1", "m2", "m3"})
        for (int gpus : {1, 2, 4})
            for (int devs : {1, 5})
                results.push_back(result({devs, StreamingMode::NoStream, TriggerMode::Automatic, model, "none", 1000, gpus},
                                         10.0 * gpus + devs + (model[1] - '0'), 1.0 + devs * 0.5 + gpus));
    const auto base = impact_ratios(results);

    auto relabelled = results;
    for (auto& r : relabelled) r.config.model_profile = "renamed-" + r.config.model_profile;
    std::shuffle(relabelled.begin(), relabelled.end(), std::mt19937_64(1));
    const auto other = impact_ratios(relabelled);
    REQUIRE(other.size() == base.size());
    auto strip = [](std::string s) { return s.rfind("renamed-", 0) == 0 ? s.substr(8) : s; };
    for (std::size_t i = 0; i < base.size(); ++i) {
        CHECK(other[i].factor == base[i].factor);
        CHECK(strip(other[i].from_option) == base[i].from_option);
        CHECK(strip(other[i].to_option) == base[i].to_option);
        CHECK(other[i].metric == base[i].metric);
        CHECK(other[i].pairs.size() == base[i].pairs.size());
        CHECK(other[i].ratio == doctest::Approx(base[i].ratio).epsilon(1e-12));
    }
}

TEST_CASE("overlap restriction") {
    replay::RawRunLog log;
    log.config.developers = 2;
    auto rec = [](double fire, replay::RequestStatus st, std::optional<double> done) {
        replay::RequestRecord r;
        r.fire_offset_ms = fire;
        r.send_ms = fire;
        r.status = st;
        r.completion_ms = done;
        return r;
    };
    log.records = {
            rec(0, replay::RequestStatus::Completed, 50'000),                 // outside
            rec(5 * 60'000, replay::RequestStatus::Completed, 5 * 60'000 + 2000),
            rec(6 * 60'000, replay::RequestStatus::RejectedByServer, 6 * 60'000),
            rec(7 * 60'000, replay::RequestStatus::Canceled, std::nullopt),
            rec(7 * 60'000, replay::RequestStatus::Completed, 7 * 60'000 + 4000),
    };
    log.samples = {{0.0, 1000.0}, {5 * 60'000.0, 200.0}, {55 * 60'000.0, 200.0}};
    const auto m = restrict_to_overlap(log, {5 * 60'000, 55 * 60'000});
    CHECK(m.request_count == 4);
    CHECK(m.completed_count == 2);
    CHECK(m.rejected_fraction == 0.25);
    CHECK(m.mean_latency_s == doctest::Approx(3.0));
    CHECK(m.mean_power_w == doctest::Approx(200.0));
    CHECK(m.energy_per_hour_per_developer_wh == doctest::Approx(100.0));
    CHECK(m.energy_wh == doctest::Approx(200.0 * 50.0 / 60.0));
    CHECK(m.energy_per_1000_requests_wh == doctest::Approx(m.energy_wh / 4 * 1000));
    CHECK(m.co2_per_hour_per_developer_g == doctest::Approx(5.6));

    CHECK(kind_of([&] { restrict_to_overlap(log, {10, 10}); }) == ErrorKind::EmptyOverlap);
    try {
        restrict_to_overlap(log, {20, 10});
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("inspect") != std::string::npos);
    }
}

TEST_CASE("percentile is nearest-rank") {
    CHECK(percentile({1, 2, 3, 4, 5, 6, 7, 8, 9, 10}, 95) == 10);
    CHECK(percentile({3, 1, 2}, 50) == 2);
    CHECK(std::isnan(percentile({}, 95)));
}

TEST_CASE("round averaging") {
    SimulationMetrics a;
    a.mean_latency_s = 2.0;
    a.mean_power_w = 100.0;
    a.request_count = 10;
    SimulationMetrics b = a;
    b.mean_latency_s = std::nan("");
    b.mean_power_w = 300.0;
    const std::vector<SimulationMetrics> rounds = {a, b};
    const auto avg = average_rounds(rounds);
    CHECK(avg.mean_latency_s == 2.0);
    CHECK(avg.mean_power_w == 200.0);
    CHECK(avg.request_count == 20);
    CHECK(avg.round_count == 2);
}

TEST_CASE("metrics and samples serialise") {
    SimulationMetrics m;
    m.mean_latency_s = std::nan("");
    m.mean_power_w = 123.25;
    m.saturated = true;
    const auto back = metrics_from_json(metrics_to_json(m));
    CHECK(std::isnan(back.mean_latency_s));
    CHECK(back.mean_power_w == 123.25);
    CHECK(back.saturated);
    CHECK(metrics_csv_row(m).find(',') != std::string::npos);

    const std::vector<PowerSample> samples = {{0.5, 10.25, PowerSource::GpuManagementPoll}, {1.5, 3.0}};
    CHECK(samples_from_csv(samples_csv(samples)) == samples);
}

TEST_CASE("energy counter sampler differences cumulative counters") {
    const auto dir = std::filesystem::temp_directory_path() / "assistbench-rapl-test";
    std::filesystem::create_directories(dir);
    const auto file = (dir / "energy_uj").string();
    auto write = [&](const std::string& v) { std::ofstream(file) << v << "\n"; };
    std::ofstream(dir / "max_energy_range_uj") << "1000000\n";
    write("900000");
    EnergyCounterSampler sampler({file});
    CHECK_FALSE(sampler.read_watts(0.0));
    write("950000");
    CHECK(*sampler.read_watts(1000.0) == doctest::Approx(0.05));
    write("50000");  // wrapped
    CHECK(*sampler.read_watts(2000.0) == doctest::Approx(0.1));
    std::filesystem::remove_all(dir);
}

TEST_CASE("GPU poll output keeps only the used GPUs") {
    CHECK(*GpuPollSampler::sum_first("61.5\n70.0\n80.25\n90\n", 2) == doctest::Approx(131.5));
    CHECK_FALSE(GpuPollSampler::sum_first("61.5\n", 2));
    CHECK_FALSE(GpuPollSampler::sum_first("[N/A]\n", 1));
}

TEST_CASE("periodic sampler collects ordered samples") {
    std::vector<std::unique_ptr<PowerSampler>> samplers;
    samplers.push_back(std::make_unique<FunctionSampler>(PowerSource::Simulated, [](double) { return 42.0; }));
    PeriodicSampler sampler(std::move(samplers), 5.0, std::chrono::steady_clock::now());
    sampler.start();
    std::this_thread::sleep_for(std::chrono::milliseconds(60));
    sampler.stop();
    const auto samples = sampler.samples();
    CHECK(samples.size() >= 3);
    for (std::size_t i = 1; i < samples.size(); ++i) CHECK(samples[i - 1].timestamp_ms <= samples[i].timestamp_ms);
    CHECK(samples.front().watts == 42.0);
}
