#include "assistbench/error.hpp"
#include "assistbench/report.hpp"
#include "assistbench/sweep.hpp"
#include "assistbench/synthetic_traces.hpp"

#include <doctest.h>

#include <filesystem>
#include <set>
#include <sstream>

using namespace assistbench;
using namespace assistbench::sweep;
namespace fs = std::filesystem;

namespace {

    struct TempDir {
        fs::path path;
        explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("assistbench-" + name)) {
            fs::remove_all(path);
        }
        ~TempDir() { fs::remove_all(path); }
    };

    ConfigSpace single(const SimulationConfig& c) {
        ConfigSpace s;
        s.developers = {c.developers};
        s.streaming = {c.streaming};
        s.trigger = {c.trigger};
        s.models = {c.model_profile};
        s.quantizations = {c.quantization_tag};
        s.max_concurrent_requests = {c.max_concurrent_requests};
        s.gpu_counts = {c.gpu_count};
        return s;
    }

    const std::vector<trace::DeveloperSession>& small_sessions() {
        static const auto sessions = trace::synthesize_sessions({.developers = 4, .seed = 2});
        return sessions;
    }

    SimulationConfig manual(int devs, int gpus = 4) {
        return {devs, StreamingMode::NoStream, TriggerMode::ManualEmulated, "starcoder2-7b", "none", 1000, gpus};
    }

    std::size_t rows(const std::string& csv) { return static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n')); }

}  // namespace

TEST_CASE("enumeration sizes") {
    auto space = single(SimulationConfig{});
    space.streaming = {StreamingMode::StreamWithCancel, StreamingMode::NoStream};
    space.gpu_counts = {1, 2, 4};
    CHECK(space.size() == 6);
    const auto configs = enumerate(space);
    CHECK(configs.size() == 6);
    // Last factor varies fastest.
    CHECK(configs[0].gpu_count == 1);
    CHECK(configs[1].gpu_count == 2);
    CHECK(configs[3].streaming == StreamingMode::NoStream);

    space.pin(Factor::GpuCount, "4");
    space.pin(Factor::Streaming, "no-stream");
    CHECK(enumerate(space).size() == 1);

    space.models.clear();
    CHECK_THROWS_AS(enumerate(space), Error);
}

TEST_CASE("full space is reported from its axes") {
    const auto space = full_space();
    CHECK(space.size() == 14u * 2 * 2 * 3 * 4 * 2 * 3);
    const auto configs = enumerate(space);
    CHECK(configs.size() == space.size());
    std::set<std::uint64_t> hashes;
    for (const auto& c : configs) hashes.insert(config_hash(c));
    CHECK(hashes.size() == configs.size());
}

TEST_CASE("duplicate axis values are removed") {
    auto space = single(SimulationConfig{});
    space.developers = {5, 5, 1};
    CHECK(space.size() == 3);
    CHECK(enumerate(space).size() == 2);
}

TEST_CASE("replication counts") {
    CHECK(replication_count(1) == 20);
    CHECK(replication_count(2) == 10);
    CHECK(replication_count(5) == 4);
    CHECK(replication_count(10) == 2);
    CHECK(replication_count(20) == 1);
    CHECK(replication_count(500) == 1);
    const auto sessions = trace::synthesize_sessions();
    for (int n : {1, 2, 5, 10, 20, 30})
        CHECK(plan::round_count(sessions, {n, StreamingMode::StreamWithCancel, TriggerMode::Automatic}) ==
              replication_count(n, static_cast<int>(sessions.size())));
}

TEST_CASE("space JSON round-trips") {
    auto space = full_space();
    space.pin(Factor::ModelProfile, "starcoder");
    const auto back = space_from_json(space_to_json(space));
    CHECK(enumerate(back) == enumerate(space));
}

TEST_CASE("config hashes are stable") {
    const SimulationConfig c{5, StreamingMode::NoStream, TriggerMode::ManualEmulated, "starcoder2-7b", "none", 1000, 1};
    CHECK(config_key(c).size() == 16);
    CHECK(config_key(c) == config_key(SimulationConfig(c)));
    auto d = c;
    d.gpu_count = 2;
    CHECK(config_key(c) != config_key(d));
    nlohmann::json j = c;
    CHECK(j.get<SimulationConfig>() == c);
}

TEST_CASE("two-config sweep on the virtual mock, then an idempotent rerun") {
    TempDir dir("sweep-two");
    const SweepStore store(dir.path);
    auto space = single(manual(4));
    space.gpu_counts = {1, 4};
    SweepOptions options;
    options.seed = 3;
    const auto first = run_sweep(space, small_sessions(), store, options);
    CHECK(first.runs.size() == 2);
    CHECK(first.count(RunState::Complete) == 2);
    CHECK(first.executed() == 2);
    for (const auto& e : first.runs) {
        const auto run = store.run_dir(e.id);
        CHECK(fs::exists(run / "plan.json"));
        CHECK(fs::exists(run / "log.json"));
        CHECK(fs::exists(run / "samples.csv"));
        CHECK(fs::exists(run / "metrics.json"));
    }
    CHECK(fs::exists(dir.path / "manifest.json"));
    const auto metrics = store.completed_metrics();
    CHECK(metrics.size() == 2);

    const auto second = run_sweep(space, small_sessions(), store, options);
    CHECK(second.executed() == 0);
    CHECK(manifest_to_json(second) == manifest_to_json(first));
    CHECK(store.completed_metrics().size() == 2);

    options.force = true;
    options.parallel = 2;
    const auto forced = run_sweep(space, small_sessions(), store, options);
    CHECK(forced.executed() == 2);
    const auto again = store.completed_metrics();
    REQUIRE(again.size() == 2);
    for (std::size_t i = 0; i < 2; ++i)
        CHECK(energy::metrics_to_json(again[i]).dump() == energy::metrics_to_json(metrics[i]).dump());
}

TEST_CASE("rounds below the session count are separate runs") {
    TempDir dir("sweep-rounds");
    const SweepStore store(dir.path);
    SweepOptions options;
    const auto manifest = run_sweep(single(manual(1)), small_sessions(), store, options);
    CHECK(manifest.runs.size() == 4);
    std::set<int> rounds;
    for (const auto& e : manifest.runs) rounds.insert(e.id.round);
    CHECK(rounds == std::set<int>{0, 1, 2, 3});
    const auto aggregated = aggregate_rounds(store.completed_metrics());
    REQUIRE(aggregated.size() == 1);
    CHECK(aggregated[0].round_count == 4);
}

TEST_CASE("a failing run is recorded and the sweep continues") {
    TempDir dir("sweep-fail");
    const SweepStore store(dir.path);
    auto space = single(manual(4));
    space.models = {"starcoder2-7b", "no-such-model"};
    const auto manifest = run_sweep(space, small_sessions(), store, {});
    CHECK(manifest.count(RunState::Complete) == 1);
    CHECK(manifest.count(RunState::Failed) == 1);
    for (const auto& e : manifest.runs)
        if (e.state == RunState::Failed) {
            CHECK(fs::exists(store.run_dir(e.id) / "error.txt"));
            CHECK_FALSE(e.error.empty());
        }
}

TEST_CASE("a persisted plan reproduces its log") {
    TempDir dir("sweep-plan");
    const SweepStore store(dir.path);
    const auto manifest = run_sweep(single(manual(4)), small_sessions(), store, {});
    const auto run = store.run_dir(manifest.runs[0].id);
    const auto plan = plan::plan_from_json(nlohmann::json::parse(store.read_file(run / "plan.json")));
    const auto log = replay_plan_virtual(plan, mock::default_catalog());
    CHECK(replay::log_to_json(log).dump() + "\n" == store.read_file(run / "log.json"));
    CHECK(energy::samples_csv(log.samples) == store.read_file(run / "samples.csv"));
}

TEST_CASE("report: six scenarios give the eleven-row table") {
    std::vector<energy::SimulationMetrics> runs;
    for (const auto& s : report::reference_scenarios()) {
        energy::SimulationMetrics m;
        m.config = s.config;
        m.mean_latency_s = 2.0;
        m.mean_power_w = 300.0;
        m.energy_per_hour_per_developer_wh = 300.0 / s.config.developers;
        runs.push_back(m);
    }
    const auto out = report::build_report(runs);
    CHECK(out.aggregated.size() == 6);
    CHECK(rows(out.scenario_csv) == 1 + report::kScenarioRows);
    std::istringstream in(out.scenario_csv);
    std::string header;
    std::getline(in, header);
    CHECK(header ==
          "metric,small-team/frugal,small-team/performance,medium-team/frugal,medium-team/performance,"
          "distributed/frugal,distributed/performance");
    CHECK(out.scenario_csv.find("Energy per hour per developer (Wh),60.0,") != std::string::npos);
    CHECK(rows(out.curves_csv) == 7);
}

TEST_CASE("report: a single run is a one-column table with an impact diagnostic") {
    energy::SimulationMetrics m;
    m.config = manual(3);
    m.mean_latency_s = 1.0;
    const std::vector<energy::SimulationMetrics> runs{m};
    const auto out = report::build_report(runs);
    std::istringstream in(out.scenario_csv);
    std::string header;
    std::getline(in, header);
    CHECK(std::count(header.begin(), header.end(), ',') == 1);
    CHECK(rows(out.impact_csv) == 1);  // header only
    CHECK_FALSE(out.diagnostics.empty());
}

TEST_CASE("report: an empty store is an error") {
    TempDir dir("sweep-empty");
    const SweepStore store(dir.path);
    try {
        report::build_report(store);
        FAIL("expected NoData");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::NoData);
    }
}
