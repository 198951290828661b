#pragma once

// Configuration-space enumeration and resumable sweep execution.
//
// Store layout (all writes go through a temp file and a rename):
//
//   <root>/manifest.json
//   <root>/runs/<config_key>-r<round>-s<seed>/plan.json
//                                            /log.json
//                                            /samples.csv
//                                            /metrics.json   written last; marks the run complete
//                                            /error.txt      present when the run failed

#include "assistbench/config.hpp"
#include "assistbench/energy_metrics.hpp"
#include "assistbench/mock_server.hpp"
#include "assistbench/replay_engine.hpp"
#include "assistbench/replay_planner.hpp"
#include "assistbench/run_metrics.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace assistbench::sweep {

struct ConfigSpace {
    std::vector<int> developers;
    std::vector<StreamingMode> streaming;
    std::vector<TriggerMode> trigger;
    std::vector<std::string> models;
    std::vector<std::string> quantizations;
    std::vector<int> max_concurrent_requests;
    std::vector<int> gpu_counts;

    // Replaces one axis by a single value given in its text form.
    void pin(Factor factor, const std::string& value);
    // Cartesian product size, before deduplication.
    std::size_t size() const;
};

// Every declared axis value: 14 developer counts, both streaming and trigger
// modes, the three built-in models, four quantization tags, two request
// limits and three GPU counts.
ConfigSpace full_space();

// Cartesian product in a fixed order (last factor varies fastest), without
// duplicate config hashes. Throws Error(InvalidArgument) on an empty axis.
std::vector<SimulationConfig> enumerate(const ConfigSpace& space);

// Rounds needed so that every one of `source_sessions` sessions is replayed
// once: ceil(K / n) below K developers, otherwise 1.
int replication_count(int developers, int source_sessions = 20);

nlohmann::json space_to_json(const ConfigSpace& space);
ConfigSpace space_from_json(const nlohmann::json& j);
inline constexpr int kSweepConfigSchemaVersion = 1;

struct RunId {
    SimulationConfig config;
    int round = 0;
    std::uint64_t seed = 0;

    std::string dirname() const;
    bool operator==(const RunId&) const = default;
};

enum class RunState { Pending, Complete, Failed };
std::string_view to_string(RunState state);

struct RunEntry {
    RunId id;
    RunState state = RunState::Pending;
    bool executed = false;  // ran during this invocation
    std::string error;
};

struct SweepManifest {
    std::uint64_t seed = 0;
    std::size_t space_size = 0;
    std::vector<RunEntry> runs;

    int count(RunState state) const;
    int executed() const;
};

nlohmann::json manifest_to_json(const SweepManifest& manifest);

class SweepStore {
  public:
    explicit SweepStore(std::filesystem::path root);

    const std::filesystem::path& root() const { return root_; }
    std::filesystem::path run_dir(const RunId& id) const;
    bool is_complete(const RunId& id) const;

    void write_file(const std::filesystem::path& path, const std::string& content) const;
    std::string read_file(const std::filesystem::path& path) const;

    void save_manifest(const SweepManifest& manifest) const;
    // Metrics of every complete run found under runs/, sorted by directory.
    std::vector<energy::SimulationMetrics> completed_metrics() const;

  private:
    std::filesystem::path root_;
};

struct SweepOptions {
    std::uint64_t seed = 0;
    bool force = false;
    bool virtual_time = true;
    // Runs concurrently on this many threads; only honored with virtual_time.
    int parallel = 1;
    mock::ProfileCatalog catalog = mock::default_catalog();
    replay::EngineOptions engine;
    plan::PlanOptions plan;
    energy::MetricOptions metrics;
    // Real-clock target; required when virtual_time is false.
    std::optional<replay::HttpEndpoint> endpoint;
    std::function<std::vector<std::unique_ptr<energy::PowerSampler>>(const SimulationConfig&)> make_samplers;
    // Invoked after each run is persisted, before the manifest is updated.
    std::function<void(const RunEntry&)> after_run;
};

// Builds, executes, measures and persists every (config, round) of the
// space. Complete runs are skipped unless options.force; a failing run is
// recorded as Failed and the sweep continues.
SweepManifest run_sweep(const ConfigSpace& space, const std::vector<trace::DeveloperSession>& sessions,
                        const SweepStore& store, const SweepOptions& options);

// One run end to end: plan, replay, metrics. Exposed for the CLI and tests.
struct RunArtifacts {
    plan::ReplayPlan plan;
    replay::RawRunLog log;
    energy::SimulationMetrics metrics;
};
RunArtifacts execute_run(const RunId& id, const std::vector<trace::DeveloperSession>& sessions,
                         const SweepOptions& options);

// Re-executes a persisted plan on the virtual mock.
replay::RawRunLog replay_plan_virtual(const plan::ReplayPlan& plan, const mock::ProfileCatalog& catalog,
                                      const replay::EngineOptions& engine = {});

// Averages the rounds of each configuration, in config-key order.
std::vector<energy::SimulationMetrics> aggregate_rounds(const std::vector<energy::SimulationMetrics>& runs,
                                                        const energy::SaturationThresholds& thresholds = {});

}  // namespace assistbench::sweep
