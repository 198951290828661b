#include "assistbench/sweep.hpp"

#include "assistbench/error.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <unistd.h>

namespace assistbench::sweep {

void ConfigSpace::pin(Factor factor, const std::string& value) {
    auto as_int = [&] {
        try {
            std::size_t used = 0;
            const int v = std::stoi(value, &used);
            if (used == value.size()) return v;
        } catch (const std::exception&) {
        }
        throw Error(ErrorKind::InvalidArgument, "pin " + std::string(to_string(factor)) + "=" + value + " is not an integer");
    };
    switch (factor) {
        case Factor::Developers: developers = {as_int()}; break;
        case Factor::Streaming: streaming = {parse_streaming_mode(value)}; break;
        case Factor::Trigger: trigger = {parse_trigger_mode(value)}; break;
        case Factor::ModelProfile: models = {value}; break;
        case Factor::Quantization: quantizations = {value}; break;
        case Factor::MaxConcurrentRequests: max_concurrent_requests = {as_int()}; break;
        case Factor::GpuCount: gpu_counts = {as_int()}; break;
    }
}

std::size_t ConfigSpace::size() const {
    return developers.size() * streaming.size() * trigger.size() * models.size() * quantizations.size() *
           max_concurrent_requests.size() * gpu_counts.size();
}

ConfigSpace full_space() {
    ConfigSpace s;
    s.developers.assign(kDeveloperAxis.begin(), kDeveloperAxis.end());
    s.streaming = {StreamingMode::StreamWithCancel, StreamingMode::NoStream};
    s.trigger = {TriggerMode::Automatic, TriggerMode::ManualEmulated};
    s.models = {"starcoder", "starcoder2-15b", "starcoder2-7b"};
    s.quantizations = {"none", "eetq", "bnb-nf4", "bnb-fp4"};
    s.max_concurrent_requests = {128, 1000};
    s.gpu_counts.assign(kGpuAxis.begin(), kGpuAxis.end());
    return s;
}

std::vector<SimulationConfig> enumerate(const ConfigSpace& space) {
    auto require = [](bool non_empty, const char* axis) {
        if (!non_empty) throw Error(ErrorKind::InvalidArgument, std::string("axis '") + axis + "' is empty");
    };
    require(!space.developers.empty(), "developers");
    require(!space.streaming.empty(), "streaming");
    require(!space.trigger.empty(), "trigger");
    require(!space.models.empty(), "model");
    require(!space.quantizations.empty(), "quantization");
    require(!space.max_concurrent_requests.empty(), "max_concurrent_requests");
    require(!space.gpu_counts.empty(), "gpu_count");

    std::vector<SimulationConfig> out;
    out.reserve(space.size());
    std::set<std::uint64_t> seen;
    for (int d : space.developers)
        for (auto s : space.streaming)
            for (auto t : space.trigger)
                for (const auto& m : space.models)
                    for (const auto& q : space.quantizations)
                        for (int mcr : space.max_concurrent_requests)
                            for (int g : space.gpu_counts) {
                                SimulationConfig c{d, s, t, m, q, mcr, g};
                                if (seen.insert(config_hash(c)).second) out.push_back(std::move(c));
                            }
    return out;
}

int replication_count(int developers, int source_sessions) {
    if (developers < 1) throw Error(ErrorKind::InvalidArgument, "developers must be >= 1");
    if (source_sessions < 1) throw Error(ErrorKind::InvalidArgument, "source_sessions must be >= 1");
    return developers < source_sessions ? (source_sessions + developers - 1) / developers : 1;
}

nlohmann::json space_to_json(const ConfigSpace& space) {
    nlohmann::json j;
    j["schema_version"] = kSweepConfigSchemaVersion;
    auto& axes = j["axes"];
    axes["developers"] = space.developers;
    for (auto s : space.streaming) axes["streaming"].push_back(to_string(s));
    for (auto t : space.trigger) axes["trigger"].push_back(to_string(t));
    axes["model"] = space.models;
    axes["quantization"] = space.quantizations;
    axes["max_concurrent_requests"] = space.max_concurrent_requests;
    axes["gpu_count"] = space.gpu_counts;
    return j;
}

ConfigSpace space_from_json(const nlohmann::json& j) {
    if (j.value("schema_version", 0) != kSweepConfigSchemaVersion)
        throw Error(ErrorKind::InvalidArgument, "unsupported sweep config schema_version");
    ConfigSpace space = full_space();
    const auto& axes = j.at("axes");
    if (axes.contains("developers")) space.developers = axes["developers"].get<std::vector<int>>();
    if (axes.contains("streaming")) {
        space.streaming.clear();
        for (const auto& v : axes["streaming"]) space.streaming.push_back(parse_streaming_mode(v.get<std::string>()));
    }
    if (axes.contains("trigger")) {
        space.trigger.clear();
        for (const auto& v : axes["trigger"]) space.trigger.push_back(parse_trigger_mode(v.get<std::string>()));
    }
    if (axes.contains("model")) space.models = axes["model"].get<std::vector<std::string>>();
    if (axes.contains("quantization")) space.quantizations = axes["quantization"].get<std::vector<std::string>>();
    if (axes.contains("max_concurrent_requests"))
        space.max_concurrent_requests = axes["max_concurrent_requests"].get<std::vector<int>>();
    if (axes.contains("gpu_count")) space.gpu_counts = axes["gpu_count"].get<std::vector<int>>();
    if (j.contains("pins"))
        for (const auto& [name, value] : j["pins"].items()) {
            bool known = false;
            for (Factor f : kAllFactors)
                if (to_string(f) == name) {
                    space.pin(f, value.is_string() ? value.get<std::string>() : value.dump());
                    known = true;
                }
            if (!known) throw Error(ErrorKind::InvalidArgument, "unknown pinned factor '" + name + "'");
        }
    return space;
}

std::string RunId::dirname() const {
    return config_key(config) + "-r" + std::to_string(round) + "-s" + std::to_string(seed);
}

std::string_view to_string(RunState state) {
    switch (state) {
        case RunState::Pending: return "pending";
        case RunState::Complete: return "complete";
        case RunState::Failed: return "failed";
    }
    return "pending";
}

int SweepManifest::count(RunState state) const {
    return static_cast<int>(std::count_if(runs.begin(), runs.end(), [&](const RunEntry& r) { return r.state == state; }));
}

int SweepManifest::executed() const {
    return static_cast<int>(std::count_if(runs.begin(), runs.end(), [](const RunEntry& r) { return r.executed; }));
}

nlohmann::json manifest_to_json(const SweepManifest& manifest) {
    nlohmann::json runs = nlohmann::json::array();
    for (const auto& r : manifest.runs) {
        nlohmann::json jr = {{"run", r.id.dirname()},
                             {"config", r.id.config},
                             {"round", r.id.round},
                             {"seed", r.id.seed},
                             {"state", to_string(r.state)}};
        if (!r.error.empty()) jr["error"] = r.error;
        runs.push_back(std::move(jr));
    }
    return {{"schema_version", 1},
            {"seed", manifest.seed},
            {"space_size", manifest.space_size},
            {"complete", manifest.count(RunState::Complete)},
            {"failed", manifest.count(RunState::Failed)},
            {"pending", manifest.count(RunState::Pending)},
            {"runs", std::move(runs)}};
}

SweepStore::SweepStore(std::filesystem::path root) : root_(std::move(root)) {
    std::error_code ec;
    std::filesystem::create_directories(root_ / "runs", ec);
    if (ec) throw Error(ErrorKind::Io, "cannot create store at " + root_.string() + ": " + ec.message());
}

std::filesystem::path SweepStore::run_dir(const RunId& id) const { return root_ / "runs" / id.dirname(); }

bool SweepStore::is_complete(const RunId& id) const { return std::filesystem::exists(run_dir(id) / "metrics.json"); }

void SweepStore::write_file(const std::filesystem::path& path, const std::string& content) const {
    std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp." + std::to_string(::getpid()) + "." +
           std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id()));
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorKind::Io, "cannot write " + tmp.string());
        out << content;
        out.flush();
        if (!out) throw Error(ErrorKind::Io, "short write to " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw Error(ErrorKind::Io, "cannot rename " + tmp.string() + ": " + ec.message());
}

std::string SweepStore::read_file(const std::filesystem::path& path) const {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::Io, "cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void SweepStore::save_manifest(const SweepManifest& manifest) const {
    write_file(root_ / "manifest.json", manifest_to_json(manifest).dump(2) + "\n");
}

std::vector<energy::SimulationMetrics> SweepStore::completed_metrics() const {
    std::vector<std::filesystem::path> dirs;
    for (const auto& entry : std::filesystem::directory_iterator(root_ / "runs"))
        if (entry.is_directory() && std::filesystem::exists(entry.path() / "metrics.json")) dirs.push_back(entry.path());
    std::sort(dirs.begin(), dirs.end());
    std::vector<energy::SimulationMetrics> out;
    out.reserve(dirs.size());
    for (const auto& d : dirs) out.push_back(energy::metrics_from_json(nlohmann::json::parse(read_file(d / "metrics.json"))));
    return out;
}

replay::RawRunLog replay_plan_virtual(const plan::ReplayPlan& plan, const mock::ProfileCatalog& catalog,
                                      const replay::EngineOptions& engine) {
    return replay::execute_virtual(plan, mock::make_server_config(catalog, plan.config), engine);
}

RunArtifacts execute_run(const RunId& id, const std::vector<trace::DeveloperSession>& sessions,
                         const SweepOptions& options) {
    RunArtifacts out;
    auto plan_options = options.plan;
    plan_options.mean_output_tokens = options.catalog.model(id.config.model_profile).mean_output_tokens;
    out.plan = plan::build_plan(sessions, id.config, id.seed, id.round, plan_options);
    if (options.virtual_time) {
        out.log = replay_plan_virtual(out.plan, options.catalog, options.engine);
    } else {
        if (!options.endpoint) throw Error(ErrorKind::InvalidArgument, "real-clock sweep needs an endpoint");
        auto samplers = options.make_samplers ? options.make_samplers(id.config)
                                              : std::vector<std::unique_ptr<energy::PowerSampler>>{};
        out.log = replay::execute(out.plan, *options.endpoint, options.engine, std::move(samplers));
    }
    out.metrics = energy::restrict_to_overlap(out.log, out.plan.overlap, options.metrics);
    return out;
}

SweepManifest run_sweep(const ConfigSpace& space, const std::vector<trace::DeveloperSession>& sessions,
                        const SweepStore& store, const SweepOptions& options) {
    SweepManifest manifest;
    manifest.seed = options.seed;
    manifest.space_size = space.size();

    auto plan_options = options.plan;
    for (const auto& config : enumerate(space)) {
        validate_config(config, false);
        const int rounds = plan::round_count(sessions, config, plan_options);
        if (rounds == 0) throw Error(ErrorKind::PlanEmpty, "no session survives filtering for " + canonical_string(config));
        for (int r = 0; r < rounds; ++r) {
            RunEntry entry;
            entry.id = {config, r, options.seed};
            if (!options.force && store.is_complete(entry.id)) entry.state = RunState::Complete;
            manifest.runs.push_back(std::move(entry));
        }
    }
    store.save_manifest(manifest);

    std::mutex manifest_mutex;
    auto run_one = [&](RunEntry& entry) {
        const auto dir = store.run_dir(entry.id);
        std::error_code ec;
        std::filesystem::remove(dir / "metrics.json", ec);
        std::filesystem::remove(dir / "error.txt", ec);
        RunState state = RunState::Complete;
        std::string error;
        try {
            auto artifacts = execute_run(entry.id, sessions, options);
            store.write_file(dir / "plan.json", plan::plan_to_json(artifacts.plan).dump() + "\n");
            store.write_file(dir / "log.json", replay::log_to_json(artifacts.log).dump() + "\n");
            store.write_file(dir / "samples.csv", energy::samples_csv(artifacts.log.samples));
            store.write_file(dir / "metrics.json", energy::metrics_to_json(artifacts.metrics).dump(2) + "\n");
        } catch (const std::exception& e) {
            state = RunState::Failed;
            error = e.what();
            store.write_file(dir / "error.txt", error + "\n");
        }
        std::lock_guard lock(manifest_mutex);
        entry.state = state;
        entry.error = error;
        entry.executed = true;
        if (options.after_run) options.after_run(entry);
        store.save_manifest(manifest);
    };

    std::vector<RunEntry*> todo;
    for (auto& e : manifest.runs)
        if (e.state != RunState::Complete) todo.push_back(&e);

    const int threads = options.virtual_time ? std::max(1, options.parallel) : 1;
    if (threads == 1) {
        for (auto* e : todo) run_one(*e);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        for (int i = 0; i < threads; ++i)
            pool.emplace_back([&] {
                for (std::size_t k; (k = next.fetch_add(1)) < todo.size();) run_one(*todo[k]);
            });
        for (auto& t : pool) t.join();
    }
    return manifest;
}

std::vector<energy::SimulationMetrics> aggregate_rounds(const std::vector<energy::SimulationMetrics>& runs,
                                                        const energy::SaturationThresholds& thresholds) {
    std::map<std::string, std::vector<energy::SimulationMetrics>> by_config;
    for (const auto& m : runs) by_config[config_key(m.config)].push_back(m);
    std::vector<energy::SimulationMetrics> out;
    out.reserve(by_config.size());
    for (const auto& [key, rounds] : by_config) out.push_back(energy::average_rounds(rounds, thresholds));
    return out;
}

}  // namespace assistbench::sweep
