// assistbench: replay code-assistant telemetry against a generation server
// and measure what it costs in energy.
//
// Exit codes: 0 success, 1 invalid input, 2 runtime failure.

#include "assistbench/config.hpp"
#include "assistbench/error.hpp"
#include "assistbench/mock_server.hpp"
#include "assistbench/mock_service.hpp"
#include "assistbench/power_samplers.hpp"
#include "assistbench/replay_engine.hpp"
#include "assistbench/replay_planner.hpp"
#include "assistbench/report.hpp"
#include "assistbench/run_metrics.hpp"
#include "assistbench/sweep.hpp"
#include "assistbench/synthetic_traces.hpp"
#include "assistbench/trace_model.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

using namespace assistbench;
namespace fs = std::filesystem;

namespace {

    constexpr int kExitInvalid = 1;
    constexpr int kExitRuntime = 2;

    struct Globals {
        std::uint64_t seed = 0;
        bool virtual_time = false;
        std::string config_file;
        std::string out;
    };

    struct DatasetArgs {
        std::vector<std::string> paths;
        std::string schema = "canonical";
        bool synthetic = false;
        std::uint64_t synthetic_seed = trace::SyntheticTraceOptions{}.seed;
        int synthetic_developers = 20;
    };

    struct ConfigArgs {
        int developers = 0;
        std::string streaming;
        std::string trigger;
        std::string model;
        std::string quantization;
        int max_concurrent_requests = 0;
        int gpus = 0;
    };

    void add_dataset_options(CLI::App* cmd, DatasetArgs& args) {
        cmd->add_option("--dataset", args.paths, "Telemetry JSONL file(s)");
        cmd->add_option("--schema", args.schema, "Input schema: canonical or copilot")
                ->check(CLI::IsMember({"canonical", "copilot"}));
        cmd->add_flag("--synthetic", args.synthetic, "Use the built-in synthetic dataset instead of --dataset");
        cmd->add_option("--synthetic-seed", args.synthetic_seed, "Seed of the synthetic dataset");
        cmd->add_option("--synthetic-developers", args.synthetic_developers, "Developers in the synthetic dataset");
    }

    void add_config_options(CLI::App* cmd, ConfigArgs& args) {
        cmd->add_option("--developers", args.developers, "Concurrent virtual developers");
        cmd->add_option("--streaming", args.streaming, "stream or no-stream");
        cmd->add_option("--trigger", args.trigger, "automatic or manual");
        cmd->add_option("--model", args.model, "Model profile name");
        cmd->add_option("--quantization", args.quantization, "Quantization tag");
        cmd->add_option("--max-concurrent-requests", args.max_concurrent_requests, "Server admission cap");
        cmd->add_option("--gpus", args.gpus, "GPU count (1, 2 or 4)");
    }

    nlohmann::json read_json(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw Error(ErrorKind::Io, "cannot open " + path);
        auto j = nlohmann::json::parse(in, nullptr, false);
        if (j.is_discarded()) throw Error(ErrorKind::InvalidArgument, path + " is not valid JSON");
        return j;
    }

    void write_text(const fs::path& path, const std::string& text) {
        if (path.has_parent_path()) fs::create_directories(path.parent_path());
        std::ofstream out(path, std::ios::binary);
        if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
        out << text;
    }

    // The --config file: {"schema_version": 1, "config": {...}, "axes": {...},
    // "pins": {...}, "profiles": "path"}; every key optional.
    nlohmann::json load_config_file(const Globals& g) {
        if (g.config_file.empty()) return nlohmann::json::object();
        auto j = read_json(g.config_file);
        if (j.value("schema_version", 0) != kConfigSchemaVersion)
            throw Error(ErrorKind::InvalidArgument, g.config_file + ": unsupported schema_version");
        return j;
    }

    SimulationConfig resolve_config(const Globals& g, const ConfigArgs& a) {
        SimulationConfig c;
        const auto file = load_config_file(g);
        if (file.contains("config")) c = file["config"].get<SimulationConfig>();
        if (a.developers) c.developers = a.developers;
        if (!a.streaming.empty()) c.streaming = parse_streaming_mode(a.streaming);
        if (!a.trigger.empty()) c.trigger = parse_trigger_mode(a.trigger);
        if (!a.model.empty()) c.model_profile = a.model;
        if (!a.quantization.empty()) c.quantization_tag = a.quantization;
        if (a.max_concurrent_requests) c.max_concurrent_requests = a.max_concurrent_requests;
        if (a.gpus) c.gpu_count = a.gpus;
        validate_config(c, false);
        return c;
    }

    mock::ProfileCatalog resolve_catalog(const Globals& g, const std::string& profiles) {
        if (!profiles.empty()) return mock::load_catalog(profiles);
        const auto file = load_config_file(g);
        if (file.contains("profiles")) return mock::load_catalog(file["profiles"].get<std::string>());
        return mock::default_catalog();
    }

    trace::ParseResult load_dataset(const DatasetArgs& args) {
        if (args.synthetic) {
            trace::SyntheticTraceOptions opts;
            opts.seed = args.synthetic_seed;
            opts.developers = args.synthetic_developers;
            return trace::sessions_from_events(trace::synthesize_events(opts));
        }
        if (args.paths.empty()) throw Error(ErrorKind::InvalidArgument, "give --dataset PATH or --synthetic");
        trace::ParseOptions opts;
        opts.schema = args.schema == "copilot" ? trace::InputSchema::CopilotTelemetry : trace::InputSchema::Canonical;
        return trace::parse_dataset_files(args.paths, opts);
    }

    void print_diagnostics(const trace::ParseResult& r, std::size_t limit = 20) {
        std::size_t shown = 0;
        for (const auto& d : r.diagnostics)
            if (shown++ < limit) std::cerr << "error: line " << d.line << ": " << d.message << "\n";
        for (const auto& w : r.warnings)
            if (shown++ < limit) std::cerr << "warning: " << (w.line ? "line " + std::to_string(w.line) + ": " : "") << w.message << "\n";
        if (shown > limit) std::cerr << "... " << shown - limit << " more\n";
    }

    std::pair<std::string, int> parse_endpoint(const std::string& text) {
        const auto colon = text.rfind(':');
        if (colon == std::string::npos) throw Error(ErrorKind::InvalidArgument, "endpoint must be host:port");
        return {text.substr(0, colon), std::stoi(text.substr(colon + 1))};
    }

    std::vector<std::unique_ptr<energy::PowerSampler>> make_samplers(const std::vector<std::string>& meters,
                                                                     const std::string& host, int port, int gpus) {
        std::vector<std::unique_ptr<energy::PowerSampler>> out;
        for (const auto& m : meters) {
            if (m == "mock")
                out.push_back(std::make_unique<energy::HttpPowerSampler>(host, port));
            else if (m == "rapl")
                out.push_back(std::make_unique<energy::EnergyCounterSampler>(energy::EnergyCounterSampler::discover()));
            else if (m == "nvidia-smi")
                out.push_back(std::make_unique<energy::GpuPollSampler>(gpus));
            else
                throw Error(ErrorKind::InvalidArgument, "unknown meter '" + m + "'");
        }
        return out;
    }

    int cmd_validate(const DatasetArgs& args) {
        const auto r = load_dataset(args);
        std::size_t requests = 0;
        for (const auto& s : r.sessions) requests += s.requests.size();
        print_diagnostics(r);
        std::cout << "events: " << r.event_count << "\nsessions: " << r.sessions.size() << "\nrequests: " << requests
                  << "\nmalformed lines: " << r.diagnostics.size() << "\nwarnings: " << r.warnings.size() << "\n";
        return r.diagnostics.empty() ? 0 : kExitInvalid;
    }

    int cmd_stats(const Globals& g, const DatasetArgs& args, const std::string& format) {
        const auto r = load_dataset(args);
        const auto lifecycle = trace::lifecycle_stats(r.sessions);
        std::vector<trace::UsageStats> usage;
        for (const auto& s : r.sessions) usage.push_back(trace::usage_stats(s));
        if (format == "json") {
            const auto j = nlohmann::json{{"lifecycle", trace::lifecycle_json(lifecycle)}, {"usage", trace::usage_json(usage)}};
            if (g.out.empty())
                std::cout << j.dump(2) << "\n";
            else
                write_text(fs::path(g.out) / "stats.json", j.dump(2) + "\n");
        } else if (g.out.empty()) {
            std::cout << trace::lifecycle_csv(lifecycle) << "\n" << trace::usage_csv(usage);
        } else {
            write_text(fs::path(g.out) / "lifecycle.csv", trace::lifecycle_csv(lifecycle));
            write_text(fs::path(g.out) / "usage.csv", trace::usage_csv(usage));
        }
        return 0;
    }

    int cmd_synth(const Globals& g, const DatasetArgs& args) {
        trace::SyntheticTraceOptions opts;
        opts.seed = args.synthetic_seed;
        opts.developers = args.synthetic_developers;
        const auto text = trace::to_jsonl(trace::synthesize_events(opts));
        if (g.out.empty())
            std::cout << text;
        else
            write_text(g.out, text);
        return 0;
    }

    int cmd_plan(const Globals& g, const DatasetArgs& dargs, const ConfigArgs& cargs, const std::string& profiles,
                 int round) {
        const auto r = load_dataset(dargs);
        const auto config = resolve_config(g, cargs);
        const auto catalog = resolve_catalog(g, profiles);
        plan::PlanOptions opts;
        opts.mean_output_tokens = catalog.model(config.model_profile).mean_output_tokens;
        auto plans = plan::build_plans(r.sessions, config, g.seed, opts);
        if (round >= 0) {
            if (round >= static_cast<int>(plans.size()))
                throw Error(ErrorKind::InvalidArgument, "round " + std::to_string(round) + " out of range");
            plans = {plans[static_cast<std::size_t>(round)]};
        }
        for (const auto& p : plans) {
            const auto text = plan::plan_to_json(p).dump(2) + "\n";
            if (g.out.empty()) {
                std::cout << text;
            } else {
                const auto name = config_key(config) + "-r" + std::to_string(p.round_index) + ".json";
                write_text(fs::path(g.out) / name, text);
                std::cerr << "wrote " << (fs::path(g.out) / name).string() << " (" << p.schedule.size()
                          << " requests, overlap " << p.overlap.start << ".." << p.overlap.end << " ms)\n";
            }
        }
        return 0;
    }

    int cmd_replay(const Globals& g, const std::string& plan_path, const std::string& endpoint,
                   const std::string& profiles, const std::vector<std::string>& meters, double timeout_s) {
        const auto plan = plan::plan_from_json(read_json(plan_path));
        replay::EngineOptions engine;
        engine.timeout_ms = timeout_s * 1000.0;
        replay::RawRunLog log;
        if (g.virtual_time) {
            log = sweep::replay_plan_virtual(plan, resolve_catalog(g, profiles), engine);
        } else {
            if (endpoint.empty()) throw Error(ErrorKind::InvalidArgument, "real-clock replay needs --endpoint host:port");
            replay::HttpEndpoint ep;
            std::tie(ep.host, ep.port) = parse_endpoint(endpoint);
            log = replay::execute(plan, ep, engine, make_samplers(meters, ep.host, ep.port, plan.config.gpu_count));
        }
        const auto metrics = energy::restrict_to_overlap(log, plan.overlap);
        const fs::path out = g.out.empty() ? fs::path(".") : fs::path(g.out);
        write_text(out / "log.json", replay::log_to_json(log).dump() + "\n");
        write_text(out / "samples.csv", energy::samples_csv(log.samples));
        write_text(out / "metrics.json", energy::metrics_to_json(metrics).dump(2) + "\n");
        std::cout << energy::metrics_csv_header() << "\n" << energy::metrics_csv_row(metrics) << "\n";
        return log.aborted ? kExitRuntime : 0;
    }

    mock::MockService* g_service = nullptr;

    int cmd_mock_serve(const Globals& g, const ConfigArgs& cargs, const std::string& profiles, const std::string& host,
                       int port) {
        const auto config = resolve_config(g, cargs);
        mock::MockService service(mock::make_server_config(resolve_catalog(g, profiles), config));
        const int bound = service.start(host, port);
        std::cout << "mock server on " << host << ":" << bound << " (" << canonical_string(config) << ")" << std::endl;
        g_service = &service;
        std::signal(SIGINT, [](int) {
            if (g_service) std::thread([] { g_service->stop(); }).detach();
        });
        std::signal(SIGTERM, [](int) {
            if (g_service) std::thread([] { g_service->stop(); }).detach();
        });
        service.wait();
        g_service = nullptr;
        return 0;
    }

    sweep::ConfigSpace resolve_space(const Globals& g, const std::vector<std::string>& pins) {
        const auto file = load_config_file(g);
        sweep::ConfigSpace space = file.contains("axes") || file.contains("pins")
                                           ? sweep::space_from_json({{"schema_version", sweep::kSweepConfigSchemaVersion},
                                                                     {"axes", file.value("axes", nlohmann::json::object())},
                                                                     {"pins", file.value("pins", nlohmann::json::object())}})
                                           : sweep::full_space();
        for (const auto& pin : pins) {
            const auto eq = pin.find('=');
            if (eq == std::string::npos) throw Error(ErrorKind::InvalidArgument, "pin must be factor=value");
            const auto name = pin.substr(0, eq);
            bool known = false;
            for (Factor f : kAllFactors)
                if (to_string(f) == name) {
                    space.pin(f, pin.substr(eq + 1));
                    known = true;
                }
            if (!known) throw Error(ErrorKind::InvalidArgument, "unknown factor '" + name + "'");
        }
        return space;
    }

    int cmd_sweep(const Globals& g, const DatasetArgs& dargs, const std::vector<std::string>& pins,
                  const std::string& profiles, bool force, int parallel, const std::string& endpoint,
                  const std::vector<std::string>& meters, bool dry_run) {
        const auto space = resolve_space(g, pins);
        const auto configs = sweep::enumerate(space);
        std::cerr << "configuration space: " << space.size() << " configurations (" << configs.size() << " unique)\n";
        if (dry_run) {
            for (const auto& c : configs) std::cout << config_key(c) << " " << canonical_string(c) << "\n";
            return 0;
        }
        if (g.out.empty()) throw Error(ErrorKind::InvalidArgument, "sweep needs --out STORE_DIR");
        if (parallel > 1 && !g.virtual_time)
            throw Error(ErrorKind::InvalidArgument, "--parallel is only allowed with --virtual-time");

        const auto data = load_dataset(dargs);
        sweep::SweepOptions opts;
        opts.seed = g.seed;
        opts.force = force;
        opts.virtual_time = g.virtual_time;
        opts.parallel = parallel;
        opts.catalog = resolve_catalog(g, profiles);
        if (!g.virtual_time) {
            if (endpoint.empty()) throw Error(ErrorKind::InvalidArgument, "real-clock sweep needs --endpoint host:port");
            replay::HttpEndpoint ep;
            std::tie(ep.host, ep.port) = parse_endpoint(endpoint);
            opts.endpoint = ep;
            opts.make_samplers = [meters, ep](const SimulationConfig& c) {
                return make_samplers(meters, ep.host, ep.port, c.gpu_count);
            };
        }
        opts.after_run = [](const sweep::RunEntry& e) {
            std::cerr << to_string(e.state) << " " << e.id.dirname() << (e.error.empty() ? "" : ": " + e.error) << "\n";
        };
        const sweep::SweepStore store(g.out);
        const auto manifest = sweep::run_sweep(space, data.sessions, store, opts);
        std::cout << "runs: " << manifest.runs.size() << ", executed: " << manifest.executed()
                  << ", complete: " << manifest.count(sweep::RunState::Complete)
                  << ", failed: " << manifest.count(sweep::RunState::Failed) << "\n";
        return manifest.count(sweep::RunState::Failed) ? kExitRuntime : 0;
    }

    sweep::SweepStore open_store(const std::string& dir) {
        if (!fs::is_directory(fs::path(dir) / "runs")) throw Error(ErrorKind::NoData, "no result store at " + dir);
        return sweep::SweepStore(dir);
    }

    int cmd_analyze(const Globals& g, const std::string& store_dir) {
        const auto store = open_store(store_dir);
        const auto report = report::build_report(store);
        for (const auto& d : report.diagnostics) std::cerr << "note: " << d << "\n";
        if (g.out.empty()) {
            std::cout << report.metrics_csv;
        } else {
            write_text(fs::path(g.out) / "metrics.csv", report.metrics_csv);
            write_text(fs::path(g.out) / "impact_ratios.csv", report.impact_csv);
        }
        return 0;
    }

    int cmd_report(const Globals& g, const std::string& store_dir) {
        const auto store = open_store(store_dir);
        const auto report = report::build_report(store);
        for (const auto& d : report.diagnostics) std::cerr << "note: " << d << "\n";
        if (g.out.empty()) {
            std::cout << report.scenario_csv;
            return 0;
        }
        const fs::path out(g.out);
        write_text(out / "scenarios.csv", report.scenario_csv);
        write_text(out / "impact_ratios.csv", report.impact_csv);
        write_text(out / "curves.csv", report.curves_csv);
        write_text(out / "metrics.csv", report.metrics_csv);
        return 0;
    }

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Replay code-assistant telemetry against a generation server and measure its energy"};
    app.require_subcommand(1);
    app.fallthrough();

    Globals g;
    app.add_option("--seed", g.seed, "Planner seed");
    app.add_flag("--virtual-time", g.virtual_time, "Replay against the in-process mock in virtual time");
    app.add_option("--config", g.config_file, "JSON config file (see docs/config_schema.md)");
    app.add_option("--out", g.out, "Output file or directory");

    DatasetArgs dataset;
    ConfigArgs config;
    std::string profiles;
    std::string format = "csv";
    int round = -1;
    std::string plan_path;
    std::string endpoint;
    std::vector<std::string> meters;
    double timeout_s = replay::kDefaultTimeoutMs / 1000.0;
    std::string host = "127.0.0.1";
    int port = 8080;
    std::vector<std::string> pins;
    bool force = false;
    bool dry_run = false;
    int parallel = 1;
    std::string store_dir;

    auto* validate = app.add_subcommand("validate", "Parse a telemetry dataset and report problems");
    add_dataset_options(validate, dataset);

    auto* stats = app.add_subcommand("stats", "Request lifecycle and per-developer usage statistics");
    add_dataset_options(stats, dataset);
    stats->add_option("--format", format, "csv or json")->check(CLI::IsMember({"csv", "json"}));

    auto* synth = app.add_subcommand("synth", "Write the synthetic telemetry dataset as JSONL");
    add_dataset_options(synth, dataset);

    auto* plan_cmd = app.add_subcommand("plan", "Build replay plans for one configuration");
    add_dataset_options(plan_cmd, dataset);
    add_config_options(plan_cmd, config);
    plan_cmd->add_option("--profiles", profiles, "Profile catalog JSON");
    plan_cmd->add_option("--round", round, "Only this round");

    auto* replay_cmd = app.add_subcommand("replay", "Execute a plan and record latency, status and power");
    replay_cmd->add_option("--plan", plan_path, "Plan JSON")->required();
    replay_cmd->add_option("--endpoint", endpoint, "host:port of the generation server (real clock)");
    replay_cmd->add_option("--profiles", profiles, "Profile catalog JSON (virtual time)");
    replay_cmd->add_option("--meter", meters, "Power meters for real-clock runs: mock, rapl, nvidia-smi");
    replay_cmd->add_option("--timeout", timeout_s, "Request timeout in seconds");

    auto* serve = app.add_subcommand("mock-serve", "Serve the batching mock over HTTP");
    add_config_options(serve, config);
    serve->add_option("--profiles", profiles, "Profile catalog JSON");
    serve->add_option("--host", host, "Bind address");
    serve->add_option("--port", port, "Port, 0 for any");

    auto* sweep_cmd = app.add_subcommand("sweep", "Run every configuration of a space into a result store");
    add_dataset_options(sweep_cmd, dataset);
    sweep_cmd->add_option("--pin", pins, "factor=value, fixes one axis");
    sweep_cmd->add_option("--profiles", profiles, "Profile catalog JSON");
    sweep_cmd->add_flag("--force", force, "Re-run complete runs");
    sweep_cmd->add_option("--parallel", parallel, "Concurrent runs (virtual time only)");
    sweep_cmd->add_option("--endpoint", endpoint, "host:port for real-clock sweeps");
    sweep_cmd->add_option("--meter", meters, "Power meters for real-clock sweeps");
    sweep_cmd->add_flag("--dry-run", dry_run, "List the configurations and exit");

    auto* analyze = app.add_subcommand("analyze", "Aggregate rounds and compute impact ratios");
    analyze->add_option("--store", store_dir, "Result store")->required();

    auto* report_cmd = app.add_subcommand("report", "Scenario table, impact ratios and energy curves");
    report_cmd->add_option("--store", store_dir, "Result store")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitInvalid;
    }

    try {
        if (*validate) return cmd_validate(dataset);
        if (*stats) return cmd_stats(g, dataset, format);
        if (*synth) return cmd_synth(g, dataset);
        if (*plan_cmd) return cmd_plan(g, dataset, config, profiles, round);
        if (*replay_cmd) return cmd_replay(g, plan_path, endpoint, profiles, meters, timeout_s);
        if (*serve) return cmd_mock_serve(g, config, profiles, host, port);
        if (*sweep_cmd) return cmd_sweep(g, dataset, pins, profiles, force, parallel, endpoint, meters, dry_run);
        if (*analyze) return cmd_analyze(g, store_dir);
        if (*report_cmd) return cmd_report(g, store_dir);
    } catch (const Error& e) {
        std::cerr << "error (" << to_string(e.kind()) << "): " << e.what() << "\n";
        switch (e.kind()) {
            case ErrorKind::Io:
            case ErrorKind::Unreachable:
            case ErrorKind::Startup: return kExitRuntime;
            default: return kExitInvalid;
        }
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "error: malformed JSON input: " << e.what() << "\n";
        return kExitInvalid;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return 0;
}
