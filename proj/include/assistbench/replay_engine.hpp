#pragma once

// Replays a plan against a generation endpoint.
//
// Virtual clock: the plan runs against an in-process BatchingServer and time
// jumps from event to event (fires, batching-step ends, timeouts, power
// ticks), so a run is exact and reproducible.
//
// Real clock: a dispatcher thread fires each request at its offset over HTTP,
// one worker thread per request. Firing jitter is recorded per request.

#include "assistbench/mock_server.hpp"
#include "assistbench/power_samplers.hpp"
#include "assistbench/replay_planner.hpp"
#include "assistbench/run_log.hpp"

#include <atomic>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

namespace assistbench::replay {

inline constexpr double kDefaultTimeoutMs = 300'000.0;
inline constexpr double kJitterTargetMs = 10.0;

struct EngineOptions {
    double timeout_ms = kDefaultTimeoutMs;
    double sample_interval_ms = 100.0;
};

struct HttpEndpoint {
    std::string host = "127.0.0.1";
    int port = 8080;
    std::string generate_path = "/v1/generate";
    std::string health_path = "/v1/power";
    std::vector<std::pair<std::string, std::string>> headers;  // passed through verbatim
};

// Per-request lifecycle shared between the dispatcher and the worker
// threads. cancel() before send makes the request never leave; during flight
// it aborts the transport; after a terminal status it does nothing.
class RequestTracker {
  public:
    enum class Phase { Pending, InFlight, Terminal };

    explicit RequestTracker(std::size_t count);

    // Pending -> InFlight. False when the request was canceled first.
    bool begin_send(std::size_t index, double now_ms);
    // Terminal transition; ignored when the request is already terminal.
    bool finish(std::size_t index, RequestStatus status, double now_ms, int tokens, std::string error = {});
    bool cancel(std::size_t index, double now_ms);

    // Installed by the worker while the request is on the wire; invoked by
    // cancel() to close the connection. An empty function uninstalls it.
    void set_abort(std::size_t index, std::function<void()> abort);
    bool cancel_requested(std::size_t index) const;

    Phase phase(std::size_t index) const;
    RequestRecord record(std::size_t index) const;
    std::vector<RequestRecord> records() const;
    void init_record(std::size_t index, RequestRecord record);

  private:
    struct Slot {
        Phase phase = Phase::Pending;
        bool cancel_requested = false;
        RequestRecord record;
        std::function<void()> abort;
    };
    mutable std::mutex mutex_;
    std::vector<Slot> slots_;
};

// Virtual-clock run. The server is driven exclusively by this call and is
// left in its final state so callers can inspect its step log.
RawRunLog execute(const plan::ReplayPlan& plan, mock::BatchingServer& server, const EngineOptions& options = {});

// Convenience overload that builds a fresh server from `config`.
RawRunLog execute_virtual(const plan::ReplayPlan& plan, const mock::ServerConfig& config,
                          const EngineOptions& options = {});

// Real-clock run over HTTP. Throws Error(Unreachable) when the endpoint does
// not answer before the run starts; later transport failures are recorded
// per request. `samplers` are polled for the duration of the run.
RawRunLog execute(const plan::ReplayPlan& plan, const HttpEndpoint& endpoint, const EngineOptions& options = {},
                  std::vector<std::unique_ptr<energy::PowerSampler>> samplers = {});

}  // namespace assistbench::replay
