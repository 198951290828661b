#pragma once

#include "assistbench/config.hpp"
#include "assistbench/energy_metrics.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace assistbench::replay {

// TransportError covers failures below the protocol (refused connection,
// malformed response) that are neither an overload answer nor a timeout.
enum class RequestStatus { Completed, Canceled, RejectedByServer, TimedOut, TransportError };
enum class ClockMode { Real, Virtual };

std::string_view to_string(RequestStatus status);
RequestStatus parse_request_status(std::string_view text);
std::string_view to_string(ClockMode mode);

// Times are milliseconds since the start of the run (plan offset 0).
struct RequestRecord {
    int virtual_developer = 0;
    std::string source_request_id;
    double fire_offset_ms = 0.0;
    std::optional<double> send_ms;        // absent when canceled before send
    std::optional<double> completion_ms;  // terminal time; absent for Canceled and TimedOut
    std::optional<double> cancel_ms;
    RequestStatus status = RequestStatus::Completed;
    int tokens_generated = 0;
    int round = 0;
    double jitter_ms = 0.0;  // send_ms - fire_offset_ms
    std::string error;

    // [send, completion or cancel or timeout]; nullopt when never sent.
    std::optional<std::pair<double, double>> in_flight_interval() const;
    std::optional<double> latency_ms() const;

    bool operator==(const RequestRecord&) const = default;
};

struct RawRunLog {
    SimulationConfig config;
    std::uint64_t seed = 0;
    int round = 0;
    ClockMode clock = ClockMode::Virtual;
    double start_ms = 0.0;
    double end_ms = 0.0;
    bool aborted = false;
    std::string abort_reason;
    double timeout_ms = 0.0;
    std::vector<RequestRecord> records;  // one per scheduled request, schedule order
    std::vector<energy::PowerSample> samples;

    bool operator==(const RawRunLog&) const = default;
};

// Samples are not part of the JSON form; they travel as samples_csv.
nlohmann::json log_to_json(const RawRunLog& log);
RawRunLog log_from_json(const nlohmann::json& j);

inline constexpr int kRunLogSchemaVersion = 1;

}  // namespace assistbench::replay
