#pragma once

// Telemetry parsing, request lifecycle reconstruction and usage statistics.
//
// Canonical telemetry schema (one JSON object per line, UTF-8):
//
//   {
//     "event_id":     string,            required, unique within a developer
//     "developer_id": string,            required
//     "timestamp_ms": integer >= 0,      required, ms since session start
//     "kind":         string,            required, see EventKind below
//     "request_id":   string,            required for every kind
//     "payload":      object,            optional
//     "session_duration_ms": integer,    optional, on any line
//   }
//
// kind is one of "request_issued", "generation_shown", "accepted",
// "rejected", "canceled", "still_in_code". Recognised payload keys:
//   request_issued:   prompt (string), max_new_tokens (int)
//   generation_shown: suggestion (string), output_tokens (int)
//   accepted:         suggestion (string, used when no shown event carried it)
//   still_in_code:    retained (bool) or code_region (string)
//
// docs/telemetry_schema.md carries the full description and the mapping
// applied by the Copilot telemetry adapter.

#include <nlohmann/json.hpp>

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace assistbench::trace {

using Millis = std::int64_t;

enum class EventKind { RequestIssued, GenerationShown, Accepted, Rejected, Canceled, StillInCode };

std::string_view to_string(EventKind kind);
std::optional<EventKind> parse_event_kind(std::string_view text);

struct TelemetryEvent {
    std::string event_id;
    std::string developer_id;
    Millis timestamp = 0;
    EventKind kind = EventKind::RequestIssued;
    std::string request_id;
    nlohmann::json payload = nlohmann::json::object();
    std::optional<Millis> session_duration;

    bool operator==(const TelemetryEvent&) const = default;
};

// Session order: (timestamp, event_id).
bool event_order_less(const TelemetryEvent& a, const TelemetryEvent& b);

enum class RequestOutcome { Canceled, Empty, DisplayedRejected, Accepted, Kept };

inline constexpr std::size_t kOutcomeCount = 5;

std::string_view to_string(RequestOutcome outcome);
bool is_displayed(RequestOutcome outcome);

struct GenerationRequest {
    std::string request_id;
    std::string developer_id;
    Millis issue_time = 0;
    std::string prompt;
    std::optional<int> max_new_tokens;
    std::optional<int> output_tokens;
    RequestOutcome outcome = RequestOutcome::Canceled;
    std::optional<Millis> latency_observed;
    std::optional<std::string> suggestion;
};

struct DeveloperSession {
    std::string developer_id;
    std::vector<GenerationRequest> requests;
    Millis session_duration = 0;
};

struct Diagnostic {
    std::size_t line = 0;  // 1-based; 0 when not tied to an input line
    std::string message;
};

enum class InputSchema { Canonical, CopilotTelemetry };

struct ParseOptions {
    InputSchema schema = InputSchema::Canonical;
    // Developer id for adapter input whose records do not name one.
    std::string default_developer;
};

struct EventParseResult {
    std::vector<TelemetryEvent> events;
    std::vector<Diagnostic> diagnostics;
    std::size_t skipped = 0;  // valid JSON the adapter does not map
};

struct ParseResult {
    std::vector<DeveloperSession> sessions;
    std::vector<Diagnostic> diagnostics;  // malformed lines
    std::vector<Diagnostic> warnings;     // orphan or late events, dropped sessions
    std::size_t event_count = 0;
};

// Line-oriented event parsing; never throws on malformed lines.
EventParseResult parse_events(std::istream& in, const ParseOptions& options = {});

// Maps one adapter-schema record onto the canonical event; nullopt when the
// record is not a generation-lifecycle message.
std::optional<TelemetryEvent> adapt_copilot_record(const nlohmann::json& record, const ParseOptions& options);

// Throws Error(Io) when the stream is unreadable, Error(EmptyDataset) when
// no valid events were found.
ParseResult parse_dataset(std::istream& in, const ParseOptions& options = {});
ParseResult parse_dataset_file(const std::string& path, const ParseOptions& options = {});
// Files are parsed concurrently, then merged as one dataset.
ParseResult parse_dataset_files(std::span<const std::string> paths, const ParseOptions& options = {});

// Groups already-parsed events by developer and reconstructs each session.
ParseResult sessions_from_events(std::vector<TelemetryEvent> events);

struct ReconstructResult {
    std::vector<GenerationRequest> requests;
    std::vector<Diagnostic> warnings;
};

// Events must belong to one developer session and be in session order.
//
// Every request_issued event yields one request. A request with no terminal
// event before the developer's next request_issued event is Canceled; events
// for it arriving after that point are reported as late and ignored. Terminal
// events for unknown request ids are orphan warnings.
ReconstructResult reconstruct_requests(std::span<const TelemetryEvent> events);

std::string to_json_line(const TelemetryEvent& event);
std::string to_jsonl(std::span<const TelemetryEvent> events);
std::optional<TelemetryEvent> event_from_json(const nlohmann::json& j, std::string* error = nullptr);

struct LifecycleBreakdown {
    std::size_t total = 0;
    std::size_t counts[kOutcomeCount] = {};
    double percentages[kOutcomeCount] = {};

    std::size_t count(RequestOutcome outcome) const { return counts[static_cast<std::size_t>(outcome)]; }
    double percent(RequestOutcome outcome) const { return percentages[static_cast<std::size_t>(outcome)]; }
    // Aggregates: displayed includes accepted and kept; accepted includes kept.
    std::size_t displayed() const;
    std::size_t accepted() const;
    std::size_t kept() const;
    double displayed_percent() const;
    double accepted_percent() const;
    double kept_percent() const;
};

LifecycleBreakdown lifecycle_stats(std::span<const DeveloperSession> sessions);

// Whitespace tokenisation over UTF-8 text; every Unicode White_Space code
// point separates words.
std::vector<std::string_view> split_words(std::string_view text);

// Levenshtein distance over word tokens.
std::size_t word_edit_distance(std::string_view a, std::string_view b);

// A suggestion is retained while its normalised word edit distance to the
// current code region stays below 0.5. Throws UndefinedRetention for an
// empty suggestion.
bool retention_check(std::string_view suggestion, std::string_view current_code_region);

inline constexpr double kRetentionThreshold = 0.5;

struct UsageStats {
    std::string developer_id;
    std::size_t requests = 0;
    std::size_t shown = 0;
    std::size_t accepted = 0;
    double session_minutes = 0.0;
    double requests_per_minute = 0.0;
    double accepted_per_shown = 0.0;  // 0 when nothing was shown
    double accepted_per_total = 0.0;
};

// Throws InvalidArgument for a zero-duration session.
UsageStats usage_stats(const DeveloperSession& session);

std::string lifecycle_csv(const LifecycleBreakdown& stats);
nlohmann::json lifecycle_json(const LifecycleBreakdown& stats);
std::string usage_csv(std::span<const UsageStats> rows);
nlohmann::json usage_json(std::span<const UsageStats> rows);

}  // namespace assistbench::trace
