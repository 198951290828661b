#pragma once

#include "assistbench/trace_model.hpp"

#include <cstdint>
#include <vector>

namespace assistbench::trace {

// Generator for telemetry with the shape of a one-hour assisted coding task:
// typing bursts in which each new request supersedes the previous one,
// followed by a pause where the last suggestion is shown and possibly
// accepted. Output is canonical-schema events, deterministic in the seed.
struct SyntheticTraceOptions {
    int developers = 20;
    std::uint64_t seed = 20240607;
    double min_requests_per_minute = 1.9;
    double max_requests_per_minute = 14.7;
    // Session lengths: this many developers run past one hour, this many
    // finish within 40 minutes, the rest land in between.
    int long_sessions = 5;
    int short_sessions = 6;
    double mean_burst_size = 2.5;
    double tail_empty_probability = 0.25;
    double inner_empty_probability = 0.10;
    double accept_probability = 0.37;
    double keep_probability = 0.77;
    int min_prompt_chars = 120;
    int max_prompt_chars = 600;
};

std::vector<TelemetryEvent> synthesize_events(const SyntheticTraceOptions& options = {});

// synthesize_events followed by sessions_from_events.
std::vector<DeveloperSession> synthesize_sessions(const SyntheticTraceOptions& options = {});

}  // namespace assistbench::trace
