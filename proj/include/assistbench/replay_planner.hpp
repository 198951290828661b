#pragma once

#include "assistbench/config.hpp"
#include "assistbench/trace_model.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace assistbench::plan {

using trace::DeveloperSession;
using trace::Millis;

inline constexpr Millis kDefaultWindow = 3'600'000;
inline constexpr Millis kMaxDuplicateOffset = 30'000;

struct ScheduledRequest {
    int virtual_developer = 0;
    std::string source_request_id;
    Millis fire_offset = 0;
    bool cancels_previous = false;
    std::string prompt;
    int max_new_tokens = 1;

    bool operator==(const ScheduledRequest&) const = default;
};

// Window during which every virtual developer is active:
// [latest first request, earliest last request].
struct OverlapWindow {
    Millis start = 0;
    Millis end = 0;

    bool empty() const { return end <= start; }
    bool contains(Millis t) const { return t >= start && t <= end; }
    bool operator==(const OverlapWindow&) const = default;
};

struct VirtualDeveloper {
    int id = 0;
    std::string source_developer;
    Millis offset = 0;       // duplicate shift, 0 for originals
    bool duplicate = false;  // n > K replica of an already-included session
    bool padding = false;    // fills the last round when K is not a multiple of n

    bool operator==(const VirtualDeveloper&) const = default;
};

struct ReplayPlan {
    SimulationConfig config;
    std::uint64_t seed = 0;
    int round_index = 0;
    int round_count = 1;
    Millis window = kDefaultWindow;
    OverlapWindow overlap;
    std::vector<VirtualDeveloper> developers;
    std::vector<ScheduledRequest> schedule;  // sorted by (fire_offset, developer, request id)

    bool operator==(const ReplayPlan&) const = default;
};

struct PlanOptions {
    Millis window = kDefaultWindow;
    Millis max_duplicate_offset = kMaxDuplicateOffset;
    // Centre of the seeded output-length draw for requests whose trace has
    // no token count; normally the model profile's mean.
    double mean_output_tokens = 40.0;
};

// Truncates to [0, window) and delays shorter sessions so every session's
// midpoint lands on window / 2. Sessions left without requests are dropped
// and reported through `warnings` when given.
std::vector<DeveloperSession> align_sessions(const std::vector<DeveloperSession>& sessions, Millis window,
                                             std::vector<std::string>* warnings = nullptr);

struct VirtualSession {
    VirtualDeveloper developer;
    std::size_t source_index = 0;
};

// n <= K: ceil(K / n) rounds of n sessions; every source is a non-padding
// member of exactly one round (identity when n == K). n > K: one round with
// all K sources followed by n - K duplicates drawn with replacement, each
// shifted by a uniform offset in [0, max_offset] ms.
std::vector<std::vector<VirtualSession>> expand_developers(std::size_t source_count, int n, std::uint64_t seed,
                                                           Millis max_offset = kMaxDuplicateOffset);

std::vector<DeveloperSession> filter_trigger(const std::vector<DeveloperSession>& sessions, TriggerMode mode);

// Number of rounds build_plans will emit for this input.
int round_count(const std::vector<DeveloperSession>& sessions, const SimulationConfig& config,
                const PlanOptions& options = {});

// filter_trigger -> align_sessions -> expand_developers, one plan per round.
// Throws Error(PlanEmpty) when a round ends up with no requests.
std::vector<ReplayPlan> build_plans(const std::vector<DeveloperSession>& sessions, const SimulationConfig& config,
                                    std::uint64_t seed, const PlanOptions& options = {});

ReplayPlan build_plan(const std::vector<DeveloperSession>& sessions, const SimulationConfig& config,
                      std::uint64_t seed, int round, const PlanOptions& options = {});

// Deterministic output length for a request lacking one in the trace.
int draw_output_tokens(std::uint64_t seed, const std::string& request_id, double mean_output_tokens);

nlohmann::json plan_to_json(const ReplayPlan& plan);
ReplayPlan plan_from_json(const nlohmann::json& j);

inline constexpr int kPlanSchemaVersion = 1;

}  // namespace assistbench::plan
