#pragma once

// Hand-built plans and log checks shared by engine tests and acceptance.

#include "assistbench/replay_planner.hpp"
#include "assistbench/run_log.hpp"

#include <algorithm>
#include <map>
#include <random>
#include <vector>

namespace fixture {

struct Fire {
    int developer;
    assistbench::trace::Millis at;
    int tokens;
};

inline assistbench::plan::ReplayPlan make_plan(std::vector<Fire> fires, assistbench::StreamingMode streaming) {
    using namespace assistbench;
    plan::ReplayPlan p;
    p.config.streaming = streaming;
    p.config.developers = 0;
    std::sort(fires.begin(), fires.end(), [](const Fire& a, const Fire& b) {
        return a.at != b.at ? a.at < b.at : a.developer < b.developer;
    });
    std::map<int, int> seen;
    for (const auto& f : fires) {
        plan::ScheduledRequest s;
        s.virtual_developer = f.developer;
        const int n = seen[f.developer]++;
        s.source_request_id = "d" + std::to_string(f.developer) + "-" + std::to_string(1000 + n);
        s.fire_offset = f.at;
        s.cancels_previous = streaming == StreamingMode::StreamWithCancel && n > 0;
        s.prompt = "prompt";
        s.max_new_tokens = f.tokens;
        p.schedule.push_back(s);
    }
    for (const auto& [dev, count] : seen) {
        p.developers.push_back({dev, "src" + std::to_string(dev), 0, false, false});
        (void)count;
    }
    p.config.developers = static_cast<int>(seen.size());
    p.overlap = {0, p.schedule.empty() ? 0 : p.schedule.back().fire_offset};
    return p;
}

// Random bursty workload: each developer fires clusters of requests.
inline assistbench::plan::ReplayPlan random_plan(std::mt19937_64& rng, assistbench::StreamingMode streaming,
                                                 int max_developers = 8, int max_requests = 25) {
    std::vector<Fire> fires;
    const int devs = std::uniform_int_distribution<int>(1, max_developers)(rng);
    for (int d = 0; d < devs; ++d) {
        const int n = std::uniform_int_distribution<int>(1, max_requests)(rng);
        assistbench::trace::Millis t = std::uniform_int_distribution<assistbench::trace::Millis>(0, 2000)(rng);
        for (int i = 0; i < n; ++i) {
            fires.push_back({d, t, std::uniform_int_distribution<int>(1, 80)(rng)});
            t += std::uniform_int_distribution<assistbench::trace::Millis>(0, 1500)(rng);
        }
    }
    return make_plan(std::move(fires), streaming);
}

// Largest number of simultaneously in-flight requests of any one developer.
// Intervals are half-open: a request ending at t does not overlap one sent at t.
inline int max_in_flight_per_developer(const assistbench::replay::RawRunLog& log) {
    std::map<int, std::vector<std::pair<double, int>>> edges;
    for (const auto& r : log.records) {
        const auto interval = r.in_flight_interval();
        if (!interval || interval->second <= interval->first) continue;
        edges[r.virtual_developer].push_back({interval->first, +1});
        edges[r.virtual_developer].push_back({interval->second, -1});
    }
    int worst = 0;
    for (auto& [dev, e] : edges) {
        std::sort(e.begin(), e.end());  // -1 sorts before +1 at equal times
        int live = 0;
        for (const auto& [t, d] : e) worst = std::max(worst, live += d);
    }
    return worst;
}

}  // namespace fixture
