#include "assistbench/error.hpp"
#include "assistbench/replay_planner.hpp"
#include "assistbench/synthetic_traces.hpp"

#include <doctest.h>

#include <algorithm>
#include <set>

using namespace assistbench;
using namespace assistbench::plan;
using trace::RequestOutcome;

namespace {

    constexpr Millis kMinute = 60'000;

    DeveloperSession session(const std::string& id, Millis duration, std::vector<Millis> issue_times,
                             RequestOutcome outcome = RequestOutcome::Accepted) {
        DeveloperSession s;
        s.developer_id = id;
        s.session_duration = duration;
        int n = 0;
        for (Millis t : issue_times) {
            trace::GenerationRequest r;
            r.request_id = id + "-" + std::to_string(n++);
            r.developer_id = id;
            r.issue_time = t;
            r.outcome = outcome;
            r.output_tokens = 20;
            s.requests.push_back(r);
        }
        return s;
    }

}  // namespace

TEST_CASE("alignment puts every midpoint at half the window") {
    const std::vector<DeveloperSession> in = {
            session("sixty", 60 * kMinute, {0, 30 * kMinute}),
            session("fifty", 50 * kMinute, {0, 49 * kMinute}),
            session("forty", 40 * kMinute, {0}),
            session("ninety", 90 * kMinute, {10, 59 * kMinute, 61 * kMinute}),
    };
    const auto out = align_sessions(in, 60 * kMinute);
    REQUIRE(out.size() == 4);
    CHECK(out[0].requests[0].issue_time == 0);
    CHECK(out[1].requests[0].issue_time == 5 * kMinute);
    CHECK(out[1].requests[1].issue_time == 54 * kMinute);
    CHECK(out[2].requests[0].issue_time == 10 * kMinute);
    // Truncated to the first hour.
    CHECK(out[3].requests.size() == 2);
    CHECK(out[3].session_duration == 60 * kMinute);
}

TEST_CASE("alignment drops sessions left without requests") {
    std::vector<std::string> warnings;
    const auto out = align_sessions({session("late", 90 * kMinute, {70 * kMinute})}, 60 * kMinute, &warnings);
    CHECK(out.empty());
    CHECK(warnings.size() == 1);
    CHECK_THROWS_AS(align_sessions({}, 0), Error);
}

TEST_CASE("expansion below the source count covers every session once") {
    const auto rounds = expand_developers(20, 2, 7);
    REQUIRE(rounds.size() == 10);
    std::multiset<std::size_t> seen;
    for (const auto& r : rounds) {
        CHECK(r.size() == 2);
        for (const auto& vs : r) seen.insert(vs.source_index);
    }
    for (std::size_t i = 0; i < 20; ++i) CHECK(seen.count(i) == 1);
}

TEST_CASE("expansion pads the last round when n does not divide K") {
    const auto rounds = expand_developers(20, 3, 7);
    REQUIRE(rounds.size() == 7);
    std::multiset<std::size_t> real;
    for (const auto& r : rounds) {
        std::set<std::size_t> in_round;
        for (const auto& vs : r) {
            CHECK(in_round.insert(vs.source_index).second);
            if (!vs.developer.padding) real.insert(vs.source_index);
        }
    }
    for (std::size_t i = 0; i < 20; ++i) CHECK(real.count(i) == 1);
}

TEST_CASE("expansion at the source count is the identity") {
    const auto rounds = expand_developers(20, 20, 99);
    REQUIRE(rounds.size() == 1);
    for (std::size_t i = 0; i < 20; ++i) {
        CHECK(rounds[0][i].source_index == i);
        CHECK(rounds[0][i].developer.offset == 0);
        CHECK_FALSE(rounds[0][i].developer.duplicate);
    }
}

TEST_CASE("expansion above the source count adds shifted duplicates") {
    const auto a = expand_developers(20, 30, 1234);
    const auto b = expand_developers(20, 30, 1234);
    REQUIRE(a.size() == 1);
    REQUIRE(a[0].size() == 30);
    for (std::size_t i = 0; i < 30; ++i) {
        CHECK(a[0][i].source_index == b[0][i].source_index);
        CHECK(a[0][i].developer == b[0][i].developer);
        if (i < 20) {
            CHECK(a[0][i].source_index == i);
            CHECK_FALSE(a[0][i].developer.duplicate);
        } else {
            CHECK(a[0][i].developer.duplicate);
            CHECK(a[0][i].developer.offset >= 0);
            CHECK(a[0][i].developer.offset <= kMaxDuplicateOffset);
        }
    }
}

TEST_CASE("manual trigger keeps displayed requests only") {
    auto s = session("d", 60 * kMinute, {0, 1000, 2000});
    s.requests[0].outcome = RequestOutcome::Canceled;
    s.requests[1].outcome = RequestOutcome::Empty;
    const std::vector<DeveloperSession> in{s};
    const auto manual = filter_trigger(in, TriggerMode::ManualEmulated);
    REQUIRE(manual.size() == 1);
    REQUIRE(manual[0].requests.size() == 1);
    CHECK(manual[0].requests[0].issue_time == 2000);
    const auto automatic = filter_trigger(in, TriggerMode::Automatic);
    CHECK(automatic[0].requests.size() == 3);
}

TEST_CASE("single developer no-stream plan equals the aligned trace") {
    const std::vector<DeveloperSession> in{session("d", 50 * kMinute, {0, 1500, 9000})};
    SimulationConfig cfg;
    cfg.developers = 1;
    cfg.streaming = StreamingMode::NoStream;
    const auto plan = build_plan(in, cfg, 3, 0);
    REQUIRE(plan.schedule.size() == 3);
    const auto aligned = align_sessions(in, kDefaultWindow);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(plan.schedule[i].fire_offset == aligned[0].requests[i].issue_time);
        CHECK_FALSE(plan.schedule[i].cancels_previous);
        CHECK(plan.schedule[i].max_new_tokens == 20);
    }
}

TEST_CASE("streaming marks every request after a developer's first") {
    const std::vector<DeveloperSession> in{session("d", 60 * kMinute, {0, 1500, 9000})};
    SimulationConfig cfg;
    cfg.developers = 1;
    const auto plan = build_plan(in, cfg, 3, 0);
    CHECK_FALSE(plan.schedule[0].cancels_previous);
    CHECK(plan.schedule[1].cancels_previous);
    CHECK(plan.schedule[2].cancels_previous);
}

TEST_CASE("overlap of a sixty and a fifty minute session starts at minute five") {
    const std::vector<DeveloperSession> in{
            session("a", 60 * kMinute, {0, 59 * kMinute}),
            session("b", 50 * kMinute, {0, 50 * kMinute - 1}),
    };
    SimulationConfig cfg;
    cfg.developers = 2;
    const auto plan = build_plan(in, cfg, 1, 0);
    CHECK(plan.overlap.start == 5 * kMinute);
    CHECK(plan.overlap.end == 55 * kMinute - 1);
}

TEST_CASE("an empty schedule is a plan-empty error") {
    const std::vector<DeveloperSession> in{session("d", 60 * kMinute, {0}, RequestOutcome::Canceled)};
    SimulationConfig cfg;
    cfg.trigger = TriggerMode::ManualEmulated;
    try {
        build_plans(in, cfg, 1);
        FAIL("expected PlanEmpty");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::PlanEmpty);
    }
}

TEST_CASE("plans are deterministic, sorted and round-trip through JSON") {
    const auto sessions = trace::synthesize_sessions({.developers = 8, .seed = 3});
    for (int n : {1, 3, 8, 13}) {
        SimulationConfig cfg;
        cfg.developers = n;
        const auto a = build_plans(sessions, cfg, 77);
        const auto b = build_plans(sessions, cfg, 77);
        CHECK(a == b);
        CHECK(static_cast<int>(a.size()) == round_count(sessions, cfg));
        for (const auto& p : a) {
            CHECK(plan_to_json(p).dump() == plan_to_json(b[static_cast<std::size_t>(p.round_index)]).dump());
            CHECK(plan_from_json(plan_to_json(p)) == p);
            CHECK(std::is_sorted(p.schedule.begin(), p.schedule.end(), [](const auto& x, const auto& y) {
                return std::tie(x.fire_offset, x.virtual_developer, x.source_request_id) <
                       std::tie(y.fire_offset, y.virtual_developer, y.source_request_id);
            }));
            std::set<int> with_requests;
            for (const auto& s : p.schedule) {
                CHECK(s.fire_offset >= 0);
                CHECK(s.fire_offset < p.window);
                with_requests.insert(s.virtual_developer);
            }
            CHECK(with_requests.size() == p.developers.size());
        }
    }
}

TEST_CASE("manual schedules are subsets of automatic ones") {
    const auto sessions = trace::synthesize_sessions({.developers = 5, .seed = 9});
    SimulationConfig cfg;
    cfg.developers = 5;
    cfg.trigger = TriggerMode::Automatic;
    const auto automatic = build_plan(sessions, cfg, 4, 0);
    cfg.trigger = TriggerMode::ManualEmulated;
    const auto manual = build_plan(sessions, cfg, 4, 0);
    std::set<std::pair<std::string, Millis>> all;
    for (const auto& s : automatic.schedule) all.insert({s.source_request_id, s.fire_offset});
    CHECK(manual.schedule.size() < automatic.schedule.size());
    for (const auto& s : manual.schedule) CHECK(all.count({s.source_request_id, s.fire_offset}) == 1);
}

TEST_CASE("output length draw is seeded") {
    const int a = draw_output_tokens(5, "req", 150);
    CHECK(a == draw_output_tokens(5, "req", 150));
    CHECK(a >= 75);
    CHECK(a <= 225);
}
