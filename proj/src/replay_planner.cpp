#include "assistbench/replay_planner.hpp"

#include "assistbench/error.hpp"
#include "assistbench/rng.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace assistbench::plan {

std::vector<DeveloperSession> align_sessions(const std::vector<DeveloperSession>& sessions, Millis window,
                                             std::vector<std::string>* warnings) {
    if (window <= 0) throw Error(ErrorKind::InvalidArgument, "alignment window must be positive");
    std::vector<DeveloperSession> out;
    out.reserve(sessions.size());
    for (const auto& session : sessions) {
        DeveloperSession aligned;
        aligned.developer_id = session.developer_id;
        if (session.session_duration >= window) {
            for (const auto& req : session.requests)
                if (req.issue_time < window) aligned.requests.push_back(req);
            aligned.session_duration = window;
        } else {
            const Millis shift = (window - session.session_duration) / 2;
            aligned.requests = session.requests;
            for (auto& req : aligned.requests) req.issue_time += shift;
            aligned.session_duration = shift + session.session_duration;
        }
        if (aligned.requests.empty()) {
            if (warnings) warnings->push_back("session " + session.developer_id + " has no requests in the window; dropped");
            continue;
        }
        out.push_back(std::move(aligned));
    }
    return out;
}

std::vector<std::vector<VirtualSession>> expand_developers(std::size_t source_count, int n, std::uint64_t seed,
                                                           Millis max_offset) {
    if (source_count == 0 || n < 1) throw Error(ErrorKind::InvalidArgument, "expand_developers needs K >= 1 and n >= 1");
    const auto k = source_count;
    const auto un = static_cast<std::size_t>(n);
    Rng rng(seed ^ 0x5eed0fdeULL);
    std::vector<std::vector<VirtualSession>> rounds;

    if (un <= k) {
        std::vector<std::size_t> order(k);
        std::iota(order.begin(), order.end(), std::size_t{0});
        if (un < k)
            for (std::size_t i = k - 1; i > 0; --i)
                std::swap(order[i], order[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i)))]);
        const std::size_t round_total = (k + un - 1) / un;
        for (std::size_t r = 0; r < round_total; ++r) {
            std::vector<VirtualSession> round;
            for (std::size_t slot = 0; slot < un; ++slot) {
                const std::size_t pos = r * un + slot;
                VirtualSession vs;
                vs.developer.id = static_cast<int>(slot);
                if (pos < k) {
                    vs.source_index = order[pos];
                } else {
                    // Fill from sessions outside this round, without repeats.
                    std::vector<std::size_t> pool(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(r * un));
                    for (const auto& taken : round) std::erase(pool, taken.source_index);
                    vs.source_index = pool[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(pool.size()) - 1))];
                    vs.developer.padding = true;
                }
                round.push_back(vs);
            }
            rounds.push_back(std::move(round));
        }
        return rounds;
    }

    std::vector<VirtualSession> round;
    for (std::size_t i = 0; i < k; ++i) {
        VirtualSession vs;
        vs.developer.id = static_cast<int>(i);
        vs.source_index = i;
        round.push_back(vs);
    }
    for (std::size_t i = k; i < un; ++i) {
        VirtualSession vs;
        vs.developer.id = static_cast<int>(i);
        vs.source_index = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(k) - 1));
        vs.developer.duplicate = true;
        vs.developer.offset = rng.uniform_int(0, max_offset);
        round.push_back(vs);
    }
    rounds.push_back(std::move(round));
    return rounds;
}

std::vector<DeveloperSession> filter_trigger(const std::vector<DeveloperSession>& sessions, TriggerMode mode) {
    if (mode == TriggerMode::Automatic) return sessions;
    std::vector<DeveloperSession> out;
    for (const auto& session : sessions) {
        DeveloperSession kept{session.developer_id, {}, session.session_duration};
        for (const auto& req : session.requests)
            if (trace::is_displayed(req.outcome)) kept.requests.push_back(req);
        if (!kept.requests.empty()) out.push_back(std::move(kept));
    }
    return out;
}

int draw_output_tokens(std::uint64_t seed, const std::string& request_id, double mean_output_tokens) {
    Rng rng(fnv1a64(request_id, splitmix64(seed)));
    const double lo = std::max(1.0, std::floor(mean_output_tokens * 0.5));
    const double hi = std::max(lo, std::floor(mean_output_tokens * 1.5));
    return static_cast<int>(rng.uniform_int(static_cast<std::int64_t>(lo), static_cast<std::int64_t>(hi)));
}

namespace {

    struct Prepared {
        std::vector<DeveloperSession> sessions;
        std::vector<std::vector<VirtualSession>> rounds;
    };

    Prepared prepare(const std::vector<DeveloperSession>& sessions, const SimulationConfig& config, std::uint64_t seed,
                     const PlanOptions& options) {
        if (config.developers < 1) throw Error(ErrorKind::InvalidArgument, "developers must be >= 1");
        Prepared p;
        p.sessions = align_sessions(filter_trigger(sessions, config.trigger), options.window);
        if (p.sessions.empty()) throw Error(ErrorKind::PlanEmpty, "no session has requests after filtering");
        p.rounds = expand_developers(p.sessions.size(), config.developers, seed, options.max_duplicate_offset);
        return p;
    }

    int token_budget(const trace::GenerationRequest& req, std::uint64_t seed, double mean_output_tokens) {
        int tokens = req.output_tokens ? *req.output_tokens : draw_output_tokens(seed, req.request_id, mean_output_tokens);
        if (req.max_new_tokens && !req.output_tokens) tokens = std::min(tokens, *req.max_new_tokens);
        return std::max(tokens, 1);
    }

    ReplayPlan assemble(const Prepared& p, const SimulationConfig& config, std::uint64_t seed, int round,
                        const PlanOptions& options) {
        ReplayPlan plan;
        plan.config = config;
        plan.seed = seed;
        plan.round_index = round;
        plan.round_count = static_cast<int>(p.rounds.size());
        plan.window = options.window;

        const bool streaming = config.streaming == StreamingMode::StreamWithCancel;
        Millis overlap_start = 0;
        Millis overlap_end = options.window;
        for (const auto& vs : p.rounds[static_cast<std::size_t>(round)]) {
            const auto& session = p.sessions[vs.source_index];
            VirtualDeveloper dev = vs.developer;
            dev.source_developer = session.developer_id;
            bool first = true;
            Millis first_fire = 0;
            Millis last_fire = 0;
            for (const auto& req : session.requests) {
                const Millis fire = req.issue_time + dev.offset;
                if (fire >= options.window) break;
                ScheduledRequest s;
                s.virtual_developer = dev.id;
                s.source_request_id = req.request_id;
                s.fire_offset = fire;
                s.cancels_previous = streaming && !first;
                s.prompt = req.prompt;
                s.max_new_tokens = token_budget(req, seed, options.mean_output_tokens);
                plan.schedule.push_back(std::move(s));
                if (first) first_fire = fire;
                last_fire = fire;
                first = false;
            }
            if (first) continue;  // shifted entirely past the window
            overlap_start = std::max(overlap_start, first_fire);
            overlap_end = std::min(overlap_end, last_fire);
            plan.developers.push_back(std::move(dev));
        }
        if (plan.schedule.empty())
            throw Error(ErrorKind::PlanEmpty, "round " + std::to_string(round) + " has an empty schedule");
        std::sort(plan.schedule.begin(), plan.schedule.end(), [](const ScheduledRequest& a, const ScheduledRequest& b) {
            if (a.fire_offset != b.fire_offset) return a.fire_offset < b.fire_offset;
            if (a.virtual_developer != b.virtual_developer) return a.virtual_developer < b.virtual_developer;
            return a.source_request_id < b.source_request_id;
        });
        plan.overlap = {overlap_start, overlap_end};
        return plan;
    }

}  // namespace

int round_count(const std::vector<DeveloperSession>& sessions, const SimulationConfig& config,
                const PlanOptions& options) {
    const auto k = align_sessions(filter_trigger(sessions, config.trigger), options.window).size();
    if (k == 0) return 0;
    const auto n = static_cast<std::size_t>(std::max(config.developers, 1));
    return n <= k ? static_cast<int>((k + n - 1) / n) : 1;
}

std::vector<ReplayPlan> build_plans(const std::vector<DeveloperSession>& sessions, const SimulationConfig& config,
                                    std::uint64_t seed, const PlanOptions& options) {
    const auto prepared = prepare(sessions, config, seed, options);
    std::vector<ReplayPlan> plans;
    for (int r = 0; r < static_cast<int>(prepared.rounds.size()); ++r)
        plans.push_back(assemble(prepared, config, seed, r, options));
    return plans;
}

ReplayPlan build_plan(const std::vector<DeveloperSession>& sessions, const SimulationConfig& config,
                      std::uint64_t seed, int round, const PlanOptions& options) {
    const auto prepared = prepare(sessions, config, seed, options);
    if (round < 0 || round >= static_cast<int>(prepared.rounds.size()))
        throw Error(ErrorKind::InvalidArgument, "round " + std::to_string(round) + " out of range");
    return assemble(prepared, config, seed, round, options);
}

nlohmann::json plan_to_json(const ReplayPlan& plan) {
    nlohmann::json j;
    j["schema_version"] = kPlanSchemaVersion;
    j["config"] = plan.config;
    j["seed"] = plan.seed;
    j["round_index"] = plan.round_index;
    j["round_count"] = plan.round_count;
    j["window_ms"] = plan.window;
    j["overlap_window_ms"] = {plan.overlap.start, plan.overlap.end};
    auto& devs = j["developers"] = nlohmann::json::array();
    for (const auto& d : plan.developers)
        devs.push_back({{"id", d.id},
                        {"source_developer", d.source_developer},
                        {"offset_ms", d.offset},
                        {"duplicate", d.duplicate},
                        {"padding", d.padding}});
    // Prompts are stored once per source request; duplicates reference them.
    std::map<std::string, std::string> prompts;
    auto& schedule = j["schedule"] = nlohmann::json::array();
    for (const auto& s : plan.schedule) {
        prompts.emplace(s.source_request_id, s.prompt);
        schedule.push_back({{"developer", s.virtual_developer},
                            {"request_id", s.source_request_id},
                            {"fire_offset_ms", s.fire_offset},
                            {"cancels_previous", s.cancels_previous},
                            {"max_new_tokens", s.max_new_tokens}});
    }
    j["prompts"] = prompts;
    return j;
}

ReplayPlan plan_from_json(const nlohmann::json& j) {
    if (j.value("schema_version", 0) != kPlanSchemaVersion)
        throw Error(ErrorKind::InvalidArgument, "unsupported plan schema_version");
    ReplayPlan plan;
    plan.config = j.at("config").get<SimulationConfig>();
    plan.seed = j.at("seed").get<std::uint64_t>();
    plan.round_index = j.at("round_index").get<int>();
    plan.round_count = j.at("round_count").get<int>();
    plan.window = j.at("window_ms").get<Millis>();
    plan.overlap = {j.at("overlap_window_ms").at(0).get<Millis>(), j.at("overlap_window_ms").at(1).get<Millis>()};
    for (const auto& d : j.at("developers"))
        plan.developers.push_back({d.at("id").get<int>(), d.at("source_developer").get<std::string>(),
                                   d.at("offset_ms").get<Millis>(), d.at("duplicate").get<bool>(),
                                   d.at("padding").get<bool>()});
    const auto& prompts = j.at("prompts");
    for (const auto& s : j.at("schedule")) {
        ScheduledRequest r;
        r.virtual_developer = s.at("developer").get<int>();
        r.source_request_id = s.at("request_id").get<std::string>();
        r.fire_offset = s.at("fire_offset_ms").get<Millis>();
        r.cancels_previous = s.at("cancels_previous").get<bool>();
        r.max_new_tokens = s.at("max_new_tokens").get<int>();
        r.prompt = prompts.at(r.source_request_id).get<std::string>();
        plan.schedule.push_back(std::move(r));
    }
    return plan;
}

}  // namespace assistbench::plan
