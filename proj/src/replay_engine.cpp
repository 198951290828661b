#include "assistbench/replay_engine.hpp"

#include "assistbench/error.hpp"
#include "assistbench/protocol.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <chrono>
#include <cmath>
#include <limits>
#include <queue>
#include <thread>
#include <unordered_map>

namespace assistbench::replay {

std::string_view to_string(RequestStatus status) {
    switch (status) {
        case RequestStatus::Completed: return "completed";
        case RequestStatus::Canceled: return "canceled";
        case RequestStatus::RejectedByServer: return "rejected";
        case RequestStatus::TimedOut: return "timed-out";
        case RequestStatus::TransportError: return "transport-error";
    }
    return "completed";
}

RequestStatus parse_request_status(std::string_view text) {
    for (auto s : {RequestStatus::Completed, RequestStatus::Canceled, RequestStatus::RejectedByServer,
                   RequestStatus::TimedOut, RequestStatus::TransportError})
        if (to_string(s) == text) return s;
    throw Error(ErrorKind::InvalidArgument, "unknown request status: " + std::string(text));
}

std::string_view to_string(ClockMode mode) { return mode == ClockMode::Real ? "real" : "virtual"; }

std::optional<std::pair<double, double>> RequestRecord::in_flight_interval() const {
    if (!send_ms) return std::nullopt;
    double end = *send_ms;
    if (completion_ms)
        end = *completion_ms;
    else if (cancel_ms)
        end = *cancel_ms;
    return std::make_pair(*send_ms, end);
}

std::optional<double> RequestRecord::latency_ms() const {
    if (status != RequestStatus::Completed || !send_ms || !completion_ms) return std::nullopt;
    return *completion_ms - *send_ms;
}

namespace {

    nlohmann::json optional_number(const std::optional<double>& v) {
        return v ? nlohmann::json(*v) : nlohmann::json();
    }

    std::optional<double> read_optional(const nlohmann::json& j, const char* key) {
        if (!j.contains(key) || j[key].is_null()) return std::nullopt;
        return j[key].get<double>();
    }

}  // namespace

nlohmann::json log_to_json(const RawRunLog& log) {
    nlohmann::json records = nlohmann::json::array();
    for (const auto& r : log.records) {
        nlohmann::json jr = {{"developer", r.virtual_developer},
                             {"request_id", r.source_request_id},
                             {"fire_offset_ms", r.fire_offset_ms},
                             {"send_ms", optional_number(r.send_ms)},
                             {"completion_ms", optional_number(r.completion_ms)},
                             {"cancel_ms", optional_number(r.cancel_ms)},
                             {"status", to_string(r.status)},
                             {"tokens", r.tokens_generated},
                             {"round", r.round},
                             {"jitter_ms", r.jitter_ms}};
        if (!r.error.empty()) jr["error"] = r.error;
        records.push_back(std::move(jr));
    }
    nlohmann::json j = {{"schema_version", kRunLogSchemaVersion},
                        {"config", log.config},
                        {"seed", log.seed},
                        {"round", log.round},
                        {"clock", to_string(log.clock)},
                        {"start_ms", log.start_ms},
                        {"end_ms", log.end_ms},
                        {"aborted", log.aborted},
                        {"timeout_ms", log.timeout_ms},
                        {"records", std::move(records)}};
    if (!log.abort_reason.empty()) j["abort_reason"] = log.abort_reason;
    return j;
}

RawRunLog log_from_json(const nlohmann::json& j) {
    if (j.value("schema_version", 0) != kRunLogSchemaVersion)
        throw Error(ErrorKind::InvalidArgument, "unsupported run log schema_version");
    RawRunLog log;
    log.config = j.at("config").get<SimulationConfig>();
    log.seed = j.at("seed").get<std::uint64_t>();
    log.round = j.value("round", 0);
    log.clock = j.value("clock", "virtual") == "real" ? ClockMode::Real : ClockMode::Virtual;
    log.start_ms = j.value("start_ms", 0.0);
    log.end_ms = j.value("end_ms", 0.0);
    log.aborted = j.value("aborted", false);
    log.abort_reason = j.value("abort_reason", "");
    log.timeout_ms = j.value("timeout_ms", 0.0);
    for (const auto& jr : j.at("records")) {
        RequestRecord r;
        r.virtual_developer = jr.at("developer").get<int>();
        r.source_request_id = jr.at("request_id").get<std::string>();
        r.fire_offset_ms = jr.at("fire_offset_ms").get<double>();
        r.send_ms = read_optional(jr, "send_ms");
        r.completion_ms = read_optional(jr, "completion_ms");
        r.cancel_ms = read_optional(jr, "cancel_ms");
        r.status = parse_request_status(jr.at("status").get<std::string>());
        r.tokens_generated = jr.value("tokens", 0);
        r.round = jr.value("round", 0);
        r.jitter_ms = jr.value("jitter_ms", 0.0);
        r.error = jr.value("error", "");
        log.records.push_back(std::move(r));
    }
    return log;
}

RequestTracker::RequestTracker(std::size_t count) : slots_(count) {}

void RequestTracker::init_record(std::size_t index, RequestRecord record) {
    std::lock_guard lock(mutex_);
    slots_.at(index).record = std::move(record);
}

bool RequestTracker::begin_send(std::size_t index, double now_ms) {
    std::lock_guard lock(mutex_);
    auto& slot = slots_.at(index);
    if (slot.phase != Phase::Pending) return false;
    slot.phase = Phase::InFlight;
    slot.record.send_ms = now_ms;
    slot.record.jitter_ms = now_ms - slot.record.fire_offset_ms;
    return true;
}

bool RequestTracker::finish(std::size_t index, RequestStatus status, double now_ms, int tokens, std::string error) {
    std::lock_guard lock(mutex_);
    auto& slot = slots_.at(index);
    if (slot.phase == Phase::Terminal) {
        // Tokens keep arriving until the aborted transport notices.
        if (slot.record.status == RequestStatus::Canceled)
            slot.record.tokens_generated = std::max(slot.record.tokens_generated, tokens);
        return false;
    }
    slot.phase = Phase::Terminal;
    slot.abort = nullptr;
    auto& r = slot.record;
    r.status = status;
    r.tokens_generated = tokens;
    r.error = std::move(error);
    if (status == RequestStatus::TimedOut || status == RequestStatus::Canceled)
        r.cancel_ms = now_ms;
    else
        r.completion_ms = now_ms;
    return true;
}

bool RequestTracker::cancel(std::size_t index, double now_ms) {
    std::lock_guard lock(mutex_);
    auto& slot = slots_.at(index);
    if (slot.phase == Phase::Terminal) return false;
    slot.phase = Phase::Terminal;
    slot.cancel_requested = true;
    slot.record.status = RequestStatus::Canceled;
    slot.record.cancel_ms = now_ms;
    // Called under the lock so the worker cannot destroy its client meanwhile.
    if (slot.abort) slot.abort();
    slot.abort = nullptr;
    return true;
}

void RequestTracker::set_abort(std::size_t index, std::function<void()> abort) {
    std::lock_guard lock(mutex_);
    auto& slot = slots_.at(index);
    if (!abort || slot.phase == Phase::InFlight) slot.abort = std::move(abort);
}

bool RequestTracker::cancel_requested(std::size_t index) const {
    std::lock_guard lock(mutex_);
    return slots_.at(index).cancel_requested;
}

RequestTracker::Phase RequestTracker::phase(std::size_t index) const {
    std::lock_guard lock(mutex_);
    return slots_.at(index).phase;
}

RequestRecord RequestTracker::record(std::size_t index) const {
    std::lock_guard lock(mutex_);
    return slots_.at(index).record;
}

std::vector<RequestRecord> RequestTracker::records() const {
    std::lock_guard lock(mutex_);
    std::vector<RequestRecord> out;
    out.reserve(slots_.size());
    for (const auto& s : slots_) out.push_back(s.record);
    return out;
}

namespace {

    RawRunLog empty_log(const plan::ReplayPlan& plan, ClockMode clock, const EngineOptions& options) {
        RawRunLog log;
        log.config = plan.config;
        log.seed = plan.seed;
        log.round = plan.round_index;
        log.clock = clock;
        log.timeout_ms = options.timeout_ms;
        log.records.reserve(plan.schedule.size());
        for (const auto& s : plan.schedule) {
            RequestRecord r;
            r.virtual_developer = s.virtual_developer;
            r.source_request_id = s.source_request_id;
            r.fire_offset_ms = static_cast<double>(s.fire_offset);
            r.round = plan.round_index;
            log.records.push_back(std::move(r));
        }
        return log;
    }

    void validate_options(const EngineOptions& options) {
        if (!(options.timeout_ms > 0.0)) throw Error(ErrorKind::InvalidArgument, "timeout must be > 0");
        if (!(options.sample_interval_ms > 0.0))
            throw Error(ErrorKind::InvalidArgument, "sample interval must be > 0");
    }

}  // namespace

RawRunLog execute(const plan::ReplayPlan& plan, mock::BatchingServer& server, const EngineOptions& options) {
    validate_options(options);
    if (server.now() != 0.0 || server.admitted() != 0)
        throw Error(ErrorKind::InvalidArgument, "virtual replay needs a fresh server");

    constexpr double inf = std::numeric_limits<double>::infinity();
    const bool streaming = plan.config.streaming == StreamingMode::StreamWithCancel;
    RawRunLog log = empty_log(plan, ClockMode::Virtual, options);
    auto& records = log.records;
    const auto& schedule = plan.schedule;

    std::vector<bool> live(schedule.size(), false);
    std::size_t live_count = 0;
    std::unordered_map<int, std::size_t> latest;  // developer -> most recent live request
    using Deadline = std::pair<double, std::size_t>;
    std::priority_queue<Deadline, std::vector<Deadline>, std::greater<>> deadlines;

    auto settle = [&](std::size_t idx) {
        live[idx] = false;
        --live_count;
        auto it = latest.find(records[idx].virtual_developer);
        if (it != latest.end() && it->second == idx) latest.erase(it);
    };
    auto tokens_of = [&](std::size_t idx) {
        auto info = server.info(idx);
        return info ? info->tokens : 0;
    };
    auto abort_live = [&](std::size_t idx, RequestStatus status, double t) {
        const int tokens = tokens_of(idx);
        server.cancel_sequence(idx, t);
        records[idx].status = status;
        records[idx].cancel_ms = t;
        records[idx].tokens_generated = tokens;
        settle(idx);
    };

    std::size_t next_fire = 0;
    std::uint64_t tick = 0;
    double t = 0.0;
    for (;;) {
        while (!deadlines.empty() && !live[deadlines.top().second]) deadlines.pop();
        const double t_fire = next_fire < schedule.size() ? static_cast<double>(schedule[next_fire].fire_offset) : inf;
        const double t_deadline = deadlines.empty() ? inf : deadlines.top().first;
        const double t_work = std::min({t_fire, server.next_boundary(), t_deadline});
        if (t_work == inf) break;

        const double t_tick = static_cast<double>(tick) * options.sample_interval_ms;
        if (t_tick < t_work) {
            server.advance_to(t_tick);
            log.samples.push_back({t_tick, server.power_now(), energy::PowerSource::Simulated});
            ++tick;
            continue;
        }

        t = t_work;
        for (const auto& done : server.advance_to(t)) {
            const auto idx = static_cast<std::size_t>(done.id);
            if (!live[idx]) continue;
            records[idx].status = RequestStatus::Completed;
            records[idx].completion_ms = done.time_ms;
            records[idx].tokens_generated = done.tokens;
            settle(idx);
        }
        while (!deadlines.empty() && deadlines.top().first <= t) {
            const auto idx = deadlines.top().second;
            deadlines.pop();
            if (live[idx]) abort_live(idx, RequestStatus::TimedOut, t);
        }
        while (next_fire < schedule.size() && static_cast<double>(schedule[next_fire].fire_offset) <= t) {
            const auto idx = next_fire++;
            const auto& req = schedule[idx];
            if (streaming) {
                auto it = latest.find(req.virtual_developer);
                if (it != latest.end()) abort_live(it->second, RequestStatus::Canceled, t);
            }
            records[idx].send_ms = t;
            const int prompt_tokens = mock::estimate_prompt_tokens(req.prompt.size());
            if (server.submit(idx, prompt_tokens, req.max_new_tokens, t) == mock::Admission::Rejected) {
                records[idx].status = RequestStatus::RejectedByServer;
                records[idx].completion_ms = t;
                continue;
            }
            live[idx] = true;
            ++live_count;
            latest[req.virtual_developer] = idx;
            deadlines.push({t + options.timeout_ms, idx});
        }
        if (t_tick == t) {
            log.samples.push_back({t, server.power_now(), energy::PowerSource::Simulated});
            ++tick;
        }
    }
    if (live_count != 0) throw std::logic_error("virtual replay ended with live requests");

    log.start_ms = 0.0;
    log.end_ms = t;
    if (log.samples.empty() || log.samples.back().timestamp_ms < t)
        log.samples.push_back({t, server.power_now(), energy::PowerSource::Simulated});
    return log;
}

RawRunLog execute_virtual(const plan::ReplayPlan& plan, const mock::ServerConfig& config,
                          const EngineOptions& options) {
    mock::BatchingServer server(config);
    server.set_keep_history(false);
    return execute(plan, server, options);
}

namespace {

    using Clock = std::chrono::steady_clock;

    double since(Clock::time_point origin) {
        return std::chrono::duration<double, std::milli>(Clock::now() - origin).count();
    }

    bool probe(const HttpEndpoint& endpoint) {
        httplib::Client client(endpoint.host, endpoint.port);
        client.set_connection_timeout(2, 0);
        client.set_read_timeout(2, 0);
        auto res = client.Get(endpoint.health_path);
        return static_cast<bool>(res);
    }

    struct Outcome {
        RequestStatus status = RequestStatus::TransportError;
        int tokens = 0;
        std::string error;
        bool connection_failed = false;
    };

    Outcome send_one(const HttpEndpoint& endpoint, const plan::ScheduledRequest& req, bool stream, double timeout_ms,
                     RequestTracker& tracker, std::size_t idx, Clock::time_point sent_at) {
        httplib::Client client(endpoint.host, endpoint.port);
        client.set_connection_timeout(5, 0);
        const auto timeout = std::chrono::duration_cast<std::chrono::microseconds>(
                std::chrono::duration<double, std::milli>(timeout_ms));
        client.set_read_timeout(timeout);
        client.set_keep_alive(false);
        tracker.set_abort(idx, [&client] { client.stop(); });

        httplib::Request http;
        http.method = "POST";
        http.path = endpoint.generate_path;
        for (const auto& [k, v] : endpoint.headers) http.headers.emplace(k, v);
        http.set_header("Content-Type", "application/json");
        if (stream) http.set_header("Accept", "text/event-stream");
        http.body = nlohmann::json{{"prompt", req.prompt}, {"max_new_tokens", req.max_new_tokens}, {"stream", stream}}
                            .dump();

        int status = 0;
        bool timed_out = false;
        bool done = false;
        int tokens = 0;
        std::string body;
        protocol::SseReader reader;
        http.response_handler = [&](const httplib::Response& r) {
            status = r.status;
            return true;
        };
        http.content_receiver = [&](const char* data, std::size_t len, std::uint64_t, std::uint64_t) {
            if (tracker.cancel_requested(idx)) return false;
            if (std::chrono::duration<double, std::milli>(Clock::now() - sent_at).count() >= timeout_ms) {
                timed_out = true;
                return false;
            }
            if (status != 200 || !stream) {
                body.append(data, len);
                return true;
            }
            for (const auto& payload : reader.feed({data, len})) {
                auto frame = nlohmann::json::parse(payload, nullptr, false);
                if (frame.is_discarded()) continue;
                if (frame.value("done", false)) {
                    done = true;
                    tokens = frame.value("tokens", tokens);
                } else if (frame.contains("token")) {
                    ++tokens;
                }
            }
            return true;
        };

        httplib::Response response;
        httplib::Error error = httplib::Error::Success;
        const bool ok = client.send(http, response, error);
        tracker.set_abort(idx, nullptr);

        Outcome out;
        out.tokens = tokens;
        if (tracker.cancel_requested(idx)) {
            out.status = RequestStatus::Canceled;
            return out;
        }
        if (timed_out || (error == httplib::Error::Read && since(sent_at) >= timeout_ms)) {
            out.status = RequestStatus::TimedOut;
            return out;
        }
        if (!ok) {
            out.error = httplib::to_string(error);
            out.connection_failed = error == httplib::Error::Connection;
            return out;
        }
        if (status == protocol::kOverloadedStatus) {
            out.status = RequestStatus::RejectedByServer;
            return out;
        }
        if (status != 200) {
            out.error = "HTTP " + std::to_string(status);
            return out;
        }
        if (stream) {
            if (!done) {
                out.error = "stream ended without a done frame";
                return out;
            }
        } else {
            auto j = nlohmann::json::parse(body, nullptr, false);
            if (j.is_discarded() || !j.contains("tokens")) {
                out.error = "malformed generation response";
                return out;
            }
            out.tokens = j["tokens"].get<int>();
        }
        out.status = RequestStatus::Completed;
        return out;
    }

}  // namespace

RawRunLog execute(const plan::ReplayPlan& plan, const HttpEndpoint& endpoint, const EngineOptions& options,
                  std::vector<std::unique_ptr<energy::PowerSampler>> samplers) {
    validate_options(options);
    if (!probe(endpoint))
        throw Error(ErrorKind::Unreachable,
                    "endpoint " + endpoint.host + ":" + std::to_string(endpoint.port) + " is unreachable");

    RawRunLog log = empty_log(plan, ClockMode::Real, options);
    const auto& schedule = plan.schedule;
    const bool stream = plan.config.streaming == StreamingMode::StreamWithCancel;
    RequestTracker tracker(schedule.size());
    for (std::size_t i = 0; i < schedule.size(); ++i) tracker.init_record(i, log.records[i]);

    const auto origin = Clock::now();
    energy::PeriodicSampler sampler(std::move(samplers), options.sample_interval_ms, origin);
    sampler.start();

    std::atomic<bool> abort_run{false};
    std::vector<std::thread> workers;
    std::unordered_map<int, std::size_t> latest;
    std::size_t fired = 0;
    for (; fired < schedule.size() && !abort_run; ++fired) {
        const auto& req = schedule[fired];
        std::this_thread::sleep_until(origin + std::chrono::duration_cast<Clock::duration>(
                                                       std::chrono::milliseconds(req.fire_offset)));
        if (stream) {
            auto it = latest.find(req.virtual_developer);
            if (it != latest.end()) tracker.cancel(it->second, since(origin));
            latest[req.virtual_developer] = fired;
        }
        workers.emplace_back([&, idx = fired] {
            const auto sent_at = Clock::now();
            if (!tracker.begin_send(idx, since(origin))) return;
            Outcome out = send_one(endpoint, schedule[idx], stream, options.timeout_ms, tracker, idx, sent_at);
            tracker.finish(idx, out.status, since(origin), out.tokens, out.error);
            if (out.connection_failed && !probe(endpoint)) abort_run = true;
        });
    }
    for (auto& w : workers) w.join();
    sampler.stop();

    log.records = tracker.records();
    for (std::size_t i = fired; i < schedule.size(); ++i) {
        log.records[i].status = RequestStatus::TransportError;
        log.records[i].error = "run aborted";
    }
    if (abort_run) {
        log.aborted = true;
        log.abort_reason = "endpoint became unreachable";
    }
    log.start_ms = 0.0;
    log.end_ms = since(origin);
    log.samples = sampler.samples();
    return log;
}

}  // namespace assistbench::replay
