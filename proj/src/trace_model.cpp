#include "assistbench/trace_model.hpp"

#include "assistbench/error.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <future>
#include <istream>
#include <map>
#include <sstream>
#include <unordered_map>

namespace assistbench::trace {

namespace {

    constexpr std::string_view kKindNames[] = {
            "request_issued", "generation_shown", "accepted", "rejected", "canceled", "still_in_code",
    };

    constexpr std::string_view kOutcomeNames[] = {
            "canceled", "empty", "displayed_rejected", "accepted", "kept",
    };

    std::optional<std::string> optional_string(const nlohmann::json& obj, const char* key) {
        if (!obj.is_object()) return std::nullopt;
        auto it = obj.find(key);
        if (it == obj.end() || !it->is_string()) return std::nullopt;
        return it->get<std::string>();
    }

    std::optional<int> optional_int(const nlohmann::json& obj, const char* key) {
        if (!obj.is_object()) return std::nullopt;
        auto it = obj.find(key);
        if (it == obj.end() || !it->is_number()) return std::nullopt;
        return static_cast<int>(it->get<double>());
    }

    // Byte length of the White_Space code point starting at text[pos], 0 if none.
    std::size_t whitespace_length(std::string_view text, std::size_t pos) {
        const auto byte = [&](std::size_t i) -> unsigned char {
            return i < text.size() ? static_cast<unsigned char>(text[i]) : 0;
        };
        const unsigned char c0 = byte(pos);
        if (c0 == 0x20 || (c0 >= 0x09 && c0 <= 0x0D)) return 1;
        if (c0 == 0xC2) {
            const unsigned char c1 = byte(pos + 1);
            return (c1 == 0x85 || c1 == 0xA0) ? 2 : 0;
        }
        if (c0 == 0xE1) return (byte(pos + 1) == 0x9A && byte(pos + 2) == 0x80) ? 3 : 0;
        if (c0 == 0xE2) {
            const unsigned char c1 = byte(pos + 1);
            const unsigned char c2 = byte(pos + 2);
            if (c1 == 0x80 && ((c2 >= 0x80 && c2 <= 0x8A) || c2 == 0xA8 || c2 == 0xA9 || c2 == 0xAF)) return 3;
            if (c1 == 0x81 && c2 == 0x9F) return 3;
            return 0;
        }
        if (c0 == 0xE3) return (byte(pos + 1) == 0x80 && byte(pos + 2) == 0x80) ? 3 : 0;
        return 0;
    }

    // Days since 1970-01-01 for a proleptic Gregorian date.
    std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
        y -= m <= 2;
        const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
        const auto yoe = static_cast<unsigned>(y - era * 400);
        const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
        const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
        return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
    }

    // "YYYY-MM-DDTHH:MM:SS[.fff][Z]" -> epoch milliseconds.
    std::optional<Millis> parse_iso8601_ms(const std::string& text) {
        int year = 0, month = 0, day = 0, hour = 0, minute = 0;
        double second = 0.0;
        if (std::sscanf(text.c_str(), "%d-%d-%dT%d:%d:%lf", &year, &month, &day, &hour, &minute, &second) != 6)
            return std::nullopt;
        const std::int64_t days = days_from_civil(year, static_cast<unsigned>(month), static_cast<unsigned>(day));
        const double ms = (static_cast<double>(days) * 86400.0 + hour * 3600.0 + minute * 60.0 + second) * 1000.0;
        return static_cast<Millis>(ms + 0.5);
    }

    enum class State { Pending, Canceled, Empty, Displayed, Rejected, Accepted };

    struct Tracking {
        State state = State::Pending;
        bool sealed = false;
        std::optional<bool> retained;
    };

    bool blank(std::string_view text) { return split_words(text).empty(); }

    // Adapter timestamps are absolute; shift each developer to start at 0.
    void rebase_to_session_start(std::vector<TelemetryEvent>& events) {
        std::map<std::string, Millis> first;
        for (const auto& ev : events) {
            auto [it, inserted] = first.emplace(ev.developer_id, ev.timestamp);
            if (!inserted) it->second = std::min(it->second, ev.timestamp);
        }
        for (auto& ev : events) ev.timestamp -= first[ev.developer_id];
    }

}  // namespace

std::string_view to_string(EventKind kind) { return kKindNames[static_cast<std::size_t>(kind)]; }

std::optional<EventKind> parse_event_kind(std::string_view text) {
    for (std::size_t i = 0; i < std::size(kKindNames); ++i)
        if (kKindNames[i] == text) return static_cast<EventKind>(i);
    return std::nullopt;
}

bool event_order_less(const TelemetryEvent& a, const TelemetryEvent& b) {
    if (a.timestamp != b.timestamp) return a.timestamp < b.timestamp;
    return a.event_id < b.event_id;
}

std::string_view to_string(RequestOutcome outcome) { return kOutcomeNames[static_cast<std::size_t>(outcome)]; }

bool is_displayed(RequestOutcome outcome) {
    return outcome == RequestOutcome::DisplayedRejected || outcome == RequestOutcome::Accepted ||
           outcome == RequestOutcome::Kept;
}

std::optional<TelemetryEvent> event_from_json(const nlohmann::json& j, std::string* error) {
    const auto fail = [&](std::string message) -> std::optional<TelemetryEvent> {
        if (error) *error = std::move(message);
        return std::nullopt;
    };
    if (!j.is_object()) return fail("line is not a JSON object");

    TelemetryEvent ev;
    auto event_id = optional_string(j, "event_id");
    auto developer = optional_string(j, "developer_id");
    auto request = optional_string(j, "request_id");
    auto kind = optional_string(j, "kind");
    if (!event_id) return fail("missing string field 'event_id'");
    if (!developer) return fail("missing string field 'developer_id'");
    if (!request) return fail("missing string field 'request_id'");
    if (!kind) return fail("missing string field 'kind'");
    auto ts = j.find("timestamp_ms");
    if (ts == j.end() || !ts->is_number_integer()) return fail("missing integer field 'timestamp_ms'");
    if (ts->get<Millis>() < 0) return fail("negative timestamp_ms");
    auto parsed_kind = parse_event_kind(*kind);
    if (!parsed_kind) return fail("unknown kind '" + *kind + "'");

    ev.event_id = std::move(*event_id);
    ev.developer_id = std::move(*developer);
    ev.request_id = std::move(*request);
    ev.timestamp = ts->get<Millis>();
    ev.kind = *parsed_kind;
    if (auto p = j.find("payload"); p != j.end()) {
        if (!p->is_object()) return fail("'payload' must be an object");
        ev.payload = *p;
    }
    if (auto d = j.find("session_duration_ms"); d != j.end()) {
        if (!d->is_number_integer() || d->get<Millis>() < 0)
            return fail("'session_duration_ms' must be a non-negative integer");
        ev.session_duration = d->get<Millis>();
    }
    return ev;
}

std::string to_json_line(const TelemetryEvent& event) {
    nlohmann::json j{
            {"event_id", event.event_id},
            {"developer_id", event.developer_id},
            {"timestamp_ms", event.timestamp},
            {"kind", to_string(event.kind)},
            {"request_id", event.request_id},
            {"payload", event.payload},
    };
    if (event.session_duration) j["session_duration_ms"] = *event.session_duration;
    return j.dump();
}

std::string to_jsonl(std::span<const TelemetryEvent> events) {
    std::string out;
    for (const auto& ev : events) {
        out += to_json_line(ev);
        out += '\n';
    }
    return out;
}

std::optional<TelemetryEvent> adapt_copilot_record(const nlohmann::json& record, const ParseOptions& options) {
    if (!record.is_object()) return std::nullopt;
    std::string name;
    for (const char* key : {"event", "name", "eventName"})
        if (auto v = optional_string(record, key)) {
            name = *v;
            break;
        }
    const auto dot = name.rfind("ghostText.");
    if (dot == std::string::npos) return std::nullopt;
    const std::string suffix = name.substr(dot + std::string_view("ghostText.").size());

    const nlohmann::json empty = nlohmann::json::object();
    const nlohmann::json& props = record.contains("properties") ? record["properties"] : empty;
    const nlohmann::json& measures = record.contains("measurements") ? record["measurements"] : empty;

    TelemetryEvent ev;
    nlohmann::json payload = nlohmann::json::object();
    if (suffix == "issued") {
        ev.kind = EventKind::RequestIssued;
        if (auto prompt = optional_string(props, "prompt")) payload["prompt"] = *prompt;
        if (auto max_tokens = optional_int(measures, "maxTokens")) payload["max_new_tokens"] = *max_tokens;
    } else if (suffix == "shown" || suffix == "displayed") {
        ev.kind = EventKind::GenerationShown;
        if (auto text = optional_string(props, "completionText")) payload["suggestion"] = *text;
        if (auto tokens = optional_int(measures, "numTokens")) payload["output_tokens"] = *tokens;
    } else if (suffix == "empty") {
        ev.kind = EventKind::GenerationShown;
        payload["suggestion"] = "";
    } else if (suffix == "accepted") {
        ev.kind = EventKind::Accepted;
        if (auto text = optional_string(props, "completionText")) payload["suggestion"] = *text;
    } else if (suffix == "rejected") {
        ev.kind = EventKind::Rejected;
    } else if (suffix == "canceled" || suffix == "cancelled") {
        ev.kind = EventKind::Canceled;
    } else if (suffix == "stillInCode") {
        ev.kind = EventKind::StillInCode;
        if (auto region = optional_string(props, "codeRegion")) payload["code_region"] = *region;
        if (props.is_object() && props.contains("stillInCode")) {
            const auto& v = props["stillInCode"];
            payload["retained"] = v.is_boolean() ? v.get<bool>() : (v.is_string() && v.get<std::string>() == "true");
        }
    } else {
        return std::nullopt;
    }

    std::string request_id;
    for (const char* key : {"headerRequestId", "requestId", "completionId"})
        if (auto v = optional_string(props, key)) {
            request_id = *v;
            break;
        }
    if (request_id.empty()) return std::nullopt;
    ev.request_id = std::move(request_id);

    if (auto dev = optional_string(record, "developer_id")) ev.developer_id = *dev;
    else ev.developer_id = options.default_developer;
    if (ev.developer_id.empty()) return std::nullopt;

    if (auto it = record.find("timestamp"); it != record.end()) {
        if (it->is_number()) ev.timestamp = static_cast<Millis>(it->get<double>());
        else if (it->is_string()) {
            auto ms = parse_iso8601_ms(it->get<std::string>());
            if (!ms) return std::nullopt;
            ev.timestamp = *ms;
        } else return std::nullopt;
    } else {
        return std::nullopt;
    }

    if (auto id = optional_string(record, "id")) ev.event_id = *id;
    else ev.event_id = ev.request_id + ":" + suffix;
    ev.payload = std::move(payload);
    return ev;
}

EventParseResult parse_events(std::istream& in, const ParseOptions& options) {
    EventParseResult result;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (blank(line)) continue;
        nlohmann::json j = nlohmann::json::parse(line, nullptr, /*allow_exceptions=*/false);
        if (j.is_discarded()) {
            result.diagnostics.push_back({line_no, "malformed JSON"});
            continue;
        }
        if (options.schema == InputSchema::Canonical) {
            std::string error;
            if (auto ev = event_from_json(j, &error)) result.events.push_back(std::move(*ev));
            else result.diagnostics.push_back({line_no, error});
        } else {
            if (auto ev = adapt_copilot_record(j, options)) {
                if (ev->event_id.empty()) ev->event_id = "line-" + std::to_string(line_no);
                result.events.push_back(std::move(*ev));
            } else {
                ++result.skipped;
            }
        }
    }
    if (in.bad()) throw Error(ErrorKind::Io, "failed while reading telemetry stream");
    return result;
}

ReconstructResult reconstruct_requests(std::span<const TelemetryEvent> events) {
    ReconstructResult out;
    std::vector<Tracking> tracking;
    std::unordered_map<std::string, std::size_t> by_id;
    std::vector<std::size_t> open;

    const auto warn = [&](const TelemetryEvent& ev, std::string what) {
        out.warnings.push_back({0, what + " (request " + ev.request_id + ", event " + ev.event_id + ")"});
    };

    for (const auto& ev : events) {
        if (ev.kind == EventKind::RequestIssued) {
            for (std::size_t idx : open) {
                tracking[idx].state = State::Canceled;
                tracking[idx].sealed = true;
            }
            open.clear();
            if (by_id.count(ev.request_id)) {
                warn(ev, "duplicate request_issued ignored");
                continue;
            }
            GenerationRequest req;
            req.request_id = ev.request_id;
            req.developer_id = ev.developer_id;
            req.issue_time = ev.timestamp;
            req.prompt = optional_string(ev.payload, "prompt").value_or("");
            req.max_new_tokens = optional_int(ev.payload, "max_new_tokens");
            by_id.emplace(ev.request_id, out.requests.size());
            out.requests.push_back(std::move(req));
            tracking.push_back({});
            open.push_back(out.requests.size() - 1);
            continue;
        }

        auto found = by_id.find(ev.request_id);
        if (found == by_id.end()) {
            warn(ev, std::string("orphan ") + std::string(to_string(ev.kind)) + " event");
            continue;
        }
        const std::size_t idx = found->second;
        auto& t = tracking[idx];
        auto& req = out.requests[idx];
        if (t.sealed) {
            warn(ev, "late event for superseded request ignored");
            continue;
        }

        const bool terminal = ev.kind != EventKind::StillInCode;
        switch (ev.kind) {
            case EventKind::GenerationShown: {
                auto text = optional_string(ev.payload, "suggestion");
                if (text && blank(*text)) {
                    t.state = State::Empty;
                    req.suggestion.reset();
                } else {
                    if (t.state == State::Pending || t.state == State::Canceled || t.state == State::Empty)
                        t.state = State::Displayed;
                    if (text) req.suggestion = *text;
                }
                if (!req.latency_observed) req.latency_observed = ev.timestamp - req.issue_time;
                if (auto tokens = optional_int(ev.payload, "output_tokens")) req.output_tokens = *tokens;
                break;
            }
            case EventKind::Accepted:
                t.state = State::Accepted;
                if (auto text = optional_string(ev.payload, "suggestion"); text && !req.suggestion)
                    req.suggestion = *text;
                break;
            case EventKind::Rejected: t.state = State::Rejected; break;
            case EventKind::Canceled:
                if (t.state == State::Pending || t.state == State::Empty) t.state = State::Canceled;
                else if (t.state == State::Displayed) t.state = State::Rejected;
                break;
            case EventKind::StillInCode: {
                if (t.state != State::Accepted) {
                    warn(ev, "still_in_code probe for a request that was not accepted");
                    break;
                }
                auto region = optional_string(ev.payload, "code_region");
                if (region && req.suggestion && !blank(*req.suggestion)) {
                    t.retained = retention_check(*req.suggestion, *region);
                } else if (ev.payload.contains("retained") && ev.payload["retained"].is_boolean()) {
                    t.retained = ev.payload["retained"].get<bool>();
                }
                break;
            }
            case EventKind::RequestIssued: break;
        }
        if (terminal) std::erase(open, idx);
    }

    for (std::size_t i = 0; i < out.requests.size(); ++i) {
        auto& req = out.requests[i];
        const auto& t = tracking[i];
        switch (t.state) {
            case State::Pending:
            case State::Canceled: req.outcome = RequestOutcome::Canceled; break;
            case State::Empty: req.outcome = RequestOutcome::Empty; break;
            case State::Displayed:
            case State::Rejected: req.outcome = RequestOutcome::DisplayedRejected; break;
            case State::Accepted:
                req.outcome = t.retained.value_or(false) ? RequestOutcome::Kept : RequestOutcome::Accepted;
                break;
        }
        if (is_displayed(req.outcome)) {
            if (!req.suggestion) req.suggestion = std::string{};
        } else {
            req.suggestion.reset();
        }
    }
    return out;
}

ParseResult sessions_from_events(std::vector<TelemetryEvent> events) {
    ParseResult result;
    result.event_count = events.size();
    std::map<std::string, std::vector<TelemetryEvent>> grouped;
    for (auto& ev : events) grouped[ev.developer_id].push_back(std::move(ev));

    for (auto& [developer, evs] : grouped) {
        std::stable_sort(evs.begin(), evs.end(), event_order_less);
        auto rebuilt = reconstruct_requests(evs);
        for (auto& w : rebuilt.warnings) result.warnings.push_back({0, developer + ": " + w.message});

        DeveloperSession session;
        session.developer_id = developer;
        session.requests = std::move(rebuilt.requests);
        Millis duration = evs.back().timestamp + 1;
        for (const auto& ev : evs)
            if (ev.session_duration) duration = std::max(duration, *ev.session_duration);
        session.session_duration = duration;
        if (session.requests.empty()) {
            result.warnings.push_back({0, developer + ": session has no generation requests; dropped"});
            continue;
        }
        result.sessions.push_back(std::move(session));
    }
    return result;
}

ParseResult parse_dataset(std::istream& in, const ParseOptions& options) {
    if (!in.good()) throw Error(ErrorKind::Io, "telemetry stream is not readable");
    auto parsed = parse_events(in, options);
    if (parsed.events.empty()) {
        std::string msg = "dataset contains no valid telemetry events";
        if (!parsed.diagnostics.empty())
            msg += " (" + std::to_string(parsed.diagnostics.size()) + " malformed lines)";
        throw Error(ErrorKind::EmptyDataset, msg);
    }
    if (options.schema == InputSchema::CopilotTelemetry) {
        rebase_to_session_start(parsed.events);
    }
    auto result = sessions_from_events(std::move(parsed.events));
    result.diagnostics = std::move(parsed.diagnostics);
    if (result.sessions.empty()) throw Error(ErrorKind::EmptyDataset, "dataset contains no generation requests");
    return result;
}

ParseResult parse_dataset_file(const std::string& path, const ParseOptions& options) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Io, "cannot open " + path);
    return parse_dataset(in, options);
}

ParseResult parse_dataset_files(std::span<const std::string> paths, const ParseOptions& options) {
    std::vector<std::future<EventParseResult>> jobs;
    for (const auto& path : paths) {
        jobs.push_back(std::async(std::launch::async, [path, options] {
            std::ifstream in(path);
            if (!in) throw Error(ErrorKind::Io, "cannot open " + path);
            ParseOptions local = options;
            if (local.default_developer.empty()) {
                const auto slash = path.find_last_of('/');
                std::string stem = path.substr(slash == std::string::npos ? 0 : slash + 1);
                local.default_developer = stem.substr(0, stem.find('.'));
            }
            auto parsed = parse_events(in, local);
            for (auto& d : parsed.diagnostics) d.message = path + ": " + d.message;
            return parsed;
        }));
    }
    std::vector<TelemetryEvent> events;
    std::vector<Diagnostic> diagnostics;
    for (auto& job : jobs) {
        auto parsed = job.get();
        std::move(parsed.events.begin(), parsed.events.end(), std::back_inserter(events));
        std::move(parsed.diagnostics.begin(), parsed.diagnostics.end(), std::back_inserter(diagnostics));
    }
    if (events.empty()) throw Error(ErrorKind::EmptyDataset, "dataset contains no valid telemetry events");
    if (options.schema == InputSchema::CopilotTelemetry) {
        rebase_to_session_start(events);
    }
    auto result = sessions_from_events(std::move(events));
    result.diagnostics = std::move(diagnostics);
    if (result.sessions.empty()) throw Error(ErrorKind::EmptyDataset, "dataset contains no generation requests");
    return result;
}

std::size_t LifecycleBreakdown::displayed() const {
    return count(RequestOutcome::DisplayedRejected) + count(RequestOutcome::Accepted) + count(RequestOutcome::Kept);
}
std::size_t LifecycleBreakdown::accepted() const {
    return count(RequestOutcome::Accepted) + count(RequestOutcome::Kept);
}
std::size_t LifecycleBreakdown::kept() const { return count(RequestOutcome::Kept); }

namespace {
    double percent_of(std::size_t part, std::size_t total) {
        return total == 0 ? 0.0 : 100.0 * static_cast<double>(part) / static_cast<double>(total);
    }
}  // namespace

double LifecycleBreakdown::displayed_percent() const { return percent_of(displayed(), total); }
double LifecycleBreakdown::accepted_percent() const { return percent_of(accepted(), total); }
double LifecycleBreakdown::kept_percent() const { return percent_of(kept(), total); }

LifecycleBreakdown lifecycle_stats(std::span<const DeveloperSession> sessions) {
    LifecycleBreakdown stats;
    for (const auto& session : sessions)
        for (const auto& req : session.requests) {
            ++stats.counts[static_cast<std::size_t>(req.outcome)];
            ++stats.total;
        }
    for (std::size_t i = 0; i < kOutcomeCount; ++i) stats.percentages[i] = percent_of(stats.counts[i], stats.total);
    return stats;
}

std::vector<std::string_view> split_words(std::string_view text) {
    std::vector<std::string_view> words;
    std::size_t pos = 0;
    std::size_t start = std::string_view::npos;
    while (pos < text.size()) {
        if (const std::size_t ws = whitespace_length(text, pos)) {
            if (start != std::string_view::npos) {
                words.push_back(text.substr(start, pos - start));
                start = std::string_view::npos;
            }
            pos += ws;
        } else {
            if (start == std::string_view::npos) start = pos;
            ++pos;
        }
    }
    if (start != std::string_view::npos) words.push_back(text.substr(start));
    return words;
}

std::size_t word_edit_distance(std::string_view a, std::string_view b) {
    const auto wa = split_words(a);
    const auto wb = split_words(b);
    std::vector<std::size_t> prev(wb.size() + 1);
    std::vector<std::size_t> cur(wb.size() + 1);
    for (std::size_t j = 0; j <= wb.size(); ++j) prev[j] = j;
    for (std::size_t i = 1; i <= wa.size(); ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= wb.size(); ++j) {
            const std::size_t substitute = prev[j - 1] + (wa[i - 1] == wb[j - 1] ? 0 : 1);
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, substitute});
        }
        std::swap(prev, cur);
    }
    return prev[wb.size()];
}

bool retention_check(std::string_view suggestion, std::string_view current_code_region) {
    const auto words = split_words(suggestion).size();
    if (words == 0) throw Error(ErrorKind::UndefinedRetention, "retention is undefined for an empty suggestion");
    const double normalized =
            static_cast<double>(word_edit_distance(suggestion, current_code_region)) / static_cast<double>(words);
    return normalized < kRetentionThreshold;
}

UsageStats usage_stats(const DeveloperSession& session) {
    if (session.session_duration <= 0)
        throw Error(ErrorKind::InvalidArgument, "session " + session.developer_id + " has zero duration");
    UsageStats s;
    s.developer_id = session.developer_id;
    s.requests = session.requests.size();
    for (const auto& req : session.requests) {
        if (is_displayed(req.outcome)) ++s.shown;
        if (req.outcome == RequestOutcome::Accepted || req.outcome == RequestOutcome::Kept) ++s.accepted;
    }
    s.session_minutes = static_cast<double>(session.session_duration) / 60000.0;
    s.requests_per_minute = static_cast<double>(s.requests) / s.session_minutes;
    s.accepted_per_shown = s.shown == 0 ? 0.0 : static_cast<double>(s.accepted) / static_cast<double>(s.shown);
    s.accepted_per_total = s.requests == 0 ? 0.0 : static_cast<double>(s.accepted) / static_cast<double>(s.requests);
    return s;
}

std::string lifecycle_csv(const LifecycleBreakdown& stats) {
    std::ostringstream out;
    out << "outcome,count,percent\n";
    char buf[64];
    for (std::size_t i = 0; i < kOutcomeCount; ++i) {
        std::snprintf(buf, sizeof buf, "%.4f", stats.percentages[i]);
        out << kOutcomeNames[i] << ',' << stats.counts[i] << ',' << buf << '\n';
    }
    out << "total," << stats.total << ",100.0000\n";
    return out.str();
}

nlohmann::json lifecycle_json(const LifecycleBreakdown& stats) {
    nlohmann::json j;
    j["total"] = stats.total;
    for (std::size_t i = 0; i < kOutcomeCount; ++i)
        j["outcomes"][std::string(kOutcomeNames[i])] = {{"count", stats.counts[i]}, {"percent", stats.percentages[i]}};
    j["displayed"] = {{"count", stats.displayed()}, {"percent", stats.displayed_percent()}};
    j["accepted"] = {{"count", stats.accepted()}, {"percent", stats.accepted_percent()}};
    j["kept"] = {{"count", stats.kept()}, {"percent", stats.kept_percent()}};
    return j;
}

std::string usage_csv(std::span<const UsageStats> rows) {
    std::ostringstream out;
    out << "developer_id,requests,shown,accepted,session_minutes,requests_per_minute,accepted_per_shown,"
           "accepted_per_total\n";
    char buf[160];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%zu,%zu,%zu,%.4f,%.4f,%.6f,%.6f", r.requests, r.shown, r.accepted,
                      r.session_minutes, r.requests_per_minute, r.accepted_per_shown, r.accepted_per_total);
        out << r.developer_id << ',' << buf << '\n';
    }
    return out.str();
}

nlohmann::json usage_json(std::span<const UsageStats> rows) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& r : rows)
        arr.push_back({{"developer_id", r.developer_id},
                       {"requests", r.requests},
                       {"shown", r.shown},
                       {"accepted", r.accepted},
                       {"session_minutes", r.session_minutes},
                       {"requests_per_minute", r.requests_per_minute},
                       {"accepted_per_shown", r.accepted_per_shown},
                       {"accepted_per_total", r.accepted_per_total}});
    return arr;
}

}  // namespace assistbench::trace
