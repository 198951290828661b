#include "assistbench/synthetic_traces.hpp"

#include "assistbench/rng.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

namespace assistbench::trace {

namespace {

    constexpr std::array<std::string_view, 32> kVocabulary = {
            "int",    "row",     "col",     "board",  "player", "return", "if",     "for",
            "while",  "=",       "==",      "+",      "1;",     "0;",     "{",      "}",
            "public", "private", "static",  "void",   "boolean", "grid[row][col]", "winner", "token",
            "new",    "Board();", "move",   "System.out.println(board);", "&&", "||", "count++;", "i",
    };

    std::string random_text(Rng& rng, int min_words, int max_words) {
        const auto n = rng.uniform_int(min_words, max_words);
        std::string out;
        for (std::int64_t i = 0; i < n; ++i) {
            if (i) out += ' ';
            out += kVocabulary[static_cast<std::size_t>(rng.uniform_int(0, kVocabulary.size() - 1))];
        }
        return out;
    }

    std::string random_prompt(Rng& rng, int min_chars, int max_chars) {
        const auto target = static_cast<std::size_t>(rng.uniform_int(min_chars, max_chars));
        std::string out = "class ConnectFour {\n";
        while (out.size() < target) {
            out += random_text(rng, 3, 9);
            out += '\n';
        }
        out.resize(target);
        return out;
    }

    // Replace a single word so the region still matches the suggestion.
    std::string lightly_edited(Rng& rng, const std::string& suggestion) {
        auto words = split_words(suggestion);
        if (words.size() < 3) return suggestion;
        std::string out;
        const auto victim = static_cast<std::size_t>(rng.uniform_int(0, words.size() - 1));
        for (std::size_t i = 0; i < words.size(); ++i) {
            if (i) out += ' ';
            out += i == victim ? std::string("edited") : std::string(words[i]);
        }
        return out;
    }

    double exponential(Rng& rng, double mean) { return -mean * std::log(1.0 - rng.uniform01()); }

    int geometric(Rng& rng, double mean) {
        const double p = 1.0 / mean;
        int k = 1;
        while (!rng.bernoulli(p)) ++k;
        return k;
    }

}  // namespace

std::vector<TelemetryEvent> synthesize_events(const SyntheticTraceOptions& options) {
    Rng rng(options.seed);
    const int n = options.developers;

    // Rates evenly spread over the observed range, assigned in shuffled order.
    std::vector<double> rates(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const double f = n == 1 ? 0.5 : static_cast<double>(i) / (n - 1);
        rates[static_cast<std::size_t>(i)] =
                options.min_requests_per_minute + f * (options.max_requests_per_minute - options.min_requests_per_minute);
    }
    for (int i = n - 1; i > 0; --i) std::swap(rates[static_cast<std::size_t>(i)], rates[static_cast<std::size_t>(rng.uniform_int(0, i))]);

    std::vector<TelemetryEvent> events;
    for (int d = 0; d < n; ++d) {
        char dev_buf[16];
        std::snprintf(dev_buf, sizeof dev_buf, "dev%02d", d + 1);
        const std::string developer = dev_buf;

        double minutes;
        if (d < options.long_sessions) minutes = rng.uniform(62.0, 75.0);
        else if (d < options.long_sessions + options.short_sessions) minutes = rng.uniform(30.0, 40.0);
        else minutes = rng.uniform(40.0, 60.0);
        const Millis duration = static_cast<Millis>(minutes * 60000.0);
        const double rate = rates[static_cast<std::size_t>(d)];

        // Mean pause between bursts chosen so the long-run rate matches.
        const double mean_intra_gap_ms = 900.0;
        const double burst_ms = (options.mean_burst_size - 1.0) * mean_intra_gap_ms;
        const double cycle_ms = options.mean_burst_size / rate * 60000.0;
        const double mean_pause_ms = std::max(3000.0, cycle_ms - burst_ms);

        int seq = 0;
        int event_seq = 0;
        auto push = [&](Millis t, EventKind kind, const std::string& request, nlohmann::json payload) {
            if (t >= duration) return;
            char id[32];
            std::snprintf(id, sizeof id, "e%06d", event_seq++);
            TelemetryEvent ev;
            ev.event_id = id;
            ev.developer_id = developer;
            ev.timestamp = t;
            ev.kind = kind;
            ev.request_id = request;
            ev.payload = std::move(payload);
            if (event_seq == 1) ev.session_duration = duration;
            events.push_back(std::move(ev));
        };

        double t = rng.uniform(0.0, 30000.0);
        while (t < static_cast<double>(duration)) {
            const int burst = geometric(rng, options.mean_burst_size);
            std::vector<Millis> issues;
            for (int k = 0; k < burst; ++k) {
                issues.push_back(static_cast<Millis>(t));
                t += k + 1 < burst ? rng.uniform(300.0, 1500.0) : 0.0;
            }
            const double pause = exponential(rng, mean_pause_ms) + 2500.0;
            const Millis next_burst = static_cast<Millis>(t + pause);

            for (int k = 0; k < burst; ++k) {
                const Millis issue = issues[static_cast<std::size_t>(k)];
                if (issue >= duration) break;
                char rid[32];
                std::snprintf(rid, sizeof rid, "%s-r%05d", developer.c_str(), seq++);
                const std::string request = rid;
                push(issue, EventKind::RequestIssued, request,
                     {{"prompt", random_prompt(rng, options.min_prompt_chars, options.max_prompt_chars)}});

                const bool last = k + 1 == burst;
                const Millis next_issue = last ? next_burst : issues[static_cast<std::size_t>(k + 1)];
                if (!last) {
                    if (rng.bernoulli(options.inner_empty_probability)) {
                        push(issue + 150, EventKind::GenerationShown, request, {{"suggestion", ""}});
                    } else if (rng.bernoulli(0.5)) {
                        push(next_issue - 1, EventKind::Canceled, request, nlohmann::json::object());
                    }
                    // Otherwise the next request supersedes it with no terminal event.
                    continue;
                }
                if (rng.bernoulli(options.tail_empty_probability)) {
                    push(issue + 150, EventKind::GenerationShown, request, {{"suggestion", ""}});
                    continue;
                }
                const Millis shown = issue + static_cast<Millis>(rng.uniform(200.0, 900.0));
                if (shown >= duration) continue;
                const std::string suggestion = random_text(rng, 4, 18);
                push(shown, EventKind::GenerationShown, request, {{"suggestion", suggestion}});
                if (!rng.bernoulli(options.accept_probability)) {
                    const Millis rejected = std::min(shown + 1500, std::max(shown + 1, next_issue - 1));
                    if (rejected < duration) push(rejected, EventKind::Rejected, request, nlohmann::json::object());
                    continue;
                }
                const Millis accepted = shown + static_cast<Millis>(rng.uniform(300.0, 2000.0));
                if (accepted >= duration) continue;
                push(accepted, EventKind::Accepted, request, nlohmann::json::object());
                const bool keep = rng.bernoulli(options.keep_probability);
                const std::string region = keep ? lightly_edited(rng, suggestion) : random_text(rng, 2, 4);
                const Millis probe = std::min(accepted + 15000, duration - 1);
                if (probe > accepted) push(probe, EventKind::StillInCode, request, {{"code_region", region}});
                else push(accepted, EventKind::StillInCode, request, {{"retained", keep}});
            }
            t = static_cast<double>(next_burst);
        }
    }
    return events;
}

std::vector<DeveloperSession> synthesize_sessions(const SyntheticTraceOptions& options) {
    return sessions_from_events(synthesize_events(options)).sessions;
}

}  // namespace assistbench::trace
