#include "assistbench/mock_service.hpp"

#include "assistbench/error.hpp"
#include "assistbench/protocol.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <chrono>
#include <condition_variable>
#include <limits>
#include <mutex>
#include <thread>
#include <unordered_map>

namespace assistbench::mock {

namespace {

    using Clock = std::chrono::steady_clock;
    constexpr auto kKeepAliveEvery = std::chrono::milliseconds(200);

    struct Channel {
        int tokens = 0;
        bool done = false;
    };

}  // namespace

struct MockService::Impl {
    explicit Impl(ServerConfig config, int threads) : server(std::move(config)), worker_threads(threads) {
        server.set_token_recording(true);
        server.set_keep_history(false);
    }

    BatchingServer server;
    int worker_threads;
    httplib::Server http;
    Clock::time_point origin = Clock::now();
    std::mutex mutex;
    std::condition_variable progress;  // tokens or completions available
    std::condition_variable driver_wake;
    std::unordered_map<SequenceId, Channel> channels;
    SequenceId next_id = 1;
    bool stopping = false;
    int bound_port = -1;
    std::thread listener;
    std::thread driver;

    double now_ms() const { return std::chrono::duration<double, std::milli>(Clock::now() - origin).count(); }

    // Caller holds the lock.
    void sync() {
        const auto done = server.advance_to(std::max(now_ms(), server.now()));
        bool changed = !done.empty();
        for (const auto& token : server.drain_tokens()) {
            auto it = channels.find(token.id);
            if (it != channels.end()) it->second.tokens = token.index + 1;
            changed = true;
        }
        for (const auto& c : done) {
            auto it = channels.find(c.id);
            if (it != channels.end()) it->second.done = true;
        }
        if (changed) progress.notify_all();
    }

    void drive() {
        std::unique_lock lock(mutex);
        while (!stopping) {
            sync();
            const double next = server.next_boundary();
            if (next == std::numeric_limits<double>::infinity()) {
                driver_wake.wait(lock);
            } else {
                const auto wake = origin + std::chrono::duration_cast<Clock::duration>(
                                                   std::chrono::duration<double, std::milli>(next));
                driver_wake.wait_until(lock, wake);
            }
        }
    }

    void cancel(SequenceId id) {
        std::lock_guard lock(mutex);
        sync();
        server.cancel_sequence(id, server.now());
        channels.erase(id);
        driver_wake.notify_all();
    }

    void handle_generate(const httplib::Request& req, httplib::Response& res) {
        auto body = nlohmann::json::parse(req.body, nullptr, false);
        if (body.is_discarded() || !body.contains("prompt") || !body["prompt"].is_string() ||
            !body.contains("max_new_tokens") || !body["max_new_tokens"].is_number_integer()) {
            res.status = 400;
            res.set_content(R"({"error":"expected {prompt, max_new_tokens, stream}"})", "application/json");
            return;
        }
        const auto prompt = body["prompt"].get<std::string>();
        const int max_new_tokens = std::max(1, body["max_new_tokens"].get<int>());
        const bool stream = body.value("stream", false);

        SequenceId id;
        {
            std::lock_guard lock(mutex);
            sync();
            id = next_id++;
            if (server.submit(id, estimate_prompt_tokens(prompt.size()), max_new_tokens, server.now()) ==
                Admission::Rejected) {
                res.status = protocol::kOverloadedStatus;
                res.set_content(std::string(protocol::kOverloadedBody), "application/json");
                return;
            }
            channels[id] = {};
            driver_wake.notify_all();
        }

        if (!stream) {
            int tokens = 0;
            {
                std::unique_lock lock(mutex);
                progress.wait(lock, [&] { return stopping || channels[id].done; });
                tokens = channels[id].tokens;
                channels.erase(id);
            }
            std::string text;
            for (int i = 0; i < tokens; ++i) {
                if (i) text += ' ';
                text += protocol::kTokenText;
            }
            res.set_content(nlohmann::json{{"text", text}, {"tokens", tokens}}.dump(), "application/json");
            return;
        }

        auto sent = std::make_shared<int>(0);
        res.set_header("Cache-Control", "no-cache");
        res.set_chunked_content_provider(
                "text/event-stream",
                [this, id, sent](std::size_t, httplib::DataSink& sink) {
                    int available = 0;
                    bool done = false;
                    {
                        std::unique_lock lock(mutex);
                        progress.wait_for(lock, kKeepAliveEvery, [&] {
                            auto it = channels.find(id);
                            return stopping || it == channels.end() || it->second.tokens > *sent || it->second.done;
                        });
                        auto it = channels.find(id);
                        if (stopping || it == channels.end()) return false;
                        available = it->second.tokens;
                        done = it->second.done;
                    }
                    std::string out;
                    for (; *sent < available; ++*sent) out += protocol::token_frame(*sent);
                    if (done) out += protocol::done_frame(available);
                    if (out.empty()) out = protocol::kKeepAlive;
                    if (!sink.write(out.data(), out.size())) return false;
                    if (done) {
                        {
                            std::lock_guard lock(mutex);
                            channels.erase(id);
                        }
                        sink.done();
                    }
                    return true;
                },
                [this, id](bool success) {
                    if (!success) cancel(id);
                });
    }
};

MockService::MockService(ServerConfig config, int worker_threads)
    : impl_(std::make_unique<Impl>(std::move(config), worker_threads)) {
    auto* impl = impl_.get();
    const int threads = worker_threads;
    impl->http.new_task_queue = [threads] { return new httplib::ThreadPool(static_cast<std::size_t>(threads)); };
    impl->http.Post(std::string(protocol::kGeneratePath),
                    [impl](const httplib::Request& req, httplib::Response& res) { impl->handle_generate(req, res); });
    impl->http.Get(std::string(protocol::kPowerPath), [impl](const httplib::Request&, httplib::Response& res) {
        double watts = 0.0;
        {
            std::lock_guard lock(impl->mutex);
            impl->sync();
            watts = impl->server.power_now();
        }
        res.set_content(nlohmann::json{{"watts", watts}}.dump(), "application/json");
    });
    impl->http.Get(std::string(protocol::kStepsPath), [impl](const httplib::Request&, httplib::Response& res) {
        std::lock_guard lock(impl->mutex);
        res.set_content(impl->server.step_log_csv(), "text/csv");
    });
}

MockService::~MockService() { stop(); }

int MockService::start(const std::string& host, int port) {
    auto& impl = *impl_;
    if (impl.listener.joinable()) return impl.bound_port;
    // httplib's default sets SO_REUSEPORT, which lets a second server share a busy port.
    impl.http.set_socket_options([](socket_t sock) {
        int yes = 1;
        setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
    });
    if (port == 0) {
        impl.bound_port = impl.http.bind_to_any_port(host);
    } else {
        impl.bound_port = impl.http.bind_to_port(host, port) ? port : -1;
    }
    if (impl.bound_port < 0)
        throw Error(ErrorKind::Startup, "cannot bind mock service to " + host + ":" + std::to_string(port));
    impl.origin = Clock::now();
    impl.driver = std::thread([&impl] { impl.drive(); });
    impl.listener = std::thread([&impl] { impl.http.listen_after_bind(); });
    impl.http.wait_until_ready();
    return impl.bound_port;
}

void MockService::wait() {
    if (impl_->listener.joinable()) impl_->listener.join();
}

void MockService::stop() {
    auto& impl = *impl_;
    {
        std::lock_guard lock(impl.mutex);
        impl.stopping = true;
    }
    impl.progress.notify_all();
    impl.driver_wake.notify_all();
    impl.http.stop();
    if (impl.listener.joinable()) impl.listener.join();
    if (impl.driver.joinable()) impl.driver.join();
}

int MockService::port() const { return impl_->bound_port; }

double MockService::power_now() {
    std::lock_guard lock(impl_->mutex);
    impl_->sync();
    return impl_->server.power_now();
}

std::string MockService::step_log_csv() {
    std::lock_guard lock(impl_->mutex);
    return impl_->server.step_log_csv();
}

int MockService::peak_admitted() {
    std::lock_guard lock(impl_->mutex);
    return impl_->server.peak_admitted();
}

}  // namespace assistbench::mock
