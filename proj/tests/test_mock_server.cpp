#include "assistbench/error.hpp"
#include "assistbench/mock_server.hpp"
#include "assistbench/mock_service.hpp"
#include "assistbench/protocol.hpp"

#include <doctest.h>
#include <httplib.h>

#include <chrono>
#include <future>
#include <random>
#include <thread>

using namespace assistbench;
using namespace assistbench::mock;

namespace {

    ServerConfig simple_config(int max_concurrent = 1000, int gpus = 1) {
        ServerConfig cfg;
        cfg.profile.decode_base_ms = 10.0;
        cfg.profile.decode_slope_ms = 1.0;
        cfg.profile.prefill_ms_per_1k_tokens = 20.0;
        cfg.max_concurrent_requests = max_concurrent;
        cfg.gpu_count = gpus;
        cfg.idle_power_w = 270.0;
        cfg.per_gpu_active_power_w = 200.0;
        return cfg;
    }

    double run_to_completion(BatchingServer& server) {
        double last = 0;
        while (std::isfinite(server.next_boundary()))
            for (const auto& c : server.advance_to(server.next_boundary())) last = c.time_ms;
        return last;
    }

}  // namespace

TEST_CASE("a lone request takes output tokens times the single-sequence step") {
    BatchingServer server(simple_config());
    REQUIRE(server.submit(1, 0, 100, 0.0) == Admission::Admitted);
    CHECK(run_to_completion(server) == doctest::Approx(1100.0));
    CHECK(server.info(1)->tokens == 100);
}

TEST_CASE("a second concurrent request adds only the slope term") {
    BatchingServer one(simple_config());
    one.submit(1, 0, 100, 0.0);
    const double alone = run_to_completion(one);

    BatchingServer two(simple_config());
    two.submit(1, 0, 100, 0.0);
    two.submit(2, 0, 100, 0.0);
    // The second sequence queues behind the first step, then both share 12 ms steps.
    const double together = run_to_completion(two);
    CHECK(alone == doctest::Approx(1100.0));
    CHECK(together < 1.2 * alone);
    CHECK(together > alone);
}

TEST_CASE("prefill is charged on the step a sequence joins") {
    BatchingServer server(simple_config());
    server.submit(1, 1000, 1, 0.0);
    CHECK(run_to_completion(server) == doctest::Approx(10.0 + 1.0 + 20.0));
}

TEST_CASE("admission caps queued plus running sequences") {
    BatchingServer server(simple_config(2));
    CHECK(server.submit(1, 0, 50, 0.0) == Admission::Admitted);
    CHECK(server.submit(2, 0, 50, 0.0) == Admission::Admitted);
    CHECK(server.submit(3, 0, 50, 0.0) == Admission::Rejected);
    CHECK(server.admitted() == 2);
    run_to_completion(server);
    CHECK(server.submit(4, 0, 50, server.now()) == Admission::Admitted);
}

TEST_CASE("admitted count never exceeds the cap under random load") {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 50; ++trial) {
        const int cap = std::uniform_int_distribution<int>(1, 12)(rng);
        BatchingServer server(simple_config(cap, 1));
        double t = 0;
        SequenceId next = 1;
        for (int i = 0; i < 200; ++i) {
            t += std::exponential_distribution<double>(0.05)(rng);
            server.advance_to(t);
            if (std::bernoulli_distribution(0.2)(rng) && next > 1)
                server.cancel_sequence(std::uniform_int_distribution<SequenceId>(1, next - 1)(rng), t);
            server.submit(next++, 64, std::uniform_int_distribution<int>(1, 40)(rng), t);
            CHECK(server.admitted() <= cap);
            CHECK(server.running() <= server.config().running_capacity());
        }
        CHECK(server.peak_admitted() <= cap);
        for (const auto& step : server.step_log()) {
            CHECK(step.batch_size <= server.config().running_capacity());
            CHECK(step.watts >= server.config().idle_power_w);
        }
    }
}

TEST_CASE("work conservation: a waiting sequence joins as soon as capacity frees") {
    auto cfg = simple_config();
    cfg.batch_capacity_per_gpu = 1;
    BatchingServer server(cfg);
    server.submit(1, 0, 3, 0.0);
    server.submit(2, 0, 3, 0.0);
    CHECK(server.queued() == 1);
    run_to_completion(server);
    const auto& log = server.step_log();
    REQUIRE(log.size() == 6);
    for (std::size_t i = 1; i < log.size(); ++i) CHECK(log[i].start_ms == log[i - 1].end_ms);
}

TEST_CASE("power follows utilisation") {
    SUBCASE("idle") {
        BatchingServer server(simple_config(1000, 4));
        CHECK(server.power_now() == 270.0);
    }
    SUBCASE("full batch on four GPUs") {
        BatchingServer server(simple_config(1000, 4));
        for (SequenceId id = 0; id < 32; ++id) server.submit(id, 0, 10, 0.0);
        // The first sequence starts a step alone; the rest join at its boundary.
        CHECK(server.power_now() == doctest::Approx(270.0 + 800.0 / 32));
        server.advance_to(server.next_boundary());
        CHECK(server.power_now() == doctest::Approx(1070.0));
    }
    SUBCASE("half batch on one GPU") {
        BatchingServer server(simple_config(1000, 1));
        for (SequenceId id = 0; id < 4; ++id) server.submit(id, 0, 10, 0.0);
        server.advance_to(server.next_boundary());
        CHECK(server.power_now() == doctest::Approx(370.0));
    }
}

TEST_CASE("cancel a queued sequence") {
    auto cfg = simple_config();
    cfg.batch_capacity_per_gpu = 1;
    BatchingServer server(cfg);
    server.submit(1, 0, 5, 0.0);
    server.submit(2, 0, 5, 0.0);
    CHECK(server.queued() == 1);
    CHECK(server.cancel_sequence(2, 0.0));
    CHECK(server.queued() == 0);
    run_to_completion(server);
    CHECK(server.info(2)->tokens == 0);
    CHECK_FALSE(server.cancel_sequence(42, 0.0));
}

TEST_CASE("cancel mid-generation stops tokens within one step") {
    BatchingServer server(simple_config());
    server.set_token_recording(true);
    server.submit(1, 0, 100, 0.0);
    server.advance_to(55.0);  // five 11 ms steps done
    CHECK(server.info(1)->tokens == 5);
    CHECK(server.cancel_sequence(1, 55.0));
    server.advance_to(10'000.0);
    CHECK(server.info(1)->tokens == 5);
    const auto tokens = server.drain_tokens();
    REQUIRE(tokens.size() == 5);
    CHECK(tokens.back().time_ms <= 55.0);
    // The step running at the cancel is the last one with the sequence in it.
    const auto& log = server.step_log();
    CHECK(log.back().start_ms <= 55.0);
    CHECK(log.back().end_ms <= 55.0 + 11.0);
    CHECK(server.step_log_csv().rfind("start_ms,end_ms,batch_size,queue_depth,watts\n", 0) == 0);
}

TEST_CASE("cancelling everything returns power to idle") {
    BatchingServer server(simple_config(1000, 4));
    for (SequenceId id = 0; id < 10; ++id) server.submit(id, 0, 100, 0.0);
    CHECK(server.power_now() > 270.0);
    server.advance_to(50.0);
    for (SequenceId id = 0; id < 10; ++id) server.cancel_sequence(id, 50.0);
    server.advance_to(100.0);
    CHECK(server.power_now() == 270.0);
    CHECK(server.admitted() == 0);
}

TEST_CASE("mean latency is non-decreasing in offered concurrency") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 10; ++trial) {
        const int tokens = std::uniform_int_distribution<int>(5, 60)(rng);
        double previous = 0;
        for (int n = 1; n <= 64; n *= 2) {
            BatchingServer server(simple_config(1000, 1));
            for (int i = 0; i < n; ++i) server.submit(static_cast<SequenceId>(i), 100, tokens, 0.0);
            double sum = 0;
            while (std::isfinite(server.next_boundary()))
                for (const auto& c : server.advance_to(server.next_boundary())) sum += c.time_ms;
            const double mean = sum / n;
            CHECK(mean >= previous);
            previous = mean;
        }
    }
}

TEST_CASE("quantisation multipliers scale step cost and active power") {
    const auto catalog = default_catalog();
    SimulationConfig sim{1, StreamingMode::NoStream, TriggerMode::Automatic, "starcoder", "bnb-nf4", 1000, 4};
    const auto cfg = make_server_config(catalog, sim);
    CHECK(cfg.idle_power_w == doctest::Approx(270.0));
    CHECK(cfg.multipliers().latency == doctest::Approx(2.386));
    sim.gpu_count = 1;
    CHECK(make_server_config(catalog, sim).idle_power_w == doctest::Approx(213.75));
    sim.quantization_tag = "int3";
    CHECK_THROWS_AS(make_server_config(catalog, sim), Error);
}

TEST_CASE("catalog JSON round-trips") {
    const auto catalog = default_catalog();
    const auto back = catalog_from_json(catalog_to_json(catalog));
    CHECK(catalog_to_json(back) == catalog_to_json(catalog));
    auto broken = catalog_to_json(catalog);
    broken["models"]["starcoder"]["decode_base_ms"] = 0;
    CHECK_THROWS_AS(catalog_from_json(broken), Error);
}

TEST_CASE("invalid server configs are rejected") {
    auto cfg = simple_config();
    cfg.max_concurrent_requests = 0;
    CHECK_THROWS_AS(validate(cfg), Error);
    cfg = simple_config();
    cfg.idle_power_w = -1;
    CHECK_THROWS_AS(validate(cfg), Error);
}

TEST_CASE("protocol frames are exact") {
    CHECK(protocol::token_frame(3) == "data: {\"token\":\"tok\",\"index\":3}\n\n");
    CHECK(protocol::done_frame(7) == "data: {\"done\":true,\"tokens\":7}\n\n");
    protocol::SseReader reader;
    CHECK(reader.feed("data: {\"a\"").empty());
    const auto out = reader.feed(":1}\n\n: keep-alive\n\ndata: x\n\n");
    REQUIRE(out.size() == 2);
    CHECK(out[0] == "{\"a\":1}");
    CHECK(out[1] == "x");
}

TEST_CASE("HTTP service: streaming, non-streaming, overload and power") {
    auto cfg = simple_config(1);
    MockService service(cfg, 16);
    const int port = service.start();
    httplib::Client client("127.0.0.1", port);
    client.set_read_timeout(10, 0);

    SUBCASE("stream") {
        std::string body;
        auto res = client.Post("/v1/generate", R"({"prompt":"x","max_new_tokens":3,"stream":true})",
                               "application/json");
        REQUIRE(res);
        CHECK(res->status == 200);
        protocol::SseReader reader;
        const auto frames = reader.feed(res->body);
        REQUIRE(frames.size() == 4);
        CHECK(frames[0] == R"({"token":"tok","index":0})");
        CHECK(frames[3] == R"({"done":true,"tokens":3})");
    }
    SUBCASE("no stream") {
        auto res = client.Post("/v1/generate", R"({"prompt":"x","max_new_tokens":4,"stream":false})",
                               "application/json");
        REQUIRE(res);
        CHECK(res->status == 200);
        const auto j = nlohmann::json::parse(res->body);
        CHECK(j["tokens"] == 4);
        CHECK(j["text"].is_string());
    }
    SUBCASE("bad request") {
        auto res = client.Post("/v1/generate", R"({"prompt":1})", "application/json");
        REQUIRE(res);
        CHECK(res->status == 400);
    }
    SUBCASE("overload") {
        auto first = std::async(std::launch::async, [port] {
            httplib::Client c("127.0.0.1", port);
            c.set_read_timeout(10, 0);
            return c.Post("/v1/generate", R"({"prompt":"x","max_new_tokens":200,"stream":false})",
                          "application/json");
        });
        for (int i = 0; i < 200 && service.peak_admitted() < 1; ++i)
            std::this_thread::sleep_for(std::chrono::milliseconds(5));
        REQUIRE(service.peak_admitted() == 1);
        auto power = client.Get("/v1/power");
        REQUIRE(power);
        CHECK(nlohmann::json::parse(power->body)["watts"].get<double>() > 270.0);
        auto res = client.Post("/v1/generate", R"({"prompt":"x","max_new_tokens":1,"stream":true})",
                               "application/json");
        REQUIRE(res);
        CHECK(res->status == 429);
        CHECK(res->body == protocol::kOverloadedBody);
        auto done = first.get();
        REQUIRE(done);
        CHECK(done->status == 200);
        CHECK(service.peak_admitted() == 1);
    }
    SUBCASE("step log") {
        client.Post("/v1/generate", R"({"prompt":"x","max_new_tokens":2,"stream":false})", "application/json");
        auto res = client.Get("/v1/steps");
        REQUIRE(res);
        CHECK(res->body.rfind("start_ms,end_ms,batch_size,queue_depth,watts\n", 0) == 0);
    }
    service.stop();
}

TEST_CASE("binding a busy port is a startup error") {
    MockService first(simple_config(), 4);
    const int port = first.start();
    MockService second(simple_config(), 4);
    try {
        second.start("127.0.0.1", port);
        FAIL("expected a startup error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Startup);
    }
    first.stop();
}
