#pragma once

// HTTP front end for BatchingServer, driven by the wall clock. Speaks the
// protocol in protocol.hpp and also serves:
//   GET /v1/power   {"watts": w}
//   GET /v1/steps   step log as CSV (start_ms,end_ms,batch_size,queue_depth,watts)

#include "assistbench/mock_server.hpp"

#include <memory>
#include <string>

namespace assistbench::mock {

class MockService {
  public:
    explicit MockService(ServerConfig config, int worker_threads = 256);
    ~MockService();

    MockService(const MockService&) = delete;
    MockService& operator=(const MockService&) = delete;

    // Binds and starts serving on a background thread; port 0 picks a free
    // port. Returns the bound port. Throws Error(Startup) when binding fails.
    int start(const std::string& host = "127.0.0.1", int port = 0);
    // Blocks the calling thread until stop() is called from elsewhere.
    void wait();
    void stop();

    int port() const;
    double power_now();
    std::string step_log_csv();
    int peak_admitted();

  private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace assistbench::mock
