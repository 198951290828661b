#pragma once

// Power meters behind one interface, plus a thread that polls them.

#include "assistbench/energy_metrics.hpp"

#include <chrono>
#include <condition_variable>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace assistbench::energy {

class PowerSampler {
  public:
    virtual ~PowerSampler() = default;
    virtual PowerSource source() const = 0;
    // Instantaneous (or since-last-read average) power; nullopt when the
    // meter has nothing to report yet.
    virtual std::optional<double> read_watts(double now_ms) = 0;
};

// Cumulative microjoule counters (powercap energy_uj files), differenced
// between reads. Counter wrap is handled with max_energy_range_uj when present.
class EnergyCounterSampler : public PowerSampler {
  public:
    explicit EnergyCounterSampler(std::vector<std::string> counter_files);
    // Top-level package domains under /sys/class/powercap.
    static std::vector<std::string> discover(const std::string& root = "/sys/class/powercap");

    PowerSource source() const override { return PowerSource::CpuEnergyCounter; }
    std::optional<double> read_watts(double now_ms) override;

  private:
    struct Counter {
        std::string path;
        double range_uj = 0.0;
        std::optional<double> last_uj;
    };
    std::vector<Counter> counters_;
    std::optional<double> last_ms_;
};

// Runs a GPU management query that prints one power.draw value (W) per GPU
// per line and sums the first gpu_count of them, so unused GPUs are left out.
class GpuPollSampler : public PowerSampler {
  public:
    explicit GpuPollSampler(int gpu_count,
                            std::string command = "nvidia-smi --query-gpu=power.draw --format=csv,noheader,nounits");

    PowerSource source() const override { return PowerSource::GpuManagementPoll; }
    std::optional<double> read_watts(double now_ms) override;

    static std::optional<double> sum_first(const std::string& output, int gpu_count);

  private:
    int gpu_count_;
    std::string command_;
};

// GET <path> on a mock generation server, expecting {"watts": w}.
class HttpPowerSampler : public PowerSampler {
  public:
    HttpPowerSampler(std::string host, int port, std::string path = "/v1/power");

    PowerSource source() const override { return PowerSource::Simulated; }
    std::optional<double> read_watts(double now_ms) override;

  private:
    std::string host_;
    int port_;
    std::string path_;
};

// Adapts any callable; used by tests and the in-process mock service.
class FunctionSampler : public PowerSampler {
  public:
    FunctionSampler(PowerSource source, std::function<std::optional<double>(double)> read)
        : source_(source), read_(std::move(read)) {}

    PowerSource source() const override { return source_; }
    std::optional<double> read_watts(double now_ms) override { return read_(now_ms); }

  private:
    PowerSource source_;
    std::function<std::optional<double>(double)> read_;
};

// Polls every sampler on one thread at a fixed interval. Timestamps are
// milliseconds since `origin`.
class PeriodicSampler {
  public:
    PeriodicSampler(std::vector<std::unique_ptr<PowerSampler>> samplers, double interval_ms,
                    std::chrono::steady_clock::time_point origin);
    ~PeriodicSampler();

    PeriodicSampler(const PeriodicSampler&) = delete;
    PeriodicSampler& operator=(const PeriodicSampler&) = delete;

    void start();
    void stop();
    // Time-ordered copy of everything collected so far.
    std::vector<PowerSample> samples() const;
    void poll_once();

  private:
    void run();
    double now_ms() const;

    std::vector<std::unique_ptr<PowerSampler>> samplers_;
    double interval_ms_;
    std::chrono::steady_clock::time_point origin_;
    mutable std::mutex mutex_;
    std::vector<std::vector<PowerSample>> buffers_;  // per sampler
    std::condition_variable wake_;
    bool running_ = false;
    std::thread thread_;
};

}  // namespace assistbench::energy
