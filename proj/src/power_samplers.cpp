#include "assistbench/power_samplers.hpp"

#include "assistbench/error.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace assistbench::energy {

namespace {

    std::optional<double> read_number(const std::string& path) {
        std::ifstream in(path);
        double v = 0.0;
        if (!(in >> v)) return std::nullopt;
        return v;
    }

}  // namespace

EnergyCounterSampler::EnergyCounterSampler(std::vector<std::string> counter_files) {
    for (auto& path : counter_files) {
        Counter c;
        const auto range_path = std::filesystem::path(path).parent_path() / "max_energy_range_uj";
        c.range_uj = read_number(range_path.string()).value_or(0.0);
        c.path = std::move(path);
        counters_.push_back(std::move(c));
    }
}

std::vector<std::string> EnergyCounterSampler::discover(const std::string& root) {
    std::vector<std::string> out;
    std::error_code ec;
    for (const auto& entry : std::filesystem::directory_iterator(root, ec)) {
        const auto name = entry.path().filename().string();
        // intel-rapl:0 is a package; intel-rapl:0:0 is a subdomain of it.
        if (name.rfind("intel-rapl:", 0) != 0 || std::count(name.begin(), name.end(), ':') != 1) continue;
        const auto file = entry.path() / "energy_uj";
        if (std::filesystem::exists(file, ec)) out.push_back(file.string());
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::optional<double> EnergyCounterSampler::read_watts(double now_ms) {
    double joules_delta = 0.0;
    bool complete = last_ms_.has_value();
    for (auto& c : counters_) {
        auto uj = read_number(c.path);
        if (!uj) {
            complete = false;
            continue;
        }
        if (c.last_uj) {
            double delta = *uj - *c.last_uj;
            if (delta < 0.0 && c.range_uj > 0.0) delta += c.range_uj;
            joules_delta += std::max(delta, 0.0) / 1e6;
        } else {
            complete = false;
        }
        c.last_uj = uj;
    }
    std::optional<double> watts;
    if (complete && now_ms > *last_ms_) watts = joules_delta / ((now_ms - *last_ms_) / 1000.0);
    last_ms_ = now_ms;
    return watts;
}

GpuPollSampler::GpuPollSampler(int gpu_count, std::string command)
    : gpu_count_(gpu_count), command_(std::move(command)) {}

std::optional<double> GpuPollSampler::sum_first(const std::string& output, int gpu_count) {
    std::istringstream in(output);
    std::string line;
    double total = 0.0;
    int seen = 0;
    while (seen < gpu_count && std::getline(in, line)) {
        try {
            std::size_t used = 0;
            const double w = std::stod(line, &used);
            total += w;
            ++seen;
        } catch (const std::exception&) {
            return std::nullopt;
        }
    }
    if (seen < gpu_count) return std::nullopt;
    return total;
}

std::optional<double> GpuPollSampler::read_watts(double) {
    FILE* pipe = popen(command_.c_str(), "r");
    if (!pipe) return std::nullopt;
    std::string output;
    char buf[256];
    while (std::fgets(buf, sizeof buf, pipe)) output += buf;
    if (pclose(pipe) != 0) return std::nullopt;
    return sum_first(output, gpu_count_);
}

HttpPowerSampler::HttpPowerSampler(std::string host, int port, std::string path)
    : host_(std::move(host)), port_(port), path_(std::move(path)) {}

std::optional<double> HttpPowerSampler::read_watts(double) {
    httplib::Client client(host_, port_);
    client.set_connection_timeout(1, 0);
    client.set_read_timeout(1, 0);
    auto res = client.Get(path_);
    if (!res || res->status != 200) return std::nullopt;
    auto j = nlohmann::json::parse(res->body, nullptr, false);
    if (j.is_discarded() || !j.contains("watts") || !j["watts"].is_number()) return std::nullopt;
    return j["watts"].get<double>();
}

PeriodicSampler::PeriodicSampler(std::vector<std::unique_ptr<PowerSampler>> samplers, double interval_ms,
                                 std::chrono::steady_clock::time_point origin)
    : samplers_(std::move(samplers)), interval_ms_(interval_ms), origin_(origin), buffers_(samplers_.size()) {
    if (!(interval_ms_ > 0.0)) throw Error(ErrorKind::InvalidArgument, "sampling interval must be > 0");
}

PeriodicSampler::~PeriodicSampler() { stop(); }

double PeriodicSampler::now_ms() const {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - origin_).count();
}

void PeriodicSampler::poll_once() {
    for (std::size_t i = 0; i < samplers_.size(); ++i) {
        const double t = now_ms();
        auto w = samplers_[i]->read_watts(t);
        if (!w || *w < 0.0) continue;
        std::lock_guard lock(mutex_);
        buffers_[i].push_back({t, *w, samplers_[i]->source()});
    }
}

void PeriodicSampler::start() {
    {
        std::lock_guard lock(mutex_);
        if (running_) return;
        running_ = true;
    }
    thread_ = std::thread([this] { run(); });
}

void PeriodicSampler::stop() {
    {
        std::lock_guard lock(mutex_);
        running_ = false;
    }
    wake_.notify_all();
    if (thread_.joinable()) thread_.join();
}

void PeriodicSampler::run() {
    auto next = std::chrono::steady_clock::now();
    const auto step = std::chrono::duration_cast<std::chrono::steady_clock::duration>(
            std::chrono::duration<double, std::milli>(interval_ms_));
    for (;;) {
        poll_once();
        next += step;
        std::unique_lock lock(mutex_);
        if (wake_.wait_until(lock, next, [this] { return !running_; })) return;
    }
}

std::vector<PowerSample> PeriodicSampler::samples() const {
    std::vector<PowerSample> out;
    {
        std::lock_guard lock(mutex_);
        for (const auto& b : buffers_) out.insert(out.end(), b.begin(), b.end());
    }
    std::stable_sort(out.begin(), out.end(),
                     [](const PowerSample& a, const PowerSample& b) { return a.timestamp_ms < b.timestamp_ms; });
    return out;
}

}  // namespace assistbench::energy
