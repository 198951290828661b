#include "assistbench/mock_server.hpp"

#include "assistbench/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace assistbench::mock {

const ModelProfile& ProfileCatalog::model(const std::string& name) const {
    auto it = models.find(name);
    if (it == models.end()) throw Error(ErrorKind::InvalidArgument, "unknown model profile '" + name + "'");
    return it->second;
}

ProfileCatalog default_catalog() {
    // Calibrated with tools/calibrate_mock against the frugal reference rows.
    // StarCoder2-15B steps are ~2.5x StarCoder's and StarCoder2-7B ~10% below
    // 15B; EETQ costs +3.1% latency, NF4 +138.6% and FP4 +156%.
    const std::map<std::string, QuantizationMultipliers> quant = {
            {"none", {1.0, 1.0}},
            {"eetq", {1.031, 0.989}},
            {"bnb-nf4", {2.386, 1.05}},
            {"bnb-fp4", {2.56, 1.05}},
    };
    ProfileCatalog catalog;
    catalog.models["starcoder"] = {"starcoder", 10.0, 15.0, 1.5, 150.0, quant};
    catalog.models["starcoder2-15b"] = {"starcoder2-15b", 14.0, 37.4, 3.7, 150.0, quant};
    catalog.models["starcoder2-7b"] = {"starcoder2-7b", 8.0, 34.0, 3.4, 150.0, quant};
    return catalog;
}

namespace {

    void require_positive(double value, const std::string& what) {
        if (!(value > 0.0)) throw Error(ErrorKind::InvalidArgument, what + " must be > 0");
    }

    void validate_profile(const ModelProfile& profile) {
        require_positive(profile.prefill_ms_per_1k_tokens, profile.name + ".prefill_ms_per_1k_tokens");
        require_positive(profile.decode_base_ms, profile.name + ".decode_base_ms");
        require_positive(profile.decode_slope_ms, profile.name + ".decode_slope_ms");
        require_positive(profile.mean_output_tokens, profile.name + ".mean_output_tokens");
        for (const auto& [tag, m] : profile.quantization) {
            require_positive(m.latency, profile.name + "." + tag + ".latency");
            require_positive(m.power, profile.name + "." + tag + ".power");
        }
    }

}  // namespace

ProfileCatalog catalog_from_json(const nlohmann::json& j) {
    if (j.value("schema_version", 0) != kProfileSchemaVersion)
        throw Error(ErrorKind::InvalidArgument, "unsupported profile schema_version");
    ProfileCatalog catalog;
    if (j.contains("hardware")) {
        const auto& h = j["hardware"];
        auto& hw = catalog.hardware;
        hw.base_idle_power_w = h.value("base_idle_power_w", hw.base_idle_power_w);
        hw.idle_power_per_gpu_w = h.value("idle_power_per_gpu_w", hw.idle_power_per_gpu_w);
        hw.per_gpu_active_power_w = h.value("per_gpu_active_power_w", hw.per_gpu_active_power_w);
        hw.batch_capacity_per_gpu = h.value("batch_capacity_per_gpu", hw.batch_capacity_per_gpu);
        hw.step_quantum_ms = h.value("step_quantum_ms", hw.step_quantum_ms);
    }
    for (const auto& [name, m] : j.at("models").items()) {
        ModelProfile p;
        p.name = name;
        p.prefill_ms_per_1k_tokens = m.at("prefill_ms_per_1k_tokens").get<double>();
        p.decode_base_ms = m.at("decode_base_ms").get<double>();
        p.decode_slope_ms = m.at("decode_slope_ms").get<double>();
        p.mean_output_tokens = m.at("mean_output_tokens").get<double>();
        p.quantization.clear();
        p.quantization["none"] = {};
        if (m.contains("quantization"))
            for (const auto& [tag, q] : m["quantization"].items())
                p.quantization[tag] = {q.value("latency", 1.0), q.value("power", 1.0)};
        validate_profile(p);
        catalog.models[name] = std::move(p);
    }
    return catalog;
}

nlohmann::json catalog_to_json(const ProfileCatalog& catalog) {
    nlohmann::json j;
    j["schema_version"] = kProfileSchemaVersion;
    const auto& hw = catalog.hardware;
    j["hardware"] = {{"base_idle_power_w", hw.base_idle_power_w},
                     {"idle_power_per_gpu_w", hw.idle_power_per_gpu_w},
                     {"per_gpu_active_power_w", hw.per_gpu_active_power_w},
                     {"batch_capacity_per_gpu", hw.batch_capacity_per_gpu},
                     {"step_quantum_ms", hw.step_quantum_ms}};
    for (const auto& [name, p] : catalog.models) {
        auto& m = j["models"][name];
        m["prefill_ms_per_1k_tokens"] = p.prefill_ms_per_1k_tokens;
        m["decode_base_ms"] = p.decode_base_ms;
        m["decode_slope_ms"] = p.decode_slope_ms;
        m["mean_output_tokens"] = p.mean_output_tokens;
        for (const auto& [tag, q] : p.quantization) m["quantization"][tag] = {{"latency", q.latency}, {"power", q.power}};
    }
    return j;
}

ProfileCatalog load_catalog(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Io, "cannot open profile file " + path);
    nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded()) throw Error(ErrorKind::InvalidArgument, "profile file " + path + " is not valid JSON");
    return catalog_from_json(j);
}

QuantizationMultipliers ServerConfig::multipliers() const {
    auto it = profile.quantization.find(quantization_tag);
    if (it == profile.quantization.end())
        throw Error(ErrorKind::InvalidArgument,
                    "profile '" + profile.name + "' has no quantization tag '" + quantization_tag + "'");
    return it->second;
}

void validate(const ServerConfig& config) {
    validate_profile(config.profile);
    (void)config.multipliers();
    if (config.max_concurrent_requests < 1)
        throw Error(ErrorKind::InvalidArgument, "max_concurrent_requests must be >= 1");
    if (config.gpu_count < 1) throw Error(ErrorKind::InvalidArgument, "gpu_count must be >= 1");
    if (config.batch_capacity_per_gpu < 1) throw Error(ErrorKind::InvalidArgument, "batch_capacity_per_gpu must be >= 1");
    if (config.idle_power_w < 0.0 || config.per_gpu_active_power_w < 0.0)
        throw Error(ErrorKind::InvalidArgument, "powers must be >= 0");
    if (config.step_quantum_ms < 0.0) throw Error(ErrorKind::InvalidArgument, "step_quantum_ms must be >= 0");
}

ServerConfig make_server_config(const ProfileCatalog& catalog, const SimulationConfig& sim) {
    ServerConfig cfg;
    cfg.profile = catalog.model(sim.model_profile);
    cfg.quantization_tag = sim.quantization_tag;
    cfg.max_concurrent_requests = sim.max_concurrent_requests;
    cfg.gpu_count = sim.gpu_count;
    const auto& hw = catalog.hardware;
    cfg.idle_power_w = hw.base_idle_power_w + hw.idle_power_per_gpu_w * sim.gpu_count;
    cfg.per_gpu_active_power_w = hw.per_gpu_active_power_w;
    cfg.batch_capacity_per_gpu = hw.batch_capacity_per_gpu;
    cfg.step_quantum_ms = hw.step_quantum_ms;
    validate(cfg);
    return cfg;
}

int estimate_prompt_tokens(std::size_t prompt_bytes) { return static_cast<int>((prompt_bytes + 3) / 4); }

BatchingServer::BatchingServer(ServerConfig config) : config_(std::move(config)) {
    validate(config_);
    multipliers_ = config_.multipliers();
}

Admission BatchingServer::submit(SequenceId id, int prompt_tokens, int output_tokens, double now_ms) {
    if (now_ms < now_) throw std::logic_error("BatchingServer::submit in the past");
    if (step_active_ && step_end_ <= now_ms) throw std::logic_error("BatchingServer::submit before advance_to");
    now_ = now_ms;
    if (admitted_ >= config_.max_concurrent_requests) return Admission::Rejected;
    if (sequences_.count(id)) throw std::logic_error("BatchingServer::submit with a live sequence id");

    Sequence seq;
    seq.info.output_tokens = std::max(output_tokens, 1);
    seq.info.submit_ms = now_ms;
    seq.prompt_tokens = std::max(prompt_tokens, 0);
    sequences_.emplace(id, seq);
    queue_.push_back(id);
    ++admitted_;
    peak_admitted_ = std::max(peak_admitted_, admitted_);
    if (!step_active_) start_step(now_ms);
    return Admission::Admitted;
}

bool BatchingServer::cancel_sequence(SequenceId id, double now_ms) {
    auto it = sequences_.find(id);
    if (it == sequences_.end()) return false;
    auto& info = it->second.info;
    if (info.state == SequenceState::Finished || info.state == SequenceState::Canceled) return false;
    now_ = std::max(now_, now_ms);
    info.cancel_requested_ms = now_ms;
    if (info.state == SequenceState::Queued) {
        info.state = SequenceState::Canceled;
        std::erase(queue_, id);
        release(id);
        return true;
    }
    info.state = SequenceState::Canceled;
    return true;
}

void BatchingServer::release(SequenceId id) {
    --admitted_;
    if (!keep_history_) sequences_.erase(id);
}

std::vector<Completion> BatchingServer::advance_to(double t_ms) {
    std::vector<Completion> done;
    while (step_active_ && step_end_ <= t_ms) finish_step(done);
    now_ = std::max(now_, t_ms);
    return done;
}

double BatchingServer::step_duration() const {
    const double batch = static_cast<double>(running_.size());
    double duration = (config_.profile.decode_base_ms + config_.profile.decode_slope_ms / config_.gpu_count * batch) *
                      multipliers_.latency;
    for (SequenceId id : running_) {
        const auto& seq = sequences_.at(id);
        if (seq.joined_this_step)
            duration += config_.profile.prefill_ms_per_1k_tokens * seq.prompt_tokens / 1000.0 * multipliers_.latency;
    }
    const double q = config_.step_quantum_ms;
    if (q > 0.0) duration = std::max(q, std::ceil(duration / q - 1e-9) * q);
    return duration;
}

double BatchingServer::watts_for_batch(int batch) const {
    const double utilization =
            std::clamp(static_cast<double>(batch) / static_cast<double>(config_.running_capacity()), 0.0, 1.0);
    return config_.idle_power_w +
           config_.per_gpu_active_power_w * config_.gpu_count * utilization * multipliers_.power;
}

void BatchingServer::start_step(double at) {
    // Boundary: drop canceled sequences, then admit from the queue.
    std::erase_if(running_, [&](SequenceId id) {
        auto it = sequences_.find(id);
        if (it->second.info.state != SequenceState::Canceled) return false;
        release(id);
        return true;
    });
    const auto capacity = static_cast<std::size_t>(config_.running_capacity());
    while (running_.size() < capacity && !queue_.empty()) {
        const SequenceId id = queue_.front();
        queue_.pop_front();
        auto& seq = sequences_.at(id);
        seq.info.state = SequenceState::Running;
        seq.joined_this_step = true;
        running_.push_back(id);
    }
    if (running_.empty()) {
        step_active_ = false;
        return;
    }
    step_active_ = true;
    step_start_ = at;
    step_batch_ = static_cast<int>(running_.size());
    step_end_ = at + step_duration();
    steps_.push_back({step_start_, step_end_, step_batch_, static_cast<int>(queue_.size()), watts_for_batch(step_batch_)});
}

void BatchingServer::finish_step(std::vector<Completion>& done) {
    now_ = std::max(now_, step_end_);
    const double t = step_end_;
    std::vector<SequenceId> finished;
    for (SequenceId id : running_) {
        auto& seq = sequences_.at(id);
        seq.joined_this_step = false;
        if (seq.info.state != SequenceState::Running) continue;
        if (!seq.info.first_token_ms) seq.info.first_token_ms = t;
        seq.info.last_token_ms = t;
        if (record_tokens_) tokens_.push_back({id, t, seq.info.tokens});
        if (++seq.info.tokens >= seq.info.output_tokens) {
            seq.info.state = SequenceState::Finished;
            seq.info.finish_ms = t;
            done.push_back({id, t, seq.info.tokens});
            finished.push_back(id);
        }
    }
    for (SequenceId id : finished) {
        std::erase(running_, id);
        release(id);
    }
    start_step(t);
}

double BatchingServer::power_now() const {
    if (step_active_ && now_ >= step_start_ && now_ < step_end_) return watts_for_batch(step_batch_);
    return config_.idle_power_w;
}

std::optional<SequenceInfo> BatchingServer::info(SequenceId id) const {
    auto it = sequences_.find(id);
    if (it == sequences_.end()) return std::nullopt;
    return it->second.info;
}

std::vector<TokenEvent> BatchingServer::drain_tokens() {
    std::vector<TokenEvent> out;
    out.swap(tokens_);
    return out;
}

std::string BatchingServer::step_log_csv() const {
    std::ostringstream out;
    out << "start_ms,end_ms,batch_size,queue_depth,watts\n";
    char buf[128];
    for (const auto& s : steps_) {
        std::snprintf(buf, sizeof buf, "%.3f,%.3f,%d,%d,%.3f\n", s.start_ms, s.end_ms, s.batch_size, s.queue_depth,
                      s.watts);
        out << buf;
    }
    return out.str();
}

}  // namespace assistbench::mock
