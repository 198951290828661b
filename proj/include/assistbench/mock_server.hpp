#pragma once

// Continuous-batching generation server model.
//
// Time advances in batching steps. At each step boundary, canceled sequences
// leave the batch, queued sequences join it up to the running capacity, and a
// step of
//
//     (decode_base + decode_slope / gpu_count * batch) * latency_multiplier
//       + prefill cost of the sequences that joined at this boundary
//
// milliseconds starts (rounded up to the step quantum). Every running
// sequence receives one token when the step ends. Instantaneous power is
//
//     idle_power + per_gpu_active_power * gpu_count * utilization * power_multiplier
//
// with utilization = batch / running capacity while a step runs, else 0.

#include "assistbench/config.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <deque>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace assistbench::mock {

struct QuantizationMultipliers {
    double latency = 1.0;
    double power = 1.0;
};

struct ModelProfile {
    std::string name = "default";
    double prefill_ms_per_1k_tokens = 20.0;
    double decode_base_ms = 10.0;
    double decode_slope_ms = 1.0;
    double mean_output_tokens = 40.0;
    std::map<std::string, QuantizationMultipliers> quantization = {{"none", {}}};
};

// Machine-level constants shared by every model on the server.
struct HardwareProfile {
    double base_idle_power_w = 195.0;
    double idle_power_per_gpu_w = 18.75;
    double per_gpu_active_power_w = 200.0;
    int batch_capacity_per_gpu = 8;
    double step_quantum_ms = 1.0;
};

struct ProfileCatalog {
    HardwareProfile hardware;
    std::map<std::string, ModelProfile> models;

    const ModelProfile& model(const std::string& name) const;
};

// Built-in starcoder / starcoder2-15b / starcoder2-7b profiles with the
// none / eetq / bnb-nf4 / bnb-fp4 quantization tags.
ProfileCatalog default_catalog();
ProfileCatalog catalog_from_json(const nlohmann::json& j);
nlohmann::json catalog_to_json(const ProfileCatalog& catalog);
ProfileCatalog load_catalog(const std::string& path);

inline constexpr int kProfileSchemaVersion = 1;

struct ServerConfig {
    ModelProfile profile;
    std::string quantization_tag = "none";
    int max_concurrent_requests = 1000;
    int gpu_count = 1;
    double idle_power_w = 270.0;
    double per_gpu_active_power_w = 200.0;
    int batch_capacity_per_gpu = 8;
    double step_quantum_ms = 1.0;

    int running_capacity() const { return batch_capacity_per_gpu * gpu_count; }
    QuantizationMultipliers multipliers() const;
};

// Throws Error(InvalidArgument) when an invariant of ServerConfig fails.
void validate(const ServerConfig& config);

// Unused GPUs draw nothing: idle power scales with gpu_count.
ServerConfig make_server_config(const ProfileCatalog& catalog, const SimulationConfig& config);

struct StepRecord {
    double start_ms = 0.0;
    double end_ms = 0.0;
    int batch_size = 0;
    int queue_depth = 0;
    double watts = 0.0;
};

using SequenceId = std::uint64_t;

enum class SequenceState { Queued, Running, Finished, Canceled };

struct SequenceInfo {
    SequenceState state = SequenceState::Queued;
    int tokens = 0;
    int output_tokens = 0;
    double submit_ms = 0.0;
    std::optional<double> first_token_ms;
    std::optional<double> last_token_ms;
    std::optional<double> cancel_requested_ms;
    std::optional<double> finish_ms;
};

struct Completion {
    SequenceId id = 0;
    double time_ms = 0.0;
    int tokens = 0;
};

struct TokenEvent {
    SequenceId id = 0;
    double time_ms = 0.0;
    int index = 0;  // 0-based
};

enum class Admission { Admitted, Rejected };

// Single-threaded discrete-event core; callers serialise access.
class BatchingServer {
  public:
    explicit BatchingServer(ServerConfig config);

    const ServerConfig& config() const { return config_; }

    // Submission at `now_ms` (must not precede now()). Rejected when the
    // admitted count (queued + running) has reached max_concurrent_requests.
    Admission submit(SequenceId id, int prompt_tokens, int output_tokens, double now_ms);

    // Queued sequences leave immediately; running ones stop receiving tokens
    // and leave the batch at the next step boundary. Unknown or finished ids
    // are ignored. Returns true when a live sequence was canceled.
    bool cancel_sequence(SequenceId id, double now_ms);

    // Processes every step ending at or before t_ms.
    std::vector<Completion> advance_to(double t_ms);

    // Time of the next step boundary, +inf when idle.
    double next_boundary() const { return step_active_ ? step_end_ : std::numeric_limits<double>::infinity(); }
    double now() const { return now_; }

    double power_now() const;
    int admitted() const { return admitted_; }
    int running() const { return static_cast<int>(running_.size()); }
    int queued() const { return static_cast<int>(queue_.size()); }
    int peak_admitted() const { return peak_admitted_; }

    std::optional<SequenceInfo> info(SequenceId id) const;
    const std::vector<StepRecord>& step_log() const { return steps_; }
    std::string step_log_csv() const;

    // Tokens emitted since the last call, in emission order.
    std::vector<TokenEvent> drain_tokens();
    void set_token_recording(bool enabled) { record_tokens_ = enabled; }
    // Finished and canceled sequences are forgotten once drained when false.
    void set_keep_history(bool keep) { keep_history_ = keep; }

  private:
    struct Sequence {
        SequenceInfo info;
        int prompt_tokens = 0;
        bool joined_this_step = false;
    };

    void start_step(double at);
    void finish_step(std::vector<Completion>& done);
    double step_duration() const;
    double watts_for_batch(int batch) const;
    void release(SequenceId id);

    ServerConfig config_;
    QuantizationMultipliers multipliers_;
    double now_ = 0.0;
    bool step_active_ = false;
    double step_start_ = 0.0;
    double step_end_ = 0.0;
    int step_batch_ = 0;
    int admitted_ = 0;
    int peak_admitted_ = 0;
    bool record_tokens_ = false;
    bool keep_history_ = true;
    std::deque<SequenceId> queue_;
    std::vector<SequenceId> running_;
    std::unordered_map<SequenceId, Sequence> sequences_;
    std::vector<StepRecord> steps_;
    std::vector<TokenEvent> tokens_;
};

// Rough token count used for prefill cost: one token per four bytes.
int estimate_prompt_tokens(std::size_t prompt_bytes);

}  // namespace assistbench::mock
