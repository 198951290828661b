#pragma once

#include <nlohmann/json.hpp>

#include <array>
#include <compare>
#include <cstdint>
#include <string>
#include <string_view>

namespace assistbench {

enum class StreamingMode { StreamWithCancel, NoStream };
enum class TriggerMode { Automatic, ManualEmulated };

std::string_view to_string(StreamingMode mode);
std::string_view to_string(TriggerMode mode);
StreamingMode parse_streaming_mode(std::string_view text);
TriggerMode parse_trigger_mode(std::string_view text);

// One point in the factor space.
struct SimulationConfig {
    int developers = 1;
    StreamingMode streaming = StreamingMode::StreamWithCancel;
    TriggerMode trigger = TriggerMode::Automatic;
    std::string model_profile = "starcoder2-7b";
    std::string quantization_tag = "none";
    int max_concurrent_requests = 1000;
    int gpu_count = 4;

    auto operator<=>(const SimulationConfig&) const = default;
};

// The factors varied by a sweep, in canonical order.
enum class Factor {
    Developers,
    Streaming,
    Trigger,
    ModelProfile,
    Quantization,
    MaxConcurrentRequests,
    GpuCount,
};

inline constexpr std::array<Factor, 7> kAllFactors = {
        Factor::Developers,   Factor::Streaming,
        Factor::Trigger,      Factor::ModelProfile,
        Factor::Quantization, Factor::MaxConcurrentRequests,
        Factor::GpuCount,
};

std::string_view to_string(Factor factor);
std::string factor_value(const SimulationConfig& config, Factor factor);

inline constexpr std::array<int, 14> kDeveloperAxis = {1, 2, 5, 10, 20, 30, 50, 75, 100, 150, 200, 300, 400, 500};
inline constexpr std::array<int, 3> kGpuAxis = {1, 2, 4};

// Throws Error(InvalidArgument) on values outside the declared axis domains.
// With strict_developers=false any positive developer count is accepted.
void validate_config(const SimulationConfig& config, bool strict_developers = true);

// Canonical single-line form; input to config_hash.
std::string canonical_string(const SimulationConfig& config);
// FNV-1a 64 over canonical_string; stable across platforms and runs.
std::uint64_t config_hash(const SimulationConfig& config);
// 16 lowercase hex digits of config_hash.
std::string config_key(const SimulationConfig& config);

void to_json(nlohmann::json& j, const SimulationConfig& config);
void from_json(const nlohmann::json& j, SimulationConfig& config);

inline constexpr int kConfigSchemaVersion = 1;

}  // namespace assistbench
