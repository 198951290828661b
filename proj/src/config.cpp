#include "assistbench/config.hpp"

#include "assistbench/error.hpp"
#include "assistbench/rng.hpp"

#include <algorithm>
#include <cstdio>

namespace assistbench {

const char* to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::Io: return "io";
        case ErrorKind::EmptyDataset: return "empty-dataset";
        case ErrorKind::InvalidArgument: return "invalid-argument";
        case ErrorKind::UndefinedRetention: return "undefined-retention";
        case ErrorKind::PlanEmpty: return "plan-empty";
        case ErrorKind::EmptyWindow: return "empty-window";
        case ErrorKind::EmptyOverlap: return "empty-overlap";
        case ErrorKind::Unreachable: return "unreachable";
        case ErrorKind::Startup: return "startup";
        case ErrorKind::NoData: return "no-data";
    }
    return "unknown";
}

std::string_view to_string(StreamingMode mode) {
    return mode == StreamingMode::StreamWithCancel ? "stream" : "no-stream";
}

std::string_view to_string(TriggerMode mode) {
    return mode == TriggerMode::Automatic ? "automatic" : "manual";
}

StreamingMode parse_streaming_mode(std::string_view text) {
    if (text == "stream" || text == "stream-with-cancel") return StreamingMode::StreamWithCancel;
    if (text == "no-stream" || text == "nostream") return StreamingMode::NoStream;
    throw Error(ErrorKind::InvalidArgument, "unknown streaming mode: " + std::string(text));
}

TriggerMode parse_trigger_mode(std::string_view text) {
    if (text == "automatic" || text == "auto") return TriggerMode::Automatic;
    if (text == "manual" || text == "manual-emulated") return TriggerMode::ManualEmulated;
    throw Error(ErrorKind::InvalidArgument, "unknown trigger mode: " + std::string(text));
}

std::string_view to_string(Factor factor) {
    switch (factor) {
        case Factor::Developers: return "developers";
        case Factor::Streaming: return "streaming";
        case Factor::Trigger: return "trigger";
        case Factor::ModelProfile: return "model";
        case Factor::Quantization: return "quantization";
        case Factor::MaxConcurrentRequests: return "max_concurrent_requests";
        case Factor::GpuCount: return "gpu_count";
    }
    return "unknown";
}

std::string factor_value(const SimulationConfig& config, Factor factor) {
    switch (factor) {
        case Factor::Developers: return std::to_string(config.developers);
        case Factor::Streaming: return std::string(to_string(config.streaming));
        case Factor::Trigger: return std::string(to_string(config.trigger));
        case Factor::ModelProfile: return config.model_profile;
        case Factor::Quantization: return config.quantization_tag;
        case Factor::MaxConcurrentRequests: return std::to_string(config.max_concurrent_requests);
        case Factor::GpuCount: return std::to_string(config.gpu_count);
    }
    return {};
}

void validate_config(const SimulationConfig& config, bool strict_developers) {
    if (config.developers < 1)
        throw Error(ErrorKind::InvalidArgument, "developers must be >= 1");
    if (strict_developers &&
        std::find(kDeveloperAxis.begin(), kDeveloperAxis.end(), config.developers) == kDeveloperAxis.end())
        throw Error(ErrorKind::InvalidArgument,
                    "developers=" + std::to_string(config.developers) + " is not on the developer axis");
    if (std::find(kGpuAxis.begin(), kGpuAxis.end(), config.gpu_count) == kGpuAxis.end())
        throw Error(ErrorKind::InvalidArgument, "gpu_count must be one of 1, 2, 4");
    if (config.max_concurrent_requests < 1)
        throw Error(ErrorKind::InvalidArgument, "max_concurrent_requests must be >= 1");
    if (config.model_profile.empty())
        throw Error(ErrorKind::InvalidArgument, "model_profile must not be empty");
    if (config.quantization_tag.empty())
        throw Error(ErrorKind::InvalidArgument, "quantization_tag must not be empty");
}

std::string canonical_string(const SimulationConfig& config) {
    std::string out;
    out += "developers=" + std::to_string(config.developers);
    out += ";streaming=" + std::string(to_string(config.streaming));
    out += ";trigger=" + std::string(to_string(config.trigger));
    out += ";model=" + config.model_profile;
    out += ";quantization=" + config.quantization_tag;
    out += ";max_concurrent_requests=" + std::to_string(config.max_concurrent_requests);
    out += ";gpu_count=" + std::to_string(config.gpu_count);
    return out;
}

std::uint64_t config_hash(const SimulationConfig& config) { return fnv1a64(canonical_string(config)); }

std::string config_key(const SimulationConfig& config) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(config_hash(config)));
    return buf;
}

void to_json(nlohmann::json& j, const SimulationConfig& config) {
    j = nlohmann::json{
            {"developers", config.developers},
            {"streaming", to_string(config.streaming)},
            {"trigger", to_string(config.trigger)},
            {"model_profile", config.model_profile},
            {"quantization_tag", config.quantization_tag},
            {"max_concurrent_requests", config.max_concurrent_requests},
            {"gpu_count", config.gpu_count},
    };
}

void from_json(const nlohmann::json& j, SimulationConfig& config) {
    SimulationConfig out;
    out.developers = j.value("developers", out.developers);
    if (j.contains("streaming")) out.streaming = parse_streaming_mode(j.at("streaming").get<std::string>());
    if (j.contains("trigger")) out.trigger = parse_trigger_mode(j.at("trigger").get<std::string>());
    out.model_profile = j.value("model_profile", out.model_profile);
    out.quantization_tag = j.value("quantization_tag", out.quantization_tag);
    out.max_concurrent_requests = j.value("max_concurrent_requests", out.max_concurrent_requests);
    out.gpu_count = j.value("gpu_count", out.gpu_count);
    config = std::move(out);
}

}  // namespace assistbench
