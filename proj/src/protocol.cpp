#include "assistbench/protocol.hpp"

namespace assistbench::protocol {

std::string token_frame(int index) {
    return "data: {\"token\":\"" + std::string(kTokenText) + "\",\"index\":" + std::to_string(index) + "}\n\n";
}

std::string done_frame(int tokens) { return "data: {\"done\":true,\"tokens\":" + std::to_string(tokens) + "}\n\n"; }

std::vector<std::string> SseReader::feed(std::string_view bytes) {
    pending_.append(bytes);
    std::vector<std::string> out;
    std::size_t start = 0;
    for (;;) {
        const auto nl = pending_.find('\n', start);
        if (nl == std::string::npos) break;
        std::string_view line(pending_.data() + start, nl - start);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.rfind("data:", 0) == 0) {
            line.remove_prefix(5);
            if (!line.empty() && line.front() == ' ') line.remove_prefix(1);
            out.emplace_back(line);
        }
        start = nl + 1;
    }
    pending_.erase(0, start);
    return out;
}

}  // namespace assistbench::protocol
