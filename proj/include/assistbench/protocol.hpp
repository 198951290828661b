#pragma once

// Generation wire protocol.
//
//   POST /v1/generate  {"prompt": str, "max_new_tokens": int, "stream": bool}
//   stream=true   text/event-stream, one frame per token:
//                   data: {"token":"tok","index":0}
//                 terminated by
//                   data: {"done":true,"tokens":n}
//                 ": keep-alive" comment lines may appear while queued.
//   stream=false  {"text": str, "tokens": n}
//   overload      HTTP 429, {"error":"overloaded"}
//
// A client cancels by closing the connection.

#include <string>
#include <string_view>
#include <vector>

namespace assistbench::protocol {

inline constexpr std::string_view kGeneratePath = "/v1/generate";
inline constexpr std::string_view kPowerPath = "/v1/power";
inline constexpr std::string_view kStepsPath = "/v1/steps";
inline constexpr std::string_view kOverloadedBody = R"({"error":"overloaded"})";
inline constexpr int kOverloadedStatus = 429;
inline constexpr std::string_view kTokenText = "tok";
inline constexpr std::string_view kKeepAlive = ": keep-alive\n\n";

std::string token_frame(int index);
std::string done_frame(int tokens);

// Incremental SSE reader: feed() raw bytes, get back the payloads of the
// complete "data:" lines seen so far. Comment lines are skipped.
class SseReader {
  public:
    std::vector<std::string> feed(std::string_view bytes);

  private:
    std::string pending_;
};

}  // namespace assistbench::protocol
