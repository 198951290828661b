#pragma once

#include <stdexcept>
#include <string>

namespace assistbench {

enum class ErrorKind {
    Io,
    EmptyDataset,
    InvalidArgument,
    UndefinedRetention,
    PlanEmpty,
    EmptyWindow,
    EmptyOverlap,
    Unreachable,
    Startup,
    NoData,
};

const char* to_string(ErrorKind kind);

// Single exception type for the library; callers branch on kind().
class Error : public std::runtime_error {
  public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

  private:
    ErrorKind kind_;
};

}  // namespace assistbench
