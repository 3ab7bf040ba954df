#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace vfr {

enum class ErrorCode {
    invalid_input,
    backend_error,
    contract_violation,
    pose_incomplete,
    numeric_failure,
    insufficient_samples,
    not_found,
    validation,
    io,
    configuration,
    usage,
};

constexpr std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::invalid_input: return "invalid_input";
        case ErrorCode::backend_error: return "backend_error";
        case ErrorCode::contract_violation: return "contract_violation";
        case ErrorCode::pose_incomplete: return "pose_incomplete";
        case ErrorCode::numeric_failure: return "numeric_failure";
        case ErrorCode::insufficient_samples: return "insufficient_samples";
        case ErrorCode::not_found: return "not_found";
        case ErrorCode::validation: return "validation";
        case ErrorCode::io: return "io";
        case ErrorCode::configuration: return "configuration";
        case ErrorCode::usage: return "usage";
    }
    return "unknown";
}

/// Every failure in the library surfaces as this exception. `stage` is filled
/// in by the pipeline when an error crosses a stage boundary.
class Error : public std::runtime_error {
  public:
    Error(ErrorCode code, const std::string& message, std::string stage = {})
        : std::runtime_error(message), code_(code), stage_(std::move(stage)) {}

    ErrorCode code() const noexcept { return code_; }
    const std::string& stage() const noexcept { return stage_; }

    Error with_stage(std::string stage) const { return Error(code_, what(), std::move(stage)); }

  private:
    ErrorCode code_;
    std::string stage_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) { throw Error(code, message); }

inline void require(bool condition, ErrorCode code, const std::string& message) {
    if (!condition) fail(code, message);
}

}  // namespace vfr
