#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace malscan {

enum class ErrorCode {
    UnsupportedArchive,
    CorruptArchive,
    PathTraversal,
    IoError,
    KatzDiverged,
    AlreadyAdjusted,
    MixedMetrics,
    EmptyCorpus,
    LlmUnavailable,
    MalformedResponse,
    Timeout,
    AuthFailure,
    DimensionMismatch,
    DegenerateData,
    TooFewSamples,
    NoNonZeroFeatures,
    MissingGroundTruth,
    InsufficientDonors,
    InvalidArgument,
    UnknownModelVersion,
    FingerprintMismatch,
};

const char* error_code_name(ErrorCode code);

// Single exception type for all operational failures; code() identifies the
// contract violation so callers and tests can discriminate without a class
// per error.
class ScanError : public std::runtime_error {
public:
    ScanError(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(error_code_name(code)) + ": " + message), code_(code) {}

    ErrorCode code() const { return code_; }

private:
    ErrorCode code_;
};

// Non-fatal diagnostics accumulated during a scan (unreadable files, syntax
// errors, dropped report entries). Passing nullptr discards them.
struct WarningLog {
    std::vector<std::string> messages;

    void add(std::string message) { messages.push_back(std::move(message)); }
};

inline void warn(WarningLog* log, std::string message) {
    if (log != nullptr) log->add(std::move(message));
}

}  // namespace malscan
