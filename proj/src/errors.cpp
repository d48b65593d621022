#include "malscan/errors.hpp"

namespace malscan {

const char* error_code_name(ErrorCode code) {
    switch (code) {
        case ErrorCode::UnsupportedArchive: return "UnsupportedArchive";
        case ErrorCode::CorruptArchive: return "CorruptArchive";
        case ErrorCode::PathTraversal: return "PathTraversal";
        case ErrorCode::IoError: return "IoError";
        case ErrorCode::KatzDiverged: return "KatzDiverged";
        case ErrorCode::AlreadyAdjusted: return "AlreadyAdjusted";
        case ErrorCode::MixedMetrics: return "MixedMetrics";
        case ErrorCode::EmptyCorpus: return "EmptyCorpus";
        case ErrorCode::LlmUnavailable: return "LlmUnavailable";
        case ErrorCode::MalformedResponse: return "MalformedResponse";
        case ErrorCode::Timeout: return "Timeout";
        case ErrorCode::AuthFailure: return "AuthFailure";
        case ErrorCode::DimensionMismatch: return "DimensionMismatch";
        case ErrorCode::DegenerateData: return "DegenerateData";
        case ErrorCode::TooFewSamples: return "TooFewSamples";
        case ErrorCode::NoNonZeroFeatures: return "NoNonZeroFeatures";
        case ErrorCode::MissingGroundTruth: return "MissingGroundTruth";
        case ErrorCode::InsufficientDonors: return "InsufficientDonors";
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::UnknownModelVersion: return "UnknownModelVersion";
        case ErrorCode::FingerprintMismatch: return "FingerprintMismatch";
    }
    return "UnknownError";
}

}  // namespace malscan
