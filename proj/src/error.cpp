#include "decert/error.hpp"

namespace decert {

std::string_view error_code_name(ErrorCode code) {
    switch (code) {
        case ErrorCode::MalformedName: return "MalformedName";
        case ErrorCode::UniverseTooLarge: return "UniverseTooLarge";
        case ErrorCode::EncodingOverflow: return "EncodingOverflow";
        case ErrorCode::InvalidPathLen: return "InvalidPathLen";
        case ErrorCode::MalformedExtension: return "MalformedExtension";
        case ErrorCode::MalformedCertificate: return "MalformedCertificate";
        case ErrorCode::MalformedRequest: return "MalformedRequest";
        case ErrorCode::PolicyViolation: return "PolicyViolation";
        case ErrorCode::SigningFailure: return "SigningFailure";
        case ErrorCode::ClockError: return "ClockError";
        case ErrorCode::UnsupportedAlgorithm: return "UnsupportedAlgorithm";
        case ErrorCode::RevokedSubject: return "RevokedSubject";
        case ErrorCode::UnknownSubject: return "UnknownSubject";
        case ErrorCode::UnknownSerial: return "UnknownSerial";
        case ErrorCode::AlreadyRevoked: return "AlreadyRevoked";
        case ErrorCode::StaleNonce: return "StaleNonce";
        case ErrorCode::BadSignature: return "BadSignature";
        case ErrorCode::ChainMalformed: return "ChainMalformed";
        case ErrorCode::BindFailure: return "BindFailure";
        case ErrorCode::KeyMismatch: return "KeyMismatch";
        case ErrorCode::NetworkError: return "NetworkError";
        case ErrorCode::CorpusMismatch: return "CorpusMismatch";
        case ErrorCode::LookupFailed: return "LookupFailed";
        case ErrorCode::IoError: return "IoError";
    }
    return "UnknownError";
}

}  // namespace decert
