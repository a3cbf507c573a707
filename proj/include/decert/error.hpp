#pragma once

#include <stdexcept>
#include <string>

namespace decert {

enum class ErrorCode {
    MalformedName,
    UniverseTooLarge,
    EncodingOverflow,
    InvalidPathLen,
    MalformedExtension,
    MalformedCertificate,
    MalformedRequest,
    PolicyViolation,
    SigningFailure,
    ClockError,
    UnsupportedAlgorithm,
    RevokedSubject,
    UnknownSubject,
    UnknownSerial,
    AlreadyRevoked,
    StaleNonce,
    BadSignature,
    ChainMalformed,
    BindFailure,
    KeyMismatch,
    NetworkError,
    CorpusMismatch,
    LookupFailed,
    IoError,
};

std::string_view error_code_name(ErrorCode code);

class Error : public std::runtime_error {
  public:
    Error(ErrorCode code, const std::string &message)
        : std::runtime_error(std::string(error_code_name(code)) + ": " + message), code_(code) {}

    [[nodiscard]] ErrorCode code() const noexcept { return code_; }

  private:
    ErrorCode code_;
};

}  // namespace decert
