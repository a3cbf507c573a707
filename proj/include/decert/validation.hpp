#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "decert/certificate.hpp"
#include "decert/domain.hpp"
#include "decert/revocation.hpp"

namespace decert {

enum class ViolationCode {
    UnknownCriticalExtension,
    ChainMalformed,
    SignatureInvalid,
    Expired,
    NotYetValid,
    CAFlagInvalid,
    SANMissing,
    DelegationInfoMismatch,
    IncludeNotSubset,
    ExcludeNotSubset,
    PathLenExceeded,
    KeyUsageNotSubset,
    HostnameNotInScope,
    HostnameExcluded,
    Revoked,
    UntrustedRoot,
};

std::string_view violation_code_name(ViolationCode code);
std::optional<ViolationCode> violation_code_from_name(std::string_view name);

struct Violation {
    size_t chain_index = 0;
    ViolationCode code;
    std::string detail;

    auto operator<=>(const Violation &) const = default;
};

enum class Verdict { Accept, Reject };

// Violations are exhaustive: validation never stops at the first failure, so
// a chain that is invalid for three distinct reasons reports all three.
struct ValidationReport {
    Verdict verdict = Verdict::Reject;
    std::vector<Violation> violations;

    [[nodiscard]] bool accepted() const { return verdict == Verdict::Accept; }
    [[nodiscard]] std::set<ViolationCode> codes() const;
    // One `index<TAB>code<TAB>detail` line per violation, verdict line last.
    [[nodiscard]] std::string to_text() const;
    [[nodiscard]] std::string to_json() const;
};

enum class ValidationMode { DeCertAware, Strict };
enum class RevocationPolicyKind { None, Crl, Dns };

struct ValidatorConfig {
    size_t max_delegation_depth = 4;
    // Applies when a revocation status cannot be determined (lookup failure,
    // missing or stale CRL). DeCerts default to fail-closed.
    bool fail_open = false;
};

struct ValidationInput {
    std::vector<ParsedCertificate> chain;  // leaf-first, as presented
    std::vector<ParsedCertificate> trust_anchors;
    DomainName hostname;
    int64_t at = 0;
    ValidationMode mode = ValidationMode::DeCertAware;
    RevocationPolicyKind revocation = RevocationPolicyKind::None;
    std::vector<CrlDocument> crls;    // Crl policy
    TxtResolver *resolver = nullptr;  // Dns policy
    ValidatorConfig config;
};

ValidationReport validate_chain(const ValidationInput &input);

// Delegation checks for one link; parent is the child's issuer and is either
// another DeCert or the EEC. Violations are reported without chain indices;
// the caller attributes them to the child's position.
std::vector<Violation> validate_link(const ParsedCertificate &parent,
                                     const ParsedCertificate &child);

// Scope a validated chain may serve: the leaf scope augmented with every
// ancestor DeCert exclude whose subtree intersects the leaf's includes. For
// chains that pass the link checks this equals the leaf scope's denotation.
DomainScope effective_scope(const CertificateChain &chain);

}  // namespace decert
