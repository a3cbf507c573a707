#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "decert/certificate.hpp"
#include "decert/clock.hpp"
#include "decert/domain.hpp"
#include "decert/keys.hpp"
#include "decert/revocation.hpp"

struct X509_req_st;

namespace decert {

// PKCS#10 CSR carrying the requested delegation as extensions: SAN for the
// include patterns, DelegationInfo for excludes and path length, KeyUsage when
// constrained. The CSR self-signature is the proof of possession.
class DelegationRequest {
  public:
    static DelegationRequest create(const std::string &subject_common_name, const PrivateKey &key,
                                    const DomainScope &scope,
                                    const std::optional<KeyUsageSet> &key_usage,
                                    uint32_t path_len);
    static DelegationRequest from_der(std::span<const uint8_t> der);  // Error{MalformedRequest}

    [[nodiscard]] const std::string &subject_common_name() const { return subject_cn_; }
    [[nodiscard]] const std::vector<uint8_t> &public_key() const { return public_key_; }
    [[nodiscard]] const DomainScope &requested_scope() const { return scope_; }
    [[nodiscard]] const std::optional<KeyUsageSet> &requested_key_usage() const { return key_usage_; }
    [[nodiscard]] uint32_t requested_path_len() const { return path_len_; }
    [[nodiscard]] bool verify_proof() const;
    [[nodiscard]] const std::vector<uint8_t> &to_der() const { return der_; }

  private:
    DelegationRequest() = default;

    std::shared_ptr<X509_req_st> req_;
    std::vector<uint8_t> der_;
    std::string subject_cn_;
    std::vector<uint8_t> public_key_;
    DomainScope scope_;
    std::optional<KeyUsageSet> key_usage_;
    uint32_t path_len_ = 0;
};

struct IssuerPolicy {
    std::set<KeyAlgorithm> allowed_key_algorithms = {KeyAlgorithm::EcdsaP256,
                                                     KeyAlgorithm::Ed25519};
    size_t min_key_bits = 253;  // Ed25519 reports 253
    int64_t max_validity_seconds = 30 * 24 * 3600;
    int64_t default_validity_seconds = 6 * 3600;
    uint32_t max_path_len = 4;
    std::optional<KeyUsageSet> allowed_key_usage;  // absent = unconstrained
};

enum class PolicyCode {
    IncludeNotSubset,
    ExcludeNotSubset,
    KeyUsageNotSubset,
    PathLenExceeded,
    UnsupportedAlgorithm,
    KeyTooSmall,
    ProofInvalid,
};

std::string_view policy_code_name(PolicyCode code);

struct PolicyViolation {
    PolicyCode code;
    std::string detail;
};

// Pure check that a request stays inside the issuer's own authority. The
// issuer scope is the EEC's SAN-derived scope (or the issuing DeCert's own
// scope); the path budget is the issuing DeCert's path length, or the policy
// maximum when the owner issues straight from an EEC.
std::vector<PolicyViolation> policy_check(const DelegationRequest &request,
                                          const IssuerPolicy &policy,
                                          const DomainScope &issuer_scope,
                                          const std::optional<KeyUsageSet> &issuer_key_usage,
                                          uint32_t issuer_path_budget);

// Derives the scope/key-usage/budget arguments of policy_check from an issuer
// certificate (EEC or DeCert).
std::vector<PolicyViolation> policy_check_against(const DelegationRequest &request,
                                                  const IssuerPolicy &policy,
                                                  const ParsedCertificate &issuer_cert);

struct IssueOptions {
    std::optional<int64_t> validity_seconds;  // default: policy default
    std::optional<std::string> crl_url;
    std::optional<std::string> revocation_dns_suffix;
};

// Signs a DeCert for a request that passes policy_check_against; throws
// Error{PolicyViolation} listing the codes otherwise. notBefore is backdated
// 60 s for clock skew and notAfter = notBefore + validity.
ParsedCertificate issue_decert(const DelegationRequest &request,
                               const ParsedCertificate &issuer_cert, const PrivateKey &issuer_key,
                               const IssuerPolicy &policy, const Clock &clock,
                               const IssueOptions &options = {},
                               const RandomBytes &random = system_random());

// Re-signs an existing DeCert with a fresh serial and validity window. With
// key reuse the SubjectPublicKeyInfo octets are copied verbatim, so child
// DeCerts signed under the subject key keep verifying; rotated_key replaces
// the key instead (key-compromise path). Scope, key usage and path length are
// copied verbatim. Throws Error{UnknownSubject} when the certificate was not
// signed by this issuer, Error{RevokedSubject} when the store lists it.
ParsedCertificate renew_decert(const ParsedCertificate &existing,
                               const ParsedCertificate &issuer_cert, const PrivateKey &issuer_key,
                               const Clock &clock, bool reuse_key = true,
                               const PrivateKey *rotated_key = nullptr,
                               std::optional<int64_t> validity_seconds = std::nullopt,
                               const RevocationStore *store = nullptr,
                               const RandomBytes &random = system_random());

// Issued-certificate index: one `<serial-hex>.pem` file per certificate,
// re-scanned on open so service restarts keep their state. Single writer.
class IssuedStore {
  public:
    static IssuedStore open(const std::filesystem::path &directory);

    void record(const ParsedCertificate &cert);
    [[nodiscard]] std::optional<ParsedCertificate> find(const std::vector<uint8_t> &serial) const;
    [[nodiscard]] size_t size() const;
    [[nodiscard]] const std::filesystem::path &directory() const { return directory_; }

  private:
    IssuedStore() = default;

    std::filesystem::path directory_;
    mutable std::mutex mutex_;

  public:
    IssuedStore(IssuedStore &&other) noexcept : directory_(std::move(other.directory_)) {}
    IssuedStore &operator=(IssuedStore &&) = delete;
};

}  // namespace decert
