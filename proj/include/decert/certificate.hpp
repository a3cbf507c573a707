#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "decert/delegation_info.hpp"
#include "decert/domain.hpp"
#include "decert/keys.hpp"

struct x509_st;

namespace decert {

// X.509 KeyUsage as a set of bit indices 0..8; the subset relation used by
// delegation checks is plain set inclusion.
struct KeyUsageSet {
    uint16_t bits = 0;

    static KeyUsageSet of(std::initializer_list<int> indices);
    static std::optional<KeyUsageSet> parse(std::string_view csv);

    void set(int index);
    [[nodiscard]] bool contains(int index) const { return (bits >> index) & 1; }
    [[nodiscard]] bool is_subset_of(const KeyUsageSet &other) const {
        return (bits & ~other.bits) == 0;
    }
    [[nodiscard]] bool empty() const { return bits == 0; }
    [[nodiscard]] std::vector<int> indices() const;
    [[nodiscard]] std::string text() const;

    bool operator==(const KeyUsageSet &) const = default;
};

struct CertTemplate {
    std::string subject_common_name;
    std::vector<DomainPattern> san;
    std::optional<KeyUsageSet> key_usage;
    std::optional<DelegationInfo> delegation_info;
    bool is_ca = false;
    std::optional<int> basic_path_len;  // CA certificates only
    std::vector<uint8_t> serial;        // positive big-endian, 1..20 octets
    int64_t not_before = 0;
    int64_t not_after = 0;
    std::vector<uint8_t> public_key;    // SubjectPublicKeyInfo DER
    std::optional<std::string> crl_url;
    std::optional<std::string> revocation_dns_suffix;
};

class ParsedCertificate {
  public:
    [[nodiscard]] const std::string &subject_common_name() const { return subject_cn_; }
    [[nodiscard]] const std::string &issuer_common_name() const { return issuer_cn_; }
    [[nodiscard]] const std::vector<DomainPattern> &san_patterns() const { return san_; }
    [[nodiscard]] const std::optional<DelegationInfo> &delegation_info() const { return delegation_info_; }
    [[nodiscard]] const std::optional<KeyUsageSet> &key_usage() const { return key_usage_; }
    [[nodiscard]] bool is_ca() const { return is_ca_; }
    [[nodiscard]] std::optional<int> basic_path_len() const { return basic_path_len_; }
    [[nodiscard]] const std::vector<uint8_t> &serial() const { return serial_; }
    [[nodiscard]] std::string serial_hex() const;
    [[nodiscard]] int64_t not_before() const { return not_before_; }
    [[nodiscard]] int64_t not_after() const { return not_after_; }
    [[nodiscard]] const std::vector<uint8_t> &public_key() const { return public_key_; }
    [[nodiscard]] const std::vector<uint8_t> &raw_der() const { return raw_der_; }
    [[nodiscard]] const std::optional<std::string> &crl_url() const { return crl_url_; }
    [[nodiscard]] const std::optional<std::string> &revocation_dns_suffix() const {
        return revocation_dns_suffix_;
    }
    [[nodiscard]] const std::vector<std::string> &unknown_critical_oids() const {
        return unknown_critical_oids_;
    }

    [[nodiscard]] bool verify_signed_by(const ParsedCertificate &issuer) const;
    [[nodiscard]] std::string to_pem() const;
    [[nodiscard]] x509_st *handle() const { return x509_.get(); }

    bool operator==(const ParsedCertificate &other) const { return raw_der_ == other.raw_der_; }

  private:
    friend ParsedCertificate parse_certificate_der(std::span<const uint8_t> der);

    ParsedCertificate() = default;

    std::shared_ptr<x509_st> x509_;
    std::vector<uint8_t> raw_der_;
    std::string subject_cn_;
    std::string issuer_cn_;
    std::vector<DomainPattern> san_;
    std::optional<DelegationInfo> delegation_info_;
    std::optional<KeyUsageSet> key_usage_;
    bool is_ca_ = false;
    std::optional<int> basic_path_len_;
    std::vector<uint8_t> serial_;
    int64_t not_before_ = 0;
    int64_t not_after_ = 0;
    std::vector<uint8_t> public_key_;
    std::optional<std::string> crl_url_;
    std::optional<std::string> revocation_dns_suffix_;
    std::vector<std::string> unknown_critical_oids_;
};

inline bool is_decert(const ParsedCertificate &cert) { return cert.delegation_info().has_value(); }

// Standards-conformant X.509 v3 DER signed by issuer_key. Enforces the DeCert
// shape (critical DelegationInfo, cA FALSE, non-empty SAN) and a non-empty
// validity window; throws Error{PolicyViolation} otherwise.
std::vector<uint8_t> build_certificate(const CertTemplate &tpl, const ParsedCertificate &issuer,
                                       const PrivateKey &issuer_key);
// Same encoder without the shape checks; exists so tests can materialize the
// invalid certificates the validator must reject.
std::vector<uint8_t> build_certificate_unchecked(const CertTemplate &tpl,
                                                 const std::string &issuer_common_name,
                                                 const PrivateKey &issuer_key,
                                                 bool delegation_info_critical = true);
std::vector<uint8_t> build_self_signed(const CertTemplate &tpl, const PrivateKey &key);

ParsedCertificate parse_certificate_der(std::span<const uint8_t> der);
// Accepts DER or PEM ("-----BEGIN CERTIFICATE-----").
ParsedCertificate parse_certificate(std::span<const uint8_t> input);
ParsedCertificate parse_certificate(std::string_view input);

std::vector<ParsedCertificate> parse_pem_certificates(std::string_view text);
std::vector<ParsedCertificate> load_pem_certificates(const std::filesystem::path &path);
std::string to_pem_chain(const std::vector<ParsedCertificate> &certs);

std::vector<uint8_t> random_serial(const RandomBytes &random);

// Leaf-first: decert_count leading DeCerts, one EEC, then ca_count CA
// certificates (the trust anchor itself is never part of the chain).
struct CertificateChain {
    std::vector<ParsedCertificate> certs;
    size_t decert_count = 0;

    [[nodiscard]] size_t eec_index() const { return decert_count; }
    [[nodiscard]] const ParsedCertificate &eec() const { return certs[decert_count]; }
    [[nodiscard]] size_t ca_count() const { return certs.size() - decert_count - 1; }
};

// Throws Error{ChainMalformed} when a DeCert appears above a non-DeCert, the
// DeCert segment hangs off a CA certificate, adjacent issuer/subject names
// disagree, or there is no EEC at all.
CertificateChain split_chain(std::vector<ParsedCertificate> raw_chain);

// Scope carried by a DeCert: SAN patterns as include, DelegationInfo excludes.
DomainScope delegation_scope(const ParsedCertificate &cert);
// Scope an EEC may delegate from: each exact SAN entry d additionally grants
// the subtree under d, since the owner of d owns its subdomains.
DomainScope eec_issuer_scope(const ParsedCertificate &cert);
// Literal SAN patterns, for matching a hostname against a plain certificate.
DomainScope hostname_scope(const ParsedCertificate &cert);

std::string_view delegation_info_oid();
std::string_view revocation_dns_oid();

}  // namespace decert
