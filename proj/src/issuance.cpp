#include "decert/issuance.hpp"

#include <algorithm>
#include <fstream>

#include <openssl/pem.h>

#include "decert/delegation_info.hpp"
#include "decert/encoding.hpp"
#include "decert/error.hpp"
#include "openssl_util.hpp"

namespace decert {

namespace {

using ossl::Ptr;

constexpr int64_t kBackdateSeconds = 60;

void add_request_extension(STACK_OF(X509_EXTENSION) *exts, std::string_view oid, bool critical,
                           std::span<const uint8_t> payload) {
    Ptr<ASN1_OBJECT> obj(OBJ_txt2obj(std::string(oid).c_str(), 1));
    Ptr<ASN1_STRING> data(ASN1_OCTET_STRING_new());
    if (!obj || !data ||
        ASN1_OCTET_STRING_set(reinterpret_cast<ASN1_OCTET_STRING *>(data.get()), payload.data(),
                              static_cast<int>(payload.size())) != 1)
        ossl::fail(ErrorCode::SigningFailure, "request extension payload failed");
    X509_EXTENSION *ext = X509_EXTENSION_create_by_OBJ(
        nullptr, obj.get(), critical ? 1 : 0,
        reinterpret_cast<ASN1_OCTET_STRING *>(data.get()));
    if (!ext || sk_X509_EXTENSION_push(exts, ext) <= 0)
        ossl::fail(ErrorCode::SigningFailure, "request extension append failed");
}

std::string policy_codes_text(const std::vector<PolicyViolation> &violations) {
    std::string out;
    for (const auto &violation : violations) {
        if (!out.empty()) out += ", ";
        out += policy_code_name(violation.code);
    }
    return out;
}

}  // namespace

std::string_view policy_code_name(PolicyCode code) {
    switch (code) {
        case PolicyCode::IncludeNotSubset: return "IncludeNotSubset";
        case PolicyCode::ExcludeNotSubset: return "ExcludeNotSubset";
        case PolicyCode::KeyUsageNotSubset: return "KeyUsageNotSubset";
        case PolicyCode::PathLenExceeded: return "PathLenExceeded";
        case PolicyCode::UnsupportedAlgorithm: return "UnsupportedAlgorithm";
        case PolicyCode::KeyTooSmall: return "KeyTooSmall";
        case PolicyCode::ProofInvalid: return "ProofInvalid";
    }
    return "?";
}

DelegationRequest DelegationRequest::create(const std::string &subject_common_name,
                                            const PrivateKey &key, const DomainScope &scope,
                                            const std::optional<KeyUsageSet> &key_usage,
                                            uint32_t path_len) {
    if (scope.include.empty())
        throw Error(ErrorCode::MalformedRequest, "a delegation request needs include patterns");

    Ptr<X509_REQ> req(X509_REQ_new());
    if (!req) ossl::fail(ErrorCode::SigningFailure, "CSR alloc failed");
    X509_REQ_set_version(req.get(), 0);

    Ptr<X509_NAME> name(X509_NAME_new());
    if (!name ||
        X509_NAME_add_entry_by_txt(name.get(), "CN", MBSTRING_ASC,
                                   reinterpret_cast<const unsigned char *>(
                                       subject_common_name.c_str()),
                                   -1, -1, 0) != 1 ||
        X509_REQ_set_subject_name(req.get(), name.get()) != 1)
        ossl::fail(ErrorCode::SigningFailure, "CSR subject failed");

    if (X509_REQ_set_pubkey(req.get(), key.handle()) != 1)
        ossl::fail(ErrorCode::SigningFailure, "CSR public key failed");

    STACK_OF(X509_EXTENSION) *exts = sk_X509_EXTENSION_new_null();

    {
        Ptr<GENERAL_NAMES> names(sk_GENERAL_NAME_new_null());
        for (const auto &pattern : scope.include) {
            GENERAL_NAME *gn = GENERAL_NAME_new();
            ASN1_IA5STRING *value = ASN1_IA5STRING_new();
            const std::string text = pattern.text();
            ASN1_STRING_set(value, text.data(), static_cast<int>(text.size()));
            GENERAL_NAME_set0_value(gn, GEN_DNS, value);
            sk_GENERAL_NAME_push(names.get(), gn);
        }
        unsigned char *der = nullptr;
        int size = i2d_GENERAL_NAMES(names.get(), &der);
        if (size <= 0) ossl::fail(ErrorCode::SigningFailure, "CSR SAN failed");
        add_request_extension(exts, "2.5.29.17", false, {der, static_cast<size_t>(size)});
        OPENSSL_free(der);
    }

    if (key_usage) {
        Ptr<ASN1_STRING> bits(ASN1_BIT_STRING_new());
        for (int index : key_usage->indices())
            ASN1_BIT_STRING_set_bit(reinterpret_cast<ASN1_BIT_STRING *>(bits.get()), index, 1);
        unsigned char *der = nullptr;
        int size = i2d_ASN1_BIT_STRING(reinterpret_cast<ASN1_BIT_STRING *>(bits.get()), &der);
        if (size <= 0) ossl::fail(ErrorCode::SigningFailure, "CSR keyUsage failed");
        add_request_extension(exts, "2.5.29.15", true, {der, static_cast<size_t>(size)});
        OPENSSL_free(der);
    }

    {
        DelegationInfo info;
        info.exclude_domains = scope.exclude;
        info.delegation_path_len = path_len;
        add_request_extension(exts, delegation_info_oid(), true, encode_delegation_info(info));
    }

    int added = X509_REQ_add_extensions(req.get(), exts);
    sk_X509_EXTENSION_pop_free(exts, X509_EXTENSION_free);
    if (added != 1) ossl::fail(ErrorCode::SigningFailure, "CSR extensions failed");

    const EVP_MD *md = key.algorithm() == KeyAlgorithm::EcdsaP256 ? EVP_sha256() : nullptr;
    if (X509_REQ_sign(req.get(), key.handle(), md) == 0)
        ossl::fail(ErrorCode::SigningFailure, "CSR signing failed");

    int size = i2d_X509_REQ(req.get(), nullptr);
    std::vector<uint8_t> der(static_cast<size_t>(size));
    unsigned char *p = der.data();
    i2d_X509_REQ(req.get(), &p);
    return from_der(der);
}

DelegationRequest DelegationRequest::from_der(std::span<const uint8_t> der) {
    const unsigned char *p = der.data();
    X509_REQ *raw = d2i_X509_REQ(nullptr, &p, static_cast<long>(der.size()));
    if (!raw || p != der.data() + der.size()) {
        X509_REQ_free(raw);
        ERR_clear_error();
        throw Error(ErrorCode::MalformedRequest, "PKCS#10 parse failed");
    }

    DelegationRequest request;
    request.req_ = std::shared_ptr<X509_REQ>(raw, ossl::Deleter{});
    request.der_.assign(der.begin(), der.end());

    int index = X509_NAME_get_index_by_NID(X509_REQ_get_subject_name(raw), NID_commonName, -1);
    if (index < 0) throw Error(ErrorCode::MalformedRequest, "CSR subject lacks a common name");
    ASN1_STRING *cn =
        X509_NAME_ENTRY_get_data(X509_NAME_get_entry(X509_REQ_get_subject_name(raw), index));
    unsigned char *utf8 = nullptr;
    int cn_size = ASN1_STRING_to_UTF8(&utf8, cn);
    if (cn_size < 0) throw Error(ErrorCode::MalformedRequest, "CSR subject unreadable");
    request.subject_cn_.assign(reinterpret_cast<char *>(utf8), static_cast<size_t>(cn_size));
    OPENSSL_free(utf8);

    {
        X509_PUBKEY *pub = X509_REQ_get_X509_PUBKEY(raw);
        int size = i2d_X509_PUBKEY(pub, nullptr);
        if (size <= 0) throw Error(ErrorCode::MalformedRequest, "CSR public key unreadable");
        request.public_key_.resize(static_cast<size_t>(size));
        unsigned char *out = request.public_key_.data();
        i2d_X509_PUBKEY(pub, &out);
    }

    STACK_OF(X509_EXTENSION) *exts = X509_REQ_get_extensions(raw);
    std::vector<DomainPattern> include;
    std::vector<DomainName> exclude;
    bool saw_delegation_info = false;
    Ptr<ASN1_OBJECT> delegation_oid(OBJ_txt2obj(std::string(delegation_info_oid()).c_str(), 1));
    for (int i = 0; i < sk_X509_EXTENSION_num(exts); ++i) {
        X509_EXTENSION *ext = sk_X509_EXTENSION_value(exts, i);
        ASN1_OBJECT *obj = X509_EXTENSION_get_object(ext);
        ASN1_OCTET_STRING *data = X509_EXTENSION_get_data(ext);
        std::span<const uint8_t> payload(ASN1_STRING_get0_data(data),
                                         static_cast<size_t>(ASN1_STRING_length(data)));

        if (OBJ_obj2nid(obj) == NID_subject_alt_name) {
            const unsigned char *q = payload.data();
            Ptr<GENERAL_NAMES> names(
                d2i_GENERAL_NAMES(nullptr, &q, static_cast<long>(payload.size())));
            if (!names) throw Error(ErrorCode::MalformedRequest, "CSR SAN unreadable");
            for (int j = 0; j < sk_GENERAL_NAME_num(names.get()); ++j) {
                GENERAL_NAME *gn = sk_GENERAL_NAME_value(names.get(), j);
                if (gn->type != GEN_DNS) continue;
                std::string text(
                    reinterpret_cast<const char *>(ASN1_STRING_get0_data(gn->d.dNSName)),
                    static_cast<size_t>(ASN1_STRING_length(gn->d.dNSName)));
                try {
                    include.push_back(parse_pattern(text));
                } catch (const Error &) {
                    sk_X509_EXTENSION_pop_free(exts, X509_EXTENSION_free);
                    throw Error(ErrorCode::MalformedRequest, "CSR SAN entry '" + text + "'");
                }
            }
        } else if (OBJ_obj2nid(obj) == NID_key_usage) {
            const unsigned char *q = payload.data();
            ASN1_BIT_STRING *bits =
                d2i_ASN1_BIT_STRING(nullptr, &q, static_cast<long>(payload.size()));
            if (bits) {
                KeyUsageSet set;
                for (int b = 0; b <= 8; ++b)
                    if (ASN1_BIT_STRING_get_bit(bits, b)) set.set(b);
                request.key_usage_ = set;
                ASN1_BIT_STRING_free(bits);
            }
        } else if (OBJ_cmp(obj, delegation_oid.get()) == 0) {
            try {
                auto info = decode_delegation_info(payload);
                exclude = info.exclude_domains;
                request.path_len_ = info.effective_path_len();
                saw_delegation_info = true;
            } catch (const Error &e) {
                sk_X509_EXTENSION_pop_free(exts, X509_EXTENSION_free);
                throw Error(ErrorCode::MalformedRequest,
                            std::string("CSR DelegationInfo: ") + e.what());
            }
        }
    }
    sk_X509_EXTENSION_pop_free(exts, X509_EXTENSION_free);

    if (include.empty())
        throw Error(ErrorCode::MalformedRequest, "CSR carries no requested include patterns");
    if (!saw_delegation_info)
        throw Error(ErrorCode::MalformedRequest, "CSR lacks the DelegationInfo request extension");

    request.scope_ = DomainScope::make(std::move(include), std::move(exclude));
    return request;
}

bool DelegationRequest::verify_proof() const {
    EVP_PKEY *pub = X509_REQ_get0_pubkey(req_.get());
    if (!pub) return false;
    int rc = X509_REQ_verify(req_.get(), pub);
    ERR_clear_error();
    return rc == 1;
}

std::vector<PolicyViolation> policy_check(const DelegationRequest &request,
                                          const IssuerPolicy &policy,
                                          const DomainScope &issuer_scope,
                                          const std::optional<KeyUsageSet> &issuer_key_usage,
                                          uint32_t issuer_path_budget) {
    std::vector<PolicyViolation> out;

    if (!request.verify_proof())
        out.push_back({PolicyCode::ProofInvalid, "proof of possession does not verify"});

    auto algorithm = spki_algorithm(request.public_key());
    if (!algorithm || !policy.allowed_key_algorithms.contains(*algorithm)) {
        out.push_back({PolicyCode::UnsupportedAlgorithm, "key algorithm not acceptable"});
    } else if (spki_key_bits(request.public_key()) < policy.min_key_bits) {
        out.push_back({PolicyCode::KeyTooSmall,
                       "key below " + std::to_string(policy.min_key_bits) + " bits"});
    }

    auto include_verdict = scope_subset_of(request.requested_scope(), issuer_scope);
    if (!include_verdict.is_subset)
        out.push_back({PolicyCode::IncludeNotSubset,
                       "requested scope exceeds the issuer's authority"});

    auto exclude_verdict =
        excludes_within_include(request.requested_scope().exclude, issuer_scope.include);
    if (!exclude_verdict.is_subset)
        out.push_back({PolicyCode::ExcludeNotSubset,
                       "requested excludes fall outside the issuer's include set"});

    if (request.requested_key_usage()) {
        if (issuer_key_usage && !request.requested_key_usage()->is_subset_of(*issuer_key_usage))
            out.push_back({PolicyCode::KeyUsageNotSubset,
                           "requested key usage is not a subset of the issuer's"});
        if (policy.allowed_key_usage &&
            !request.requested_key_usage()->is_subset_of(*policy.allowed_key_usage))
            out.push_back({PolicyCode::KeyUsageNotSubset,
                           "requested key usage is not allowed by policy"});
    }

    if (issuer_path_budget < 1)
        out.push_back({PolicyCode::PathLenExceeded, "issuer's path budget permits no delegation"});
    else if (request.requested_path_len() > issuer_path_budget - 1)
        out.push_back({PolicyCode::PathLenExceeded,
                       "requested path length " + std::to_string(request.requested_path_len()) +
                           " exceeds budget " + std::to_string(issuer_path_budget) + " - 1"});

    return out;
}

std::vector<PolicyViolation> policy_check_against(const DelegationRequest &request,
                                                  const IssuerPolicy &policy,
                                                  const ParsedCertificate &issuer_cert) {
    DomainScope issuer_scope =
        is_decert(issuer_cert) ? delegation_scope(issuer_cert) : eec_issuer_scope(issuer_cert);
    uint32_t budget = is_decert(issuer_cert)
                          ? issuer_cert.delegation_info()->effective_path_len()
                          : policy.max_path_len;
    return policy_check(request, policy, issuer_scope, issuer_cert.key_usage(), budget);
}

ParsedCertificate issue_decert(const DelegationRequest &request,
                               const ParsedCertificate &issuer_cert, const PrivateKey &issuer_key,
                               const IssuerPolicy &policy, const Clock &clock,
                               const IssueOptions &options, const RandomBytes &random) {
    auto violations = policy_check_against(request, policy, issuer_cert);
    if (!violations.empty())
        throw Error(ErrorCode::PolicyViolation, "request fails policy: " + policy_codes_text(violations));

    int64_t validity = options.validity_seconds.value_or(policy.default_validity_seconds);
    if (validity <= 0 || validity > policy.max_validity_seconds)
        throw Error(ErrorCode::PolicyViolation, "validity outside policy bounds");

    int64_t now = clock();
    if (now <= 0) throw Error(ErrorCode::ClockError, "clock reports a non-positive time");

    CertTemplate tpl;
    tpl.subject_common_name = request.subject_common_name();
    tpl.san = request.requested_scope().include;
    tpl.key_usage = request.requested_key_usage();
    DelegationInfo info;
    info.exclude_domains = request.requested_scope().exclude;
    info.delegation_path_len = request.requested_path_len();
    tpl.delegation_info = info;
    tpl.serial = random_serial(random);
    tpl.not_before = now - kBackdateSeconds;
    tpl.not_after = tpl.not_before + validity;
    tpl.public_key = request.public_key();
    tpl.crl_url = options.crl_url;
    tpl.revocation_dns_suffix = options.revocation_dns_suffix;

    return parse_certificate_der(build_certificate(tpl, issuer_cert, issuer_key));
}

ParsedCertificate renew_decert(const ParsedCertificate &existing,
                               const ParsedCertificate &issuer_cert, const PrivateKey &issuer_key,
                               const Clock &clock, bool reuse_key, const PrivateKey *rotated_key,
                               std::optional<int64_t> validity_seconds,
                               const RevocationStore *store, const RandomBytes &random) {
    if (!is_decert(existing))
        throw Error(ErrorCode::UnknownSubject, "certificate is not a DeCert");
    if (!existing.verify_signed_by(issuer_cert))
        throw Error(ErrorCode::UnknownSubject, "certificate was not issued by this issuer");
    if (store && store->contains(existing.serial()))
        throw Error(ErrorCode::RevokedSubject,
                    "serial " + existing.serial_hex() + " has been revoked");
    if (!reuse_key && !rotated_key)
        throw Error(ErrorCode::PolicyViolation, "key rotation requires a replacement key");

    int64_t validity = validity_seconds.value_or(existing.not_after() - existing.not_before());
    int64_t now = clock();
    if (now <= 0) throw Error(ErrorCode::ClockError, "clock reports a non-positive time");

    CertTemplate tpl;
    tpl.subject_common_name = existing.subject_common_name();
    tpl.san = existing.san_patterns();
    tpl.key_usage = existing.key_usage();
    tpl.delegation_info = existing.delegation_info();
    tpl.serial = random_serial(random);
    tpl.not_before = now - kBackdateSeconds;
    tpl.not_after = tpl.not_before + validity;
    tpl.public_key = reuse_key ? existing.public_key() : rotated_key->spki();
    tpl.crl_url = existing.crl_url();
    tpl.revocation_dns_suffix = existing.revocation_dns_suffix();

    return parse_certificate_der(build_certificate(tpl, issuer_cert, issuer_key));
}

IssuedStore IssuedStore::open(const std::filesystem::path &directory) {
    std::filesystem::create_directories(directory);
    IssuedStore store;
    store.directory_ = directory;
    return store;
}

void IssuedStore::record(const ParsedCertificate &cert) {
    std::lock_guard lock(mutex_);
    auto path = directory_ / (cert.serial_hex() + ".pem");
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out || !(out << cert.to_pem()))
        throw Error(ErrorCode::IoError, "cannot write " + path.string());
}

std::optional<ParsedCertificate> IssuedStore::find(const std::vector<uint8_t> &serial) const {
    std::lock_guard lock(mutex_);
    auto path = directory_ / (hex_encode(serial) + ".pem");
    if (!std::filesystem::exists(path)) return std::nullopt;
    auto certs = load_pem_certificates(path);
    if (certs.size() != 1) return std::nullopt;
    return certs.front();
}

size_t IssuedStore::size() const {
    std::lock_guard lock(mutex_);
    size_t count = 0;
    for (const auto &entry : std::filesystem::directory_iterator(directory_))
        if (entry.path().extension() == ".pem") ++count;
    return count;
}

}  // namespace decert
