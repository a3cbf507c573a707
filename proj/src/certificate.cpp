#include "decert/certificate.hpp"

#include <algorithm>
#include <cstring>
#include <ctime>
#include <fstream>
#include <sstream>

#include <openssl/asn1.h>
#include <openssl/pem.h>

#include "decert/der.hpp"
#include "decert/encoding.hpp"
#include "decert/error.hpp"
#include "openssl_util.hpp"

#ifndef DECERT_DELEGATION_INFO_OID
#define DECERT_DELEGATION_INFO_OID "1.3.6.1.4.1.57264.100.1"
#endif
#ifndef DECERT_REVOCATION_DNS_OID
#define DECERT_REVOCATION_DNS_OID "1.3.6.1.4.1.57264.100.2"
#endif

namespace decert {

namespace {

using ossl::Ptr;

Ptr<ASN1_OBJECT> oid_object(std::string_view oid) {
    Ptr<ASN1_OBJECT> obj(OBJ_txt2obj(std::string(oid).c_str(), 1));
    if (!obj) ossl::fail(ErrorCode::SigningFailure, "bad OID");
    return obj;
}

Ptr<X509_NAME> cn_name(const std::string &common_name) {
    Ptr<X509_NAME> name(X509_NAME_new());
    if (!name ||
        X509_NAME_add_entry_by_txt(name.get(), "CN", MBSTRING_ASC,
                                   reinterpret_cast<const unsigned char *>(common_name.c_str()),
                                   -1, -1, 0) != 1)
        ossl::fail(ErrorCode::SigningFailure, "subject name build failed");
    return name;
}

void add_extension_raw(X509 *x, std::string_view oid, bool critical,
                       std::span<const uint8_t> payload) {
    auto obj = oid_object(oid);
    Ptr<ASN1_OCTET_STRING> data(ASN1_OCTET_STRING_new());
    if (!data || ASN1_OCTET_STRING_set(data.get(), payload.data(),
                                       static_cast<int>(payload.size())) != 1)
        ossl::fail(ErrorCode::SigningFailure, "extension payload failed");
    Ptr<X509_EXTENSION> ext(
        X509_EXTENSION_create_by_OBJ(nullptr, obj.get(), critical ? 1 : 0, data.get()));
    if (!ext || X509_add_ext(x, ext.get(), -1) != 1)
        ossl::fail(ErrorCode::SigningFailure, "extension append failed");
}

void set_time(ASN1_TIME *slot, int64_t at) {
    if (!ASN1_TIME_set(slot, static_cast<time_t>(at)))
        throw Error(ErrorCode::ClockError, "time encode failed");
}

int64_t get_time(const ASN1_TIME *value) {
    std::tm tm{};
    if (ASN1_TIME_to_tm(value, &tm) != 1)
        throw Error(ErrorCode::MalformedCertificate, "bad validity time");
    return static_cast<int64_t>(timegm(&tm));
}

std::string name_common_name(X509_NAME *name) {
    int index = X509_NAME_get_index_by_NID(name, NID_commonName, -1);
    if (index < 0) return {};
    ASN1_STRING *data = X509_NAME_ENTRY_get_data(X509_NAME_get_entry(name, index));
    unsigned char *utf8 = nullptr;
    int size = ASN1_STRING_to_UTF8(&utf8, data);
    if (size < 0) return {};
    std::string out(reinterpret_cast<char *>(utf8), static_cast<size_t>(size));
    OPENSSL_free(utf8);
    return out;
}

const char *const kKnownExtensionOids[] = {
    "2.5.29.19",  // basicConstraints
    "2.5.29.15",  // keyUsage
    "2.5.29.17",  // subjectAltName
    "2.5.29.37",  // extendedKeyUsage
    "2.5.29.14",  // subjectKeyIdentifier
    "2.5.29.35",  // authorityKeyIdentifier
    "2.5.29.31",  // crlDistributionPoints
    DECERT_REVOCATION_DNS_OID,
};

std::vector<uint8_t> encode_and_sign(X509 *x, const PrivateKey &issuer_key) {
    const EVP_MD *md =
        issuer_key.algorithm() == KeyAlgorithm::EcdsaP256 ? EVP_sha256() : nullptr;
    if (X509_sign(x, issuer_key.handle(), md) == 0)
        ossl::fail(ErrorCode::SigningFailure, "certificate signing failed");
    int size = i2d_X509(x, nullptr);
    if (size <= 0) ossl::fail(ErrorCode::SigningFailure, "certificate encode failed");
    std::vector<uint8_t> out(static_cast<size_t>(size));
    unsigned char *p = out.data();
    i2d_X509(x, &p);
    return out;
}

std::vector<uint8_t> build_der(const CertTemplate &tpl, const std::string &issuer_cn,
                               const PrivateKey &issuer_key, bool delegation_info_critical) {
    Ptr<X509> x(X509_new());
    if (!x) ossl::fail(ErrorCode::SigningFailure, "X509 alloc failed");
    X509_set_version(x.get(), 2);

    if (tpl.serial.empty() || tpl.serial.size() > 20)
        throw Error(ErrorCode::PolicyViolation, "serial must be 1..20 octets");
    Ptr<BIGNUM> bn(BN_bin2bn(tpl.serial.data(), static_cast<int>(tpl.serial.size()), nullptr));
    if (!bn || !BN_to_ASN1_INTEGER(bn.get(), X509_get_serialNumber(x.get())))
        ossl::fail(ErrorCode::SigningFailure, "serial encode failed");

    auto subject = cn_name(tpl.subject_common_name);
    auto issuer = cn_name(issuer_cn);
    X509_set_subject_name(x.get(), subject.get());
    X509_set_issuer_name(x.get(), issuer.get());

    set_time(X509_getm_notBefore(x.get()), tpl.not_before);
    set_time(X509_getm_notAfter(x.get()), tpl.not_after);

    const unsigned char *spki = tpl.public_key.data();
    Ptr<EVP_PKEY> pub(d2i_PUBKEY(nullptr, &spki, static_cast<long>(tpl.public_key.size())));
    if (!pub || X509_set_pubkey(x.get(), pub.get()) != 1)
        ossl::fail(ErrorCode::SigningFailure, "public key set failed");

    {
        BASIC_CONSTRAINTS bc{};
        bc.ca = tpl.is_ca ? 1 : 0;
        Ptr<ASN1_INTEGER> pathlen;
        if (tpl.is_ca && tpl.basic_path_len) {
            pathlen.reset(ASN1_INTEGER_new());
            ASN1_INTEGER_set(pathlen.get(), *tpl.basic_path_len);
            bc.pathlen = pathlen.get();
        }
        if (X509_add1_ext_i2d(x.get(), NID_basic_constraints, &bc, 1, 0) != 1)
            ossl::fail(ErrorCode::SigningFailure, "basicConstraints failed");
    }

    if (tpl.key_usage) {
        Ptr<ASN1_OCTET_STRING> bits(ASN1_BIT_STRING_new());
        for (int index : tpl.key_usage->indices())
            ASN1_BIT_STRING_set_bit(reinterpret_cast<ASN1_BIT_STRING *>(bits.get()), index, 1);
        if (X509_add1_ext_i2d(x.get(), NID_key_usage, bits.get(), 1, 0) != 1)
            ossl::fail(ErrorCode::SigningFailure, "keyUsage failed");
    }

    if (!tpl.san.empty()) {
        Ptr<GENERAL_NAMES> names(sk_GENERAL_NAME_new_null());
        for (const auto &pattern : tpl.san) {
            GENERAL_NAME *gn = GENERAL_NAME_new();
            ASN1_IA5STRING *value = ASN1_IA5STRING_new();
            const std::string text = pattern.text();
            ASN1_STRING_set(value, text.data(), static_cast<int>(text.size()));
            GENERAL_NAME_set0_value(gn, GEN_DNS, value);
            sk_GENERAL_NAME_push(names.get(), gn);
        }
        if (X509_add1_ext_i2d(x.get(), NID_subject_alt_name, names.get(), 0, 0) != 1)
            ossl::fail(ErrorCode::SigningFailure, "subjectAltName failed");
    }

    if (tpl.delegation_info)
        add_extension_raw(x.get(), DECERT_DELEGATION_INFO_OID, delegation_info_critical,
                          encode_delegation_info(*tpl.delegation_info));

    if (tpl.crl_url) {
        X509V3_CTX ctx;
        X509V3_set_ctx_nodb(&ctx);
        X509V3_set_ctx(&ctx, nullptr, x.get(), nullptr, nullptr, 0);
        Ptr<X509_EXTENSION> ext(X509V3_EXT_nconf_nid(nullptr, &ctx, NID_crl_distribution_points,
                                                     ("URI:" + *tpl.crl_url).c_str()));
        if (!ext || X509_add_ext(x.get(), ext.get(), -1) != 1)
            ossl::fail(ErrorCode::SigningFailure, "crlDistributionPoints failed");
    }

    if (tpl.revocation_dns_suffix) {
        std::vector<uint8_t> payload;
        der::append_ia5(payload, *tpl.revocation_dns_suffix);
        add_extension_raw(x.get(), DECERT_REVOCATION_DNS_OID, false, payload);
    }

    return encode_and_sign(x.get(), issuer_key);
}

}  // namespace

KeyUsageSet KeyUsageSet::of(std::initializer_list<int> indices) {
    KeyUsageSet set;
    for (int index : indices) set.set(index);
    return set;
}

std::optional<KeyUsageSet> KeyUsageSet::parse(std::string_view csv) {
    KeyUsageSet set;
    size_t pos = 0;
    while (pos < csv.size()) {
        size_t comma = csv.find(',', pos);
        if (comma == std::string_view::npos) comma = csv.size();
        std::string token(csv.substr(pos, comma - pos));
        if (token.empty() || token.find_first_not_of("0123456789") != std::string::npos)
            return std::nullopt;
        int value = std::stoi(token);
        if (value < 0 || value > 8) return std::nullopt;
        set.set(value);
        pos = comma + 1;
    }
    return set;
}

void KeyUsageSet::set(int index) {
    if (index < 0 || index > 8) throw Error(ErrorCode::PolicyViolation, "key usage bit out of range");
    bits = static_cast<uint16_t>(bits | (1u << index));
}

std::vector<int> KeyUsageSet::indices() const {
    std::vector<int> out;
    for (int i = 0; i <= 8; ++i)
        if (contains(i)) out.push_back(i);
    return out;
}

std::string KeyUsageSet::text() const {
    std::string out;
    for (int index : indices()) {
        if (!out.empty()) out.push_back(',');
        out += std::to_string(index);
    }
    return out;
}

std::string ParsedCertificate::serial_hex() const { return hex_encode(serial_); }

bool ParsedCertificate::verify_signed_by(const ParsedCertificate &issuer) const {
    EVP_PKEY *pub = X509_get0_pubkey(issuer.x509_.get());
    if (!pub) return false;
    int rc = X509_verify(x509_.get(), pub);
    ERR_clear_error();
    return rc == 1;
}

std::string ParsedCertificate::to_pem() const {
    Ptr<BIO> bio(BIO_new(BIO_s_mem()));
    if (PEM_write_bio_X509(bio.get(), x509_.get()) != 1)
        ossl::fail(ErrorCode::IoError, "PEM write failed");
    auto bytes = ossl::bio_bytes(bio.get());
    return {bytes.begin(), bytes.end()};
}

std::vector<uint8_t> build_certificate(const CertTemplate &tpl, const ParsedCertificate &issuer,
                                       const PrivateKey &issuer_key) {
    if (tpl.not_before >= tpl.not_after)
        throw Error(ErrorCode::PolicyViolation, "empty validity window");
    if (tpl.delegation_info) {
        if (tpl.is_ca)
            throw Error(ErrorCode::PolicyViolation, "a DeCert must carry cA=FALSE");
        if (tpl.san.empty())
            throw Error(ErrorCode::PolicyViolation, "a DeCert requires a non-empty SAN");
    }
    return build_der(tpl, issuer.subject_common_name(), issuer_key, true);
}

std::vector<uint8_t> build_certificate_unchecked(const CertTemplate &tpl,
                                                 const std::string &issuer_common_name,
                                                 const PrivateKey &issuer_key,
                                                 bool delegation_info_critical) {
    return build_der(tpl, issuer_common_name, issuer_key, delegation_info_critical);
}

std::vector<uint8_t> build_self_signed(const CertTemplate &tpl, const PrivateKey &key) {
    if (tpl.not_before >= tpl.not_after)
        throw Error(ErrorCode::PolicyViolation, "empty validity window");
    return build_der(tpl, tpl.subject_common_name, key, true);
}

ParsedCertificate parse_certificate_der(std::span<const uint8_t> der) {
    const unsigned char *p = der.data();
    X509 *raw = d2i_X509(nullptr, &p, static_cast<long>(der.size()));
    if (!raw || p != der.data() + der.size()) {
        X509_free(raw);
        ERR_clear_error();
        throw Error(ErrorCode::MalformedCertificate, "X.509 DER parse failed");
    }

    ParsedCertificate cert;
    cert.x509_ = std::shared_ptr<X509>(raw, ossl::Deleter{});
    cert.raw_der_.assign(der.begin(), der.end());
    cert.subject_cn_ = name_common_name(X509_get_subject_name(raw));
    cert.issuer_cn_ = name_common_name(X509_get_issuer_name(raw));
    cert.not_before_ = get_time(X509_get0_notBefore(raw));
    cert.not_after_ = get_time(X509_get0_notAfter(raw));

    {
        const ASN1_INTEGER *serial = X509_get0_serialNumber(raw);
        Ptr<BIGNUM> bn(ASN1_INTEGER_to_BN(serial, nullptr));
        if (!bn) throw Error(ErrorCode::MalformedCertificate, "bad serial");
        cert.serial_.resize(std::max(BN_num_bytes(bn.get()), 1));
        BN_bn2bin(bn.get(), cert.serial_.data());
        if (BN_is_zero(bn.get())) cert.serial_ = {0x00};
    }

    {
        X509_PUBKEY *pub = X509_get_X509_PUBKEY(raw);
        int size = i2d_X509_PUBKEY(pub, nullptr);
        if (size <= 0) throw Error(ErrorCode::MalformedCertificate, "bad SubjectPublicKeyInfo");
        cert.public_key_.resize(static_cast<size_t>(size));
        unsigned char *out = cert.public_key_.data();
        i2d_X509_PUBKEY(pub, &out);
    }

    {
        Ptr<GENERAL_NAMES> names(static_cast<GENERAL_NAMES *>(
            X509_get_ext_d2i(raw, NID_subject_alt_name, nullptr, nullptr)));
        if (names) {
            for (int i = 0; i < sk_GENERAL_NAME_num(names.get()); ++i) {
                GENERAL_NAME *gn = sk_GENERAL_NAME_value(names.get(), i);
                if (gn->type != GEN_DNS) continue;
                const unsigned char *data = ASN1_STRING_get0_data(gn->d.dNSName);
                std::string text(reinterpret_cast<const char *>(data),
                                 static_cast<size_t>(ASN1_STRING_length(gn->d.dNSName)));
                try {
                    cert.san_.push_back(parse_pattern(text));
                } catch (const Error &) {
                    throw Error(ErrorCode::MalformedCertificate, "bad SAN dNSName '" + text + "'");
                }
            }
            std::sort(cert.san_.begin(), cert.san_.end());
            cert.san_.erase(std::unique(cert.san_.begin(), cert.san_.end()), cert.san_.end());
        }
    }

    {
        BASIC_CONSTRAINTS *bc = static_cast<BASIC_CONSTRAINTS *>(
            X509_get_ext_d2i(raw, NID_basic_constraints, nullptr, nullptr));
        if (bc) {
            cert.is_ca_ = bc->ca != 0;
            if (bc->pathlen) cert.basic_path_len_ = static_cast<int>(ASN1_INTEGER_get(bc->pathlen));
            BASIC_CONSTRAINTS_free(bc);
        }
    }

    if (X509_get_ext_by_NID(raw, NID_key_usage, -1) >= 0) {
        ASN1_BIT_STRING *bits = static_cast<ASN1_BIT_STRING *>(
            X509_get_ext_d2i(raw, NID_key_usage, nullptr, nullptr));
        KeyUsageSet set;
        if (bits) {
            for (int i = 0; i <= 8; ++i)
                if (ASN1_BIT_STRING_get_bit(bits, i)) set.set(i);
            ASN1_BIT_STRING_free(bits);
        }
        cert.key_usage_ = set;
    }

    {
        STACK_OF(DIST_POINT) *points = static_cast<STACK_OF(DIST_POINT) *>(
            X509_get_ext_d2i(raw, NID_crl_distribution_points, nullptr, nullptr));
        if (points) {
            for (int i = 0; i < sk_DIST_POINT_num(points) && !cert.crl_url_; ++i) {
                DIST_POINT *dp = sk_DIST_POINT_value(points, i);
                if (!dp->distpoint || dp->distpoint->type != 0) continue;
                GENERAL_NAMES *full = dp->distpoint->name.fullname;
                for (int j = 0; j < sk_GENERAL_NAME_num(full); ++j) {
                    GENERAL_NAME *gn = sk_GENERAL_NAME_value(full, j);
                    if (gn->type != GEN_URI) continue;
                    const unsigned char *data = ASN1_STRING_get0_data(gn->d.uniformResourceIdentifier);
                    cert.crl_url_ = std::string(
                        reinterpret_cast<const char *>(data),
                        static_cast<size_t>(ASN1_STRING_length(gn->d.uniformResourceIdentifier)));
                    break;
                }
            }
            sk_DIST_POINT_pop_free(points, DIST_POINT_free);
        }
    }

    auto delegation_oid = oid_object(DECERT_DELEGATION_INFO_OID);
    auto revocation_oid = oid_object(DECERT_REVOCATION_DNS_OID);
    for (int i = 0; i < X509_get_ext_count(raw); ++i) {
        X509_EXTENSION *ext = X509_get_ext(raw, i);
        ASN1_OBJECT *obj = X509_EXTENSION_get_object(ext);
        bool critical = X509_EXTENSION_get_critical(ext) != 0;
        ASN1_OCTET_STRING *data = X509_EXTENSION_get_data(ext);
        std::span<const uint8_t> payload(ASN1_STRING_get0_data(data),
                                         static_cast<size_t>(ASN1_STRING_length(data)));

        if (OBJ_cmp(obj, delegation_oid.get()) == 0) {
            if (!critical)
                throw Error(ErrorCode::MalformedCertificate,
                            "DelegationInfo extension must be marked critical");
            try {
                cert.delegation_info_ = decode_delegation_info(payload);
            } catch (const Error &e) {
                throw Error(ErrorCode::MalformedCertificate,
                            std::string("bad DelegationInfo payload: ") + e.what());
            }
            continue;
        }
        if (OBJ_cmp(obj, revocation_oid.get()) == 0) {
            try {
                der::Reader reader(payload);
                cert.revocation_dns_suffix_ = reader.read_ia5();
                reader.expect_end();
            } catch (const Error &) {
                throw Error(ErrorCode::MalformedCertificate, "bad revocation DNS suffix payload");
            }
            continue;
        }
        if (!critical) continue;

        char oid_text[128];
        OBJ_obj2txt(oid_text, sizeof(oid_text), obj, 1);
        bool known = false;
        for (const char *known_oid : kKnownExtensionOids)
            if (std::strcmp(oid_text, known_oid) == 0) known = true;
        if (!known) cert.unknown_critical_oids_.emplace_back(oid_text);
    }

    return cert;
}

ParsedCertificate parse_certificate(std::span<const uint8_t> input) {
    std::string_view text(reinterpret_cast<const char *>(input.data()), input.size());
    if (text.find("-----BEGIN") != std::string_view::npos) return parse_certificate(text);
    return parse_certificate_der(input);
}

ParsedCertificate parse_certificate(std::string_view input) {
    if (input.find("-----BEGIN") == std::string_view::npos)
        return parse_certificate_der(
            {reinterpret_cast<const uint8_t *>(input.data()), input.size()});
    auto certs = parse_pem_certificates(input);
    if (certs.size() != 1)
        throw Error(ErrorCode::MalformedCertificate, "expected exactly one PEM certificate");
    return certs.front();
}

std::vector<ParsedCertificate> parse_pem_certificates(std::string_view text) {
    Ptr<BIO> bio(BIO_new_mem_buf(text.data(), static_cast<int>(text.size())));
    std::vector<ParsedCertificate> out;
    while (true) {
        Ptr<X509> x(PEM_read_bio_X509(bio.get(), nullptr, nullptr, nullptr));
        if (!x) break;
        int size = i2d_X509(x.get(), nullptr);
        std::vector<uint8_t> der(static_cast<size_t>(size));
        unsigned char *p = der.data();
        i2d_X509(x.get(), &p);
        out.push_back(parse_certificate_der(der));
    }
    ERR_clear_error();
    if (out.empty()) throw Error(ErrorCode::MalformedCertificate, "no PEM certificates found");
    return out;
}

std::vector<ParsedCertificate> load_pem_certificates(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_pem_certificates(buf.str());
}

std::string to_pem_chain(const std::vector<ParsedCertificate> &certs) {
    std::string out;
    for (const auto &cert : certs) out += cert.to_pem();
    return out;
}

std::vector<uint8_t> random_serial(const RandomBytes &random) {
    std::vector<uint8_t> serial(16);
    random(serial);
    serial[0] &= 0x7F;               // positive
    if (serial[0] == 0) serial[0] = 0x01;  // keep the full 16-octet width
    return serial;
}

CertificateChain split_chain(std::vector<ParsedCertificate> raw_chain) {
    if (raw_chain.empty()) throw Error(ErrorCode::ChainMalformed, "empty chain");

    for (size_t i = 0; i + 1 < raw_chain.size(); ++i) {
        if (raw_chain[i].issuer_common_name() != raw_chain[i + 1].subject_common_name())
            throw Error(ErrorCode::ChainMalformed,
                        "issuer/subject mismatch between positions " + std::to_string(i) + " and " +
                            std::to_string(i + 1));
    }

    size_t decert_count = 0;
    while (decert_count < raw_chain.size() && is_decert(raw_chain[decert_count])) ++decert_count;
    if (decert_count == raw_chain.size())
        throw Error(ErrorCode::ChainMalformed, "chain has no end-entity certificate");

    for (size_t i = decert_count + 1; i < raw_chain.size(); ++i)
        if (is_decert(raw_chain[i]))
            throw Error(ErrorCode::ChainMalformed,
                        "DeCert above a non-DeCert at position " + std::to_string(i));

    if (decert_count > 0 && raw_chain[decert_count].is_ca())
        throw Error(ErrorCode::ChainMalformed, "DeCert segment hangs off a CA certificate");

    CertificateChain chain;
    chain.certs = std::move(raw_chain);
    chain.decert_count = decert_count;
    return chain;
}

DomainScope delegation_scope(const ParsedCertificate &cert) {
    std::vector<DomainName> excludes;
    if (cert.delegation_info()) excludes = cert.delegation_info()->exclude_domains;
    return DomainScope::make(cert.san_patterns(), std::move(excludes));
}

DomainScope eec_issuer_scope(const ParsedCertificate &cert) {
    std::vector<DomainPattern> include;
    for (const auto &pattern : cert.san_patterns()) {
        include.push_back(pattern);
        if (pattern.kind == PatternKind::Exact)
            include.push_back(DomainPattern{PatternKind::Subtree, pattern.base});
    }
    return DomainScope::make(std::move(include), {});
}

DomainScope hostname_scope(const ParsedCertificate &cert) {
    return DomainScope::make(cert.san_patterns(), {});
}

std::string_view delegation_info_oid() { return DECERT_DELEGATION_INFO_OID; }
std::string_view revocation_dns_oid() { return DECERT_REVOCATION_DNS_OID; }

}  // namespace decert
