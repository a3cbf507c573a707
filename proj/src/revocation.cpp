#include "decert/revocation.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <openssl/pem.h>

#include "decert/encoding.hpp"
#include "decert/error.hpp"
#include "openssl_util.hpp"

namespace decert {

namespace {

using ossl::Ptr;

constexpr std::string_view kRevokedLabel = "_decert-revoked";
constexpr std::string_view kRevokedValuePrefix = "revoked=1";

std::string record_line(const RevocationRecord &record) {
    return hex_encode(record.serial) + "\t" + std::to_string(record.revoked_at) + "\t" +
           record.reason + "\n";
}

std::optional<RevocationRecord> parse_record_line(const std::string &line) {
    size_t tab1 = line.find('\t');
    if (tab1 == std::string::npos) return std::nullopt;
    size_t tab2 = line.find('\t', tab1 + 1);
    if (tab2 == std::string::npos) return std::nullopt;
    auto serial = hex_decode(line.substr(0, tab1));
    if (!serial || serial->empty()) return std::nullopt;
    RevocationRecord record;
    record.serial = std::move(*serial);
    try {
        record.revoked_at = std::stoll(line.substr(tab1 + 1, tab2 - tab1 - 1));
    } catch (const std::exception &) {
        return std::nullopt;
    }
    record.reason = line.substr(tab2 + 1);
    return record;
}

int64_t asn1_time_to_unix(const ASN1_TIME *value) {
    std::tm tm{};
    if (ASN1_TIME_to_tm(value, &tm) != 1)
        throw Error(ErrorCode::MalformedCertificate, "bad CRL time");
    return static_cast<int64_t>(timegm(&tm));
}

}  // namespace

RevocationStore::RevocationStore(RevocationStore &&other) noexcept {
    std::lock_guard lock(other.mutex_);
    path_ = std::move(other.path_);
    by_serial_hex_ = std::move(other.by_serial_hex_);
    generation_ = other.generation_;
}

RevocationStore RevocationStore::open(const std::filesystem::path &path) {
    RevocationStore store;
    store.path_ = path;
    if (!std::filesystem::exists(path)) {
        if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
        std::ofstream touch(path, std::ios::app);
        if (!touch) throw Error(ErrorCode::IoError, "cannot create " + path.string());
        return store;
    }
    store.reload();
    return store;
}

void RevocationStore::reload() {
    std::ifstream in(path_);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + path_.string());
    std::map<std::string, RevocationRecord> loaded;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto record = parse_record_line(line);
        if (!record) throw Error(ErrorCode::IoError, "corrupt revocation store " + path_.string());
        loaded.emplace(hex_encode(record->serial), std::move(*record));
    }
    std::lock_guard lock(mutex_);
    if (loaded.size() != by_serial_hex_.size()) ++generation_;
    by_serial_hex_ = std::move(loaded);
}

RevocationRecord RevocationStore::revoke(const std::vector<uint8_t> &serial,
                                         const std::string &reason, const Clock &clock) {
    std::lock_guard lock(mutex_);
    std::string key = hex_encode(serial);
    if (by_serial_hex_.contains(key))
        throw Error(ErrorCode::AlreadyRevoked, "serial " + key + " is already revoked");

    RevocationRecord record{serial, clock(), reason};
    std::ofstream out(path_, std::ios::app);
    if (!out || !(out << record_line(record)))
        throw Error(ErrorCode::IoError, "cannot append to " + path_.string());
    out.flush();
    by_serial_hex_.emplace(std::move(key), record);
    ++generation_;
    return record;
}

bool RevocationStore::contains(const std::vector<uint8_t> &serial) const {
    std::lock_guard lock(mutex_);
    return by_serial_hex_.contains(hex_encode(serial));
}

size_t RevocationStore::size() const {
    std::lock_guard lock(mutex_);
    return by_serial_hex_.size();
}

std::vector<RevocationRecord> RevocationStore::records() const {
    std::lock_guard lock(mutex_);
    std::vector<RevocationRecord> out;
    out.reserve(by_serial_hex_.size());
    for (const auto &[_, record] : by_serial_hex_) out.push_back(record);
    std::sort(out.begin(), out.end(), [](const auto &a, const auto &b) {
        return std::tie(a.serial, a.revoked_at) < std::tie(b.serial, b.revoked_at);
    });
    return out;
}

uint64_t RevocationStore::generation() const {
    std::lock_guard lock(mutex_);
    return generation_;
}

CrlDocument CrlDocument::build(const RevocationStore &store, const ParsedCertificate &issuer,
                               const PrivateKey &issuer_key, const Clock &clock,
                               int64_t lifetime_seconds) {
    Ptr<X509_CRL> crl(X509_CRL_new());
    if (!crl) ossl::fail(ErrorCode::SigningFailure, "CRL alloc failed");
    X509_CRL_set_version(crl.get(), 1);  // v2

    if (X509_CRL_set_issuer_name(crl.get(), X509_get_subject_name(issuer.handle())) != 1)
        ossl::fail(ErrorCode::SigningFailure, "CRL issuer failed");

    int64_t now = clock();
    Ptr<ASN1_STRING> this_update(ASN1_TIME_new());
    Ptr<ASN1_STRING> next_update(ASN1_TIME_new());
    ASN1_TIME_set(reinterpret_cast<ASN1_TIME *>(this_update.get()), static_cast<time_t>(now));
    ASN1_TIME_set(reinterpret_cast<ASN1_TIME *>(next_update.get()),
                  static_cast<time_t>(now + lifetime_seconds));
    X509_CRL_set1_lastUpdate(crl.get(), reinterpret_cast<ASN1_TIME *>(this_update.get()));
    X509_CRL_set1_nextUpdate(crl.get(), reinterpret_cast<ASN1_TIME *>(next_update.get()));

    for (const auto &record : store.records()) {
        X509_REVOKED *revoked = X509_REVOKED_new();
        Ptr<BIGNUM> bn(BN_bin2bn(record.serial.data(), static_cast<int>(record.serial.size()), nullptr));
        Ptr<ASN1_STRING> serial(reinterpret_cast<ASN1_STRING *>(BN_to_ASN1_INTEGER(bn.get(), nullptr)));
        Ptr<ASN1_STRING> when(ASN1_TIME_new());
        ASN1_TIME_set(reinterpret_cast<ASN1_TIME *>(when.get()),
                      static_cast<time_t>(record.revoked_at));
        if (!revoked ||
            X509_REVOKED_set_serialNumber(revoked, reinterpret_cast<ASN1_INTEGER *>(serial.get())) != 1 ||
            X509_REVOKED_set_revocationDate(revoked, reinterpret_cast<ASN1_TIME *>(when.get())) != 1 ||
            X509_CRL_add0_revoked(crl.get(), revoked) != 1) {
            X509_REVOKED_free(revoked);
            ossl::fail(ErrorCode::SigningFailure, "CRL entry failed");
        }
    }
    X509_CRL_sort(crl.get());

    const EVP_MD *md = issuer_key.algorithm() == KeyAlgorithm::EcdsaP256 ? EVP_sha256() : nullptr;
    if (X509_CRL_sign(crl.get(), issuer_key.handle(), md) == 0)
        ossl::fail(ErrorCode::SigningFailure, "CRL signing failed");

    int size = i2d_X509_CRL(crl.get(), nullptr);
    std::vector<uint8_t> der(static_cast<size_t>(size));
    unsigned char *p = der.data();
    i2d_X509_CRL(crl.get(), &p);
    return from_der(der);
}

CrlDocument CrlDocument::from_der(std::span<const uint8_t> der) {
    const unsigned char *p = der.data();
    X509_CRL *raw = d2i_X509_CRL(nullptr, &p, static_cast<long>(der.size()));
    if (!raw) {
        ERR_clear_error();
        throw Error(ErrorCode::MalformedCertificate, "CRL DER parse failed");
    }

    CrlDocument doc;
    doc.crl_ = std::shared_ptr<X509_CRL>(raw, ossl::Deleter{});

    int index = X509_NAME_get_index_by_NID(X509_CRL_get_issuer(raw), NID_commonName, -1);
    if (index >= 0) {
        ASN1_STRING *data =
            X509_NAME_ENTRY_get_data(X509_NAME_get_entry(X509_CRL_get_issuer(raw), index));
        unsigned char *utf8 = nullptr;
        int size = ASN1_STRING_to_UTF8(&utf8, data);
        if (size >= 0) {
            doc.issuer_cn_.assign(reinterpret_cast<char *>(utf8), static_cast<size_t>(size));
            OPENSSL_free(utf8);
        }
    }

    doc.this_update_ = asn1_time_to_unix(X509_CRL_get0_lastUpdate(raw));
    const ASN1_TIME *next = X509_CRL_get0_nextUpdate(raw);
    if (!next) throw Error(ErrorCode::MalformedCertificate, "CRL lacks nextUpdate");
    doc.next_update_ = asn1_time_to_unix(next);
    if (doc.next_update_ <= doc.this_update_)
        throw Error(ErrorCode::MalformedCertificate, "CRL nextUpdate not after thisUpdate");

    STACK_OF(X509_REVOKED) *revoked = X509_CRL_get_REVOKED(raw);
    for (int i = 0; i < sk_X509_REVOKED_num(revoked); ++i) {
        X509_REVOKED *entry = sk_X509_REVOKED_value(revoked, i);
        Ptr<BIGNUM> bn(ASN1_INTEGER_to_BN(X509_REVOKED_get0_serialNumber(entry), nullptr));
        RevocationRecord record;
        record.serial.resize(std::max(BN_num_bytes(bn.get()), 1));
        BN_bn2bin(bn.get(), record.serial.data());
        if (BN_is_zero(bn.get())) record.serial = {0x00};
        record.revoked_at = asn1_time_to_unix(X509_REVOKED_get0_revocationDate(entry));
        doc.entries_.push_back(std::move(record));
    }
    std::sort(doc.entries_.begin(), doc.entries_.end(),
              [](const auto &a, const auto &b) { return a.serial < b.serial; });
    return doc;
}

std::vector<CrlDocument> CrlDocument::from_pem(std::string_view text) {
    Ptr<BIO> bio(BIO_new_mem_buf(text.data(), static_cast<int>(text.size())));
    std::vector<CrlDocument> out;
    while (true) {
        Ptr<X509_CRL> crl(PEM_read_bio_X509_CRL(bio.get(), nullptr, nullptr, nullptr));
        if (!crl) break;
        int size = i2d_X509_CRL(crl.get(), nullptr);
        std::vector<uint8_t> der(static_cast<size_t>(size));
        unsigned char *p = der.data();
        i2d_X509_CRL(crl.get(), &p);
        out.push_back(from_der(der));
    }
    ERR_clear_error();
    if (out.empty()) throw Error(ErrorCode::MalformedCertificate, "no PEM CRLs found");
    return out;
}

std::vector<CrlDocument> CrlDocument::load(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    std::string text = buf.str();
    if (text.find("-----BEGIN") != std::string::npos) return from_pem(text);
    return {from_der({reinterpret_cast<const uint8_t *>(text.data()), text.size()})};
}

bool CrlDocument::lists(const std::vector<uint8_t> &serial) const {
    return std::any_of(entries_.begin(), entries_.end(),
                       [&](const auto &record) { return record.serial == serial; });
}

bool CrlDocument::verify(const ParsedCertificate &issuer) const {
    EVP_PKEY *pub = X509_get0_pubkey(issuer.handle());
    if (!pub) return false;
    int rc = X509_CRL_verify(crl_.get(), pub);
    ERR_clear_error();
    return rc == 1;
}

std::vector<uint8_t> CrlDocument::to_der() const {
    int size = i2d_X509_CRL(crl_.get(), nullptr);
    std::vector<uint8_t> out(static_cast<size_t>(size));
    unsigned char *p = out.data();
    i2d_X509_CRL(crl_.get(), &p);
    return out;
}

std::string CrlDocument::to_pem() const {
    Ptr<BIO> bio(BIO_new(BIO_s_mem()));
    if (PEM_write_bio_X509_CRL(bio.get(), crl_.get()) != 1)
        ossl::fail(ErrorCode::IoError, "CRL PEM write failed");
    auto bytes = ossl::bio_bytes(bio.get());
    return {bytes.begin(), bytes.end()};
}

std::string_view revocation_status_name(RevocationStatus status) {
    switch (status) {
        case RevocationStatus::NotRevoked: return "NotRevoked";
        case RevocationStatus::Revoked: return "Revoked";
        case RevocationStatus::StaleCrl: return "StaleCRL";
        case RevocationStatus::LookupFailed: return "LookupFailed";
    }
    return "?";
}

RevocationStatus check_crl(const ParsedCertificate &cert, const CrlDocument &crl, int64_t at) {
    if (at > crl.next_update()) return RevocationStatus::StaleCrl;
    return crl.lists(cert.serial()) ? RevocationStatus::Revoked : RevocationStatus::NotRevoked;
}

DomainName dns_record_name(const std::vector<uint8_t> &serial, const DomainName &issuer_domain) {
    return issuer_domain.child(kRevokedLabel).child(hex_encode(serial));
}

RevocationStatus check_dns(const ParsedCertificate &cert, TxtResolver &resolver) {
    std::string issuer_domain_text =
        cert.revocation_dns_suffix() ? *cert.revocation_dns_suffix() : cert.issuer_common_name();
    auto issuer_domain = DomainName::try_parse(issuer_domain_text);
    if (!issuer_domain) return RevocationStatus::LookupFailed;

    auto lookup = resolver.txt(dns_record_name(cert.serial(), *issuer_domain));
    switch (lookup.outcome) {
        case TxtLookup::Outcome::NotFound: return RevocationStatus::NotRevoked;
        case TxtLookup::Outcome::Error: return RevocationStatus::LookupFailed;
        case TxtLookup::Outcome::Found: break;
    }
    for (const auto &value : lookup.values)
        if (value.starts_with(kRevokedValuePrefix)) return RevocationStatus::Revoked;
    return RevocationStatus::NotRevoked;
}

RevocationZone export_zone(const RevocationStore &store, const DomainName &issuer_domain) {
    RevocationZone zone;
    for (const auto &record : store.records()) {
        auto owner = dns_record_name(record.serial, issuer_domain);
        zone.records[owner.text()] = std::string(kRevokedValuePrefix) + ";t=" +
                                     std::to_string(record.revoked_at);
    }
    return zone;
}

std::string zone_to_text(const RevocationZone &zone) {
    std::string out;
    for (const auto &[owner, value] : zone.records)
        out += owner + ". 300 IN TXT \"" + value + "\"\n";
    return out;
}

RevocationZone parse_zone_text(std::string_view text) {
    RevocationZone zone;
    size_t pos = 0;
    while (pos < text.size()) {
        size_t eol = text.find('\n', pos);
        if (eol == std::string_view::npos) eol = text.size();
        std::string line(text.substr(pos, eol - pos));
        pos = eol + 1;
        if (line.empty() || line[0] == ';') continue;

        std::istringstream fields(line);
        std::string owner, ttl, klass, type;
        if (!(fields >> owner >> ttl >> klass >> type) || klass != "IN" || type != "TXT")
            throw Error(ErrorCode::IoError, "unparseable zone line: " + line);
        std::string rest;
        std::getline(fields, rest);
        size_t open = rest.find('"');
        size_t close = rest.rfind('"');
        if (open == std::string::npos || close <= open)
            throw Error(ErrorCode::IoError, "unquoted TXT value: " + line);
        if (!owner.empty() && owner.back() == '.') owner.pop_back();
        zone.records[owner] = rest.substr(open + 1, close - open - 1);
    }
    return zone;
}

TxtLookup ZoneResolver::txt(const DomainName &name) {
    auto found = zone_.records.find(name.text());
    if (found == zone_.records.end()) return {TxtLookup::Outcome::NotFound, {}};
    return {TxtLookup::Outcome::Found, {found->second}};
}

}  // namespace decert
